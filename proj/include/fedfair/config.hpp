#pragma once

// Run configuration: file parsing, validation, named presets, and
// experiment assembly.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedfair/engine.hpp"

namespace fedfair {

struct DatasetSpec {
    std::string type = "synthetic";  // synthetic | idx
    std::size_t n = 12000;
    std::size_t features = 5;
    int classes = 5;
    double class_separation = 1.6;
    std::int64_t seed = -1;  // < 0: derived from the run seed
    std::string images;      // idx paths
    std::string labels;
};

struct PartitionSpec {
    std::string type = "iid";  // iid | dirichlet | label_shard
    double alpha = 0.3;
    std::size_t min_size = 2;
    std::size_t shards_per_client = 2;
};

struct PopulationSpec {
    std::size_t clients = 100;
    HeterogeneitySpec heterogeneity;
    std::string profiles_file;  // bypasses sample_profiles when set
};

struct BudgetSpecLine {
    double limit = std::numeric_limits<double>::infinity();
    double local_cost = 0.0;
    double global_cost = 0.0;
};

struct RunConfig {
    std::string preset;  // name echoed for provenance; fields below are resolved
    DatasetSpec dataset;
    PartitionSpec partition;
    PopulationSpec population;
    TrainingConfig training;
    SelectionConfig selection;
    std::map<std::string, BudgetSpecLine> budget;
    std::vector<std::string> policies = {"fedfair3"};
    std::vector<std::uint64_t> seeds = {1};
    double test_fraction = 0.2;
    std::string output_dir = "out";
};

// Known preset names (resolved counts and hyperparameters).
std::vector<std::string> preset_names();
RunConfig preset_config(const std::string& name);

// Parses and validates a config file. Unknown keys are rejected in strict
// mode and reported as warnings to stderr when lenient. Validation problems
// are collected field-by-field and thrown as one error.
RunConfig parse_and_validate(const std::string& path, bool lenient = false);
RunConfig parse_and_validate_text(const std::string& json_text, bool lenient = false);

// Fully-resolved config dump; itself a valid config that reproduces the run.
std::string config_to_json(const RunConfig& cfg);

// Deterministically builds the dataset, partition, per-client split,
// profiles, and round times for one run seed.
struct PreparedExperiment {
    LabeledDataset dataset;
    ExperimentSetup setup;
};
std::unique_ptr<PreparedExperiment> prepare_experiment(const RunConfig& cfg, std::uint64_t seed);

ResourceBudget budget_from_config(const RunConfig& cfg);

// Command drivers shared by the CLI and the tests. Each (policy, seed) cell
// writes result_<policy>_seed<seed>.json into out_dir; merged reports are
// written once at the end. parallel > 1 runs cells on that many threads.
std::vector<ExperimentResult> cmd_run(const RunConfig& cfg, const std::string& policy,
                                      const std::string& out_dir, int parallel = 1);
std::vector<ExperimentResult> cmd_compare(const RunConfig& cfg,
                                          const std::vector<std::string>& policies,
                                          const std::string& out_dir, int parallel = 1);
std::vector<ExperimentResult> cmd_sweep(const RunConfig& cfg, const std::string& parameter,
                                        const std::vector<double>& values,
                                        const std::string& out_dir, int parallel = 1);

}  // namespace fedfair
