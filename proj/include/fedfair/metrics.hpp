#pragma once

// Fairness and performance measurement plus report emission.

#include <map>
#include <string>
#include <vector>

#include "fedfair/dataset.hpp"
#include "fedfair/model.hpp"

namespace fedfair {

struct RoundRecord {
    int round = 0;                      // 1-based
    double global_accuracy = 0.0;       // pooled test set
    std::vector<double> per_client_accuracy;
    double accuracy_variance = 0.0;     // population variance of per-client accuracy
    double cosine_uniformity = 0.0;     // cosine similarity with the all-ones vector
    double jain_participation = 0.0;
    std::vector<int> participation_counts;
    double sim_clock_s = 0.0;           // cumulative simulated wall clock
    std::vector<int> selected;          // draw order
};

struct ExperimentResult {
    int schema_version = 1;
    std::string policy;
    std::uint64_t seed = 0;
    bool stopped_by_budget = false;
    std::vector<RoundRecord> rounds;
    ModelParams final_model;
    std::vector<double> final_per_client_accuracy;
    std::vector<int> final_participation_counts;
    std::map<std::string, double> budget_accumulated;
};

// Top-1 accuracy of the model on each client's held-out shard. Argmax ties
// break toward the lowest class id.
std::vector<double> accuracy_per_client(const ModelParams& params,
                                        const std::vector<ClientShard>& test_shards,
                                        const LabeledDataset& ds);

// Accuracy over an explicit index set (used for the pooled test set).
double accuracy_on(const ModelParams& params, const LabeledDataset& ds,
                   const std::vector<std::size_t>& indices);

// Population variance (divide by N).
double variance_uniformity(const std::vector<double>& perf);

// (mean of perf) / sqrt(mean of perf^2); 1 iff the vector is constant.
double cosine_uniformity(const std::vector<double>& perf);

// Jain index (sum c)^2 / (N * sum c^2) over participation counts.
double participation_fairness(const std::vector<int>& counts);

std::string result_to_json(const ExperimentResult& result);
ExperimentResult result_from_json(const std::string& text);

// Writes rounds.csv, summary.json (mean +/- sample std-dev over seeds per
// policy), and SVG line charts into out_dir.
void emit_reports(const std::vector<ExperimentResult>& results, const std::string& out_dir);

}  // namespace fedfair
