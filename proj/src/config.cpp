#include "fedfair/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "fedfair/rng.hpp"
#include "json.hpp"

namespace fedfair {

namespace {

using nlohmann::json;

const std::map<std::string, std::set<std::string>> kKnownKeys = {
    {"", {"preset", "dataset", "partition", "population", "training", "selection", "budget",
          "policies", "seeds", "test_fraction", "output_dir"}},
    {"dataset", {"type", "n", "features", "classes", "class_separation", "seed", "images",
                 "labels"}},
    {"partition", {"type", "alpha", "min_size", "shards_per_client"}},
    {"population",
     {"clients", "sigma_compute", "sigma_energy", "sigma_overhead", "median_compute",
      "median_energy", "median_overhead", "bandwidth_min", "bandwidth_max", "straggler_fraction",
      "straggler_slowdown", "straggler_max_compute", "profiles_file"}},
    {"training", {"T", "beta", "q", "eta", "tau", "kappa", "clients_per_round", "rounds"}},
    {"selection", {"round_cap", "decay", "normalize_lambda", "qffl_q"}},
    {"budget_line", {"limit", "local_cost", "global_cost"}},
};

void collect_unknown_keys(const json& obj, const std::string& section, const std::string& path,
                          std::vector<std::string>& unknown) {
    const auto it = kKnownKeys.find(section);
    if (it == kKnownKeys.end()) return;
    for (const auto& [key, value] : obj.items()) {
        if (!it->second.count(key)) {
            unknown.push_back(path.empty() ? key : path + "." + key);
        }
    }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

struct Problems {
    std::vector<std::string> items;
    void add(const std::string& field, const std::string& what) {
        items.push_back(field + ": " + what);
    }
    void raise_if_any(const std::string& header) const {
        if (items.empty()) return;
        std::string msg = header;
        for (const auto& item : items) msg += "\n  - " + item;
        throw std::invalid_argument(msg);
    }
};

void validate(const RunConfig& cfg, Problems& problems) {
    const auto& d = cfg.dataset;
    if (d.type != "synthetic" && d.type != "idx") {
        problems.add("dataset.type", "must be 'synthetic' or 'idx', got '" + d.type + "'");
    }
    if (d.type == "synthetic") {
        if (d.classes < 2) problems.add("dataset.classes", "must be >= 2");
        if (d.features < 1) problems.add("dataset.features", "must be >= 1");
        if (d.n < static_cast<std::size_t>(std::max(d.classes, 1))) {
            problems.add("dataset.n", "must be >= dataset.classes");
        }
        if (d.class_separation < 0) problems.add("dataset.class_separation", "must be >= 0");
    } else if (d.type == "idx") {
        if (d.images.empty()) problems.add("dataset.images", "required for idx datasets");
        if (d.labels.empty()) problems.add("dataset.labels", "required for idx datasets");
        for (const auto& [field, path] :
             {std::pair{"dataset.images", d.images}, std::pair{"dataset.labels", d.labels}}) {
            if (!path.empty() && !std::filesystem::exists(path)) {
                problems.add(field, "file does not exist: " + path);
            }
        }
    }

    const auto& p = cfg.partition;
    if (p.type != "iid" && p.type != "dirichlet" && p.type != "label_shard") {
        problems.add("partition.type", "must be iid|dirichlet|label_shard, got '" + p.type + "'");
    }
    if (p.type == "dirichlet" && p.alpha <= 0) problems.add("partition.alpha", "must be > 0");
    if (p.min_size < 2) {
        problems.add("partition.min_size", "must be >= 2 so every client has a held-out split");
    }
    if (p.type == "label_shard" && p.shards_per_client < 1) {
        problems.add("partition.shards_per_client", "must be >= 1");
    }

    const auto& pop = cfg.population;
    if (pop.clients < 1) problems.add("population.clients", "must be >= 1");
    const auto& h = pop.heterogeneity;
    if (h.sigma_compute < 0 || h.sigma_energy < 0 || h.sigma_overhead < 0) {
        problems.add("population.sigma_*", "sigmas must be >= 0");
    }
    if (h.median_compute <= 0 || h.median_energy <= 0 || h.median_overhead <= 0) {
        problems.add("population.median_*", "medians must be > 0");
    }
    if (h.bandwidth_min < 0 || h.bandwidth_max < h.bandwidth_min) {
        problems.add("population.bandwidth_min/max", "need 0 <= min <= max");
    }
    if (h.straggler_fraction < 0 || h.straggler_fraction > 1) {
        problems.add("population.straggler_fraction", "must be in [0, 1]");
    }
    if (h.straggler_slowdown < 1) problems.add("population.straggler_slowdown", "must be >= 1");
    if (!pop.profiles_file.empty() && !std::filesystem::exists(pop.profiles_file)) {
        problems.add("population.profiles_file", "file does not exist: " + pop.profiles_file);
    }

    const auto& t = cfg.training;
    if (t.preferred_round_time <= 0) problems.add("training.T", "must be > 0");
    if (t.beta < 0) problems.add("training.beta", "must be >= 0");
    if (t.q < 0) problems.add("training.q", "must be >= 0");
    if (t.eta <= 0) problems.add("training.eta", "must be > 0");
    if (t.tau < 1) problems.add("training.tau", "must be >= 1");
    if (t.kappa < 1) problems.add("training.kappa", "must be >= 1");
    if (t.clients_per_round < 1) problems.add("training.clients_per_round", "must be >= 1");
    if (t.clients_per_round > pop.clients) {
        problems.add("training.clients_per_round", "must be <= population.clients");
    }

    const auto& s = cfg.selection;
    if (s.round_cap < 0) problems.add("selection.round_cap", "must be >= 0");
    if (s.decay <= 0 || s.decay > 1) problems.add("selection.decay", "must be in (0, 1]");
    if (s.qffl_q < 0) problems.add("selection.qffl_q", "must be >= 0");

    for (const auto& [type, line] : cfg.budget) {
        if (line.limit < 0) problems.add("budget." + type + ".limit", "must be >= 0");
        if (line.local_cost < 0) problems.add("budget." + type + ".local_cost", "must be >= 0");
        if (line.global_cost < 0) problems.add("budget." + type + ".global_cost", "must be >= 0");
    }

    if (cfg.policies.empty()) problems.add("policies", "must list at least one policy");
    for (const auto& name : cfg.policies) {
        try {
            policy_from_string(name);
        } catch (const std::exception& e) {
            problems.add("policies", e.what());
        }
    }

    if (cfg.seeds.empty()) problems.add("seeds", "must list at least one seed");
    std::set<std::uint64_t> unique_seeds(cfg.seeds.begin(), cfg.seeds.end());
    if (unique_seeds.size() != cfg.seeds.size()) problems.add("seeds", "must be duplicate-free");

    if (cfg.test_fraction <= 0 || cfg.test_fraction >= 1) {
        problems.add("test_fraction", "must be in (0, 1)");
    }
    if (cfg.output_dir.empty()) problems.add("output_dir", "must not be empty");
}

RunConfig overlay(RunConfig cfg, const json& j) {
    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        read_field(d, "type", cfg.dataset.type);
        read_field(d, "n", cfg.dataset.n);
        read_field(d, "features", cfg.dataset.features);
        read_field(d, "classes", cfg.dataset.classes);
        read_field(d, "class_separation", cfg.dataset.class_separation);
        read_field(d, "seed", cfg.dataset.seed);
        read_field(d, "images", cfg.dataset.images);
        read_field(d, "labels", cfg.dataset.labels);
    }
    if (j.contains("partition")) {
        const auto& p = j["partition"];
        read_field(p, "type", cfg.partition.type);
        read_field(p, "alpha", cfg.partition.alpha);
        read_field(p, "min_size", cfg.partition.min_size);
        read_field(p, "shards_per_client", cfg.partition.shards_per_client);
    }
    if (j.contains("population")) {
        const auto& p = j["population"];
        read_field(p, "clients", cfg.population.clients);
        auto& h = cfg.population.heterogeneity;
        read_field(p, "sigma_compute", h.sigma_compute);
        read_field(p, "sigma_energy", h.sigma_energy);
        read_field(p, "sigma_overhead", h.sigma_overhead);
        read_field(p, "median_compute", h.median_compute);
        read_field(p, "median_energy", h.median_energy);
        read_field(p, "median_overhead", h.median_overhead);
        read_field(p, "bandwidth_min", h.bandwidth_min);
        read_field(p, "bandwidth_max", h.bandwidth_max);
        read_field(p, "straggler_fraction", h.straggler_fraction);
        read_field(p, "straggler_slowdown", h.straggler_slowdown);
        read_field(p, "straggler_max_compute", h.straggler_max_compute);
        read_field(p, "profiles_file", cfg.population.profiles_file);
    }
    if (j.contains("training")) {
        const auto& t = j["training"];
        read_field(t, "T", cfg.training.preferred_round_time);
        read_field(t, "beta", cfg.training.beta);
        read_field(t, "q", cfg.training.q);
        read_field(t, "eta", cfg.training.eta);
        read_field(t, "tau", cfg.training.tau);
        read_field(t, "kappa", cfg.training.kappa);
        read_field(t, "clients_per_round", cfg.training.clients_per_round);
        read_field(t, "rounds", cfg.training.max_rounds);
    }
    if (j.contains("selection")) {
        const auto& s = j["selection"];
        read_field(s, "round_cap", cfg.selection.round_cap);
        read_field(s, "decay", cfg.selection.decay);
        read_field(s, "normalize_lambda", cfg.selection.normalize_lambda);
        read_field(s, "qffl_q", cfg.selection.qffl_q);
    }
    if (j.contains("budget")) {
        for (const auto& [type, line] : j["budget"].items()) {
            BudgetSpecLine spec;
            if (line.contains("limit")) {
                if (line["limit"].is_string() && line["limit"].get<std::string>() == "inf") {
                    spec.limit = std::numeric_limits<double>::infinity();
                } else {
                    spec.limit = line["limit"].get<double>();
                }
            }
            read_field(line, "local_cost", spec.local_cost);
            read_field(line, "global_cost", spec.global_cost);
            cfg.budget[type] = spec;
        }
    }
    read_field(j, "policies", cfg.policies);
    read_field(j, "seeds", cfg.seeds);
    read_field(j, "test_fraction", cfg.test_fraction);
    read_field(j, "output_dir", cfg.output_dir);
    return cfg;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"synth-iid",  "synth-noniid", "straggler",    "mnist-iid",
            "mnist-noniid", "fmnist-iid", "fmnist-noniid"};
}

RunConfig preset_config(const std::string& name) {
    RunConfig cfg;
    cfg.preset = name;
    cfg.selection.normalize_lambda = true;

    const auto table3_mnist = [&cfg] {
        // Counts from the MNIST column: 100 clients, 10 per round, 100
        // rounds, batch 100, q = 2. The convex model substitutes for the
        // paper-scale network, and eta is scaled accordingly.
        cfg.dataset.type = "idx";
        cfg.population.clients = 100;
        cfg.training.clients_per_round = 10;
        cfg.training.max_rounds = 100;
        cfg.training.kappa = 100;
        cfg.training.q = 2.0;
        cfg.training.tau = 5;
        cfg.training.eta = 2.0e5;
        cfg.training.preferred_round_time = 4.0;
        cfg.training.beta = 2.0;
        cfg.partition.min_size = 4;
    };

    if (name == "synth-iid" || name == "synth-noniid") {
        cfg.dataset = DatasetSpec{"synthetic", 60000, 5, 5, 1.6, 42, "", ""};
        cfg.population.clients = 300;
        cfg.training.clients_per_round = 20;
        cfg.training.max_rounds = 150;
        cfg.training.kappa = 64;
        cfg.training.tau = 5;
        cfg.training.q = 0.5;
        cfg.training.eta = 1.0e5;
        cfg.training.preferred_round_time = 6.0;
        cfg.training.beta = 2.0;
        cfg.selection.round_cap = 12;
        cfg.selection.decay = 0.7;
        cfg.partition = name == "synth-noniid" ? PartitionSpec{"dirichlet", 0.3, 10, 2}
                                               : PartitionSpec{"iid", 0.3, 10, 2};
    } else if (name == "straggler") {
        cfg.dataset = DatasetSpec{"synthetic", 12000, 5, 5, 1.6, -1, "", ""};
        cfg.partition = PartitionSpec{"dirichlet", 0.3, 10, 2};
        cfg.population.clients = 100;
        cfg.training.clients_per_round = 10;
        cfg.training.max_rounds = 60;
        cfg.training.kappa = 64;
        cfg.training.tau = 5;
        cfg.training.q = 0.5;
        cfg.training.eta = 1.0e4;
        cfg.training.preferred_round_time = 2.5;
        cfg.training.beta = 1.0;
        cfg.selection.round_cap = 3;
        cfg.selection.decay = 0.5;
        auto& h = cfg.population.heterogeneity;
        h.straggler_fraction = 0.2;
        h.straggler_slowdown = 8.0;
        // Cap straggler compute so their round time stays above 3.5 T.
        h.straggler_max_compute =
            static_cast<double>(cfg.training.tau * cfg.training.kappa) /
            (3.5 * cfg.training.preferred_round_time);
    } else if (name == "mnist-iid") {
        table3_mnist();
        cfg.partition.type = "iid";
    } else if (name == "mnist-noniid") {
        table3_mnist();
        cfg.partition = PartitionSpec{"dirichlet", 0.3, 4, 2};
    } else if (name == "fmnist-iid" || name == "fmnist-noniid") {
        table3_mnist();
        cfg.training.clients_per_round = 6;  // FashionMNIST column
        cfg.partition = name == "fmnist-noniid" ? PartitionSpec{"dirichlet", 0.3, 4, 2}
                                                : PartitionSpec{"iid", 0.3, 4, 2};
    } else {
        std::string names;
        for (const auto& n : preset_names()) names += (names.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown preset '" + name + "' (known: " + names + ")");
    }
    return cfg;
}

RunConfig parse_and_validate_text(const std::string& json_text, bool lenient) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config root must be a JSON object");

    std::vector<std::string> unknown;
    collect_unknown_keys(j, "", "", unknown);
    for (const char* section : {"dataset", "partition", "population", "training", "selection"}) {
        if (j.contains(section) && j[section].is_object()) {
            collect_unknown_keys(j[section], section, section, unknown);
        }
    }
    if (j.contains("budget") && j["budget"].is_object()) {
        for (const auto& [type, line] : j["budget"].items()) {
            if (line.is_object()) {
                collect_unknown_keys(line, "budget_line", "budget." + type, unknown);
            }
        }
    }
    if (!unknown.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& k : unknown) msg += " " + k;
        if (!lenient) {
            throw std::invalid_argument(msg + " (use --lenient to downgrade to a warning)");
        }
        std::cerr << "warning: " << msg << "\n";
    }

    RunConfig cfg;
    if (j.contains("preset")) cfg = preset_config(j["preset"].get<std::string>());
    cfg = overlay(std::move(cfg), j);

    Problems problems;
    validate(cfg, problems);
    problems.raise_if_any("invalid configuration:");
    return cfg;
}

RunConfig parse_and_validate(const std::string& path, bool lenient) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_and_validate_text(buf.str(), lenient);
}

std::string config_to_json(const RunConfig& cfg) {
    json j;
    if (!cfg.preset.empty()) j["preset"] = cfg.preset;
    j["dataset"] = {{"type", cfg.dataset.type},
                    {"n", cfg.dataset.n},
                    {"features", cfg.dataset.features},
                    {"classes", cfg.dataset.classes},
                    {"class_separation", cfg.dataset.class_separation},
                    {"seed", cfg.dataset.seed},
                    {"images", cfg.dataset.images},
                    {"labels", cfg.dataset.labels}};
    j["partition"] = {{"type", cfg.partition.type},
                      {"alpha", cfg.partition.alpha},
                      {"min_size", cfg.partition.min_size},
                      {"shards_per_client", cfg.partition.shards_per_client}};
    const auto& h = cfg.population.heterogeneity;
    j["population"] = {{"clients", cfg.population.clients},
                       {"sigma_compute", h.sigma_compute},
                       {"sigma_energy", h.sigma_energy},
                       {"sigma_overhead", h.sigma_overhead},
                       {"median_compute", h.median_compute},
                       {"median_energy", h.median_energy},
                       {"median_overhead", h.median_overhead},
                       {"bandwidth_min", h.bandwidth_min},
                       {"bandwidth_max", h.bandwidth_max},
                       {"straggler_fraction", h.straggler_fraction},
                       {"straggler_slowdown", h.straggler_slowdown},
                       {"straggler_max_compute", h.straggler_max_compute},
                       {"profiles_file", cfg.population.profiles_file}};
    j["training"] = {{"T", cfg.training.preferred_round_time},
                     {"beta", cfg.training.beta},
                     {"q", cfg.training.q},
                     {"eta", cfg.training.eta},
                     {"tau", cfg.training.tau},
                     {"kappa", cfg.training.kappa},
                     {"clients_per_round", cfg.training.clients_per_round},
                     {"rounds", cfg.training.max_rounds}};
    j["selection"] = {{"round_cap", cfg.selection.round_cap},
                      {"decay", cfg.selection.decay},
                      {"normalize_lambda", cfg.selection.normalize_lambda},
                      {"qffl_q", cfg.selection.qffl_q}};
    j["budget"] = json::object();
    for (const auto& [type, line] : cfg.budget) {
        json l;
        if (std::isinf(line.limit)) {
            l["limit"] = "inf";
        } else {
            l["limit"] = line.limit;
        }
        l["local_cost"] = line.local_cost;
        l["global_cost"] = line.global_cost;
        j["budget"][type] = l;
    }
    j["policies"] = cfg.policies;
    j["seeds"] = cfg.seeds;
    j["test_fraction"] = cfg.test_fraction;
    j["output_dir"] = cfg.output_dir;
    return j.dump(2);
}

std::unique_ptr<PreparedExperiment> prepare_experiment(const RunConfig& cfg, std::uint64_t seed) {
    auto prepared = std::make_unique<PreparedExperiment>();

    if (cfg.dataset.type == "synthetic") {
        const std::uint64_t ds_seed = cfg.dataset.seed >= 0
                                          ? static_cast<std::uint64_t>(cfg.dataset.seed)
                                          : rng::derive(seed, 0xDA7Au);
        prepared->dataset = generate_synthetic(cfg.dataset.n, cfg.dataset.features,
                                               cfg.dataset.classes, cfg.dataset.class_separation,
                                               ds_seed);
    } else {
        prepared->dataset = load_idx(cfg.dataset.images, cfg.dataset.labels);
    }
    const LabeledDataset& ds = prepared->dataset;

    std::vector<ClientShard> shards;
    const std::uint64_t part_seed = rng::derive(seed, 0x9A27u);
    if (cfg.partition.type == "iid") {
        shards = partition_iid(ds, cfg.population.clients, part_seed);
    } else if (cfg.partition.type == "dirichlet") {
        shards = partition_dirichlet(ds, cfg.population.clients, cfg.partition.alpha,
                                     cfg.partition.min_size, part_seed);
    } else {
        shards = partition_label_shard(ds, cfg.population.clients,
                                       cfg.partition.shards_per_client, part_seed);
    }

    auto& setup = prepared->setup;
    split_train_test(shards, cfg.test_fraction, setup.train_shards, setup.test_shards);

    if (!cfg.population.profiles_file.empty()) {
        std::ifstream in(cfg.population.profiles_file);
        std::stringstream buf;
        buf << in.rdbuf();
        setup.profiles = profiles_from_json(buf.str());
        if (setup.profiles.size() != cfg.population.clients) {
            throw std::invalid_argument("profiles file has " +
                                        std::to_string(setup.profiles.size()) + " profiles but " +
                                        std::to_string(cfg.population.clients) +
                                        " clients configured");
        }
    } else {
        setup.profiles = sample_profiles(cfg.population.clients, cfg.population.heterogeneity,
                                         setup.train_shards, rng::derive(seed, 0x9e0Fu));
    }

    setup.round_times.reserve(setup.profiles.size());
    for (const auto& p : setup.profiles) {
        setup.round_times.push_back(simulate_round_time(p, cfg.training.tau, cfg.training.kappa));
    }
    for (const auto& shard : setup.test_shards) {
        setup.pooled_test.insert(setup.pooled_test.end(), shard.indices.begin(),
                                 shard.indices.end());
    }
    std::sort(setup.pooled_test.begin(), setup.pooled_test.end());

    setup.dataset = &prepared->dataset;
    return prepared;
}

ResourceBudget budget_from_config(const RunConfig& cfg) {
    ResourceBudget budget;
    budget.tau = cfg.training.tau;
    for (const auto& [type, line] : cfg.budget) {
        budget.lines[type] = BudgetLine{line.limit, line.local_cost, line.global_cost, 0.0};
    }
    return budget;
}

namespace {

struct Cell {
    std::string policy;
    std::uint64_t seed;
    RunConfig cfg;  // per-cell config (sweeps vary it)
    std::string out_file;
};

std::vector<ExperimentResult> run_cells(const std::vector<Cell>& cells, const std::string& out_dir,
                                        int parallel) {
    std::filesystem::create_directories(out_dir);
    std::vector<ExperimentResult> results(cells.size());
    std::vector<std::string> errors(cells.size());

    const auto work = [&](std::size_t i) {
        try {
            const Cell& cell = cells[i];
            RunConfig cfg = cell.cfg;
            cfg.training.seed = cell.seed;
            const auto prepared = prepare_experiment(cfg, cell.seed);
            results[i] = run_experiment(prepared->setup, cfg.training, cfg.selection,
                                        budget_from_config(cfg),
                                        policy_from_string(cell.policy));
            std::ofstream out(cell.out_file);
            if (!out) throw std::runtime_error("cannot write " + cell.out_file);
            out << result_to_json(results[i]) << "\n";
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };

    if (parallel <= 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        const int n_threads = std::min<int>(parallel, static_cast<int>(cells.size()));
        for (int t = 0; t < n_threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
                    work(i);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!errors[i].empty()) {
            throw std::runtime_error("cell (" + cells[i].policy + ", seed " +
                                     std::to_string(cells[i].seed) + ") failed: " + errors[i]);
        }
    }
    return results;
}

void write_resolved_config(const RunConfig& cfg, const std::string& out_dir) {
    std::ofstream out(out_dir + "/resolved_config.json");
    if (out) out << config_to_json(cfg) << "\n";
}

}  // namespace

std::vector<ExperimentResult> cmd_run(const RunConfig& cfg, const std::string& policy,
                                      const std::string& out_dir, int parallel) {
    policy_from_string(policy);  // validate early
    std::vector<Cell> cells;
    for (const std::uint64_t seed : cfg.seeds) {
        cells.push_back({policy, seed, cfg,
                         out_dir + "/result_" + policy + "_seed" + std::to_string(seed) + ".json"});
    }
    auto results = run_cells(cells, out_dir, parallel);
    emit_reports(results, out_dir);
    write_resolved_config(cfg, out_dir);
    return results;
}

std::vector<ExperimentResult> cmd_compare(const RunConfig& cfg,
                                          const std::vector<std::string>& policies,
                                          const std::string& out_dir, int parallel) {
    if (policies.empty()) throw std::invalid_argument("compare: no policies given");
    std::vector<Cell> cells;
    for (const auto& policy : policies) {
        policy_from_string(policy);
        for (const std::uint64_t seed : cfg.seeds) {
            cells.push_back(
                {policy, seed, cfg,
                 out_dir + "/result_" + policy + "_seed" + std::to_string(seed) + ".json"});
        }
    }
    auto results = run_cells(cells, out_dir, parallel);
    emit_reports(results, out_dir);
    write_resolved_config(cfg, out_dir);
    return results;
}

std::vector<ExperimentResult> cmd_sweep(const RunConfig& cfg, const std::string& parameter,
                                        const std::vector<double>& values,
                                        const std::string& out_dir, int parallel) {
    if (values.empty()) throw std::invalid_argument("sweep: no values given");
    const auto apply = [](RunConfig c, const std::string& name, double v) {
        if (name == "q") c.training.q = v;
        else if (name == "eta") c.training.eta = v;
        else if (name == "T") c.training.preferred_round_time = v;
        else if (name == "beta") c.training.beta = v;
        else if (name == "tau") c.training.tau = static_cast<std::size_t>(v);
        else if (name == "kappa") c.training.kappa = static_cast<std::size_t>(v);
        else if (name == "clients_per_round")
            c.training.clients_per_round = static_cast<std::size_t>(v);
        else if (name == "rounds") c.training.max_rounds = static_cast<std::size_t>(v);
        else if (name == "round_cap") c.selection.round_cap = static_cast<int>(v);
        else if (name == "decay") c.selection.decay = v;
        else if (name == "alpha") c.partition.alpha = v;
        else if (name == "class_separation") c.dataset.class_separation = v;
        else if (name == "qffl_q") c.selection.qffl_q = v;
        else
            throw std::invalid_argument(
                "sweep: unknown parameter '" + name +
                "' (known: q, eta, T, beta, tau, kappa, clients_per_round, rounds, round_cap, "
                "decay, alpha, class_separation, qffl_q)");
        return c;
    };

    const std::string policy = cfg.policies.front();
    std::vector<Cell> cells;
    for (const double v : values) {
        RunConfig varied = apply(cfg, parameter, v);
        std::ostringstream tag;
        tag << parameter << "_" << v;
        const std::string sub = out_dir + "/sweep_" + tag.str();
        std::filesystem::create_directories(sub);
        write_resolved_config(varied, sub);
        for (const std::uint64_t seed : cfg.seeds) {
            cells.push_back({policy, seed, varied,
                             sub + "/result_" + policy + "_seed" + std::to_string(seed) + ".json"});
        }
    }
    auto results = run_cells(cells, out_dir, parallel);

    // One merged report per sweep value, plus a top-level index.
    nlohmann::json index;
    index["parameter"] = parameter;
    index["values"] = values;
    std::size_t offset = 0;
    for (const double v : values) {
        std::ostringstream tag;
        tag << parameter << "_" << v;
        std::vector<ExperimentResult> group(results.begin() + static_cast<std::ptrdiff_t>(offset),
                                            results.begin() + static_cast<std::ptrdiff_t>(
                                                                  offset + cfg.seeds.size()));
        emit_reports(group, out_dir + "/sweep_" + tag.str());
        offset += cfg.seeds.size();
    }
    std::ofstream out(out_dir + "/sweep_index.json");
    if (out) out << index.dump(2) << "\n";
    return results;
}

}  // namespace fedfair
