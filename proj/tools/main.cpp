// fedfair: deterministic federated-learning simulation CLI.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedfair/config.hpp"

namespace {

std::vector<double> parse_values_csv(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

std::vector<std::uint64_t> parse_seeds_csv(const std::string& csv) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoull(item));
    }
    return out;
}

void print_final_summary(const std::vector<fedfair::ExperimentResult>& results) {
    for (const auto& r : results) {
        if (r.rounds.empty()) {
            std::cout << r.policy << " seed=" << r.seed << ": 0 rounds\n";
            continue;
        }
        const auto& last = r.rounds.back();
        std::cout << r.policy << " seed=" << r.seed << ": rounds=" << r.rounds.size()
                  << " acc=" << last.global_accuracy << " var=" << last.accuracy_variance
                  << " jain=" << last.jain_participation << " clock=" << last.sim_clock_s
                  << (r.stopped_by_budget ? " [budget stop]" : "") << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fedfair: deterministic federated-learning simulation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string seeds_csv;
    std::string policy;
    std::string parameter;
    std::string values_csv;
    int parallel = 1;
    bool lenient = false;

    const char* env_out = std::getenv("FEDFAIR_OUT_DIR");

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file")->required();
        cmd->add_option("--out", out_dir, "output directory (overrides config and FEDFAIR_OUT_DIR)");
        cmd->add_option("--seeds", seeds_csv, "comma-separated seeds (overrides config)");
        cmd->add_option("--parallel", parallel, "run (policy, seed) cells on N threads")
            ->check(CLI::PositiveNumber);
        cmd->add_flag("--lenient", lenient, "warn on unknown config keys instead of failing");
    };

    auto* run = app.add_subcommand("run", "run one policy over the configured seeds");
    add_common(run);
    run->add_option("--policy", policy, "policy to run (default: first configured)");

    auto* compare = app.add_subcommand("compare", "run every configured policy on identical data");
    add_common(compare);

    auto* sweep = app.add_subcommand("sweep", "vary one parameter, holding everything else fixed");
    add_common(sweep);
    sweep->add_option("--param", parameter, "parameter name (e.g. q, eta, T)")->required();
    sweep->add_option("--values", values_csv, "comma-separated values")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        fedfair::RunConfig cfg = fedfair::parse_and_validate(config_path, lenient);
        if (!seeds_csv.empty()) {
            cfg.seeds = parse_seeds_csv(seeds_csv);
            if (cfg.seeds.empty()) throw std::invalid_argument("--seeds: no seeds given");
        }
        std::string out = cfg.output_dir;
        if (env_out && *env_out) out = env_out;
        if (!out_dir.empty()) out = out_dir;

        std::vector<fedfair::ExperimentResult> results;
        if (run->parsed()) {
            const std::string chosen = policy.empty() ? cfg.policies.front() : policy;
            results = fedfair::cmd_run(cfg, chosen, out, parallel);
        } else if (compare->parsed()) {
            results = fedfair::cmd_compare(cfg, cfg.policies, out, parallel);
        } else {
            results = fedfair::cmd_sweep(cfg, parameter, parse_values_csv(values_csv), out,
                                         parallel);
        }
        print_final_summary(results);
        std::cout << "reports written to " << out << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
