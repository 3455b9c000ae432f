#include "fedfair/client.hpp"

#include <cmath>
#include <stdexcept>

#include "fedfair/rng.hpp"
#include "json.hpp"

namespace fedfair {

std::vector<ClientProfile> sample_profiles(std::size_t n_clients, const HeterogeneitySpec& spec,
                                           const std::vector<ClientShard>& shards,
                                           std::uint64_t seed) {
    if (shards.size() != n_clients) {
        throw std::invalid_argument("sample_profiles: " + std::to_string(n_clients) +
                                    " clients but " + std::to_string(shards.size()) + " shards");
    }
    if (spec.median_compute <= 0.0 || spec.median_energy <= 0.0 || spec.median_overhead <= 0.0) {
        throw std::invalid_argument("sample_profiles: medians must be positive");
    }

    rng::Engine eng(rng::derive(seed, 0x9F0u));
    std::vector<ClientProfile> out(n_clients);
    const std::size_t n_stragglers =
        static_cast<std::size_t>(std::ceil(spec.straggler_fraction * static_cast<double>(n_clients)));
    for (std::size_t i = 0; i < n_clients; ++i) {
        auto& p = out[i];
        p.id = static_cast<int>(i);
        p.compute_power = spec.median_compute * std::exp(spec.sigma_compute * eng.normal());
        p.energy_rate = spec.median_energy * std::exp(spec.sigma_energy * eng.normal());
        p.round_overhead = spec.median_overhead * std::exp(spec.sigma_overhead * eng.normal());
        p.bandwidth_cost = eng.uniform(spec.bandwidth_min, spec.bandwidth_max);
        p.data_size = std::max<std::size_t>(shards[i].size(), 1);
        if (i < n_stragglers) {
            p.compute_power /= spec.straggler_slowdown;
            if (spec.straggler_max_compute > 0.0) {
                p.compute_power = std::min(p.compute_power, spec.straggler_max_compute);
            }
        }
    }
    return out;
}

double simulate_round_time(const ClientProfile& profile, std::size_t tau, std::size_t batch_size) {
    if (tau == 0 || batch_size == 0) {
        throw std::invalid_argument("simulate_round_time: tau and batch_size must be >= 1");
    }
    if (profile.compute_power <= 0.0 || profile.round_overhead <= 0.0) {
        throw std::invalid_argument("simulate_round_time: profile must have positive c_i and r_i");
    }
    return static_cast<double>(tau * batch_size) / profile.compute_power + profile.round_overhead +
           profile.bandwidth_cost;
}

ClientReport run_local_round(const ClientProfile& profile, const ClientShard& shard,
                             const LabeledDataset& ds, const ModelParams& params,
                             const TrainingConfig& cfg, std::uint64_t seed) {
    if (shard.indices.empty()) throw std::invalid_argument("run_local_round: empty shard");

    ClientReport report;
    report.id = profile.id;
    auto [loss, grad] = loss_and_grad(params, ds, shard.indices);
    (void)loss;
    report.grad = std::move(grad);

    auto [updated, batch_losses] =
        sgd_local_update(params, shard, ds, cfg.eta, cfg.tau, cfg.kappa, seed);
    report.params = std::move(updated);
    report.batch_losses = std::move(batch_losses.per_sample);

    report.elapsed_s = simulate_round_time(profile, cfg.tau, cfg.kappa);
    report.resource_usage["time"] = report.elapsed_s;
    report.resource_usage["energy"] = profile.energy_rate * report.elapsed_s;
    report.resource_usage["compute"] = static_cast<double>(cfg.tau * cfg.kappa);
    return report;
}

std::string profiles_to_json(const std::vector<ClientProfile>& profiles) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : profiles) {
        arr.push_back({{"id", p.id},
                       {"compute_power", p.compute_power},
                       {"data_size", p.data_size},
                       {"energy_rate", p.energy_rate},
                       {"round_overhead", p.round_overhead},
                       {"bandwidth_cost", p.bandwidth_cost}});
    }
    return arr.dump(2);
}

std::vector<ClientProfile> profiles_from_json(const std::string& text) {
    const auto arr = nlohmann::json::parse(text);
    if (!arr.is_array()) throw std::runtime_error("profiles: expected a JSON array");
    std::vector<ClientProfile> out;
    out.reserve(arr.size());
    for (const auto& j : arr) {
        ClientProfile p;
        p.id = j.at("id").get<int>();
        p.compute_power = j.at("compute_power").get<double>();
        p.data_size = j.at("data_size").get<std::size_t>();
        p.energy_rate = j.at("energy_rate").get<double>();
        p.round_overhead = j.at("round_overhead").get<double>();
        p.bandwidth_cost = j.at("bandwidth_cost").get<double>();
        if (p.compute_power <= 0.0 || p.energy_rate <= 0.0 || p.round_overhead <= 0.0 ||
            p.data_size < 1) {
            throw std::runtime_error("profiles: profile " + std::to_string(p.id) +
                                     " violates positivity invariants");
        }
        out.push_back(p);
    }
    return out;
}

}  // namespace fedfair
