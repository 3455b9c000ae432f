#pragma once

// Simulated heterogeneous device population: static profiles, a
// deterministic round-time model, and execution of one local round.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedfair/dataset.hpp"
#include "fedfair/model.hpp"
#include "fedfair/training_config.hpp"

namespace fedfair {

struct ClientProfile {
    int id = 0;
    double compute_power = 1.0;   // c_i, samples/second
    std::size_t data_size = 1;    // d_i, mirrors the owned shard's sample count
    double energy_rate = 1.0;     // q_i, joules/second
    double round_overhead = 1.0;  // r_i, fixed per-round duration, seconds
    double bandwidth_cost = 0.0;  // upload cost, seconds per model transfer
};

// Generative spec for a heterogeneous population. compute/energy/overhead
// are lognormal around the given medians; bandwidth is uniform in a range.
// An optional straggler group is slowed down and capped so its round time
// stays above any configured threshold.
struct HeterogeneitySpec {
    double sigma_compute = 0.5;
    double sigma_energy = 0.3;
    double sigma_overhead = 0.3;
    double median_compute = 200.0;
    double median_energy = 1.0;
    double median_overhead = 0.5;
    double bandwidth_min = 0.05;
    double bandwidth_max = 0.2;
    double straggler_fraction = 0.0;
    double straggler_slowdown = 8.0;
    double straggler_max_compute = 0.0;  // 0 disables the cap
};

struct ClientReport {
    int id = 0;
    ModelParams params;               // w_i after local training
    std::vector<double> grad;         // gradient of F_i at the incoming global model
    std::vector<double> batch_losses; // per-sample losses of the final local batch
    double elapsed_s = 0.0;           // t_i
    std::map<std::string, double> resource_usage;  // resource type -> amount this round
};

// One profile per shard; d_i is copied from the shard size. Deterministic
// per seed. The first ceil(straggler_fraction * n) client ids form the
// straggler group.
std::vector<ClientProfile> sample_profiles(std::size_t n_clients, const HeterogeneitySpec& spec,
                                           const std::vector<ClientShard>& shards,
                                           std::uint64_t seed);

// t_i = (tau * batch_size) / c_i + r_i + bandwidth.
double simulate_round_time(const ClientProfile& profile, std::size_t tau, std::size_t batch_size);

// Runs tau local SGD steps, fills in the round time and resource usage
// (time, energy = q_i * t_i, compute = tau * batch_size).
ClientReport run_local_round(const ClientProfile& profile, const ClientShard& shard,
                             const LabeledDataset& ds, const ModelParams& params,
                             const TrainingConfig& cfg, std::uint64_t seed);

std::string profiles_to_json(const std::vector<ClientProfile>& profiles);
std::vector<ClientProfile> profiles_from_json(const std::string& text);

}  // namespace fedfair
