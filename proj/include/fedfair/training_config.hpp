#pragma once

#include <cstddef>
#include <cstdint>

namespace fedfair {

// Round-level training knobs shared by the aggregator and the clients.
struct TrainingConfig {
    double preferred_round_time = 2.5;  // T, seconds
    double beta = 2.0;                  // time-penalty exponent
    double q = 2.0;                     // fairness exponent
    double eta = 0.1;                   // learning rate
    std::size_t tau = 5;                // local SGD steps per round
    std::size_t kappa = 64;             // batch size
    std::size_t clients_per_round = 10; // m
    std::size_t max_rounds = 100;       // K_max
    std::uint64_t seed = 1;
};

}  // namespace fedfair
