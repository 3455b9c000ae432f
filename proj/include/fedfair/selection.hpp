#pragma once

// Client-selection math: utilities, probabilities, q-fair weights,
// participation penalties, and the baseline policies behind one interface.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fedfair/client.hpp"
#include "fedfair/training_config.hpp"

namespace fedfair {

enum class PolicyKind { fedfair3, random_uniform, loss_proportional, oort_style, qffl_weighting };

PolicyKind policy_from_string(const std::string& name);
std::string policy_to_string(PolicyKind kind);

// Selection-side knobs beyond the TrainingConfig.
struct SelectionConfig {
    int round_cap = 5;             // participation rounds before the decay penalty
    double decay = 0.5;            // multiplicative penalty per round beyond the cap
    bool normalize_lambda = false; // divide resource priorities by the population max
    double qffl_q = 10.0;          // large-q exponent used by the qffl baseline
};

// Mutable cross-round selection bookkeeping, owned by the engine.
struct SelectionState {
    std::set<int> explored;                         // E: clients with fresh loss info
    std::map<int, std::vector<double>> last_losses; // most recent final-batch losses
    std::map<int, int> participation_count;
    std::map<int, int> last_selected_round;
    std::map<int, int> gamma;                       // 1 iff selected in the previous round
};

struct SelectionOutcome {
    std::map<int, double> utilities;
    std::map<int, double> probabilities;
    std::map<int, double> weights;  // alpha_i
    std::vector<int> selected;
};

// |kappa| * sqrt(mean of squared losses).
double statistical_utility(const std::vector<double>& losses);

// (T / t_i)^beta when T < t_i, otherwise 1. The T == t_i boundary is 1.
double time_penalty(double preferred_time, double elapsed, double beta);

// lambda_i = c_i * d_i / (q_i * r_i).
double resource_priority(const ClientProfile& profile);

// Full utility product: statistical utility x time penalty x resource boost
// (lambda^gamma_i, only when T > t_i) x participation decay beyond the cap.
double fedfair3_utility(const std::vector<double>& losses, const ClientProfile& profile,
                        double preferred_time, double beta, double elapsed, int gamma_i,
                        int participation_count, int round_cap, double decay,
                        double lambda_override = -1.0);

// p_i = U_i / sum(U); uniform fallback when every utility is zero.
std::map<int, double> probabilities(const std::map<int, double>& utilities);

// alpha_i = p_i^q / (N (q+1)).
double client_weight(double p_i, double q, std::size_t n_clients);

// Checks the q-fair equivalence: with p constructed proportional to F, the
// ratio [p_i alpha_i F_i] / [p_i F_i^{q+1} / (N(q+1))] is constant across
// clients. Returns the max-min spread of the ratio relative to its mean.
double qfairness_proportionality_check(const std::vector<double>& p, const std::vector<double>& losses,
                                       double q, std::size_t n_clients);

// Weighted sampling without replacement: sequential draws, renormalizing
// after each pick. Clients with zero probability are only drawn once every
// positive-probability client has been taken.
std::vector<int> sample_by_priority(const std::map<int, double>& probs, std::size_t m,
                                    std::uint64_t seed);

// Everything a policy needs to produce one round's SelectionOutcome.
struct PolicyContext {
    const std::vector<ClientProfile>* profiles = nullptr;  // indexed by client id
    const std::vector<double>* round_times = nullptr;      // t_i, indexed by client id
    const SelectionState* state = nullptr;
    const TrainingConfig* train = nullptr;
    const SelectionConfig* selection = nullptr;
    int round = 0;
    std::uint64_t seed = 0;
};

SelectionOutcome select_clients(PolicyKind kind, const PolicyContext& ctx);

}  // namespace fedfair
