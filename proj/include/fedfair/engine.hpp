#pragma once

// The aggregator: per-round orchestration, weighted gradient aggregation,
// resource-budget tracking with Stop, and the simulated wall clock.

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "fedfair/client.hpp"
#include "fedfair/metrics.hpp"
#include "fedfair/selection.hpp"
#include "fedfair/training_config.hpp"

namespace fedfair {

// One resource type's budget line: cap, per-local-iteration cost, and
// per-aggregation cost.
struct BudgetLine {
    double limit = std::numeric_limits<double>::infinity();  // Pi
    double local_cost = 0.0;                                 // r_l
    double global_cost = 0.0;                                // r_g
    double accumulated = 0.0;                                // s
};

enum class BudgetDecision { Continue, Stop };

// Tracks (I+1) r_l + (K+1) r_g <= Pi per resource type, with I = K * tau
// local iterations charged per completed round.
struct ResourceBudget {
    std::map<std::string, BudgetLine> lines;
    std::size_t tau = 1;
    long completed_rounds = 0;   // K
    long local_iterations = 0;   // I, equals K * tau at every round boundary

    // Projected cost of admitting one more round: the next round's charge
    // plus one local iteration and one aggregation of slack, which makes the
    // check equivalent to the (I+1, K+1) constraint above.
    std::map<std::string, double> project_next_round() const;

    // Charges tau local iterations and one aggregation per type.
    void advance();
};

// Stop iff any type would overshoot: s + projected > Pi. Every budgeted
// (finite-limit) type must appear in the projection.
BudgetDecision budget_check(const ResourceBudget& budget,
                            const std::map<std::string, double>& projected);

// grad = sum over selected reports of p_i * alpha_i * grad_i, reduced in
// ascending client-id order; returns w - eta * grad.
ModelParams aggregate(const ModelParams& params, const std::vector<ClientReport>& reports,
                      const SelectionOutcome& outcome, double eta);

// Prepared inputs for one experiment: dataset, per-client train/test shards,
// profiles, and precomputed round times.
struct ExperimentSetup {
    const LabeledDataset* dataset = nullptr;
    std::vector<ClientShard> train_shards;
    std::vector<ClientShard> test_shards;
    std::vector<ClientProfile> profiles;
    std::vector<double> round_times;             // t_i per client
    std::vector<std::size_t> pooled_test;        // union of test shards
};

// Holds out the last ~20% of each shard for evaluation. Every shard must
// have at least two samples.
void split_train_test(const std::vector<ClientShard>& shards, double test_fraction,
                      std::vector<ClientShard>& train_out, std::vector<ClientShard>& test_out);

class FederationEngine {
public:
    FederationEngine(const ExperimentSetup& setup, const TrainingConfig& train,
                     const SelectionConfig& selection, ResourceBudget budget, PolicyKind policy);

    // One full round: select -> local rounds -> aggregate -> bookkeeping.
    // A round is atomic; on error no state changes are kept.
    RoundRecord run_round();

    bool stopped() const { return stopped_; }
    int rounds_completed() const { return round_; }
    const ModelParams& model() const { return model_; }
    const ResourceBudget& budget() const { return budget_; }
    const SelectionState& selection_state() const { return state_; }
    double sim_clock() const { return clock_; }

    static constexpr double kAggregationOverheadSeconds = 0.1;

private:
    const ExperimentSetup& setup_;
    TrainingConfig train_;
    SelectionConfig selection_;
    ResourceBudget budget_;
    PolicyKind policy_;
    ModelParams model_;
    SelectionState state_;
    std::vector<int> participation_;
    double clock_ = 0.0;
    int round_ = 0;
    bool stopped_ = false;
};

// Runs until Stop or max_rounds; fully deterministic per config seed.
ExperimentResult run_experiment(const ExperimentSetup& setup, const TrainingConfig& train,
                                const SelectionConfig& selection, const ResourceBudget& budget,
                                PolicyKind policy);

}  // namespace fedfair
