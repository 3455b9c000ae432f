#include "fedfair/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fedfair/rng.hpp"

namespace fedfair {

std::map<std::string, double> ResourceBudget::project_next_round() const {
    std::map<std::string, double> out;
    for (const auto& [type, line] : lines) {
        out[type] = static_cast<double>(tau + 1) * line.local_cost + 2.0 * line.global_cost;
    }
    return out;
}

void ResourceBudget::advance() {
    for (auto& [type, line] : lines) {
        line.accumulated += static_cast<double>(tau) * line.local_cost + line.global_cost;
    }
    completed_rounds += 1;
    local_iterations += static_cast<long>(tau);
}

BudgetDecision budget_check(const ResourceBudget& budget,
                            const std::map<std::string, double>& projected) {
    for (const auto& [type, line] : budget.lines) {
        const auto it = projected.find(type);
        if (it == projected.end()) {
            if (std::isinf(line.limit)) continue;  // unbudgeted type, nothing to enforce
            throw std::invalid_argument("budget_check: projection missing resource type '" + type +
                                        "'");
        }
        if (it->second < 0.0) {
            throw std::invalid_argument("budget_check: negative projection for type '" + type + "'");
        }
        if (line.accumulated + it->second > line.limit) return BudgetDecision::Stop;
    }
    return BudgetDecision::Continue;
}

ModelParams aggregate(const ModelParams& params, const std::vector<ClientReport>& reports,
                      const SelectionOutcome& outcome, double eta) {
    std::vector<const ClientReport*> ordered;
    ordered.reserve(reports.size());
    for (const auto& r : reports) {
        if (std::find(outcome.selected.begin(), outcome.selected.end(), r.id) ==
            outcome.selected.end()) {
            throw std::invalid_argument("aggregate: report from unselected client " +
                                        std::to_string(r.id));
        }
        if (r.grad.size() != params.w.size()) {
            throw std::invalid_argument("aggregate: gradient shape mismatch for client " +
                                        std::to_string(r.id));
        }
        ordered.push_back(&r);
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const ClientReport* a, const ClientReport* b) { return a->id < b->id; });

    std::vector<double> grad(params.w.size(), 0.0);
    for (const ClientReport* r : ordered) {
        const double w = outcome.probabilities.at(r->id) * outcome.weights.at(r->id);
        for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += w * r->grad[j];
    }
    ModelParams next = params;
    for (std::size_t j = 0; j < next.w.size(); ++j) next.w[j] -= eta * grad[j];
    return next;
}

void split_train_test(const std::vector<ClientShard>& shards, double test_fraction,
                      std::vector<ClientShard>& train_out, std::vector<ClientShard>& test_out) {
    if (test_fraction <= 0.0 || test_fraction >= 1.0) {
        throw std::invalid_argument("split_train_test: test_fraction must be in (0, 1)");
    }
    train_out.clear();
    test_out.clear();
    train_out.reserve(shards.size());
    test_out.reserve(shards.size());
    for (const auto& s : shards) {
        if (s.size() < 2) {
            throw std::invalid_argument("split_train_test: client " + std::to_string(s.owner) +
                                        " has fewer than 2 samples; cannot hold out a test split");
        }
        std::size_t test_count = static_cast<std::size_t>(
            std::floor(test_fraction * static_cast<double>(s.size())));
        test_count = std::max<std::size_t>(1, std::min(test_count, s.size() - 1));
        ClientShard train{s.owner, {s.indices.begin(),
                                    s.indices.end() - static_cast<std::ptrdiff_t>(test_count)}};
        ClientShard test{s.owner, {s.indices.end() - static_cast<std::ptrdiff_t>(test_count),
                                   s.indices.end()}};
        train_out.push_back(std::move(train));
        test_out.push_back(std::move(test));
    }
}

FederationEngine::FederationEngine(const ExperimentSetup& setup, const TrainingConfig& train,
                                   const SelectionConfig& selection, ResourceBudget budget,
                                   PolicyKind policy)
    : setup_(setup),
      train_(train),
      selection_(selection),
      budget_(std::move(budget)),
      policy_(policy) {
    if (!setup_.dataset) throw std::invalid_argument("engine: setup has no dataset");
    const std::size_t n = setup_.profiles.size();
    if (n == 0 || setup_.train_shards.size() != n || setup_.test_shards.size() != n ||
        setup_.round_times.size() != n) {
        throw std::invalid_argument("engine: setup sizes are inconsistent");
    }
    budget_.tau = train_.tau;
    model_ = ModelParams::zeros(setup_.dataset->num_classes, setup_.dataset->f);
    participation_.assign(n, 0);
}

RoundRecord FederationEngine::run_round() {
    if (stopped_) throw std::logic_error("run_round: the run has already received Stop");

    const int this_round = round_ + 1;
    PolicyContext ctx;
    ctx.profiles = &setup_.profiles;
    ctx.round_times = &setup_.round_times;
    ctx.state = &state_;
    ctx.train = &train_;
    ctx.selection = &selection_;
    ctx.round = this_round;
    ctx.seed = rng::derive(train_.seed, 0x0e0u, static_cast<std::uint64_t>(this_round));

    const SelectionOutcome outcome = select_clients(policy_, ctx);

    std::vector<ClientReport> reports;
    reports.reserve(outcome.selected.size());
    std::vector<int> in_id_order = outcome.selected;
    std::sort(in_id_order.begin(), in_id_order.end());
    for (const int id : in_id_order) {
        const auto uid = static_cast<std::size_t>(id);
        reports.push_back(run_local_round(
            setup_.profiles[uid], setup_.train_shards[uid], *setup_.dataset, model_, train_,
            rng::derive(train_.seed, static_cast<std::uint64_t>(this_round),
                        static_cast<std::uint64_t>(id))));
    }

    ModelParams next = aggregate(model_, reports, outcome, train_.eta);

    // Everything that can throw has run; commit state atomically from here.
    model_ = std::move(next);
    state_.gamma.clear();
    double slowest = 0.0;
    for (const auto& report : reports) {
        state_.explored.insert(report.id);
        state_.last_losses[report.id] = report.batch_losses;
        state_.participation_count[report.id] += 1;
        state_.last_selected_round[report.id] = this_round;
        state_.gamma[report.id] = 1;
        participation_[static_cast<std::size_t>(report.id)] += 1;
        slowest = std::max(slowest, report.elapsed_s);
    }
    budget_.advance();
    clock_ += slowest + kAggregationOverheadSeconds;
    round_ = this_round;

    RoundRecord record;
    record.round = this_round;
    record.per_client_accuracy = accuracy_per_client(model_, setup_.test_shards, *setup_.dataset);
    record.global_accuracy = accuracy_on(model_, *setup_.dataset, setup_.pooled_test);
    record.accuracy_variance = variance_uniformity(record.per_client_accuracy);
    bool all_zero = true;
    for (const double a : record.per_client_accuracy) all_zero = all_zero && a <= 0.0;
    record.cosine_uniformity = all_zero ? 0.0 : cosine_uniformity(record.per_client_accuracy);
    record.participation_counts = participation_;
    record.jain_participation = participation_fairness(record.participation_counts);
    record.sim_clock_s = clock_;
    record.selected = outcome.selected;
    return record;
}

ExperimentResult run_experiment(const ExperimentSetup& setup, const TrainingConfig& train,
                                const SelectionConfig& selection, const ResourceBudget& budget,
                                PolicyKind policy) {
    FederationEngine engine(setup, train, selection, budget, policy);
    ExperimentResult result;
    result.policy = policy_to_string(policy);
    result.seed = train.seed;

    for (std::size_t k = 0; k < train.max_rounds; ++k) {
        if (budget_check(engine.budget(), engine.budget().project_next_round()) ==
            BudgetDecision::Stop) {
            result.stopped_by_budget = true;
            break;
        }
        result.rounds.push_back(engine.run_round());
    }

    result.final_model = engine.model();
    if (!result.rounds.empty()) {
        result.final_per_client_accuracy = result.rounds.back().per_client_accuracy;
        result.final_participation_counts = result.rounds.back().participation_counts;
    } else {
        result.final_per_client_accuracy =
            accuracy_per_client(engine.model(), setup.test_shards, *setup.dataset);
        result.final_participation_counts.assign(setup.profiles.size(), 0);
    }
    for (const auto& [type, line] : engine.budget().lines) {
        result.budget_accumulated[type] = line.accumulated;
    }
    return result;
}

}  // namespace fedfair
