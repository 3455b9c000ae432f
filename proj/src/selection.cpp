#include "fedfair/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fedfair/rng.hpp"

namespace fedfair {

PolicyKind policy_from_string(const std::string& name) {
    if (name == "fedfair3") return PolicyKind::fedfair3;
    if (name == "random") return PolicyKind::random_uniform;
    if (name == "loss_prop") return PolicyKind::loss_proportional;
    if (name == "oort") return PolicyKind::oort_style;
    if (name == "qffl") return PolicyKind::qffl_weighting;
    throw std::invalid_argument("unknown policy: " + name +
                                " (expected fedfair3|random|loss_prop|oort|qffl)");
}

std::string policy_to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::fedfair3: return "fedfair3";
        case PolicyKind::random_uniform: return "random";
        case PolicyKind::loss_proportional: return "loss_prop";
        case PolicyKind::oort_style: return "oort";
        case PolicyKind::qffl_weighting: return "qffl";
    }
    return "?";
}

double statistical_utility(const std::vector<double>& losses) {
    if (losses.empty()) throw std::invalid_argument("statistical_utility: empty loss vector");
    double sum_sq = 0.0;
    for (const double l : losses) {
        if (!std::isfinite(l) || l < 0.0) {
            throw std::invalid_argument("statistical_utility: losses must be finite and >= 0");
        }
        sum_sq += l * l;
    }
    const double k = static_cast<double>(losses.size());
    return k * std::sqrt(sum_sq / k);
}

double time_penalty(double preferred_time, double elapsed, double beta) {
    if (preferred_time <= 0.0 || elapsed <= 0.0) {
        throw std::invalid_argument("time_penalty: times must be > 0");
    }
    if (beta < 0.0) throw std::invalid_argument("time_penalty: beta must be >= 0");
    if (preferred_time < elapsed) return std::pow(preferred_time / elapsed, beta);
    return 1.0;
}

double resource_priority(const ClientProfile& profile) {
    if (profile.compute_power <= 0.0 || profile.energy_rate <= 0.0 ||
        profile.round_overhead <= 0.0 || profile.data_size < 1) {
        throw std::invalid_argument("resource_priority: profile invariants violated");
    }
    return profile.compute_power * static_cast<double>(profile.data_size) /
           (profile.energy_rate * profile.round_overhead);
}

double fedfair3_utility(const std::vector<double>& losses, const ClientProfile& profile,
                        double preferred_time, double beta, double elapsed, int gamma_i,
                        int participation_count, int round_cap, double decay,
                        double lambda_override) {
    if (gamma_i != 0 && gamma_i != 1) {
        throw std::invalid_argument("fedfair3_utility: gamma must be 0 or 1");
    }
    if (decay <= 0.0 || decay > 1.0) {
        throw std::invalid_argument("fedfair3_utility: decay must be in (0, 1]");
    }
    double u = statistical_utility(losses) * time_penalty(preferred_time, elapsed, beta);
    if (preferred_time > elapsed && gamma_i == 1) {
        const double lambda = lambda_override >= 0.0 ? lambda_override : resource_priority(profile);
        u *= lambda;
    }
    const int excess = std::max(0, participation_count - round_cap);
    if (excess > 0) u *= std::pow(decay, excess);
    return u;
}

std::map<int, double> probabilities(const std::map<int, double>& utilities) {
    if (utilities.empty()) throw std::invalid_argument("probabilities: no clients");
    double total = 0.0;
    for (const auto& [id, u] : utilities) {
        if (!std::isfinite(u) || u < 0.0) {
            throw std::invalid_argument("probabilities: utility of client " + std::to_string(id) +
                                        " must be finite and >= 0");
        }
        total += u;
    }
    std::map<int, double> out;
    if (total <= 0.0) {
        const double uniform = 1.0 / static_cast<double>(utilities.size());
        for (const auto& [id, u] : utilities) out[id] = uniform;
        return out;
    }
    for (const auto& [id, u] : utilities) out[id] = u / total;
    return out;
}

double client_weight(double p_i, double q, std::size_t n_clients) {
    if (n_clients == 0) throw std::invalid_argument("client_weight: N must be >= 1");
    if (q < 0.0) throw std::invalid_argument("client_weight: q must be >= 0");
    return std::pow(p_i, q) / (static_cast<double>(n_clients) * (q + 1.0));
}

double qfairness_proportionality_check(const std::vector<double>& p, const std::vector<double>& losses,
                                       double q, std::size_t n_clients) {
    if (p.size() != losses.size() || p.empty()) {
        throw std::invalid_argument("qfairness check: p and losses must be equal-length, non-empty");
    }
    const double nq = static_cast<double>(n_clients) * (q + 1.0);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (losses[i] <= 0.0) throw std::invalid_argument("qfairness check: losses must be > 0");
        const double lhs = p[i] * client_weight(p[i], q, n_clients) * losses[i];
        const double rhs = p[i] * std::pow(losses[i], q + 1.0) / nq;
        const double ratio = lhs / rhs;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
        sum += ratio;
    }
    const double mean = sum / static_cast<double>(p.size());
    return (hi - lo) / mean;
}

std::vector<int> sample_by_priority(const std::map<int, double>& probs, std::size_t m,
                                    std::uint64_t seed) {
    if (m == 0) throw std::invalid_argument("sample_by_priority: m must be >= 1");
    std::vector<int> ids;
    std::vector<double> weight;
    ids.reserve(probs.size());
    for (const auto& [id, p] : probs) {
        if (p < 0.0) throw std::invalid_argument("sample_by_priority: negative probability");
        ids.push_back(id);
        weight.push_back(p);
    }

    rng::Engine eng(rng::derive(seed, 0x5e1u));
    std::vector<int> picked;
    const std::size_t take = std::min(m, ids.size());
    picked.reserve(take);
    for (std::size_t round = 0; round < take; ++round) {
        double total = 0.0;
        for (const double w : weight) total += w;
        std::size_t choice = ids.size();
        if (total > 0.0) {
            const double u = eng.uniform01() * total;
            double cum = 0.0;
            for (std::size_t k = 0; k < ids.size(); ++k) {
                if (weight[k] <= 0.0) continue;
                cum += weight[k];
                if (cum > u) {
                    choice = k;
                    break;
                }
            }
            if (choice == ids.size()) {  // float round-off at the top end
                for (std::size_t k = ids.size(); k-- > 0;) {
                    if (weight[k] > 0.0) {
                        choice = k;
                        break;
                    }
                }
            }
        } else {
            // Only zero-probability clients remain; pick uniformly.
            choice = static_cast<std::size_t>(eng.uniform_index(ids.size()));
        }
        picked.push_back(ids[choice]);
        ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(choice));
        weight.erase(weight.begin() + static_cast<std::ptrdiff_t>(choice));
    }
    return picked;
}

namespace {

// Loss-based raw utilities over the explored set, with the chosen per-policy
// scoring. Clients outside E get the maximum explored utility so that
// exploration stays attractive; if nothing is explored yet, everything is 0
// and the uniform fallback in probabilities() applies.
std::map<int, double> scored_utilities(const PolicyContext& ctx, PolicyKind kind) {
    const auto& profiles = *ctx.profiles;
    const auto& times = *ctx.round_times;
    const auto& st = *ctx.state;
    const auto& train = *ctx.train;
    const auto& sel = *ctx.selection;

    double lambda_max = 0.0;
    if (sel.normalize_lambda) {
        for (const auto& p : profiles) lambda_max = std::max(lambda_max, resource_priority(p));
    }

    std::map<int, double> utilities;
    double max_explored = 0.0;
    for (const auto& profile : profiles) {
        const int id = profile.id;
        if (!st.explored.count(id)) continue;
        const auto& losses = st.last_losses.at(id);
        double u = 0.0;
        switch (kind) {
            case PolicyKind::fedfair3: {
                const int gamma = st.gamma.count(id) ? st.gamma.at(id) : 0;
                const int part =
                    st.participation_count.count(id) ? st.participation_count.at(id) : 0;
                double lambda_override = -1.0;
                if (sel.normalize_lambda && lambda_max > 0.0) {
                    lambda_override = resource_priority(profile) / lambda_max;
                }
                u = fedfair3_utility(losses, profile, train.preferred_round_time, train.beta,
                                     times[static_cast<std::size_t>(id)], gamma, part,
                                     sel.round_cap, sel.decay, lambda_override);
                break;
            }
            case PolicyKind::oort_style:
                u = statistical_utility(losses) *
                    time_penalty(train.preferred_round_time, times[static_cast<std::size_t>(id)],
                                 train.beta);
                break;
            case PolicyKind::loss_proportional:
            case PolicyKind::qffl_weighting: {
                double total = 0.0;
                for (const double l : losses) total += l;
                u = losses.empty() ? 0.0 : total / static_cast<double>(losses.size());
                break;
            }
            case PolicyKind::random_uniform:
                break;
        }
        utilities[id] = u;
        max_explored = std::max(max_explored, u);
    }
    for (const auto& profile : profiles) {
        if (!utilities.count(profile.id)) utilities[profile.id] = max_explored;
    }
    return utilities;
}

}  // namespace

SelectionOutcome select_clients(PolicyKind kind, const PolicyContext& ctx) {
    if (!ctx.profiles || !ctx.round_times || !ctx.state || !ctx.train || !ctx.selection) {
        throw std::invalid_argument("select_clients: incomplete context");
    }
    const std::size_t n = ctx.profiles->size();
    if (n == 0) throw std::invalid_argument("select_clients: no clients");
    if (ctx.round_times->size() != n) {
        throw std::invalid_argument("select_clients: round_times/profiles size mismatch");
    }

    SelectionOutcome out;
    if (kind == PolicyKind::random_uniform) {
        for (const auto& p : *ctx.profiles) {
            out.utilities[p.id] = 0.0;
            out.probabilities[p.id] = 1.0 / static_cast<double>(n);
        }
    } else {
        out.utilities = scored_utilities(ctx, kind);
        out.probabilities = probabilities(out.utilities);
    }

    const double q_for_weights =
        kind == PolicyKind::qffl_weighting ? ctx.selection->qffl_q : ctx.train->q;
    for (const auto& [id, p] : out.probabilities) {
        out.weights[id] = client_weight(p, q_for_weights, n);
    }

    if (kind == PolicyKind::random_uniform || kind == PolicyKind::qffl_weighting) {
        // Uniform participation; qffl keeps its loss-proportional p only for
        // the aggregation weights.
        std::map<int, double> uniform;
        for (const auto& p : *ctx.profiles) uniform[p.id] = 1.0 / static_cast<double>(n);
        out.selected = sample_by_priority(uniform, ctx.train->clients_per_round, ctx.seed);
    } else {
        out.selected = sample_by_priority(out.probabilities, ctx.train->clients_per_round, ctx.seed);
    }
    return out;
}

}  // namespace fedfair
