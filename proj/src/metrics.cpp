#include "fedfair/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fedfair {

namespace {

int predict(const ModelParams& params, std::span<const double> x) {
    const std::size_t C = static_cast<std::size_t>(params.num_classes);
    const std::size_t f = params.f;
    const double* bias = params.w.data() + C * f;
    int best = 0;
    double best_z = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < C; ++c) {
        const double* wc = params.w.data() + c * f;
        double z = bias[c];
        for (std::size_t j = 0; j < f; ++j) z += wc[j] * x[j];
        if (z > best_z) {  // strict: ties keep the lowest class id
            best_z = z;
            best = static_cast<int>(c);
        }
    }
    return best;
}

}  // namespace

std::vector<double> accuracy_per_client(const ModelParams& params,
                                        const std::vector<ClientShard>& test_shards,
                                        const LabeledDataset& ds) {
    if (test_shards.empty()) throw std::invalid_argument("accuracy_per_client: no test shards");
    std::vector<double> out;
    out.reserve(test_shards.size());
    for (const auto& shard : test_shards) {
        if (shard.indices.empty()) {
            throw std::invalid_argument("accuracy_per_client: client " +
                                        std::to_string(shard.owner) + " has an empty test shard");
        }
        std::size_t hits = 0;
        for (const std::size_t i : shard.indices) {
            if (predict(params, ds.row(i)) == ds.labels[i]) ++hits;
        }
        out.push_back(static_cast<double>(hits) / static_cast<double>(shard.size()));
    }
    return out;
}

double accuracy_on(const ModelParams& params, const LabeledDataset& ds,
                   const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("accuracy_on: empty index set");
    std::size_t hits = 0;
    for (const std::size_t i : indices) {
        if (predict(params, ds.row(i)) == ds.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(indices.size());
}

double variance_uniformity(const std::vector<double>& perf) {
    if (perf.empty()) throw std::invalid_argument("variance_uniformity: empty vector");
    const double n = static_cast<double>(perf.size());
    double mean = 0.0;
    for (const double v : perf) mean += v;
    mean /= n;
    double var = 0.0;
    for (const double v : perf) var += (v - mean) * (v - mean);
    return var / n;
}

double cosine_uniformity(const std::vector<double>& perf) {
    if (perf.empty()) throw std::invalid_argument("cosine_uniformity: empty vector");
    double sum = 0.0, sum_sq = 0.0;
    for (const double v : perf) {
        if (v < 0.0) throw std::invalid_argument("cosine_uniformity: entries must be >= 0");
        sum += v;
        sum_sq += v * v;
    }
    if (sum_sq <= 0.0) throw std::invalid_argument("cosine_uniformity: all-zero vector");
    const double n = static_cast<double>(perf.size());
    return (sum / n) / std::sqrt(sum_sq / n);
}

double participation_fairness(const std::vector<int>& counts) {
    if (counts.empty()) throw std::invalid_argument("participation_fairness: empty vector");
    double sum = 0.0, sum_sq = 0.0;
    for (const int c : counts) {
        if (c < 0) throw std::invalid_argument("participation_fairness: counts must be >= 0");
        sum += c;
        sum_sq += static_cast<double>(c) * c;
    }
    if (sum_sq <= 0.0) throw std::invalid_argument("participation_fairness: all-zero counts");
    return sum * sum / (static_cast<double>(counts.size()) * sum_sq);
}

namespace {

nlohmann::json round_to_json(const RoundRecord& r) {
    return {{"round", r.round},
            {"global_accuracy", r.global_accuracy},
            {"per_client_accuracy", r.per_client_accuracy},
            {"accuracy_variance", r.accuracy_variance},
            {"cosine_uniformity", r.cosine_uniformity},
            {"jain_participation", r.jain_participation},
            {"participation_counts", r.participation_counts},
            {"sim_clock_s", r.sim_clock_s},
            {"selected", r.selected}};
}

RoundRecord round_from_json(const nlohmann::json& j) {
    RoundRecord r;
    r.round = j.at("round").get<int>();
    r.global_accuracy = j.at("global_accuracy").get<double>();
    r.per_client_accuracy = j.at("per_client_accuracy").get<std::vector<double>>();
    r.accuracy_variance = j.at("accuracy_variance").get<double>();
    r.cosine_uniformity = j.at("cosine_uniformity").get<double>();
    r.jain_participation = j.at("jain_participation").get<double>();
    r.participation_counts = j.at("participation_counts").get<std::vector<int>>();
    r.sim_clock_s = j.at("sim_clock_s").get<double>();
    r.selected = j.at("selected").get<std::vector<int>>();
    return r;
}

}  // namespace

std::string result_to_json(const ExperimentResult& result) {
    nlohmann::json j;
    j["schema_version"] = result.schema_version;
    j["policy"] = result.policy;
    j["seed"] = result.seed;
    j["stopped_by_budget"] = result.stopped_by_budget;
    j["rounds"] = nlohmann::json::array();
    for (const auto& r : result.rounds) j["rounds"].push_back(round_to_json(r));
    j["final_model"] = {{"C", result.final_model.num_classes},
                        {"f", result.final_model.f},
                        {"w", result.final_model.w}};
    j["final_per_client_accuracy"] = result.final_per_client_accuracy;
    j["final_participation_counts"] = result.final_participation_counts;
    j["budget_accumulated"] = result.budget_accumulated;
    return j.dump(2);
}

ExperimentResult result_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ExperimentResult result;
    result.schema_version = j.at("schema_version").get<int>();
    result.policy = j.at("policy").get<std::string>();
    result.seed = j.at("seed").get<std::uint64_t>();
    result.stopped_by_budget = j.at("stopped_by_budget").get<bool>();
    for (const auto& r : j.at("rounds")) result.rounds.push_back(round_from_json(r));
    result.final_model.num_classes = j.at("final_model").at("C").get<int>();
    result.final_model.f = j.at("final_model").at("f").get<std::size_t>();
    result.final_model.w = j.at("final_model").at("w").get<std::vector<double>>();
    result.final_per_client_accuracy =
        j.at("final_per_client_accuracy").get<std::vector<double>>();
    result.final_participation_counts =
        j.at("final_participation_counts").get<std::vector<int>>();
    result.budget_accumulated =
        j.at("budget_accumulated").get<std::map<std::string, double>>();
    return result;
}

namespace {

struct Series {
    std::string label;
    std::vector<double> xs, ys;
};

std::string svg_escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Minimal static line chart. Keeps the XML well-formed and self-contained.
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<Series>& series) {
    const double W = 720, H = 480, ML = 70, MR = 160, MT = 50, MB = 55;
    double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
    bool first = true;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            if (first) {
                x_lo = x_hi = s.xs[i];
                y_lo = y_hi = s.ys[i];
                first = false;
            }
            x_lo = std::min(x_lo, s.xs[i]);
            x_hi = std::max(x_hi, s.xs[i]);
            y_lo = std::min(y_lo, s.ys[i]);
            y_hi = std::max(y_hi, s.ys[i]);
        }
    }
    if (x_hi <= x_lo) x_hi = x_lo + 1;
    if (y_hi <= y_lo) y_hi = y_lo + 1;
    const auto px = [&](double x) { return ML + (x - x_lo) / (x_hi - x_lo) * (W - ML - MR); };
    const auto py = [&](double y) { return H - MB - (y - y_lo) / (y_hi - y_lo) * (H - MT - MB); };

    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf"};
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
        << "font-family=\"sans-serif\">" << svg_escape(title) << "</text>\n";
    out << "<line x1=\"" << ML << "\" y1=\"" << H - MB << "\" x2=\"" << W - MR << "\" y2=\""
        << H - MB << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\"" << H - MB
        << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fx = x_lo + (x_hi - x_lo) * k / 4.0;
        const double fy = y_lo + (y_hi - y_lo) * k / 4.0;
        std::ostringstream xv, yv;
        xv.precision(4);
        yv.precision(4);
        xv << fx;
        yv << fy;
        out << "<text x=\"" << px(fx) << "\" y=\"" << H - MB + 18
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << xv.str()
            << "</text>\n";
        out << "<text x=\"" << ML - 8 << "\" y=\"" << py(fy) + 4
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << yv.str()
            << "</text>\n";
    }
    out << "<text x=\"" << (ML + W - MR) / 2 << "\" y=\"" << H - 12
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">"
        << svg_escape(x_label) << "</text>\n";
    out << "<text x=\"18\" y=\"" << (MT + H - MB) / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
        << "transform=\"rotate(-90 18 " << (MT + H - MB) / 2 << ")\">" << svg_escape(y_label)
        << "</text>\n";

    int color = 0;
    for (const auto& s : series) {
        const char* c = kColors[color % 7];
        out << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            out << px(s.xs[i]) << "," << py(s.ys[i]) << " ";
        }
        out << "\"/>\n";
        const double ly = MT + 18.0 * color;
        out << "<line x1=\"" << W - MR + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - MR + 34
            << "\" y2=\"" << ly << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << W - MR + 40 << "\" y=\"" << ly + 4
            << "\" font-size=\"11\" font-family=\"sans-serif\">" << svg_escape(s.label)
            << "</text>\n";
        ++color;
    }
    out << "</svg>\n";

    std::ofstream file(path);
    if (!file) throw std::runtime_error("cannot write chart: " + path);
    file << out.str();
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sample standard deviation (n-1), as used for the +/- entries over seeds.
double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (const double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

void emit_reports(const std::vector<ExperimentResult>& results, const std::string& out_dir) {
    if (results.empty()) throw std::invalid_argument("emit_reports: no results");
    std::filesystem::create_directories(out_dir);
    if (!std::filesystem::is_directory(out_dir)) {
        throw std::runtime_error("emit_reports: cannot create output directory " + out_dir);
    }

    // Per-round CSV, one row per round per (policy, seed).
    {
        std::ofstream csv(out_dir + "/rounds.csv");
        if (!csv) throw std::runtime_error("emit_reports: cannot write rounds.csv");
        csv << "round,policy,seed,global_acc,acc_variance,cosine_unif,jain_participation,"
               "sim_clock_s\n";
        csv.precision(12);
        for (const auto& res : results) {
            for (const auto& r : res.rounds) {
                csv << r.round << "," << res.policy << "," << res.seed << "," << r.global_accuracy
                    << "," << r.accuracy_variance << "," << r.cosine_uniformity << ","
                    << r.jain_participation << "," << r.sim_clock_s << "\n";
            }
        }
    }

    // Summary: mean +/- sample std-dev over seeds, grouped by policy.
    {
        std::map<std::string, std::vector<const ExperimentResult*>> by_policy;
        for (const auto& res : results) by_policy[res.policy].push_back(&res);

        nlohmann::json summary;
        summary["schema_version"] = 1;
        summary["policies"] = nlohmann::json::object();
        for (const auto& [policy, group] : by_policy) {
            std::vector<double> acc, var, cos, jain, clock, rounds_run;
            for (const auto* res : group) {
                if (res->rounds.empty()) continue;
                const auto& last = res->rounds.back();
                acc.push_back(last.global_accuracy);
                var.push_back(last.accuracy_variance);
                cos.push_back(last.cosine_uniformity);
                jain.push_back(last.jain_participation);
                clock.push_back(last.sim_clock_s);
                rounds_run.push_back(static_cast<double>(res->rounds.size()));
            }
            nlohmann::json p;
            p["seeds"] = group.size();
            const auto put = [&](const char* name, const std::vector<double>& v) {
                p[name] = {{"mean", mean_of(v)}, {"std", sample_std(v)}};
            };
            put("global_accuracy", acc);
            put("accuracy_variance", var);
            put("cosine_uniformity", cos);
            put("jain_participation", jain);
            put("sim_clock_s", clock);
            put("rounds_run", rounds_run);
            summary["policies"][policy] = p;
        }
        std::ofstream out(out_dir + "/summary.json");
        if (!out) throw std::runtime_error("emit_reports: cannot write summary.json");
        out << summary.dump(2) << "\n";
    }

    // Charts: seed-averaged accuracy variance vs round, accuracy vs clock.
    {
        std::map<std::string, std::vector<const ExperimentResult*>> by_policy;
        for (const auto& res : results) by_policy[res.policy].push_back(&res);

        std::vector<Series> var_series, acc_series;
        for (const auto& [policy, group] : by_policy) {
            std::size_t max_rounds = 0;
            for (const auto* res : group) max_rounds = std::max(max_rounds, res->rounds.size());
            Series vs{policy, {}, {}};
            Series as{policy, {}, {}};
            for (std::size_t r = 0; r < max_rounds; ++r) {
                std::vector<double> v, a, c;
                for (const auto* res : group) {
                    if (r < res->rounds.size()) {
                        v.push_back(res->rounds[r].accuracy_variance);
                        a.push_back(res->rounds[r].global_accuracy);
                        c.push_back(res->rounds[r].sim_clock_s);
                    }
                }
                vs.xs.push_back(static_cast<double>(r + 1));
                vs.ys.push_back(mean_of(v));
                as.xs.push_back(mean_of(c));
                as.ys.push_back(mean_of(a));
            }
            var_series.push_back(std::move(vs));
            acc_series.push_back(std::move(as));
        }
        write_svg_chart(out_dir + "/variance_vs_round.svg", "Per-client accuracy variance by round",
                        "round", "accuracy variance", var_series);
        write_svg_chart(out_dir + "/accuracy_vs_clock.svg", "Global accuracy by simulated clock",
                        "simulated clock (s)", "global accuracy", acc_series);
    }
}

}  // namespace fedfair
