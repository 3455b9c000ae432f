#include "fedfair/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "fedfair/rng.hpp"
#include "json.hpp"

namespace fedfair {

namespace {

constexpr char kCheckpointMagic[8] = {'F', 'F', '3', 'C', 'K', 'P', 'T', '1'};

void check_shapes(const ModelParams& params, const LabeledDataset& ds) {
    if (params.f != ds.f || params.num_classes != ds.num_classes) {
        throw std::invalid_argument("model/dataset shape mismatch: model is C=" +
                                    std::to_string(params.num_classes) + ", f=" +
                                    std::to_string(params.f) + "; dataset is C=" +
                                    std::to_string(ds.num_classes) + ", f=" +
                                    std::to_string(ds.f));
    }
    const std::size_t want = static_cast<std::size_t>(params.num_classes) * params.f +
                             static_cast<std::size_t>(params.num_classes);
    if (params.w.size() != want) {
        throw std::invalid_argument("parameter vector length " + std::to_string(params.w.size()) +
                                    " does not match shape (want " + std::to_string(want) + ")");
    }
}

// Logits for one sample; z must hold C entries.
void logits(const ModelParams& params, std::span<const double> x, double* z) {
    const std::size_t C = static_cast<std::size_t>(params.num_classes);
    const std::size_t f = params.f;
    const double* bias = params.w.data() + C * f;
    for (std::size_t c = 0; c < C; ++c) {
        const double* wc = params.w.data() + c * f;
        double acc = bias[c];
        for (std::size_t j = 0; j < f; ++j) acc += wc[j] * x[j];
        z[c] = acc;
    }
}

double log_sum_exp(const double* z, std::size_t C) {
    double m = z[0];
    for (std::size_t c = 1; c < C; ++c) m = std::max(m, z[c]);
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += std::exp(z[c] - m);
    return m + std::log(s);
}

}  // namespace

LossReport per_sample_losses(const ModelParams& params, const LabeledDataset& ds,
                             const std::vector<std::size_t>& indices) {
    check_shapes(params, ds);
    if (indices.empty()) throw std::invalid_argument("per_sample_losses: empty index list");

    const std::size_t C = static_cast<std::size_t>(params.num_classes);
    std::vector<double> z(C);
    LossReport report;
    report.per_sample.reserve(indices.size());
    double total = 0.0;
    for (const std::size_t i : indices) {
        if (i >= ds.n) throw std::invalid_argument("per_sample_losses: index out of range");
        logits(params, ds.row(i), z.data());
        const double loss = std::max(0.0, log_sum_exp(z.data(), C) - z[ds.labels[i]]);
        report.per_sample.push_back(loss);
        total += loss;
    }
    report.mean_loss = total / static_cast<double>(indices.size());
    return report;
}

std::pair<double, std::vector<double>> loss_and_grad(const ModelParams& params,
                                                     const LabeledDataset& ds,
                                                     const std::vector<std::size_t>& indices) {
    check_shapes(params, ds);
    if (indices.empty()) throw std::invalid_argument("loss_and_grad: empty index list");

    const std::size_t C = static_cast<std::size_t>(params.num_classes);
    const std::size_t f = params.f;
    std::vector<double> z(C);
    std::vector<double> grad(params.w.size(), 0.0);
    double total = 0.0;
    const double inv_m = 1.0 / static_cast<double>(indices.size());

    for (const std::size_t i : indices) {
        if (i >= ds.n) throw std::invalid_argument("loss_and_grad: index out of range");
        const auto x = ds.row(i);
        logits(params, x, z.data());
        const double lse = log_sum_exp(z.data(), C);
        total += std::max(0.0, lse - z[ds.labels[i]]);
        for (std::size_t c = 0; c < C; ++c) {
            // softmax probability minus one-hot target
            double d = std::exp(z[c] - lse);
            if (static_cast<int>(c) == ds.labels[i]) d -= 1.0;
            d *= inv_m;
            double* gw = grad.data() + c * f;
            for (std::size_t j = 0; j < f; ++j) gw[j] += d * x[j];
            grad[C * f + c] += d;
        }
    }
    return {total * inv_m, std::move(grad)};
}

std::pair<ModelParams, LossReport> sgd_local_update(const ModelParams& params,
                                                    const ClientShard& shard,
                                                    const LabeledDataset& ds, double eta,
                                                    std::size_t tau, std::size_t batch_size,
                                                    std::uint64_t seed) {
    if (eta <= 0.0) throw std::invalid_argument("sgd_local_update: eta must be > 0");
    if (tau == 0) throw std::invalid_argument("sgd_local_update: tau must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("sgd_local_update: batch_size must be >= 1");
    if (shard.indices.empty()) throw std::invalid_argument("sgd_local_update: empty shard");
    check_shapes(params, ds);

    rng::Engine eng(rng::derive(seed, 0x56Du));
    std::vector<std::size_t> pool = shard.indices;
    eng.shuffle(pool);
    std::size_t cursor = 0;

    ModelParams cur = params;
    LossReport final_losses;
    for (std::size_t step = 0; step < tau; ++step) {
        const std::size_t take = std::min(batch_size, shard.indices.size());
        if (cursor + take > pool.size()) {
            eng.shuffle(pool);
            cursor = 0;
        }
        std::vector<std::size_t> batch(pool.begin() + static_cast<std::ptrdiff_t>(cursor),
                                       pool.begin() + static_cast<std::ptrdiff_t>(cursor + take));
        cursor += take;

        if (step + 1 == tau) final_losses = per_sample_losses(cur, ds, batch);
        auto [loss, grad] = loss_and_grad(cur, ds, batch);
        (void)loss;
        for (std::size_t j = 0; j < cur.w.size(); ++j) cur.w[j] -= eta * grad[j];
    }
    return {std::move(cur), std::move(final_losses)};
}

double estimate_lipschitz(const LabeledDataset& ds, std::size_t trials, double radius,
                          std::uint64_t seed) {
    if (trials == 0) throw std::invalid_argument("estimate_lipschitz: trials must be >= 1");
    if (radius <= 0.0) throw std::invalid_argument("estimate_lipschitz: radius must be > 0");

    std::vector<std::size_t> all(ds.n);
    std::iota(all.begin(), all.end(), std::size_t{0});

    rng::Engine eng(rng::derive(seed, 0x11Bu));
    ModelParams a = ModelParams::zeros(ds.num_classes, ds.f);
    ModelParams b = a;
    double best = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        for (std::size_t j = 0; j < a.w.size(); ++j) a.w[j] = eng.uniform(-radius, radius);
        for (std::size_t j = 0; j < b.w.size(); ++j) b.w[j] = eng.uniform(-radius, radius);
        double dist2 = 0.0;
        for (std::size_t j = 0; j < a.w.size(); ++j) {
            const double d = a.w[j] - b.w[j];
            dist2 += d * d;
        }
        if (dist2 <= 0.0) continue;  // degenerate pair, ratio undefined
        const double fa = per_sample_losses(a, ds, all).mean_loss;
        const double fb = per_sample_losses(b, ds, all).mean_loss;
        best = std::max(best, std::abs(fa - fb) / std::sqrt(dist2));
    }
    return best;
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, 8);
    const std::uint32_t C = static_cast<std::uint32_t>(params.num_classes);
    const std::uint32_t f = static_cast<std::uint32_t>(params.f);
    for (std::uint32_t v : {C, f}) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
        out.write(reinterpret_cast<const char*>(b), 4);
    }
    for (double v : params.w) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        unsigned char b[8];
        for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
        out.write(reinterpret_cast<const char*>(b), 8);
    }
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw std::runtime_error(path + ": not a model checkpoint (bad magic)");
    }
    auto read_u32 = [&]() {
        unsigned char b[4];
        if (!in.read(reinterpret_cast<char*>(b), 4)) {
            throw std::runtime_error(path + ": truncated checkpoint header");
        }
        return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
               (std::uint32_t(b[3]) << 24);
    };
    const std::uint32_t C = read_u32();
    const std::uint32_t f = read_u32();
    ModelParams params = ModelParams::zeros(static_cast<int>(C), f);
    for (auto& v : params.w) {
        unsigned char b[8];
        if (!in.read(reinterpret_cast<char*>(b), 8)) {
            throw std::runtime_error(path + ": truncated checkpoint payload");
        }
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= std::uint64_t(b[k]) << (8 * k);
        std::memcpy(&v, &bits, 8);
    }
    return params;
}

std::string params_to_json(const ModelParams& params) {
    nlohmann::json j;
    j["C"] = params.num_classes;
    j["f"] = params.f;
    j["w"] = params.w;
    return j.dump();
}

ModelParams params_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ModelParams params;
    params.num_classes = j.at("C").get<int>();
    params.f = j.at("f").get<std::size_t>();
    params.w = j.at("w").get<std::vector<double>>();
    const std::size_t want = static_cast<std::size_t>(params.num_classes) * params.f +
                             static_cast<std::size_t>(params.num_classes);
    if (params.w.size() != want) {
        throw std::runtime_error("model JSON: parameter length does not match shape");
    }
    return params;
}

}  // namespace fedfair
