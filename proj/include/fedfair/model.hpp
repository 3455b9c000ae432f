#pragma once

// Convex classification model: multinomial logistic regression with
// per-sample losses, full-batch loss/gradient, and mini-batch SGD.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedfair/dataset.hpp"

namespace fedfair {

// Flat parameter vector: C*f weights (class-major) followed by C biases.
struct ModelParams {
    std::vector<double> w;
    int num_classes = 0;
    std::size_t f = 0;

    static ModelParams zeros(int num_classes, std::size_t f) {
        ModelParams p;
        p.num_classes = num_classes;
        p.f = f;
        p.w.assign(static_cast<std::size_t>(num_classes) * f + num_classes, 0.0);
        return p;
    }

    std::size_t size() const { return w.size(); }
    bool same_shape(const ModelParams& o) const {
        return num_classes == o.num_classes && f == o.f;
    }
};

struct LossReport {
    double mean_loss = 0.0;
    std::vector<double> per_sample;
};

// Per-sample cross-entropy over the given sample indices (numerically
// stable log-sum-exp; losses clamped below at 0).
LossReport per_sample_losses(const ModelParams& params, const LabeledDataset& ds,
                             const std::vector<std::size_t>& indices);

// Mean cross-entropy and its gradient over the given indices. The gradient
// has the same layout and length as the parameter vector.
std::pair<double, std::vector<double>> loss_and_grad(const ModelParams& params,
                                                     const LabeledDataset& ds,
                                                     const std::vector<std::size_t>& indices);

// tau mini-batch SGD steps over the shard. Batches are drawn without
// replacement in epoch-style passes, reshuffling when exhausted. Returns the
// updated parameters and the per-sample losses of the final batch (evaluated
// at the parameters that batch's step started from).
std::pair<ModelParams, LossReport> sgd_local_update(const ModelParams& params,
                                                    const ClientShard& shard,
                                                    const LabeledDataset& ds, double eta,
                                                    std::size_t tau, std::size_t batch_size,
                                                    std::uint64_t seed);

// Diagnostic estimate of the Lipschitz constant of the mean loss: max of
// |F(w)-F(w')| / ||w-w'|| over `trials` random parameter pairs drawn
// uniformly from [-radius, radius]^dim. Zero-distance pairs are skipped.
double estimate_lipschitz(const LabeledDataset& ds, std::size_t trials, double radius,
                          std::uint64_t seed);

// Model checkpoint: 16-byte header (8-byte magic, u32 C, u32 f), then the
// parameters as little-endian 8-byte reals.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

std::string params_to_json(const ModelParams& params);
ModelParams params_from_json(const std::string& text);

}  // namespace fedfair
