#pragma once

// Dataset loading, synthesis, and client partitioning.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fedfair {

// Dense labeled classification dataset. Features are row-major (n x f) and
// normalized to [0, 1] at construction time; clients never see raw bytes.
struct LabeledDataset {
    std::vector<double> features;  // n * f, row-major
    std::vector<int> labels;       // n, values in [0, C)
    std::size_t n = 0;
    std::size_t f = 0;
    int num_classes = 0;

    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * f, f};
    }
};

// A client's slice of a dataset: indices into the parent dataset.
struct ClientShard {
    int owner = 0;
    std::vector<std::size_t> indices;

    std::size_t size() const { return indices.size(); }
};

// Reads an IDX image/label file pair (big-endian, magic 0x00000803 for
// images and 0x00000801 for labels). Pixel bytes are scaled to [0, 1].
// Malformed magic numbers, count mismatches, and truncation are reported
// with the offending byte offset.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

// Writes a dataset back out as an IDX pair (features quantized to bytes).
// Companion to load_idx, used to build loader fixtures.
void save_idx(const LabeledDataset& ds, const std::string& images_path,
              const std::string& labels_path);

// C Gaussian blobs with random centers scaled by class_separation, then
// per-feature min-max normalization to [0,1]. Deterministic per seed.
LabeledDataset generate_synthetic(std::size_t n, std::size_t f, int num_classes,
                                  double class_separation, std::uint64_t seed);

// Shuffle then deal round-robin; shard sizes differ by at most one.
std::vector<ClientShard> partition_iid(const LabeledDataset& ds, std::size_t n_clients,
                                       std::uint64_t seed);

// Label-skewed partition: each client draws label proportions from a
// symmetric Dirichlet(alpha) and fills a balanced quota from the class
// pools. The whole partition is resampled (up to a fixed cap) until every
// shard holds at least min_size samples.
std::vector<ClientShard> partition_dirichlet(const LabeledDataset& ds, std::size_t n_clients,
                                             double alpha, std::size_t min_size,
                                             std::uint64_t seed);

// Alternative non-IID scheme: sort by label, cut into n_clients *
// shards_per_client contiguous label shards, deal shards_per_client to each
// client at random.
std::vector<ClientShard> partition_label_shard(const LabeledDataset& ds, std::size_t n_clients,
                                               std::size_t shards_per_client,
                                               std::uint64_t seed);

// Shard manifests as a JSON array of index arrays.
std::string shards_to_json(const std::vector<ClientShard>& shards);
std::vector<ClientShard> shards_from_json(const std::string& text);

}  // namespace fedfair
