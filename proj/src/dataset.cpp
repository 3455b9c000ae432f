#include "fedfair/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fedfair/rng.hpp"
#include "json.hpp"

namespace fedfair {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;
constexpr int kResampleCap = 1000;

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::string& path) {
    if (offset + 4 > buf.size()) {
        throw std::runtime_error(path + ": truncated at byte offset " + std::to_string(offset) +
                                 " (need 4 bytes, have " + std::to_string(buf.size() - offset) + ")");
    }
    return (std::uint32_t(buf[offset]) << 24) | (std::uint32_t(buf[offset + 1]) << 16) |
           (std::uint32_t(buf[offset + 2]) << 8) | std::uint32_t(buf[offset + 3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = read_file(images_path);
    const auto lbl = read_file(labels_path);

    const std::uint32_t img_magic = read_be32(img, 0, images_path);
    if (img_magic != kImagesMagic) {
        char msg[160];
        std::snprintf(msg, sizeof msg, "%s: bad magic 0x%08x at byte offset 0 (expected 0x%08x)",
                      images_path.c_str(), img_magic, kImagesMagic);
        throw std::runtime_error(msg);
    }
    const std::uint32_t lbl_magic = read_be32(lbl, 0, labels_path);
    if (lbl_magic != kLabelsMagic) {
        char msg[160];
        std::snprintf(msg, sizeof msg, "%s: bad magic 0x%08x at byte offset 0 (expected 0x%08x)",
                      labels_path.c_str(), lbl_magic, kLabelsMagic);
        throw std::runtime_error(msg);
    }

    const std::uint32_t n_img = read_be32(img, 4, images_path);
    const std::uint32_t rows = read_be32(img, 8, images_path);
    const std::uint32_t cols = read_be32(img, 12, images_path);
    const std::uint32_t n_lbl = read_be32(lbl, 4, labels_path);
    if (n_img != n_lbl) {
        throw std::runtime_error("image/label count mismatch: " + images_path + " has " +
                                 std::to_string(n_img) + ", " + labels_path + " has " +
                                 std::to_string(n_lbl));
    }

    const std::size_t f = std::size_t(rows) * cols;
    const std::size_t need_img = 16 + std::size_t(n_img) * f;
    if (img.size() < need_img) {
        throw std::runtime_error(images_path + ": truncated at byte offset " +
                                 std::to_string(img.size()) + " (expected " +
                                 std::to_string(need_img) + " bytes)");
    }
    const std::size_t need_lbl = 8 + n_lbl;
    if (lbl.size() < need_lbl) {
        throw std::runtime_error(labels_path + ": truncated at byte offset " +
                                 std::to_string(lbl.size()) + " (expected " +
                                 std::to_string(need_lbl) + " bytes)");
    }

    LabeledDataset ds;
    ds.n = n_img;
    ds.f = f;
    ds.features.resize(ds.n * ds.f);
    ds.labels.resize(ds.n);
    for (std::size_t i = 0; i < ds.n * ds.f; ++i) {
        ds.features[i] = img[16 + i] / 255.0;
    }
    int max_label = 0;
    for (std::size_t i = 0; i < ds.n; ++i) {
        ds.labels[i] = lbl[8 + i];
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.num_classes = max_label + 1;
    return ds;
}

void save_idx(const LabeledDataset& ds, const std::string& images_path,
              const std::string& labels_path) {
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("cannot write file: " + images_path);
    write_be32(img, kImagesMagic);
    write_be32(img, static_cast<std::uint32_t>(ds.n));
    write_be32(img, static_cast<std::uint32_t>(ds.f));
    write_be32(img, 1);
    for (double v : ds.features) {
        const double clamped = std::min(1.0, std::max(0.0, v));
        img.put(static_cast<char>(static_cast<unsigned char>(clamped * 255.0 + 0.5)));
    }

    std::ofstream lbl(labels_path, std::ios::binary);
    if (!lbl) throw std::runtime_error("cannot write file: " + labels_path);
    write_be32(lbl, kLabelsMagic);
    write_be32(lbl, static_cast<std::uint32_t>(ds.n));
    for (int y : ds.labels) lbl.put(static_cast<char>(static_cast<unsigned char>(y)));
}

LabeledDataset generate_synthetic(std::size_t n, std::size_t f, int num_classes,
                                  double class_separation, std::uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("generate_synthetic: need at least 2 classes");
    if (f < 1) throw std::invalid_argument("generate_synthetic: need at least 1 feature");
    if (n < static_cast<std::size_t>(num_classes)) {
        throw std::invalid_argument("generate_synthetic: need n >= number of classes");
    }
    if (class_separation < 0.0) {
        throw std::invalid_argument("generate_synthetic: class_separation must be >= 0");
    }

    rng::Engine eng(rng::derive(seed, 0x5d5u));
    std::vector<double> centers(static_cast<std::size_t>(num_classes) * f);
    for (auto& c : centers) c = eng.normal() * class_separation;

    LabeledDataset ds;
    ds.n = n;
    ds.f = f;
    ds.num_classes = num_classes;
    ds.features.resize(n * f);
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % num_classes);
        ds.labels[i] = c;
        for (std::size_t j = 0; j < f; ++j) {
            ds.features[i * f + j] = centers[static_cast<std::size_t>(c) * f + j] + eng.normal();
        }
    }

    // Per-feature min-max normalization to [0,1].
    for (std::size_t j = 0; j < f; ++j) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            lo = std::min(lo, ds.features[i * f + j]);
            hi = std::max(hi, ds.features[i * f + j]);
        }
        const double range = hi - lo;
        for (std::size_t i = 0; i < n; ++i) {
            ds.features[i * f + j] = range > 0.0 ? (ds.features[i * f + j] - lo) / range : 0.0;
        }
    }

    // Shuffle rows so labels are not stored in round-robin order.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    eng.shuffle(perm);
    LabeledDataset out;
    out.n = n;
    out.f = f;
    out.num_classes = num_classes;
    out.features.resize(n * f);
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.labels[i] = ds.labels[perm[i]];
        std::copy_n(ds.features.begin() + static_cast<std::ptrdiff_t>(perm[i] * f), f,
                    out.features.begin() + static_cast<std::ptrdiff_t>(i * f));
    }
    return out;
}

std::vector<ClientShard> partition_iid(const LabeledDataset& ds, std::size_t n_clients,
                                       std::uint64_t seed) {
    if (n_clients == 0) throw std::invalid_argument("partition_iid: need at least one client");
    if (n_clients > ds.n) {
        throw std::invalid_argument("partition_iid: more clients (" + std::to_string(n_clients) +
                                    ") than samples (" + std::to_string(ds.n) + ")");
    }
    std::vector<std::size_t> idx(ds.n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng::Engine eng(rng::derive(seed, 0x11Du));
    eng.shuffle(idx);

    std::vector<ClientShard> shards(n_clients);
    for (std::size_t k = 0; k < n_clients; ++k) shards[k].owner = static_cast<int>(k);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        shards[i % n_clients].indices.push_back(idx[i]);
    }
    return shards;
}

std::vector<ClientShard> partition_dirichlet(const LabeledDataset& ds, std::size_t n_clients,
                                             double alpha, std::size_t min_size,
                                             std::uint64_t seed) {
    if (alpha <= 0.0) throw std::invalid_argument("partition_dirichlet: alpha must be > 0");
    if (n_clients == 0) throw std::invalid_argument("partition_dirichlet: need at least one client");
    if (n_clients * std::max<std::size_t>(min_size, 1) > ds.n) {
        throw std::invalid_argument("partition_dirichlet: infeasible min_size " +
                                    std::to_string(min_size) + " for " + std::to_string(n_clients) +
                                    " clients and " + std::to_string(ds.n) + " samples");
    }

    const std::size_t C = static_cast<std::size_t>(ds.num_classes);
    rng::Engine eng(rng::derive(seed, 0xD1Cu));

    for (int attempt = 0; attempt < kResampleCap; ++attempt) {
        std::vector<std::vector<std::size_t>> pools(C);
        for (std::size_t i = 0; i < ds.n; ++i) pools[static_cast<std::size_t>(ds.labels[i])].push_back(i);
        for (auto& p : pools) eng.shuffle(p);

        std::vector<ClientShard> shards(n_clients);
        for (std::size_t k = 0; k < n_clients; ++k) {
            shards[k].owner = static_cast<int>(k);
            const std::size_t quota = ds.n / n_clients + (k < ds.n % n_clients ? 1 : 0);
            const auto props = eng.dirichlet(alpha, C);

            // Largest-remainder allocation of the quota across the drawn
            // proportions, capped by what is left in each class pool.
            double mass = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                if (!pools[c].empty()) mass += props[c];
            }
            std::vector<std::size_t> take(C, 0);
            std::vector<std::pair<double, std::size_t>> remainders;
            std::size_t assigned = 0;
            for (std::size_t c = 0; c < C; ++c) {
                if (pools[c].empty() || mass <= 0.0) continue;
                const double raw = props[c] / mass * static_cast<double>(quota);
                take[c] = std::min(static_cast<std::size_t>(raw), pools[c].size());
                assigned += take[c];
                remainders.emplace_back(raw - std::floor(raw), c);
            }
            std::sort(remainders.rbegin(), remainders.rend());
            for (auto round = remainders.begin(); assigned < quota;) {
                bool progressed = false;
                for (auto it = round; it != remainders.end() && assigned < quota; ++it) {
                    const std::size_t c = it->second;
                    if (take[c] < pools[c].size()) {
                        ++take[c];
                        ++assigned;
                        progressed = true;
                    }
                }
                if (!progressed) break;  // every pool exhausted
            }
            for (std::size_t c = 0; c < C; ++c) {
                for (std::size_t s = 0; s < take[c]; ++s) {
                    shards[k].indices.push_back(pools[c].back());
                    pools[c].pop_back();
                }
            }
        }

        const bool ok = std::all_of(shards.begin(), shards.end(), [&](const ClientShard& s) {
            return s.size() >= std::max<std::size_t>(min_size, 1);
        });
        if (ok) return shards;
    }
    throw std::runtime_error("partition_dirichlet: could not satisfy min_size=" +
                             std::to_string(min_size) + " within " + std::to_string(kResampleCap) +
                             " attempts");
}

std::vector<ClientShard> partition_label_shard(const LabeledDataset& ds, std::size_t n_clients,
                                               std::size_t shards_per_client,
                                               std::uint64_t seed) {
    if (shards_per_client == 0) {
        throw std::invalid_argument("partition_label_shard: shards_per_client must be >= 1");
    }
    const std::size_t total = n_clients * shards_per_client;
    if (total == 0 || total > ds.n) {
        throw std::invalid_argument("partition_label_shard: need n >= n_clients * shards_per_client");
    }

    std::vector<std::size_t> idx(ds.n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return ds.labels[a] < ds.labels[b]; });

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng::Engine eng(rng::derive(seed, 0x1abu));
    eng.shuffle(order);

    std::vector<ClientShard> shards(n_clients);
    for (std::size_t k = 0; k < n_clients; ++k) shards[k].owner = static_cast<int>(k);
    for (std::size_t s = 0; s < total; ++s) {
        const std::size_t piece = order[s];
        const std::size_t lo = piece * ds.n / total;
        const std::size_t hi = (piece + 1) * ds.n / total;
        auto& shard = shards[s / shards_per_client];
        shard.indices.insert(shard.indices.end(), idx.begin() + static_cast<std::ptrdiff_t>(lo),
                             idx.begin() + static_cast<std::ptrdiff_t>(hi));
    }
    return shards;
}

std::string shards_to_json(const std::vector<ClientShard>& shards) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : shards) arr.push_back(s.indices);
    return arr.dump();
}

std::vector<ClientShard> shards_from_json(const std::string& text) {
    const auto arr = nlohmann::json::parse(text);
    if (!arr.is_array()) throw std::runtime_error("shard manifest: expected a JSON array");
    std::vector<ClientShard> shards;
    shards.reserve(arr.size());
    int owner = 0;
    for (const auto& item : arr) {
        ClientShard s;
        s.owner = owner++;
        s.indices = item.get<std::vector<std::size_t>>();
        shards.push_back(std::move(s));
    }
    return shards;
}

}  // namespace fedfair
