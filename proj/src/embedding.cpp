#include "forge/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "forge/binary_io.hpp"
#include "forge/rng.hpp"

namespace forge {

using nlohmann::json;

double cosine_similarity(const Embedding& x, const Embedding& y) {
    if (x.size() != y.size())
        throw std::invalid_argument("cosine_similarity: dimension mismatch (" +
                                    std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
    const double nx = x.norm();
    const double ny = y.norm();
    if (nx <= 1e-12 || ny <= 1e-12)
        throw std::invalid_argument("cosine_similarity: zero-norm input");
    return x.dot(y) / (nx * ny);
}

Embedding normalized(const Embedding& x) {
    const double n = x.norm();
    if (n <= 1e-12) throw std::invalid_argument("normalized: zero or near-zero vector");
    return x / n;
}

TopK top_k(std::span<const double> scores, int k) {
    const int n = static_cast<int>(scores.size());
    if (k <= 0) throw std::invalid_argument("top_k: k must be positive");
    if (k > n)
        throw std::invalid_argument("top_k: k=" + std::to_string(k) + " exceeds " +
                                    std::to_string(n) + " scores");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    TopK result;
    result.indices.assign(order.begin(), order.begin() + k);
    result.values.reserve(k);
    for (int i = 0; i < k; ++i) result.values.push_back(scores[result.indices[i]]);
    return result;
}

void ImageEncoder::encode_backward(const Image&, const Embedding&, Image&) const {
    throw std::invalid_argument("encoder '" + id() + "' is not differentiable");
}

// ---------------------------------------------------------------------------
// Toy text encoder

ToyTextEncoder::ToyTextEncoder(std::string id, int dimension, std::uint64_t seed)
    : id_(std::move(id)), dim_(dimension), seed_(seed) {
    if (dimension <= 0) throw std::invalid_argument("ToyTextEncoder: dimension must be positive");
}

Embedding ToyTextEncoder::encode(std::string_view text) const {
    // Count tokens per hash bucket.
    std::vector<std::pair<int, int>> bucket_counts;  // (bucket, count), built sorted
    {
        std::vector<int> buckets;
        std::string token;
        auto flush = [&] {
            if (token.empty()) return;
            buckets.push_back(static_cast<int>(hash_tag(token) % kBuckets));
            token.clear();
        };
        for (char ch : text) {
            const unsigned char c = static_cast<unsigned char>(ch);
            if (std::isalnum(c))
                token.push_back(static_cast<char>(std::tolower(c)));
            else
                flush();
        }
        flush();
        std::sort(buckets.begin(), buckets.end());
        for (std::size_t i = 0; i < buckets.size();) {
            std::size_t j = i;
            while (j < buckets.size() && buckets[j] == buckets[i]) ++j;
            bucket_counts.emplace_back(buckets[i], static_cast<int>(j - i));
            i = j;
        }
    }

    Embedding out = Embedding::Zero(dim_);
    // Each bucket owns a fixed Gaussian column derived from (seed, bucket);
    // summing in sorted bucket order keeps the result bitwise stable.
    for (const auto& [bucket, count] : bucket_counts) {
        Rng rng(splitmix64(seed_ ^ (0x9e3779b97f4a7c15ULL * (bucket + 1))));
        for (int d = 0; d < dim_; ++d) out[d] += count * rng.normal();
    }
    if (bucket_counts.empty()) {
        // No tokens: fall back to a fixed non-zero vector so downstream cosine
        // math stays defined; callers that care reject empty queries earlier.
        Rng rng(splitmix64(seed_ ^ 0x5bf03635ULL));
        for (int d = 0; d < dim_; ++d) out[d] = rng.normal();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Toy image encoder

ToyImageEncoder::ToyImageEncoder(std::string id, int dimension, std::uint64_t seed)
    : id_(std::move(id)), dim_(dimension) {
    if (dimension <= 0) throw std::invalid_argument("ToyImageEncoder: dimension must be positive");
    const int in_dim = kGrid * kGrid * 3;
    projection_.resize(dim_, in_dim);
    Rng rng(splitmix64(seed ^ hash_tag("toy-image-projection")));
    for (int r = 0; r < dim_; ++r)
        for (int c = 0; c < in_dim; ++c) projection_(r, c) = rng.normal() / std::sqrt(in_dim);
}

namespace {

// Pixel range of pooling cell i out of kGrid along an axis of length n.
inline std::pair<int, int> pool_range(int i, int n, int grid) {
    const int lo = static_cast<int>(static_cast<std::int64_t>(i) * n / grid);
    const int hi = static_cast<int>(static_cast<std::int64_t>(i + 1) * n / grid);
    return {lo, hi};
}

}  // namespace

Embedding ToyImageEncoder::encode(const Image& image) const {
    if (image.height < kGrid || image.width < kGrid)
        throw std::invalid_argument("ToyImageEncoder: image smaller than pooling grid");
    Vec pooled(kGrid * kGrid * 3);
    for (int gy = 0; gy < kGrid; ++gy) {
        const auto [y0, y1] = pool_range(gy, image.height, kGrid);
        for (int gx = 0; gx < kGrid; ++gx) {
            const auto [x0, x1] = pool_range(gx, image.width, kGrid);
            double sum[3] = {0, 0, 0};
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x)
                    for (int c = 0; c < 3; ++c) sum[c] += image.at(y, x, c);
            const double inv = 1.0 / ((y1 - y0) * (x1 - x0));
            for (int c = 0; c < 3; ++c) pooled[(gy * kGrid + gx) * 3 + c] = sum[c] * inv;
        }
    }
    return projection_ * pooled;
}

void ToyImageEncoder::encode_backward(const Image& image, const Embedding& grad_embedding,
                                      Image& grad_image) const {
    if (grad_embedding.size() != dim_)
        throw std::invalid_argument("ToyImageEncoder: gradient dimension mismatch");
    if (grad_image.height != image.height || grad_image.width != image.width)
        grad_image = Image(image.height, image.width);
    const Vec grad_pooled = projection_.transpose() * grad_embedding;
    for (int gy = 0; gy < kGrid; ++gy) {
        const auto [y0, y1] = pool_range(gy, image.height, kGrid);
        for (int gx = 0; gx < kGrid; ++gx) {
            const auto [x0, x1] = pool_range(gx, image.width, kGrid);
            const double inv = 1.0 / ((y1 - y0) * (x1 - x0));
            for (int c = 0; c < 3; ++c) {
                const double g = grad_pooled[(gy * kGrid + gx) * 3 + c] * inv;
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) grad_image.at(y, x, c) += g;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Precomputed encoder

PrecomputedTextEncoder::PrecomputedTextEncoder(std::string id,
                                               const std::filesystem::path& cache_prefix)
    : id_(std::move(id)) {
    EmbeddingCache cache = load_embedding_cache(cache_prefix);
    dim_ = cache.dimension;
    items_ = std::move(cache.item_ids);
    table_ = std::move(cache.values);
    for (int i = 0; i < static_cast<int>(items_.size()); ++i) row_of_.emplace(items_[i], i);
}

Embedding PrecomputedTextEncoder::encode(std::string_view text) const {
    const auto it = row_of_.find(std::string(text));
    if (it == row_of_.end())
        throw DataError("encoder '" + id_ + "': no precomputed embedding for \"" +
                        std::string(text) + "\"");
    return table_.row(it->second).transpose();
}

// ---------------------------------------------------------------------------
// Registry

void EncoderRegistry::register_text(std::shared_ptr<TextEncoder> encoder) {
    if (has_text(encoder->id()))
        throw ConfigError("duplicate text encoder id '" + encoder->id() + "'");
    text_.push_back(std::move(encoder));
}

void EncoderRegistry::register_image(std::shared_ptr<ImageEncoder> encoder) {
    if (has_image(encoder->id()))
        throw ConfigError("duplicate image encoder id '" + encoder->id() + "'");
    image_.push_back(std::move(encoder));
}

namespace {

std::string join_ids(const std::vector<std::string>& ids) {
    std::string out;
    for (const auto& id : ids) {
        if (!out.empty()) out += ", ";
        out += id;
    }
    return out.empty() ? "(none)" : out;
}

}  // namespace

const TextEncoder& EncoderRegistry::text(const std::string& id) const {
    for (const auto& e : text_)
        if (e->id() == id) return *e;
    throw ConfigError("unknown text encoder '" + id + "'; registered: " + join_ids(text_ids()));
}

const ImageEncoder& EncoderRegistry::image(const std::string& id) const {
    for (const auto& e : image_)
        if (e->id() == id) return *e;
    throw ConfigError("unknown image encoder '" + id + "'; registered: " + join_ids(image_ids()));
}

bool EncoderRegistry::has_text(const std::string& id) const {
    for (const auto& e : text_)
        if (e->id() == id) return true;
    return false;
}

bool EncoderRegistry::has_image(const std::string& id) const {
    for (const auto& e : image_)
        if (e->id() == id) return true;
    return false;
}

std::vector<std::string> EncoderRegistry::text_ids() const {
    std::vector<std::string> ids;
    for (const auto& e : text_) ids.push_back(e->id());
    return ids;
}

std::vector<std::string> EncoderRegistry::image_ids() const {
    std::vector<std::string> ids;
    for (const auto& e : image_) ids.push_back(e->id());
    return ids;
}

void register_toy_encoders(EncoderRegistry& registry, int dimension) {
    registry.register_text(std::make_shared<ToyTextEncoder>("toy-text", dimension, 0));
    registry.register_text(std::make_shared<ToyTextEncoder>("toy-text-s2", dimension, 1));
    registry.register_image(std::make_shared<ToyImageEncoder>("toy-image", dimension, 0));
}

// ---------------------------------------------------------------------------
// Cache I/O

void save_embedding_cache(const std::filesystem::path& prefix, const EmbeddingCache& cache) {
    const auto n = cache.values.rows();
    if (cache.values.cols() != cache.dimension)
        throw std::invalid_argument("embedding cache: table width != dimension");
    if (static_cast<std::size_t>(n) != cache.item_ids.size())
        throw std::invalid_argument("embedding cache: row count != item count");

    auto bin = prefix;
    bin += ".bin";
    write_f32(bin, cache.values.data(), static_cast<std::size_t>(cache.values.size()));

    json sidecar = {{"encoder_id", cache.encoder_id},
                    {"dimension", cache.dimension},
                    {"item_ids", cache.item_ids}};
    auto meta = prefix;
    meta += ".json";
    std::ofstream out(meta);
    if (!out) throw DataError("cannot open for writing: " + meta.string());
    out << sidecar.dump(2) << "\n";
}

EmbeddingCache load_embedding_cache(const std::filesystem::path& prefix) {
    auto meta = prefix;
    meta += ".json";
    std::ifstream in(meta);
    if (!in) throw DataError("cannot open embedding cache sidecar: " + meta.string());
    json sidecar;
    try {
        in >> sidecar;
    } catch (const json::exception& e) {
        throw DataError("invalid embedding cache sidecar " + meta.string() + ": " + e.what());
    }

    EmbeddingCache cache;
    try {
        cache.encoder_id = sidecar.at("encoder_id").get<std::string>();
        cache.dimension = sidecar.at("dimension").get<int>();
        cache.item_ids = sidecar.at("item_ids").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw DataError("embedding cache sidecar " + meta.string() + ": " + e.what());
    }
    if (cache.dimension <= 0) throw DataError(meta.string() + ": non-positive dimension");

    auto bin = prefix;
    bin += ".bin";
    const std::size_t count = cache.item_ids.size() * static_cast<std::size_t>(cache.dimension);
    const auto raw = read_f32(bin, count);
    cache.values.resize(static_cast<Eigen::Index>(cache.item_ids.size()), cache.dimension);
    for (std::size_t i = 0; i < count; ++i) cache.values.data()[i] = raw[i];
    return cache;
}

}  // namespace forge
