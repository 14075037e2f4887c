#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "forge/common.hpp"
#include "forge/image.hpp"

namespace forge {

using Embedding = Eigen::VectorXd;

// x.y / (|x||y|). Throws on dimension mismatch or a zero-norm input.
double cosine_similarity(const Embedding& x, const Embedding& y);

// Unit-norm copy; near-zero vectors (norm <= 1e-12) are an error, never a NaN.
Embedding normalized(const Embedding& x);

struct TopK {
    std::vector<int> indices;
    std::vector<double> values;
};

// k best scores, descending, ties broken by ascending original index.
TopK top_k(std::span<const double> scores, int k);

class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual const std::string& id() const = 0;
    virtual int dimension() const = 0;
    // Deterministic and pure: the same text always maps to the same vector.
    virtual Embedding encode(std::string_view text) const = 0;
};

class ImageEncoder {
public:
    virtual ~ImageEncoder() = default;
    virtual const std::string& id() const = 0;
    virtual int dimension() const = 0;
    virtual bool differentiable() const { return false; }
    virtual Embedding encode(const Image& image) const = 0;
    // Accumulates d(loss)/d(pixels) given d(loss)/d(embedding). Only encoders
    // reporting differentiable() implement this.
    virtual void encode_backward(const Image& image, const Embedding& grad_embedding,
                                 Image& grad_image) const;
};

// Hashed bag-of-words (buckets mod 4096) projected by per-bucket Gaussian
// columns drawn from the seed. Tokenization lowercases and splits on
// non-alphanumerics.
class ToyTextEncoder final : public TextEncoder {
public:
    ToyTextEncoder(std::string id, int dimension, std::uint64_t seed);
    const std::string& id() const override { return id_; }
    int dimension() const override { return dim_; }
    Embedding encode(std::string_view text) const override;

    static constexpr int kBuckets = 4096;

private:
    std::string id_;
    int dim_;
    std::uint64_t seed_;
};

// 8x8 average-pooled RGB patches flattened (192 values) through a fixed
// seeded Gaussian projection. Linear, hence exactly differentiable.
class ToyImageEncoder final : public ImageEncoder {
public:
    ToyImageEncoder(std::string id, int dimension, std::uint64_t seed);
    const std::string& id() const override { return id_; }
    int dimension() const override { return dim_; }
    bool differentiable() const override { return true; }
    Embedding encode(const Image& image) const override;
    void encode_backward(const Image& image, const Embedding& grad_embedding,
                         Image& grad_image) const override;

    static constexpr int kGrid = 8;

private:
    std::string id_;
    int dim_;
    MatX projection_;  // dim x (kGrid*kGrid*3)
};

// Text encoder backed by a saved embedding cache; the item ids are the exact
// texts. Lets externally computed embeddings stand in for a live model.
class PrecomputedTextEncoder final : public TextEncoder {
public:
    PrecomputedTextEncoder(std::string id, const std::filesystem::path& cache_prefix);
    const std::string& id() const override { return id_; }
    int dimension() const override { return dim_; }
    Embedding encode(std::string_view text) const override;

private:
    std::string id_;
    int dim_ = 0;
    std::vector<std::string> items_;
    MatX table_;
    std::unordered_map<std::string, int> row_of_;
};

// Write-once registry: populated at startup, read-only afterwards.
class EncoderRegistry {
public:
    void register_text(std::shared_ptr<TextEncoder> encoder);
    void register_image(std::shared_ptr<ImageEncoder> encoder);
    const TextEncoder& text(const std::string& id) const;
    const ImageEncoder& image(const std::string& id) const;
    bool has_text(const std::string& id) const;
    bool has_image(const std::string& id) const;
    std::vector<std::string> text_ids() const;
    std::vector<std::string> image_ids() const;

private:
    std::vector<std::shared_ptr<TextEncoder>> text_;
    std::vector<std::shared_ptr<ImageEncoder>> image_;
};

// Registers the built-in toy encoders (toy-text, toy-text-s2, toy-image).
void register_toy_encoders(EncoderRegistry& registry, int dimension = 512);

// On-disk embedding cache: <prefix>.bin holds a little-endian float32 array
// of shape (n, dimension); <prefix>.json is the sidecar
// {encoder_id, dimension, item_ids}.
struct EmbeddingCache {
    std::string encoder_id;
    int dimension = 0;
    std::vector<std::string> item_ids;
    MatX values;  // n x dimension, row i belongs to item_ids[i]
};

void save_embedding_cache(const std::filesystem::path& prefix, const EmbeddingCache& cache);
EmbeddingCache load_embedding_cache(const std::filesystem::path& prefix);

}  // namespace forge
