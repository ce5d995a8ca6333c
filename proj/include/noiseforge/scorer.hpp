// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "noiseforge/core.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace noiseforge {

inline constexpr int kDefaultEmbeddingDim = 64;

/// Lowercased whitespace-separated words.
std::vector<std::string> tokenize(std::string_view text);

struct TokenEmbedding {
    std::string token;
    std::vector<double> vector;
};

/// Per-token 16x16 attention weights for one (image, prompt) evaluation.
/// `maps` is token-major: map t occupies [t*256, (t+1)*256).
struct AttentionMapSet {
    std::vector<std::string> tokens;
    std::vector<double> maps;

    std::span<const double> map(std::size_t token) const {
        return std::span<const double>(maps).subspan(token * kBlocksPerImage, kBlocksPerImage);
    }

    /// Throws InvalidArgument when shapes are off, a value leaves [0,1] or a
    /// cell's weights do not sum to 1 within `tolerance`.
    void validate(double tolerance = 1e-6) const;
};

/// Mean of the maps of `category`'s tokens, taken at the first place the
/// category's token sequence occurs in the prompt. Throws LookupError naming
/// the first token that is missing.
std::vector<double> category_score_map(const AttentionMapSet& maps, std::string_view category);

/// Mean of the maps of tokens [first, first + count).
std::vector<double> span_score_map(const AttentionMapSet& maps, std::size_t first, std::size_t count);

/// What produced a database's scores; written into the manifest.
struct BackendDescriptor {
    std::string kind; // "synthetic" or "imported"
    int dim = kDefaultEmbeddingDim;
    std::optional<std::uint64_t> seed;

    friend bool operator==(const BackendDescriptor&, const BackendDescriptor&) = default;
};

/// Source of cross-attention weights. Implementations are immutable once
/// built, so attention_maps may be called from many threads at once.
class ScorerBackend {
public:
    virtual ~ScorerBackend() = default;

    virtual AttentionMapSet attention_maps(const NoiseImage& image, std::span<const std::string> tokens) const = 0;
    virtual BackendDescriptor descriptor() const = 0;
};

/// Single-head attention with seeded projections and seeded token embeddings.
/// A cell's query is its flattened C x 4 x 4 block projected by W_q; a token's
/// key is its embedding projected by W_k; weights are the softmax over tokens
/// of q.k / sqrt(d).
class SyntheticBackend final : public ScorerBackend {
public:
    explicit SyntheticBackend(std::uint64_t seed, int channels = kDefaultChannels, int dim = kDefaultEmbeddingDim,
                              Exec exec = Exec::Parallel);

    AttentionMapSet attention_maps(const NoiseImage& image, std::span<const std::string> tokens) const override;
    BackendDescriptor descriptor() const override;

    TokenEmbedding embed(const std::string& token) const;
    /// W_k applied to embed(token).
    std::vector<double> key(const std::string& token) const;

    int channels() const noexcept { return channels_; }
    int dim() const noexcept { return dim_; }
    std::uint64_t seed() const noexcept { return seed_; }
    /// dim x (C*16), row-major.
    std::span<const double> query_matrix() const noexcept { return w_query_; }
    /// dim x dim, row-major.
    std::span<const double> key_matrix() const noexcept { return w_key_; }

private:
    std::uint64_t seed_;
    int channels_;
    int dim_;
    Exec exec_;
    std::vector<double> w_query_;
    std::vector<double> w_key_;
};

/// Replays attention maps captured elsewhere, keyed by (image_id, tokens).
class ImportedBackend final : public ScorerBackend {
public:
    explicit ImportedBackend(int dim = kDefaultEmbeddingDim) : dim_(dim) {}

    /// Validates and stores `maps` for `image_id`; replaces an existing record.
    void add(std::int64_t image_id, AttentionMapSet maps);
    bool contains(std::int64_t image_id, std::span<const std::string> tokens) const;
    std::size_t size() const noexcept { return store_.size(); }

    AttentionMapSet attention_maps(const NoiseImage& image, std::span<const std::string> tokens) const override;
    BackendDescriptor descriptor() const override;

private:
    using Key = std::pair<std::int64_t, std::vector<std::string>>;
    int dim_;
    std::map<Key, AttentionMapSet> store_;
};

/// An attention dump: the noise images plus the maps captured for them.
///
/// Directory layout:
///   attention.json  {format_version:1, n_images, channels, image_seed, d,
///                    records:[{image_id, tokens:[...]}]}
///   images.bin      little-endian float32, [image_id][channel][row][col]
///   attention.bin   little-endian float32, [record][token][grid_index]
struct AttentionDump {
    std::vector<NoiseImage> images;
    ImportedBackend backend;
    std::uint64_t image_seed = 0;
};

AttentionDump load_attention_dump(const std::filesystem::path& dir);

/// Writes `records` (image_id, maps) and `images` in the dump layout.
void save_attention_dump(const std::filesystem::path& dir, std::span<const NoiseImage> images,
                         std::span<const std::pair<std::int64_t, AttentionMapSet>> records, int dim,
                         std::uint64_t image_seed);

} // namespace noiseforge
