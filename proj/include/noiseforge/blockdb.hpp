// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "noiseforge/core.hpp"
#include "noiseforge/scorer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace noiseforge {

inline constexpr int kDatabaseFormatVersion = 1;

/// Ordered list of distinct, nonempty generation categories.
class CategoryList {
public:
    CategoryList() = default;
    explicit CategoryList(std::vector<std::string> names);

    const std::vector<std::string>& names() const noexcept { return names_; }
    std::size_t size() const noexcept { return names_.size(); }
    const std::string& operator[](std::size_t i) const { return names_[i]; }
    /// Throws LookupError for unknown categories.
    std::size_t index_of(std::string_view name) const;
    bool contains(std::string_view name) const noexcept;

    friend bool operator==(const CategoryList&, const CategoryList&) = default;

private:
    std::vector<std::string> names_;
};

/// Directed score entry "subject (vs. contrast)", as category indices.
struct EntryKey {
    std::size_t subject = 0;
    std::size_t contrast = 0;
    friend bool operator==(const EntryKey&, const EntryKey&) = default;
};

/// A database block, addressed by source image and grid cell.
struct BlockRef {
    std::int64_t image_id = 0;
    int grid_index = 0;

    std::size_t flat() const noexcept {
        return static_cast<std::size_t>(image_id) * kBlocksPerImage + static_cast<std::size_t>(grid_index);
    }
    static BlockRef from_flat(std::size_t flat) noexcept {
        return {static_cast<std::int64_t>(flat / kBlocksPerImage), static_cast<int>(flat % kBlocksPerImage)};
    }
    friend bool operator==(const BlockRef&, const BlockRef&) = default;
    friend auto operator<=>(const BlockRef&, const BlockRef&) = default;
};

struct Manifest {
    int format_version = kDatabaseFormatVersion;
    std::size_t n_images = 0;
    int channels = kDefaultChannels;
    CategoryList categories;
    BackendDescriptor backend;
    std::uint64_t image_seed = 0;
    /// Extra manifest keys written by other producers, kept verbatim as a JSON object.
    std::string extra_json = "{}";

    friend bool operator==(const Manifest&, const Manifest&) = default;
};

/// Harvested blocks plus their normalized directed scores and per-category
/// averages. Flat block index = image_id * 256 + grid_index.
///
/// Scores and blocks hold float32 values, the on-disk precision. Averages are
/// exact double means of those float scores, so they can be recomputed
/// bit-for-bit whenever the database is loaded.
struct BlockDatabase {
    Manifest manifest;
    std::vector<float> blocks;     // [image][grid][channel][row][col]
    std::vector<EntryKey> entries; // subject-major, contrast ascending
    std::vector<float> scores;     // [entry][image][grid]
    std::vector<double> averages;  // [category][image][grid]

    std::size_t block_count() const noexcept { return manifest.n_images * kBlocksPerImage; }
    std::size_t block_size() const noexcept {
        return static_cast<std::size_t>(manifest.channels) * kPixelsPerBlock;
    }
    const CategoryList& categories() const noexcept { return manifest.categories; }

    std::span<const float> entry_scores(std::size_t entry) const;
    std::span<const double> average_scores(std::size_t category) const;
    std::span<const float> block_data(std::size_t flat) const;
    PixelBlock block(BlockRef ref) const;

    /// Index of entry "subject (vs. contrast)"; nullopt when subject == contrast.
    std::optional<std::size_t> entry_index(std::size_t subject, std::size_t contrast) const;

    /// Shape checks, score range and average consistency. Throws FormatError(Inconsistent).
    void validate() const;

    friend bool operator==(const BlockDatabase&, const BlockDatabase&) = default;
};

/// "a {c1} and a {c2}"
std::string pair_prompt(std::string_view first, std::string_view second);
/// "a {c}", used when the category list has a single entry.
std::string single_prompt(std::string_view category);

/// Entry order used by every database: for each subject in category order,
/// every other category as contrast in category order.
std::vector<EntryKey> entry_layout(std::size_t n_categories);

/// Min-max scales `values` to [0,1] and clamps. A constant vector is only clamped.
void normalize_entry(std::span<double> values);

/// Recomputes `db.averages` from `db.scores`: the mean over contrasts of each
/// subject's entries. Single-category databases keep their stored averages.
void recompute_averages(BlockDatabase& db);

/// Scores every (image, category pair) prompt with `backend` and assembles the
/// database. (image, pair) tasks fan out across threads when exec is Parallel;
/// results land in fixed slots so the output is schedule-independent.
BlockDatabase build_database(const ScorerBackend& backend, std::span<const NoiseImage> images,
                             const CategoryList& categories, Exec exec = Exec::Parallel);

/// Mean over contrasts of `category`'s directed scores at `block`.
double average_score(const BlockDatabase& db, std::string_view category, BlockRef block);

/// Database restricted to its first `n_images` images, renormalized per entry.
BlockDatabase subsample_database(const BlockDatabase& db, std::size_t n_images);

/// Directory format: manifest.json, blocks.bin, entries.json, scores.bin, averages.bin.
void save_database(const BlockDatabase& db, const std::filesystem::path& dir);
BlockDatabase load_database(const std::filesystem::path& dir);

} // namespace noiseforge
