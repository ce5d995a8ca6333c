// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "noiseforge/blockdb.hpp"
#include "noiseforge/layout.hpp"
#include "noiseforge/selection.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace noiseforge {

inline constexpr int kBackgroundRole = -1;

/// Which database block ended up in a grid cell and why.
struct CellProvenance {
    std::int64_t source_image = 0;
    int source_block = 0;
    int role = kBackgroundRole; // object index into the layout, or kBackgroundRole

    BlockRef ref() const noexcept { return {source_image, source_block}; }
    friend bool operator==(const CellProvenance&, const CellProvenance&) = default;
};

using Provenance = std::array<CellProvenance, kBlocksPerImage>;

struct ComposedImage {
    NoiseImage image;
    Provenance provenance{};
    std::uint64_t compose_seed = 0;
    LayoutGuidance layout;
    std::vector<std::string> warnings;

    friend bool operator==(const ComposedImage& a, const ComposedImage& b) {
        return a.image.channels == b.image.channels && a.image.data == b.image.data &&
               a.provenance == b.provenance && a.compose_seed == b.compose_seed && a.layout == b.layout;
    }
};

/// Candidate sets a composition draws from: one per layout object (in layout
/// order) plus the background set.
struct CandidateSets {
    std::vector<CandidateSet> objects;
    CandidateSet background;
};

/// `count` indices into a pool of `pool` items: distinct when pool >= count,
/// otherwise drawn uniformly with replacement.
std::vector<std::size_t> sample_indices(std::size_t pool, std::size_t count, std::uint64_t seed);

/// Candidate sets for `layout`, with the present set = the layout's categories.
/// Empty sets fall back to ranked blocks sized to the region (or to the
/// uncovered area for the background).
CandidateSets candidate_sets(const BlockDatabase& db, const LayoutGuidance& layout, const SelectionConfig& cfg,
                             Exec exec = Exec::Parallel);

/// Assembles an initial noise image: objects painted in paint_order, each
/// region filled with blocks sampled from its candidate set (later objects
/// overwrite earlier ones), then every uncovered cell filled from the
/// background set. Object i draws from derive_seed(seed, i), so adding an
/// object leaves the draws of the others untouched.
ComposedImage compose_initial_image(const BlockDatabase& db, const LayoutGuidance& layout,
                                    const SelectionConfig& cfg, std::uint64_t seed, Exec exec = Exec::Parallel);

/// Writes `<prefix>.bin` (float32 [channel][row][col]) and `<prefix>.json`.
void save_composed(const ComposedImage& composed, const std::filesystem::path& prefix);
ComposedImage load_composed(const std::filesystem::path& prefix);

/// Reads a bare image.bin; the channel count follows from the file size.
NoiseImage load_image_bin(const std::filesystem::path& path);
/// Reads the provenance array of a composed-image sidecar.
Provenance load_provenance(const std::filesystem::path& json_path);

} // namespace noiseforge
