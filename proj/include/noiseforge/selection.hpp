// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "noiseforge/blockdb.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace noiseforge {

struct SelectionConfig {
    double t_obj = 0.5;
    double t_bg = 0.1;

    /// Throws InvalidArgument unless both thresholds lie in [0, 1].
    void validate() const;
};

/// Blocks chosen for one object category, or for the background when
/// `category` is empty. `relaxed` marks a set produced by the ranking fallback
/// because no block passed the threshold.
struct CandidateSet {
    std::optional<std::string> category;
    std::vector<BlockRef> blocks;
    bool relaxed = false;
    std::string warning;

    bool is_background() const noexcept { return !category.has_value(); }
};

/// Blocks whose score for `target` beats cfg.t_obj against every other present
/// category (strictly), or whose average score does when `target` is the only
/// present category. When nothing passes and `fallback_count` > 0, returns the
/// `fallback_count` best blocks by the same score (worst contrast, or average)
/// with `relaxed` set.
CandidateSet select_object_blocks(const BlockDatabase& db, const std::string& target,
                                  std::span<const std::string> present, const SelectionConfig& cfg,
                                  std::size_t fallback_count = 0, Exec exec = Exec::Parallel);

/// Blocks whose average score is strictly below cfg.t_bg for every present
/// category. The fallback ranks ascending by the largest present average.
CandidateSet select_background_blocks(const BlockDatabase& db, std::span<const std::string> present,
                                      const SelectionConfig& cfg, std::size_t fallback_count = 0,
                                      Exec exec = Exec::Parallel);

} // namespace noiseforge
