// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "noiseforge/blockdb.hpp"
#include "noiseforge/layout.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace noiseforge {

/// Parameter grid for a sensitivity sweep. An empty `n_images` list means the
/// full database only; other sizes use subsample_database.
struct SweepGrid {
    std::vector<double> t_obj{0.5};
    std::vector<double> t_bg{0.1};
    std::vector<std::size_t> n_images;
    std::size_t repeats = 1;
    std::uint64_t seed = 0;
};

/// Desk-scale proxies for one grid cell, averaged over layouts x repeats.
struct SweepRow {
    double t_obj = 0;
    double t_bg = 0;
    std::size_t n_images = 0;
    std::size_t compositions = 0;
    double mean_duplicate_blocks = 0;
    double mean_ks_statistic = 0;
    double mean_object_candidates = 0;
    double mean_background_candidates = 0;
    std::size_t relaxed_sets = 0;
};

/// One row per (n_images, t_obj, t_bg) combination, in that nesting order.
/// Composition k of a layout uses the same seed in every cell, so cells differ
/// only by their parameters. Cells run in parallel; row order is fixed.
std::vector<SweepRow> run_sweep(const BlockDatabase& db, std::span<const LayoutGuidance> layouts,
                                const SweepGrid& grid, Exec exec = Exec::Parallel);

nlohmann::json sweep_to_json(std::span<const SweepRow> rows);

} // namespace noiseforge
