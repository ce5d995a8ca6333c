// SPDX-License-Identifier: Apache-2.0

#include "noiseforge/sweep.hpp"

#include "noiseforge/compose.hpp"
#include "noiseforge/diagnostics.hpp"
#include "noiseforge/error.hpp"

#include <nlohmann/json.hpp>

#include <exception>

namespace noiseforge {

namespace {

SweepRow run_cell(const BlockDatabase& db, std::span<const LayoutGuidance> layouts, const SweepGrid& grid,
                  double t_obj, double t_bg) {
    SweepRow row;
    row.t_obj = t_obj;
    row.t_bg = t_bg;
    row.n_images = db.manifest.n_images;
    const SelectionConfig cfg{t_obj, t_bg};
    std::size_t object_sets = 0;
    double object_total = 0, background_total = 0, dup_total = 0, ks_total = 0;
    for (std::size_t l = 0; l < layouts.size(); ++l) {
        const auto sets = candidate_sets(db, layouts[l], cfg, Exec::Serial);
        for (const auto& s : sets.objects) {
            object_total += static_cast<double>(s.blocks.size());
            row.relaxed_sets += s.relaxed ? 1 : 0;
        }
        object_sets += sets.objects.size();
        background_total += static_cast<double>(sets.background.blocks.size());
        row.relaxed_sets += sets.background.relaxed ? 1 : 0;
        for (std::size_t r = 0; r < grid.repeats; ++r) {
            const auto seed = derive_seed(grid.seed, l * grid.repeats + r);
            const auto composed = compose_initial_image(db, layouts[l], cfg, seed, Exec::Serial);
            const auto report = normality_report(composed.image, &composed.provenance, Exec::Serial);
            dup_total += report.duplicate_blocks;
            ks_total += report.ks_statistic;
            ++row.compositions;
        }
    }
    if (row.compositions > 0) {
        row.mean_duplicate_blocks = dup_total / static_cast<double>(row.compositions);
        row.mean_ks_statistic = ks_total / static_cast<double>(row.compositions);
    }
    if (object_sets > 0) row.mean_object_candidates = object_total / static_cast<double>(object_sets);
    if (!layouts.empty()) row.mean_background_candidates = background_total / static_cast<double>(layouts.size());
    return row;
}

} // namespace

std::vector<SweepRow> run_sweep(const BlockDatabase& db, std::span<const LayoutGuidance> layouts,
                                const SweepGrid& grid, Exec exec) {
    if (grid.t_obj.empty() || grid.t_bg.empty()) throw InvalidArgument("sweep grid needs at least one t_obj and t_bg");
    if (grid.repeats < 1) throw InvalidArgument("sweep needs at least one repeat");
    if (layouts.empty()) return {};

    std::vector<BlockDatabase> dbs;
    std::vector<const BlockDatabase*> sources;
    if (grid.n_images.empty()) {
        sources.push_back(&db);
    } else {
        dbs.reserve(grid.n_images.size());
        for (std::size_t n : grid.n_images) dbs.push_back(subsample_database(db, n));
        for (const auto& d : dbs) sources.push_back(&d);
    }

    struct Cell {
        const BlockDatabase* db;
        double t_obj, t_bg;
    };
    std::vector<Cell> cells;
    for (const auto* source : sources)
        for (double t_obj : grid.t_obj)
            for (double t_bg : grid.t_bg) cells.push_back({source, t_obj, t_bg});

    std::vector<SweepRow> rows(cells.size());
    std::vector<std::exception_ptr> failures(cells.size());
    auto run = [&](std::size_t k) {
        try {
            rows[k] = run_cell(*cells[k].db, layouts, grid, cells[k].t_obj, cells[k].t_bg);
        } catch (...) {
            failures[k] = std::current_exception();
        }
    };
    if (exec == Exec::Parallel) {
        const auto n = static_cast<std::int64_t>(cells.size());
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t k = 0; k < n; ++k) run(static_cast<std::size_t>(k));
    } else {
        for (std::size_t k = 0; k < cells.size(); ++k) run(k);
    }
    for (const auto& f : failures)
        if (f) std::rethrow_exception(f);
    return rows;
}

nlohmann::json sweep_to_json(std::span<const SweepRow> rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows)
        out.push_back({{"t_obj", r.t_obj},
                       {"t_bg", r.t_bg},
                       {"n_images", r.n_images},
                       {"compositions", r.compositions},
                       {"mean_duplicate_blocks", r.mean_duplicate_blocks},
                       {"mean_ks_statistic", r.mean_ks_statistic},
                       {"mean_object_candidates", r.mean_object_candidates},
                       {"mean_background_candidates", r.mean_background_candidates},
                       {"relaxed_sets", r.relaxed_sets}});
    return out;
}

} // namespace noiseforge
