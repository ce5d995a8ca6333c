// SPDX-License-Identifier: Apache-2.0
//
// Independent checks of a composed image: expected final roles from the
// painting rule, candidate membership and block contents.

#pragma once

#include "noiseforge/compose.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <string>

namespace nftest {

/// Empty when every invariant holds; otherwise a description of the first failure.
inline std::string composition_violation(const noiseforge::BlockDatabase& db, const noiseforge::LayoutGuidance& layout,
                                         const noiseforge::SelectionConfig& cfg,
                                         const noiseforge::ComposedImage& out) {
    using namespace noiseforge;
    const auto sets = candidate_sets(db, layout, cfg, Exec::Serial);
    std::array<int, kBlocksPerImage> want;
    want.fill(kBackgroundRole);
    for (std::size_t i : paint_order(layout)) {
        const auto region = box_to_grid(layout.objects[i].bbox, layout.canvas);
        for (int c : region.cells()) want[static_cast<std::size_t>(c)] = static_cast<int>(i);
    }

    std::vector<std::set<BlockRef>> members;
    for (const auto& s : sets.objects) members.emplace_back(s.blocks.begin(), s.blocks.end());
    const std::set<BlockRef> bg(sets.background.blocks.begin(), sets.background.blocks.end());

    const std::size_t bs = db.block_size();
    std::vector<float> cell(bs);
    for (int c = 0; c < kBlocksPerImage; ++c) {
        const auto& p = out.provenance[static_cast<std::size_t>(c)];
        const std::string where = "cell " + std::to_string(c) + ": ";
        if (p.role != want[static_cast<std::size_t>(c)])
            return where + "role " + std::to_string(p.role) + ", expected " + std::to_string(want[static_cast<std::size_t>(c)]);
        const auto& pool = p.role == kBackgroundRole ? bg : members[static_cast<std::size_t>(p.role)];
        if (!pool.count(p.ref())) return where + "block not in its candidate set";
        copy_block(out.image, c, cell);
        const auto src = db.block_data(p.ref().flat());
        if (!std::equal(cell.begin(), cell.end(), src.begin())) return where + "pixels differ from the source block";
    }
    return {};
}

inline noiseforge::LayoutGuidance random_layout(std::mt19937_64& rng, const std::vector<std::string>& cats,
                                                int max_objects = 3) {
    noiseforge::LayoutGuidance layout;
    std::uniform_real_distribution<double> u(0, 1);
    const int n = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_objects));
    for (int k = 0; k < n; ++k) {
        noiseforge::Box b;
        b.w = 16 + u(rng) * 300;
        b.h = 16 + u(rng) * 300;
        b.x = u(rng) * (512 - b.w);
        b.y = u(rng) * (512 - b.h);
        layout.objects.push_back({cats[rng() % cats.size()], b});
    }
    return layout;
}

} // namespace nftest
