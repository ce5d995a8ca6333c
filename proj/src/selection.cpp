// SPDX-License-Identifier: Apache-2.0

#include "noiseforge/selection.hpp"

#include "noiseforge/error.hpp"
#include "noiseforge/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace noiseforge {

namespace {

std::vector<std::size_t> present_indices(const BlockDatabase& db, std::span<const std::string> present) {
    if (present.empty()) throw InvalidArgument("the present category set is empty");
    std::set<std::size_t> unique;
    for (const auto& name : present) unique.insert(db.categories().index_of(name));
    return {unique.begin(), unique.end()};
}

std::vector<BlockRef> compact(std::span<const std::uint8_t> mask) {
    std::vector<BlockRef> out;
    for (std::size_t b = 0; b < mask.size(); ++b)
        if (mask[b]) out.push_back(BlockRef::from_flat(b));
    return out;
}

/// Top `count` block indices by `key`, ties to the lower flat index.
std::vector<BlockRef> ranked(const std::vector<double>& key, std::size_t count, bool descending) {
    std::vector<std::size_t> order(key.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    count = std::min(count, order.size());
    auto better = [&](std::size_t a, std::size_t b) {
        if (key[a] != key[b]) return descending ? key[a] > key[b] : key[a] < key[b];
        return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(), better);
    std::vector<BlockRef> out;
    for (std::size_t k = 0; k < count; ++k) out.push_back(BlockRef::from_flat(order[k]));
    std::sort(out.begin(), out.end());
    return out;
}

template <class T>
void run_greater(Exec exec, std::span<const std::span<const T>> rows, double threshold, std::span<std::uint8_t> mask) {
    if (exec == Exec::Parallel)
        kernels::parallel::all_greater(rows, threshold, mask);
    else
        kernels::serial::all_greater(rows, threshold, mask);
}

} // namespace

void SelectionConfig::validate() const {
    auto check = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) {
            std::ostringstream msg;
            msg << name << " = " << v << " is outside [0, 1]";
            throw InvalidArgument(msg.str());
        }
    };
    check(t_obj, "t_obj");
    check(t_bg, "t_bg");
}

CandidateSet select_object_blocks(const BlockDatabase& db, const std::string& target,
                                  std::span<const std::string> present, const SelectionConfig& cfg,
                                  std::size_t fallback_count, Exec exec) {
    cfg.validate();
    const auto indices = present_indices(db, present);
    const std::size_t subject = db.categories().index_of(target);
    if (std::find(indices.begin(), indices.end(), subject) == indices.end())
        throw InvalidArgument("target '" + target + "' is not among the present categories");

    CandidateSet set;
    set.category = target;
    std::vector<std::uint8_t> mask(db.block_count());
    const bool single = indices.size() == 1;
    if (single) {
        const std::span<const double> rows[] = {db.average_scores(subject)};
        run_greater<double>(exec, rows, cfg.t_obj, mask);
    } else {
        std::vector<std::span<const float>> rows;
        for (std::size_t j : indices)
            if (j != subject) rows.push_back(db.entry_scores(*db.entry_index(subject, j)));
        run_greater<float>(exec, rows, cfg.t_obj, mask);
    }
    set.blocks = compact(mask);
    if (!set.blocks.empty() || fallback_count == 0) return set;

    std::vector<double> key(db.block_count());
    if (single) {
        const auto avg = db.average_scores(subject);
        key.assign(avg.begin(), avg.end());
    } else {
        std::fill(key.begin(), key.end(), INFINITY);
        for (std::size_t j : indices) {
            if (j == subject) continue;
            const auto s = db.entry_scores(*db.entry_index(subject, j));
            for (std::size_t b = 0; b < key.size(); ++b) key[b] = std::min(key[b], static_cast<double>(s[b]));
        }
    }
    set.blocks = ranked(key, fallback_count, true);
    set.relaxed = true;
    std::ostringstream msg;
    msg << "no block scores above t_obj=" << cfg.t_obj << " for '" << target << "'; using the " << set.blocks.size()
        << " best-scoring blocks instead";
    set.warning = msg.str();
    return set;
}

CandidateSet select_background_blocks(const BlockDatabase& db, std::span<const std::string> present,
                                      const SelectionConfig& cfg, std::size_t fallback_count, Exec exec) {
    cfg.validate();
    const auto indices = present_indices(db, present);

    CandidateSet set;
    std::vector<std::uint8_t> mask(db.block_count());
    std::vector<std::span<const double>> rows;
    for (std::size_t i : indices) rows.push_back(db.average_scores(i));
    if (exec == Exec::Parallel)
        kernels::parallel::all_less(rows, cfg.t_bg, mask);
    else
        kernels::serial::all_less(rows, cfg.t_bg, mask);
    set.blocks = compact(mask);
    if (!set.blocks.empty() || fallback_count == 0) return set;

    std::vector<double> key(db.block_count(), -INFINITY);
    for (const auto& row : rows)
        for (std::size_t b = 0; b < key.size(); ++b) key[b] = std::max(key[b], row[b]);
    set.blocks = ranked(key, fallback_count, false);
    set.relaxed = true;
    std::ostringstream msg;
    msg << "no block scores below t_bg=" << cfg.t_bg << " for every present category; using the "
        << set.blocks.size() << " lowest-scoring blocks instead";
    set.warning = msg.str();
    return set;
}

} // namespace noiseforge
