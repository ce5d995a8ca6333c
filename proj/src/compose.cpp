// SPDX-License-Identifier: Apache-2.0

#include "noiseforge/compose.hpp"

#include "binary_io.hpp"
#include "noiseforge/error.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace noiseforge {

namespace {

using nlohmann::json;

constexpr std::uint64_t kBackgroundStream = 0x4247ULL << 32;

std::vector<GridRegion> regions_of(const LayoutGuidance& layout) {
    std::vector<GridRegion> regions;
    for (const auto& o : layout.objects) regions.push_back(box_to_grid(o.bbox, layout.canvas));
    return regions;
}

std::vector<int> uncovered_cells(const std::vector<GridRegion>& regions) {
    std::array<bool, kBlocksPerImage> covered{};
    for (const auto& r : regions)
        for (int c : r.cells()) covered[static_cast<std::size_t>(c)] = true;
    std::vector<int> out;
    for (int c = 0; c < kBlocksPerImage; ++c)
        if (!covered[static_cast<std::size_t>(c)]) out.push_back(c);
    return out;
}

json role_to_json(int role) { return role == kBackgroundRole ? json("background") : json(role); }

int role_from_json(const json& j) {
    if (j.is_string() && j.get<std::string>() == "background") return kBackgroundRole;
    if (j.is_number_integer() && j.get<int>() >= 0) return j.get<int>();
    throw FormatError(FormatErrorKind::Parse, "provenance role must be an object index or \"background\"");
}

Provenance provenance_from_json(const json& doc) {
    Provenance p{};
    const auto& cells = doc.at("provenance");
    if (!cells.is_array() || cells.size() != kBlocksPerImage)
        throw FormatError(FormatErrorKind::Inconsistent, "provenance must list 256 cells");
    for (std::size_t k = 0; k < p.size(); ++k) {
        const auto& c = cells[k];
        p[k] = {c.at("img").get<std::int64_t>(), c.at("blk").get<int>(), role_from_json(c.at("role"))};
    }
    return p;
}

} // namespace

std::vector<std::size_t> sample_indices(std::size_t pool, std::size_t count, std::uint64_t seed) {
    if (count == 0) return {};
    if (pool == 0) throw InvalidArgument("cannot sample from an empty candidate set");
    std::mt19937_64 engine(seed);
    std::vector<std::size_t> out(count);
    if (pool >= count) {
        // Partial Fisher-Yates: the first `count` slots of a shuffled pool.
        std::vector<std::size_t> items(pool);
        std::iota(items.begin(), items.end(), std::size_t{0});
        for (std::size_t k = 0; k < count; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, pool - 1);
            std::swap(items[k], items[pick(engine)]);
        }
        std::copy_n(items.begin(), count, out.begin());
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
        for (auto& v : out) v = pick(engine);
    }
    return out;
}

CandidateSets candidate_sets(const BlockDatabase& db, const LayoutGuidance& layout, const SelectionConfig& cfg,
                             Exec exec) {
    layout.validate();
    cfg.validate();
    const auto present = layout.categories();
    for (const auto& c : present) db.categories().index_of(c);
    const auto regions = regions_of(layout);

    CandidateSets sets;
    for (std::size_t i = 0; i < layout.objects.size(); ++i)
        sets.objects.push_back(
            select_object_blocks(db, layout.objects[i].category, present, cfg, regions[i].area(), exec));

    if (present.empty()) {
        // No object categories: the background condition holds vacuously.
        for (std::size_t b = 0; b < db.block_count(); ++b) sets.background.blocks.push_back(BlockRef::from_flat(b));
    } else {
        sets.background = select_background_blocks(db, present, cfg, uncovered_cells(regions).size(), exec);
    }
    return sets;
}

ComposedImage compose_initial_image(const BlockDatabase& db, const LayoutGuidance& layout,
                                    const SelectionConfig& cfg, std::uint64_t seed, Exec exec) {
    const auto sets = candidate_sets(db, layout, cfg, exec);
    const auto regions = regions_of(layout);

    ComposedImage out;
    out.image = NoiseImage::zeros(db.manifest.channels);
    out.image.source_seed = seed;
    out.compose_seed = seed;
    out.layout = layout;

    auto put = [&](int cell, BlockRef ref, int role) {
        place_block(out.image, cell, db.block_data(ref.flat()));
        out.provenance[static_cast<std::size_t>(cell)] = {ref.image_id, ref.grid_index, role};
    };

    for (std::size_t i : paint_order(layout)) {
        const auto& set = sets.objects[i];
        if (!set.warning.empty()) out.warnings.push_back(set.warning);
        const auto& cells = regions[i].cells();
        const auto picks = sample_indices(set.blocks.size(), cells.size(), derive_seed(seed, i));
        for (std::size_t k = 0; k < cells.size(); ++k) put(cells[k], set.blocks[picks[k]], static_cast<int>(i));
    }

    const auto uncovered = uncovered_cells(regions);
    if (!uncovered.empty()) {
        const auto& bg = sets.background;
        if (!bg.warning.empty()) out.warnings.push_back(bg.warning);
        const auto bg_seed = derive_seed(seed, kBackgroundStream);
        if (bg.blocks.size() >= static_cast<std::size_t>(kBlocksPerImage)) {
            // One distinct draw per grid cell, so the background of a cell does not
            // depend on which other cells the objects happen to cover.
            const auto picks = sample_indices(bg.blocks.size(), kBlocksPerImage, bg_seed);
            for (int cell : uncovered) put(cell, bg.blocks[picks[static_cast<std::size_t>(cell)]], kBackgroundRole);
        } else {
            const auto picks = sample_indices(bg.blocks.size(), uncovered.size(), bg_seed);
            for (std::size_t k = 0; k < uncovered.size(); ++k) put(uncovered[k], bg.blocks[picks[k]], kBackgroundRole);
        }
    }
    return out;
}

void save_composed(const ComposedImage& composed, const std::filesystem::path& prefix) {
    composed.image.validate();
    auto bin = prefix;
    bin += ".bin";
    auto side = prefix;
    side += ".json";
    if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());

    json cells = json::array();
    for (const auto& c : composed.provenance)
        cells.push_back({{"img", c.source_image}, {"blk", c.source_block}, {"role", role_to_json(c.role)}});
    json doc{{"channels", composed.image.channels},
             {"shape", {kLatentSide, kLatentSide}},
             {"seed", composed.compose_seed},
             {"layout", layout_to_json(composed.layout)},
             {"provenance", cells}};
    if (!composed.warnings.empty()) doc["warnings"] = composed.warnings;
    io::write_bytes(bin, io::encode_f32(composed.image.data));
    io::write_json(side, doc);
}

NoiseImage load_image_bin(const std::filesystem::path& path) {
    const auto bytes = io::read_bytes(path);
    constexpr std::size_t plane = static_cast<std::size_t>(kLatentSide) * kLatentSide * 4;
    if (bytes.empty() || bytes.size() % plane != 0)
        throw FormatError(FormatErrorKind::SizeMismatch,
                          path.string() + " is not a whole number of 64x64 float32 channels");
    NoiseImage image;
    image.channels = static_cast<int>(bytes.size() / plane);
    image.data = io::decode_f32(bytes);
    try {
        image.validate();
    } catch (const InvalidArgument& e) {
        throw FormatError(FormatErrorKind::Inconsistent, path.string() + ": " + e.what());
    }
    return image;
}

Provenance load_provenance(const std::filesystem::path& json_path) {
    const json doc = io::read_json(json_path);
    try {
        return provenance_from_json(doc);
    } catch (const json::exception& e) {
        throw FormatError(FormatErrorKind::Parse, json_path.string() + ": " + e.what());
    }
}

ComposedImage load_composed(const std::filesystem::path& prefix) {
    auto bin = prefix;
    bin += ".bin";
    auto side = prefix;
    side += ".json";
    const json doc = io::read_json(side);

    ComposedImage out;
    try {
        const int channels = doc.at("channels").get<int>();
        const auto shape = doc.at("shape").get<std::vector<int>>();
        if (shape != std::vector<int>{kLatentSide, kLatentSide})
            throw FormatError(FormatErrorKind::Inconsistent, "composed image shape must be [64, 64]");
        out.compose_seed = doc.at("seed").get<std::uint64_t>();
        out.layout = layout_from_json(doc.at("layout"));
        out.provenance = provenance_from_json(doc);
        if (doc.contains("warnings")) out.warnings = doc["warnings"].get<std::vector<std::string>>();
        if (channels < 1) throw FormatError(FormatErrorKind::Inconsistent, "channels must be positive");
        out.image.channels = channels;
        out.image.data = io::read_f32(bin, static_cast<std::size_t>(channels) * kLatentSide * kLatentSide);
        try {
            out.image.validate();
        } catch (const InvalidArgument& e) {
            throw FormatError(FormatErrorKind::Inconsistent, bin.string() + ": " + e.what());
        }
    } catch (const json::exception& e) {
        throw FormatError(FormatErrorKind::Parse, side.string() + ": " + e.what());
    }
    out.image.source_seed = out.compose_seed;
    return out;
}

} // namespace noiseforge
