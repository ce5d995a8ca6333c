// SPDX-License-Identifier: Apache-2.0

#include "noiseforge/layout.hpp"

#include "binary_io.hpp"
#include "noiseforge/error.hpp"

#include <algorithm>
#include <numeric>

namespace noiseforge {

using nlohmann::json;

void LayoutGuidance::validate() const {
    if (!(canvas > 0)) throw InvalidArgument("layout canvas must be positive");
    for (std::size_t i = 0; i < objects.size(); ++i) {
        if (objects[i].category.empty())
            throw InvalidArgument("layout object " + std::to_string(i) + " has an empty category");
        validate_box(objects[i].bbox, canvas);
    }
    if (explicit_order) {
        auto sorted = *explicit_order;
        std::sort(sorted.begin(), sorted.end());
        std::vector<std::size_t> expected(objects.size());
        std::iota(expected.begin(), expected.end(), std::size_t{0});
        if (sorted != expected) throw InvalidArgument("explicit paint order is not a permutation of the objects");
    }
}

std::vector<std::string> LayoutGuidance::categories() const {
    std::vector<std::string> out;
    for (const auto& o : objects)
        if (std::find(out.begin(), out.end(), o.category) == out.end()) out.push_back(o.category);
    return out;
}

std::vector<std::size_t> paint_order(const LayoutGuidance& layout) {
    layout.validate();
    if (layout.explicit_order) return *layout.explicit_order;
    std::vector<std::size_t> areas;
    for (const auto& o : layout.objects) areas.push_back(box_to_grid(o.bbox, layout.canvas).area());
    std::vector<std::size_t> order(layout.objects.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return areas[a] > areas[b]; });
    return order;
}

json layout_to_json(const LayoutGuidance& layout) {
    json objects = json::array();
    for (const auto& o : layout.objects)
        objects.push_back({{"category", o.category}, {"bbox", {o.bbox.x, o.bbox.y, o.bbox.w, o.bbox.h}}});
    json doc{{"canvas", layout.canvas}, {"objects", objects}};
    if (layout.explicit_order) doc["order"] = *layout.explicit_order;
    return doc;
}

LayoutGuidance layout_from_json(const json& doc) {
    LayoutGuidance layout;
    try {
        if (!doc.is_object()) throw FormatError(FormatErrorKind::Parse, "layout must be a JSON object");
        layout.canvas = doc.value("canvas", kDefaultCanvas);
        for (const auto& o : doc.at("objects")) {
            const auto box = o.at("bbox").get<std::vector<double>>();
            if (box.size() != 4) throw FormatError(FormatErrorKind::Parse, "bbox must have four numbers");
            layout.objects.push_back({o.at("category").get<std::string>(), {box[0], box[1], box[2], box[3]}});
        }
        if (doc.contains("order")) layout.explicit_order = doc.at("order").get<std::vector<std::size_t>>();
    } catch (const json::exception& e) {
        throw FormatError(FormatErrorKind::Parse, std::string("layout: ") + e.what());
    }
    layout.validate();
    return layout;
}

LayoutGuidance load_layout(const std::filesystem::path& path) {
    const json doc = io::read_json(path);
    try {
        return layout_from_json(doc);
    } catch (const InvalidArgument& e) {
        throw FormatError(FormatErrorKind::Inconsistent, path.string() + ": " + e.what());
    } catch (const FormatError& e) {
        throw FormatError(e.kind(), path.string() + ": " + e.detail());
    }
}

} // namespace noiseforge
