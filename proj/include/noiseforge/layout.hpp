// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "noiseforge/core.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace noiseforge {

struct LayoutObject {
    std::string category;
    Box bbox;
    friend bool operator==(const LayoutObject&, const LayoutObject&) = default;
};

/// User layout: (category, box) regions on a square pixel canvas, optionally
/// with an explicit painting order.
struct LayoutGuidance {
    double canvas = kDefaultCanvas;
    std::vector<LayoutObject> objects;
    std::optional<std::vector<std::size_t>> explicit_order;

    /// Throws InvalidArgument for empty categories, boxes off the canvas or an
    /// explicit order that is not a permutation of the object indices.
    void validate() const;
    /// Distinct categories in first-appearance order.
    std::vector<std::string> categories() const;

    friend bool operator==(const LayoutGuidance&, const LayoutGuidance&) = default;
};

/// Explicit order when given, otherwise object indices by grid area, largest
/// first, keeping input order among equal areas.
std::vector<std::size_t> paint_order(const LayoutGuidance& layout);

/// {canvas, objects:[{category, bbox:[x,y,w,h]}], order?:[...]}
nlohmann::json layout_to_json(const LayoutGuidance& layout);
LayoutGuidance layout_from_json(const nlohmann::json& doc);
LayoutGuidance load_layout(const std::filesystem::path& path);

} // namespace noiseforge
