// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "noiseforge/layout.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace noiseforge {

struct Detection {
    std::string category;
    Box bbox;
    double confidence = 1.0;
};

enum class SizeBucket { Small, Medium, Large };

const char* to_string(SizeBucket bucket) noexcept;

/// Intersection over union of two boxes, in [0, 1].
double iou(const Box& a, const Box& b) noexcept;

/// s below 150^2 pixels, l above 300^2, m otherwise (both boundaries land in m).
SizeBucket size_bucket(const Box& box) noexcept;

/// Guidance and detections are matched within a category. Optimal maximizes
/// the summed IoU; Greedy takes pairs by descending IoU. Neither reuses a detection.
enum class MatchingRule { Optimal, Greedy };

/// For each guidance box, the index of its matched detection or -1.
std::vector<int> match_detections(std::span<const LayoutObject> guidance, std::span<const Detection> detections,
                                  MatchingRule rule = MatchingRule::Optimal);

struct ObjectResult {
    std::string sample_id;
    std::size_t object = 0;
    std::string category;
    SizeBucket bucket = SizeBucket::Medium;
    double iou = 0;
    bool success = false;
};

struct BucketStats {
    std::size_t count = 0;
    double mean_iou = 0;
    double success_rate = 0; // percent
};

struct EvalReport {
    BucketStats overall;
    BucketStats small;
    BucketStats medium;
    BucketStats large;
    std::vector<ObjectResult> objects;
};

struct EvalSample {
    std::string id;
    LayoutGuidance layout;
};

using DetectionMap = std::map<std::string, std::vector<Detection>>;

/// A guidance object counts as controlled when its matched IoU is above 0.5.
/// Unmatched objects score IoU 0. Throws InvalidArgument listing sample ids
/// that appear on only one side.
EvalReport evaluate(std::span<const EvalSample> guidance, const DetectionMap& detections,
                    MatchingRule rule = MatchingRule::Optimal);

nlohmann::json report_to_json(const EvalReport& report);
/// Aligned plain-text table: IoU, IoU_s, IoU_m, IoU_l, R_suc, R_s, R_m, R_l.
std::string report_table(const EvalReport& report);

/// {sample_id: layout}
std::vector<EvalSample> load_layout_set(const std::filesystem::path& path);
void save_layout_set(std::span<const EvalSample> samples, const std::filesystem::path& path);
/// {sample_id: [{category, bbox, confidence}]}
DetectionMap load_detections(const std::filesystem::path& path);

struct CocoSample {
    std::string id;
    std::string caption;
    LayoutGuidance layout;
    double original_width = 0;
    double original_height = 0;
};

/// COCO-style instances + captions to layouts on a `canvas`-square canvas.
/// Keeps an image only when one of its captions mentions every box category
/// (case-insensitive substring); boxes are scaled by canvas/width, canvas/height.
std::vector<CocoSample> coco_to_layouts(const std::filesystem::path& annotations,
                                        const std::filesystem::path& captions, double canvas = kDefaultCanvas);

} // namespace noiseforge
