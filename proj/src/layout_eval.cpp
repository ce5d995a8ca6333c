// SPDX-License-Identifier: Apache-2.0

#include "noiseforge/layout_eval.hpp"

#include "binary_io.hpp"
#include "noiseforge/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace noiseforge {

namespace {

using nlohmann::json;

constexpr double kSmallArea = 150.0 * 150.0;
constexpr double kLargeArea = 300.0 * 300.0;
constexpr double kSuccessIoU = 0.5;

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

/// Minimum-cost assignment of every row to a distinct column (rows <= cols).
/// Returns the column of each row.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    const std::size_t m = n ? cost[0].size() : 0;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0), v(m + 1, 0);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<bool> used(m + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> row_to_col(n, 0);
    for (std::size_t j = 1; j <= m; ++j)
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

void match_optimal(const std::vector<std::size_t>& objs, const std::vector<std::size_t>& dets,
                   std::span<const LayoutObject> guidance, std::span<const Detection> detections,
                   std::vector<int>& out) {
    if (objs.empty() || dets.empty()) return;
    const bool transpose = objs.size() > dets.size();
    const auto& rows = transpose ? dets : objs;
    const auto& cols = transpose ? objs : dets;
    std::vector<std::vector<double>> cost(rows.size(), std::vector<double>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const auto o = transpose ? cols[c] : rows[r];
            const auto d = transpose ? rows[r] : cols[c];
            cost[r][c] = -iou(guidance[o].bbox, detections[d].bbox);
        }
    const auto assign = hungarian(cost);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto o = transpose ? cols[assign[r]] : rows[r];
        const auto d = transpose ? rows[r] : cols[assign[r]];
        if (iou(guidance[o].bbox, detections[d].bbox) > 0) out[o] = static_cast<int>(d);
    }
}

void match_greedy(const std::vector<std::size_t>& objs, const std::vector<std::size_t>& dets,
                  std::span<const LayoutObject> guidance, std::span<const Detection> detections,
                  std::vector<int>& out) {
    struct Pair {
        double iou;
        std::size_t obj, det;
    };
    std::vector<Pair> pairs;
    for (auto o : objs)
        for (auto d : dets)
            if (const double v = iou(guidance[o].bbox, detections[d].bbox); v > 0) pairs.push_back({v, o, d});
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.iou > b.iou; });
    std::set<std::size_t> used;
    for (const auto& p : pairs) {
        if (out[p.obj] >= 0 || used.contains(p.det)) continue;
        out[p.obj] = static_cast<int>(p.det);
        used.insert(p.det);
    }
}

BucketStats summarize(const std::vector<const ObjectResult*>& results) {
    BucketStats s;
    s.count = results.size();
    if (results.empty()) return s;
    double total = 0;
    std::size_t wins = 0;
    for (const auto* r : results) {
        total += r->iou;
        wins += r->success ? 1 : 0;
    }
    s.mean_iou = total / static_cast<double>(s.count);
    s.success_rate = 100.0 * static_cast<double>(wins) / static_cast<double>(s.count);
    return s;
}

json stats_to_json(const BucketStats& s) {
    return {{"count", s.count}, {"iou", s.mean_iou}, {"success_rate", s.success_rate}};
}

Box box_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 4) throw FormatError(FormatErrorKind::Parse, "bbox must have four numbers");
    return {v[0], v[1], v[2], v[3]};
}

} // namespace

const char* to_string(SizeBucket bucket) noexcept {
    switch (bucket) {
    case SizeBucket::Small: return "s";
    case SizeBucket::Medium: return "m";
    case SizeBucket::Large: return "l";
    }
    return "?";
}

double iou(const Box& a, const Box& b) noexcept {
    const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
    const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
    if (iw <= 0 || ih <= 0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

SizeBucket size_bucket(const Box& box) noexcept {
    const double area = box.area();
    if (area < kSmallArea) return SizeBucket::Small;
    if (area > kLargeArea) return SizeBucket::Large;
    return SizeBucket::Medium;
}

std::vector<int> match_detections(std::span<const LayoutObject> guidance, std::span<const Detection> detections,
                                  MatchingRule rule) {
    std::vector<int> out(guidance.size(), -1);
    std::set<std::string> categories;
    for (const auto& g : guidance) categories.insert(g.category);
    for (const auto& category : categories) {
        std::vector<std::size_t> objs, dets;
        for (std::size_t o = 0; o < guidance.size(); ++o)
            if (guidance[o].category == category) objs.push_back(o);
        for (std::size_t d = 0; d < detections.size(); ++d)
            if (detections[d].category == category) dets.push_back(d);
        if (rule == MatchingRule::Optimal)
            match_optimal(objs, dets, guidance, detections, out);
        else
            match_greedy(objs, dets, guidance, detections, out);
    }
    return out;
}

EvalReport evaluate(std::span<const EvalSample> guidance, const DetectionMap& detections, MatchingRule rule) {
    std::set<std::string> guided, detected;
    for (const auto& s : guidance) guided.insert(s.id);
    for (const auto& [id, _] : detections) detected.insert(id);
    if (guided != detected || guided.size() != guidance.size()) {
        std::vector<std::string> mismatched;
        std::set_symmetric_difference(guided.begin(), guided.end(), detected.begin(), detected.end(),
                                      std::back_inserter(mismatched));
        std::ostringstream msg;
        msg << "guidance and detections disagree on sample ids:";
        for (const auto& id : mismatched) msg << ' ' << id;
        if (guided.size() != guidance.size()) msg << " (duplicate guidance ids)";
        throw InvalidArgument(msg.str());
    }

    EvalReport report;
    for (const auto& sample : guidance) {
        const auto& dets = detections.at(sample.id);
        const auto match = match_detections(sample.layout.objects, dets, rule);
        for (std::size_t o = 0; o < sample.layout.objects.size(); ++o) {
            const auto& obj = sample.layout.objects[o];
            ObjectResult r;
            r.sample_id = sample.id;
            r.object = o;
            r.category = obj.category;
            r.bucket = size_bucket(obj.bbox);
            r.iou = match[o] >= 0 ? iou(obj.bbox, dets[static_cast<std::size_t>(match[o])].bbox) : 0.0;
            r.success = r.iou > kSuccessIoU;
            report.objects.push_back(std::move(r));
        }
    }

    std::vector<const ObjectResult*> all, s, m, l;
    for (const auto& r : report.objects) {
        all.push_back(&r);
        (r.bucket == SizeBucket::Small ? s : r.bucket == SizeBucket::Large ? l : m).push_back(&r);
    }
    report.overall = summarize(all);
    report.small = summarize(s);
    report.medium = summarize(m);
    report.large = summarize(l);
    return report;
}

json report_to_json(const EvalReport& report) {
    json objects = json::array();
    for (const auto& r : report.objects)
        objects.push_back({{"sample_id", r.sample_id},
                           {"object", r.object},
                           {"category", r.category},
                           {"bucket", to_string(r.bucket)},
                           {"iou", r.iou},
                           {"success", r.success}});
    return {{"overall", stats_to_json(report.overall)},
            {"s", stats_to_json(report.small)},
            {"m", stats_to_json(report.medium)},
            {"l", stats_to_json(report.large)},
            {"objects", objects}};
}

std::string report_table(const EvalReport& r) {
    std::ostringstream out;
    out << std::fixed;
    const char* heads[] = {"IoU", "IoU_s", "IoU_m", "IoU_l", "R_suc", "R_s", "R_m", "R_l"};
    for (const char* h : heads) out << std::setw(9) << h;
    out << '\n' << std::setprecision(3);
    for (const auto* b : {&r.overall, &r.small, &r.medium, &r.large}) out << std::setw(9) << b->mean_iou;
    out << std::setprecision(2);
    for (const auto* b : {&r.overall, &r.small, &r.medium, &r.large}) out << std::setw(9) << b->success_rate;
    out << '\n';
    out << "objects: " << r.overall.count << " (s " << r.small.count << ", m " << r.medium.count << ", l "
        << r.large.count << ")\n";
    return out.str();
}

std::vector<EvalSample> load_layout_set(const std::filesystem::path& path) {
    const json doc = io::read_json(path);
    if (!doc.is_object()) throw FormatError(FormatErrorKind::Parse, path.string() + ": expected {sample_id: layout}");
    std::vector<EvalSample> out;
    for (const auto& [id, layout] : doc.items()) {
        try {
            out.push_back({id, layout_from_json(layout)});
        } catch (const FormatError& e) {
            throw FormatError(e.kind(), path.string() + " sample " + id + ": " + e.detail());
        } catch (const InvalidArgument& e) {
            throw FormatError(FormatErrorKind::Inconsistent, path.string() + " sample " + id + ": " + e.what());
        }
    }
    return out;
}

void save_layout_set(std::span<const EvalSample> samples, const std::filesystem::path& path) {
    json doc = json::object();
    for (const auto& s : samples) doc[s.id] = layout_to_json(s.layout);
    io::write_json(path, doc);
}

DetectionMap load_detections(const std::filesystem::path& path) {
    const json doc = io::read_json(path);
    DetectionMap out;
    try {
        if (!doc.is_object()) throw FormatError(FormatErrorKind::Parse, "expected {sample_id: [detections]}");
        for (const auto& [id, list] : doc.items()) {
            auto& dets = out[id];
            for (const auto& d : list) {
                Detection det{d.at("category").get<std::string>(), box_from_json(d.at("bbox")),
                              d.value("confidence", 1.0)};
                if (!(det.bbox.w > 0 && det.bbox.h > 0))
                    throw FormatError(FormatErrorKind::Inconsistent, "detection box for sample " + id + " is empty");
                dets.push_back(std::move(det));
            }
        }
    } catch (const json::exception& e) {
        throw FormatError(FormatErrorKind::Parse, path.string() + ": " + e.what());
    } catch (const FormatError& e) {
        throw FormatError(e.kind(), path.string() + ": " + e.detail());
    }
    return out;
}

std::vector<CocoSample> coco_to_layouts(const std::filesystem::path& annotations,
                                        const std::filesystem::path& captions, double canvas) {
    const json ann = io::read_json(annotations);
    const json cap = io::read_json(captions);

    struct Image {
        double width = 0, height = 0;
        std::vector<LayoutObject> objects;
        std::vector<std::string> captions;
    };
    std::map<std::int64_t, Image> images;
    try {
        std::map<std::int64_t, std::string> names;
        for (const auto& c : ann.at("categories")) names[c.at("id").get<std::int64_t>()] = c.at("name").get<std::string>();
        for (const auto& im : ann.at("images")) {
            auto& entry = images[im.at("id").get<std::int64_t>()];
            entry.width = im.at("width").get<double>();
            entry.height = im.at("height").get<double>();
        }
        for (const auto& a : ann.at("annotations")) {
            const auto it = images.find(a.at("image_id").get<std::int64_t>());
            const auto name = names.find(a.at("category_id").get<std::int64_t>());
            if (it == images.end() || name == names.end())
                throw FormatError(FormatErrorKind::Inconsistent, "annotation refers to an unknown image or category");
            const Box b = box_from_json(a.at("bbox"));
            if (b.w > 0 && b.h > 0) it->second.objects.push_back({name->second, b});
        }
    } catch (const json::exception& e) {
        throw FormatError(FormatErrorKind::Parse, annotations.string() + ": " + e.what());
    }
    try {
        for (const auto& c : cap.at("annotations")) {
            const auto it = images.find(c.at("image_id").get<std::int64_t>());
            if (it != images.end()) it->second.captions.push_back(c.at("caption").get<std::string>());
        }
    } catch (const json::exception& e) {
        throw FormatError(FormatErrorKind::Parse, captions.string() + ": " + e.what());
    }

    std::vector<CocoSample> out;
    for (auto& [id, image] : images) {
        if (image.objects.empty() || !(image.width > 0) || !(image.height > 0)) continue;
        const std::string* chosen = nullptr;
        for (const auto& caption : image.captions) {
            const auto text = lower(caption);
            const bool all = std::all_of(image.objects.begin(), image.objects.end(), [&](const LayoutObject& o) {
                return text.find(lower(o.category)) != std::string::npos;
            });
            if (all) {
                chosen = &caption;
                break;
            }
        }
        if (!chosen) continue;

        CocoSample sample;
        sample.id = std::to_string(id);
        sample.caption = *chosen;
        sample.original_width = image.width;
        sample.original_height = image.height;
        sample.layout.canvas = canvas;
        const double sx = canvas / image.width, sy = canvas / image.height;
        for (auto o : image.objects) {
            Box& b = o.bbox;
            b = {std::clamp(b.x * sx, 0.0, canvas), std::clamp(b.y * sy, 0.0, canvas), b.w * sx, b.h * sy};
            b.w = std::min(b.w, canvas - b.x);
            b.h = std::min(b.h, canvas - b.y);
            if (b.w > 0 && b.h > 0) sample.layout.objects.push_back(std::move(o));
        }
        if (!sample.layout.objects.empty()) out.push_back(std::move(sample));
    }
    return out;
}

} // namespace noiseforge
