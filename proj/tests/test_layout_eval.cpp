// SPDX-License-Identifier: Apache-2.0

#include "noiseforge/error.hpp"
#include "noiseforge/layout_eval.hpp"
#include "support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <numeric>

using namespace noiseforge;
namespace fs = std::filesystem;
using nftest::TempDir;

namespace {

// Best total IoU over every injective assignment within each category.
double exhaustive_total(const std::vector<LayoutObject>& g, const std::vector<Detection>& d) {
    double best = 0;
    std::vector<int> pick(g.size(), -1);
    std::vector<bool> used(d.size(), false);
    std::function<void(std::size_t, double)> rec = [&](std::size_t k, double acc) {
        if (k == g.size()) {
            best = std::max(best, acc);
            return;
        }
        rec(k + 1, acc);
        for (std::size_t j = 0; j < d.size(); ++j)
            if (!used[j] && d[j].category == g[k].category) {
                used[j] = true;
                rec(k + 1, acc + iou(g[k].bbox, d[j].bbox));
                used[j] = false;
            }
    };
    rec(0, 0);
    return best;
}

double matched_total(const std::vector<LayoutObject>& g, const std::vector<Detection>& d,
                     const std::vector<int>& m) {
    double total = 0;
    std::vector<int> seen;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (m[k] < 0) continue;
        CHECK(d[static_cast<std::size_t>(m[k])].category == g[k].category);
        CHECK(std::find(seen.begin(), seen.end(), m[k]) == seen.end());
        seen.push_back(m[k]);
        total += iou(g[k].bbox, d[static_cast<std::size_t>(m[k])].bbox);
    }
    return total;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

} // namespace

TEST_SUITE("layout_eval") {

TEST_CASE("iou") {
    const Box a{0, 0, 10, 10};
    CHECK(iou(a, a) == 1.0);
    CHECK(iou(a, {20, 20, 5, 5}) == 0.0);
    CHECK(iou(a, {10, 0, 10, 10}) == 0.0);
    CHECK(iou(a, {5, 0, 10, 10}) == doctest::Approx(50.0 / 150.0).epsilon(1e-15));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 100);
    for (int t = 0; t < 200; ++t) {
        const Box p{u(rng), u(rng), 1 + u(rng), 1 + u(rng)}, q{u(rng), u(rng), 1 + u(rng), 1 + u(rng)};
        CHECK(iou(p, q) == iou(q, p));
        CHECK(iou(p, q) >= 0);
        CHECK(iou(p, q) <= 1);
    }
}

TEST_CASE("size buckets") {
    CHECK(size_bucket({0, 0, 100, 100}) == SizeBucket::Small);
    CHECK(size_bucket({0, 0, 320, 320}) == SizeBucket::Large);
    CHECK(size_bucket({0, 0, 150, 150}) == SizeBucket::Medium);
    CHECK(size_bucket({0, 0, 300, 300}) == SizeBucket::Medium);
    CHECK(size_bucket({0, 0, 149.99, 150}) == SizeBucket::Small);
    CHECK(std::string(to_string(SizeBucket::Large)) == "l");
}

TEST_CASE("perfect detections") {
    LayoutGuidance l;
    l.objects = {{"dog", {0, 0, 100, 100}}, {"cat", {200, 200, 200, 200}}, {"dog", {10, 100, 400, 400}}};
    DetectionMap d;
    for (const auto& o : l.objects) d["s"].push_back({o.category, o.bbox, 0.9});
    const std::vector<EvalSample> g{{"s", l}};
    const auto r = evaluate(g, d);
    CHECK(r.overall.count == 3);
    CHECK(r.overall.mean_iou == 1.0);
    CHECK(r.overall.success_rate == 100.0);
    CHECK(r.small.count == 1);
    CHECK(r.medium.count == 1);
    CHECK(r.large.count == 1);
}

TEST_CASE("iou of exactly one half fails") {
    LayoutGuidance l;
    l.objects = {{"dog", {0, 0, 100, 100}}};
    DetectionMap d{{"s", {{"dog", {0, 0, 100, 50}, 1}}}};
    const std::vector<EvalSample> g{{"s", l}};
    const auto r = evaluate(g, d);
    CHECK(r.objects[0].iou == 0.5);
    CHECK_FALSE(r.objects[0].success);
    CHECK(r.overall.success_rate == 0.0);
}

TEST_CASE("hand-aggregated reports") {
    // IoUs 0.6 and 0.4 -> mean 0.5, one success.
    LayoutGuidance l;
    l.objects = {{"dog", {0, 0, 100, 100}}, {"cat", {200, 0, 100, 100}}};
    DetectionMap d{{"s", {{"dog", {0, 0, 100, 60}, 1}, {"cat", {200, 0, 100, 40}, 1}}}};
    const std::vector<EvalSample> g{{"s", l}};
    auto r = evaluate(g, d);
    CHECK(r.overall.mean_iou == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.overall.success_rate == doctest::Approx(50.0).epsilon(1e-12));

    // Three objects, one per bucket, plus an unmatched detection category.
    LayoutGuidance three;
    three.objects = {{"dog", {0, 0, 100, 100}}, {"cat", {0, 0, 200, 200}}, {"car", {0, 0, 400, 400}}};
    DetectionMap d3{{"t", {{"dog", {0, 0, 100, 80}, 1}, {"cat", {100, 0, 200, 200}, 1}, {"kite", {0, 0, 400, 400}, 1}}}};
    const std::vector<EvalSample> g3{{"t", three}};
    r = evaluate(g3, d3);
    const double i_dog = 0.8, i_cat = 100.0 * 200 / (200.0 * 200 * 2 - 100.0 * 200), i_car = 0.0;
    CHECK(std::abs(r.small.mean_iou - i_dog) < 1e-9);
    CHECK(std::abs(r.medium.mean_iou - i_cat) < 1e-9);
    CHECK(std::abs(r.large.mean_iou - i_car) < 1e-9);
    CHECK(std::abs(r.overall.mean_iou - (i_dog + i_cat + i_car) / 3) < 1e-9);
    CHECK(std::abs(r.overall.success_rate - 100.0 / 3) < 1e-9);
    CHECK(r.small.success_rate == 100.0);
    CHECK(r.medium.success_rate == 0.0);
    const double weighted = (r.small.count * r.small.mean_iou + r.medium.count * r.medium.mean_iou +
                             r.large.count * r.large.mean_iou) /
                            r.overall.count;
    CHECK(std::abs(weighted - r.overall.mean_iou) < 1e-9);

    const auto table = report_table(r);
    CHECK(table.find("R_suc") != std::string::npos);
    const auto j = report_to_json(r);
    CHECK(j.contains("overall"));
    CHECK(j["objects"].size() == 3);
}

TEST_CASE("mismatched sample ids") {
    LayoutGuidance l;
    l.objects = {{"dog", {0, 0, 10, 10}}};
    const std::vector<EvalSample> g{{"a", l}, {"b", l}};
    DetectionMap d{{"a", {}}, {"c", {}}};
    try {
        evaluate(g, d);
        FAIL("expected InvalidArgument");
    } catch (const InvalidArgument& e) {
        const std::string what = e.what();
        CHECK(what.find("b") != std::string::npos);
        CHECK(what.find("c") != std::string::npos);
    }
}

TEST_CASE("greedy can lose to the optimum") {
    // Greedy takes A-d1 (9/11) first and leaves B with d2; pairing A-d2, B-d1 scores more.
    const std::vector<LayoutObject> g{{"dog", {10, 0, 10, 10}}, {"dog", {13, 0, 10, 10}}};
    const std::vector<Detection> d{{"dog", {11, 0, 10, 10}, 1}, {"dog", {8, 0, 10, 10}, 1}};
    REQUIRE(iou(g[0].bbox, d[0].bbox) == doctest::Approx(9.0 / 11));
    const auto greedy = match_detections(g, d, MatchingRule::Greedy);
    const auto optimal = match_detections(g, d, MatchingRule::Optimal);
    CHECK(matched_total(g, d, optimal) == doctest::Approx(exhaustive_total(g, d)).epsilon(1e-12));
    CHECK(matched_total(g, d, greedy) < matched_total(g, d, optimal) - 0.1);
}

TEST_CASE("optimal matching equals exhaustive search") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0, 1);
    const std::vector<std::string> cats{"dog", "cat"};
    for (int t = 0; t < 300; ++t) {
        std::vector<LayoutObject> g;
        std::vector<Detection> d;
        const int ng = 1 + static_cast<int>(rng() % 4), nd = static_cast<int>(rng() % 5);
        auto box = [&] { return Box{u(rng) * 100, u(rng) * 100, 20 + u(rng) * 60, 20 + u(rng) * 60}; };
        for (int k = 0; k < ng; ++k) g.push_back({cats[rng() % 2], box()});
        for (int k = 0; k < nd; ++k) d.push_back({cats[rng() % 2], box(), u(rng)});
        const auto m = match_detections(g, d);
        CHECK(std::abs(matched_total(g, d, m) - exhaustive_total(g, d)) < 1e-12);
    }
}

TEST_CASE("layout set and detection files") {
    TempDir dir("eval");
    LayoutGuidance l;
    l.objects = {{"dog", {0, 0, 10, 10}}};
    const std::vector<EvalSample> set{{"x", l}, {"y", l}};
    save_layout_set(set, dir / "layouts.json");
    const auto back = load_layout_set(dir / "layouts.json");
    REQUIRE(back.size() == 2);
    CHECK(back[1].layout == l);

    write(dir / "det.json", R"({"x":[{"category":"dog","bbox":[0,0,10,10],"confidence":0.5}],"y":[]})");
    const auto det = load_detections(dir / "det.json");
    CHECK(det.at("x")[0].confidence == 0.5);
    write(dir / "bad.json", "{");
    try {
        load_detections(dir / "bad.json");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.kind() == FormatErrorKind::Parse);
        CHECK(std::string(e.what()).find("bad.json") != std::string::npos);
    }
}

TEST_CASE("coco filtering and rescale") {
    TempDir dir("coco");
    write(dir / "inst.json", R"({
      "images": [{"id": 1, "width": 640, "height": 480}, {"id": 2, "width": 500, "height": 500},
                 {"id": 3, "width": 100, "height": 100}],
      "categories": [{"id": 18, "name": "dog"}, {"id": 38, "name": "kite"}, {"id": 11, "name": "fire hydrant"}],
      "annotations": [
        {"image_id": 1, "category_id": 18, "bbox": [10, 20, 30, 40]},
        {"image_id": 2, "category_id": 18, "bbox": [0, 0, 50, 50]},
        {"image_id": 2, "category_id": 38, "bbox": [100, 100, 50, 50]},
        {"image_id": 3, "category_id": 11, "bbox": [90, 90, 20, 20]}]})");
    write(dir / "caps.json", R"({"annotations": [
        {"image_id": 1, "caption": "A Dog runs"},
        {"image_id": 2, "caption": "a dog runs"},
        {"image_id": 3, "caption": "a red fire hydrant"}]})");
    const auto samples = coco_to_layouts(dir / "inst.json", dir / "caps.json");
    REQUIRE(samples.size() == 2);
    CHECK(samples[0].id == "1");
    const auto& b = samples[0].layout.objects[0].bbox;
    CHECK(b.x == doctest::Approx(8));
    CHECK(b.y == doctest::Approx(21.3333333));
    CHECK(b.w == doctest::Approx(24));
    CHECK(b.h == doctest::Approx(42.6666667));
    CHECK(samples[0].caption == "A Dog runs");
    // Box running off the image is clamped to the canvas.
    const auto& h = samples[1].layout.objects[0].bbox;
    CHECK(h.x + h.w <= 512.0);
    CHECK(h.y + h.h <= 512.0);
    CHECK_NOTHROW(samples[1].layout.validate());

    write(dir / "broken.json", "[1,");
    CHECK_THROWS_AS(coco_to_layouts(dir / "broken.json", dir / "caps.json"), FormatError);
}

}
