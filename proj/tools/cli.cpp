// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include "noiseforge/blockdb.hpp"
#include "noiseforge/compose.hpp"
#include "noiseforge/config.hpp"
#include "noiseforge/diagnostics.hpp"
#include "noiseforge/error.hpp"
#include "noiseforge/layout_eval.hpp"
#include "noiseforge/sweep.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>

namespace noiseforge::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

CategoryList read_categories(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(FormatErrorKind::Io, "cannot open " + path.string());
    std::vector<std::string> names;
    if (path.extension() == ".json") {
        try {
            names = json::parse(in).get<std::vector<std::string>>();
        } catch (const json::exception& e) {
            throw FormatError(FormatErrorKind::Parse, path.string() + ": " + e.what());
        }
    } else {
        for (std::string line; std::getline(in, line);) {
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#') continue;
            const auto last = line.find_last_not_of(" \t\r");
            names.push_back(line.substr(first, last - first + 1));
        }
    }
    try {
        return CategoryList(std::move(names));
    } catch (const InvalidArgument& e) {
        throw FormatError(FormatErrorKind::Inconsistent, path.string() + ": " + e.what());
    }
}

/// A file holding either one layout or a {sample_id: layout} map.
std::vector<EvalSample> read_layouts(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(FormatErrorKind::Io, "cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(FormatErrorKind::Parse, path.string() + ": " + e.what());
    }
    if (doc.is_object() && doc.contains("objects")) return {{path.stem().string(), load_layout(path)}};
    return load_layout_set(path);
}

void write_json_file(const fs::path& path, const json& doc) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw FormatError(FormatErrorKind::Io, "cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

json manifest_summary(const BlockDatabase& db) {
    const auto& m = db.manifest;
    json backend{{"kind", m.backend.kind}, {"d", m.backend.dim}};
    if (m.backend.seed) backend["seed"] = *m.backend.seed;
    return {{"format_version", m.format_version},
            {"n_images", m.n_images},
            {"channels", m.channels},
            {"categories", m.categories.names()},
            {"backend", backend},
            {"image_seed", m.image_seed},
            {"blocks", db.block_count()},
            {"entries", db.entries.size()},
            {"extra", json::parse(m.extra_json)}};
}

struct Options {
    std::optional<std::string> config;
    bool serial = false;

    // create-db
    std::string categories, out, import_dir;
    std::optional<std::size_t> n;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> backend;
    std::optional<int> channels, dim;
    std::optional<std::uint64_t> backend_seed;

    // inspect-db / render-heatmap / compose / sweep
    std::string db, category, layout;
    std::optional<std::size_t> top;
    std::int64_t image_id = 0;
    int cell_px = 16;
    std::optional<double> t_obj, t_bg;

    // stats
    std::string image, provenance;

    // eval / ingest
    std::string layouts, detections, matching = "optimal", annotations, captions;
    double canvas = kDefaultCanvas;

    // sweep
    std::vector<double> t_obj_grid, t_bg_grid;
    std::vector<std::size_t> n_grid;
    std::size_t repeats = 1;
};

json flag_overrides(const Options& o) {
    json flags = json::object();
    if (o.n) flags["n_images"] = *o.n;
    if (o.seed) flags["seed"] = *o.seed;
    if (o.channels) flags["channels"] = *o.channels;
    if (o.t_obj) flags["t_obj"] = *o.t_obj;
    if (o.t_bg) flags["t_bg"] = *o.t_bg;
    if (o.backend) flags["backend"]["kind"] = *o.backend;
    if (o.dim) flags["backend"]["d"] = *o.dim;
    if (o.backend_seed) flags["backend"]["seed"] = *o.backend_seed;
    return flags;
}

PipelineConfig load_config(const Options& o) {
    return resolve_config(o.config ? std::optional<fs::path>(*o.config) : std::nullopt, flag_overrides(o));
}

Exec exec_of(const Options& o) { return o.serial ? Exec::Serial : Exec::Parallel; }

int cmd_create_db(const Options& o, std::ostream& out) {
    const auto cfg = load_config(o);
    const auto categories = read_categories(o.categories);
    BlockDatabase db;
    if (cfg.backend.kind == "synthetic") {
        const auto images = sample_noise(cfg.seed, static_cast<int>(cfg.n_images), cfg.channels, exec_of(o));
        const SyntheticBackend backend(cfg.backend.seed, cfg.channels, cfg.backend.d, exec_of(o));
        db = build_database(backend, images, categories, exec_of(o));
    } else {
        if (o.import_dir.empty()) throw ConfigError("import", "--backend import needs --import <attention dump dir>");
        auto dump = load_attention_dump(o.import_dir);
        if (o.n) {
            if (*o.n > dump.images.size())
                throw ConfigError("n_images", "the attention dump holds only " + std::to_string(dump.images.size()) +
                                                  " images");
            dump.images.resize(*o.n);
        }
        db = build_database(dump.backend, dump.images, categories, exec_of(o));
        db.manifest.image_seed = dump.image_seed;
    }
    save_database(db, o.out);
    out << manifest_summary(db).dump(2) << '\n';
    return kSuccess;
}

int cmd_inspect_db(const Options& o, std::ostream& out) {
    const auto db = load_database(o.db);
    json doc = manifest_summary(db);
    if (!o.category.empty()) {
        const auto ci = db.categories().index_of(o.category);
        const auto avg = db.average_scores(ci);
        std::vector<std::size_t> order(avg.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        const std::size_t k = std::min(o.top.value_or(10), order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [&](std::size_t a, std::size_t b) { return avg[a] != avg[b] ? avg[a] > avg[b] : a < b; });
        json top = json::array();
        for (std::size_t r = 0; r < k; ++r) {
            const auto ref = BlockRef::from_flat(order[r]);
            json contrasts = json::object();
            for (std::size_t j = 0; j < db.categories().size(); ++j)
                if (const auto e = db.entry_index(ci, j)) contrasts[db.categories()[j]] = db.entry_scores(*e)[order[r]];
            top.push_back({{"image_id", ref.image_id},
                           {"grid_index", ref.grid_index},
                           {"average", avg[order[r]]},
                           {"vs", contrasts}});
        }
        doc["category"] = o.category;
        doc["top"] = top;
    }
    out << doc.dump(2) << '\n';
    return kSuccess;
}

int cmd_compose(const Options& o, std::ostream& out, std::ostream& err) {
    const auto cfg = load_config(o);
    const auto db = load_database(o.db);
    const auto layout = load_layout(o.layout);
    const auto composed = compose_initial_image(db, layout, cfg.selection(), cfg.seed, exec_of(o));
    for (const auto& w : composed.warnings) err << "warning: " << w << '\n';
    save_composed(composed, o.out);
    const auto report = normality_report(composed.image, &composed.provenance, exec_of(o));
    out << json{{"image", o.out + ".bin"},
                {"sidecar", o.out + ".json"},
                {"t_obj", cfg.t_obj},
                {"t_bg", cfg.t_bg},
                {"seed", cfg.seed},
                {"stats", report_to_json(report)}}
               .dump(2)
        << '\n';
    return kSuccess;
}

int cmd_stats(const Options& o, std::ostream& out) {
    const auto image = load_image_bin(o.image);
    std::optional<Provenance> provenance;
    if (!o.provenance.empty()) provenance = load_provenance(o.provenance);
    const auto report = normality_report(image, provenance ? &*provenance : nullptr, exec_of(o));
    out << report_to_json(report).dump(2) << '\n';
    return kSuccess;
}

int cmd_eval(const Options& o, std::ostream& out) {
    if (o.matching != "optimal" && o.matching != "greedy")
        throw ConfigError("matching", "must be 'optimal' or 'greedy'");
    const auto samples = load_layout_set(o.layouts);
    const auto detections = load_detections(o.detections);
    const auto report =
        evaluate(samples, detections, o.matching == "greedy" ? MatchingRule::Greedy : MatchingRule::Optimal);
    write_json_file(o.out, report_to_json(report));
    out << report_table(report);
    return kSuccess;
}

int cmd_ingest_coco(const Options& o, std::ostream& out) {
    const auto samples = coco_to_layouts(o.annotations, o.captions, o.canvas);
    fs::create_directories(fs::path(o.out) / "layouts");
    std::vector<EvalSample> set;
    json captions = json::object();
    for (const auto& s : samples) {
        set.push_back({s.id, s.layout});
        captions[s.id] = s.caption;
        write_json_file(fs::path(o.out) / "layouts" / (s.id + ".json"), layout_to_json(s.layout));
    }
    save_layout_set(set, fs::path(o.out) / "layouts.json");
    write_json_file(fs::path(o.out) / "captions.json", captions);
    out << json{{"samples", samples.size()}, {"out", o.out}}.dump(2) << '\n';
    return kSuccess;
}

int cmd_render_heatmap(const Options& o, std::ostream& out) {
    const auto db = load_database(o.db);
    const auto ci = db.categories().index_of(o.category);
    if (o.image_id < 0 || static_cast<std::size_t>(o.image_id) >= db.manifest.n_images)
        throw InvalidArgument("image id " + std::to_string(o.image_id) + " is not in the database");
    const auto map = db.average_scores(ci).subspan(static_cast<std::size_t>(o.image_id) * kBlocksPerImage,
                                                   kBlocksPerImage);
    render_heatmap(map, o.out, o.cell_px);
    out << json{{"out", o.out}, {"category", o.category}, {"image_id", o.image_id}}.dump(2) << '\n';
    return kSuccess;
}

int cmd_sweep(const Options& o, std::ostream& out) {
    const auto cfg = load_config(o);
    const auto db = load_database(o.db);
    std::vector<LayoutGuidance> layouts;
    for (auto& s : read_layouts(o.layouts)) layouts.push_back(std::move(s.layout));
    SweepGrid grid;
    grid.t_obj = o.t_obj_grid.empty() ? std::vector<double>{cfg.t_obj} : o.t_obj_grid;
    grid.t_bg = o.t_bg_grid.empty() ? std::vector<double>{cfg.t_bg} : o.t_bg_grid;
    for (double t : grid.t_obj) PipelineConfig{.t_obj = t}.validate();
    for (double t : grid.t_bg) PipelineConfig{.t_bg = t}.validate();
    grid.n_images = o.n_grid;
    grid.repeats = o.repeats;
    grid.seed = cfg.seed;
    const auto rows = run_sweep(db, layouts, grid, exec_of(o));
    const auto doc = sweep_to_json(rows);
    if (!o.out.empty()) write_json_file(o.out, doc);
    out << doc.dump(2) << '\n';
    return kSuccess;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tailored initial-noise construction from scored pixel-block databases", "noise-forge"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON config file (default: $NOISE_FORGE_CONFIG)");
        sub->add_flag("--serial", o.serial, "Use the serial reference kernels");
    };

    auto* create = app.add_subcommand("create-db", "Score noise blocks and write a block database");
    common(create);
    create->add_option("--categories", o.categories, "Category list (one per line, or a JSON array)")->required();
    create->add_option("--n", o.n, "Number of noise images");
    create->add_option("--seed", o.seed, "Noise sampling seed");
    create->add_option("--backend", o.backend, "synthetic | import");
    create->add_option("--import", o.import_dir, "Attention dump directory for --backend import");
    create->add_option("--channels", o.channels, "Latent channels");
    create->add_option("--d", o.dim, "Synthetic embedding dimension");
    create->add_option("--backend-seed", o.backend_seed, "Synthetic backend seed");
    create->add_option("--out", o.out, "Output database directory")->required();

    auto* inspect = app.add_subcommand("inspect-db", "Summarize a block database");
    inspect->add_option("dir", o.db, "Database directory")->required();
    inspect->add_option("--category", o.category, "List top blocks for this category");
    inspect->add_option("--top", o.top, "How many blocks to list (default 10)");

    auto* compose = app.add_subcommand("compose", "Assemble an initial noise image for a layout");
    common(compose);
    compose->add_option("--db", o.db, "Database directory")->required();
    compose->add_option("--layout", o.layout, "Layout JSON")->required();
    compose->add_option("--t-obj", o.t_obj, "Object threshold");
    compose->add_option("--t-bg", o.t_bg, "Background threshold");
    compose->add_option("--seed", o.seed, "Composition seed");
    compose->add_option("--out", o.out, "Output prefix (<prefix>.bin, <prefix>.json)")->required();

    auto* stats = app.add_subcommand("stats", "Normality diagnostics for an image.bin");
    common(stats);
    stats->add_option("image", o.image, "image.bin")->required();
    stats->add_option("--provenance", o.provenance, "Composed-image sidecar JSON");

    auto* eval = app.add_subcommand("eval", "Score detections against layout guidance");
    eval->add_option("--layouts", o.layouts, "{sample_id: layout} JSON")->required();
    eval->add_option("--detections", o.detections, "{sample_id: [detections]} JSON")->required();
    eval->add_option("--out", o.out, "Report JSON")->required();
    eval->add_option("--matching", o.matching, "optimal | greedy");

    auto* ingest = app.add_subcommand("ingest-coco", "Convert COCO annotations and captions to layouts");
    ingest->add_option("--annotations", o.annotations, "COCO instances JSON")->required();
    ingest->add_option("--captions", o.captions, "COCO captions JSON")->required();
    ingest->add_option("--out", o.out, "Output directory")->required();
    ingest->add_option("--canvas", o.canvas, "Target canvas side");

    auto* heat = app.add_subcommand("render-heatmap", "Render a category's average-score map for one image");
    heat->add_option("--db", o.db, "Database directory")->required();
    heat->add_option("--category", o.category, "Category")->required();
    heat->add_option("--image-id", o.image_id, "Image id")->required();
    heat->add_option("--out", o.out, "Output .png or .pgm")->required();
    heat->add_option("--cell-px", o.cell_px, "Pixels per grid cell");

    auto* sweep = app.add_subcommand("sweep", "Threshold / database-size sensitivity sweep");
    common(sweep);
    sweep->add_option("--db", o.db, "Database directory")->required();
    sweep->add_option("--layouts", o.layouts, "Layout or {sample_id: layout} JSON")->required();
    sweep->add_option("--t-obj", o.t_obj_grid, "Object thresholds")->delimiter(',');
    sweep->add_option("--t-bg", o.t_bg_grid, "Background thresholds")->delimiter(',');
    sweep->add_option("--n", o.n_grid, "Database sizes (sub-sampled)")->delimiter(',');
    sweep->add_option("--repeats", o.repeats, "Compositions per layout and cell");
    sweep->add_option("--seed", o.seed, "Base seed");
    sweep->add_option("--out", o.out, "Output JSON");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    }

    try {
        if (*create) return cmd_create_db(o, out);
        if (*inspect) return cmd_inspect_db(o, out);
        if (*compose) return cmd_compose(o, out, err);
        if (*stats) return cmd_stats(o, out);
        if (*eval) return cmd_eval(o, out);
        if (*ingest) return cmd_ingest_coco(o, out);
        if (*heat) return cmd_render_heatmap(o, out);
        if (*sweep) return cmd_sweep(o, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kUsageError;
    } catch (const InvalidArgument& e) {
        err << "invalid argument: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kUsageError;
}

} // namespace noiseforge::cli
