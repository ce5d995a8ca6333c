// SPDX-License-Identifier: Apache-2.0

#include "noiseforge/blockdb.hpp"

#include "binary_io.hpp"
#include "noiseforge/error.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <set>
#include <sstream>

namespace noiseforge {

namespace {

using nlohmann::json;

// Stored float averages may come from producers that summed in float32.
constexpr double kAverageTolerance = 1e-6;

struct PairTask {
    std::size_t first = 0;
    std::size_t second = 0;
    std::vector<std::string> tokens;
    std::size_t first_pos = 0, first_len = 0;
    std::size_t second_pos = 0, second_len = 0;
};

std::vector<PairTask> pair_tasks(const CategoryList& categories) {
    std::vector<PairTask> tasks;
    const std::size_t n = categories.size();
    if (n == 1) {
        PairTask t;
        t.tokens = tokenize(single_prompt(categories[0]));
        t.first_pos = 1;
        t.first_len = tokenize(categories[0]).size();
        tasks.push_back(std::move(t));
        return tasks;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            PairTask t;
            t.first = i;
            t.second = j;
            t.tokens = tokenize(pair_prompt(categories[i], categories[j]));
            t.first_pos = 1;
            t.first_len = tokenize(categories[i]).size();
            t.second_pos = t.first_pos + t.first_len + 2; // "and a"
            t.second_len = tokenize(categories[j]).size();
            tasks.push_back(std::move(t));
        }
    }
    return tasks;
}

std::vector<float> quantize(std::span<const double> values) {
    std::vector<float> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [](double v) { return static_cast<float>(v); });
    return out;
}

json backend_to_json(const BackendDescriptor& b) {
    json j{{"kind", b.kind}, {"d", b.dim}};
    if (b.seed) j["seed"] = *b.seed;
    return j;
}

json manifest_to_json(const Manifest& m) {
    json j = json::parse(m.extra_json);
    j["format_version"] = m.format_version;
    j["n_images"] = m.n_images;
    j["channels"] = m.channels;
    j["block_size"] = kBlockSide;
    j["grid"] = kGridSide;
    j["categories"] = m.categories.names();
    j["backend"] = backend_to_json(m.backend);
    j["image_seed"] = m.image_seed;
    return j;
}

const std::set<std::string>& manifest_keys() {
    static const std::set<std::string> keys{"format_version", "n_images", "channels",   "block_size", "grid",
                                            "categories",     "backend",  "image_seed", "checksums"};
    return keys;
}

Manifest manifest_from_json(const json& j) {
    if (!j.is_object()) throw FormatError(FormatErrorKind::CorruptHeader, "manifest.json is not an object");
    if (!j.contains("format_version") || !j["format_version"].is_number_integer())
        throw FormatError(FormatErrorKind::CorruptHeader, "manifest.json lacks an integer format_version");
    Manifest m;
    m.format_version = j["format_version"].get<int>();
    if (m.format_version != kDatabaseFormatVersion)
        throw FormatError(FormatErrorKind::VersionMismatch, "database format_version " +
                                                                std::to_string(m.format_version) + ", expected " +
                                                                std::to_string(kDatabaseFormatVersion));
    try {
        m.n_images = j.at("n_images").get<std::size_t>();
        m.channels = j.at("channels").get<int>();
        if (j.at("block_size").get<int>() != kBlockSide || j.at("grid").get<int>() != kGridSide)
            throw FormatError(FormatErrorKind::CorruptHeader, "unsupported block_size/grid geometry");
        m.categories = CategoryList(j.at("categories").get<std::vector<std::string>>());
        const auto& b = j.at("backend");
        m.backend.kind = b.at("kind").get<std::string>();
        m.backend.dim = b.value("d", kDefaultEmbeddingDim);
        if (b.contains("seed")) m.backend.seed = b.at("seed").get<std::uint64_t>();
        m.image_seed = j.value("image_seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw FormatError(FormatErrorKind::CorruptHeader, std::string("manifest.json: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw FormatError(FormatErrorKind::CorruptHeader, std::string("manifest.json: ") + e.what());
    }
    if (m.n_images == 0 || m.channels < 1)
        throw FormatError(FormatErrorKind::CorruptHeader, "manifest.json: n_images and channels must be positive");
    json extra = json::object();
    for (const auto& [key, value] : j.items())
        if (!manifest_keys().contains(key)) extra[key] = value;
    m.extra_json = extra.dump();
    return m;
}

void check_checksum(const json& manifest, const std::string& file, std::span<const char> bytes) {
    if (!manifest.contains("checksums")) return;
    const auto& sums = manifest["checksums"];
    if (!sums.is_object() || !sums.contains(file)) return;
    const auto expected = sums[file].get<std::string>();
    const auto actual = io::crc32_hex(bytes);
    if (expected != actual)
        throw FormatError(FormatErrorKind::ChecksumMismatch,
                          file + " crc32 " + actual + " does not match manifest " + expected);
}

std::vector<float> read_payload(const std::filesystem::path& dir, const json& manifest, const std::string& file,
                                std::size_t expected) {
    const auto bytes = io::read_bytes(dir / file);
    const std::size_t want = expected * 4;
    if (bytes.size() != want) {
        std::ostringstream msg;
        msg << file << " has " << bytes.size() << " bytes, expected " << want;
        throw FormatError(bytes.size() < want ? FormatErrorKind::Truncated : FormatErrorKind::SizeMismatch,
                          msg.str());
    }
    check_checksum(manifest, file, bytes);
    return io::decode_f32(bytes);
}

} // namespace

CategoryList::CategoryList(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw InvalidArgument("category list is empty");
    std::set<std::string> seen;
    for (const auto& n : names_) {
        if (tokenize(n).empty()) throw InvalidArgument("category names must be nonempty");
        if (!seen.insert(n).second) throw InvalidArgument("duplicate category '" + n + "'");
    }
}

std::size_t CategoryList::index_of(std::string_view name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw LookupError("unknown category '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - names_.begin());
}

bool CategoryList::contains(std::string_view name) const noexcept {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::span<const float> BlockDatabase::entry_scores(std::size_t entry) const {
    return std::span<const float>(scores).subspan(entry * block_count(), block_count());
}

std::span<const double> BlockDatabase::average_scores(std::size_t category) const {
    return std::span<const double>(averages).subspan(category * block_count(), block_count());
}

std::span<const float> BlockDatabase::block_data(std::size_t flat) const {
    return std::span<const float>(blocks).subspan(flat * block_size(), block_size());
}

PixelBlock BlockDatabase::block(BlockRef ref) const {
    if (ref.image_id < 0 || static_cast<std::size_t>(ref.image_id) >= manifest.n_images || ref.grid_index < 0 ||
        ref.grid_index >= kBlocksPerImage)
        throw InvalidArgument("block reference out of range");
    const auto data = block_data(ref.flat());
    return {std::vector<float>(data.begin(), data.end()), ref.image_id, ref.grid_index};
}

std::optional<std::size_t> BlockDatabase::entry_index(std::size_t subject, std::size_t contrast) const {
    const std::size_t n = categories().size();
    if (subject == contrast || subject >= n || contrast >= n) return std::nullopt;
    return subject * (n - 1) + (contrast < subject ? contrast : contrast - 1);
}

void BlockDatabase::validate() const {
    const std::size_t nc = categories().size();
    const std::size_t nb = block_count();
    auto fail = [](const std::string& what) { throw FormatError(FormatErrorKind::Inconsistent, what); };
    if (blocks.size() != nb * block_size()) fail("block payload has the wrong size");
    if (entries != entry_layout(nc)) fail("entry list does not cover every ordered category pair in order");
    if (scores.size() != entries.size() * nb) fail("score payload has the wrong size");
    if (averages.size() != nc * nb) fail("average payload has the wrong size");
    for (float v : scores)
        if (!(v >= 0.0f && v <= 1.0f)) fail("normalized score outside [0, 1]");
    for (double v : averages)
        if (!(v >= 0.0 && v <= 1.0)) fail("average score outside [0, 1]");
    if (nc >= 2) {
        BlockDatabase copy = *this;
        recompute_averages(copy);
        if (copy.averages != averages) fail("stored averages differ from the mean of their entries");
    }
}

std::string pair_prompt(std::string_view first, std::string_view second) {
    return "a " + std::string(first) + " and a " + std::string(second);
}

std::string single_prompt(std::string_view category) { return "a " + std::string(category); }

std::vector<EntryKey> entry_layout(std::size_t n_categories) {
    std::vector<EntryKey> keys;
    if (n_categories < 2) return keys;
    for (std::size_t i = 0; i < n_categories; ++i)
        for (std::size_t j = 0; j < n_categories; ++j)
            if (i != j) keys.push_back({i, j});
    return keys;
}

void normalize_entry(std::span<double> values) {
    if (values.empty()) return;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double min = *lo, max = *hi;
    if (max > min) {
        const double range = max - min;
        for (auto& v : values) v = (v - min) / range;
    }
    for (auto& v : values) v = std::clamp(v, 0.0, 1.0);
}

void recompute_averages(BlockDatabase& db) {
    const std::size_t nc = db.categories().size();
    if (nc < 2) return;
    const std::size_t nb = db.block_count();
    db.averages.assign(nc * nb, 0.0);
    const double inv = 1.0 / static_cast<double>(nc - 1);
    for (std::size_t i = 0; i < nc; ++i) {
        double* avg = db.averages.data() + i * nb;
        for (std::size_t j = 0; j < nc; ++j) {
            if (i == j) continue;
            const auto s = db.entry_scores(*db.entry_index(i, j));
            for (std::size_t b = 0; b < nb; ++b) avg[b] += static_cast<double>(s[b]);
        }
        for (std::size_t b = 0; b < nb; ++b) avg[b] *= inv;
    }
}

BlockDatabase build_database(const ScorerBackend& backend, std::span<const NoiseImage> images,
                             const CategoryList& categories, Exec exec) {
    if (images.empty()) throw InvalidArgument("build_database needs at least one noise image");
    if (categories.size() == 0) throw InvalidArgument("build_database needs at least one category");
    const int channels = images.front().channels;
    for (std::size_t i = 0; i < images.size(); ++i) {
        images[i].validate();
        if (images[i].channels != channels) throw InvalidArgument("noise images differ in channel count");
        if (images[i].image_id != static_cast<std::int64_t>(i))
            throw InvalidArgument("noise image ids must be 0..N-1 in order");
    }

    BlockDatabase db;
    db.manifest.n_images = images.size();
    db.manifest.channels = channels;
    db.manifest.categories = categories;
    db.manifest.backend = backend.descriptor();
    db.manifest.image_seed = images.front().source_seed;
    db.entries = entry_layout(categories.size());

    const std::size_t nb = db.block_count();
    const std::size_t bs = db.block_size();
    db.blocks.resize(nb * bs);
    for (const auto& image : images)
        for (int cell = 0; cell < kBlocksPerImage; ++cell)
            copy_block(image, cell,
                       std::span<float>(db.blocks).subspan((image.image_id * kBlocksPerImage + cell) * bs, bs));

    const auto tasks = pair_tasks(categories);
    const bool single = categories.size() == 1;
    const std::size_t raw_rows = single ? 1 : db.entries.size();
    std::vector<double> raw(raw_rows * nb);

    const std::size_t n_jobs = images.size() * tasks.size();
    std::vector<std::exception_ptr> failures(n_jobs);
    auto run = [&](std::size_t job) {
        const std::size_t image_index = job / tasks.size();
        const auto& task = tasks[job % tasks.size()];
        const auto& image = images[image_index];
        try {
            const auto maps = backend.attention_maps(image, task.tokens);
            const std::size_t offset = image_index * kBlocksPerImage;
            auto store = [&](std::size_t row, const std::vector<double>& map) {
                std::copy(map.begin(), map.end(), raw.begin() + static_cast<std::ptrdiff_t>(row * nb + offset));
            };
            if (single) {
                store(0, span_score_map(maps, task.first_pos, task.first_len));
            } else {
                store(*db.entry_index(task.first, task.second), span_score_map(maps, task.first_pos, task.first_len));
                store(*db.entry_index(task.second, task.first),
                      span_score_map(maps, task.second_pos, task.second_len));
            }
        } catch (const std::exception& e) {
            std::string pair = categories[task.first];
            if (!single) pair += "/" + categories[task.second];
            failures[job] = std::make_exception_ptr(
                Error("scoring image " + std::to_string(image.image_id) + " with pair '" + pair + "' failed: " + e.what()));
        }
    };

    if (exec == Exec::Parallel) {
        const auto n = static_cast<std::int64_t>(n_jobs);
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t job = 0; job < n; ++job) run(static_cast<std::size_t>(job));
    } else {
        for (std::size_t job = 0; job < n_jobs; ++job) run(job);
    }
    for (const auto& f : failures)
        if (f) std::rethrow_exception(f);

    for (std::size_t row = 0; row < raw_rows; ++row)
        normalize_entry(std::span<double>(raw).subspan(row * nb, nb));

    if (single) {
        const auto q = quantize(raw);
        db.averages.assign(q.begin(), q.end());
    } else {
        db.scores = quantize(raw);
        recompute_averages(db);
    }
    return db;
}

double average_score(const BlockDatabase& db, std::string_view category, BlockRef block) {
    const std::size_t i = db.categories().index_of(category);
    if (block.image_id < 0 || static_cast<std::size_t>(block.image_id) >= db.manifest.n_images ||
        block.grid_index < 0 || block.grid_index >= kBlocksPerImage)
        throw InvalidArgument("block reference out of range");
    return db.average_scores(i)[block.flat()];
}

BlockDatabase subsample_database(const BlockDatabase& db, std::size_t n_images) {
    if (n_images == 0 || n_images > db.manifest.n_images)
        throw InvalidArgument("subsample size must be in [1, " + std::to_string(db.manifest.n_images) + "]");
    BlockDatabase out;
    out.manifest = db.manifest;
    out.manifest.n_images = n_images;
    out.entries = db.entries;
    const std::size_t nb = out.block_count();
    out.blocks.assign(db.blocks.begin(), db.blocks.begin() + static_cast<std::ptrdiff_t>(nb * db.block_size()));

    auto renormalized = [&](auto source) {
        std::vector<double> v(source.begin(), source.begin() + static_cast<std::ptrdiff_t>(nb));
        normalize_entry(v);
        return quantize(v);
    };
    if (db.categories().size() == 1) {
        const auto q = renormalized(db.average_scores(0));
        out.averages.assign(q.begin(), q.end());
        return out;
    }
    for (std::size_t e = 0; e < db.entries.size(); ++e) {
        const auto q = renormalized(db.entry_scores(e));
        out.scores.insert(out.scores.end(), q.begin(), q.end());
    }
    recompute_averages(out);
    return out;
}

void save_database(const BlockDatabase& db, const std::filesystem::path& dir) {
    db.validate();
    std::filesystem::create_directories(dir);

    json entries = json::array();
    for (const auto& e : db.entries)
        entries.push_back({{"subject", db.categories()[e.subject]}, {"contrast", db.categories()[e.contrast]}});
    const std::string entries_text = entries.dump(2) + "\n";

    std::vector<float> averages(db.averages.size());
    std::transform(db.averages.begin(), db.averages.end(), averages.begin(),
                   [](double v) { return static_cast<float>(v); });

    const auto blocks = io::encode_f32(db.blocks);
    const auto scores = io::encode_f32(db.scores);
    const auto avg = io::encode_f32(averages);

    json manifest = manifest_to_json(db.manifest);
    manifest["checksums"] = {{"blocks.bin", io::crc32_hex(blocks)},
                             {"entries.json", io::crc32_hex(entries_text)},
                             {"scores.bin", io::crc32_hex(scores)},
                             {"averages.bin", io::crc32_hex(avg)}};

    io::write_bytes(dir / "blocks.bin", blocks);
    io::write_bytes(dir / "scores.bin", scores);
    io::write_bytes(dir / "averages.bin", avg);
    io::write_text(dir / "entries.json", entries_text);
    io::write_json(dir / "manifest.json", manifest);
}

BlockDatabase load_database(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw FormatError(FormatErrorKind::Io, dir.string() + " is not a database directory");
    const json manifest = io::read_json(dir / "manifest.json", FormatErrorKind::CorruptHeader);

    BlockDatabase db;
    db.manifest = manifest_from_json(manifest);
    const auto& categories = db.categories();

    const auto entries_bytes = io::read_bytes(dir / "entries.json");
    check_checksum(manifest, "entries.json", entries_bytes);
    json entries;
    try {
        entries = json::parse(entries_bytes.begin(), entries_bytes.end());
        for (const auto& e : entries) {
            const auto subject = categories.index_of(e.at("subject").get<std::string>());
            const auto contrast = categories.index_of(e.at("contrast").get<std::string>());
            db.entries.push_back({subject, contrast});
        }
    } catch (const json::exception& e) {
        throw FormatError(FormatErrorKind::CorruptHeader, std::string("entries.json: ") + e.what());
    } catch (const LookupError& e) {
        throw FormatError(FormatErrorKind::Inconsistent, std::string("entries.json: ") + e.what());
    }
    if (db.entries != entry_layout(categories.size()))
        throw FormatError(FormatErrorKind::Inconsistent,
                          "entries.json must list every ordered category pair, subject-major");

    const std::size_t nb = db.block_count();
    db.blocks = read_payload(dir, manifest, "blocks.bin", nb * db.block_size());
    db.scores = read_payload(dir, manifest, "scores.bin", db.entries.size() * nb);
    const auto stored = read_payload(dir, manifest, "averages.bin", categories.size() * nb);

    for (float v : db.blocks)
        if (!std::isfinite(v)) throw FormatError(FormatErrorKind::Inconsistent, "blocks.bin holds non-finite values");

    if (categories.size() == 1) {
        db.averages.assign(stored.begin(), stored.end());
    } else {
        recompute_averages(db);
        for (std::size_t k = 0; k < stored.size(); ++k) {
            if (std::abs(static_cast<double>(stored[k]) - db.averages[k]) > kAverageTolerance) {
                std::ostringstream msg;
                msg << "averages.bin value " << k << " is " << stored[k] << " but its entries average to "
                    << db.averages[k];
                throw FormatError(FormatErrorKind::Inconsistent, msg.str());
            }
        }
    }
    db.validate();
    return db;
}

} // namespace noiseforge
