// SPDX-License-Identifier: Apache-2.0

#include "noiseforge/scorer.hpp"

#include "binary_io.hpp"
#include "noiseforge/error.hpp"
#include "noiseforge/kernels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <sstream>

namespace noiseforge {

namespace {

// Stream tags for the synthetic backend's seeded parameters.
constexpr std::uint64_t kQueryStream = 0x5155455259ULL;
constexpr std::uint64_t kKeyStream = 0x4b4559ULL;
constexpr std::uint64_t kTokenStream = 0x544f4b454eULL;

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<double> gaussian_matrix(std::uint64_t seed, std::size_t rows, std::size_t cols, double scale) {
    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> m(rows * cols);
    for (auto& v : m) v = normal(engine) * scale;
    return m;
}

std::string join_tokens(std::span<const std::string> tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

} // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!current.empty()) tokens.push_back(std::exchange(current, {}));
        } else {
            current += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

void AttentionMapSet::validate(double tolerance) const {
    if (tokens.empty()) throw InvalidArgument("attention map set has no tokens");
    if (maps.size() != tokens.size() * kBlocksPerImage)
        throw InvalidArgument("attention map set must hold one 16x16 map per token");
    for (double v : maps)
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("attention weight outside [0, 1]");
    for (int cell = 0; cell < kBlocksPerImage; ++cell) {
        double sum = 0;
        for (std::size_t t = 0; t < tokens.size(); ++t) sum += maps[t * kBlocksPerImage + cell];
        if (std::abs(sum - 1.0) > tolerance) {
            std::ostringstream msg;
            msg << "attention weights at cell " << cell << " sum to " << sum;
            throw InvalidArgument(msg.str());
        }
    }
}

std::vector<double> span_score_map(const AttentionMapSet& maps, std::size_t first, std::size_t count) {
    if (count == 0 || first + count > maps.tokens.size())
        throw InvalidArgument("token span outside the attention map set");
    std::vector<double> out(kBlocksPerImage, 0.0);
    for (std::size_t t = first; t < first + count; ++t) {
        const auto m = maps.map(t);
        for (int cell = 0; cell < kBlocksPerImage; ++cell) out[cell] += m[cell];
    }
    const double inv = 1.0 / static_cast<double>(count);
    for (auto& v : out) v *= inv;
    return out;
}

std::vector<double> category_score_map(const AttentionMapSet& maps, std::string_view category) {
    const auto words = tokenize(category);
    if (words.empty()) throw InvalidArgument("category has no tokens");
    for (const auto& w : words)
        if (std::find(maps.tokens.begin(), maps.tokens.end(), w) == maps.tokens.end())
            throw LookupError("token '" + w + "' of category '" + std::string(category) +
                              "' is not in the attention map set");
    const auto hit = std::search(maps.tokens.begin(), maps.tokens.end(), words.begin(), words.end());
    if (hit == maps.tokens.end())
        throw LookupError("tokens of category '" + std::string(category) + "' do not appear contiguously");
    return span_score_map(maps, static_cast<std::size_t>(hit - maps.tokens.begin()), words.size());
}

SyntheticBackend::SyntheticBackend(std::uint64_t seed, int channels, int dim, Exec exec)
    : seed_(seed), channels_(channels), dim_(dim), exec_(exec) {
    if (channels < 1) throw InvalidArgument("channel count must be positive");
    if (dim < 1) throw InvalidArgument("embedding dimension must be positive");
    const auto features = static_cast<std::size_t>(channels) * kPixelsPerBlock;
    const auto d = static_cast<std::size_t>(dim);
    // Unit-variance projections so logits stay O(1) instead of saturating the softmax.
    w_query_ = gaussian_matrix(derive_seed(seed, kQueryStream), d, features, 1.0 / std::sqrt(double(features)));
    w_key_ = gaussian_matrix(derive_seed(seed, kKeyStream), d, d, 1.0 / std::sqrt(double(d)));
}

TokenEmbedding SyntheticBackend::embed(const std::string& token) const {
    const auto seed = derive_seed(derive_seed(seed_, kTokenStream), fnv1a(token));
    return {token, gaussian_matrix(seed, 1, static_cast<std::size_t>(dim_), 1.0)};
}

std::vector<double> SyntheticBackend::key(const std::string& token) const {
    const auto e = embed(token).vector;
    const auto d = static_cast<std::size_t>(dim_);
    std::vector<double> k(d, 0.0);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) k[r] += w_key_[r * d + c] * e[c];
    return k;
}

AttentionMapSet SyntheticBackend::attention_maps(const NoiseImage& image, std::span<const std::string> tokens) const {
    if (tokens.empty()) throw InvalidArgument("attention_maps needs at least one token");
    image.validate();
    if (image.channels != channels_)
        throw InvalidArgument("image has " + std::to_string(image.channels) + " channels, backend expects " +
                              std::to_string(channels_));

    const auto d = static_cast<std::size_t>(dim_);
    std::vector<double> keys;
    keys.reserve(tokens.size() * d);
    for (const auto& t : tokens) {
        const auto k = key(t);
        keys.insert(keys.end(), k.begin(), k.end());
    }

    const kernels::AttentionShape shape{kBlocksPerImage, static_cast<std::size_t>(channels_) * kPixelsPerBlock, d,
                                        tokens.size()};
    std::vector<float> queries(shape.cells * shape.features);
    for (int cell = 0; cell < kBlocksPerImage; ++cell)
        copy_block(image, cell, std::span<float>(queries).subspan(cell * shape.features, shape.features));

    AttentionMapSet out;
    out.tokens.assign(tokens.begin(), tokens.end());
    out.maps.resize(tokens.size() * kBlocksPerImage);
    if (exec_ == Exec::Parallel)
        kernels::parallel::attention_softmax(shape, queries, w_query_, keys, out.maps);
    else
        kernels::serial::attention_softmax(shape, queries, w_query_, keys, out.maps);
    return out;
}

BackendDescriptor SyntheticBackend::descriptor() const { return {"synthetic", dim_, seed_}; }

void ImportedBackend::add(std::int64_t image_id, AttentionMapSet maps) {
    maps.validate(1e-4);
    Key key{image_id, maps.tokens};
    store_.insert_or_assign(std::move(key), std::move(maps));
}

bool ImportedBackend::contains(std::int64_t image_id, std::span<const std::string> tokens) const {
    return store_.contains(Key{image_id, std::vector<std::string>(tokens.begin(), tokens.end())});
}

AttentionMapSet ImportedBackend::attention_maps(const NoiseImage& image, std::span<const std::string> tokens) const {
    if (tokens.empty()) throw InvalidArgument("attention_maps needs at least one token");
    const auto it = store_.find(Key{image.image_id, std::vector<std::string>(tokens.begin(), tokens.end())});
    if (it == store_.end())
        throw LookupError("no imported attention maps for image " + std::to_string(image.image_id) + " and prompt '" +
                          join_tokens(tokens) + "'");
    return it->second;
}

BackendDescriptor ImportedBackend::descriptor() const { return {"imported", dim_, std::nullopt}; }

AttentionDump load_attention_dump(const std::filesystem::path& dir) {
    using nlohmann::json;
    const json header = io::read_json(dir / "attention.json", FormatErrorKind::CorruptHeader);
    AttentionDump dump;
    std::size_t n_images = 0;
    int channels = 0;
    int dim = 0;
    std::vector<std::pair<std::int64_t, std::vector<std::string>>> records;
    try {
        if (header.at("format_version").get<int>() != 1)
            throw FormatError(FormatErrorKind::VersionMismatch,
                              "attention dump format_version " + header.at("format_version").dump());
        n_images = header.at("n_images").get<std::size_t>();
        channels = header.at("channels").get<int>();
        dim = header.at("d").get<int>();
        dump.image_seed = header.value("image_seed", std::uint64_t{0});
        for (const auto& r : header.at("records"))
            records.emplace_back(r.at("image_id").get<std::int64_t>(), r.at("tokens").get<std::vector<std::string>>());
    } catch (const json::exception& e) {
        throw FormatError(FormatErrorKind::CorruptHeader, "attention.json: " + std::string(e.what()));
    }
    if (n_images == 0 || channels < 1)
        throw FormatError(FormatErrorKind::CorruptHeader, "attention.json: empty image set");

    const std::size_t image_size = static_cast<std::size_t>(channels) * kLatentSide * kLatentSide;
    const auto pixels = io::read_f32(dir / "images.bin", n_images * image_size);
    for (std::size_t i = 0; i < n_images; ++i) {
        NoiseImage image;
        image.channels = channels;
        image.image_id = static_cast<std::int64_t>(i);
        image.source_seed = dump.image_seed;
        image.data.assign(pixels.begin() + static_cast<std::ptrdiff_t>(i * image_size),
                          pixels.begin() + static_cast<std::ptrdiff_t>((i + 1) * image_size));
        dump.images.push_back(std::move(image));
    }

    std::size_t total_tokens = 0;
    for (const auto& r : records) total_tokens += r.second.size();
    const auto weights = io::read_f32(dir / "attention.bin", total_tokens * kBlocksPerImage);
    dump.backend = ImportedBackend(dim);
    std::size_t offset = 0;
    for (auto& [image_id, tokens] : records) {
        if (image_id < 0 || static_cast<std::size_t>(image_id) >= n_images)
            throw FormatError(FormatErrorKind::Inconsistent, "attention record for unknown image " +
                                                                 std::to_string(image_id));
        AttentionMapSet set;
        const std::size_t n = tokens.size() * kBlocksPerImage;
        set.tokens = std::move(tokens);
        set.maps.assign(weights.begin() + static_cast<std::ptrdiff_t>(offset),
                        weights.begin() + static_cast<std::ptrdiff_t>(offset + n));
        offset += n;
        try {
            dump.backend.add(image_id, std::move(set));
        } catch (const InvalidArgument& e) {
            throw FormatError(FormatErrorKind::Inconsistent,
                              "attention record for image " + std::to_string(image_id) + ": " + e.what());
        }
    }
    return dump;
}

void save_attention_dump(const std::filesystem::path& dir, std::span<const NoiseImage> images,
                         std::span<const std::pair<std::int64_t, AttentionMapSet>> records, int dim,
                         std::uint64_t image_seed) {
    using nlohmann::json;
    if (images.empty()) throw InvalidArgument("attention dump needs at least one image");
    std::filesystem::create_directories(dir);
    std::vector<float> pixels;
    for (const auto& image : images) pixels.insert(pixels.end(), image.data.begin(), image.data.end());
    std::vector<float> weights;
    json recs = json::array();
    for (const auto& [image_id, set] : records) {
        recs.push_back({{"image_id", image_id}, {"tokens", set.tokens}});
        for (double v : set.maps) weights.push_back(static_cast<float>(v));
    }
    io::write_bytes(dir / "images.bin", io::encode_f32(pixels));
    io::write_bytes(dir / "attention.bin", io::encode_f32(weights));
    io::write_json(dir / "attention.json", json{{"format_version", 1},
                                                {"n_images", images.size()},
                                                {"channels", images.front().channels},
                                                {"image_seed", image_seed},
                                                {"d", dim},
                                                {"records", recs}});
}

} // namespace noiseforge
