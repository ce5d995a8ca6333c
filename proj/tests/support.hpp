// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures for the unit and acceptance tests.

#pragma once

#include "noiseforge/blockdb.hpp"
#include "noiseforge/core.hpp"
#include "noiseforge/scorer.hpp"

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

namespace nftest {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("noiseforge_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

/// Wraps a backend and counts attention_maps calls.
class CountingBackend final : public noiseforge::ScorerBackend {
public:
    explicit CountingBackend(const noiseforge::ScorerBackend& inner) : inner_(inner) {}
    noiseforge::AttentionMapSet attention_maps(const noiseforge::NoiseImage& image,
                                               std::span<const std::string> tokens) const override {
        ++calls_;
        return inner_.attention_maps(image, tokens);
    }
    noiseforge::BackendDescriptor descriptor() const override { return inner_.descriptor(); }
    int calls() const { return calls_.load(); }

private:
    const noiseforge::ScorerBackend& inner_;
    mutable std::atomic<int> calls_{0};
};

/// Synthetic database with seeded noise and the synthetic backend.
inline noiseforge::BlockDatabase synthetic_db(std::vector<std::string> categories, int n_images,
                                              std::uint64_t seed = 7) {
    const auto images = noiseforge::sample_noise(seed, n_images);
    const noiseforge::SyntheticBackend backend(seed);
    return noiseforge::build_database(backend, images, noiseforge::CategoryList(std::move(categories)));
}

/// Database with blocks from seeded noise and scores drawn uniformly from [0,1],
/// so thresholds cut every candidate set somewhere in the middle.
inline noiseforge::BlockDatabase random_score_db(std::vector<std::string> categories, int n_images,
                                                 std::uint64_t seed) {
    using namespace noiseforge;
    BlockDatabase db;
    db.manifest.n_images = static_cast<std::size_t>(n_images);
    db.manifest.categories = CategoryList(std::move(categories));
    db.manifest.backend = {"synthetic", kDefaultEmbeddingDim, seed};
    db.entries = entry_layout(db.categories().size());
    const auto images = sample_noise(seed, n_images);
    db.blocks.resize(db.block_count() * db.block_size());
    for (const auto& img : images)
        for (int cell = 0; cell < kBlocksPerImage; ++cell)
            copy_block(img, cell,
                       std::span<float>(db.blocks).subspan(
                           (static_cast<std::size_t>(img.image_id) * kBlocksPerImage + cell) * db.block_size(),
                           db.block_size()));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    db.scores.resize(db.entries.size() * db.block_count());
    for (auto& s : db.scores) s = u(rng);
    recompute_averages(db);
    return db;
}

} // namespace nftest
