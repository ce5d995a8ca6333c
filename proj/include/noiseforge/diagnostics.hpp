// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "noiseforge/compose.hpp"
#include "noiseforge/core.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace noiseforge {

struct NormalityReport {
    std::size_t n = 0;
    double mean = 0;
    double std = 0;
    /// sup |F_n(x) - Phi(x)| over all values.
    double ks_statistic = 0;
    /// 256 minus the number of distinct source blocks in the provenance.
    int duplicate_blocks = 0;
    std::vector<double> channel_mean;
    std::vector<double> channel_std;
};

double normal_cdf(double x) noexcept;

/// Exact one-sample Kolmogorov-Smirnov statistic against the standard normal.
double ks_statistic(std::span<const float> values);
double ks_statistic(std::span<const double> values);

int duplicate_blocks(const Provenance& provenance);

NormalityReport normality_report(const NoiseImage& image, const Provenance* provenance = nullptr,
                                 Exec exec = Exec::Parallel);
nlohmann::json report_to_json(const NormalityReport& report);

/// 8-bit grayscale raster, row-major.
struct GrayRaster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// Per-cell intensities of a 16x16 map: min-max scaled to 0..255, rounded;
/// a constant map is uniformly 128.
std::array<std::uint8_t, kBlocksPerImage> heatmap_levels(std::span<const double> map);

/// Each grid cell becomes a `cell_px` x `cell_px` square.
GrayRaster heatmap_raster(std::span<const double> map, int cell_px = 16);

/// Writes the heatmap raster as PNG, or binary PGM when the path ends in .pgm.
void render_heatmap(std::span<const double> map, const std::filesystem::path& out, int cell_px = 16);

void write_png(const GrayRaster& raster, const std::filesystem::path& path);
GrayRaster read_png(const std::filesystem::path& path);
void write_pgm(const GrayRaster& raster, const std::filesystem::path& path);

} // namespace noiseforge
