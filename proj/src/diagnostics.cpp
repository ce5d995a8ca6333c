// SPDX-License-Identifier: Apache-2.0

#include "noiseforge/diagnostics.hpp"

#include "binary_io.hpp"
#include "noiseforge/error.hpp"
#include "noiseforge/kernels.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

namespace noiseforge {

namespace {

template <class T>
double ks_sorted(std::vector<T> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double cdf = normal_cdf(static_cast<double>(v[i]));
        // The ECDF jumps from i/n to (i+1)/n at v[i].
        d = std::max({d, static_cast<double>(i + 1) / n - cdf, cdf - static_cast<double>(i) / n});
    }
    return std::clamp(d, 0.0, 1.0);
}

kernels::Moments moments(std::span<const float> values, Exec exec) {
    return exec == Exec::Parallel ? kernels::parallel::moments(values) : kernels::serial::moments(values);
}

} // namespace

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_statistic(std::span<const float> values) { return ks_sorted(std::vector<float>(values.begin(), values.end())); }

double ks_statistic(std::span<const double> values) {
    return ks_sorted(std::vector<double>(values.begin(), values.end()));
}

int duplicate_blocks(const Provenance& provenance) {
    std::set<BlockRef> distinct;
    for (const auto& c : provenance) distinct.insert(c.ref());
    return kBlocksPerImage - static_cast<int>(distinct.size());
}

NormalityReport normality_report(const NoiseImage& image, const Provenance* provenance, Exec exec) {
    image.validate();
    NormalityReport r;
    r.n = image.data.size();
    const auto all = moments(image.data, exec);
    r.mean = all.mean;
    r.std = std::sqrt(all.variance);
    r.ks_statistic = ks_statistic(std::span<const float>(image.data));
    const std::size_t plane = static_cast<std::size_t>(kLatentSide) * kLatentSide;
    for (int c = 0; c < image.channels; ++c) {
        const auto m = moments(std::span<const float>(image.data).subspan(c * plane, plane), exec);
        r.channel_mean.push_back(m.mean);
        r.channel_std.push_back(std::sqrt(m.variance));
    }
    r.duplicate_blocks = provenance ? duplicate_blocks(*provenance) : 0;
    return r;
}

nlohmann::json report_to_json(const NormalityReport& r) {
    return {{"n", r.n},
            {"mean", r.mean},
            {"std", r.std},
            {"ks_statistic", r.ks_statistic},
            {"duplicate_blocks", r.duplicate_blocks},
            {"channel_mean", r.channel_mean},
            {"channel_std", r.channel_std}};
}

std::array<std::uint8_t, kBlocksPerImage> heatmap_levels(std::span<const double> map) {
    if (map.size() != kBlocksPerImage) throw InvalidArgument("heatmap needs a 16x16 map");
    for (double v : map)
        if (!std::isfinite(v)) throw InvalidArgument("heatmap values must be finite");
    std::array<std::uint8_t, kBlocksPerImage> levels{};
    const auto [lo, hi] = std::minmax_element(map.begin(), map.end());
    if (!(*hi > *lo)) {
        levels.fill(128);
        return levels;
    }
    const double range = *hi - *lo;
    for (std::size_t k = 0; k < levels.size(); ++k)
        levels[k] = static_cast<std::uint8_t>(std::lround(255.0 * (map[k] - *lo) / range));
    return levels;
}

GrayRaster heatmap_raster(std::span<const double> map, int cell_px) {
    if (cell_px < 1) throw InvalidArgument("heatmap cell size must be positive");
    const auto levels = heatmap_levels(map);
    GrayRaster r;
    r.width = r.height = kGridSide * cell_px;
    r.pixels.resize(static_cast<std::size_t>(r.width) * r.height);
    for (int y = 0; y < r.height; ++y)
        for (int x = 0; x < r.width; ++x)
            r.pixels[static_cast<std::size_t>(y) * r.width + x] =
                levels[static_cast<std::size_t>(grid_index(y / cell_px, x / cell_px))];
    return r;
}

void write_png(const GrayRaster& raster, const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(raster.width);
    image.height = static_cast<png_uint_32>(raster.height);
    image.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.c_str(), 0, raster.pixels.data(), 0, nullptr))
        throw FormatError(FormatErrorKind::Io, "cannot write " + path.string() + ": " + image.message);
}

GrayRaster read_png(const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw FormatError(FormatErrorKind::Io, "cannot read " + path.string() + ": " + image.message);
    image.format = PNG_FORMAT_GRAY;
    GrayRaster r;
    r.width = static_cast<int>(image.width);
    r.height = static_cast<int>(image.height);
    r.pixels.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, r.pixels.data(), 0, nullptr))
        throw FormatError(FormatErrorKind::Parse, "cannot decode " + path.string() + ": " + image.message);
    return r;
}

void write_pgm(const GrayRaster& raster, const std::filesystem::path& path) {
    std::string data = "P5\n" + std::to_string(raster.width) + " " + std::to_string(raster.height) + "\n255\n";
    data.append(raster.pixels.begin(), raster.pixels.end());
    io::write_text(path, data);
}

void render_heatmap(std::span<const double> map, const std::filesystem::path& out, int cell_px) {
    const auto raster = heatmap_raster(map, cell_px);
    if (out.extension() == ".pgm")
        write_pgm(raster, out);
    else
        write_png(raster, out);
}

} // namespace noiseforge
