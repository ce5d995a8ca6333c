// SPDX-License-Identifier: Apache-2.0

#include "noiseforge/core.hpp"

#include "noiseforge/error.hpp"
#include "noiseforge/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace noiseforge {

namespace {

std::size_t image_size(int channels) {
    return static_cast<std::size_t>(channels) * kLatentSide * kLatentSide;
}

void check_channels(int channels) {
    if (channels < 1) throw InvalidArgument("channel count must be positive");
}

void check_grid_index(int index) {
    if (index < 0 || index >= kBlocksPerImage)
        throw InvalidArgument("grid index " + std::to_string(index) + " outside [0, 255]");
}

} // namespace

NoiseImage NoiseImage::zeros(int channels, std::int64_t image_id) {
    check_channels(channels);
    NoiseImage image;
    image.channels = channels;
    image.image_id = image_id;
    image.data.assign(image_size(channels), 0.0f);
    return image;
}

void NoiseImage::validate() const {
    check_channels(channels);
    if (data.size() != image_size(channels)) {
        std::ostringstream msg;
        msg << "noise image holds " << data.size() << " values, expected " << image_size(channels);
        throw InvalidArgument(msg.str());
    }
    if (!std::all_of(data.begin(), data.end(), [](float v) { return std::isfinite(v); }))
        throw InvalidArgument("noise image contains non-finite values");
}

bool Box::contains(const Box& other) const noexcept {
    return other.x >= x && other.y >= y && other.x + other.w <= x + w && other.y + other.h <= y + h;
}

void validate_box(const Box& box, double canvas) {
    if (!(canvas > 0) || !std::isfinite(canvas)) throw InvalidArgument("canvas side must be positive");
    const bool finite = std::isfinite(box.x) && std::isfinite(box.y) && std::isfinite(box.w) && std::isfinite(box.h);
    if (!finite || box.x < 0 || box.y < 0 || !(box.w > 0) || !(box.h > 0) || box.x + box.w > canvas ||
        box.y + box.h > canvas) {
        std::ostringstream msg;
        msg << "box [" << box.x << ", " << box.y << ", " << box.w << ", " << box.h << "] is not inside a "
            << canvas << "x" << canvas << " canvas";
        throw InvalidArgument(msg.str());
    }
}

GridRegion::GridRegion(std::vector<int> cells) : cells_(std::move(cells)) {
    std::sort(cells_.begin(), cells_.end());
    if (std::adjacent_find(cells_.begin(), cells_.end()) != cells_.end())
        throw InvalidArgument("grid region cells must be distinct");
    for (int c : cells_) check_grid_index(c);
}

bool GridRegion::contains(int cell) const noexcept {
    return std::binary_search(cells_.begin(), cells_.end(), cell);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(seed ^ mix(stream));
}

std::vector<NoiseImage> sample_noise(std::uint64_t seed, int count, int channels, Exec exec) {
    if (count < 1) throw InvalidArgument("noise image count must be at least 1");
    check_channels(channels);
    const std::size_t size = image_size(channels);
    std::vector<float> pool(size * static_cast<std::size_t>(count));
    if (exec == Exec::Parallel)
        kernels::parallel::sample_images(seed, static_cast<std::size_t>(count), size, pool);
    else
        kernels::serial::sample_images(seed, static_cast<std::size_t>(count), size, pool);

    std::vector<NoiseImage> images(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        auto& image = images[static_cast<std::size_t>(i)];
        image.channels = channels;
        image.image_id = i;
        image.source_seed = seed;
        auto first = pool.begin() + static_cast<std::ptrdiff_t>(size * static_cast<std::size_t>(i));
        image.data.assign(first, first + static_cast<std::ptrdiff_t>(size));
    }
    return images;
}

void copy_block(const NoiseImage& image, int index, std::span<float> out) {
    check_grid_index(index);
    const int row0 = grid_row(index) * kBlockSide;
    const int col0 = grid_col(index) * kBlockSide;
    std::size_t k = 0;
    for (int c = 0; c < image.channels; ++c)
        for (int r = 0; r < kBlockSide; ++r)
            for (int q = 0; q < kBlockSide; ++q) out[k++] = image.at(c, row0 + r, col0 + q);
}

void place_block(NoiseImage& image, int index, std::span<const float> block) {
    check_grid_index(index);
    if (block.size() != static_cast<std::size_t>(image.channels) * kPixelsPerBlock)
        throw InvalidArgument("block channel count does not match the image");
    const int row0 = grid_row(index) * kBlockSide;
    const int col0 = grid_col(index) * kBlockSide;
    std::size_t k = 0;
    for (int c = 0; c < image.channels; ++c)
        for (int r = 0; r < kBlockSide; ++r)
            for (int q = 0; q < kBlockSide; ++q) image.at(c, row0 + r, col0 + q) = block[k++];
}

std::vector<PixelBlock> extract_blocks(const NoiseImage& image) {
    image.validate();
    std::vector<PixelBlock> blocks(kBlocksPerImage);
    for (int i = 0; i < kBlocksPerImage; ++i) {
        auto& block = blocks[static_cast<std::size_t>(i)];
        block.source_image = image.image_id;
        block.grid_index = i;
        block.data.resize(static_cast<std::size_t>(image.channels) * kPixelsPerBlock);
        copy_block(image, i, block.data);
    }
    return blocks;
}

NoiseImage assemble_blocks(std::span<const PixelBlock> blocks, int channels, std::int64_t image_id) {
    auto image = NoiseImage::zeros(channels, image_id);
    std::vector<bool> seen(kBlocksPerImage, false);
    for (const auto& block : blocks) {
        place_block(image, block.grid_index, block.data);
        seen[static_cast<std::size_t>(block.grid_index)] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
        throw InvalidArgument("assemble_blocks needs one block for every grid cell");
    return image;
}

GridRegion box_to_grid(const Box& box, double canvas) {
    validate_box(box, canvas);
    const double side = canvas / kGridSide;
    const double half_cell = 0.5 * side * side;
    std::vector<int> cells;
    for (int row = 0; row < kGridSide; ++row) {
        const double y0 = row * side;
        const double dy = std::min(y0 + side, box.y + box.h) - std::max(y0, box.y);
        if (dy <= 0) continue;
        for (int col = 0; col < kGridSide; ++col) {
            const double x0 = col * side;
            const double dx = std::min(x0 + side, box.x + box.w) - std::max(x0, box.x);
            if (dx > 0 && dx * dy >= half_cell) cells.push_back(grid_index(row, col));
        }
    }
    if (cells.empty()) {
        auto cell_of = [&](double v) { return std::clamp(static_cast<int>(std::floor(v / side)), 0, kGridSide - 1); };
        cells.push_back(grid_index(cell_of(box.y + 0.5 * box.h), cell_of(box.x + 0.5 * box.w)));
    }
    return GridRegion(std::move(cells));
}

} // namespace noiseforge
