// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace noiseforge {

// Fixed latent geometry: a 64x64 noise image cut into a 16x16 grid of 4x4 blocks.
inline constexpr int kLatentSide = 64;
inline constexpr int kBlockSide = 4;
inline constexpr int kGridSide = kLatentSide / kBlockSide;
inline constexpr int kBlocksPerImage = kGridSide * kGridSide;
inline constexpr int kPixelsPerBlock = kBlockSide * kBlockSide;
inline constexpr int kDefaultChannels = 4;
inline constexpr double kDefaultCanvas = 512.0;

/// Selects between the OpenMP kernels and their serial reference versions.
enum class Exec { Serial, Parallel };

inline constexpr int grid_index(int row, int col) noexcept { return row * kGridSide + col; }
inline constexpr int grid_row(int index) noexcept { return index / kGridSide; }
inline constexpr int grid_col(int index) noexcept { return index % kGridSide; }

/// C x 64 x 64 latent noise, stored channel-major ([channel][row][col]).
struct NoiseImage {
    int channels = kDefaultChannels;
    std::vector<float> data;
    std::uint64_t source_seed = 0;
    std::int64_t image_id = 0;

    static NoiseImage zeros(int channels, std::int64_t image_id = 0);

    std::size_t size() const noexcept { return data.size(); }
    float& at(int c, int row, int col) {
        return data[(static_cast<std::size_t>(c) * kLatentSide + row) * kLatentSide + col];
    }
    float at(int c, int row, int col) const {
        return data[(static_cast<std::size_t>(c) * kLatentSide + row) * kLatentSide + col];
    }

    /// Throws InvalidArgument unless the tensor has C*64*64 finite values.
    void validate() const;
};

/// One 4x4 block across all channels, stored [channel][row][col].
struct PixelBlock {
    std::vector<float> data;
    std::int64_t source_image = 0;
    int grid_index = 0;

    int channels() const noexcept { return static_cast<int>(data.size() / kPixelsPerBlock); }
};

/// Axis-aligned pixel box [x, y, w, h].
struct Box {
    double x = 0;
    double y = 0;
    double w = 0;
    double h = 0;

    double area() const noexcept { return w * h; }
    bool contains(const Box& other) const noexcept;
    friend bool operator==(const Box&, const Box&) = default;
};

/// Throws InvalidArgument unless 0 <= x, y; w, h > 0 and the box fits the canvas.
void validate_box(const Box& box, double canvas);

/// A set of distinct grid cells, kept sorted ascending.
class GridRegion {
public:
    GridRegion() = default;
    explicit GridRegion(std::vector<int> cells);

    const std::vector<int>& cells() const noexcept { return cells_; }
    std::size_t area() const noexcept { return cells_.size(); }
    bool contains(int cell) const noexcept;
    bool empty() const noexcept { return cells_.empty(); }

private:
    std::vector<int> cells_;
};

/// Deterministic child seed for stream `stream` of `seed` (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// `count` i.i.d. standard-normal images; image i is drawn from derive_seed(seed, i)
/// so the result does not depend on how the work is scheduled.
std::vector<NoiseImage> sample_noise(std::uint64_t seed, int count, int channels = kDefaultChannels,
                                     Exec exec = Exec::Parallel);

/// The 256 blocks of `image` in grid-index order.
std::vector<PixelBlock> extract_blocks(const NoiseImage& image);

/// Copies block `grid_index` of `image` into `out` (size C*16).
void copy_block(const NoiseImage& image, int grid_index, std::span<float> out);

/// Writes `block` (C*16 values) into cell `grid_index` of `image`.
void place_block(NoiseImage& image, int grid_index, std::span<const float> block);

/// Inverse of extract_blocks: places every block at its grid_index.
NoiseImage assemble_blocks(std::span<const PixelBlock> blocks, int channels, std::int64_t image_id = 0);

/// Grid cells covered at least half by `box`; falls back to the cell holding the
/// box centre so the region is never empty.
GridRegion box_to_grid(const Box& box, double canvas = kDefaultCanvas);

} // namespace noiseforge
