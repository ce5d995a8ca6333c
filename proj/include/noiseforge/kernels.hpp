// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel inner loops. Every kernel has a plain serial version, kept as
// the reference the tests compare against, and an OpenMP version. Both write
// into caller-owned buffers and produce identical results for any thread count,
// except `moments` whose parallel reduction is chunked and may differ from the
// serial sum in the last bits.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace noiseforge::kernels {

struct Moments {
    double mean = 0;
    double variance = 0; // population variance
};

/// Shapes for one attention evaluation: `cells` query rows of `features`
/// values each, projected to `dim`, against `tokens` keys already in `dim`.
struct AttentionShape {
    std::size_t cells = 0;
    std::size_t features = 0;
    std::size_t dim = 0;
    std::size_t tokens = 0;
};

namespace serial {

/// Fills `out` with `count` consecutive images of `image_size` standard-normal
/// values, image i seeded with derive_seed(seed, i).
void sample_images(std::uint64_t seed, std::size_t count, std::size_t image_size, std::span<float> out);

/// softmax_t((W_q x_cell) . key_t / sqrt(dim)) for every cell.
/// queries: cells x features; w_query: dim x features; keys: tokens x dim;
/// out: tokens x cells (token-major, so each token's map is contiguous).
void attention_softmax(const AttentionShape& shape, std::span<const float> queries,
                       std::span<const double> w_query, std::span<const double> keys,
                       std::span<double> out);

/// mask[b] = 1 iff rows[r][b] > threshold for every row r.
void all_greater(std::span<const std::span<const float>> rows, double threshold, std::span<std::uint8_t> mask);
void all_greater(std::span<const std::span<const double>> rows, double threshold, std::span<std::uint8_t> mask);

/// mask[b] = 1 iff rows[r][b] < threshold for every row r.
void all_less(std::span<const std::span<const double>> rows, double threshold, std::span<std::uint8_t> mask);

Moments moments(std::span<const float> values);

} // namespace serial

namespace parallel {

void sample_images(std::uint64_t seed, std::size_t count, std::size_t image_size, std::span<float> out);
void attention_softmax(const AttentionShape& shape, std::span<const float> queries,
                       std::span<const double> w_query, std::span<const double> keys,
                       std::span<double> out);
void all_greater(std::span<const std::span<const float>> rows, double threshold, std::span<std::uint8_t> mask);
void all_greater(std::span<const std::span<const double>> rows, double threshold, std::span<std::uint8_t> mask);
void all_less(std::span<const std::span<const double>> rows, double threshold, std::span<std::uint8_t> mask);
Moments moments(std::span<const float> values);

} // namespace parallel

} // namespace noiseforge::kernels
