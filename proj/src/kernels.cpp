// SPDX-License-Identifier: Apache-2.0

#include "noiseforge/kernels.hpp"

#include "noiseforge/core.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <random>
#include <vector>

namespace noiseforge::kernels {

namespace {

void fill_image(std::uint64_t seed, std::size_t index, std::span<float> out) {
    std::mt19937_64 engine(derive_seed(seed, index));
    std::normal_distribution<float> normal(0.0f, 1.0f);
    for (auto& v : out) v = normal(engine);
}

void attention_cell(const AttentionShape& s, std::size_t cell, std::span<const float> queries,
                    std::span<const double> w_query, std::span<const double> keys, std::span<double> out,
                    std::span<double> projected, std::span<double> logits) {
    const float* x = queries.data() + cell * s.features;
    for (std::size_t k = 0; k < s.dim; ++k) {
        const double* w = w_query.data() + k * s.features;
        double acc = 0;
        for (std::size_t f = 0; f < s.features; ++f) acc += w[f] * static_cast<double>(x[f]);
        projected[k] = acc;
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.dim));
    double peak = -INFINITY;
    for (std::size_t t = 0; t < s.tokens; ++t) {
        const double* key = keys.data() + t * s.dim;
        double acc = 0;
        for (std::size_t k = 0; k < s.dim; ++k) acc += projected[k] * key[k];
        logits[t] = acc * scale;
        peak = std::max(peak, logits[t]);
    }
    double total = 0;
    for (std::size_t t = 0; t < s.tokens; ++t) {
        logits[t] = std::exp(logits[t] - peak);
        total += logits[t];
    }
    for (std::size_t t = 0; t < s.tokens; ++t) out[t * s.cells + cell] = logits[t] / total;
}

template <class T, class Pred>
inline bool every_row(std::span<const std::span<const T>> rows, std::size_t b, Pred pred) {
    for (const auto& row : rows)
        if (!pred(static_cast<double>(row[b]))) return false;
    return true;
}

std::size_t mask_size(auto rows, std::span<std::uint8_t> mask) {
    for ([[maybe_unused]] const auto& row : rows) assert(row.size() == mask.size());
    return mask.size();
}

constexpr std::size_t kMomentChunk = 4096;

} // namespace

namespace serial {

void sample_images(std::uint64_t seed, std::size_t count, std::size_t image_size, std::span<float> out) {
    assert(out.size() == count * image_size);
    for (std::size_t i = 0; i < count; ++i) fill_image(seed, i, out.subspan(i * image_size, image_size));
}

void attention_softmax(const AttentionShape& shape, std::span<const float> queries,
                       std::span<const double> w_query, std::span<const double> keys,
                       std::span<double> out) {
    std::vector<double> projected(shape.dim), logits(shape.tokens);
    for (std::size_t cell = 0; cell < shape.cells; ++cell)
        attention_cell(shape, cell, queries, w_query, keys, out, projected, logits);
}

void all_greater(std::span<const std::span<const float>> rows, double threshold, std::span<std::uint8_t> mask) {
    const std::size_t n = mask_size(rows, mask);
    for (std::size_t b = 0; b < n; ++b)
        mask[b] = every_row(rows, b, [&](double v) { return v > threshold; });
}

void all_greater(std::span<const std::span<const double>> rows, double threshold, std::span<std::uint8_t> mask) {
    const std::size_t n = mask_size(rows, mask);
    for (std::size_t b = 0; b < n; ++b)
        mask[b] = every_row(rows, b, [&](double v) { return v > threshold; });
}

void all_less(std::span<const std::span<const double>> rows, double threshold, std::span<std::uint8_t> mask) {
    const std::size_t n = mask_size(rows, mask);
    for (std::size_t b = 0; b < n; ++b)
        mask[b] = every_row(rows, b, [&](double v) { return v < threshold; });
}

Moments moments(std::span<const float> values) {
    if (values.empty()) return {};
    double sum = 0;
    for (float v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double sq = 0;
    for (float v : values) {
        const double d = v - mean;
        sq += d * d;
    }
    return {mean, sq / static_cast<double>(values.size())};
}

} // namespace serial

namespace parallel {

void sample_images(std::uint64_t seed, std::size_t count, std::size_t image_size, std::span<float> out) {
    assert(out.size() == count * image_size);
    const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
        fill_image(seed, static_cast<std::size_t>(i), out.subspan(static_cast<std::size_t>(i) * image_size, image_size));
}

void attention_softmax(const AttentionShape& shape, std::span<const float> queries,
                       std::span<const double> w_query, std::span<const double> keys,
                       std::span<double> out) {
    const auto cells = static_cast<std::int64_t>(shape.cells);
#pragma omp parallel
    {
        std::vector<double> projected(shape.dim), logits(shape.tokens);
#pragma omp for schedule(static)
        for (std::int64_t cell = 0; cell < cells; ++cell)
            attention_cell(shape, static_cast<std::size_t>(cell), queries, w_query, keys, out, projected, logits);
    }
}

void all_greater(std::span<const std::span<const float>> rows, double threshold, std::span<std::uint8_t> mask) {
    const auto n = static_cast<std::int64_t>(mask_size(rows, mask));
#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < n; ++b)
        mask[b] = every_row(rows, static_cast<std::size_t>(b), [&](double v) { return v > threshold; });
}

void all_greater(std::span<const std::span<const double>> rows, double threshold, std::span<std::uint8_t> mask) {
    const auto n = static_cast<std::int64_t>(mask_size(rows, mask));
#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < n; ++b)
        mask[b] = every_row(rows, static_cast<std::size_t>(b), [&](double v) { return v > threshold; });
}

void all_less(std::span<const std::span<const double>> rows, double threshold, std::span<std::uint8_t> mask) {
    const auto n = static_cast<std::int64_t>(mask_size(rows, mask));
#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < n; ++b)
        mask[b] = every_row(rows, static_cast<std::size_t>(b), [&](double v) { return v < threshold; });
}

Moments moments(std::span<const float> values) {
    if (values.empty()) return {};
    const std::size_t chunks = (values.size() + kMomentChunk - 1) / kMomentChunk;
    std::vector<double> partial(chunks);
    const auto nchunks = static_cast<std::int64_t>(chunks);

    auto chunk_of = [&](std::int64_t c) {
        const auto begin = static_cast<std::size_t>(c) * kMomentChunk;
        return values.subspan(begin, std::min(kMomentChunk, values.size() - begin));
    };

#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < nchunks; ++c) {
        double s = 0;
        for (float v : chunk_of(c)) s += v;
        partial[c] = s;
    }
    double sum = 0;
    for (double p : partial) sum += p;
    const double mean = sum / static_cast<double>(values.size());

#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < nchunks; ++c) {
        double s = 0;
        for (float v : chunk_of(c)) {
            const double d = v - mean;
            s += d * d;
        }
        partial[c] = s;
    }
    double sq = 0;
    for (double p : partial) sq += p;
    return {mean, sq / static_cast<double>(values.size())};
}

} // namespace parallel

} // namespace noiseforge::kernels
