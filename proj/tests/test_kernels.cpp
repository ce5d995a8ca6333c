// SPDX-License-Identifier: Apache-2.0

#include "noiseforge/core.hpp"
#include "noiseforge/kernels.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace noiseforge;
namespace k = noiseforge::kernels;

TEST_SUITE("kernels") {

TEST_CASE("sample_images serial == parallel") {
    const std::size_t size = 4 * 64 * 64;
    std::vector<float> a(size * 7), b(size * 7);
    k::serial::sample_images(11, 7, size, a);
    k::parallel::sample_images(11, 7, size, b);
    CHECK(a == b);
}

TEST_CASE("attention_softmax serial == parallel and rows sum to one") {
    const k::AttentionShape shape{256, 64, 32, 5};
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    std::vector<float> q(shape.cells * shape.features);
    for (auto& v : q) v = static_cast<float>(nd(rng));
    std::vector<double> wq(shape.dim * shape.features), keys(shape.tokens * shape.dim);
    for (auto& v : wq) v = nd(rng) / 8;
    for (auto& v : keys) v = nd(rng);
    std::vector<double> a(shape.tokens * shape.cells), b(a.size());
    k::serial::attention_softmax(shape, q, wq, keys, a);
    k::parallel::attention_softmax(shape, q, wq, keys, b);
    CHECK(a == b);
    for (std::size_t c = 0; c < shape.cells; ++c) {
        double sum = 0;
        for (std::size_t t = 0; t < shape.tokens; ++t) sum += a[t * shape.cells + c];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("threshold masks serial == parallel") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u;
    const std::size_t n = 5000;
    std::vector<std::vector<double>> store(3, std::vector<double>(n));
    std::vector<std::vector<float>> fstore(3, std::vector<float>(n));
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t i = 0; i < n; ++i) {
            store[r][i] = u(rng);
            fstore[r][i] = static_cast<float>(store[r][i]);
        }
    std::vector<std::span<const double>> rows(store.begin(), store.end());
    std::vector<std::span<const float>> frows(fstore.begin(), fstore.end());
    std::vector<std::uint8_t> a(n), b(n);
    for (double t : {0.0, 0.2, 0.5, 0.9}) {
        k::serial::all_greater(rows, t, a);
        k::parallel::all_greater(rows, t, b);
        CHECK(a == b);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(a[i] == (store[0][i] > t && store[1][i] > t && store[2][i] > t));
        k::serial::all_greater(frows, t, a);
        k::parallel::all_greater(frows, t, b);
        CHECK(a == b);
        k::serial::all_less(rows, t, a);
        k::parallel::all_less(rows, t, b);
        CHECK(a == b);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(a[i] == (store[0][i] < t && store[1][i] < t && store[2][i] < t));
    }
}

TEST_CASE("moments serial and parallel agree") {
    std::vector<float> v(100000);
    std::mt19937_64 rng(2);
    std::normal_distribution<float> nd(3.0f, 2.0f);
    for (auto& x : v) x = nd(rng);
    const auto s = k::serial::moments(v);
    const auto p = k::parallel::moments(v);
    CHECK(s.mean == doctest::Approx(p.mean).epsilon(1e-12));
    CHECK(s.variance == doctest::Approx(p.variance).epsilon(1e-12));
    CHECK(s.mean == doctest::Approx(3.0).epsilon(0.01));
    CHECK(s.variance == doctest::Approx(4.0).epsilon(0.02));
}

}
