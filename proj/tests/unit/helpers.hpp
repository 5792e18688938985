#pragma once

#include "codcast/raster.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace testutil {

inline constexpr double kPi = std::numbers::pi;

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform(double a = 0.0, double b = 1.0) {
        return a + (b - a) * std::uniform_real_distribution<double>(0.0, 1.0)(gen_);
    }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
    int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(gen_); }

private:
    std::mt19937_64 gen_;
};

inline codcast::ScalarGrid random_grid(Rng& rng, int nx, int ny, double lo = 0.0, double hi = 10.0) {
    codcast::ScalarGrid g(nx, ny);
    for (auto& v : g.values) v = rng.uniform(lo, hi);
    return g;
}

/// Smooth Gaussian blob image on an nx x ny raster centered at (cx, cy) pixels.
inline codcast::ScalarGrid blob_image(int nx, int ny, double cx, double cy, double sigma,
                                      double amp = 100.0, double base = 5.0) {
    codcast::ScalarGrid g(nx, ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double dx = i - cx, dy = j - cy;
            g.at(i, j) = base + amp * std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma));
        }
    return g;
}

} // namespace testutil
