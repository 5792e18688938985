#include "codcast/errors.hpp"
#include "codcast/optflow.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

using namespace codcast;
using namespace codcast::optflow;

namespace {

// Smooth random texture: sum of Gaussian bumps, evaluated anywhere in the plane.
struct Texture {
    std::vector<std::array<double, 4>> bumps; // x, y, sigma, amplitude
    explicit Texture(std::uint64_t seed, int n = 40, double extent = 64.0) {
        testutil::Rng rng(seed);
        for (int k = 0; k < n; ++k) {
            bumps.push_back({rng.uniform(-8, extent + 8), rng.uniform(-8, extent + 8), rng.uniform(3.0, 6.0),
                             rng.uniform(20.0, 80.0)});
        }
    }
    double operator()(double x, double y) const {
        double s = 5.0;
        for (const auto& b : bumps) {
            const double dx = x - b[0], dy = y - b[1];
            s += b[3] * std::exp(-0.5 * (dx * dx + dy * dy) / (b[2] * b[2]));
        }
        return s;
    }
};

ScalarGrid render(int n, const std::function<double(double, double)>& f) {
    ScalarGrid g(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) g.at(i, j) = f(i, j);
    return g;
}

double median_oracle(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

} // namespace

TEST_CASE("gaussian_pyramid") {
    testutil::Rng rng(1);
    const auto img = testutil::random_grid(rng, 64, 64);
    SUBCASE("one level is the input") {
        const auto p = gaussian_pyramid(img, 1);
        REQUIRE(p.size() == 1);
        CHECK(p[0].values == img.values);
    }
    SUBCASE("sizes halve") {
        const auto p = gaussian_pyramid(img, 3);
        REQUIRE(p.size() == 3);
        CHECK(p[0].nx == 64);
        CHECK(p[1].nx == 32);
        CHECK(p[2].nx == 16);
        CHECK(p[2].ny == 16);
        CHECK(p[2].frame.nx == 16);
        CHECK(p[2].frame.dlon == doctest::Approx(4 * img.frame.dlon));
    }
    SUBCASE("constant image stays constant") {
        ScalarGrid c(40, 24, 7.25);
        for (const auto& level : gaussian_pyramid(c, 2))
            for (double v : level.values) CHECK(v == doctest::Approx(7.25).epsilon(1e-15));
    }
    SUBCASE("too small") {
        CHECK_THROWS_AS(gaussian_pyramid(ScalarGrid(20, 20), 3), TooSmall);
        CHECK_THROWS_AS(gaussian_pyramid(ScalarGrid(7, 20), 1), TooSmall);
    }
}

TEST_CASE("warp_bicubic") {
    testutil::Rng rng(2);
    const auto img = testutil::random_grid(rng, 24, 20);
    SUBCASE("zero flow is the identity") {
        const auto out = warp_bicubic(img, FlowField(24, 20));
        for (std::size_t k = 0; k < img.values.size(); ++k) CHECK(out.values[k] == doctest::Approx(img.values[k]).epsilon(1e-15));
    }
    SUBCASE("integer shift recovers the shifted image") {
        FlowField f(24, 20);
        for (auto& u : f.u) u = 3.0;
        for (auto& v : f.v) v = -2.0;
        const auto out = warp_bicubic(img, f);
        for (int j = 2; j < 20; ++j)
            for (int i = 0; i < 21; ++i) CHECK(out.at(i, j) == doctest::Approx(img.at(i + 3, j - 2)).epsilon(1e-14));
    }
    SUBCASE("quadratic surfaces are reproduced exactly") {
        auto q = [](double x, double y) { return 1.5 + 0.3 * x - 0.7 * y + 0.02 * x * x - 0.05 * x * y + 0.01 * y * y; };
        const auto g = render(24, q);
        FlowField f(24, 24);
        for (auto& u : f.u) u = 0.37;
        for (auto& v : f.v) v = -0.61;
        const auto out = warp_bicubic(g, f);
        for (int j = 3; j < 21; ++j)
            for (int i = 3; i < 21; ++i) CHECK(std::abs(out.at(i, j) - q(i + 0.37, j - 0.61)) < 1e-10);
    }
}

TEST_CASE("median_filter_flow") {
    FlowField f(9, 8);
    SUBCASE("constant flow unchanged") {
        for (auto& u : f.u) u = 1.25;
        for (auto& v : f.v) v = -0.5;
        const auto m = median_filter_flow(f, 2);
        CHECK(m.u == f.u);
        CHECK(m.v == f.v);
    }
    SUBCASE("single spike removed") {
        for (auto& u : f.u) u = 2.0;
        f.u[f.index(4, 4)] = 100.0;
        const auto m = median_filter_flow(f, 1);
        for (double u : m.u) CHECK(u == 2.0);
    }
    SUBCASE("checkerboard matches a brute-force window median") {
        for (int j = 0; j < f.ny; ++j)
            for (int i = 0; i < f.nx; ++i) {
                f.u[f.index(i, j)] = ((i + j) % 2) ? 1.0 : -1.0;
                f.v[f.index(i, j)] = 0.1 * i - 0.2 * j;
            }
        const auto m = median_filter_flow(f, 1);
        for (int j = 0; j < f.ny; ++j)
            for (int i = 0; i < f.nx; ++i) {
                std::vector<double> wu, wv;
                for (int dj = -1; dj <= 1; ++dj)
                    for (int di = -1; di <= 1; ++di) {
                        const int ii = std::clamp(i + di, 0, f.nx - 1), jj = std::clamp(j + dj, 0, f.ny - 1);
                        wu.push_back(f.u[f.index(ii, jj)]);
                        wv.push_back(f.v[f.index(ii, jj)]);
                    }
                CHECK(m.u[f.index(i, j)] == median_oracle(wu));
                CHECK(m.v[f.index(i, j)] == doctest::Approx(median_oracle(wv)).epsilon(1e-15));
            }
    }
}

TEST_CASE("estimate_flow: stationary pair gives zero flow") {
    const Texture tex(3);
    const auto img = render(64, tex);
    const auto est = estimate_flow(img, img);
    double mx = 0;
    for (std::size_t k = 0; k < img.values.size(); ++k) mx = std::max({mx, std::abs(est.flow.u[k]), std::abs(est.flow.v[k])});
    CHECK(mx < 1e-6);
}

TEST_CASE("estimate_flow: 3 px translation of a smooth blob") {
    const auto prev = testutil::blob_image(64, 64, 30.0, 32.0, 6.0);
    const auto next = testutil::blob_image(64, 64, 33.0, 32.0, 6.0);
    const auto est = estimate_flow(prev, next);
    double su = 0, sv = 0;
    int n = 0;
    for (int j = 0; j < 64; ++j)
        for (int i = 0; i < 64; ++i) {
            const double dx = i - 31.5, dy = j - 32.0;
            if (dx * dx + dy * dy > 36.0) continue; // blob support: within one sigma
            su += est.flow.u[est.flow.index(i, j)];
            sv += est.flow.v[est.flow.index(i, j)];
            ++n;
        }
    CHECK(std::abs(su / n - 3.0) < 0.25);
    CHECK(std::abs(sv / n) < 0.25);
}

TEST_CASE("estimate_flow: small rotation") {
    const Texture tex(4);
    const double a = 2.0 * testutil::kPi / 180.0, c = 31.5;
    const auto prev = render(64, tex);
    const auto next = render(64, [&](double x, double y) {
        // next(R(x - c) + c) = prev(x)
        const double dx = x - c, dy = y - c;
        return tex(c + std::cos(a) * dx + std::sin(a) * dy, c - std::sin(a) * dx + std::cos(a) * dy);
    });
    const auto est = estimate_flow(prev, next);
    double acc = 0;
    int n = 0;
    for (int j = 0; j < 64; ++j)
        for (int i = 0; i < 64; ++i) {
            const double dx = i - c, dy = j - c;
            if (dx * dx + dy * dy >= 16.0 * 16.0) continue;
            const double ut = std::cos(a) * dx - std::sin(a) * dy - dx;
            const double vt = std::sin(a) * dx + std::cos(a) * dy - dy;
            const double u = est.flow.u[est.flow.index(i, j)], v = est.flow.v[est.flow.index(i, j)];
            const double cosang = (u * ut + v * vt + 1.0) /
                                  std::sqrt((u * u + v * v + 1.0) * (ut * ut + vt * vt + 1.0));
            const double ang = std::acos(std::clamp(cosang, -1.0, 1.0)) * 180.0 / testutil::kPi;
            acc += ang * ang;
            ++n;
        }
    CHECK(std::sqrt(acc / n) < 15.0);
}

TEST_CASE("property: shift equivariance away from borders") {
    const Texture tex(5, 60, 80.0);
    const double su = 1.4, sv = -0.8; // true motion, px
    auto pair = [&](int d) {
        const auto prev = render(64, [&](double x, double y) { return tex(x + d, y + d); });
        const auto next = render(64, [&](double x, double y) { return tex(x + d - su, y + d - sv); });
        return estimate_flow(prev, next).flow;
    };
    const auto f0 = pair(0);
    for (int d : {4, 8}) {
        const auto fd = pair(d);
        double worst = 0;
        for (int j = 16; j < 48 - d; ++j)
            for (int i = 16; i < 48 - d; ++i) {
                const auto a = f0.index(i + d, j + d), b = fd.index(i, j);
                worst = std::max({worst, std::abs(f0.u[a] - fd.u[b]), std::abs(f0.v[a] - fd.v[b])});
            }
        CHECK(worst < 0.1);
    }
}

TEST_CASE("property: forward and backward flows are nearly opposite") {
    const Texture tex(6);
    const auto a = render(64, tex);
    const auto b = render(64, [&](double x, double y) { return tex(x - 1.5, y - 1.0); });
    const auto fab = estimate_flow(a, b).flow;
    const auto fba = estimate_flow(b, a).flow;
    ScalarGrid bu(64, 64), bv(64, 64);
    bu.values = fba.u;
    bv.values = fba.v;
    const auto wu = warp_bicubic(bu, fab), wv = warp_bicubic(bv, fab);
    double acc = 0;
    int n = 0;
    for (int j = 8; j < 56; ++j)
        for (int i = 8; i < 56; ++i) {
            const auto k = fab.index(i, j);
            const double du = fab.u[k] + wu.values[k], dv = fab.v[k] + wv.values[k];
            acc += du * du + dv * dv;
            ++n;
        }
    CHECK(std::sqrt(acc / n) < 0.5);
}

TEST_CASE("property: finite output for random and partly missing inputs") {
    testutil::Rng rng(10);
    for (int trial = 0; trial < 3; ++trial) {
        auto a = testutil::random_grid(rng, 40, 36, 0.0, 50.0);
        auto b = testutil::random_grid(rng, 40, 36, 0.0, 50.0);
        for (int k = 0; k < 100; ++k) {
            a.values[static_cast<std::size_t>(rng.integer(0, 40 * 36 - 1))] = std::numeric_limits<double>::quiet_NaN();
            b.values[static_cast<std::size_t>(rng.integer(0, 40 * 36 - 1))] = std::numeric_limits<double>::quiet_NaN();
        }
        const auto est = estimate_flow(a, b);
        for (std::size_t k = 0; k < est.flow.size(); ++k) {
            CHECK(std::isfinite(est.flow.u[k]));
            CHECK(std::isfinite(est.flow.v[k]));
        }
    }
}

TEST_CASE("estimate_flow rejects mismatched shapes and bad settings") {
    CHECK_THROWS_AS(estimate_flow(ScalarGrid(16, 16), ScalarGrid(16, 17)), ShapeMismatch);
    FlowConfig cfg;
    cfg.sor_omega = 2.0;
    CHECK_THROWS_AS(estimate_flow(ScalarGrid(16, 16), ScalarGrid(16, 16), cfg), InvalidConfig);
}
