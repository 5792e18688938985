#include "codcast/assimilate.hpp"
#include "codcast/errors.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

using namespace codcast;
using namespace codcast::assimilate;
using spectral::cplx;
using spectral::MeanFlow;

namespace {

constexpr double kTwoPi = 2.0 * testutil::kPi;

SpectralConfig small_cfg(int N = 4, double dt = 1e-2) {
    SpectralConfig c;
    c.Nx = N;
    c.Ny = N;
    c.Lx = 2.0;
    c.Ly = 1.5;
    c.nu = 0.05;
    c.dt = dt;
    return c;
}

CVector random_state(testutil::Rng& rng, const SpectralConfig& cfg, double amp = 1.0) {
    CVector w(cfg.modes());
    for (auto& z : w) z = cplx(amp * rng.normal(), amp * rng.normal());
    spectral::enforce_real_zero_mean(w);
    return w;
}

FitParams random_params(testutil::Rng& rng, const SpectralConfig& cfg, double amp = 1.0) {
    FitParams p;
    p.q_hat.coeffs = random_state(rng, cfg, amp);
    p.q_hat.time = 0.0;
    p.u_bar = rng.uniform(-1.0, 1.0);
    p.v_bar = rng.uniform(-1.0, 1.0);
    return p;
}

FlowObservations random_obs(testutil::Rng& rng, int r, const std::vector<double>& times) {
    FlowObservations obs;
    obs.rnx = r;
    obs.rny = r;
    for (double t : times) {
        FlowSnapshot s;
        s.t = t;
        for (int i = 0; i < r * r; ++i) {
            s.u.push_back(rng.uniform(-2.0, 2.0));
            s.v.push_back(rng.uniform(-2.0, 2.0));
        }
        obs.snapshots.push_back(std::move(s));
    }
    return obs;
}

FlowObservations synthesize(const FitParams& p, const SpectralConfig& cfg, int r,
                            const std::vector<double>& times) {
    FlowObservations obs;
    obs.rnx = r;
    obs.rny = r;
    const auto states = spectral::solve_nse(p.q_hat, {p.u_bar, p.v_bar}, cfg, times);
    for (std::size_t k = 0; k < times.size(); ++k)
        obs.snapshots.push_back(model_velocity(states[k].coeffs, p.u_bar, p.v_bar, r, r, cfg, times[k]));
    return obs;
}

// Velocity of w at (x, y) from psi = w / lambda, u = psi_y, v = -psi_x, summed mode by mode.
std::pair<double, double> direct_velocity(const CVector& w, const SpectralConfig& cfg, double x, double y) {
    const spectral::ModeIndex idx(cfg);
    cplx u = 0.0, v = 0.0;
    for (int k = 0; k < idx.size(); ++k) {
        const int n = idx.n_of(k), m = idx.m_of(k);
        if (n == 0 && m == 0) continue;
        const double kx = kTwoPi * n / cfg.Lx, ky = kTwoPi * m / cfg.Ly;
        const cplx psi = w[k] / (kx * kx + ky * ky);
        const cplx e = std::polar(1.0, kx * x + ky * y);
        u += cplx(0.0, ky) * psi * e;
        v -= cplx(0.0, kx) * psi * e;
    }
    return {u.real(), v.real()};
}

FitParams shifted(const FitParams& p, const SpectralConfig& cfg, const RVector& dq, double du, double dv,
                  double h) {
    FitParams out = p;
    out.q_hat.coeffs = spectral::unpack_real(spectral::pack_real(p.q_hat.coeffs, cfg) + h * dq, cfg);
    out.u_bar += h * du;
    out.v_bar += h * dv;
    return out;
}

double relative_directional_error(const FitParams& p, const FlowObservations& obs, const SpectralConfig& cfg,
                                  const Gradient& g, testutil::Rng& rng) {
    const double h = 1e-5;
    RVector dq(cfg.modes() - 1);
    for (auto& x : dq) x = rng.normal();
    const double du = rng.normal(), dv = rng.normal();
    const double analytic = g.grad_q.dot(dq) + g.grad_u * du + g.grad_v * dv;
    const double fd = (cost_J(shifted(p, cfg, dq, du, dv, h), obs, cfg) -
                       cost_J(shifted(p, cfg, dq, du, dv, -h), obs, cfg)) /
                      (2.0 * h);
    return std::abs(analytic - fd) / std::max(1.0, std::abs(analytic));
}

} // namespace

TEST_CASE("observations validation") {
    FlowObservations obs;
    obs.rnx = obs.rny = 4;
    CHECK_THROWS_AS(obs.validate(), InvalidConfig);
    testutil::Rng rng(1);
    obs = random_obs(rng, 4, {0.0, 0.1});
    obs.snapshots[1].u.pop_back();
    CHECK_THROWS_AS(obs.validate(), ShapeMismatch);
    obs = random_obs(rng, 4, {0.1, 0.1});
    CHECK_THROWS_AS(obs.validate(), InvalidConfig);
}

TEST_CASE("exact observations give zero cost") {
    testutil::Rng rng(2);
    const auto cfg = small_cfg();
    const auto p = random_params(rng, cfg);
    const auto obs = synthesize(p, cfg, 8, {0.0, 0.05, 0.1});
    CHECK(cost_J(p, obs, cfg) < 1e-18);
    const auto g = gradient_J(p, obs, cfg);
    CHECK(g.grad_q.norm() < 1e-12);
    CHECK(std::abs(g.grad_u) < 1e-12);
    CHECK(std::abs(g.grad_v) < 1e-12);
}

TEST_CASE("constant observations against the zero model") {
    const auto cfg = small_cfg();
    FlowObservations obs;
    obs.rnx = obs.rny = 6;
    const double c1 = 1.5, c2 = -0.5;
    for (double t : {0.0, 0.02, 0.04, 0.06})
        obs.snapshots.push_back({t, std::vector<double>(36, c1), std::vector<double>(36, c2)});
    FitParams p;
    p.q_hat.coeffs = CVector::Zero(cfg.modes());
    CHECK(cost_J(p, obs, cfg) == doctest::Approx(4.0 * (c1 * c1 + c2 * c2)).epsilon(1e-14));
}

TEST_CASE("cost matches a raster-sum oracle") {
    testutil::Rng rng(3);
    const auto cfg = small_cfg();
    const auto p = random_params(rng, cfg);
    const int r = 7;
    const std::vector<double> times{0.03, 0.07};
    const auto obs = random_obs(rng, r, times);
    const auto states = spectral::solve_nse(p.q_hat, {p.u_bar, p.v_bar}, cfg, times);
    double J = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        double acc = 0.0;
        for (int j = 0; j < r; ++j)
            for (int i = 0; i < r; ++i) {
                const auto [u, v] = direct_velocity(states[k].coeffs, cfg, i * cfg.Lx / r, j * cfg.Ly / r);
                const double ru = obs.snapshots[k].u[j * r + i] - p.u_bar - u;
                const double rv = obs.snapshots[k].v[j * r + i] - p.v_bar - v;
                acc += ru * ru + rv * rv;
            }
        J += acc / (r * r);
    }
    CHECK(cost_J(p, obs, cfg) == doctest::Approx(J).epsilon(1e-12));
}

TEST_CASE("snapshots off the time grid or before t0 are rejected") {
    testutil::Rng rng(4);
    const auto cfg = small_cfg();
    auto p = random_params(rng, cfg);
    p.q_hat.time = 0.05;
    CHECK_THROWS_AS(cost_J(p, random_obs(rng, 6, {0.0, 0.1}), cfg), InvalidConfig);
    p.q_hat.time = 0.0;
    CHECK_THROWS_AS(cost_J(p, random_obs(rng, 6, {0.015}), cfg), InvalidConfig);
}

TEST_CASE("discrete adjoint passes the gradient test") {
    testutil::Rng rng(5);
    const auto cfg = small_cfg(4, 1e-2);
    for (int trial = 0; trial < 2; ++trial) {
        const auto p = random_params(rng, cfg, 2.0);
        const auto obs = random_obs(rng, 8, {0.0, 0.05, 0.1});
        const auto g = gradient_J(p, obs, cfg);
        CHECK(g.J == doctest::Approx(cost_J(p, obs, cfg)).epsilon(1e-14));
        for (int d = 0; d < 10; ++d) CHECK(relative_directional_error(p, obs, cfg, g, rng) < 1e-6);
    }
}

TEST_CASE("gradient test with a late first snapshot") {
    testutil::Rng rng(6);
    const auto cfg = small_cfg(4, 2e-2);
    const auto p = random_params(rng, cfg, 3.0);
    const auto obs = random_obs(rng, 6, {0.1, 0.2, 0.3});
    const auto g = gradient_J(p, obs, cfg);
    for (int d = 0; d < 5; ++d) CHECK(relative_directional_error(p, obs, cfg, g, rng) < 1e-6);
}

TEST_CASE("mean-flow gradient on a zero-vorticity instance") {
    testutil::Rng rng(7);
    const auto cfg = small_cfg();
    FitParams p;
    p.q_hat.coeffs = CVector::Zero(cfg.modes());
    p.u_bar = 0.4;
    p.v_bar = -0.3;
    const auto obs = random_obs(rng, 6, {0.0, 0.04, 0.08});
    double du = 0.0, dv = 0.0;
    for (const auto& s : obs.snapshots) {
        double su = 0.0, sv = 0.0;
        for (std::size_t i = 0; i < s.u.size(); ++i) {
            su += s.u[i] - p.u_bar;
            sv += s.v[i] - p.v_bar;
        }
        du += -2.0 * su / static_cast<double>(s.u.size());
        dv += -2.0 * sv / static_cast<double>(s.v.size());
    }
    const auto g = gradient_J(p, obs, cfg);
    CHECK(g.grad_u == doctest::Approx(du).epsilon(1e-12));
    CHECK(g.grad_v == doctest::Approx(dv).epsilon(1e-12));
}

TEST_CASE("gradient unpacks to a real field") {
    testutil::Rng rng(8);
    const auto cfg = small_cfg();
    const auto p = random_params(rng, cfg);
    const auto obs = random_obs(rng, 6, {0.0, 0.05});
    const auto g = gradient_J(p, obs, cfg);
    const CVector gc = spectral::unpack_real(g.grad_q, cfg);
    CHECK(spectral::max_imaginary_residue(gc, 12, 12, cfg) < 1e-12);
}

TEST_CASE("cost is invariant under a common constant shift of flows and mean") {
    testutil::Rng rng(9);
    const auto cfg = small_cfg();
    FitParams p;
    p.q_hat.coeffs = CVector::Zero(cfg.modes());
    p.u_bar = 0.2;
    p.v_bar = 0.1;
    auto obs = random_obs(rng, 6, {0.0, 0.03, 0.06});
    const double J0 = cost_J(p, obs, cfg);
    const double a = 3.7, b = -1.2;
    for (auto& s : obs.snapshots) {
        for (auto& x : s.u) x += a;
        for (auto& x : s.v) x += b;
    }
    p.u_bar += a;
    p.v_bar += b;
    CHECK(cost_J(p, obs, cfg) == doctest::Approx(J0).epsilon(1e-12));
}

TEST_CASE("linear midpoint step on scalars") {
    using M = CMatrix;
    const CVector x0 = CVector::Constant(1, cplx(2.0, -1.0));
    const CVector zero = CVector::Zero(1);
    CHECK((step_linear_midpoint(M::Zero(1, 1), M::Zero(1, 1), zero, zero, x0, 0.3) - x0).norm() == 0.0);

    const double q = -1.7, dt = 0.2;
    const M Q = M::Constant(1, 1, q);
    const CVector x1 = step_linear_midpoint(Q, Q, zero, zero, x0, dt);
    CHECK(std::abs(x1[0] - x0[0] * (1.0 + q * dt / 2) / (1.0 - q * dt / 2)) < 1e-14);

    const CVector f = CVector::Constant(1, cplx(0.5, 0.0));
    const CVector x2 = step_linear_midpoint(M::Zero(1, 1), M::Zero(1, 1), f, f, x0, dt);
    CHECK(std::abs(x2[0] - (x0[0] + 0.5 * dt)) < 1e-14);

    const CVector back = step_linear_midpoint(Q, Q, zero, zero, x1, -dt);
    CHECK(std::abs(back[0] - x0[0]) < 1e-13);

    const M S = M::Constant(1, 1, 2.0 / dt);
    CHECK_THROWS_AS(step_linear_midpoint(S, S, zero, zero, x0, dt), SingularSystem);
}

TEST_CASE("linear midpoint with Q(t) = t is second order") {
    // x' = t x, x(0) = 1, so x(1) = exp(1/2).
    auto run = [](int n) {
        const double dt = 1.0 / n;
        CVector x = CVector::Ones(1);
        const CVector zero = CVector::Zero(1);
        for (int k = 0; k < n; ++k) {
            const CMatrix Q0 = CMatrix::Constant(1, 1, k * dt), Q1 = CMatrix::Constant(1, 1, (k + 1) * dt);
            x = step_linear_midpoint(Q0, Q1, zero, zero, x, dt);
        }
        return std::abs(x[0] - std::exp(0.5));
    };
    const double e1 = run(20), e2 = run(40), e3 = run(80);
    CHECK(e1 < 1e-3);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));
    CHECK(e2 / e3 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("continuous-adjoint gradient approaches the discrete one as dt shrinks") {
    testutil::Rng rng(10);
    std::vector<double> diffs;
    const auto base = small_cfg(4, 2e-2);
    const auto p = random_params(rng, base, 2.0);
    const auto obs = random_obs(rng, 8, {0.0, 0.2, 0.4});
    for (double dt : {2e-2, 1e-2, 5e-3}) {
        const auto cfg = small_cfg(4, dt);
        const auto gd = gradient_J(p, obs, cfg, GradientRoute::discrete_adjoint);
        const auto gc = gradient_J(p, obs, cfg, GradientRoute::continuous_adjoint);
        RVector a(gd.grad_q.size() + 2), b(gd.grad_q.size() + 2);
        a << gd.grad_q, gd.grad_u, gd.grad_v;
        b << gc.grad_q, gc.grad_u, gc.grad_v;
        diffs.push_back((a - b).norm() / a.norm());
    }
    MESSAGE("continuous vs discrete relative gap: " << diffs[0] << " " << diffs[1] << " " << diffs[2]);
    CHECK(diffs[0] < 5e-2);
    CHECK(diffs[1] < 0.65 * diffs[0]);
    CHECK(diffs[2] < 0.65 * diffs[1]);
}

TEST_CASE("inverse crime recovers the generating parameters") {
    testutil::Rng rng(11);
    const auto cfg = small_cfg(4, 2e-2);
    const auto truth = random_params(rng, cfg, 2.0);
    const auto obs = synthesize(truth, cfg, 8, {0.0, 0.1, 0.2});
    FitParams init = truth;
    for (auto& z : init.q_hat.coeffs) z *= 1.01;
    init.u_bar *= 1.01;
    init.v_bar *= 0.99;
    const double J_init = cost_J(init, obs, cfg);
    REQUIRE(J_init > 0.0);
    FitOptions opts;
    opts.lbfgs.grad_tol = 1e-8;
    const auto rep = fit_lbfgs(obs, cfg, init, opts);
    CHECK(rep.J_history.back() <= 1e-6 * J_init);
    CHECK(rep.J_history.front() == doctest::Approx(J_init));
    for (std::size_t k = 1; k < rep.J_history.size(); ++k)
        CHECK(rep.J_history[k] <= rep.J_history[k - 1] * (1.0 + 1e-12));
    CHECK(std::abs(rep.params.u_bar - truth.u_bar) < 1e-3);
    CHECK(std::abs(rep.params.v_bar - truth.v_bar) < 1e-3);
    CHECK(rep.params.q_hat.time == 0.0);
}

TEST_CASE("optimal start stops at once") {
    testutil::Rng rng(12);
    const auto cfg = small_cfg();
    const auto truth = random_params(rng, cfg);
    const auto obs = synthesize(truth, cfg, 8, {0.0, 0.05});
    const auto rep = fit_lbfgs(obs, cfg, truth);
    CHECK(rep.converged);
    CHECK(rep.iterations <= 1);
}

TEST_CASE("linear model fit converges within the quadratic bound") {
    testutil::Rng rng(13);
    auto cfg = small_cfg(4, 2e-2);
    cfg.nonlinear = false;
    const auto truth = random_params(rng, cfg);
    const auto obs = synthesize(truth, cfg, 8, {0.0, 0.1, 0.2});
    FitParams init;
    init.q_hat.coeffs = CVector::Zero(cfg.modes());
    const auto rep = fit_lbfgs(obs, cfg, init);
    CHECK(rep.converged);
    CHECK(rep.iterations <= 2 * cfg.modes());
}

TEST_CASE("fit log lists every iteration") {
    testutil::Rng rng(14);
    const auto cfg = small_cfg();
    const auto obs = random_obs(rng, 6, {0.0, 0.05});
    FitOptions opts;
    opts.lbfgs.max_iterations = 5;
    const auto rep = fit_lbfgs(obs, cfg, initial_guess(obs, cfg), opts);
    CHECK(rep.J_history.size() == static_cast<std::size_t>(rep.iterations) + 1);
    CHECK(rep.grad_norm_history.size() == rep.J_history.size());
    std::ostringstream os;
    rep.write_log(os);
    int lines = 0;
    std::string line;
    std::istringstream is(os.str());
    while (std::getline(is, line))
        if (!line.empty() && line[0] != '#') ++lines;
    CHECK(lines == static_cast<int>(rep.J_history.size()));
}

TEST_CASE("initial guess from the first snapshot") {
    const auto cfg = small_cfg();
    FlowObservations obs;
    obs.rnx = obs.rny = 8;
    obs.snapshots.push_back({0.25, std::vector<double>(64, 2.0), std::vector<double>(64, -1.0)});
    const auto p = initial_guess(obs, cfg);
    CHECK(p.u_bar == doctest::Approx(2.0));
    CHECK(p.v_bar == doctest::Approx(-1.0));
    CHECK(p.q_hat.time == 0.25);
    CHECK(p.q_hat.coeffs.norm() < 1e-12);

    // Solid-body-like shear u = -sin(2 pi y / Ly) has curl = (2 pi / Ly) cos(2 pi y / Ly).
    FlowObservations shear;
    shear.rnx = shear.rny = 32;
    FlowSnapshot s;
    for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 32; ++i) {
            s.u.push_back(-std::sin(kTwoPi * j / 32.0));
            s.v.push_back(0.0);
        }
    shear.snapshots.push_back(s);
    const auto q = initial_guess(shear, cfg).q_hat.coeffs;
    const spectral::ModeIndex idx(cfg);
    CHECK(std::abs(q[idx.index(0, 1)].real() - 0.5 * kTwoPi / cfg.Ly) < 0.02 * kTwoPi / cfg.Ly);
}
