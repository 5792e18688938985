// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "codcast/assimilate.hpp"
#include "codcast/dgadvect.hpp"
#include "codcast/geo.hpp"
#include "codcast/optflow.hpp"
#include "codcast/pipeline.hpp"
#include "codcast/run_config.hpp"
#include "codcast/spectral.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace codcast;
using spectral::CMatrix;
using spectral::CVector;
using spectral::cplx;
using spectral::SpectralConfig;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string name;
    double time_limit_s; // <= 0: no limit
    std::function<Outcome()> run;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

CVector random_state(std::mt19937_64& gen, const SpectralConfig& cfg, double amp = 1.0) {
    std::normal_distribution<double> n(0.0, amp);
    CVector w(cfg.modes());
    for (auto& z : w) z = cplx(n(gen), n(gen));
    spectral::enforce_real_zero_mean(w);
    return w;
}

assimilate::FlowObservations synthesize(const assimilate::FitParams& p, const SpectralConfig& cfg, int r,
                                        const std::vector<double>& times) {
    assimilate::FlowObservations obs;
    obs.rnx = obs.rny = r;
    const auto states = spectral::solve_nse(p.q_hat, {p.u_bar, p.v_bar}, cfg, times);
    for (std::size_t k = 0; k < times.size(); ++k)
        obs.snapshots.push_back(assimilate::model_velocity(states[k].coeffs, p.u_bar, p.v_bar, r, r, cfg, times[k]));
    return obs;
}

Outcome gradient_test() {
    SpectralConfig cfg;
    cfg.Nx = cfg.Ny = 4;
    cfg.Lx = 2.0;
    cfg.Ly = 1.5;
    cfg.nu = 0.05;
    cfg.dt = 1e-2;
    std::mt19937_64 gen(2024);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    assimilate::FitParams p;
    p.q_hat.coeffs = random_state(gen, cfg, 2.0);
    p.u_bar = 0.6;
    p.v_bar = -0.4;
    assimilate::FlowObservations obs;
    obs.rnx = obs.rny = 8;
    for (double t : {0.0, 0.05, 0.1}) {
        assimilate::FlowSnapshot s;
        s.t = t;
        for (int i = 0; i < 64; ++i) {
            s.u.push_back(u(gen));
            s.v.push_back(u(gen));
        }
        obs.snapshots.push_back(s);
    }
    const auto g = assimilate::gradient_J(p, obs, cfg);
    const double h = 1e-5;
    double worst = 0.0;
    for (int d = 0; d < 10; ++d) {
        spectral::RVector dq(cfg.modes() - 1);
        for (auto& x : dq) x = n(gen);
        const double du = n(gen), dv = n(gen);
        auto at = [&](double s) {
            auto q = p;
            q.q_hat.coeffs = spectral::unpack_real(spectral::pack_real(p.q_hat.coeffs, cfg) + s * dq, cfg);
            q.u_bar += s * du;
            q.v_bar += s * dv;
            return assimilate::cost_J(q, obs, cfg);
        };
        const double analytic = g.grad_q.dot(dq) + g.grad_u * du + g.grad_v * dv;
        const double fd = (at(h) - at(-h)) / (2.0 * h);
        worst = std::max(worst, std::abs(analytic - fd) / std::max(1.0, std::abs(analytic)));
    }
    return {worst < 1e-6, "max relative error " + fmt("%.2e", worst)};
}

Outcome taylor_green() {
    SpectralConfig cfg;
    cfg.Nx = cfg.Ny = 8;
    cfg.Lx = cfg.Ly = kTwoPi;
    cfg.nu = 1.0;
    cfg.dt = 1e-3;
    const spectral::ModeIndex idx(cfg);
    CVector w = CVector::Zero(cfg.modes());
    for (int a : {-1, 1})
        for (int b : {-1, 1}) w[idx.index(a, b)] = 0.5;
    const std::vector<double> t{1.0};
    const auto out = spectral::solve_nse({w, 0.0}, {}, cfg, t);
    // The coefficient norm is the box-normalized L2 norm of the field.
    const double err = (out[0].coeffs - std::exp(-2.0) * w).norm();
    return {err < 1e-4, "L2 error at t=1 " + fmt("%.2e", err)};
}

Outcome inviscid() {
    SpectralConfig cfg;
    cfg.Nx = cfg.Ny = 8;
    cfg.nu = 0.0;
    cfg.dt = 1e-2;
    std::mt19937_64 gen(7);
    const CVector w = random_state(gen, cfg, 3.0);
    const auto traj = spectral::integrate_steps({w, 0.0}, {0.5, -0.25}, cfg, 1000);
    double drift = 0.0;
    for (const auto& s : traj) drift = std::max(drift, std::abs(s.norm() - w.norm()) / w.norm());
    return {drift < 1e-9, "max relative norm drift " + fmt("%.2e", drift)};
}

Outcome b_oracle() {
    std::mt19937_64 gen(11);
    double worst = 0.0;
    for (int N : {2, 4}) {
        SpectralConfig cfg;
        cfg.Nx = cfg.Ny = N;
        cfg.Lx = 1.3;
        cfg.Ly = 0.8;
        const spectral::ModeIndex idx(cfg);
        const CVector w = random_state(gen, cfg);
        const CMatrix B = spectral::advection_matrix(w, cfg);
        for (int r = 0; r < idx.size(); ++r) {
            const int c = idx.n_of(r), d = idx.m_of(r);
            for (int col = 0; col < idx.size(); ++col) {
                const int n = idx.n_of(col), m = idx.m_of(col);
                cplx acc = 0.0;
                for (int p = -idx.hx(); p <= idx.hx(); ++p)
                    for (int q = -idx.hy(); q <= idx.hy(); ++q) {
                        if ((p == 0 && q == 0) || p + n != c || q + m != d) continue;
                        const double K = cfg.Lx * cfg.Ly / (p * p * cfg.Ly * cfg.Ly + q * q * cfg.Lx * cfg.Lx);
                        acc += w[idx.index(p, q)] * static_cast<double>(p * m - q * n) * K;
                    }
                worst = std::max(worst, std::abs(B(r, col) - acc));
            }
        }
    }
    return {worst < 1e-12, "max entry difference " + fmt("%.2e", worst)};
}

double rel_l2(const std::vector<double>& a, const std::vector<double>& b, const dg::DGMesh& mesh) {
    std::vector<double> d(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) d[k] = a[k] - b[k];
    return dg::l2_norm(d, mesh) / dg::l2_norm(b, mesh);
}

Outcome dg_convergence() {
    auto bump = [](double x, double y) { return std::exp(0.5 * (std::sin(kTwoPi * x) + std::cos(kTwoPi * y))); };
    std::vector<double> errs;
    for (int K : {8, 16, 32}) {
        const dg::DGMesh mesh({0.0, 1.0, 0.0, 1.0}, K, K, 3, dg::Wiring::periodic);
        const dg::FunctionSampler s([](double, double, double) { return geo::Velocity{1.0, 0.5}; });
        dg::AdvectOptions o;
        o.cfl = 0.1;
        const double T = 0.2;
        const auto out = dg::advect(dg::interpolate(mesh, bump), s, mesh, 0.0, T, o);
        const auto exact = dg::interpolate(mesh, [&](double x, double y) { return bump(x - T, y - 0.5 * T); });
        errs.push_back(rel_l2(out.values, exact.values, mesh));
    }
    const double o1 = std::log2(errs[0] / errs[1]), o2 = std::log2(errs[1] / errs[2]);

    const dg::DGMesh mesh({-1.0, 1.0, -1.0, 1.0}, 32, 32, 3);
    const auto init = dg::interpolate(mesh, [](double x, double y) {
        const double dx = x - 0.45;
        return std::exp(-(dx * dx + y * y) / (2.0 * 0.12 * 0.12));
    });
    const dg::FunctionSampler rot([](double x, double y, double) { return geo::Velocity{-kTwoPi * y, kTwoPi * x}; });
    const double rerr = rel_l2(dg::advect(init, rot, mesh, 0.0, 1.0).values, init.values, mesh);

    std::ostringstream os;
    os << "orders " << fmt("%.2f", o1) << ", " << fmt("%.2f", o2) << "; rotation error " << fmt("%.2e", rerr);
    return {std::min(o1, o2) >= 2.5 && rerr < 0.01, os.str()};
}

Outcome dg_conservation() {
    const dg::DGMesh mesh({0.0, 1.0, 0.0, 1.0}, 8, 8, 3, dg::Wiring::periodic);
    // Streamfunction psi = sin(2 pi x) sin(2 pi y) / (2 pi) plus a uniform drift.
    const dg::FunctionSampler s([](double x, double y, double) {
        return geo::Velocity{0.4 + std::sin(kTwoPi * x) * std::cos(kTwoPi * y),
                             0.2 - std::cos(kTwoPi * x) * std::sin(kTwoPi * y)};
    });
    dg::DGField f = dg::interpolate(mesh, [](double x, double y) {
        return 1.0 + std::exp(-((x - 0.3) * (x - 0.3) + (y - 0.6) * (y - 0.6)) / 0.02);
    });
    const double m0 = dg::total_mass(f, mesh);
    const double dt = 0.5 * mesh.h_min() / (7.0 * 1.6);
    double worst_step = 0.0, prev = m0;
    int steps = 0;
    for (int k = 0; k < 500; ++k) {
        dg::AdvectStats st;
        f = dg::advect(f, s, mesh, k * dt, (k + 1) * dt, {}, &st);
        steps += st.steps;
        const double m = dg::total_mass(f, mesh);
        worst_step = std::max(worst_step, std::abs(m - prev) / m0);
        prev = m;
    }
    const double total = std::abs(prev - m0) / m0;
    std::ostringstream os;
    os << steps << " steps; max per-step drift " << fmt("%.2e", worst_step) << ", total " << fmt("%.2e", total);
    return {steps >= 500 && worst_step < 1e-10, os.str()};
}

Outcome inverse_crime() {
    SpectralConfig cfg;
    cfg.Nx = cfg.Ny = 8;
    cfg.Lx = 3.0;
    cfg.Ly = 2.0;
    cfg.nu = 0.02;
    cfg.dt = 2e-2;
    std::mt19937_64 gen(99);
    assimilate::FitParams truth;
    truth.q_hat.coeffs = random_state(gen, cfg, 1.0);
    truth.u_bar = 0.8;
    truth.v_bar = -0.5;
    const auto obs = synthesize(truth, cfg, 20, {0.0, 0.1, 0.2, 0.3});
    auto init = truth;
    init.q_hat.coeffs *= 1.01;
    init.u_bar *= 1.01;
    init.v_bar *= 1.01;
    assimilate::FitOptions opts;
    opts.lbfgs.grad_tol = 1e-10;
    opts.lbfgs.max_iterations = 1000;
    const auto rep = assimilate::fit_lbfgs(obs, cfg, init, opts);
    const double reduction = rep.J_history.front() / std::max(rep.J_history.back(), 1e-300);
    const double eu = std::abs(rep.params.u_bar - truth.u_bar), ev = std::abs(rep.params.v_bar - truth.v_bar);
    std::ostringstream os;
    os << rep.iterations << " iterations (" << rep.status << "); J reduced " << fmt("%.2e", reduction)
       << "x; |du| " << fmt("%.1e", eu) << ", |dv| " << fmt("%.1e", ev);
    return {reduction >= 1e6 && eu < 1e-4 && ev < 1e-4, os.str()};
}

Outcome optical_flow() {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    struct Bump {
        double x, y, s, a;
    };
    std::vector<Bump> bumps;
    for (int k = 0; k < 50; ++k) bumps.push_back({-8 + 80 * U(gen), -8 + 80 * U(gen), 3 + 3 * U(gen), 20 + 60 * U(gen)});
    auto tex = [&](double x, double y) {
        double s = 5.0;
        for (const auto& b : bumps) s += b.a * std::exp(-0.5 * ((x - b.x) * (x - b.x) + (y - b.y) * (y - b.y)) / (b.s * b.s));
        return s;
    };
    const int n = 64;
    ScalarGrid prev(n, n), next(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            prev.at(i, j) = tex(i, j);
            next.at(i, j) = tex(i - 3.0, j);
        }
    const auto f = optflow::estimate_flow(prev, next).flow;
    double eu = 0.0, ev = 0.0;
    int cnt = 0;
    for (int j = 8; j < n - 8; ++j)
        for (int i = 8; i < n - 8; ++i) {
            eu += f.u[f.index(i, j)] - 3.0;
            ev += f.v[f.index(i, j)];
            ++cnt;
        }
    eu = std::abs(eu / cnt);
    ev = std::abs(ev / cnt);
    const auto still = optflow::estimate_flow(prev, prev).flow;
    double inf = 0.0;
    for (std::size_t k = 0; k < still.u.size(); ++k) inf = std::max({inf, std::abs(still.u[k]), std::abs(still.v[k])});
    std::ostringstream os;
    os << "mean error u " << fmt("%.3f", eu) << " px, v " << fmt("%.3f", ev) << " px; stationary max "
       << fmt("%.1e", inf);
    return {eu < 0.25 && ev < 0.25 && inf < 1e-6, os.str()};
}

Outcome end_to_end() {
    RunConfig cfg;
    cfg.forecast_horizon = 60;
    const auto out = std::filesystem::temp_directory_path() / "codcast_acceptance_pipeline";
    std::filesystem::remove_all(out);
    const auto res = pipeline::run_pipeline(cfg, out);
    const auto& rep = res.report;
    const auto find = [&](const std::string& m) {
        return static_cast<std::size_t>(std::find(rep.methods.begin(), rep.methods.end(), m) - rep.methods.begin());
    };
    const auto in = find("nse"), io = find("optical_flow"), ip = find("persistence");
    bool ok = res.evaluated && rep.timestamps.size() == 4 && in < rep.methods.size() && io < rep.methods.size() &&
              ip < rep.methods.size();
    std::ostringstream os;
    if (ok) {
        for (std::size_t k = 0; k < rep.timestamps.size(); ++k) {
            const double a = rep.rmape[in][k], b = rep.rmape[io][k], c = rep.rmape[ip][k];
            ok = ok && a <= b && b <= c;
            os << (k ? "; " : "") << pipeline::format_clock(rep.timestamps[k]) << " " << fmt("%.1f", a) << "/"
               << fmt("%.1f", b) << "/" << fmt("%.1f", c);
        }
    }
    ScalarGrid t(2, 1), p(2, 1);
    t.values = {2.0, 2.0};
    p.values = {1.0, 3.0};
    const double fixture = pipeline::rmape(t, p, {});
    ok = ok && fixture == 50.0;
    os << " (nse/optical flow/persistence); fixture " << fmt("%.1f", fixture);
    return {ok, os.str()};
}

Outcome geo_roundtrip() {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> U(-100.0, 100.0), L(-80.0, 80.0);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double a = U(gen), b = U(gen), lat = L(gen);
        const auto w = geo::transform_velocity(a, b, lat);
        const auto back = geo::inverse_transform_velocity(w.u, w.v, lat);
        worst = std::max({worst, std::abs(back.u - a) / std::max(1.0, std::abs(a)),
                          std::abs(back.v - b) / std::max(1.0, std::abs(b))});
    }
    const auto box = geo::planar_bounds(geo::GeoFrame::from_bounds(-140.0, -124.0, 39.0, 51.0, 128, 128));
    const double corner = std::max({std::abs(box.x_min + 15567.0), std::abs(box.x_max + 13788.0),
                                    std::abs(box.y_min - 4009.0), std::abs(box.y_max - 4951.0)});
    std::ostringstream os;
    os << "velocity round trip " << fmt("%.1e", worst) << "; corner offset " << fmt("%.3f", corner) << " km";
    return {worst < 1e-12 && corner < 1.0, os.str()};
}

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"gradient test", 10.0, gradient_test},
        {"Taylor-Green decay", 30.0, taylor_green},
        {"inviscid conservation", 0.0, inviscid},
        {"advection operator oracle", 0.0, b_oracle},
        {"dG convergence and rotation", 120.0, dg_convergence},
        {"dG conservation", 0.0, dg_conservation},
        {"inverse-crime recovery", 120.0, inverse_crime},
        {"optical flow sanity", 0.0, optical_flow},
        {"end-to-end ordering", 0.0, end_to_end},
        {"geo round trips", 0.0, geo_roundtrip},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.time_limit_s > 0.0 && secs > c.time_limit_s) {
            o.pass = false;
            o.detail += "; over the " + fmt("%.0f", c.time_limit_s) + " s budget";
        }
        if (!o.pass) ++failures;
        std::printf("%s [%zu] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", i + 1, c.name.c_str(), o.detail.c_str(),
                    secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
