#include "codcast/lbfgs.hpp"

#include "codcast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace codcast::lbfgs {

std::string to_string(Status s) {
    switch (s) {
    case Status::converged: return "converged";
    case Status::max_iterations: return "max_iterations";
    case Status::line_search_failure: return "line_search_failure";
    }
    return "unknown";
}

namespace {

// Minimizer of the cubic matching (a, fa, da) and (b, fb, db), kept inside the
// interval with a 10% margin; falls back to bisection.
double cubic_step(double a, double fa, double da, double b, double fb, double db) {
    const double lo = std::min(a, b), hi = std::max(a, b);
    const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - da * db;
    double t = 0.5 * (a + b);
    if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), b - a);
        const double den = db - da + 2.0 * d2;
        if (den != 0.0) {
            const double c = b - (b - a) * (db + d2 - d1) / den;
            if (std::isfinite(c)) t = c;
        }
    }
    const double margin = 0.1 * (hi - lo);
    if (t < lo + margin || t > hi - margin) t = 0.5 * (a + b);
    return t;
}

struct Probe {
    double step;
    double f;
    double d; // directional derivative
};

} // namespace

LineSearchResult strong_wolfe(const Objective& fn, Eigen::VectorXd& x, double& f,
                              Eigen::VectorXd& g, const Eigen::VectorXd& dir,
                              double step0, const Options& opts) {
    LineSearchResult res;
    const double f0 = f;
    const double d0 = g.dot(dir);
    if (!(d0 < 0.0)) return res;

    const Eigen::VectorXd x0 = x;
    Eigen::VectorXd gt(x.size());
    Eigen::VectorXd xt(x.size());
    auto eval = [&](double step) {
        xt = x0 + step * dir;
        const double ft = fn(xt, gt);
        ++res.evaluations;
        return Probe{step, ft, gt.dot(dir)};
    };
    auto accept = [&](const Probe& p) {
        x = xt;
        f = p.f;
        g = gt;
        res.ok = true;
        res.step = p.step;
        res.f = p.f;
    };
    auto wolfe_ok = [&](const Probe& p) {
        return p.f <= f0 + opts.c1 * p.step * d0 && std::abs(p.d) <= opts.c2 * std::abs(d0);
    };

    // zoom(lo, hi): lo satisfies sufficient decrease, the minimizer lies between.
    auto zoom = [&](Probe lo, Probe hi) {
        while (res.evaluations < opts.max_line_search_evals) {
            const double t = cubic_step(lo.step, lo.f, lo.d, hi.step, hi.f, hi.d);
            const Probe p = eval(t);
            if (!std::isfinite(p.f) || p.f > f0 + opts.c1 * t * d0 || p.f >= lo.f) {
                hi = p;
            } else {
                if (std::abs(p.d) <= opts.c2 * std::abs(d0)) {
                    accept(p);
                    return;
                }
                if (p.d * (hi.step - lo.step) >= 0.0) hi = lo;
                lo = p;
            }
            if (std::abs(hi.step - lo.step) < 1e-16 * std::max(1.0, lo.step)) break;
        }
    };

    Probe prev{0.0, f0, d0};
    double step = step0;
    for (int i = 0; res.evaluations < opts.max_line_search_evals; ++i) {
        const Probe p = eval(step);
        if (!std::isfinite(p.f) || p.f > f0 + opts.c1 * step * d0 || (i > 0 && p.f >= prev.f)) {
            zoom(prev, p);
            break;
        }
        if (wolfe_ok(p)) {
            accept(p);
            break;
        }
        if (p.d >= 0.0) {
            zoom(p, prev);
            break;
        }
        prev = p;
        step *= 2.0;
    }
    if (!res.ok) {
        x = x0;
    }
    return res;
}

Result minimize(const Objective& fn, Eigen::VectorXd x0, const Options& opts) {
    if (opts.memory < 1 || opts.max_iterations < 0 || !(opts.c1 > 0.0) ||
        !(opts.c1 < opts.c2) || !(opts.c2 < 1.0)) {
        throw InvalidConfig("lbfgs: invalid options");
    }
    Result r;
    r.x = std::move(x0);
    r.grad.resize(r.x.size());
    r.f = fn(r.x, r.grad);
    r.evaluations = 1;
    r.f_history.push_back(r.f);
    r.gnorm_history.push_back(r.grad.norm());
    const double g0 = r.grad.norm();
    const double tol = std::max(opts.grad_tol * g0, opts.grad_abs_tol);

    std::deque<Eigen::VectorXd> S, Y;
    std::deque<double> rho;
    Eigen::VectorXd dir(r.x.size());
    std::vector<double> alpha(static_cast<std::size_t>(opts.memory));

    if (g0 <= tol) {
        r.status = Status::converged;
        return r;
    }
    while (true) {
        if (r.iterations >= opts.max_iterations) {
            r.status = Status::max_iterations;
            break;
        }
        // Two-loop recursion.
        dir = -r.grad;
        const auto m = S.size();
        for (std::size_t i = m; i-- > 0;) {
            alpha[i] = rho[i] * S[i].dot(dir);
            dir -= alpha[i] * Y[i];
        }
        if (m > 0) dir *= S.back().dot(Y.back()) / Y.back().squaredNorm();
        for (std::size_t i = 0; i < m; ++i) {
            const double beta = rho[i] * Y[i].dot(dir);
            dir += (alpha[i] - beta) * S[i];
        }
        if (!(r.grad.dot(dir) < 0.0)) {
            // Lost descent (numerical noise); restart from steepest descent.
            S.clear();
            Y.clear();
            rho.clear();
            dir = -r.grad;
        }

        const double step0 = S.empty() ? std::min(1.0, 1.0 / r.grad.norm()) : 1.0;
        const Eigen::VectorXd x_old = r.x, g_old = r.grad;
        const auto ls = strong_wolfe(fn, r.x, r.f, r.grad, dir, step0, opts);
        r.evaluations += ls.evaluations;
        if (!ls.ok) {
            r.status = Status::line_search_failure;
            break;
        }
        ++r.iterations;
        r.f_history.push_back(r.f);
        r.gnorm_history.push_back(r.grad.norm());

        Eigen::VectorXd s = r.x - x_old, y = r.grad - g_old;
        const double sy = s.dot(y);
        if (sy > 1e-16 * s.norm() * y.norm()) {
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > opts.memory) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
        }
        if (r.grad.norm() <= tol) {
            r.status = Status::converged;
            break;
        }
    }
    return r;
}

} // namespace codcast::lbfgs
