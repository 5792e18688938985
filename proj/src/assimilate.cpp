#include "codcast/assimilate.hpp"

#include "codcast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace codcast::assimilate {

using spectral::MeanFlow;

void FlowObservations::validate() const {
    if (snapshots.empty()) throw InvalidConfig("assimilate: no flow snapshots");
    const auto n = static_cast<std::size_t>(rnx) * rny;
    for (std::size_t k = 0; k < snapshots.size(); ++k) {
        const auto& s = snapshots[k];
        if (s.u.size() != n || s.v.size() != n) {
            throw ShapeMismatch("assimilate: snapshot " + std::to_string(k) +
                                " does not match the observation raster");
        }
        if (k > 0 && !(s.t > snapshots[k - 1].t)) {
            throw InvalidConfig("assimilate: snapshot times must be strictly increasing");
        }
    }
}

namespace {

struct Forward {
    std::vector<CVector> traj;
    std::vector<int> obs_step;
};

Forward run_forward(const FitParams& p, const FlowObservations& obs, const SpectralConfig& cfg) {
    cfg.validate();
    obs.validate();
    Forward fw;
    const double t0 = p.q_hat.time;
    for (const auto& s : obs.snapshots) {
        if (s.t < t0 - 1e-12) throw InvalidConfig("assimilate: snapshot precedes q_hat.time");
        fw.obs_step.push_back(spectral::steps_between(t0, s.t, cfg.dt));
    }
    fw.traj = spectral::integrate_steps(p.q_hat, MeanFlow{p.u_bar, p.v_bar}, cfg,
                                        fw.obs_step.back());
    return fw;
}

struct Residual {
    std::vector<double> ru;
    std::vector<double> rv;
    double J = 0.0;
};

Residual residual(const CVector& w, double u_bar, double v_bar, const FlowSnapshot& s,
                  const FlowObservations& obs, const SpectralConfig& cfg) {
    const auto model = model_velocity(w, u_bar, v_bar, obs.rnx, obs.rny, cfg, s.t);
    Residual r;
    r.ru.resize(s.u.size());
    r.rv.resize(s.v.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < s.u.size(); ++i) {
        r.ru[i] = s.u[i] - model.u[i];
        r.rv[i] = s.v[i] - model.v[i];
        acc += r.ru[i] * r.ru[i] + r.rv[i] * r.rv[i];
    }
    r.J = acc / static_cast<double>(s.u.size());
    return r;
}

double mean_of(const std::vector<double>& a) {
    double s = 0.0;
    for (double x : a) s += x;
    return s / static_cast<double>(a.size());
}

// Complex gradient (dJ_k = Re <g, dw>) of one snapshot term, plus the direct
// mean-flow derivatives.
struct Source {
    CVector g;
    double du = 0.0;
    double dv = 0.0;
    double J = 0.0;
};

Source snapshot_source(const CVector& w, const FitParams& p, const FlowSnapshot& s,
                       const FlowObservations& obs, const SpectralConfig& cfg,
                       const CVector& au, const CVector& av) {
    const Residual r = residual(w, p.u_bar, p.v_bar, s, obs, cfg);
    const CVector Ru = spectral::project_coefficients(r.ru, obs.rnx, obs.rny, cfg);
    const CVector Rv = spectral::project_coefficients(r.rv, obs.rnx, obs.rny, cfg);
    Source src;
    src.g = -2.0 * (au.conjugate().cwiseProduct(Ru) + av.conjugate().cwiseProduct(Rv));
    src.du = -2.0 * mean_of(r.ru);
    src.dv = -2.0 * mean_of(r.rv);
    src.J = r.J;
    return src;
}

Gradient discrete_gradient(const FitParams& p, const FlowObservations& obs,
                           const SpectralConfig& cfg) {
    const Forward fw = run_forward(p, obs, cfg);
    const MeanFlow mean{p.u_bar, p.v_bar};
    const CVector au = spectral::velocity_multiplier_u(cfg);
    const CVector av = spectral::velocity_multiplier_v(cfg);
    const CVector Dx = spectral::mean_advection_diagonal_dx(cfg);
    const CVector Dy = spectral::mean_advection_diagonal_dy(cfg);
    const double h = 0.5 * cfg.dt;
    const auto M = static_cast<Eigen::Index>(cfg.modes());

    Gradient out;
    CVector mu = CVector::Zero(M);
    const int S = fw.obs_step.back();
    auto k = static_cast<int>(obs.snapshots.size()) - 1;
    for (int t = S; t >= 0; --t) {
        if (t < S) {
            // mu = T_t^* mu_{t+1} with T_t = L_t^{-1} (R_t - h N(w_t + w_{t+1})).
            const CVector& w0 = fw.traj[static_cast<std::size_t>(t)];
            const CVector& w1 = fw.traj[static_cast<std::size_t>(t) + 1];
            const CMatrix G = spectral::generator(w0, mean, cfg);
            const Eigen::PartialPivLU<CMatrix> lu(CMatrix::Identity(M, M) + h * G);
            const CVector z = lu.adjoint().solve(mu);
            const CVector s = w0 + w1;
            out.grad_u += z.dot(-h * Dx.cwiseProduct(s)).real();
            out.grad_v += z.dot(-h * Dy.cwiseProduct(s)).real();
            mu = z - h * (G.adjoint() * z);
            if (cfg.nonlinear) mu -= h * (spectral::advection_jacobian(s, cfg).adjoint() * z);
        }
        while (k >= 0 && fw.obs_step[static_cast<std::size_t>(k)] == t) {
            const auto src = snapshot_source(fw.traj[static_cast<std::size_t>(t)], p,
                                             obs.snapshots[static_cast<std::size_t>(k)], obs,
                                             cfg, au, av);
            mu += src.g;
            out.grad_u += src.du;
            out.grad_v += src.dv;
            out.J += src.J;
            --k;
        }
    }
    out.grad_q = spectral::pack_gradient(mu, cfg);
    return out;
}

// Jacobian of w -> -G(w) w: -(B(w) + N(w) + B(mean) + nu A).
CMatrix linearized_generator(const CVector& w, const MeanFlow& mean, const SpectralConfig& cfg) {
    if (!cfg.nonlinear) return -spectral::generator(w, mean, cfg);
    return -(spectral::generator(w, mean, cfg) + spectral::advection_jacobian(w, cfg));
}

Gradient continuous_gradient(const FitParams& p, const FlowObservations& obs,
                             const SpectralConfig& cfg) {
    const Forward fw = run_forward(p, obs, cfg);
    const MeanFlow mean{p.u_bar, p.v_bar};
    const CVector au = spectral::velocity_multiplier_u(cfg);
    const CVector av = spectral::velocity_multiplier_v(cfg);
    const CVector Dx = spectral::mean_advection_diagonal_dx(cfg);
    const CVector Dy = spectral::mean_advection_diagonal_dy(cfg);
    const auto M = static_cast<Eigen::Index>(cfg.modes());
    const int S = fw.obs_step.back();

    std::vector<CMatrix> jac;
    jac.reserve(static_cast<std::size_t>(S) + 1);
    for (const auto& w : fw.traj) jac.push_back(linearized_generator(w, mean, cfg));

    std::vector<Source> sources;
    for (std::size_t k = 0; k < obs.snapshots.size(); ++k) {
        sources.push_back(snapshot_source(fw.traj[static_cast<std::size_t>(fw.obs_step[k])], p,
                                          obs.snapshots[k], obs, cfg, au, av));
    }

    Gradient out;
    // Adjoint: lambda' = -Jac^* lambda, integrated backward, jumps at snapshots.
    CVector lambda = CVector::Zero(M);
    const CVector zero = CVector::Zero(M);
    auto k = static_cast<int>(obs.snapshots.size()) - 1;
    for (int t = S; t >= 0; --t) {
        if (t < S) {
            const CMatrix Q1 = -jac[static_cast<std::size_t>(t) + 1].adjoint();
            const CMatrix Q0 = -jac[static_cast<std::size_t>(t)].adjoint();
            lambda = step_linear_midpoint(Q1, Q0, zero, zero, lambda, -cfg.dt);
        }
        while (k >= 0 && fw.obs_step[static_cast<std::size_t>(k)] == t) {
            lambda += sources[static_cast<std::size_t>(k)].g;
            --k;
        }
    }
    out.grad_q = spectral::pack_gradient(lambda, cfg);

    // Tangents: w' = Jac w - D w_model, w(t0) = 0.
    CVector wu = CVector::Zero(M), wv = CVector::Zero(M);
    std::size_t next = 0;
    for (int t = 0; t <= S; ++t) {
        if (t > 0) {
            const auto a = static_cast<std::size_t>(t) - 1, b = static_cast<std::size_t>(t);
            wu = step_linear_midpoint(jac[a], jac[b], -Dx.cwiseProduct(fw.traj[a]),
                                      -Dx.cwiseProduct(fw.traj[b]), wu, cfg.dt);
            wv = step_linear_midpoint(jac[a], jac[b], -Dy.cwiseProduct(fw.traj[a]),
                                      -Dy.cwiseProduct(fw.traj[b]), wv, cfg.dt);
        }
        while (next < sources.size() && fw.obs_step[next] == t) {
            const auto& src = sources[next];
            out.grad_u += src.g.dot(wu).real() + src.du;
            out.grad_v += src.g.dot(wv).real() + src.dv;
            out.J += src.J;
            ++next;
        }
    }
    return out;
}

} // namespace

FlowSnapshot model_velocity(const CVector& w, double u_bar, double v_bar, int rnx, int rny,
                            const SpectralConfig& cfg, double t) {
    const auto vel = spectral::vorticity_to_velocity(w, cfg);
    FlowSnapshot s;
    s.t = t;
    s.u = spectral::evaluate_coefficients(vel.u, rnx, rny, cfg);
    s.v = spectral::evaluate_coefficients(vel.v, rnx, rny, cfg);
    for (auto& x : s.u) x += u_bar;
    for (auto& x : s.v) x += v_bar;
    return s;
}

double cost_J(const FitParams& params, const FlowObservations& obs, const SpectralConfig& cfg) {
    const Forward fw = run_forward(params, obs, cfg);
    double J = 0.0;
    for (std::size_t k = 0; k < obs.snapshots.size(); ++k) {
        J += residual(fw.traj[static_cast<std::size_t>(fw.obs_step[k])], params.u_bar,
                      params.v_bar, obs.snapshots[k], obs, cfg)
                 .J;
    }
    return J;
}

Gradient gradient_J(const FitParams& params, const FlowObservations& obs,
                    const SpectralConfig& cfg, GradientRoute route) {
    return route == GradientRoute::discrete_adjoint ? discrete_gradient(params, obs, cfg)
                                                    : continuous_gradient(params, obs, cfg);
}

CVector step_linear_midpoint(const CMatrix& Q0, const CMatrix& Q1, const CVector& f0,
                             const CVector& f1, const CVector& x0, double dt) {
    const auto n = x0.size();
    const CMatrix Qa = 0.5 * (Q0 + Q1);
    const CMatrix lhs = CMatrix::Identity(n, n) - (0.5 * dt) * Qa;
    const CVector rhs = x0 + (0.5 * dt) * (Qa * x0) + (0.5 * dt) * (f0 + f1);
    const Eigen::PartialPivLU<CMatrix> lu(lhs);
    CVector x1 = lu.solve(rhs);
    if (!x1.allFinite() || lu.rcond() < 1e-14) {
        throw SingularSystem("linear midpoint system is singular");
    }
    return x1;
}

void FitReport::write_log(std::ostream& os) const {
    os << "# iteration J grad_norm\n";
    for (std::size_t i = 0; i < J_history.size(); ++i) {
        os << i << ' ' << J_history[i] << ' ' << grad_norm_history[i] << '\n';
    }
    os << "# status " << status << " iterations " << iterations << '\n';
}

FitReport fit_lbfgs(const FlowObservations& obs, const SpectralConfig& cfg,
                    const FitParams& init, const FitOptions& opts) {
    cfg.validate();
    obs.validate();
    const auto nq = static_cast<Eigen::Index>(cfg.modes() - 1);
    const spectral::ModeIndex idx(cfg);
    const RVector lam = spectral::laplacian_eigenvalues(cfg);
    RVector scale = RVector::Ones(nq);
    if (opts.precondition) {
        for (int k = idx.center() + 1, j = 0; k < idx.size(); ++k, j += 2) {
            scale[j] = scale[j + 1] = std::sqrt(lam[k]);
        }
    }
    const double t0 = init.q_hat.time;

    auto to_params = [&](const Eigen::VectorXd& theta) {
        FitParams p;
        p.q_hat.coeffs = spectral::unpack_real(scale.cwiseProduct(theta.head(nq)), cfg);
        p.q_hat.time = t0;
        p.u_bar = theta[nq];
        p.v_bar = theta[nq + 1];
        return p;
    };

    Eigen::VectorXd theta(nq + 2);
    CVector q0 = init.q_hat.coeffs;
    spectral::enforce_real_zero_mean(q0);
    theta.head(nq) = spectral::pack_real(q0, cfg).cwiseQuotient(scale);
    theta[nq] = init.u_bar;
    theta[nq + 1] = init.v_bar;

    const lbfgs::Objective fn = [&](const Eigen::VectorXd& th, Eigen::VectorXd& g) {
        const Gradient gr = gradient_J(to_params(th), obs, cfg);
        g.head(nq) = gr.grad_q.cwiseProduct(scale);
        g[nq] = gr.grad_u;
        g[nq + 1] = gr.grad_v;
        return gr.J;
    };

    const lbfgs::Result res = lbfgs::minimize(fn, theta, opts.lbfgs);
    FitReport rep;
    rep.params = to_params(res.x);
    rep.J_history = res.f_history;
    rep.grad_norm_history = res.gnorm_history;
    rep.iterations = res.iterations;
    rep.converged = res.converged();
    rep.status = lbfgs::to_string(res.status);
    return rep;
}

FitParams initial_guess(const FlowObservations& obs, const SpectralConfig& cfg) {
    obs.validate();
    const auto& s = obs.snapshots.front();
    const int nx = obs.rnx, ny = obs.rny;
    const double dx = cfg.Lx / nx, dy = cfg.Ly / ny;
    auto at = [&](const std::vector<double>& f, int i, int j) {
        return f[static_cast<std::size_t>(j) * nx + i];
    };
    // Central differences inside, one-sided at the raster edges (data need not be periodic).
    auto diff = [](double fm, double fp, double h, int span) { return (fp - fm) / (span * h); };
    std::vector<double> vort(static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int il = std::max(i - 1, 0), ir = std::min(i + 1, nx - 1);
            const int jl = std::max(j - 1, 0), jr = std::min(j + 1, ny - 1);
            const double vx = diff(at(s.v, il, j), at(s.v, ir, j), dx, ir - il);
            const double uy = diff(at(s.u, i, jl), at(s.u, i, jr), dy, jr - jl);
            vort[static_cast<std::size_t>(j) * nx + i] = vx - uy;
        }
    }
    FitParams p;
    p.q_hat = spectral::project_field(vort, nx, ny, cfg, s.t);
    p.u_bar = mean_of(s.u);
    p.v_bar = mean_of(s.v);
    return p;
}

} // namespace codcast::assimilate
