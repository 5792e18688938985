#include "codcast/dgadvect.hpp"

#include "codcast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace codcast::dg {

namespace {

// P_N(x) and P_N'(x) by the three-term recurrence.
std::pair<double, double> legendre(int N, double x) {
    double p0 = 1.0, p1 = x;
    if (N == 0) return {1.0, 0.0};
    for (int k = 2; k <= N; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    const double dp = N * (x * p1 - p0) / (x * x - 1.0);
    return {p1, dp};
}

double bilinear(const std::vector<double>& f, int nx, int ny, double fi, double fj,
                double missing) {
    fi = std::clamp(fi, 0.0, static_cast<double>(nx - 1));
    fj = std::clamp(fj, 0.0, static_cast<double>(ny - 1));
    const int i0 = std::min(static_cast<int>(std::floor(fi)), std::max(nx - 2, 0));
    const int j0 = std::min(static_cast<int>(std::floor(fj)), std::max(ny - 2, 0));
    const int i1 = std::min(i0 + 1, nx - 1), j1 = std::min(j0 + 1, ny - 1);
    const double a = fi - i0, b = fj - j0;
    auto val = [&](int i, int j) {
        const double x = f[static_cast<std::size_t>(j) * nx + i];
        return std::isfinite(x) ? x : missing;
    };
    return (1 - a) * (1 - b) * val(i0, j0) + a * (1 - b) * val(i1, j0) +
           (1 - a) * b * val(i0, j1) + a * b * val(i1, j1);
}

} // namespace

std::pair<std::vector<double>, std::vector<double>> lgl_nodes_weights(int N) {
    if (N < 1) throw InvalidOrder("polynomial order must be at least 1");
    std::vector<double> x(static_cast<std::size_t>(N) + 1), w(x.size());
    x.front() = -1.0;
    x.back() = 1.0;
    for (int k = 1; k < N; ++k) {
        double r = -std::cos(std::numbers::pi * k / N);
        for (int it = 0; it < 100; ++it) {
            const auto [p, dp] = legendre(N, r);
            const double d2p = (2.0 * r * dp - N * (N + 1.0) * p) / (1.0 - r * r);
            const double step = dp / d2p;
            r -= step;
            if (std::abs(step) < 1e-16) break;
        }
        x[static_cast<std::size_t>(k)] = r;
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double p = legendre(N, x[k]).first;
        w[k] = 2.0 / (N * (N + 1.0) * p * p);
    }
    return {x, w};
}

namespace {

std::vector<double> barycentric_weights(std::span<const double> nodes) {
    std::vector<double> b(nodes.size(), 1.0);
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (k != j) b[j] /= nodes[j] - nodes[k];
        }
    }
    return b;
}

} // namespace

Eigen::MatrixXd differentiation_matrix(std::span<const double> nodes) {
    const auto n = static_cast<Eigen::Index>(nodes.size());
    const auto b = barycentric_weights(nodes);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double diag = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
            D(i, j) = (b[uj] / b[ui]) / (nodes[ui] - nodes[uj]);
            diag -= D(i, j);
        }
        D(i, i) = diag;
    }
    return D;
}

std::vector<double> lagrange_values(std::span<const double> nodes, double xi) {
    std::vector<double> out(nodes.size(), 0.0);
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        if (xi == nodes[j]) {
            out[j] = 1.0;
            return out;
        }
    }
    const auto b = barycentric_weights(nodes);
    double denom = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        out[j] = b[j] / (xi - nodes[j]);
        denom += out[j];
    }
    for (auto& v : out) v /= denom;
    return out;
}

Domain domain_of(const geo::GeoFrame& frame) {
    const auto box = geo::planar_bounds(frame);
    return {box.x_min, box.x_max, box.y_min, box.y_max};
}

FluxVariant flux_variant_from_string(const std::string& s) {
    if (s == "jump") return FluxVariant::jump;
    if (s == "paper") return FluxVariant::paper;
    throw InvalidConfig("unknown flux variant '" + s + "' (expected jump or paper)");
}

std::string to_string(FluxVariant f) { return f == FluxVariant::jump ? "jump" : "paper"; }

DGMesh::DGMesh(const Domain& domain, int Kx, int Ky, int N, Wiring wiring)
    : domain_(domain), Kx_(Kx), Ky_(Ky), N_(N), wiring_(wiring) {
    if (N < 1) throw InvalidOrder("polynomial order must be at least 1");
    if (Kx < 1 || Ky < 1) throw InvalidConfig("element counts must be at least 1");
    if (!(domain.width() > 0.0) || !(domain.height() > 0.0)) {
        throw InvalidConfig("mesh domain must have positive extent");
    }
    hx_ = domain.width() / Kx;
    hy_ = domain.height() / Ky;
    std::tie(r_, w_) = lgl_nodes_weights(N);
    D_ = differentiation_matrix(r_);
    xs_.resize(static_cast<std::size_t>(gx()));
    ys_.resize(static_cast<std::size_t>(gy()));
    for (int e = 0; e < Kx; ++e) {
        for (int i = 0; i < np(); ++i) {
            xs_[static_cast<std::size_t>(e * np() + i)] =
                domain.x0 + hx_ * (e + 0.5 * (r_[static_cast<std::size_t>(i)] + 1.0));
        }
    }
    for (int e = 0; e < Ky; ++e) {
        for (int j = 0; j < np(); ++j) {
            ys_[static_cast<std::size_t>(e * np() + j)] =
                domain.y0 + hy_ * (e + 0.5 * (r_[static_cast<std::size_t>(j)] + 1.0));
        }
    }
    qw_.resize(size());
    const double jac = 0.25 * hx_ * hy_;
    for (int gyi = 0; gyi < gy(); ++gyi) {
        for (int gxi = 0; gxi < gx(); ++gxi) {
            qw_[static_cast<std::size_t>(gyi) * gx() + gxi] =
                jac * w_[static_cast<std::size_t>(gxi % np())] *
                w_[static_cast<std::size_t>(gyi % np())];
        }
    }
}

Eigen::MatrixXd DGMesh::mass_1d() const {
    return Eigen::Map<const Eigen::VectorXd>(w_.data(), np()).asDiagonal();
}

Eigen::MatrixXd DGMesh::stiffness_1d() const { return mass_1d() * D_; }

Eigen::MatrixXd DGMesh::element_mass() const {
    const int n = np() * np();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < np(); ++j) {
        for (int i = 0; i < np(); ++i) {
            M(j * np() + i, j * np() + i) = 0.25 * hx_ * hy_ *
                                            w_[static_cast<std::size_t>(i)] *
                                            w_[static_cast<std::size_t>(j)];
        }
    }
    return M;
}

DGField interpolate(const DGMesh& mesh, const std::function<double(double, double)>& f,
                    double time) {
    DGField out;
    out.time = time;
    out.values.resize(mesh.size());
    for (int j = 0; j < mesh.gy(); ++j) {
        for (int i = 0; i < mesh.gx(); ++i) {
            out.values[static_cast<std::size_t>(j) * mesh.gx() + i] =
                f(mesh.xs()[static_cast<std::size_t>(i)], mesh.ys()[static_cast<std::size_t>(j)]);
        }
    }
    return out;
}

double total_mass(const DGField& field, const DGMesh& mesh) {
    if (field.values.size() != mesh.size()) throw ShapeMismatch("field does not match mesh");
    double s = 0.0;
    for (std::size_t k = 0; k < field.values.size(); ++k) s += mesh.node_weights()[k] * field.values[k];
    return s;
}

double l2_norm(std::span<const double> values, const DGMesh& mesh) {
    if (values.size() != mesh.size()) throw ShapeMismatch("values do not match mesh");
    double s = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) s += mesh.node_weights()[k] * values[k] * values[k];
    return std::sqrt(s);
}

void VelocitySampler::sample_grid(std::span<const double> xs, std::span<const double> ys,
                                  double t, std::vector<double>& u,
                                  std::vector<double>& v) const {
    u.resize(xs.size() * ys.size());
    v.resize(u.size());
    for (std::size_t j = 0; j < ys.size(); ++j) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const auto w = at(xs[i], ys[j], t);
            u[j * xs.size() + i] = w.u;
            v[j * xs.size() + i] = w.v;
        }
    }
}

FrozenFlowSampler::FrozenFlowSampler(FlowField flow_kmh) : flow_(std::move(flow_kmh)) {
    if (flow_.units != FlowUnits::km_per_hour) {
        throw InvalidConfig("frozen flow must be in km/h");
    }
    if (flow_.nx < 1 || flow_.ny < 1 || flow_.u.size() != flow_.size() ||
        flow_.v.size() != flow_.size() || flow_.size() != static_cast<std::size_t>(flow_.nx) * flow_.ny) {
        throw ShapeMismatch("frozen flow has inconsistent dimensions");
    }
    flow_.frame.nx = flow_.nx;
    flow_.frame.ny = flow_.ny;
}

geo::Velocity FrozenFlowSampler::at(double x, double y, double) const {
    const auto [fi, fj] = geo::xy_to_pixel(flow_.frame, x, y);
    return {bilinear(flow_.u, flow_.nx, flow_.ny, fi, fj, 0.0),
            bilinear(flow_.v, flow_.nx, flow_.ny, fi, fj, 0.0)};
}

void FrozenFlowSampler::sample_grid(std::span<const double> xs, std::span<const double> ys,
                                    double, std::vector<double>& u,
                                    std::vector<double>& v) const {
    // lon depends on x only and lat on y only, so pixel coordinates separate.
    const auto ref = geo::lonlat_to_xy(flow_.frame, flow_.frame.lon_min, flow_.frame.lat_min);
    std::vector<double> fi(xs.size()), fj(ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) fi[i] = geo::xy_to_pixel(flow_.frame, xs[i], ref.y).first;
    for (std::size_t j = 0; j < ys.size(); ++j) fj[j] = geo::xy_to_pixel(flow_.frame, ref.x, ys[j]).second;
    u.resize(xs.size() * ys.size());
    v.resize(u.size());
    for (std::size_t j = 0; j < ys.size(); ++j) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            u[j * xs.size() + i] = bilinear(flow_.u, flow_.nx, flow_.ny, fi[i], fj[j], 0.0);
            v[j * xs.size() + i] = bilinear(flow_.v, flow_.nx, flow_.ny, fi[i], fj[j], 0.0);
        }
    }
}

TrajectorySampler::TrajectorySampler(std::vector<spectral::SpectralState> states,
                                     spectral::MeanFlow mean, spectral::SpectralConfig cfg,
                                     double x_origin, double y_origin)
    : states_(std::move(states)), mean_(mean), cfg_(cfg), x0_(x_origin), y0_(y_origin) {
    cfg_.validate();
    if (states_.empty()) throw InvalidConfig("trajectory sampler needs at least one state");
    for (std::size_t k = 0; k < states_.size(); ++k) {
        if (k > 0 && !(states_[k].time > states_[k - 1].time)) {
            throw InvalidConfig("trajectory times must be strictly increasing");
        }
        vel_.push_back(spectral::vorticity_to_velocity(states_[k].coeffs, cfg_));
    }
}

TrajectorySampler::Bracket TrajectorySampler::bracket(double t) const {
    if (t <= states_.front().time) return {0, 0, 0.0};
    if (t >= states_.back().time) return {states_.size() - 1, states_.size() - 1, 0.0};
    const auto it = std::upper_bound(states_.begin(), states_.end(), t,
                                     [](double tt, const auto& s) { return tt < s.time; });
    const auto b = static_cast<std::size_t>(it - states_.begin());
    const auto a = b - 1;
    return {a, b, (t - states_[a].time) / (states_[b].time - states_[a].time)};
}

geo::Velocity TrajectorySampler::at(double x, double y, double t) const {
    const auto br = bracket(t);
    const double xs[1] = {x - x0_}, ys[1] = {y - y0_};
    auto eval = [&](std::size_t k) {
        return geo::Velocity{spectral::evaluate_tensor(vel_[k].u, xs, ys, cfg_)[0],
                             spectral::evaluate_tensor(vel_[k].v, xs, ys, cfg_)[0]};
    };
    const auto va = eval(br.a), vb = eval(br.b);
    return {mean_.u_bar + (1 - br.s) * va.u + br.s * vb.u,
            mean_.v_bar + (1 - br.s) * va.v + br.s * vb.v};
}

const std::pair<std::vector<double>, std::vector<double>>& TrajectorySampler::grid_velocity(
    std::size_t k, std::span<const double> xs, std::span<const double> ys) const {
    const bool same = cache_xs_.size() == xs.size() && cache_ys_.size() == ys.size() &&
                      std::equal(xs.begin(), xs.end(), cache_xs_.begin()) &&
                      std::equal(ys.begin(), ys.end(), cache_ys_.begin());
    if (!same) {
        cache_.clear();
        cache_xs_.assign(xs.begin(), xs.end());
        cache_ys_.assign(ys.begin(), ys.end());
    }
    auto it = cache_.find(k);
    if (it != cache_.end()) return it->second;
    std::vector<double> rx(xs.size()), ry(ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) rx[i] = xs[i] - x0_;
    for (std::size_t j = 0; j < ys.size(); ++j) ry[j] = ys[j] - y0_;
    auto u = spectral::evaluate_tensor(vel_[k].u, rx, ry, cfg_);
    auto v = spectral::evaluate_tensor(vel_[k].v, rx, ry, cfg_);
    for (auto& x : u) x += mean_.u_bar;
    for (auto& x : v) x += mean_.v_bar;
    return cache_.emplace(k, std::make_pair(std::move(u), std::move(v))).first->second;
}

void TrajectorySampler::sample_grid(std::span<const double> xs, std::span<const double> ys,
                                    double t, std::vector<double>& u,
                                    std::vector<double>& v) const {
    const auto br = bracket(t);
    const auto& A = grid_velocity(br.a, xs, ys);
    const auto& B = grid_velocity(br.b, xs, ys);
    u.resize(A.first.size());
    v.resize(A.first.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
        u[k] = (1 - br.s) * A.first[k] + br.s * B.first[k];
        v[k] = (1 - br.s) * A.second[k] + br.s * B.second[k];
    }
}

double lax_friedrichs_flux(double C_i, double C_e, geo::Velocity u_i, geo::Velocity u_e,
                           double nx, double ny, FluxVariant variant) {
    const double un_i = nx * u_i.u + ny * u_i.v;
    const double un_e = nx * u_e.u + ny * u_e.v;
    const double cs = std::max(std::abs(un_i), std::abs(un_e));
    const double central = 0.5 * (un_i * C_i + un_e * C_e);
    if (variant == FluxVariant::jump) return central + 0.5 * cs * (C_i - C_e);
    return central + 0.5 * cs * (un_i - un_e);
}

void AdvectOptions::validate() const {
    if (!(cfl > 0.0 && cfl <= 1.0)) throw InvalidConfig("cfl must lie in (0, 1]");
    if (!std::isfinite(inflow_value)) throw InvalidConfig("inflow value must be finite");
}

namespace {

std::vector<double> rhs_sampled(const std::vector<double>& C, const std::vector<double>& u,
                                const std::vector<double>& v, const DGMesh& mesh,
                                const AdvectOptions& opts) {
    const int np = mesh.np(), N = mesh.N(), Kx = mesh.Kx(), Ky = mesh.Ky();
    const auto& w = mesh.ref_weights();
    const auto& D = mesh.D();
    const double ax = 2.0 / mesh.hx(), ay = 2.0 / mesh.hy();
    const bool periodic = mesh.wiring() == Wiring::periodic;
    std::vector<double> out(C.size(), 0.0);
    std::vector<double> F(static_cast<std::size_t>(np));

    auto face = [&](std::size_t in, std::ptrdiff_t ex_idx, double nx, double ny) {
        const geo::Velocity ui{u[in], v[in]};
        if (ex_idx >= 0) {
            const auto e = static_cast<std::size_t>(ex_idx);
            return lax_friedrichs_flux(C[in], C[e], ui, {u[e], v[e]}, nx, ny, opts.flux);
        }
        const double un = nx * ui.u + ny * ui.v;
        const double Ce = un < 0.0 ? opts.inflow_value : C[in];
        return lax_friedrichs_flux(C[in], Ce, ui, ui, nx, ny, opts.flux);
    };

    for (int ey = 0; ey < Ky; ++ey) {
        for (int ex = 0; ex < Kx; ++ex) {
            // Volume terms.
            for (int j = 0; j < np; ++j) {
                for (int q = 0; q < np; ++q) {
                    const auto k = mesh.index(ex, ey, q, j);
                    F[static_cast<std::size_t>(q)] = u[k] * C[k];
                }
                for (int i = 0; i < np; ++i) {
                    double s = 0.0;
                    for (int q = 0; q < np; ++q) s += w[static_cast<std::size_t>(q)] * D(q, i) * F[static_cast<std::size_t>(q)];
                    out[mesh.index(ex, ey, i, j)] += ax * s / w[static_cast<std::size_t>(i)];
                }
            }
            for (int i = 0; i < np; ++i) {
                for (int q = 0; q < np; ++q) {
                    const auto k = mesh.index(ex, ey, i, q);
                    F[static_cast<std::size_t>(q)] = v[k] * C[k];
                }
                for (int j = 0; j < np; ++j) {
                    double s = 0.0;
                    for (int q = 0; q < np; ++q) s += w[static_cast<std::size_t>(q)] * D(q, j) * F[static_cast<std::size_t>(q)];
                    out[mesh.index(ex, ey, i, j)] += ay * s / w[static_cast<std::size_t>(j)];
                }
            }
            // Surface terms.
            const double lx = ax / w[0], rx = ax / w[static_cast<std::size_t>(N)];
            const double ly = ay / w[0], ry = ay / w[static_cast<std::size_t>(N)];
            const int exl = ex > 0 ? ex - 1 : (periodic ? Kx - 1 : -1);
            const int exr = ex < Kx - 1 ? ex + 1 : (periodic ? 0 : -1);
            const int eyl = ey > 0 ? ey - 1 : (periodic ? Ky - 1 : -1);
            const int eyr = ey < Ky - 1 ? ey + 1 : (periodic ? 0 : -1);
            auto nb = [&](int exn, int eyn, int i, int j) -> std::ptrdiff_t {
                if (exn < 0 || eyn < 0) return -1;
                return static_cast<std::ptrdiff_t>(mesh.index(exn, eyn, i, j));
            };
            for (int j = 0; j < np; ++j) {
                const auto kl = mesh.index(ex, ey, 0, j);
                out[kl] -= lx * face(kl, nb(exl, ey, N, j), -1.0, 0.0);
                const auto kr = mesh.index(ex, ey, N, j);
                out[kr] -= rx * face(kr, nb(exr, ey, 0, j), 1.0, 0.0);
            }
            for (int i = 0; i < np; ++i) {
                const auto kb = mesh.index(ex, ey, i, 0);
                out[kb] -= ly * face(kb, nb(ex, eyl, i, N), 0.0, -1.0);
                const auto kt = mesh.index(ex, ey, i, N);
                out[kt] -= ry * face(kt, nb(ex, eyr, i, 0), 0.0, 1.0);
            }
        }
    }
    return out;
}

void check_congruent(const DGField& field, const DGMesh& mesh) {
    if (field.values.size() != mesh.size()) throw ShapeMismatch("field does not match mesh");
}

} // namespace

std::vector<double> rhs(const DGField& field, const VelocitySampler& sampler,
                        const DGMesh& mesh, double t, const AdvectOptions& opts) {
    check_congruent(field, mesh);
    std::vector<double> u, v;
    sampler.sample_grid(mesh.xs(), mesh.ys(), t, u, v);
    return rhs_sampled(field.values, u, v, mesh, opts);
}

DGField advect(const DGField& initial, const VelocitySampler& sampler, const DGMesh& mesh,
               double t0, double t1, const AdvectOptions& opts, AdvectStats* stats) {
    opts.validate();
    check_congruent(initial, mesh);
    if (t1 < t0) throw InvalidConfig("advect: t1 must not precede t0");
    double init_max = std::abs(opts.inflow_value);
    for (double c : initial.values) {
        if (!std::isfinite(c)) throw BlowUp("advect: non-finite initial value");
        init_max = std::max(init_max, std::abs(c));
    }
    const double limit = 1e6 * init_max;

    std::vector<double> C = initial.values, C1(C.size()), C2(C.size());
    std::vector<double> u, v;
    double t = t0;
    const double eps = 1e-12 * std::max(1.0, std::abs(t1));
    AdvectStats st;
    auto L = [&](const std::vector<double>& X, double tt) {
        sampler.sample_grid(mesh.xs(), mesh.ys(), tt, u, v);
        return rhs_sampled(X, u, v, mesh, opts);
    };
    while (t < t1 - eps) {
        sampler.sample_grid(mesh.xs(), mesh.ys(), t, u, v);
        double speed = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k) speed = std::max(speed, std::hypot(u[k], v[k]));
        if (!std::isfinite(speed)) throw BlowUp("advect: non-finite velocity");
        st.max_speed = std::max(st.max_speed, speed);
        double dt = t1 - t;
        if (speed > 0.0) dt = std::min(dt, opts.cfl * mesh.h_min() / ((2 * mesh.N() + 1) * speed));

        const auto k1 = rhs_sampled(C, u, v, mesh, opts);
        for (std::size_t k = 0; k < C.size(); ++k) C1[k] = C[k] + dt * k1[k];
        const auto k2 = L(C1, t + dt);
        for (std::size_t k = 0; k < C.size(); ++k) C2[k] = 0.75 * C[k] + 0.25 * (C1[k] + dt * k2[k]);
        const auto k3 = L(C2, t + 0.5 * dt);
        for (std::size_t k = 0; k < C.size(); ++k) {
            C[k] = C[k] / 3.0 + 2.0 / 3.0 * (C2[k] + dt * k3[k]);
            if (!std::isfinite(C[k]) || (limit > 0.0 && std::abs(C[k]) > limit)) {
                throw BlowUp("advect: solution exceeded 1e6 times its initial magnitude");
            }
        }
        t = (t1 - (t + dt) <= eps) ? t1 : t + dt;
        ++st.steps;
    }
    if (stats) *stats = st;
    return {std::move(C), t1};
}

DGField grid_to_dg(const ScalarGrid& grid, const DGMesh& mesh, double missing_value) {
    if (grid.values.size() != static_cast<std::size_t>(grid.nx) * grid.ny || grid.nx < 1 || grid.ny < 1) {
        throw ShapeMismatch("grid_to_dg: inconsistent raster");
    }
    geo::GeoFrame frame = grid.frame;
    frame.nx = grid.nx;
    frame.ny = grid.ny;
    const auto ref = geo::lonlat_to_xy(frame, frame.lon_min, frame.lat_min);
    const double tol = 1e-6;
    std::vector<double> fi(mesh.xs().size()), fj(mesh.ys().size());
    for (std::size_t i = 0; i < fi.size(); ++i) {
        fi[i] = geo::xy_to_pixel(frame, mesh.xs()[i], ref.y).first;
        if (fi[i] < -tol || fi[i] > grid.nx - 1 + tol) throw DomainMismatch("mesh extends beyond the raster in x");
    }
    for (std::size_t j = 0; j < fj.size(); ++j) {
        fj[j] = geo::xy_to_pixel(frame, ref.x, mesh.ys()[j]).second;
        if (fj[j] < -tol || fj[j] > grid.ny - 1 + tol) throw DomainMismatch("mesh extends beyond the raster in y");
    }
    DGField out;
    out.values.resize(mesh.size());
    for (std::size_t j = 0; j < fj.size(); ++j) {
        for (std::size_t i = 0; i < fi.size(); ++i) {
            out.values[j * fi.size() + i] = bilinear(grid.values, grid.nx, grid.ny, fi[i], fj[j], missing_value);
        }
    }
    return out;
}

ScalarGrid dg_to_grid(const DGField& field, const DGMesh& mesh, const geo::GeoFrame& frame) {
    check_congruent(field, mesh);
    const auto& dom = mesh.domain();
    const double tolx = 1e-6 * std::max(1.0, dom.width()), toly = 1e-6 * std::max(1.0, dom.height());
    struct Axis {
        int e;
        std::vector<double> l;
    };
    auto locate = [&](double p, double lo, double hi, double h, int K, double tol) {
        if (p < lo - tol || p > hi + tol) throw DomainMismatch("raster extends beyond the mesh");
        const int e = std::clamp(static_cast<int>(std::floor((p - lo) / h)), 0, K - 1);
        const double xi = std::clamp(2.0 * (p - (lo + e * h)) / h - 1.0, -1.0, 1.0);
        return Axis{e, lagrange_values(mesh.ref_nodes(), xi)};
    };
    std::vector<Axis> ax, ay;
    for (int i = 0; i < frame.nx; ++i) {
        const double x = geo::lonlat_to_xy(frame, frame.lon_at(i), frame.lat_min).x;
        ax.push_back(locate(x, dom.x0, dom.x1, mesh.hx(), mesh.Kx(), tolx));
    }
    for (int j = 0; j < frame.ny; ++j) {
        const double y = geo::lonlat_to_xy(frame, frame.lon_min, frame.lat_at(j)).y;
        ay.push_back(locate(y, dom.y0, dom.y1, mesh.hy(), mesh.Ky(), toly));
    }
    ScalarGrid out(frame.nx, frame.ny);
    out.frame = frame;
    const int np = mesh.np();
    for (int j = 0; j < frame.ny; ++j) {
        const auto& Y = ay[static_cast<std::size_t>(j)];
        for (int i = 0; i < frame.nx; ++i) {
            const auto& X = ax[static_cast<std::size_t>(i)];
            double s = 0.0;
            for (int b = 0; b < np; ++b) {
                double row = 0.0;
                for (int a = 0; a < np; ++a) {
                    row += X.l[static_cast<std::size_t>(a)] * field.values[mesh.index(X.e, Y.e, a, b)];
                }
                s += Y.l[static_cast<std::size_t>(b)] * row;
            }
            out.at(i, j) = s;
        }
    }
    return out;
}

} // namespace codcast::dg
