#include "codcast/spectral.hpp"

#include "codcast/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace codcast::spectral {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// e^{s 2 pi i k / n}, with k reduced mod n so large products keep full accuracy.
cplx root_of_unity(long long k, long long n, double sign) {
    long long r = k % n;
    if (r < 0) r += n;
    const double ang = sign * kTwoPi * static_cast<double>(r) / static_cast<double>(n);
    return {std::cos(ang), std::sin(ang)};
}

void check_raster(int rnx, int rny, const SpectralConfig& cfg) {
    if (rnx <= cfg.Nx || rny <= cfg.Ny) {
        throw ShapeMismatch("spectral raster " + std::to_string(rnx) + "x" +
                            std::to_string(rny) + " cannot resolve modes up to " +
                            std::to_string(cfg.Nx / 2) + "," + std::to_string(cfg.Ny / 2));
    }
}

// K_pq = Lx Ly / (p^2 Ly^2 + q^2 Lx^2) over the mode box, 0 at the mean mode.
RVector kernel_table(const SpectralConfig& cfg, const ModeIndex& idx) {
    RVector K(idx.size());
    for (int k = 0; k < idx.size(); ++k) {
        const double p = idx.n_of(k), q = idx.m_of(k);
        const double den = p * p * cfg.Ly * cfg.Ly + q * q * cfg.Lx * cfg.Lx;
        K[k] = den > 0.0 ? cfg.Lx * cfg.Ly / den : 0.0;
    }
    return K;
}

} // namespace

void SpectralConfig::validate() const {
    if (Nx < 2 || Ny < 2 || Nx % 2 != 0 || Ny % 2 != 0) {
        throw InvalidConfig("spectral: Nx, Ny must be even and >= 2");
    }
    if (!(Lx > 0.0) || !(Ly > 0.0)) throw InvalidConfig("spectral: Lx, Ly must be > 0");
    if (!(dt > 0.0)) throw InvalidConfig("spectral: dt must be > 0");
    if (!(nu >= 0.0)) throw InvalidConfig("spectral: nu must be >= 0");
}

ModeIndex::ModeIndex(const SpectralConfig& cfg) : hx_(cfg.Nx / 2), hy_(cfg.Ny / 2) {}

void enforce_real(CVector& w) {
    const auto n = w.size();
    for (Eigen::Index k = 0; k < n / 2; ++k) {
        const auto j = n - 1 - k;
        const cplx avg = 0.5 * (w[k] + std::conj(w[j]));
        w[k] = avg;
        w[j] = std::conj(avg);
    }
    w[n / 2] = w[n / 2].real();
}

void enforce_real_zero_mean(CVector& w) {
    enforce_real(w);
    w[w.size() / 2] = 0.0;
}

RVector laplacian_eigenvalues(const SpectralConfig& cfg) {
    const ModeIndex idx(cfg);
    RVector lam(idx.size());
    const double ax = kTwoPi / cfg.Lx, ay = kTwoPi / cfg.Ly;
    for (int k = 0; k < idx.size(); ++k) {
        const double n = idx.n_of(k), m = idx.m_of(k);
        lam[k] = ax * ax * n * n + ay * ay * m * m;
    }
    return lam;
}

CVector project_coefficients(std::span<const double> values, int rnx, int rny,
                             const SpectralConfig& cfg) {
    check_raster(rnx, rny, cfg);
    if (values.size() != static_cast<std::size_t>(rnx) * rny) {
        throw ShapeMismatch("project: raster length != rnx*rny");
    }
    const ModeIndex idx(cfg);
    const int hx = idx.hx(), hy = idx.hy();
    // Row transforms: rowsum[j][n] = sum_i f(i,j) e^{-2 pi i n i / rnx}.
    std::vector<cplx> rowsum(static_cast<std::size_t>(rny) * (2 * hx + 1));
    for (int j = 0; j < rny; ++j) {
        for (int n = -hx; n <= hx; ++n) {
            cplx s = 0.0;
            for (int i = 0; i < rnx; ++i) {
                s += values[static_cast<std::size_t>(j) * rnx + i] *
                     root_of_unity(static_cast<long long>(n) * i, rnx, -1.0);
            }
            rowsum[static_cast<std::size_t>(j) * (2 * hx + 1) + (n + hx)] = s;
        }
    }
    CVector c(idx.size());
    const double inv = 1.0 / (static_cast<double>(rnx) * rny);
    for (int n = -hx; n <= hx; ++n) {
        for (int m = -hy; m <= hy; ++m) {
            cplx s = 0.0;
            for (int j = 0; j < rny; ++j) {
                s += rowsum[static_cast<std::size_t>(j) * (2 * hx + 1) + (n + hx)] *
                     root_of_unity(static_cast<long long>(m) * j, rny, -1.0);
            }
            c[idx.index(n, m)] = s * inv;
        }
    }
    return c;
}

SpectralState project_field(std::span<const double> values, int rnx, int rny,
                            const SpectralConfig& cfg, double time) {
    SpectralState s;
    s.coeffs = project_coefficients(values, rnx, rny, cfg);
    enforce_real_zero_mean(s.coeffs);
    s.time = time;
    return s;
}

namespace {

// Complex series on the uniform raster, y-outer.
std::vector<cplx> evaluate_complex(const CVector& coeffs, int rnx, int rny,
                                   const SpectralConfig& cfg) {
    const ModeIndex idx(cfg);
    if (coeffs.size() != idx.size()) throw ShapeMismatch("evaluate: coefficient count");
    const int hx = idx.hx(), hy = idx.hy();
    std::vector<cplx> out(static_cast<std::size_t>(rnx) * rny);
    std::vector<cplx> partial(static_cast<std::size_t>(2 * hx + 1));
    for (int j = 0; j < rny; ++j) {
        for (int n = -hx; n <= hx; ++n) {
            cplx s = 0.0;
            for (int m = -hy; m <= hy; ++m) {
                s += coeffs[idx.index(n, m)] *
                     root_of_unity(static_cast<long long>(m) * j, rny, 1.0);
            }
            partial[static_cast<std::size_t>(n + hx)] = s;
        }
        for (int i = 0; i < rnx; ++i) {
            cplx s = 0.0;
            for (int n = -hx; n <= hx; ++n) {
                s += partial[static_cast<std::size_t>(n + hx)] *
                     root_of_unity(static_cast<long long>(n) * i, rnx, 1.0);
            }
            out[static_cast<std::size_t>(j) * rnx + i] = s;
        }
    }
    return out;
}

} // namespace

std::vector<double> evaluate_coefficients(const CVector& coeffs, int rnx, int rny,
                                          const SpectralConfig& cfg) {
    const auto z = evaluate_complex(coeffs, rnx, rny, cfg);
    std::vector<double> out(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) out[k] = z[k].real();
    return out;
}

std::vector<double> evaluate_field(const SpectralState& state, int rnx, int rny,
                                   const SpectralConfig& cfg) {
    return evaluate_coefficients(state.coeffs, rnx, rny, cfg);
}

double max_imaginary_residue(const CVector& coeffs, int rnx, int rny,
                             const SpectralConfig& cfg) {
    double r = 0.0;
    for (const auto& z : evaluate_complex(coeffs, rnx, rny, cfg)) r = std::max(r, std::abs(z.imag()));
    return r;
}

std::vector<double> evaluate_tensor(const CVector& coeffs, std::span<const double> xs,
                                    std::span<const double> ys, const SpectralConfig& cfg) {
    const ModeIndex idx(cfg);
    if (coeffs.size() != idx.size()) throw ShapeMismatch("evaluate_tensor: coefficient count");
    const int hx = idx.hx(), hy = idx.hy();
    const int wn = 2 * hx + 1, wm = 2 * hy + 1;
    // Basis values e^{2 pi i n x / Lx} built by repeated multiplication of the first harmonic.
    auto harmonics = [](double theta, int h, std::vector<cplx>& out) {
        out.assign(static_cast<std::size_t>(2 * h + 1), 1.0);
        const cplx e1(std::cos(theta), std::sin(theta));
        cplx e = 1.0;
        for (int n = 1; n <= h; ++n) {
            e *= e1;
            out[static_cast<std::size_t>(h + n)] = e;
            out[static_cast<std::size_t>(h - n)] = std::conj(e);
        }
    };
    std::vector<cplx> ex(static_cast<std::size_t>(xs.size()) * wn);
    std::vector<cplx> tmp;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        harmonics(kTwoPi * xs[i] / cfg.Lx, hx, tmp);
        std::copy(tmp.begin(), tmp.end(), ex.begin() + static_cast<std::ptrdiff_t>(i * wn));
    }
    std::vector<double> out(xs.size() * ys.size());
    std::vector<cplx> partial(static_cast<std::size_t>(wn));
    for (std::size_t j = 0; j < ys.size(); ++j) {
        harmonics(kTwoPi * ys[j] / cfg.Ly, hy, tmp);
        for (int n = 0; n < wn; ++n) {
            cplx s = 0.0;
            const auto base = static_cast<Eigen::Index>(n) * wm;
            for (int m = 0; m < wm; ++m) s += coeffs[base + m] * tmp[static_cast<std::size_t>(m)];
            partial[static_cast<std::size_t>(n)] = s;
        }
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double s = 0.0;
            const cplx* e = ex.data() + i * wn;
            for (int n = 0; n < wn; ++n) {
                const cplx& a = partial[static_cast<std::size_t>(n)];
                s += a.real() * e[n].real() - a.imag() * e[n].imag();
            }
            out[j * xs.size() + i] = s;
        }
    }
    return out;
}

CMatrix advection_matrix(const CVector& w, const SpectralConfig& cfg) {
    const ModeIndex idx(cfg);
    const RVector K = kernel_table(cfg, idx);
    const int M = idx.size();
    CMatrix B = CMatrix::Zero(M, M);
    for (int col = 0; col < M; ++col) {
        const int n = idx.n_of(col), m = idx.m_of(col);
        for (int row = 0; row < M; ++row) {
            const int c = idx.n_of(row), d = idx.m_of(row);
            const int p = c - n, q = d - m;
            if (!idx.contains(p, q)) continue;
            const int pq = idx.index(p, q);
            const double coef = static_cast<double>(c * m - d * n) * K[pq];
            if (coef != 0.0) B(row, col) = w[pq] * coef;
        }
    }
    return B;
}

CVector apply_advection(const CVector& w, const CVector& a, const SpectralConfig& cfg) {
    const ModeIndex idx(cfg);
    const RVector K = kernel_table(cfg, idx);
    const int M = idx.size();
    CVector out = CVector::Zero(M);
    for (int row = 0; row < M; ++row) {
        const int c = idx.n_of(row), d = idx.m_of(row);
        cplx s = 0.0;
        for (int col = 0; col < M; ++col) {
            const int n = idx.n_of(col), m = idx.m_of(col);
            const int p = c - n, q = d - m;
            if (!idx.contains(p, q)) continue;
            const int pq = idx.index(p, q);
            s += w[pq] * (static_cast<double>(c * m - d * n) * K[pq]) * a[col];
        }
        out[row] = s;
    }
    return out;
}

CMatrix advection_jacobian(const CVector& s, const SpectralConfig& cfg) {
    const ModeIndex idx(cfg);
    const RVector K = kernel_table(cfg, idx);
    const int M = idx.size();
    CMatrix N = CMatrix::Zero(M, M);
    for (int col = 0; col < M; ++col) {
        const int p = idx.n_of(col), q = idx.m_of(col);
        if (K[col] == 0.0) continue;
        for (int row = 0; row < M; ++row) {
            const int c = idx.n_of(row), d = idx.m_of(row);
            if (!idx.contains(c - p, d - q)) continue;
            const double coef = static_cast<double>(p * d - q * c) * K[col];
            if (coef != 0.0) N(row, col) = coef * s[idx.index(c - p, d - q)];
        }
    }
    return N;
}

CVector mean_advection_diagonal(const MeanFlow& mean, const SpectralConfig& cfg) {
    return mean.u_bar * mean_advection_diagonal_dx(cfg) +
           mean.v_bar * mean_advection_diagonal_dy(cfg);
}

CVector mean_advection_diagonal_dx(const SpectralConfig& cfg) {
    const ModeIndex idx(cfg);
    CVector d(idx.size());
    for (int k = 0; k < idx.size(); ++k) d[k] = cplx(0.0, kTwoPi * idx.n_of(k) / cfg.Lx);
    return d;
}

CVector mean_advection_diagonal_dy(const SpectralConfig& cfg) {
    const ModeIndex idx(cfg);
    CVector d(idx.size());
    for (int k = 0; k < idx.size(); ++k) d[k] = cplx(0.0, kTwoPi * idx.m_of(k) / cfg.Ly);
    return d;
}

CMatrix generator(const CVector& w, const MeanFlow& mean, const SpectralConfig& cfg) {
    CMatrix G = cfg.nonlinear ? advection_matrix(w, cfg)
                              : CMatrix::Zero(cfg.modes(), cfg.modes()).eval();
    const CVector dm = mean_advection_diagonal(mean, cfg);
    const RVector lam = laplacian_eigenvalues(cfg);
    for (Eigen::Index k = 0; k < G.rows(); ++k) G(k, k) += dm[k] + cfg.nu * lam[k];
    return G;
}

SpectralState step_implicit_midpoint(const SpectralState& state, const MeanFlow& mean,
                                     const SpectralConfig& cfg) {
    const CMatrix G = generator(state.coeffs, mean, cfg);
    const auto M = G.rows();
    const double h = 0.5 * cfg.dt;
    const CMatrix lhs = CMatrix::Identity(M, M) + h * G;
    const CVector rhs = state.coeffs - h * (G * state.coeffs);
    const Eigen::PartialPivLU<CMatrix> lu(lhs);
    SpectralState next;
    next.coeffs = lu.solve(rhs);
    if (!next.coeffs.allFinite() || lu.rcond() < 1e-14) {
        throw SingularSystem("implicit midpoint system is singular");
    }
    enforce_real_zero_mean(next.coeffs);
    next.time = state.time + cfg.dt;
    return next;
}

int steps_between(double t0, double t1, double dt) {
    const double r = (t1 - t0) / dt;
    const double n = std::round(r);
    if (n < 0.0 || std::abs(r - n) > 1e-6 * std::max(1.0, std::abs(r))) {
        throw InvalidConfig("time step " + std::to_string(dt) + " does not divide the gap [" +
                            std::to_string(t0) + ", " + std::to_string(t1) + "]");
    }
    return static_cast<int>(n);
}

std::vector<CVector> integrate_steps(const SpectralState& q, const MeanFlow& mean,
                                     const SpectralConfig& cfg, int nsteps) {
    cfg.validate();
    std::vector<CVector> traj;
    traj.reserve(static_cast<std::size_t>(nsteps) + 1);
    SpectralState s = q;
    enforce_real_zero_mean(s.coeffs);
    traj.push_back(s.coeffs);
    for (int t = 0; t < nsteps; ++t) {
        s = step_implicit_midpoint(s, mean, cfg);
        traj.push_back(s.coeffs);
    }
    return traj;
}

std::vector<SpectralState> solve_nse(const SpectralState& q_hat, const MeanFlow& mean,
                                     const SpectralConfig& cfg,
                                     std::span<const double> t_grid) {
    cfg.validate();
    std::vector<SpectralState> out;
    SpectralState s = q_hat;
    enforce_real_zero_mean(s.coeffs);
    double t = q_hat.time;
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        if (k > 0 && !(t_grid[k] > t_grid[k - 1])) {
            throw InvalidConfig("solve_nse: t_grid must be strictly increasing");
        }
        const int n = steps_between(t, t_grid[k], cfg.dt);
        for (int i = 0; i < n; ++i) s = step_implicit_midpoint(s, mean, cfg);
        t = t_grid[k];
        s.time = t;
        out.push_back(s);
    }
    return out;
}

CVector velocity_multiplier_u(const SpectralConfig& cfg) {
    const ModeIndex idx(cfg);
    const RVector lam = laplacian_eigenvalues(cfg);
    CVector a(idx.size());
    for (int k = 0; k < idx.size(); ++k) {
        a[k] = lam[k] > 0.0 ? cplx(0.0, kTwoPi * idx.m_of(k) / (cfg.Ly * lam[k])) : cplx(0.0);
    }
    return a;
}

CVector velocity_multiplier_v(const SpectralConfig& cfg) {
    const ModeIndex idx(cfg);
    const RVector lam = laplacian_eigenvalues(cfg);
    CVector a(idx.size());
    for (int k = 0; k < idx.size(); ++k) {
        a[k] = lam[k] > 0.0 ? cplx(0.0, -kTwoPi * idx.n_of(k) / (cfg.Lx * lam[k])) : cplx(0.0);
    }
    return a;
}

VelocityCoeffs vorticity_to_velocity(const CVector& w, const SpectralConfig& cfg) {
    return {velocity_multiplier_u(cfg).cwiseProduct(w), velocity_multiplier_v(cfg).cwiseProduct(w)};
}

CVector curl(const VelocityCoeffs& vel, const SpectralConfig& cfg) {
    return mean_advection_diagonal_dx(cfg).cwiseProduct(vel.v) -
           mean_advection_diagonal_dy(cfg).cwiseProduct(vel.u);
}

double l2_norm(const CVector& w) { return w.norm(); }

RVector pack_real(const CVector& w, const SpectralConfig& cfg) {
    const ModeIndex idx(cfg);
    const int c = idx.center();
    RVector x(idx.size() - 1);
    for (int k = c + 1, j = 0; k < idx.size(); ++k, j += 2) {
        x[j] = std::numbers::sqrt2 * w[k].real();
        x[j + 1] = std::numbers::sqrt2 * w[k].imag();
    }
    return x;
}

CVector unpack_real(const RVector& x, const SpectralConfig& cfg) {
    const ModeIndex idx(cfg);
    if (x.size() != idx.size() - 1) throw ShapeMismatch("unpack_real: wrong length");
    const int c = idx.center();
    CVector w = CVector::Zero(idx.size());
    for (int k = c + 1, j = 0; k < idx.size(); ++k, j += 2) {
        const cplx z(x[j] / std::numbers::sqrt2, x[j + 1] / std::numbers::sqrt2);
        w[k] = z;
        w[idx.mirror(k)] = std::conj(z);
    }
    return w;
}

RVector pack_gradient(const CVector& g, const SpectralConfig& cfg) {
    const ModeIndex idx(cfg);
    const int c = idx.center();
    RVector x(idx.size() - 1);
    for (int k = c + 1, j = 0; k < idx.size(); ++k, j += 2) {
        const cplx a = g[k], b = g[idx.mirror(k)];
        x[j] = (a.real() + b.real()) / std::numbers::sqrt2;
        x[j + 1] = (a.imag() - b.imag()) / std::numbers::sqrt2;
    }
    return x;
}

} // namespace codcast::spectral
