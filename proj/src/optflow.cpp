#include "codcast/optflow.hpp"

#include "codcast/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace codcast::optflow {

void FlowConfig::validate() const {
    if (levels < 1 || warp_iters < 1 || irls_iters < 1 || solver_iters < 1) {
        throw InvalidConfig("flow: levels and iteration counts must be >= 1");
    }
    if (!(alpha > 0.0) || !(charbonnier_eps > 0.0) || !(solver_tol > 0.0)) {
        throw InvalidConfig("flow: alpha, charbonnier_eps, solver_tol must be > 0");
    }
    if (!(sor_omega > 0.0 && sor_omega < 2.0)) {
        throw InvalidConfig("flow: sor_omega must lie in (0, 2)");
    }
    if (median_radius < 0) throw InvalidConfig("flow: median_radius must be >= 0");
}

namespace {

constexpr int kMinLevelSize = 8;

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Plain nx*ny float plane used internally; ScalarGrid carries metadata we do not need.
struct Plane {
    int nx = 0;
    int ny = 0;
    std::vector<double> a;

    Plane() = default;
    Plane(int nx_, int ny_, double fill = 0.0)
        : nx(nx_), ny(ny_), a(static_cast<std::size_t>(nx_) * ny_, fill) {}
    double& operator()(int i, int j) { return a[static_cast<std::size_t>(j) * nx + i]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(j) * nx + i]; }
    double clamped(int i, int j) const {
        return (*this)(clampi(i, 0, nx - 1), clampi(j, 0, ny - 1));
    }
};

Plane to_plane(const ScalarGrid& g) {
    Plane p(g.nx, g.ny);
    p.a = g.values;
    return p;
}

ScalarGrid to_grid(const Plane& p, const ScalarGrid& like) {
    ScalarGrid g = like;
    g.nx = p.nx;
    g.ny = p.ny;
    g.values = p.a;
    return g;
}

// Binomial [1 4 6 4 1]/16 in both directions, replicate border.
Plane smooth(const Plane& in) {
    static constexpr std::array<double, 5> k{1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
    Plane tmp(in.nx, in.ny), out(in.nx, in.ny);
    for (int j = 0; j < in.ny; ++j)
        for (int i = 0; i < in.nx; ++i) {
            double s = 0.0;
            for (int t = -2; t <= 2; ++t) s += k[t + 2] * in.clamped(i + t, j);
            tmp(i, j) = s;
        }
    for (int j = 0; j < in.ny; ++j)
        for (int i = 0; i < in.nx; ++i) {
            double s = 0.0;
            for (int t = -2; t <= 2; ++t) s += k[t + 2] * tmp.clamped(i, j + t);
            out(i, j) = s;
        }
    return out;
}

Plane decimate(const Plane& in) {
    const Plane s = smooth(in);
    Plane out((in.nx + 1) / 2, (in.ny + 1) / 2);
    for (int j = 0; j < out.ny; ++j)
        for (int i = 0; i < out.nx; ++i) out(i, j) = s(2 * i, 2 * j);
    return out;
}

std::vector<Plane> plane_pyramid(const Plane& base, int levels) {
    std::vector<Plane> pyr{base};
    for (int l = 1; l < levels; ++l) {
        Plane next = decimate(pyr.back());
        if (next.nx < kMinLevelSize || next.ny < kMinLevelSize) {
            throw TooSmall("pyramid level " + std::to_string(l) + " would be " +
                           std::to_string(next.nx) + "x" + std::to_string(next.ny) +
                           ", below 8x8");
        }
        pyr.push_back(std::move(next));
    }
    return pyr;
}

// Catmull-Rom kernel (Keys, a = -1/2): reproduces quadratics exactly.
inline std::array<double, 4> cubic_weights(double t) {
    const double t2 = t * t, t3 = t2 * t;
    return {0.5 * (-t3 + 2 * t2 - t), 0.5 * (3 * t3 - 5 * t2 + 2), 0.5 * (-3 * t3 + 4 * t2 + t),
            0.5 * (t3 - t2)};
}

double bicubic(const Plane& p, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(p.nx - 1));
    y = std::clamp(y, 0.0, static_cast<double>(p.ny - 1));
    const int i0 = static_cast<int>(std::floor(x));
    const int j0 = static_cast<int>(std::floor(y));
    const auto wx = cubic_weights(x - i0);
    const auto wy = cubic_weights(y - j0);
    double s = 0.0;
    for (int b = 0; b < 4; ++b) {
        double row = 0.0;
        for (int a = 0; a < 4; ++a) row += wx[a] * p.clamped(i0 - 1 + a, j0 - 1 + b);
        s += wy[b] * row;
    }
    return s;
}

double bilinear(const Plane& p, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(p.nx - 1));
    y = std::clamp(y, 0.0, static_cast<double>(p.ny - 1));
    const int i0 = std::min(static_cast<int>(std::floor(x)), p.nx - 1);
    const int j0 = std::min(static_cast<int>(std::floor(y)), p.ny - 1);
    const double fx = x - i0, fy = y - j0;
    const double a = p.clamped(i0, j0), b = p.clamped(i0 + 1, j0);
    const double c = p.clamped(i0, j0 + 1), d = p.clamped(i0 + 1, j0 + 1);
    return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d);
}

// Five-point central derivative [1 -8 0 8 -1]/12 with replicate border.
void derivatives(const Plane& p, Plane& dx, Plane& dy) {
    dx = Plane(p.nx, p.ny);
    dy = Plane(p.nx, p.ny);
    for (int j = 0; j < p.ny; ++j)
        for (int i = 0; i < p.nx; ++i) {
            dx(i, j) = (p.clamped(i - 2, j) - 8 * p.clamped(i - 1, j) + 8 * p.clamped(i + 1, j) -
                        p.clamped(i + 2, j)) / 12.0;
            dy(i, j) = (p.clamped(i, j - 2) - 8 * p.clamped(i, j - 1) + 8 * p.clamped(i, j + 1) -
                        p.clamped(i, j + 2)) / 12.0;
        }
}

Plane median_filter(const Plane& in, int r) {
    if (r <= 0) return in;
    Plane out(in.nx, in.ny);
    std::vector<double> win(static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)));
    const auto mid = static_cast<std::ptrdiff_t>(win.size() / 2);
    for (int j = 0; j < in.ny; ++j)
        for (int i = 0; i < in.nx; ++i) {
            std::size_t n = 0;
            for (int b = -r; b <= r; ++b)
                for (int a = -r; a <= r; ++a) win[n++] = in.clamped(i + a, j + b);
            std::nth_element(win.begin(), win.begin() + mid, win.end());
            out(i, j) = win[static_cast<std::size_t>(mid)];
        }
    return out;
}

Plane upsample_flow(const Plane& coarse, int nx, int ny) {
    Plane out(nx, ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) out(i, j) = 2.0 * bilinear(coarse, 0.5 * i, 0.5 * j);
    return out;
}

struct LevelResult {
    bool converged = true;
};

// One pyramid level: warp_iters x irls_iters reweighted SOR solves for the
// increment (du, dv), each warp's increment median filtered before it is added.
LevelResult refine_level(const Plane& I1, const Plane& I2, const Plane& weight,
                         Plane& u, Plane& v, const FlowConfig& cfg) {
    const int nx = I1.nx, ny = I1.ny;
    const double eps2 = cfg.charbonnier_eps * cfg.charbonnier_eps;
    LevelResult result;

    Plane I1x, I1y, I2x, I2y;
    derivatives(I1, I1x, I1y);
    derivatives(I2, I2x, I2y);

    Plane Ix(nx, ny), Iy(nx, ny), It(nx, ny), wdata(nx, ny);
    Plane du(nx, ny), dv(nx, ny);
    // Edge weights: horizontal edge (i,j)-(i+1,j) and vertical edge (i,j)-(i,j+1).
    Plane hu(nx, ny), hv(nx, ny), vu(nx, ny), vv(nx, ny);

    for (int w = 0; w < cfg.warp_iters; ++w) {
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double x = i + u(i, j), y = j + v(i, j);
                const bool inside = x >= 0.0 && x <= nx - 1 && y >= 0.0 && y <= ny - 1;
                Ix(i, j) = 0.5 * (bicubic(I2x, x, y) + I1x(i, j));
                Iy(i, j) = 0.5 * (bicubic(I2y, x, y) + I1y(i, j));
                It(i, j) = bicubic(I2, x, y) - I1(i, j);
                wdata(i, j) = inside ? weight(i, j) : 0.0;
            }
        std::fill(du.a.begin(), du.a.end(), 0.0);
        std::fill(dv.a.begin(), dv.a.end(), 0.0);

        for (int irls = 0; irls < cfg.irls_iters; ++irls) {
            // Charbonnier weights rho'(z)/z = 1/sqrt(z^2 + eps^2).
            Plane wd(nx, ny);
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i) {
                    const double z = Ix(i, j) * du(i, j) + Iy(i, j) * dv(i, j) + It(i, j);
                    wd(i, j) = wdata(i, j) / std::sqrt(z * z + eps2);
                }
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i) {
                    const double U = u(i, j) + du(i, j), V = v(i, j) + dv(i, j);
                    if (i + 1 < nx) {
                        const double gu = u(i + 1, j) + du(i + 1, j) - U;
                        const double gv = v(i + 1, j) + dv(i + 1, j) - V;
                        hu(i, j) = 1.0 / std::sqrt(gu * gu + eps2);
                        hv(i, j) = 1.0 / std::sqrt(gv * gv + eps2);
                    } else {
                        hu(i, j) = hv(i, j) = 0.0;
                    }
                    if (j + 1 < ny) {
                        const double gu = u(i, j + 1) + du(i, j + 1) - U;
                        const double gv = v(i, j + 1) + dv(i, j + 1) - V;
                        vu(i, j) = 1.0 / std::sqrt(gu * gu + eps2);
                        vv(i, j) = 1.0 / std::sqrt(gv * gv + eps2);
                    } else {
                        vu(i, j) = vv(i, j) = 0.0;
                    }
                }

            double last_change = 0.0;
            for (int sweep = 0; sweep < cfg.solver_iters; ++sweep) {
                last_change = 0.0;
                for (int j = 0; j < ny; ++j)
                    for (int i = 0; i < nx; ++i) {
                        double su = 0.0, sv = 0.0, ru = 0.0, rv = 0.0;
                        auto edge = [&](int a, int b, double wu, double wv) {
                            su += wu;
                            sv += wv;
                            ru += wu * (u(a, b) + du(a, b) - u(i, j));
                            rv += wv * (v(a, b) + dv(a, b) - v(i, j));
                        };
                        if (i > 0) edge(i - 1, j, hu(i - 1, j), hv(i - 1, j));
                        if (i + 1 < nx) edge(i + 1, j, hu(i, j), hv(i, j));
                        if (j > 0) edge(i, j - 1, vu(i, j - 1), vv(i, j - 1));
                        if (j + 1 < ny) edge(i, j + 1, vu(i, j), vv(i, j));

                        const double w = wd(i, j), ix = Ix(i, j), iy = Iy(i, j), it = It(i, j);
                        const double a11 = w * ix * ix + cfg.alpha * su;
                        const double a22 = w * iy * iy + cfg.alpha * sv;
                        const double a12 = w * ix * iy;
                        const double b1 = -w * ix * it + cfg.alpha * ru;
                        const double b2 = -w * iy * it + cfg.alpha * rv;
                        const double det = a11 * a22 - a12 * a12;
                        if (!(det > 0.0)) continue;
                        const double nu_ = (a22 * b1 - a12 * b2) / det;
                        const double nv_ = (a11 * b2 - a12 * b1) / det;
                        const double cu = cfg.sor_omega * (nu_ - du(i, j));
                        const double cv = cfg.sor_omega * (nv_ - dv(i, j));
                        du(i, j) += cu;
                        dv(i, j) += cv;
                        last_change = std::max({last_change, std::abs(cu), std::abs(cv)});
                    }
                if (last_change < cfg.solver_tol) break;
            }
            if (last_change >= cfg.solver_tol) result.converged = false;
        }

        const Plane du_f = median_filter(du, cfg.median_radius);
        const Plane dv_f = median_filter(dv, cfg.median_radius);
        for (std::size_t k = 0; k < u.a.size(); ++k) {
            u.a[k] += du_f.a[k];
            v.a[k] += dv_f.a[k];
        }
    }
    return result;
}

} // namespace

std::vector<ScalarGrid> gaussian_pyramid(const ScalarGrid& grid, int levels) {
    if (levels < 1) throw InvalidConfig("pyramid needs levels >= 1");
    if (grid.nx < kMinLevelSize || grid.ny < kMinLevelSize) {
        throw TooSmall("pyramid input smaller than 8x8");
    }
    const auto planes = plane_pyramid(to_plane(grid), levels);
    std::vector<ScalarGrid> out;
    out.reserve(planes.size());
    double scale = 1.0;
    for (const auto& p : planes) {
        ScalarGrid g = to_grid(p, grid);
        // Pixel (i, j) of a level sits on pixel (2^l i, 2^l j) of the input.
        g.frame.nx = p.nx;
        g.frame.ny = p.ny;
        g.frame.dlon = grid.frame.dlon * scale;
        g.frame.dlat = grid.frame.dlat * scale;
        out.push_back(std::move(g));
        scale *= 2.0;
    }
    out[0] = grid;
    return out;
}

double sample_bicubic(const ScalarGrid& grid, double x, double y) {
    Plane p(grid.nx, grid.ny);
    p.a = grid.values;
    return bicubic(p, x, y);
}

ScalarGrid warp_bicubic(const ScalarGrid& grid, const FlowField& flow) {
    if (!flow.same_shape(grid)) throw ShapeMismatch("warp_bicubic: flow/grid shapes differ");
    const Plane p = to_plane(grid);
    ScalarGrid out = grid;
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            const auto k = flow.index(i, j);
            out.at(i, j) = bicubic(p, i + flow.u[k], j + flow.v[k]);
        }
    return out;
}

FlowField median_filter_flow(const FlowField& flow, int radius) {
    if (radius < 1) throw InvalidConfig("median_filter_flow: radius must be >= 1");
    Plane u(flow.nx, flow.ny), v(flow.nx, flow.ny);
    u.a = flow.u;
    v.a = flow.v;
    FlowField out = flow;
    out.u = median_filter(u, radius).a;
    out.v = median_filter(v, radius).a;
    return out;
}

FlowEstimate estimate_flow(const ScalarGrid& prev, const ScalarGrid& next,
                           const FlowConfig& cfg) {
    cfg.validate();
    if (!prev.same_shape(next)) throw ShapeMismatch("estimate_flow: image shapes differ");

    // NaN pixels become zero intensity and drop out of the data term.
    Plane I1(prev.nx, prev.ny), I2(next.nx, next.ny), weight(prev.nx, prev.ny, 1.0);
    double vmax = 0.0;
    for (std::size_t k = 0; k < prev.values.size(); ++k) {
        const double a = prev.values[k], b = next.values[k];
        const bool ok = std::isfinite(a) && std::isfinite(b);
        I1.a[k] = std::isfinite(a) ? a : 0.0;
        I2.a[k] = std::isfinite(b) ? b : 0.0;
        weight.a[k] = ok ? 1.0 : 0.0;
        vmax = std::max({vmax, std::abs(I1.a[k]), std::abs(I2.a[k])});
    }
    if (vmax > 0.0) {
        const double s = 255.0 / vmax;
        for (auto& x : I1.a) x *= s;
        for (auto& x : I2.a) x *= s;
    }

    const auto p1 = plane_pyramid(I1, cfg.levels);
    const auto p2 = plane_pyramid(I2, cfg.levels);
    const auto pw = plane_pyramid(weight, cfg.levels);

    bool converged = true;
    Plane u(p1.back().nx, p1.back().ny), v(p1.back().nx, p1.back().ny);
    for (int l = cfg.levels - 1; l >= 0; --l) {
        const auto& a = p1[static_cast<std::size_t>(l)];
        if (u.nx != a.nx || u.ny != a.ny) {
            u = upsample_flow(u, a.nx, a.ny);
            v = upsample_flow(v, a.nx, a.ny);
        }
        const auto res = refine_level(a, p2[static_cast<std::size_t>(l)],
                                      pw[static_cast<std::size_t>(l)], u, v, cfg);
        converged = converged && res.converged;
    }

    FlowEstimate est;
    est.flow = FlowField(prev.nx, prev.ny);
    est.flow.frame = prev.frame;
    est.flow.t_prev = prev.timestamp;
    est.flow.t_next = next.timestamp;
    est.flow.units = FlowUnits::pixels_per_frame;
    for (std::size_t k = 0; k < u.a.size(); ++k) {
        est.flow.u[k] = std::isfinite(u.a[k]) ? u.a[k] : 0.0;
        est.flow.v[k] = std::isfinite(v.a[k]) ? v.a[k] : 0.0;
    }
    est.converged = converged;
    return est;
}

} // namespace codcast::optflow
