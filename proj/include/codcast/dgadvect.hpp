#pragma once

// Nodal discontinuous Galerkin solver for the transport equation
//
//   dC/dt + u . grad C = 0
//
// written in flux form (div(uC)) on a rectangle tiled by Kx x Ky elements,
// each carrying a tensor-product Lagrange basis on Legendre-Gauss-Lobatto
// nodes. Quadrature is collocated on the same nodes, so element mass
// matrices are diagonal. Time stepping is SSP-RK3 under a CFL bound.

#include "codcast/geo.hpp"
#include "codcast/raster.hpp"
#include "codcast/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace codcast::dg {

/// Legendre-Gauss-Lobatto nodes (ascending, on [-1, 1]) and weights for order N.
std::pair<std::vector<double>, std::vector<double>> lgl_nodes_weights(int N);

/// D(i, j) = l_j'(r_i) for the Lagrange basis on `nodes`.
Eigen::MatrixXd differentiation_matrix(std::span<const double> nodes);

/// Values l_j(xi) of the Lagrange basis on `nodes`.
std::vector<double> lagrange_values(std::span<const double> nodes, double xi);

struct Domain {
    double x0 = 0.0;
    double x1 = 1.0;
    double y0 = 0.0;
    double y1 = 1.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
};

/// Planar bounding box of a lon-lat raster.
Domain domain_of(const geo::GeoFrame& frame);

enum class Wiring {
    /// Physical boundary: inflow takes the Dirichlet value, outflow is free.
    boundary,
    /// Opposite edges are neighbours.
    periodic,
};

enum class FluxVariant {
    /// n.{{uC}} + c_s/2 (C_i - C_e).
    jump,
    /// n.{{uC}} + c_s/2 n.(u_i - u_e), the dissipation written on the velocity jump.
    paper,
};

FluxVariant flux_variant_from_string(const std::string& s);
std::string to_string(FluxVariant f);

class DGMesh {
public:
    DGMesh(const Domain& domain, int Kx, int Ky, int N, Wiring wiring = Wiring::boundary);

    const Domain& domain() const { return domain_; }
    int Kx() const { return Kx_; }
    int Ky() const { return Ky_; }
    int N() const { return N_; }
    int np() const { return N_ + 1; }
    Wiring wiring() const { return wiring_; }
    double hx() const { return hx_; }
    double hy() const { return hy_; }
    double h_min() const { return std::min(hx_, hy_); }

    const std::vector<double>& ref_nodes() const { return r_; }
    const std::vector<double>& ref_weights() const { return w_; }
    const Eigen::MatrixXd& D() const { return D_; }

    /// Reference 1D mass diag(w) and stiffness S(i, j) = w_i D(i, j).
    Eigen::MatrixXd mass_1d() const;
    Eigen::MatrixXd stiffness_1d() const;
    /// Element mass matrix (diagonal) over the (N+1)^2 local nodes, i fastest.
    Eigen::MatrixXd element_mass() const;

    /// Nodes form a global tensor grid of (Kx*np) x (Ky*np) points with
    /// duplicated coordinates on shared faces; values are stored y-outer.
    int gx() const { return Kx_ * np(); }
    int gy() const { return Ky_ * np(); }
    std::size_t size() const { return static_cast<std::size_t>(gx()) * gy(); }
    std::size_t index(int ex, int ey, int i, int j) const {
        return static_cast<std::size_t>(ey * np() + j) * gx() + ex * np() + i;
    }
    const std::vector<double>& xs() const { return xs_; }
    const std::vector<double>& ys() const { return ys_; }

    /// Quadrature weight of every node (element mass diagonal).
    const std::vector<double>& node_weights() const { return qw_; }

private:
    Domain domain_;
    int Kx_, Ky_, N_;
    Wiring wiring_;
    double hx_, hy_;
    std::vector<double> r_, w_;
    Eigen::MatrixXd D_;
    std::vector<double> xs_, ys_, qw_;
};

struct DGField {
    std::vector<double> values; // indexed by DGMesh::index
    double time = 0.0;          // hours
};

/// Nodal interpolant of f(x, y).
DGField interpolate(const DGMesh& mesh, const std::function<double(double, double)>& f,
                    double time = 0.0);

/// Sum over elements of M^k C^k . 1.
double total_mass(const DGField& field, const DGMesh& mesh);
/// Quadrature L2 norm of nodal values.
double l2_norm(std::span<const double> values, const DGMesh& mesh);

/// Velocity (km/h) at planar points (km) and times (hours).
class VelocitySampler {
public:
    virtual ~VelocitySampler() = default;
    virtual geo::Velocity at(double x, double y, double t) const = 0;
    /// Tensor-grid sampling, ys outer; the default loops over at().
    virtual void sample_grid(std::span<const double> xs, std::span<const double> ys,
                             double t, std::vector<double>& u, std::vector<double>& v) const;
};

class FunctionSampler final : public VelocitySampler {
public:
    using Fn = std::function<geo::Velocity(double x, double y, double t)>;
    explicit FunctionSampler(Fn fn) : fn_(std::move(fn)) {}
    geo::Velocity at(double x, double y, double t) const override { return fn_(x, y, t); }

private:
    Fn fn_;
};

/// A frozen flow field (planar km/h) sampled bilinearly, clamped at the raster edge.
class FrozenFlowSampler final : public VelocitySampler {
public:
    explicit FrozenFlowSampler(FlowField flow_kmh);
    geo::Velocity at(double x, double y, double t) const override;
    void sample_grid(std::span<const double> xs, std::span<const double> ys, double t,
                     std::vector<double>& u, std::vector<double>& v) const override;

private:
    FlowField flow_;
};

/// Velocity of a spectral trajectory plus mean flow, linear in time between
/// stored states and held constant outside them. The spectral box starts at
/// (x_origin, y_origin). Grid evaluations are cached per state, so an instance
/// must not be shared between threads.
class TrajectorySampler final : public VelocitySampler {
public:
    TrajectorySampler(std::vector<spectral::SpectralState> states, spectral::MeanFlow mean,
                      spectral::SpectralConfig cfg, double x_origin, double y_origin);
    geo::Velocity at(double x, double y, double t) const override;
    void sample_grid(std::span<const double> xs, std::span<const double> ys, double t,
                     std::vector<double>& u, std::vector<double>& v) const override;

private:
    struct Bracket {
        std::size_t a, b;
        double s; // weight of b
    };
    Bracket bracket(double t) const;
    const std::pair<std::vector<double>, std::vector<double>>& grid_velocity(
        std::size_t k, std::span<const double> xs, std::span<const double> ys) const;

    std::vector<spectral::SpectralState> states_;
    std::vector<spectral::VelocityCoeffs> vel_;
    spectral::MeanFlow mean_;
    spectral::SpectralConfig cfg_;
    double x0_, y0_;
    mutable std::vector<double> cache_xs_, cache_ys_;
    mutable std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> cache_;
};

/// Normal component n.f* of the local Lax-Friedrichs flux across a face with
/// unit axis normal (nx, ny) pointing from the interior state outward;
/// c_s = max(|n.u_i|, |n.u_e|).
double lax_friedrichs_flux(double C_i, double C_e, geo::Velocity u_i, geo::Velocity u_e,
                           double nx, double ny, FluxVariant variant = FluxVariant::jump);

struct AdvectOptions {
    double cfl = 0.5;
    FluxVariant flux = FluxVariant::jump;
    /// Exterior value on inflow faces of a physical boundary.
    double inflow_value = 0.0;

    void validate() const;
};

/// Semi-discrete right-hand side dC/dt at time t.
std::vector<double> rhs(const DGField& field, const VelocitySampler& sampler,
                        const DGMesh& mesh, double t, const AdvectOptions& opts = {});

struct AdvectStats {
    int steps = 0;
    double max_speed = 0.0;
};

/// SSP-RK3 from t0 to t1 with dt = cfl*h_min/((2N+1) max|u|), recomputed each
/// step; the last step is shortened to land on t1.
DGField advect(const DGField& initial, const VelocitySampler& sampler, const DGMesh& mesh,
               double t0, double t1, const AdvectOptions& opts = {},
               AdvectStats* stats = nullptr);

/// Bilinear raster -> node transfer. NaN pixels count as `missing_value`.
DGField grid_to_dg(const ScalarGrid& grid, const DGMesh& mesh, double missing_value = 0.0);

/// Nodal polynomial evaluation at every pixel of `frame`.
ScalarGrid dg_to_grid(const DGField& field, const DGMesh& mesh, const geo::GeoFrame& frame);

} // namespace codcast::dg
