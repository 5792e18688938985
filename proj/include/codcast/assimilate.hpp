#pragma once

// Fitting (q_hat, u_bar, v_bar) to flow snapshots through the spectral model.
//
//   J = sum_k mean_pixels[ (u_k - u_bar - psi_y(t_k))^2 + (v_k - v_bar + psi_x(t_k))^2 ]
//
// The pixel mean is the box-normalized L2 inner product evaluated on the
// uniform periodic observation raster.

#include "codcast/lbfgs.hpp"
#include "codcast/spectral.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace codcast::assimilate {

using spectral::CMatrix;
using spectral::CVector;
using spectral::RVector;
using spectral::SpectralConfig;
using spectral::SpectralState;

struct FitParams {
    SpectralState q_hat; // q_hat.time is the model start time t0 (hours)
    double u_bar = 0.0;
    double v_bar = 0.0;
};

/// One velocity snapshot (km/h) on the uniform periodic raster
/// x_i = i*Lx/rnx, y_j = j*Ly/rny, stored y-outer.
struct FlowSnapshot {
    double t = 0.0; // hours
    std::vector<double> u;
    std::vector<double> v;
};

struct FlowObservations {
    int rnx = 0;
    int rny = 0;
    std::vector<FlowSnapshot> snapshots;

    void validate() const;
};

double cost_J(const FitParams& params, const FlowObservations& obs, const SpectralConfig& cfg);

struct Gradient {
    double J = 0.0;
    RVector grad_q; // with respect to spectral::pack_real(q_hat)
    double grad_u = 0.0;
    double grad_v = 0.0;
};

enum class GradientRoute {
    /// Exact adjoint of the implemented midpoint integrator.
    discrete_adjoint,
    /// Linearized continuous equations (backward adjoint for q_hat, forward
    /// tangents for u_bar, v_bar) each integrated with step_linear_midpoint.
    /// Agrees with the discrete route to O(dt).
    continuous_adjoint,
};

Gradient gradient_J(const FitParams& params, const FlowObservations& obs,
                    const SpectralConfig& cfg,
                    GradientRoute route = GradientRoute::discrete_adjoint);

/// One step of the symmetric linear midpoint rule for x' = Q(t) x + f(t):
///   (x1 - x0)/dt = (Q1 + Q0)/2 (x1 + x0)/2 + (f1 + f0)/2.
/// Negative dt integrates backward.
CVector step_linear_midpoint(const CMatrix& Q0, const CMatrix& Q1, const CVector& f0,
                             const CVector& f1, const CVector& x0, double dt);

struct FitOptions {
    lbfgs::Options lbfgs;
    /// Optimize q_hat in velocity-scaled coordinates (divide by sqrt(lambda)).
    bool precondition = true;
};

struct FitReport {
    FitParams params;
    std::vector<double> J_history;
    std::vector<double> grad_norm_history;
    int iterations = 0;
    bool converged = false;
    std::string status;

    /// `iteration J grad_norm` lines with a one-line header.
    void write_log(std::ostream& os) const;
};

FitReport fit_lbfgs(const FlowObservations& obs, const SpectralConfig& cfg,
                    const FitParams& init, const FitOptions& opts = {});

/// Starting point from the first snapshot: finite-difference curl projected
/// onto the modes, raster means as the mean flow, t0 = snapshot time.
FitParams initial_guess(const FlowObservations& obs, const SpectralConfig& cfg);

/// Velocity rasters of a parameter set at time index-compatible snapshots;
/// u, v include the mean flow. Used by tests and the pipeline.
FlowSnapshot model_velocity(const CVector& w, double u_bar, double v_bar, int rnx, int rny,
                            const SpectralConfig& cfg, double t);

} // namespace codcast::assimilate
