#pragma once

// Pyramidal robust optical flow: coarse-to-fine warping with a Charbonnier
// penalty on both the linearized brightness-transport residual and the flow
// gradients, solved by iteratively reweighted SOR sweeps, with median
// filtering of each flow update.
//
// Convention: next(x + F(x)) ~= prev(x), flow in pixels per frame.

#include "codcast/raster.hpp"

#include <vector>

namespace codcast::optflow {

struct FlowConfig {
    int levels = 3;
    /// Smoothness weight; image intensities are normalized to [0, 255].
    double alpha = 3.0;
    double charbonnier_eps = 1e-3;
    int warp_iters = 3;
    /// Penalty reweighting passes per warp.
    int irls_iters = 3;
    /// SOR sweeps per reweighted linear solve.
    int solver_iters = 40;
    /// Largest per-sweep update (px) accepted as converged.
    double solver_tol = 1e-3;
    double sor_omega = 1.8;
    int median_radius = 2;

    void validate() const;
};

struct FlowEstimate {
    FlowField flow;
    /// False when some linear solve ended above solver_tol. Advisory only.
    bool converged = true;
};

/// Level 0 is the input; each further level is binomial-smoothed and
/// decimated by 2 (size (n+1)/2).
std::vector<ScalarGrid> gaussian_pyramid(const ScalarGrid& grid, int levels);

/// Bicubic (Catmull-Rom) sample at fractional pixel (x, y); clamps to the edge.
double sample_bicubic(const ScalarGrid& grid, double x, double y);

/// out(i, j) = grid(i + u, j + v) by bicubic interpolation.
ScalarGrid warp_bicubic(const ScalarGrid& grid, const FlowField& flow);

/// Componentwise median over a (2r+1)^2 window with edge replication.
FlowField median_filter_flow(const FlowField& flow, int radius);

FlowEstimate estimate_flow(const ScalarGrid& prev, const ScalarGrid& next,
                           const FlowConfig& cfg = {});

} // namespace codcast::optflow
