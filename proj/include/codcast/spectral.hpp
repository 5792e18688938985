#pragma once

// Fourier-Galerkin vorticity-streamfunction model on the periodic box
// [0, Lx) x [0, Ly):
//
//   d(w)/dt = -B(w) w - B(mean) w - nu * A w
//
// with w the complex coefficients of the vorticity over the modes
// |n| <= Nx/2, |m| <= Ny/2, A = diag(lambda_nm) the negative Laplacian and
// B(w) the skew-Hermitian matrix of the truncated advection term
//
//   B(w)[(c,d),(n,m)] = w_{c-n,d-m} (c*m - d*n) K_{c-n,d-m},
//   K_pq = Lx*Ly / (p^2 Ly^2 + q^2 Lx^2),  K_00 = 0.
//
// Streamfunction psi = w / lambda, velocity u = psi_y, v = -psi_x.

#include <Eigen/Dense>

#include <complex>
#include <span>
#include <vector>

namespace codcast::spectral {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

struct SpectralConfig {
    int Nx = 16;
    int Ny = 16;
    double Lx = 1.0;
    double Ly = 1.0;
    /// Multiplies the Laplacian term; 1 reproduces the plain model.
    double nu = 1.0;
    double dt = 1e-2;
    /// Drops the B(w) self-advection term when false (linear model).
    bool nonlinear = true;

    void validate() const;
    int modes() const { return (Nx + 1) * (Ny + 1); }
};

/// Flattening of the mode box: k = (n + Nx/2) * (Ny + 1) + (m + Ny/2).
/// The mirror mode (-n, -m) of k is size() - 1 - k; the mean mode is the center.
class ModeIndex {
public:
    explicit ModeIndex(const SpectralConfig& cfg);

    int size() const { return (2 * hx_ + 1) * (2 * hy_ + 1); }
    int center() const { return (size() - 1) / 2; }
    int hx() const { return hx_; }
    int hy() const { return hy_; }
    bool contains(int n, int m) const { return std::abs(n) <= hx_ && std::abs(m) <= hy_; }
    int index(int n, int m) const { return (n + hx_) * (2 * hy_ + 1) + (m + hy_); }
    int n_of(int k) const { return k / (2 * hy_ + 1) - hx_; }
    int m_of(int k) const { return k % (2 * hy_ + 1) - hy_; }
    int mirror(int k) const { return size() - 1 - k; }

private:
    int hx_;
    int hy_;
};

struct SpectralState {
    CVector coeffs;
    double time = 0.0; // hours
};

struct MeanFlow {
    double u_bar = 0.0; // km/h
    double v_bar = 0.0;
};

/// Projects onto conjugate-symmetric, zero-mean coefficient vectors.
void enforce_real_zero_mean(CVector& w);
/// Projects onto conjugate-symmetric vectors (mean kept).
void enforce_real(CVector& w);

/// lambda_nm = 4 pi^2 (n^2/Lx^2 + m^2/Ly^2); zero only for the mean mode.
RVector laplacian_eigenvalues(const SpectralConfig& cfg);

/// Direct DFT of a uniform periodic raster (x_i = i*Lx/rnx, y-outer storage)
/// onto the mode box. Requires rnx > Nx and rny > Ny so that no mode aliases.
CVector project_coefficients(std::span<const double> values, int rnx, int rny,
                             const SpectralConfig& cfg);

/// Vorticity projection: conjugate symmetry enforced, mean removed.
SpectralState project_field(std::span<const double> values, int rnx, int rny,
                            const SpectralConfig& cfg, double time = 0.0);

/// Real part of the Fourier series on the uniform raster.
std::vector<double> evaluate_coefficients(const CVector& coeffs, int rnx, int rny,
                                          const SpectralConfig& cfg);
std::vector<double> evaluate_field(const SpectralState& state, int rnx, int rny,
                                   const SpectralConfig& cfg);
/// Largest |imag| of the series over the raster; diagnostic for symmetry.
double max_imaginary_residue(const CVector& coeffs, int rnx, int rny,
                             const SpectralConfig& cfg);

/// Real part of the series on the tensor grid xs x ys (ys outer), in km
/// relative to the box origin.
std::vector<double> evaluate_tensor(const CVector& coeffs, std::span<const double> xs,
                                    std::span<const double> ys, const SpectralConfig& cfg);

/// Dense B(w).
CMatrix advection_matrix(const CVector& w, const SpectralConfig& cfg);
/// B(w) a by the direct double sum, without forming the matrix.
CVector apply_advection(const CVector& w, const CVector& a, const SpectralConfig& cfg);
/// Dense matrix of a -> B(a) s (the derivative of B(.)s in its first slot).
CMatrix advection_jacobian(const CVector& s, const SpectralConfig& cfg);
/// Diagonal of B(mean): 2 pi i (u_bar n / Lx + v_bar m / Ly).
CVector mean_advection_diagonal(const MeanFlow& mean, const SpectralConfig& cfg);
/// d/du_bar and d/dv_bar of the diagonal above.
CVector mean_advection_diagonal_dx(const SpectralConfig& cfg);
CVector mean_advection_diagonal_dy(const SpectralConfig& cfg);

/// G(w) = B(w) + B(mean) + nu*A, so that dw/dt = -G(w) w (B(w) omitted for a linear model).
CMatrix generator(const CVector& w, const MeanFlow& mean, const SpectralConfig& cfg);

/// One implicit-midpoint step
///   (w1 - w0)/dt = -G(w0) (w1 + w0)/2,
/// i.e. (I + dt/2 G) w1 = (I - dt/2 G) w0.
SpectralState step_implicit_midpoint(const SpectralState& state, const MeanFlow& mean,
                                     const SpectralConfig& cfg);

/// Number of dt-steps spanning [t0, t1]; throws InvalidConfig when dt does
/// not divide the gap.
int steps_between(double t0, double t1, double dt);

/// Every step from q.time through q.time + nsteps*dt.
std::vector<CVector> integrate_steps(const SpectralState& q, const MeanFlow& mean,
                                     const SpectralConfig& cfg, int nsteps);

/// States at the requested times (strictly increasing, t_grid[0] >= q.time).
std::vector<SpectralState> solve_nse(const SpectralState& q_hat, const MeanFlow& mean,
                                     const SpectralConfig& cfg,
                                     std::span<const double> t_grid);

struct VelocityCoeffs {
    CVector u;
    CVector v;
};

/// Coefficients of (u, v) = (psi_y, -psi_x) for psi = w / lambda (mean mode -> 0).
VelocityCoeffs vorticity_to_velocity(const CVector& w, const SpectralConfig& cfg);
/// v_x - u_y in coefficient space.
CVector curl(const VelocityCoeffs& vel, const SpectralConfig& cfg);

/// Multipliers taking vorticity coefficients to u and v coefficients.
CVector velocity_multiplier_u(const SpectralConfig& cfg);
CVector velocity_multiplier_v(const SpectralConfig& cfg);

double l2_norm(const CVector& w);

/// Real coordinates of a conjugate-symmetric zero-mean vector: for each mode
/// k above the center, sqrt(2) Re w_k then sqrt(2) Im w_k. The packing is an
/// isometry between the symmetric subspace and R^(modes-1).
RVector pack_real(const CVector& w, const SpectralConfig& cfg);
CVector unpack_real(const RVector& x, const SpectralConfig& cfg);
/// Gradient of a real functional with respect to the packed coordinates, given
/// its complex gradient g (dJ = Re <g, dw>) on the full coefficient space.
RVector pack_gradient(const CVector& g, const SpectralConfig& cfg);

} // namespace codcast::spectral
