#pragma once

// Limited-memory BFGS with a strong-Wolfe line search (bracketing + zoom with
// safeguarded cubic interpolation).

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace codcast::lbfgs {

/// Returns f(x) and writes the gradient into `grad` (already sized like x).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct Options {
    int memory = 10;
    int max_iterations = 200;
    double c1 = 1e-4;
    double c2 = 0.9;
    /// Stop once |g| <= max(grad_tol * |g0|, grad_abs_tol).
    double grad_tol = 1e-6;
    double grad_abs_tol = 1e-12;
    int max_line_search_evals = 40;
};

enum class Status {
    converged,
    max_iterations,
    line_search_failure,
};

std::string to_string(Status s);

struct Result {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd grad;
    std::vector<double> f_history;     // f at x0 and after every accepted step
    std::vector<double> gnorm_history; // |g| at the same points
    int iterations = 0;
    int evaluations = 0;
    Status status = Status::max_iterations;
    bool converged() const { return status == Status::converged; }
};

Result minimize(const Objective& fn, Eigen::VectorXd x0, const Options& opts = {});

struct LineSearchResult {
    bool ok = false;
    double step = 0.0;
    double f = 0.0;
    int evaluations = 0;
};

/// Strong-Wolfe search along `dir` from x (f0, g0 = f(x), grad f(x)).
/// On success x, f, g hold the accepted point.
LineSearchResult strong_wolfe(const Objective& fn, Eigen::VectorXd& x, double& f,
                              Eigen::VectorXd& g, const Eigen::VectorXd& dir,
                              double step0, const Options& opts);

} // namespace codcast::lbfgs
