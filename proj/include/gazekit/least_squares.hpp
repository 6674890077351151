#pragma once

#include <functional>

#include <Eigen/Dense>

namespace gaze {

/// Residual function: params -> stacked residual vector.
using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LmOptions {
    int max_iterations = 100;
    double step_tolerance = 1e-10;     // stop when |step| < this
    double cost_rel_tolerance = 0.0;   // stop when relative cost change < this (0 = off)
    double initial_lambda = 1e-3;
};

struct LmResult {
    Eigen::VectorXd params;
    double cost = 0.0; // 0.5 * |r|^2
    int iterations = 0;
    bool converged = false;
};

/// Dense Levenberg-Marquardt with a central-difference Jacobian. Sized for
/// the small problems in this project (tens of parameters, hundreds of
/// residuals).
LmResult levenberg_marquardt(const ResidualFn& fn, const Eigen::VectorXd& x0,
                             const LmOptions& options = {});

/// Central-difference Jacobian of fn at x.
Eigen::MatrixXd numeric_jacobian(const ResidualFn& fn, const Eigen::VectorXd& x);

} // namespace gaze
