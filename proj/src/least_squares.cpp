#include "gazekit/least_squares.hpp"

#include <cmath>

namespace gaze {

Eigen::MatrixXd numeric_jacobian(const ResidualFn& fn, const Eigen::VectorXd& x) {
    const Eigen::VectorXd r0 = fn(x);
    Eigen::MatrixXd jac(r0.size(), x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = 1e-7 * (1.0 + std::abs(x[j]));
        xp[j] = x[j] + h;
        const Eigen::VectorXd rp = fn(xp);
        xp[j] = x[j] - h;
        const Eigen::VectorXd rm = fn(xp);
        xp[j] = x[j];
        jac.col(j) = (rp - rm) / (2.0 * h);
    }
    return jac;
}

LmResult levenberg_marquardt(const ResidualFn& fn, const Eigen::VectorXd& x0,
                             const LmOptions& options) {
    LmResult result;
    result.params = x0;
    Eigen::VectorXd r = fn(result.params);
    result.cost = 0.5 * r.squaredNorm();

    double lambda = options.initial_lambda;
    for (int it = 0; it < options.max_iterations; ++it) {
        result.iterations = it + 1;
        const Eigen::MatrixXd jac = numeric_jacobian(fn, result.params);
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * r;

        bool stepped = false;
        for (int attempt = 0; attempt < 30; ++attempt) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal().array() += lambda;
            const Eigen::VectorXd step = damped.ldlt().solve(-jtr);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            const Eigen::VectorXd candidate = result.params + step;
            const Eigen::VectorXd rc = fn(candidate);
            const double cost_c = 0.5 * rc.squaredNorm();
            if (cost_c < result.cost) {
                const double rel_drop =
                    (result.cost - cost_c) / std::max(result.cost, 1e-300);
                result.params = candidate;
                r = rc;
                result.cost = cost_c;
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                if (step.norm() < options.step_tolerance ||
                    (options.cost_rel_tolerance > 0.0 && rel_drop < options.cost_rel_tolerance)) {
                    result.converged = true;
                    return result;
                }
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped) {
            // no descent direction found at any damping: local minimum
            result.converged = true;
            return result;
        }
    }
    return result;
}

} // namespace gaze
