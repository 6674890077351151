#pragma once

#include <array>

#include <Eigen/Dense>

#include "gazekit/errors.hpp"

namespace gaze {

struct KalmanConfig {
    double process_noise = 1e-3;     // q, per unit^2
    double measurement_noise = 1e-2; // r
    double dt = 1.0 / 30.0;          // seconds per step
};

/// Constant-velocity Kalman filter for a 2D point. The x and y axes are
/// independent by construction: two 2-state (position, velocity) filters
/// that never mix.
class Kalman2D {
public:
    /// Position starts at the first measurement, velocity at zero.
    /// Throws BadConfigError on non-positive q/r/dt.
    Kalman2D(const Eigen::Vector2d& first_measurement, const KalmanConfig& config);

    /// Predict + update; returns the filtered position.
    Eigen::Vector2d step(const Eigen::Vector2d& measurement);

    /// As step(), but re-initializes on capture gaps longer than 5*dt.
    Eigen::Vector2d step(const Eigen::Vector2d& measurement, double elapsed_seconds);

    void reset(const Eigen::Vector2d& measurement);

    Eigen::Vector2d position() const;
    Eigen::Vector2d velocity() const;

    /// Full 4x4 covariance (x, y, vx, vy); block-diagonal per axis.
    Eigen::Matrix4d covariance() const;

private:
    struct Axis {
        Eigen::Vector2d state;    // position, velocity
        Eigen::Matrix2d cov;
    };
    void init_axis(Axis& axis, double measurement);
    double step_axis(Axis& axis, double measurement);

    KalmanConfig config_;
    Axis x_, y_;
};

/// Moving average over the three latest samples.
class Avg3 {
public:
    Eigen::Vector2d step(const Eigen::Vector2d& measurement);
    void reset();

private:
    std::array<Eigen::Vector2d, 3> buffer_{};
    int count_ = 0;
    int next_ = 0;
};

} // namespace gaze
