#include "gazekit/filtering.hpp"

namespace gaze {

namespace {
constexpr double kLargeVelocityVar = 1e6;
}

Kalman2D::Kalman2D(const Eigen::Vector2d& first_measurement, const KalmanConfig& config)
    : config_(config) {
    if (!(config.process_noise > 0.0) || !(config.measurement_noise > 0.0) || !(config.dt > 0.0)) {
        throw BadConfigError("kalman: q, r and dt must be positive");
    }
    init_axis(x_, first_measurement.x());
    init_axis(y_, first_measurement.y());
}

void Kalman2D::init_axis(Axis& axis, double measurement) {
    axis.state = Eigen::Vector2d(measurement, 0.0);
    axis.cov = Eigen::Vector2d(config_.measurement_noise, kLargeVelocityVar).asDiagonal();
}

void Kalman2D::reset(const Eigen::Vector2d& measurement) {
    init_axis(x_, measurement.x());
    init_axis(y_, measurement.y());
}

double Kalman2D::step_axis(Axis& axis, double measurement) {
    const double dt = config_.dt;
    Eigen::Matrix2d f;
    f << 1.0, dt, 0.0, 1.0;
    // white-noise acceleration model
    Eigen::Matrix2d q;
    q << dt * dt * dt * dt / 4.0, dt * dt * dt / 2.0, dt * dt * dt / 2.0, dt * dt;
    q *= config_.process_noise;

    // predict
    axis.state = f * axis.state;
    axis.cov = f * axis.cov * f.transpose() + q;

    // update with the scalar position measurement
    const double innovation = measurement - axis.state[0];
    const double s = axis.cov(0, 0) + config_.measurement_noise;
    const Eigen::Vector2d gain = axis.cov.col(0) / s;
    axis.state += gain * innovation;
    axis.cov = (Eigen::Matrix2d::Identity() - gain * Eigen::RowVector2d(1.0, 0.0)) * axis.cov;
    // keep the covariance symmetric against rounding drift
    axis.cov = 0.5 * (axis.cov + axis.cov.transpose()).eval();
    return axis.state[0];
}

Eigen::Vector2d Kalman2D::step(const Eigen::Vector2d& measurement) {
    return Eigen::Vector2d(step_axis(x_, measurement.x()), step_axis(y_, measurement.y()));
}

Eigen::Vector2d Kalman2D::step(const Eigen::Vector2d& measurement, double elapsed_seconds) {
    if (elapsed_seconds > 5.0 * config_.dt) {
        reset(measurement);
        return measurement;
    }
    return step(measurement);
}

Eigen::Vector2d Kalman2D::position() const {
    return Eigen::Vector2d(x_.state[0], y_.state[0]);
}

Eigen::Vector2d Kalman2D::velocity() const {
    return Eigen::Vector2d(x_.state[1], y_.state[1]);
}

Eigen::Matrix4d Kalman2D::covariance() const {
    // order (x, y, vx, vy)
    Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
    cov(0, 0) = x_.cov(0, 0);
    cov(0, 2) = x_.cov(0, 1);
    cov(2, 0) = x_.cov(1, 0);
    cov(2, 2) = x_.cov(1, 1);
    cov(1, 1) = y_.cov(0, 0);
    cov(1, 3) = y_.cov(0, 1);
    cov(3, 1) = y_.cov(1, 0);
    cov(3, 3) = y_.cov(1, 1);
    return cov;
}

Eigen::Vector2d Avg3::step(const Eigen::Vector2d& measurement) {
    buffer_[static_cast<std::size_t>(next_)] = measurement;
    next_ = (next_ + 1) % 3;
    if (count_ < 3) ++count_;
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    for (int i = 0; i < count_; ++i) sum += buffer_[static_cast<std::size_t>(i)];
    return sum / static_cast<double>(count_);
}

void Avg3::reset() {
    count_ = 0;
    next_ = 0;
}

} // namespace gaze
