#include <doctest.h>

#include "gazekit/filtering.hpp"
#include "gazekit/rng.hpp"

using namespace gaze;

TEST_CASE("kalman initialization") {
    const KalmanConfig config;
    const Kalman2D kf(Eigen::Vector2d(5.0, 7.0), config);
    CHECK(kf.position() == Eigen::Vector2d(5.0, 7.0));
    CHECK(kf.velocity() == Eigen::Vector2d(0.0, 0.0));

    const Eigen::Matrix4d cov = kf.covariance();
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(cov);
    CHECK(eig.eigenvalues().minCoeff() >= 0.0);

    KalmanConfig bad = config;
    bad.process_noise = 0.0;
    CHECK_THROWS_AS(Kalman2D(Eigen::Vector2d::Zero(), bad), BadConfigError);
    bad = config;
    bad.dt = -1.0;
    CHECK_THROWS_AS(Kalman2D(Eigen::Vector2d::Zero(), bad), BadConfigError);
}

TEST_CASE("kalman converges on a constant stream") {
    Kalman2D kf(Eigen::Vector2d(0.0, 0.0), KalmanConfig{});
    Eigen::Vector2d out;
    for (int i = 0; i < 100; ++i) out = kf.step(Eigen::Vector2d(5.0, 5.0));
    CHECK((out - Eigen::Vector2d(5.0, 5.0)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("kalman axes are exactly independent") {
    Rng rng(3);
    Kalman2D moving(Eigen::Vector2d(0.0, 2.0), KalmanConfig{});
    Kalman2D still(Eigen::Vector2d(0.0, 2.0), KalmanConfig{});
    for (int i = 0; i < 200; ++i) {
        const double x = rng.uniform(-100.0, 100.0);
        const Eigen::Vector2d a = moving.step(Eigen::Vector2d(x, 2.0));
        const Eigen::Vector2d b = still.step(Eigen::Vector2d(0.0, 2.0));
        CHECK(a.y() == b.y()); // bitwise: the x axis cannot leak into y
    }
}

TEST_CASE("tiny measurement noise tracks the measurement") {
    KalmanConfig config;
    config.measurement_noise = 1e-12;
    Kalman2D kf(Eigen::Vector2d(0.0, 0.0), config);
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
        const Eigen::Vector2d z(rng.uniform(-10, 10), rng.uniform(-10, 10));
        const Eigen::Vector2d out = kf.step(z);
        CHECK((out - z).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("covariance stays symmetric positive semidefinite") {
    Rng rng(11);
    KalmanConfig config;
    Kalman2D kf(Eigen::Vector2d(0.0, 0.0), config);
    for (int i = 0; i < 10000; ++i) {
        kf.step(Eigen::Vector2d(rng.normal(0, 10), rng.normal(0, 10)));
        const Eigen::Matrix4d cov = kf.covariance();
        CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-9);
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(cov);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
    }
}

TEST_CASE("constant-velocity trajectory is tracked") {
    KalmanConfig config;
    Kalman2D kf(Eigen::Vector2d(0.0, 0.0), config);
    const Eigen::Vector2d velocity(3.0, -2.0); // units per second
    Eigen::Vector2d pos;
    for (int i = 1; i <= 1000; ++i) {
        const double t = i * config.dt;
        pos = kf.step(velocity * t);
    }
    CHECK((pos - velocity * 1000 * config.dt).cwiseAbs().maxCoeff() < 1e-4);
    CHECK((kf.velocity() - velocity).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("gap handling resets the filter") {
    KalmanConfig config;
    Kalman2D kf(Eigen::Vector2d(0.0, 0.0), config);
    for (int i = 0; i < 50; ++i) kf.step(Eigen::Vector2d(10.0, 10.0));
    // long capture gap: the next measurement becomes the new state
    const Eigen::Vector2d out = kf.step(Eigen::Vector2d(-40.0, 3.0), 10.0 * config.dt);
    CHECK(out == Eigen::Vector2d(-40.0, 3.0));
    CHECK(kf.velocity() == Eigen::Vector2d(0.0, 0.0));
}

TEST_CASE("avg3 window arithmetic") {
    Avg3 f;
    CHECK(f.step(Eigen::Vector2d(1.0, 10.0)) == Eigen::Vector2d(1.0, 10.0));
    CHECK(f.step(Eigen::Vector2d(2.0, 20.0)) == Eigen::Vector2d(1.5, 15.0));
    CHECK(f.step(Eigen::Vector2d(3.0, 30.0)) == Eigen::Vector2d(2.0, 20.0));
    CHECK(f.step(Eigen::Vector2d(10.0, 100.0)) == Eigen::Vector2d(5.0, 50.0));

    f.reset();
    CHECK(f.step(Eigen::Vector2d(7.0, 7.0)) == Eigen::Vector2d(7.0, 7.0));
}
