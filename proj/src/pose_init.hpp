#pragma once

// Internal pose-initialization helpers shared by the head-pose and mirror
// calibration solvers.

#include <span>

#include <Eigen/Dense>

#include "gazekit/errors.hpp"
#include "gazekit/geometry.hpp"

namespace gaze::detail {

/// Direct linear transform homography mapping src -> dst (needs >= 4 points).
inline Eigen::Matrix3d dlt_homography(std::span<const Eigen::Vector2d> src,
                                      std::span<const Eigen::Vector2d> dst) {
    const auto n = static_cast<Eigen::Index>(src.size());
    Eigen::MatrixXd a(2 * n, 9);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = src[static_cast<std::size_t>(i)].x();
        const double y = src[static_cast<std::size_t>(i)].y();
        const double u = dst[static_cast<std::size_t>(i)].x();
        const double v = dst[static_cast<std::size_t>(i)].y();
        a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
        a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd h = svd.matrixV().col(8);
    Eigen::Matrix3d hm;
    hm << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    return hm;
}

/// Nearest rotation matrix (det +1) in the Frobenius sense.
inline Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m) {
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1.0;
        r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return r;
}

/// Pose (R, t) of a planar point set from its homography against normalized
/// image coordinates. plane_coords are 2D coordinates within the plane;
/// the returned pose maps (alpha, beta, 0) -> camera frame.
inline std::pair<Eigen::Matrix3d, Vec3> pose_from_planar_homography(
    std::span<const Eigen::Vector2d> plane_coords,
    std::span<const Eigen::Vector2d> normalized_image) {
    const Eigen::Matrix3d h = dlt_homography(plane_coords, normalized_image);
    const double lambda = 0.5 * (h.col(0).norm() + h.col(1).norm());
    if (lambda < 1e-12) throw DegenerateError("planar pose: degenerate homography");
    Eigen::Matrix3d hs = h / lambda;
    if (hs(2, 2) < 0.0) hs = -hs; // plane origin must be in front of the camera
    Eigen::Matrix3d basis;
    basis.col(0) = hs.col(0);
    basis.col(1) = hs.col(1);
    basis.col(2) = hs.col(0).cross(hs.col(1));
    return {orthonormalize(basis), hs.col(2)};
}

inline Eigen::Matrix3d rodrigues(const Vec3& axis_angle) {
    const double angle = axis_angle.norm();
    if (angle < 1e-14) return Eigen::Matrix3d::Identity();
    return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

inline Vec3 rotation_to_axis_angle(const Eigen::Matrix3d& r) {
    const Eigen::AngleAxisd aa(r);
    return aa.angle() * aa.axis();
}

} // namespace gaze::detail
