#include "gazekit/normalization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>

#include "gazekit/least_squares.hpp"
#include "pose_init.hpp"

namespace gaze {

namespace {

using detail::orthonormalize;
using detail::rodrigues;
using detail::rotation_to_axis_angle;

Eigen::Vector2d project_pinhole(const Vec3& p_cam, const Intrinsics& k) {
    return Eigen::Vector2d(k.fx * p_cam.x() / p_cam.z() + k.cx,
                           k.fy * p_cam.y() / p_cam.z() + k.cy);
}

bool landmarks_collinear(const Landmarks5& landmarks) {
    // covariance rank of the 2D points
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& p : landmarks.pts) mean += p;
    mean /= 5.0;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& p : landmarks.pts) {
        const Eigen::Vector2d d = p - mean;
        cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
    return eig.eigenvalues()(0) < 1e-9 * std::max(eig.eigenvalues()(1), 1.0);
}

} // namespace

GenericFaceModel GenericFaceModel::default_model() {
    GenericFaceModel m;
    m.pts[0] = Vec3(-30.0, 0.0, 0.0);  // right eye
    m.pts[1] = Vec3(30.0, 0.0, 0.0);   // left eye
    m.pts[2] = Vec3(0.0, -30.0, -30.0); // nose tip
    m.pts[3] = Vec3(-25.0, -60.0, -5.0);
    m.pts[4] = Vec3(25.0, -60.0, -5.0);
    return m;
}

void GenericFaceModel::validate() const {
    const Vec3 eye_sum = pts[0] + pts[1];
    if (std::abs(eye_sum.x()) > 1e-9 || (pts[0] - pts[1]).norm() < 1e-9) {
        throw DegenerateError("face model: eye points must be symmetric about x = 0");
    }
    Vec3 mean = Vec3::Zero();
    for (const auto& p : pts) mean += p;
    mean /= 5.0;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : pts) {
        const Vec3 d = p - mean;
        cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    if (eig.eigenvalues()(1) < 1e-9) {
        throw DegenerateError("face model: points are collinear");
    }
}

void Intrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("intrinsics: focal lengths must be positive");
}

HeadPose estimate_head_pose(const Landmarks5& landmarks, const GenericFaceModel& model,
                            const Intrinsics& k) {
    model.validate();
    k.validate();
    for (const auto& p : landmarks.pts) {
        if (!p.allFinite()) throw DegenerateError("landmarks: non-finite coordinates");
    }
    if (landmarks_collinear(landmarks)) {
        throw DegenerateError("landmarks: collinear configuration");
    }

    // --- planar initialization ----------------------------------------
    // The model is nearly coplanar; fit its best plane, express the points in
    // plane coordinates and recover the pose from a homography against the
    // normalized image coordinates.
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : model.pts) centroid += p;
    centroid /= 5.0;
    Eigen::Matrix<double, 3, 5> centered;
    for (int i = 0; i < 5; ++i) centered.col(i) = model.pts[i] - centroid;
    const Eigen::JacobiSVD<Eigen::Matrix<double, 3, 5>> svd(centered, Eigen::ComputeFullU);
    const Vec3 u_axis = svd.matrixU().col(0);
    const Vec3 v_axis = svd.matrixU().col(1);
    Vec3 w_axis = u_axis.cross(v_axis);

    std::array<Eigen::Vector2d, 5> plane_coords;
    std::array<Eigen::Vector2d, 5> norm_image;
    for (int i = 0; i < 5; ++i) {
        const Vec3 d = model.pts[i] - centroid;
        plane_coords[i] = Eigen::Vector2d(d.dot(u_axis), d.dot(v_axis));
        norm_image[i] = Eigen::Vector2d((landmarks.pts[i].x() - k.cx) / k.fx,
                                        (landmarks.pts[i].y() - k.cy) / k.fy);
    }

    const auto [r_plane, t_plane] = detail::pose_from_planar_homography(plane_coords, norm_image);

    Eigen::Matrix3d plane_to_model;
    plane_to_model.col(0) = u_axis;
    plane_to_model.col(1) = v_axis;
    plane_to_model.col(2) = w_axis;
    Eigen::Matrix3d r0 = r_plane * plane_to_model.transpose();
    r0 = orthonormalize(r0);
    const Vec3 t0 = t_plane - r0 * centroid;

    // --- Levenberg-Marquardt refinement --------------------------------
    Eigen::VectorXd x0(6);
    x0.head<3>() = rotation_to_axis_angle(r0);
    x0.tail<3>() = t0;

    const auto residual = [&](const Eigen::VectorXd& x) {
        const Eigen::Matrix3d r = rodrigues(x.head<3>());
        const Vec3 t = x.tail<3>();
        Eigen::VectorXd res(10);
        for (int i = 0; i < 5; ++i) {
            const Vec3 p = r * model.pts[i] + t;
            if (p.z() < 1e-9) {
                // behind the camera: large residual steers the solver away
                res.segment<2>(2 * i).setConstant(1e6);
                continue;
            }
            res.segment<2>(2 * i) = project_pinhole(p, k) - landmarks.pts[i];
        }
        return res;
    };

    LmOptions opts;
    opts.max_iterations = 100;
    opts.step_tolerance = 1e-10;
    const LmResult fit = levenberg_marquardt(residual, x0, opts);
    if (!fit.converged) {
        throw NoConvergenceError("head pose: no convergence, residual = " +
                                 std::to_string(std::sqrt(2.0 * fit.cost)));
    }

    HeadPose pose;
    pose.rotation = rodrigues(fit.params.head<3>());
    pose.translation = fit.params.tail<3>();
    return pose;
}

Vec3 compute_face_center(const HeadPose& pose, const GenericFaceModel& model) {
    const Vec3 mean = (model.pts[0] + model.pts[1] + model.pts[2]) / 3.0;
    return pose.rotation * mean + pose.translation;
}

NormalizationTransform compute_normalization(const HeadPose& pose, const Vec3& face_center,
                                             const Intrinsics& k_real, const NormParams& params) {
    const double dist = face_center.norm();
    if (dist < 1e-9) throw DegenerateError("normalization: face center at the camera origin");
    k_real.validate();

    const Vec3 forward = face_center / dist;
    const Vec3 inter_ocular = pose.rotation.col(0); // head x-axis in camera frame
    Vec3 down = forward.cross(inter_ocular);
    if (down.norm() < 1e-9) {
        throw DegenerateRollError("normalization: inter-ocular axis parallel to view direction");
    }
    down.normalize();
    const Vec3 right = down.cross(forward).normalized();

    NormalizationTransform out;
    out.gaze_rotation.row(0) = right;
    out.gaze_rotation.row(1) = down;
    out.gaze_rotation.row(2) = forward;
    out.scale = params.norm_distance / dist;

    Eigen::Matrix3d k_virtual = Eigen::Matrix3d::Identity();
    k_virtual(0, 0) = params.virtual_focal;
    k_virtual(1, 1) = params.virtual_focal;
    k_virtual(0, 2) = params.face_patch / 2.0;
    k_virtual(1, 2) = params.face_patch / 2.0;

    Eigen::Matrix3d k_real_m = Eigen::Matrix3d::Identity();
    k_real_m(0, 0) = k_real.fx;
    k_real_m(1, 1) = k_real.fy;
    k_real_m(0, 2) = k_real.cx;
    k_real_m(1, 2) = k_real.cy;

    const Eigen::DiagonalMatrix<double, 3> s(1.0, 1.0, out.scale);
    out.warp = k_virtual * s * out.gaze_rotation * k_real_m.inverse();
    return out;
}

template <typename T>
Image<T> warp_image(const Image<T>& img, const Eigen::Matrix3d& warp, int out_height,
                    int out_width) {
    if (std::abs(warp.determinant()) < 1e-12) {
        throw SingularWarpError("warp_image: warp matrix is singular");
    }
    const Eigen::Matrix3d inv = warp.inverse();
    Image<T> out(out_height, out_width, img.channels());
    for (int v = 0; v < out_height; ++v) {
        for (int u = 0; u < out_width; ++u) {
            const Vec3 src = inv * Vec3(u, v, 1.0);
            if (std::abs(src.z()) < 1e-12) continue; // maps to infinity, leave zero
            const double sx = src.x() / src.z();
            const double sy = src.y() / src.z();
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const double fx = sx - x0;
            const double fy = sy - y0;
            for (int c = 0; c < img.channels(); ++c) {
                auto sample = [&](int y, int x) -> double {
                    return img.contains(y, x) ? static_cast<double>(img.at(y, x, c)) : 0.0;
                };
                const double value = (1.0 - fy) * ((1.0 - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
                                     fy * ((1.0 - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1));
                if constexpr (std::is_integral_v<T>) {
                    out.at(v, u, c) = static_cast<T>(std::lround(std::clamp(
                        value, 0.0, static_cast<double>(std::numeric_limits<T>::max()))));
                } else {
                    out.at(v, u, c) = static_cast<T>(value);
                }
            }
        }
    }
    return out;
}

template Image<std::uint8_t> warp_image(const Image<std::uint8_t>&, const Eigen::Matrix3d&, int, int);
template Image<std::uint16_t> warp_image(const Image<std::uint16_t>&, const Eigen::Matrix3d&, int, int);
template Image<double> warp_image(const Image<double>&, const Eigen::Matrix3d&, int, int);

Landmarks5 warp_landmarks(const Landmarks5& landmarks, const Eigen::Matrix3d& warp) {
    if (std::abs(warp.determinant()) < 1e-12) {
        throw SingularWarpError("warp_landmarks: warp matrix is singular");
    }
    Landmarks5 out;
    for (int i = 0; i < 5; ++i) {
        const Vec3 h = warp * Vec3(landmarks.pts[i].x(), landmarks.pts[i].y(), 1.0);
        if (std::abs(h.z()) < 1e-12) {
            throw SingularWarpError("warp_landmarks: point maps to the plane at infinity");
        }
        out.pts[i] = Eigen::Vector2d(h.x() / h.z(), h.y() / h.z());
    }
    return out;
}

Vec3 normalize_gaze(const Vec3& gaze_cam, const Eigen::Matrix3d& gaze_rotation) {
    return gaze_rotation * gaze_cam;
}

EyeCrops crop_eyes(const ImageU8& face_patch, const Landmarks5& warped, const NormParams& params) {
    const int half = params.eye_patch / 2;
    EyeCrops crops;

    auto crop_at = [&](const Eigen::Vector2d& center) {
        int x0 = static_cast<int>(std::lround(center.x())) - half;
        int y0 = static_cast<int>(std::lround(center.y())) - half;
        const int max_x0 = face_patch.width() - params.eye_patch;
        const int max_y0 = face_patch.height() - params.eye_patch;
        const int cx0 = std::clamp(x0, 0, std::max(max_x0, 0));
        const int cy0 = std::clamp(y0, 0, std::max(max_y0, 0));
        if (cx0 != x0 || cy0 != y0) crops.clamped = true;
        ImageU8 crop(params.eye_patch, params.eye_patch, face_patch.channels());
        for (int y = 0; y < params.eye_patch; ++y) {
            for (int x = 0; x < params.eye_patch; ++x) {
                for (int c = 0; c < face_patch.channels(); ++c) {
                    crop.at(y, x, c) = face_patch.at(cy0 + y, cx0 + x, c);
                }
            }
        }
        return crop;
    };

    crops.right = crop_at(warped.right_eye());
    crops.left = crop_at(warped.left_eye());
    if (params.flip_left_eye) crops.left = flip_horizontal(crops.left);
    return crops;
}

Eigen::Vector3d normalized_head_rotation(const HeadPose& pose, const Eigen::Matrix3d& gaze_rotation) {
    // M = Ry(yaw) * Rx(pitch) * Rz(roll)
    const Eigen::Matrix3d m = gaze_rotation * pose.rotation;
    const double sin_pitch = -m(1, 2);
    const double pitch = std::asin(std::clamp(sin_pitch, -1.0, 1.0));
    if (std::abs(pitch) > M_PI / 2.0 - 1e-6) {
        throw GimbalLockError("normalized_head_rotation: pitch at gimbal lock");
    }
    const double roll = std::atan2(m(1, 0), m(1, 1));
    const double yaw = std::atan2(m(0, 2), m(2, 2));
    return Eigen::Vector3d(roll, pitch, yaw);
}

} // namespace gaze
