#pragma once

#include <array>

#include <Eigen/Dense>

#include "gazekit/geometry.hpp"
#include "gazekit/image.hpp"

namespace gaze {

/// The five facial landmarks in image pixels, in this order:
/// right eye, left eye, nose tip, right mouth corner, left mouth corner.
struct Landmarks5 {
    std::array<Eigen::Vector2d, 5> pts{};

    Eigen::Vector2d& right_eye() { return pts[0]; }
    Eigen::Vector2d& left_eye() { return pts[1]; }
    Eigen::Vector2d& nose() { return pts[2]; }
    const Eigen::Vector2d& right_eye() const { return pts[0]; }
    const Eigen::Vector2d& left_eye() const { return pts[1]; }
    const Eigen::Vector2d& nose() const { return pts[2]; }
};

/// The 3D face model corresponding to Landmarks5, millimeters, in a
/// canonical head frame. Eyes must be symmetric about the x = 0 plane.
struct GenericFaceModel {
    std::array<Vec3, 5> pts{};

    /// Default 5-point model used for tests and as a documented fallback.
    /// Not the model of the reference implementations; real deployments
    /// should load a measured model from configuration.
    static GenericFaceModel default_model();

    void validate() const; // throws DegenerateError
};

struct Intrinsics {
    double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;

    void validate() const; // throws ConfigError
};

/// Head frame -> camera frame rigid transform.
struct HeadPose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Vec3 translation = Vec3::Zero();
};

struct NormParams {
    double virtual_focal = 960.0;  // pixels of the virtual camera
    double norm_distance = 300.0;  // mm
    int face_patch = 448;          // px
    int eye_patch = 112;           // px
    bool flip_left_eye = true;
};

/// Rotation + scale + warp produced by compute_normalization.
struct NormalizationTransform {
    Eigen::Matrix3d gaze_rotation; // R
    double scale = 1.0;            // norm_distance / |c|
    Eigen::Matrix3d warp;          // K_virtual * diag(1,1,scale) * R * K_real^-1
};

struct EyeCrops {
    ImageU8 right;
    ImageU8 left;
    bool clamped = false; // a crop window hit the patch border
};

/// Least-squares head pose from the five landmarks. Homography-based planar
/// initialization refined by Levenberg-Marquardt on the reprojection error;
/// converged when the step norm drops below 1e-10 or after 100 iterations.
/// Throws DegenerateError for collinear landmarks and NoConvergenceError
/// (with the residual in the message) when the refinement stalls early.
HeadPose estimate_head_pose(const Landmarks5& landmarks, const GenericFaceModel& model,
                            const Intrinsics& k);

/// Mean of the two eye points and the nose point, in the camera frame.
Vec3 compute_face_center(const HeadPose& pose, const GenericFaceModel& model);

/// Normalization transform: third row of R looks at the face center, the
/// second row cancels roll against the head's inter-ocular axis, the first
/// completes the right-handed frame. Throws DegenerateRollError when the
/// inter-ocular axis is parallel to the view direction.
NormalizationTransform compute_normalization(const HeadPose& pose, const Vec3& face_center,
                                             const Intrinsics& k_real, const NormParams& params);

/// Perspective warp with bilinear resampling: output(u,v) samples the input
/// at warp^-1 * (u,v,1). Out-of-bounds samples are zero.
/// Throws SingularWarpError when the warp is not invertible.
template <typename T>
Image<T> warp_image(const Image<T>& img, const Eigen::Matrix3d& warp, int out_height,
                    int out_width);

Landmarks5 warp_landmarks(const Landmarks5& landmarks, const Eigen::Matrix3d& warp);

/// Rotation-only gaze normalization g' = R g; the norm is preserved.
Vec3 normalize_gaze(const Vec3& gaze_cam, const Eigen::Matrix3d& gaze_rotation);

/// Axis-aligned eye crops centered on the warped eye landmarks (rounded to
/// integer pixels), clamped at the patch border. The left crop is mirrored
/// horizontally when params.flip_left_eye is set.
EyeCrops crop_eyes(const ImageU8& face_patch, const Landmarks5& warped, const NormParams& params);

/// Normalized head rotation angles (roll, pitch, yaw) extracted from
/// R * pose.rotation with the fixed convention M = Ry(yaw) Rx(pitch) Rz(roll).
/// Throws GimbalLockError when |pitch| > pi/2 - 1e-6.
Eigen::Vector3d normalized_head_rotation(const HeadPose& pose, const Eigen::Matrix3d& gaze_rotation);

} // namespace gaze
