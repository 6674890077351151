#pragma once

#include <Eigen/Dense>

#include "gazekit/errors.hpp"

namespace gaze {

using Vec3 = Eigen::Vector3d;

/// Gaze direction as (pitch, yaw) in radians.
/// pitch in (-pi/2, pi/2), yaw in (-pi, pi).
struct GazeAngles {
    double pitch = 0.0;
    double yaw = 0.0;
};

/// On-screen position in pixels, sub-pixel precision. May lie outside the
/// visible area (off-screen predictions are representable).
struct ScreenPoint {
    double x = 0.0;
    double y = 0.0;
};

/// Physical and pixel dimensions of the monitor. Offsets are in pixels and
/// only nonzero in multi-monitor setups. Square pixels are assumed but not
/// enforced.
struct MonitorSpec {
    double width_px = 0.0;
    double height_px = 0.0;
    double offset_x = 0.0;
    double offset_y = 0.0;
    double width_mm = 0.0;
    double height_mm = 0.0;

    void validate() const; // throws ConfigError
};

/// Rigid world -> camera transform. The 4x4 matrix is validated on
/// construction: bottom row (0,0,0,1), orthonormal rotation, det +1.
class Extrinsics {
public:
    explicit Extrinsics(const Eigen::Matrix4d& world_to_camera);

    static Extrinsics identity() { return Extrinsics(Eigen::Matrix4d::Identity()); }
    static Extrinsics from_rotation_translation(const Eigen::Matrix3d& r, const Vec3& t);

    const Eigen::Matrix4d& matrix() const { return e_; }
    Eigen::Matrix3d rotation() const { return e_.topLeftCorner<3, 3>(); }
    Vec3 translation() const { return e_.topRightCorner<3, 1>(); }

    /// Rigid inverse (camera -> world transform).
    Eigen::Matrix4d inverse_matrix() const;

    /// Re-checks the construction invariants; throws InvalidExtrinsicsError.
    void assert_valid() const;

private:
    Eigen::Matrix4d e_;
};

/// Plane a*x + b*y + c*z + d = 0 in world coordinates with unit normal
/// (a,b,c). Default is the screen plane z = 0.
struct ScreenPlane {
    Eigen::Vector4d coeffs{0.0, 0.0, 1.0, 0.0};

    Vec3 normal() const { return coeffs.head<3>(); }
    double offset() const { return coeffs[3]; }
    void validate() const; // throws ConfigError when |(a,b,c)| != 1
};

/// (pitch, yaw) -> unit direction (-cos p sin y, sin p, cos p cos y).
Vec3 angles_to_vector(const GazeAngles& g);

/// Unit direction -> (pitch, yaw). Normalizes internally.
/// Throws ZeroVectorError when |v| < 1e-12.
GazeAngles vector_to_angles(const Vec3& v);

/// Screen pixel -> world point in mm on the screen plane z = 0.
Vec3 unproject_screen(const ScreenPoint& p, const MonitorSpec& m);

/// Exact inverse of unproject_screen. The point must lie in the screen plane
/// (|z| <= tolerance, mm); throws OffPlaneError otherwise.
ScreenPoint project_world_to_screen(const Vec3& p3, const MonitorSpec& m,
                                    double tolerance_mm = 1e-6);

Vec3 world_to_camera(const Vec3& p_world, const Extrinsics& e);
Vec3 camera_to_world(const Vec3& p_camera, const Extrinsics& e);

/// First intersection of the ray origin + t*direction (t > 0) with the plane.
/// Throws ParallelRayError when |normal . direction| < 1e-12 and
/// BehindOriginError when the intersection lies at t <= 0.
Vec3 intersect_ray_plane(const Vec3& origin, const Vec3& direction, const ScreenPlane& plane);

/// Un-normalizes predicted gaze angles and intersects the gaze ray with the
/// screen plane: g3' -> R^-1 g3' -> world ray from the face center -> plane
/// intersection -> pixels.
ScreenPoint gaze_point_from_prediction(const GazeAngles& predicted, const Eigen::Matrix3d& gaze_rotation,
                                       const Vec3& face_center_cam, const Extrinsics& e,
                                       const MonitorSpec& m, const ScreenPlane& plane = {});

/// Gaze label used during data collection: the normalized angles of the
/// vector from the face center to the on-screen target.
/// Throws ZeroVectorError when the target coincides with the face center.
GazeAngles compute_gaze_label(const ScreenPoint& target, const Vec3& face_center_cam,
                              const Eigen::Matrix3d& gaze_rotation, const Extrinsics& e,
                              const MonitorSpec& m);

} // namespace gaze
