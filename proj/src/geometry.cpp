#include "gazekit/geometry.hpp"

#include <cmath>

namespace gaze {

namespace {
constexpr double kZeroNorm = 1e-12;
constexpr double kOrthoTol = 1e-9;
} // namespace

void MonitorSpec::validate() const {
    if (!(width_px > 0.0) || !(height_px > 0.0) || !(width_mm > 0.0) || !(height_mm > 0.0)) {
        throw ConfigError("monitor: pixel and mm dimensions must be positive");
    }
    if (!std::isfinite(offset_x) || !std::isfinite(offset_y)) {
        throw ConfigError("monitor: offsets must be finite");
    }
}

Extrinsics::Extrinsics(const Eigen::Matrix4d& world_to_camera) : e_(world_to_camera) {
    assert_valid();
}

Extrinsics Extrinsics::from_rotation_translation(const Eigen::Matrix3d& r, const Vec3& t) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = r;
    m.topRightCorner<3, 1>() = t;
    return Extrinsics(m);
}

void Extrinsics::assert_valid() const {
    if (!e_.allFinite()) throw InvalidExtrinsicsError("extrinsics: non-finite entries");
    const Eigen::RowVector4d bottom = e_.row(3);
    if ((bottom - Eigen::RowVector4d(0, 0, 0, 1)).norm() > kOrthoTol) {
        throw InvalidExtrinsicsError("extrinsics: bottom row must be (0,0,0,1)");
    }
    const Eigen::Matrix3d r = e_.topLeftCorner<3, 3>();
    if ((r * r.transpose() - Eigen::Matrix3d::Identity()).norm() > 1e-6) {
        throw InvalidExtrinsicsError("extrinsics: rotation block is not orthonormal");
    }
    if (r.determinant() < 0.0) {
        throw InvalidExtrinsicsError("extrinsics: rotation block has negative determinant");
    }
}

Eigen::Matrix4d Extrinsics::inverse_matrix() const {
    const Eigen::Matrix3d rt = rotation().transpose();
    Eigen::Matrix4d inv = Eigen::Matrix4d::Identity();
    inv.topLeftCorner<3, 3>() = rt;
    inv.topRightCorner<3, 1>() = -rt * translation();
    return inv;
}

void ScreenPlane::validate() const {
    if (std::abs(normal().norm() - 1.0) > kOrthoTol) {
        throw ConfigError("screen plane: (a,b,c) must have unit norm");
    }
}

Vec3 angles_to_vector(const GazeAngles& g) {
    const double cp = std::cos(g.pitch);
    return Vec3(-cp * std::sin(g.yaw), std::sin(g.pitch), cp * std::cos(g.yaw));
}

GazeAngles vector_to_angles(const Vec3& v) {
    const double n = v.norm();
    if (n < kZeroNorm) throw ZeroVectorError("vector_to_angles: zero-length vector");
    const Vec3 u = v / n;
    // quadrant-safe yaw; the single-argument arctangent is ambiguous for z < 0
    return GazeAngles{std::asin(u.y()), -std::atan2(u.x(), u.z())};
}

Vec3 unproject_screen(const ScreenPoint& p, const MonitorSpec& m) {
    const double x = (p.x - m.offset_x - m.width_px / 2.0) * m.width_mm / m.width_px;
    const double y = (p.y - m.offset_y - m.height_px / 2.0) * m.height_mm / m.height_px;
    return Vec3(x, y, 0.0);
}

ScreenPoint project_world_to_screen(const Vec3& p3, const MonitorSpec& m, double tolerance_mm) {
    if (std::abs(p3.z()) > tolerance_mm) {
        throw OffPlaneError("project_world_to_screen: point is off the screen plane");
    }
    return ScreenPoint{p3.x() * m.width_px / m.width_mm + m.width_px / 2.0 + m.offset_x,
                       p3.y() * m.height_px / m.height_mm + m.height_px / 2.0 + m.offset_y};
}

Vec3 world_to_camera(const Vec3& p_world, const Extrinsics& e) {
    return e.rotation() * p_world + e.translation();
}

Vec3 camera_to_world(const Vec3& p_camera, const Extrinsics& e) {
    return e.rotation().transpose() * (p_camera - e.translation());
}

Vec3 intersect_ray_plane(const Vec3& origin, const Vec3& direction, const ScreenPlane& plane) {
    const Vec3 n = plane.normal();
    const double denom = n.dot(direction);
    if (std::abs(denom) < kZeroNorm) {
        throw ParallelRayError("intersect_ray_plane: ray is parallel to the plane");
    }
    const double t = -(n.dot(origin) + plane.offset()) / denom;
    if (t <= 0.0) {
        throw BehindOriginError("intersect_ray_plane: intersection behind the ray origin");
    }
    return origin + t * direction;
}

ScreenPoint gaze_point_from_prediction(const GazeAngles& predicted, const Eigen::Matrix3d& gaze_rotation,
                                       const Vec3& face_center_cam, const Extrinsics& e,
                                       const MonitorSpec& m, const ScreenPlane& plane) {
    const Vec3 g3_norm = angles_to_vector(predicted);
    const Vec3 g3_cam = gaze_rotation.transpose() * g3_norm;

    const Eigen::Matrix4d e_inv = e.inverse_matrix();
    const Vec3 origin_world = (e_inv * face_center_cam.homogeneous()).head<3>();
    const Vec3 endpoint_world = (e_inv * (face_center_cam + g3_cam).homogeneous()).head<3>();
    // translation does not preserve free vectors; the ray direction is the
    // difference of the two transformed points
    const Vec3 direction = endpoint_world - origin_world;

    const Vec3 hit = intersect_ray_plane(origin_world, direction, plane);
    return project_world_to_screen(hit, m);
}

GazeAngles compute_gaze_label(const ScreenPoint& target, const Vec3& face_center_cam,
                              const Eigen::Matrix3d& gaze_rotation, const Extrinsics& e,
                              const MonitorSpec& m) {
    const Vec3 target_world = unproject_screen(target, m);
    const Vec3 target_cam = (e.matrix() * target_world.homogeneous()).head<3>();
    const Vec3 g3 = target_cam - face_center_cam;
    if (g3.norm() < kZeroNorm) {
        throw ZeroVectorError("compute_gaze_label: target coincides with the face center");
    }
    const Vec3 g3_norm = gaze_rotation * g3;
    return vector_to_angles(g3_norm);
}

} // namespace gaze
