#pragma once

#include <filesystem>

#include <Eigen/Dense>

#include "gazekit/geometry.hpp"
#include "gazekit/rng.hpp"

namespace gaze::test {

inline Eigen::Matrix3d random_rotation(Rng& rng) {
    const Vec3 axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const double angle = rng.uniform(-M_PI, M_PI);
    return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

inline Eigen::Matrix3d small_random_rotation(Rng& rng, double max_angle) {
    const Vec3 axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    return Eigen::AngleAxisd(rng.uniform(-max_angle, max_angle), axis).toRotationMatrix();
}

inline MonitorSpec test_monitor() {
    MonitorSpec m;
    m.width_px = 3840.0;
    m.height_px = 2160.0;
    m.width_mm = 600.0;
    m.height_mm = 340.0;
    return m;
}

/// Camera-below-screen look-at extrinsics: the camera sits under the bottom
/// edge and points toward a target in front of the screen.
inline Extrinsics camera_below_screen(const MonitorSpec& m, const Vec3& target_world, Rng& rng) {
    const Vec3 cam_pos(rng.uniform(-30.0, 30.0), m.height_mm / 2.0 + rng.uniform(40.0, 100.0),
                       rng.uniform(-10.0, 40.0));
    const Vec3 forward = (target_world - cam_pos).normalized(); // camera z
    Vec3 up_hint(0.0, 1.0, 0.0);
    const Vec3 right = up_hint.cross(forward).normalized();
    const Vec3 down = forward.cross(right).normalized();
    Eigen::Matrix3d r_cam_to_world;
    r_cam_to_world.col(0) = right;
    r_cam_to_world.col(1) = down;
    r_cam_to_world.col(2) = forward;
    const Eigen::Matrix3d r = r_cam_to_world.transpose(); // world -> camera
    return Extrinsics::from_rotation_translation(r, -r * cam_pos);
}

/// A random valid scene for label/prediction round trips.
struct Scene {
    MonitorSpec monitor;
    Extrinsics extrinsics = Extrinsics::identity();
    Eigen::Matrix3d gaze_rotation = Eigen::Matrix3d::Identity();
    Vec3 face_center_cam = Vec3::Zero();
};

inline Scene random_scene(Rng& rng) {
    Scene s;
    s.monitor = test_monitor();
    const Vec3 face_world(rng.uniform(-150.0, 150.0), rng.uniform(-100.0, 100.0),
                          rng.uniform(400.0, 900.0));
    s.extrinsics = camera_below_screen(s.monitor, face_world, rng);
    s.face_center_cam = (s.extrinsics.matrix() * face_world.homogeneous()).head<3>();

    // normalization-style rotation: third row looks at the face center
    const Vec3 forward = s.face_center_cam.normalized();
    const Vec3 x_hint = small_random_rotation(rng, 0.2) * Vec3::UnitX();
    const Vec3 down = forward.cross(x_hint).normalized();
    const Vec3 right = down.cross(forward).normalized();
    s.gaze_rotation.row(0) = right;
    s.gaze_rotation.row(1) = down;
    s.gaze_rotation.row(2) = forward;
    return s;
}

inline std::filesystem::path temp_dir(const char* name) {
    const auto dir = std::filesystem::temp_directory_path() / "gazekit_tests" / name;
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace gaze::test
