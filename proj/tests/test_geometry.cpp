#include <doctest.h>

#include "gazekit/geometry.hpp"
#include "gazekit/serial.hpp"
#include "helpers.hpp"

#include <nlohmann/json.hpp>

using namespace gaze;

TEST_CASE("angles_to_vector reference values") {
    const Vec3 straight = angles_to_vector({0.0, 0.0});
    CHECK(straight.isApprox(Vec3(0, 0, 1), 1e-12));

    const Vec3 pole = angles_to_vector({M_PI / 2.0, 0.0});
    CHECK(pole.y() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(pole.x()) < 1e-12);

    // frozen against a direct high-precision evaluation of the formula
    const Vec3 v = angles_to_vector({0.2, -0.3});
    CHECK(v.x() == doctest::Approx(0.28963).epsilon(1e-4));
    CHECK(v.y() == doctest::Approx(0.19867).epsilon(1e-4));
    CHECK(v.z() == doctest::Approx(0.93630).epsilon(1e-4));
}

TEST_CASE("angles_to_vector returns unit vectors over the whole domain") {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const GazeAngles g{rng.uniform(-M_PI / 2 + 1e-6, M_PI / 2 - 1e-6),
                           rng.uniform(-M_PI + 1e-9, M_PI - 1e-9)};
        CHECK(std::abs(angles_to_vector(g).norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("vector_to_angles basics and errors") {
    const GazeAngles g = vector_to_angles(Vec3(0, 0, 1));
    CHECK(g.pitch == doctest::Approx(0.0));
    CHECK(g.yaw == doctest::Approx(0.0));
    CHECK_THROWS_AS(vector_to_angles(Vec3::Zero()), ZeroVectorError);
}

TEST_CASE("angle/vector round trip") {
    Rng rng(11);
    double max_err = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const GazeAngles g{rng.uniform(-M_PI / 2 + 1e-3, M_PI / 2 - 1e-3),
                           rng.uniform(-M_PI + 1e-3, M_PI - 1e-3)};
        const GazeAngles back = vector_to_angles(angles_to_vector(g));
        max_err = std::max({max_err, std::abs(back.pitch - g.pitch), std::abs(back.yaw - g.yaw)});
    }
    CHECK(max_err < 1e-9);

    // direction round trip for z > 0
    for (int i = 0; i < 1000; ++i) {
        Vec3 v(rng.normal(), rng.normal(), std::abs(rng.normal()) + 1e-3);
        v.normalize();
        const Vec3 back = angles_to_vector(vector_to_angles(v));
        CHECK((back - v).norm() < 1e-9);
    }
}

TEST_CASE("unproject_screen reference values") {
    MonitorSpec m = test::test_monitor();

    const Vec3 center = unproject_screen({m.width_px / 2, m.height_px / 2}, m);
    CHECK(center.norm() < 1e-12);

    const Vec3 corner = unproject_screen({0, 0}, m);
    CHECK(corner.x() == doctest::Approx(-m.width_mm / 2));
    CHECK(corner.y() == doctest::Approx(-m.height_mm / 2));

    const Vec3 p = unproject_screen({960, 540}, m);
    CHECK(p.x() == doctest::Approx(-150.0).epsilon(1e-12));
    CHECK(p.y() == doctest::Approx(-85.0).epsilon(1e-12));
    CHECK(p.z() == 0.0);
}

TEST_CASE("unproject_screen honors pixel offsets") {
    MonitorSpec m = test::test_monitor();
    m.offset_x = 100.0;
    m.offset_y = 50.0;
    const Vec3 center =
        unproject_screen({m.offset_x + m.width_px / 2, m.offset_y + m.height_px / 2}, m);
    CHECK(center.norm() < 1e-12);
}

TEST_CASE("project_world_to_screen inverts unproject_screen") {
    const MonitorSpec m = test::test_monitor();
    const ScreenPoint center = project_world_to_screen(Vec3::Zero(), m);
    CHECK(center.x == doctest::Approx(m.width_px / 2));
    CHECK(center.y == doctest::Approx(m.height_px / 2));

    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const ScreenPoint p{rng.uniform(-500.0, m.width_px + 500.0),
                            rng.uniform(-500.0, m.height_px + 500.0)};
        const ScreenPoint back = project_world_to_screen(unproject_screen(p, m), m);
        CHECK(std::abs(back.x - p.x) < 1e-9);
        CHECK(std::abs(back.y - p.y) < 1e-9);
    }

    CHECK_THROWS_AS(project_world_to_screen(Vec3(0, 0, 5.0), m), OffPlaneError);
}

TEST_CASE("world/camera transforms") {
    const Extrinsics identity = Extrinsics::identity();
    const Vec3 p(1, 2, 3);
    CHECK(world_to_camera(p, identity).isApprox(p));

    Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
    t(2, 3) = 100.0;
    const Extrinsics translation(t);
    CHECK(world_to_camera(Vec3::Zero(), translation).isApprox(Vec3(0, 0, 100)));

    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const Extrinsics e = Extrinsics::from_rotation_translation(
            test::random_rotation(rng),
            Vec3(rng.uniform(-500, 500), rng.uniform(-500, 500), rng.uniform(-500, 500)));
        const Vec3 q(rng.uniform(-1000, 1000), rng.uniform(-1000, 1000), rng.uniform(-1000, 1000));
        CHECK((camera_to_world(world_to_camera(q, e), e) - q).norm() < 1e-9);
        CHECK((world_to_camera(camera_to_world(q, e), e) - q).norm() < 1e-9);
    }
}

TEST_CASE("extrinsics invariants are validated") {
    Eigen::Matrix4d bad_bottom = Eigen::Matrix4d::Identity();
    bad_bottom(3, 0) = 0.5;
    CHECK_THROWS_AS(Extrinsics{bad_bottom}, InvalidExtrinsicsError);

    Eigen::Matrix4d bad_rot = Eigen::Matrix4d::Identity();
    bad_rot(0, 0) = 2.0;
    CHECK_THROWS_AS(Extrinsics{bad_rot}, InvalidExtrinsicsError);

    Eigen::Matrix4d reflection = Eigen::Matrix4d::Identity();
    reflection(0, 0) = -1.0; // det -1
    CHECK_THROWS_AS(Extrinsics{reflection}, InvalidExtrinsicsError);
}

TEST_CASE("intersect_ray_plane") {
    const ScreenPlane plane; // z = 0
    const Vec3 hit = intersect_ray_plane(Vec3(0, 0, 600), Vec3(0, 0, -1), plane);
    CHECK(hit.norm() < 1e-12);

    CHECK_THROWS_AS(intersect_ray_plane(Vec3(0, 0, 600), Vec3(1, 0, 0), plane), ParallelRayError);
    CHECK_THROWS_AS(intersect_ray_plane(Vec3(0, 0, 600), Vec3(0, 0, 1), plane), BehindOriginError);

    // direction built from two points lands on the second point
    const Vec3 origin(100, 50, 600);
    const Vec3 target(-30, 40, 0);
    const Vec3 p = intersect_ray_plane(origin, target - origin, plane);
    CHECK((p - target).norm() < 1e-9);
}

TEST_CASE("gaze_point_from_prediction straight-ahead case") {
    const MonitorSpec m = test::test_monitor();
    const GazeAngles toward_screen = vector_to_angles(Vec3(0, 0, -1));
    const ScreenPoint p = gaze_point_from_prediction(
        toward_screen, Eigen::Matrix3d::Identity(), Vec3(0, 0, 600), Extrinsics::identity(), m);
    CHECK(p.x == doctest::Approx(m.width_px / 2));
    CHECK(p.y == doctest::Approx(m.height_px / 2));
}

TEST_CASE("gaze parallel to the screen has no gaze point") {
    const GazeAngles parallel = vector_to_angles(Vec3(1, 0, 0));
    CHECK_THROWS_AS(gaze_point_from_prediction(parallel, Eigen::Matrix3d::Identity(),
                                               Vec3(0, 0, 600), Extrinsics::identity(),
                                               test::test_monitor()),
                    ParallelRayError);
}

TEST_CASE("compute_gaze_label basics") {
    const MonitorSpec m = test::test_monitor();
    // face center directly behind a pixel along -z, identity R and E
    const ScreenPoint pixel{1000.0, 700.0};
    const Vec3 pixel_world = unproject_screen(pixel, m);
    const Vec3 face = pixel_world - Vec3(0, 0, 600);
    const GazeAngles g = compute_gaze_label(pixel, face, Eigen::Matrix3d::Identity(),
                                            Extrinsics::identity(), m);
    CHECK(std::abs(g.pitch) < 1e-12);
    CHECK(std::abs(g.yaw) < 1e-12);

    CHECK_THROWS_AS(compute_gaze_label(pixel, pixel_world, Eigen::Matrix3d::Identity(),
                                       Extrinsics::identity(), m),
                    ZeroVectorError);
}

TEST_CASE("label/prediction round trip over random scenes") {
    Rng rng(2024);
    double max_err = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const test::Scene s = test::random_scene(rng);
        const ScreenPoint pixel{rng.uniform(0.0, s.monitor.width_px),
                                rng.uniform(0.0, s.monitor.height_px)};
        const GazeAngles label = compute_gaze_label(pixel, s.face_center_cam, s.gaze_rotation,
                                                    s.extrinsics, s.monitor);
        const ScreenPoint back = gaze_point_from_prediction(
            label, s.gaze_rotation, s.face_center_cam, s.extrinsics, s.monitor);
        max_err = std::max({max_err, std::abs(back.x - pixel.x), std::abs(back.y - pixel.y)});
    }
    CHECK(max_err < 1e-6);
}

TEST_CASE("extrinsics and monitor JSON round trip") {
    Rng rng(99);
    const Extrinsics e =
        Extrinsics::from_rotation_translation(test::random_rotation(rng), Vec3(10, -20, 30));
    const Extrinsics back = extrinsics_from_json(extrinsics_to_json(e));
    CHECK((back.matrix() - e.matrix()).norm() < 1e-15);

    const MonitorSpec m = test::test_monitor();
    const MonitorSpec mb = monitor_from_json(monitor_to_json(m));
    CHECK(mb.width_px == m.width_px);
    CHECK(mb.height_mm == m.height_mm);

    CHECK_THROWS_AS(monitor_from_json(nlohmann::json{{"width_px", 100}}), SchemaError);
}
