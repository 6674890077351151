#pragma once

#include <span>
#include <vector>

#include "gazekit/geometry.hpp"
#include "gazekit/normalization.hpp" // Intrinsics

namespace gaze {

/// On-screen checkerboard: inner-corner grid with a known tile size, placed
/// by its top-left corner pixel.
struct BoardSpec {
    int columns = 10;
    int rows = 5;
    double tile_mm = 50.0;
    ScreenPoint origin_px{0.0, 0.0};
};

/// Detected corner pixels of one mirror pose, row-major board order.
struct MirrorObservation {
    std::vector<Eigen::Vector2d> corners;
};

/// Planar mirror in the camera frame: unit normal and signed distance,
/// n . x = d with d > 0 (mirror in front of the camera).
struct MirrorPlane {
    Vec3 normal = Vec3::UnitZ();
    double distance = 0.0;
};

struct ExtrinsicsFit {
    Extrinsics extrinsics;
    std::vector<MirrorPlane> mirrors;
    double rms_px = 0.0;
    int iterations = 0;
    bool converged = true;
};

/// World coordinates (z = 0, mm) of the board corners, row-major. The pixel
/// step per axis is chosen so neighbors are exactly tile_mm apart in world
/// units. Throws BoardOffScreenError when a corner leaves the screen.
std::vector<Vec3> board_world_points(const BoardSpec& spec, const MonitorSpec& monitor);

/// Householder reflection of a point across the mirror plane.
Vec3 reflect_point(const Vec3& p, const MirrorPlane& plane);

/// Pinhole projection of a camera-frame point. Throws BehindCameraError for
/// z <= 0.
ScreenPoint project_point(const Vec3& p_cam, const Intrinsics& k);

/// Recovers the world -> camera extrinsics from checkerboard observations
/// through a planar mirror: joint nonlinear least squares over the 6-DOF
/// extrinsics and one 3-DOF plane per image, initialized from per-image pose
/// fits of the handedness-flipped board. Requires >= 3 poses. Throws
/// TooFewPosesError and NoConvergenceError (with the best fit available in
/// the message).
ExtrinsicsFit solve_extrinsics(std::span<const MirrorObservation> observations,
                               const Intrinsics& k, const BoardSpec& spec,
                               const MonitorSpec& monitor);

} // namespace gaze
