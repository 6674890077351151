#include "gazekit/mirror_calibration.hpp"

#include <cmath>

#include "gazekit/least_squares.hpp"
#include "pose_init.hpp"

namespace gaze {

namespace {

using detail::rodrigues;
using detail::rotation_to_axis_angle;

Eigen::Vector2d project_pinhole(const Vec3& p, const Intrinsics& k) {
    return Eigen::Vector2d(k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy);
}

/// Pose of the handedness-flipped board as seen in the mirror.
/// Returns A = R_virtual * diag(-1,1,1) (det -1) and b = t_virtual.
std::pair<Eigen::Matrix3d, Vec3> mirrored_board_pose(const MirrorObservation& obs,
                                                     std::span<const Vec3> board_world,
                                                     const Intrinsics& k) {
    // a mirror view of a chessboard is left-handed; flipping the board
    // x-axis restores a right-handed pose problem
    std::vector<Eigen::Vector2d> plane_coords;
    std::vector<Eigen::Vector2d> norm_image;
    plane_coords.reserve(board_world.size());
    norm_image.reserve(board_world.size());
    for (std::size_t i = 0; i < board_world.size(); ++i) {
        plane_coords.emplace_back(-board_world[i].x(), board_world[i].y());
        norm_image.emplace_back((obs.corners[i].x() - k.cx) / k.fx,
                                (obs.corners[i].y() - k.cy) / k.fy);
    }
    auto [r0, t0] = detail::pose_from_planar_homography(plane_coords, norm_image);

    // short refinement of the virtual pose; the joint solver does the rest
    Eigen::VectorXd x0(6);
    x0.head<3>() = rotation_to_axis_angle(r0);
    x0.tail<3>() = t0;
    const auto residual = [&](const Eigen::VectorXd& x) {
        const Eigen::Matrix3d r = rodrigues(x.head<3>());
        const Vec3 t = x.tail<3>();
        Eigen::VectorXd res(2 * static_cast<Eigen::Index>(board_world.size()));
        for (std::size_t i = 0; i < board_world.size(); ++i) {
            const Vec3 flipped(-board_world[i].x(), board_world[i].y(), board_world[i].z());
            const Vec3 p = r * flipped + t;
            if (p.z() < 1e-9) {
                res.segment<2>(2 * static_cast<Eigen::Index>(i)).setConstant(1e6);
                continue;
            }
            res.segment<2>(2 * static_cast<Eigen::Index>(i)) =
                project_pinhole(p, k) - obs.corners[i];
        }
        return res;
    };
    LmOptions opts;
    opts.max_iterations = 50;
    opts.step_tolerance = 1e-12;
    const LmResult fit = levenberg_marquardt(residual, x0, opts);

    const Eigen::Matrix3d r_virtual = rodrigues(fit.params.head<3>());
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(0, 0) = -1.0;
    return {r_virtual * flip, fit.params.tail<3>()};
}

/// Extrinsic rotation from the per-image virtual poses: each A_i equals
/// S_i * R with S_i a reflection, so A_i R^T must be symmetric. The
/// antisymmetric parts give a homogeneous linear system in the entries of R.
Eigen::Matrix3d rotation_from_virtual_poses(std::span<const Eigen::Matrix3d> a_mats) {
    const auto m = static_cast<Eigen::Index>(a_mats.size());
    Eigen::MatrixXd sys(3 * m, 9);
    sys.setZero();
    const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Matrix3d& a = a_mats[static_cast<std::size_t>(i)];
        for (int e = 0; e < 3; ++e) {
            const int p = pairs[e][0];
            const int q = pairs[e][1];
            for (int col = 0; col < 3; ++col) {
                sys(3 * i + e, 3 * q + col) += a(p, col); // coefficient of R(q, col)
                sys(3 * i + e, 3 * p + col) -= a(q, col); // coefficient of R(p, col)
            }
        }
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys, Eigen::ComputeFullV);
    const Eigen::VectorXd r_vec = svd.matrixV().col(8);
    Eigen::Matrix3d r_raw;
    r_raw << r_vec(0), r_vec(1), r_vec(2), r_vec(3), r_vec(4), r_vec(5), r_vec(6), r_vec(7),
        r_vec(8);
    if (r_raw.determinant() < 0.0) r_raw = -r_raw;
    return detail::orthonormalize(r_raw);
}

} // namespace

std::vector<Vec3> board_world_points(const BoardSpec& spec, const MonitorSpec& monitor) {
    monitor.validate();
    if (spec.columns < 2 || spec.rows < 2 || !(spec.tile_mm > 0.0)) {
        throw ConfigError("board: need at least a 2x2 corner grid with a positive tile size");
    }
    // pixel steps chosen so world-space neighbors are exactly tile_mm apart
    const double step_x = spec.tile_mm * monitor.width_px / monitor.width_mm;
    const double step_y = spec.tile_mm * monitor.height_px / monitor.height_mm;

    std::vector<Vec3> points;
    points.reserve(static_cast<std::size_t>(spec.columns * spec.rows));
    for (int i = 0; i < spec.rows; ++i) {
        for (int j = 0; j < spec.columns; ++j) {
            const ScreenPoint px{spec.origin_px.x + j * step_x, spec.origin_px.y + i * step_y};
            if (px.x < 0.0 || px.x > monitor.width_px || px.y < 0.0 || px.y > monitor.height_px) {
                throw BoardOffScreenError("board corner (" + std::to_string(i) + "," +
                                          std::to_string(j) + ") falls off the screen");
            }
            points.push_back(unproject_screen(px, monitor));
        }
    }
    return points;
}

Vec3 reflect_point(const Vec3& p, const MirrorPlane& plane) {
    return p - 2.0 * (plane.normal.dot(p) - plane.distance) * plane.normal;
}

ScreenPoint project_point(const Vec3& p_cam, const Intrinsics& k) {
    if (!(p_cam.z() > 0.0)) {
        throw BehindCameraError("project_point: point not in front of the camera");
    }
    const Eigen::Vector2d uv = project_pinhole(p_cam, k);
    return ScreenPoint{uv.x(), uv.y()};
}

ExtrinsicsFit solve_extrinsics(std::span<const MirrorObservation> observations,
                               const Intrinsics& k, const BoardSpec& spec,
                               const MonitorSpec& monitor) {
    if (observations.size() < 3) {
        throw TooFewPosesError("solve_extrinsics: need at least 3 mirror poses");
    }
    const std::vector<Vec3> board = board_world_points(spec, monitor);
    for (const auto& obs : observations) {
        if (obs.corners.size() != board.size()) {
            throw ConfigError("solve_extrinsics: corner count does not match the board");
        }
    }
    const auto n_images = static_cast<Eigen::Index>(observations.size());
    const auto n_corners = static_cast<Eigen::Index>(board.size());

    // --- initialization from the virtual (mirrored) poses ----------------
    std::vector<Eigen::Matrix3d> a_mats;
    std::vector<Vec3> b_vecs;
    for (const auto& obs : observations) {
        auto [a, b] = mirrored_board_pose(obs, board, k);
        a_mats.push_back(a);
        b_vecs.push_back(b);
    }
    const Eigen::Matrix3d r0 = rotation_from_virtual_poses(a_mats);

    // reflections and normals per image: S_i = A_i R^T, (I - S_i)/2 = n n^T
    std::vector<Vec3> normals;
    for (const auto& a : a_mats) {
        Eigen::Matrix3d s = a * r0.transpose();
        s = 0.5 * (s + s.transpose()).eval();
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(
            0.5 * (Eigen::Matrix3d::Identity() - s));
        normals.push_back(eig.eigenvectors().col(2).normalized());
    }

    // b_i = S_i t + 2 d_i n_i, linear in (t, d_1..d_m)
    Eigen::MatrixXd lin(3 * n_images, 3 + n_images);
    lin.setZero();
    Eigen::VectorXd rhs(3 * n_images);
    for (Eigen::Index i = 0; i < n_images; ++i) {
        const Eigen::Matrix3d s =
            Eigen::Matrix3d::Identity() -
            2.0 * normals[static_cast<std::size_t>(i)] * normals[static_cast<std::size_t>(i)].transpose();
        lin.block<3, 3>(3 * i, 0) = s;
        lin.block<3, 1>(3 * i, 3 + i) = 2.0 * normals[static_cast<std::size_t>(i)];
        rhs.segment<3>(3 * i) = b_vecs[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd sol = lin.colPivHouseholderQr().solve(rhs);
    const Vec3 t0 = sol.head<3>();

    // parameters: axis-angle(3) + translation(3) + per image mu = n * d (3)
    Eigen::VectorXd x0(6 + 3 * n_images);
    x0.head<3>() = rotation_to_axis_angle(r0);
    x0.segment<3>(3) = t0;
    for (Eigen::Index i = 0; i < n_images; ++i) {
        double d = sol[3 + i];
        Vec3 n = normals[static_cast<std::size_t>(i)];
        if (d < 0.0) { // (n, d) -> (-n, -d) leaves the plane unchanged
            d = -d;
            n = -n;
        }
        x0.segment<3>(6 + 3 * i) = n * d;
    }

    // --- joint refinement -------------------------------------------------
    const auto residual = [&](const Eigen::VectorXd& x) {
        const Eigen::Matrix3d r = rodrigues(x.head<3>());
        const Vec3 t = x.segment<3>(3);
        Eigen::VectorXd res(2 * n_images * n_corners);
        for (Eigen::Index i = 0; i < n_images; ++i) {
            const Vec3 mu = x.segment<3>(6 + 3 * i);
            MirrorPlane plane;
            plane.distance = mu.norm();
            plane.normal = plane.distance > 1e-12 ? Vec3(mu / plane.distance) : Vec3::UnitZ();
            for (Eigen::Index c = 0; c < n_corners; ++c) {
                const Vec3 reflected =
                    reflect_point(r * board[static_cast<std::size_t>(c)] + t, plane);
                const Eigen::Index row = 2 * (i * n_corners + c);
                if (reflected.z() < 1e-9) {
                    res.segment<2>(row).setConstant(1e6);
                    continue;
                }
                res.segment<2>(row) =
                    project_pinhole(reflected, k) -
                    observations[static_cast<std::size_t>(i)].corners[static_cast<std::size_t>(c)];
            }
        }
        return res;
    };

    LmOptions opts;
    opts.max_iterations = 200;
    opts.step_tolerance = 0.0;
    opts.cost_rel_tolerance = 1e-12;
    const LmResult fit = levenberg_marquardt(residual, x0, opts);

    ExtrinsicsFit out{Extrinsics::identity(), {}, 0.0, fit.iterations, fit.converged};
    Eigen::Matrix4d e = Eigen::Matrix4d::Identity();
    e.topLeftCorner<3, 3>() = rodrigues(fit.params.head<3>());
    e.topRightCorner<3, 1>() = fit.params.segment<3>(3);
    out.extrinsics = Extrinsics(e);
    for (Eigen::Index i = 0; i < n_images; ++i) {
        const Vec3 mu = fit.params.segment<3>(6 + 3 * i);
        MirrorPlane plane;
        plane.distance = mu.norm();
        plane.normal = plane.distance > 1e-12 ? Vec3(mu / plane.distance) : Vec3::UnitZ();
        out.mirrors.push_back(plane);
    }
    out.rms_px = std::sqrt(2.0 * fit.cost / static_cast<double>(n_images * n_corners));
    return out;
}

} // namespace gaze
