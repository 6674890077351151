#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gazekit/geometry.hpp"

namespace gaze {

/// Angular error in degrees: arccos of the (clamped) cosine similarity of
/// the two 3D gaze vectors.
double angular_error_deg(const GazeAngles& truth, const GazeAngles& predicted);

/// Screen point in physical mm relative to the screen center.
Eigen::Vector2d screen_point_mm(const ScreenPoint& p, const MonitorSpec& m);

/// Unsquared Euclidean distance between two mm points.
double euclidean_error_mm(const Eigen::Vector2d& p_mm, const Eigen::Vector2d& q_mm);

/// Pixel-space convenience: converts both points through the monitor first.
double euclidean_error_mm(const ScreenPoint& p, const ScreenPoint& q, const MonitorSpec& m);

struct MeanErrors {
    double angular_deg = 0.0;  // e-bar
    double euclidean_mm = 0.0; // d-bar
};

MeanErrors mean_errors(std::span<const double> angular_deg, std::span<const double> euclidean_mm);

struct Heatmap {
    int bins_x = 0;
    int bins_y = 0;
    Eigen::MatrixXd mean;   // bins_y x bins_x, NaN for empty cells
    Eigen::MatrixXi counts;
};

/// Mean error per screen cell; points binned over [0, w) x [0, h).
Heatmap error_heatmap(std::span<const double> errors, std::span<const ScreenPoint> points,
                      const MonitorSpec& m, int bins_x, int bins_y);

} // namespace gaze
