#include "gazekit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gaze {

double angular_error_deg(const GazeAngles& truth, const GazeAngles& predicted) {
    const Vec3 a = angles_to_vector(truth);
    const Vec3 b = angles_to_vector(predicted);
    const double cosine = std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
    return std::acos(cosine) * 180.0 / M_PI;
}

Eigen::Vector2d screen_point_mm(const ScreenPoint& p, const MonitorSpec& m) {
    const Vec3 world = unproject_screen(p, m);
    return Eigen::Vector2d(world.x(), world.y());
}

double euclidean_error_mm(const Eigen::Vector2d& p_mm, const Eigen::Vector2d& q_mm) {
    return (p_mm - q_mm).norm();
}

double euclidean_error_mm(const ScreenPoint& p, const ScreenPoint& q, const MonitorSpec& m) {
    return euclidean_error_mm(screen_point_mm(p, m), screen_point_mm(q, m));
}

MeanErrors mean_errors(std::span<const double> angular_deg, std::span<const double> euclidean_mm) {
    MeanErrors out;
    if (!angular_deg.empty()) {
        double sum = 0.0;
        for (const double e : angular_deg) sum += e;
        out.angular_deg = sum / static_cast<double>(angular_deg.size());
    }
    if (!euclidean_mm.empty()) {
        double sum = 0.0;
        for (const double d : euclidean_mm) sum += d;
        out.euclidean_mm = sum / static_cast<double>(euclidean_mm.size());
    }
    return out;
}

Heatmap error_heatmap(std::span<const double> errors, std::span<const ScreenPoint> points,
                      const MonitorSpec& m, int bins_x, int bins_y) {
    if (errors.size() != points.size()) throw ShapeMismatchError("error_heatmap: size mismatch");
    if (bins_x < 1 || bins_y < 1) throw ConfigError("error_heatmap: need at least one bin");

    Heatmap map;
    map.bins_x = bins_x;
    map.bins_y = bins_y;
    map.mean = Eigen::MatrixXd::Zero(bins_y, bins_x);
    map.counts = Eigen::MatrixXi::Zero(bins_y, bins_x);

    for (std::size_t i = 0; i < points.size(); ++i) {
        const double fx = (points[i].x - m.offset_x) / m.width_px;
        const double fy = (points[i].y - m.offset_y) / m.height_px;
        const int bx = std::clamp(static_cast<int>(fx * bins_x), 0, bins_x - 1);
        const int by = std::clamp(static_cast<int>(fy * bins_y), 0, bins_y - 1);
        map.mean(by, bx) += errors[i];
        map.counts(by, bx) += 1;
    }
    for (int y = 0; y < bins_y; ++y) {
        for (int x = 0; x < bins_x; ++x) {
            if (map.counts(y, x) > 0) {
                map.mean(y, x) /= map.counts(y, x);
            } else {
                map.mean(y, x) = std::numeric_limits<double>::quiet_NaN();
            }
        }
    }
    return map;
}

} // namespace gaze
