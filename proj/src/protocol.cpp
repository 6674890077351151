#include "gazekit/protocol.hpp"

#include <cmath>

#include "gazekit/rng.hpp"

namespace gaze {

namespace {

/// Evenly spaced grid centered on the screen, spanning the given fractions
/// of the width and height.
std::vector<ScreenPoint> centered_grid(const MonitorSpec& m, int nx, int ny, double span_x,
                                       double span_y) {
    std::vector<ScreenPoint> pts;
    pts.reserve(static_cast<std::size_t>(nx * ny));
    const double x0 = m.offset_x + m.width_px * (1.0 - span_x) / 2.0;
    const double y0 = m.offset_y + m.height_px * (1.0 - span_y) / 2.0;
    const double dx = m.width_px * span_x / (nx - 1);
    const double dy = m.height_px * span_y / (ny - 1);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            pts.push_back(ScreenPoint{x0 + i * dx, y0 + j * dy});
        }
    }
    return pts;
}

} // namespace

std::vector<TargetPoint> gen_phase1_targets(const MonitorSpec& m, std::uint64_t seed) {
    m.validate();
    Rng rng(seed);
    std::vector<TargetPoint> targets;
    targets.reserve(100);
    for (int i = 0; i < 80; ++i) {
        targets.push_back({ScreenPoint{m.offset_x + rng.uniform(0.0, m.width_px),
                                       m.offset_y + rng.uniform(0.0, m.height_px)},
                           false});
    }
    for (const auto& p : centered_grid(m, 5, 4, 4.0 / 5.0, 3.0 / 4.0)) {
        targets.push_back({p, true});
    }
    rng.shuffle(targets);
    return targets;
}

std::vector<ScreenPoint> gen_phase2_targets(const MonitorSpec& m, std::uint64_t seed) {
    m.validate();
    Rng rng(seed);
    std::vector<ScreenPoint> targets = centered_grid(m, 4, 3, 3.0 / 4.0, 2.0 / 3.0);
    const auto outer = centered_grid(m, 4, 3, 0.98, 0.98);
    for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 4; ++i) {
            if (j == 1 && (i == 1 || i == 2)) continue; // interior of the 4x3 grid
            targets.push_back(outer[static_cast<std::size_t>(j * 4 + i)]);
        }
    }
    rng.shuffle(targets);
    return targets;
}

Phase3Path::Phase3Path(const MonitorSpec& m, ScreenPoint center, double radius_px, double phase,
                       double direction)
    : monitor_(m), center_(center), radius_px_(radius_px), phase_(phase), direction_(direction) {}

Phase3Path Phase3Path::generate(const MonitorSpec& m, std::uint64_t seed) {
    m.validate();
    Rng rng(seed);
    // radius in mm against the smaller physical dimension, converted to
    // pixels horizontally (square pixels assumed throughout)
    const double min_mm = std::min(m.width_mm, m.height_mm);
    const double radius_mm = rng.uniform(0.15 * min_mm, 0.4 * min_mm);
    const double px_per_mm_x = m.width_px / m.width_mm;
    const double px_per_mm_y = m.height_px / m.height_mm;
    const double radius_px = radius_mm * px_per_mm_x;
    const double radius_py = radius_mm * px_per_mm_y;

    const double cx = m.offset_x + rng.uniform(radius_px, m.width_px - radius_px);
    const double cy = m.offset_y + rng.uniform(radius_py, m.height_px - radius_py);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const double direction = rng.uniform() < 0.5 ? 1.0 : -1.0;
    return Phase3Path(m, ScreenPoint{cx, cy}, radius_px, phase, direction);
}

ScreenPoint Phase3Path::sample(double t_seconds) const {
    const double angle = phase_ + direction_ * 2.0 * M_PI * t_seconds / kDurationSeconds;
    const double aspect = (monitor_.height_px / monitor_.height_mm) /
                          (monitor_.width_px / monitor_.width_mm);
    return ScreenPoint{center_.x + radius_px_ * std::cos(angle),
                       center_.y + radius_px_ * aspect * std::sin(angle)};
}

double Phase3Path::add_penalty(const ScreenPoint& mouse, const ScreenPoint& point) {
    const double dx_mm = (mouse.x - point.x) * monitor_.width_mm / monitor_.width_px;
    const double dy_mm = (mouse.y - point.y) * monitor_.height_mm / monitor_.height_px;
    const double dist_mm = std::hypot(dx_mm, dy_mm);
    if (dist_mm > kPointDiameterMm) penalty_mm_ += dist_mm;
    return penalty_mm_;
}

} // namespace gaze
