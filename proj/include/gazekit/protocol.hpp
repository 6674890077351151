#pragma once

#include <cstdint>
#include <vector>

#include "gazekit/geometry.hpp"

namespace gaze {

struct TargetPoint {
    ScreenPoint point;
    bool on_grid = false;
};

/// Single-point-single-sample targets: 80 uniform random points plus the 20
/// points of a centered 5x4 grid spanning 4/5 x 3/4 of the screen, shuffled.
std::vector<TargetPoint> gen_phase1_targets(const MonitorSpec& m, std::uint64_t seed);

/// Single-point-continuous targets: the 12 points of a centered 4x3 grid
/// spanning 3/4 x 2/3 plus the 10 perimeter points of a 4x3 grid spanning
/// 98% of the screen, shuffled (22 points total).
std::vector<ScreenPoint> gen_phase2_targets(const MonitorSpec& m, std::uint64_t seed);

/// Moving-point-continuous phase: a random circular path traversed at
/// uniform angular speed, plus the mouse-distance penalty accounting.
class Phase3Path {
public:
    static constexpr double kDurationSeconds = 20.0;
    static constexpr double kPointDiameterMm = 4.7;
    static constexpr double kAbortPenaltyMm = 350.0;

    /// Circle fully on screen; radius drawn from [0.15, 0.4] * min(W, H).
    static Phase3Path generate(const MonitorSpec& m, std::uint64_t seed);

    /// Moving point at time t (seconds); one revolution over the duration.
    ScreenPoint sample(double t_seconds) const;

    /// Accumulates the mm distance between mouse and point whenever it
    /// exceeds the point diameter; returns the updated total.
    double add_penalty(const ScreenPoint& mouse, const ScreenPoint& point);

    /// Set once the accumulated penalty exceeds the abort threshold.
    bool aborted() const { return penalty_mm_ > kAbortPenaltyMm; }
    double penalty_mm() const { return penalty_mm_; }

    ScreenPoint center() const { return center_; }
    double radius_px() const { return radius_px_; }

private:
    Phase3Path(const MonitorSpec& m, ScreenPoint center, double radius_px, double phase,
               double direction);

    MonitorSpec monitor_;
    ScreenPoint center_;
    double radius_px_ = 0.0;
    double phase_ = 0.0;
    double direction_ = 1.0;
    double penalty_mm_ = 0.0;
};

} // namespace gaze
