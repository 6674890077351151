#pragma once

#include <span>
#include <vector>

#include "gazekit/fusion.hpp"
#include "gazekit/geometry.hpp"

namespace gaze {

/// A calibration pair: subject-independent prediction and ground truth.
struct CalSample {
    GazeAngles prediction; // i'
    GazeAngles truth;      // g'
};

struct BiasFit {
    SubjectBias bias;
    double residual_pitch = 0.0; // RMS on the calibration set, radians
    double residual_yaw = 0.0;
    bool degenerate_pitch = false; // fell back to offset-only on this axis
    bool degenerate_yaw = false;
};

/// Per-axis least squares g = a*i + b; the pitch and yaw axes are fitted
/// independently. Axes whose prediction variance is below 1e-12 fall back to
/// an offset-only fit and are flagged. Throws TooFewSamplesError for < 3
/// samples.
BiasFit estimate_bias_ls(std::span<const CalSample> samples);

/// Offset-only baseline: per-axis mean residual, scale fixed at zero.
/// Throws EmptySamplesError for an empty span.
BiasFit estimate_offset_only(std::span<const CalSample> samples);

/// Applies the fitted bias to each prediction.
std::vector<GazeAngles> apply_calibration(std::span<const GazeAngles> predictions,
                                          const BiasFit& fit);

} // namespace gaze
