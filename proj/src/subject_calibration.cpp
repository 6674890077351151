#include "gazekit/subject_calibration.hpp"

#include <cmath>

namespace gaze {

namespace {

struct AxisFit {
    double scale_centered = 0.0;
    double offset = 0.0;
    double residual_rms = 0.0;
    bool degenerate = false;
};

AxisFit fit_axis(std::span<const CalSample> samples, bool pitch_axis, bool allow_scale) {
    const auto n = static_cast<double>(samples.size());
    auto pred = [&](const CalSample& s) { return pitch_axis ? s.prediction.pitch : s.prediction.yaw; };
    auto truth = [&](const CalSample& s) { return pitch_axis ? s.truth.pitch : s.truth.yaw; };

    double sum_x = 0.0, sum_y = 0.0, sum_xx = 0.0, sum_xy = 0.0;
    for (const auto& s : samples) {
        sum_x += pred(s);
        sum_y += truth(s);
        sum_xx += pred(s) * pred(s);
        sum_xy += pred(s) * truth(s);
    }
    const double mean_x = sum_x / n;
    const double var_x = sum_xx / n - mean_x * mean_x;

    AxisFit fit;
    if (allow_scale && var_x > 1e-12) {
        // 2x2 normal equations for g = a*i + b
        const double a = (n * sum_xy - sum_x * sum_y) / (n * sum_xx - sum_x * sum_x);
        const double b = (sum_y - a * sum_x) / n;
        fit.scale_centered = a - 1.0;
        fit.offset = b;
    } else {
        fit.degenerate = allow_scale; // flagged only when a scale fit was requested
        fit.offset = (sum_y - sum_x) / n;
    }

    double ss = 0.0;
    for (const auto& s : samples) {
        const double fitted = pred(s) * (1.0 + fit.scale_centered) + fit.offset;
        ss += (fitted - truth(s)) * (fitted - truth(s));
    }
    fit.residual_rms = std::sqrt(ss / n);
    return fit;
}

BiasFit assemble(const AxisFit& pitch, const AxisFit& yaw) {
    BiasFit out;
    out.bias.offset_pitch = pitch.offset;
    out.bias.offset_yaw = yaw.offset;
    out.bias.scale_pitch = pitch.scale_centered;
    out.bias.scale_yaw = yaw.scale_centered;
    out.residual_pitch = pitch.residual_rms;
    out.residual_yaw = yaw.residual_rms;
    out.degenerate_pitch = pitch.degenerate;
    out.degenerate_yaw = yaw.degenerate;
    return out;
}

} // namespace

BiasFit estimate_bias_ls(std::span<const CalSample> samples) {
    if (samples.size() < 3) {
        throw TooFewSamplesError("estimate_bias_ls: need at least 3 calibration samples");
    }
    return assemble(fit_axis(samples, true, true), fit_axis(samples, false, true));
}

BiasFit estimate_offset_only(std::span<const CalSample> samples) {
    if (samples.empty()) {
        throw EmptySamplesError("estimate_offset_only: no calibration samples");
    }
    return assemble(fit_axis(samples, true, false), fit_axis(samples, false, false));
}

std::vector<GazeAngles> apply_calibration(std::span<const GazeAngles> predictions,
                                          const BiasFit& fit) {
    std::vector<GazeAngles> out;
    out.reserve(predictions.size());
    for (const auto& p : predictions) out.push_back(apply_subject_bias(p, fit.bias));
    return out;
}

} // namespace gaze
