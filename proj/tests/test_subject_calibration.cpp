#include <doctest.h>

#include <algorithm>

#include "gazekit/rng.hpp"
#include "gazekit/subject_calibration.hpp"

using namespace gaze;

namespace {

std::vector<CalSample> planted_samples(int n, const SubjectBias& bias, double noise, Rng& rng) {
    std::vector<CalSample> samples;
    for (int i = 0; i < n; ++i) {
        CalSample s;
        s.prediction.pitch = rng.uniform(-0.4, 0.4);
        s.prediction.yaw = rng.uniform(-0.6, 0.6);
        s.truth = apply_subject_bias(s.prediction, bias);
        s.truth.pitch += noise * rng.normal();
        s.truth.yaw += noise * rng.normal();
        samples.push_back(s);
    }
    return samples;
}

double rms_after(const std::vector<CalSample>& samples, const SubjectBias& bias) {
    double ss = 0.0;
    for (const auto& s : samples) {
        const GazeAngles fitted = apply_subject_bias(s.prediction, bias);
        ss += (fitted.pitch - s.truth.pitch) * (fitted.pitch - s.truth.pitch) +
              (fitted.yaw - s.truth.yaw) * (fitted.yaw - s.truth.yaw);
    }
    return std::sqrt(ss / static_cast<double>(samples.size()));
}

} // namespace

TEST_CASE("estimate_bias_ls recovers a planted offset and scale exactly") {
    Rng rng(13);
    SubjectBias planted;
    planted.scale_pitch = 0.98 - 1.0;
    planted.scale_yaw = 1.03 - 1.0;
    planted.offset_pitch = 0.0367;
    planted.offset_yaw = -0.013;

    const auto samples = planted_samples(50, planted, 0.0, rng);
    const BiasFit fit = estimate_bias_ls(samples);
    CHECK(fit.bias.scale_pitch == doctest::Approx(planted.scale_pitch).epsilon(1e-9));
    CHECK(fit.bias.scale_yaw == doctest::Approx(planted.scale_yaw).epsilon(1e-9));
    CHECK(fit.bias.offset_pitch == doctest::Approx(planted.offset_pitch).epsilon(1e-9));
    CHECK(fit.bias.offset_yaw == doctest::Approx(planted.offset_yaw).epsilon(1e-9));
    CHECK(fit.residual_pitch < 1e-9);
    CHECK(fit.residual_yaw < 1e-9);
    CHECK_FALSE(fit.degenerate_pitch);
}

TEST_CASE("estimate_bias_ls identity fit") {
    Rng rng(17);
    const auto samples = planted_samples(10, SubjectBias{}, 0.0, rng);
    const BiasFit fit = estimate_bias_ls(samples);
    CHECK(std::abs(fit.bias.scale_pitch) < 1e-12);
    CHECK(std::abs(fit.bias.offset_pitch) < 1e-12);
    CHECK(fit.residual_pitch < 1e-12);
}

TEST_CASE("estimate_bias_ls needs three samples") {
    Rng rng(19);
    const auto two = planted_samples(2, SubjectBias{}, 0.0, rng);
    CHECK_THROWS_AS(estimate_bias_ls(two), TooFewSamplesError);
}

TEST_CASE("degenerate prediction variance falls back to offset-only") {
    std::vector<CalSample> stuck(5);
    for (int i = 0; i < 5; ++i) {
        stuck[static_cast<std::size_t>(i)].prediction = {0.1, 0.2}; // the user stared at one point
        stuck[static_cast<std::size_t>(i)].truth = {0.15, 0.25};
    }
    const BiasFit fit = estimate_bias_ls(stuck);
    CHECK(fit.degenerate_pitch);
    CHECK(fit.degenerate_yaw);
    CHECK(fit.bias.scale_pitch == 0.0);
    CHECK(fit.bias.offset_pitch == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("estimate_offset_only") {
    SUBCASE("single sample gives the exact residual") {
        const CalSample s{{0.1, -0.2}, {0.13, -0.26}};
        const BiasFit fit = estimate_offset_only(std::vector<CalSample>{s});
        CHECK(fit.bias.offset_pitch == doctest::Approx(0.03).epsilon(1e-12));
        CHECK(fit.bias.offset_yaw == doctest::Approx(-0.06).epsilon(1e-12));
        CHECK(fit.bias.scale_pitch == 0.0);
    }

    SUBCASE("planted constant offset is recovered") {
        Rng rng(23);
        SubjectBias planted;
        planted.offset_pitch = 0.02;
        planted.offset_yaw = -0.04;
        const auto samples = planted_samples(40, planted, 0.0, rng);
        const BiasFit fit = estimate_offset_only(samples);
        CHECK(fit.bias.offset_pitch == doctest::Approx(0.02).epsilon(1e-12));
        CHECK(fit.bias.offset_yaw == doctest::Approx(-0.04).epsilon(1e-12));
    }

    SUBCASE("equals the slope-constrained normal equations") {
        Rng rng(29);
        SubjectBias messy;
        messy.scale_pitch = 0.1;
        messy.offset_pitch = 0.01;
        const auto samples = planted_samples(25, messy, 0.01, rng);
        const BiasFit fit = estimate_offset_only(samples);

        // with the slope pinned at 1, the normal equations reduce to
        // b = mean(g - i); build them explicitly as the oracle
        double sum_pitch = 0.0, sum_yaw = 0.0;
        for (const auto& s : samples) {
            sum_pitch += s.truth.pitch - s.prediction.pitch;
            sum_yaw += s.truth.yaw - s.prediction.yaw;
        }
        CHECK(fit.bias.offset_pitch ==
              doctest::Approx(sum_pitch / samples.size()).epsilon(1e-12));
        CHECK(fit.bias.offset_yaw == doctest::Approx(sum_yaw / samples.size()).epsilon(1e-12));
    }

    SUBCASE("empty input is rejected") {
        CHECK_THROWS_AS(estimate_offset_only(std::vector<CalSample>{}), EmptySamplesError);
    }
}

TEST_CASE("least-squares optimality probe") {
    Rng rng(31);
    SubjectBias planted;
    planted.scale_pitch = -0.04;
    planted.scale_yaw = 0.06;
    planted.offset_pitch = 0.02;
    planted.offset_yaw = -0.01;
    const auto samples = planted_samples(30, planted, 0.02, rng);
    const BiasFit fit = estimate_bias_ls(samples);

    auto cost = [&](const SubjectBias& b) {
        double ss = 0.0;
        for (const auto& s : samples) {
            const GazeAngles fitted = apply_subject_bias(s.prediction, b);
            ss += (fitted.pitch - s.truth.pitch) * (fitted.pitch - s.truth.pitch) +
                  (fitted.yaw - s.truth.yaw) * (fitted.yaw - s.truth.yaw);
        }
        return ss;
    };

    const double at_fit = cost(fit.bias);
    for (const double da : {-1e-4, 1e-4}) {
        for (const double db : {-1e-4, 0.0, 1e-4}) {
            SubjectBias p = fit.bias;
            p.scale_pitch += da;
            p.offset_pitch += db;
            CHECK(cost(p) >= at_fit - 1e-15);
            SubjectBias q = fit.bias;
            q.scale_yaw += da;
            q.offset_yaw += db;
            CHECK(cost(q) >= at_fit - 1e-15);
        }
    }
}

TEST_CASE("calibration improves and nests correctly") {
    Rng rng(37);
    SubjectBias planted;
    planted.scale_pitch = 0.08;
    planted.scale_yaw = -0.03;
    planted.offset_pitch = -0.02;
    planted.offset_yaw = 0.03;
    const auto samples = planted_samples(60, planted, 0.03, rng);

    const BiasFit full = estimate_bias_ls(samples);
    const BiasFit offset = estimate_offset_only(samples);

    // applying the fit never increases the calibration-set RMS
    CHECK(rms_after(samples, full.bias) <= rms_after(samples, SubjectBias{}) + 1e-15);
    // offset-only is the a=1 restriction, so full LS is at least as good
    CHECK(rms_after(samples, full.bias) <= rms_after(samples, offset.bias) + 1e-15);
}

TEST_CASE("fit is invariant to sample order") {
    Rng rng(41);
    SubjectBias planted;
    planted.scale_pitch = 0.05;
    planted.offset_yaw = 0.01;
    auto samples = planted_samples(20, planted, 0.02, rng);

    const BiasFit before = estimate_bias_ls(samples);
    std::reverse(samples.begin(), samples.end());
    const BiasFit after = estimate_bias_ls(samples);
    CHECK(before.bias.scale_pitch == doctest::Approx(after.bias.scale_pitch).epsilon(1e-12));
    CHECK(before.bias.offset_pitch == doctest::Approx(after.bias.offset_pitch).epsilon(1e-12));
    CHECK(before.residual_yaw == doctest::Approx(after.residual_yaw).epsilon(1e-12));
}

TEST_CASE("apply_calibration maps each prediction") {
    const BiasFit zero{};
    const std::vector<GazeAngles> preds{{0.1, 0.2}, {-0.3, 0.4}};
    const auto same = apply_calibration(preds, zero);
    CHECK(same[0].pitch == 0.1);
    CHECK(same[1].yaw == 0.4);

    BiasFit fit;
    fit.bias.offset_pitch = 0.5;
    const auto shifted = apply_calibration(preds, fit);
    CHECK(shifted[0].pitch == doctest::Approx(0.6));
    CHECK(shifted[1].pitch == doctest::Approx(0.2));
}
