#include <doctest.h>

#include <set>

#include "gazekit/depthproc.hpp"
#include "gazekit/rng.hpp"

using namespace gaze;

namespace {

DepthMap random_depth(int h, int w, Rng& rng, double missing_fraction = 0.1) {
    DepthMap d(h, w, 1);
    for (auto& v : d.storage()) {
        v = rng.uniform() < missing_fraction
                ? std::uint16_t{0}
                : static_cast<std::uint16_t>(rng.uniform_int(300, 1200));
    }
    return d;
}

/// Brute-force mask: a pixel is invalid iff some in-range pixel within
/// Euclidean distance r has a value inside the missing window.
ValidityMask brute_force_mask(const ImageF64& eq, double missing, double range, int r) {
    ValidityMask mask(eq.height(), eq.width(), 1, 1);
    for (int y = 0; y < eq.height(); ++y) {
        for (int x = 0; x < eq.width(); ++x) {
            bool valid = true;
            for (int yy = 0; yy < eq.height() && valid; ++yy) {
                for (int xx = 0; xx < eq.width() && valid; ++xx) {
                    const int dy = yy - y, dx = xx - x;
                    if (dy * dy + dx * dx > r * r) continue;
                    if (std::abs(eq.at(yy, xx) - missing) <= range) valid = false;
                }
            }
            mask.at(y, x) = valid ? 1 : 0;
        }
    }
    return mask;
}

} // namespace

TEST_CASE("histogram_equalize on an all-missing map") {
    const DepthMap zeros(8, 8, 1, 0);
    const EqualizedDepth eq = histogram_equalize(zeros);
    CHECK(eq.all_missing);
    CHECK(eq.levels.empty());
    for (const double v : eq.values.storage()) CHECK(v == -1.0);
}

TEST_CASE("histogram_equalize two-value reference") {
    // 25% at 1000 mm, 75% at 2000 mm -> levels -0.5 and 1.0
    DepthMap d(2, 2, 1);
    d.at(0, 0) = 1000;
    d.at(0, 1) = 2000;
    d.at(1, 0) = 2000;
    d.at(1, 1) = 2000;
    const EqualizedDepth eq = histogram_equalize(d);
    CHECK(eq.values.at(0, 0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(eq.values.at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(eq.all_missing);
}

TEST_CASE("equalization is monotone and missing maps to -1") {
    Rng rng(9);
    const DepthMap d = random_depth(32, 32, rng);
    const EqualizedDepth eq = histogram_equalize(d);
    for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) {
            if (d.at(y, x) == 0) {
                CHECK(eq.values.at(y, x) == -1.0);
            } else {
                CHECK(eq.values.at(y, x) > -1.0);
                CHECK(eq.values.at(y, x) <= 1.0);
            }
        }
    }
    // monotone over the lookup table
    for (std::size_t i = 1; i < eq.levels.size(); ++i) {
        CHECK(eq.levels[i] > eq.levels[i - 1]);
        CHECK(eq.depths[i] > eq.depths[i - 1]);
    }
}

TEST_CASE("undo_equalization round trip") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const DepthMap d = random_depth(24, 24, rng, 0.2);
        const EqualizedDepth eq = histogram_equalize(d);
        if (eq.all_missing) continue;
        for (int y = 0; y < d.height(); ++y) {
            for (int x = 0; x < d.width(); ++x) {
                if (d.at(y, x) == 0) continue;
                CHECK(undo_equalization(eq.values.at(y, x), eq) ==
                      doctest::Approx(static_cast<double>(d.at(y, x))));
            }
        }
        // the level of the maximum depth maps back to that depth
        CHECK(undo_equalization(1.0, eq) == doctest::Approx(static_cast<double>(eq.depths.back())));
    }

    EqualizedDepth empty;
    CHECK_THROWS_AS(undo_equalization(0.0, empty), EmptyTableError);
}

TEST_CASE("compute_valid_mask simple cases") {
    ImageF64 clean(16, 16, 1, 0.5);
    const ValidityMask all = compute_valid_mask(clean);
    for (const auto v : all.storage()) CHECK(v == 1);

    ImageF64 one(41, 41, 1, 0.5);
    one.at(20, 20) = -1.0;
    const ValidityMask mask = compute_valid_mask(one, -1.0, 0.01, 12);
    for (int y = 0; y < 41; ++y) {
        for (int x = 0; x < 41; ++x) {
            const int dy = y - 20, dx = x - 20;
            const bool inside = dy * dy + dx * dx <= 144;
            CHECK(mask.at(y, x) == (inside ? 0 : 1));
        }
    }

    // zero radius only invalidates the missing pixels themselves
    const ValidityMask r0 = compute_valid_mask(one, -1.0, 0.01, 0);
    for (int y = 0; y < 41; ++y) {
        for (int x = 0; x < 41; ++x) CHECK(r0.at(y, x) == ((y == 20 && x == 20) ? 0 : 1));
    }
}

TEST_CASE("compute_valid_mask equals the brute-force definition") {
    Rng rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        const int h = static_cast<int>(rng.uniform_int(8, 48));
        const int w = static_cast<int>(rng.uniform_int(8, 48));
        const DepthMap d = random_depth(h, w, rng, 0.08);
        const EqualizedDepth eq = histogram_equalize(d);
        for (const int r : {0, 3, 12}) {
            const ValidityMask fast = compute_valid_mask(eq.values, -1.0, 0.01, r);
            const ValidityMask slow = brute_force_mask(eq.values, -1.0, 0.01, r);
            CHECK(fast == slow);
        }
    }
}

TEST_CASE("augment_missing determinism and reporting") {
    Rng rng(5);
    DepthMap d(64, 64, 1);
    for (auto& v : d.storage()) v = static_cast<std::uint16_t>(rng.uniform_int(400, 900));

    AugmentSpec spec;
    spec.big_min = 16;
    spec.big_max = 24;
    spec.small_min = 3;
    spec.small_max = 6;

    const AugmentResult a = augment_missing(d, spec, 42);
    const AugmentResult b = augment_missing(d, spec, 42);
    CHECK(a.map == b.map);
    CHECK(a.patches.size() == b.patches.size());

    // every altered pixel lies inside a reported rectangle and equals zero
    for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) {
            if (a.map.at(y, x) == d.at(y, x)) continue;
            CHECK(a.map.at(y, x) == 0);
            bool covered = false;
            for (const auto& r : a.patches) {
                if (x >= r.x && x < r.x + r.width && y >= r.y && y < r.y + r.height) {
                    covered = true;
                    break;
                }
            }
            CHECK(covered);
        }
    }

    // augmentation never creates nonzero values
    DepthMap with_holes = d;
    with_holes.at(5, 5) = 0;
    const AugmentResult c = augment_missing(with_holes, spec, 7);
    CHECK(c.map.at(5, 5) == 0);

    // a different seed can draw zero patches; the input stays untouched then
    bool saw_empty = false;
    for (std::uint64_t seed = 0; seed < 200 && !saw_empty; ++seed) {
        const AugmentResult r = augment_missing(d, spec, seed);
        if (r.patches.empty()) {
            CHECK(r.map == d);
            saw_empty = true;
        }
    }
    CHECK(saw_empty);
}

TEST_CASE("eye_region_min_depth") {
    DepthMap d(64, 64, 1, 500);
    CHECK(eye_region_min_depth(d, {20, 20}, {44, 20}, 11) == std::pair{500.0, 500.0});

    d.at(18, 22) = 0; // inside the right window
    auto [right, left] = eye_region_min_depth(d, {20, 20}, {44, 20}, 11);
    CHECK(right == 0.0);
    CHECK(left == 500.0);

    // exhaustive scan oracle on a random image, window clipped at borders
    Rng rng(31);
    DepthMap r(32, 32, 1);
    for (auto& v : r.storage()) v = static_cast<std::uint16_t>(rng.uniform_int(0, 1000));
    const Eigen::Vector2d right_eye(2.0, 30.0), left_eye(29.0, 1.0);
    const int region = 9;
    auto oracle = [&](const Eigen::Vector2d& eye) {
        double best = 1e18;
        for (int y = 0; y < 32; ++y) {
            for (int x = 0; x < 32; ++x) {
                if (std::abs(x - eye.x()) <= region / 2 && std::abs(y - eye.y()) <= region / 2) {
                    best = std::min(best, static_cast<double>(r.at(y, x)));
                }
            }
        }
        return best;
    };
    const auto [mr, ml] = eye_region_min_depth(r, right_eye, left_eye, region);
    CHECK(mr == oracle(right_eye));
    CHECK(ml == oracle(left_eye));
}

TEST_CASE("filter_target_set") {
    DepthMap good(64, 64, 1, 500);
    DepthMap bad(64, 64, 1, 500);
    bad.at(10, 10) = 150; // below the 200 mm threshold, inside the right eye window

    EyeFilterParams params;
    params.region = 21;
    params.threshold_mm = 200.0;

    const Eigen::Vector2d right_eye(10.0, 10.0), left_eye(50.0, 10.0);
    std::vector<EyeFilterSample> samples(3);
    samples[0] = {&good, right_eye, left_eye};
    samples[1] = {&bad, right_eye, left_eye};
    samples[2] = {&good, std::nullopt, left_eye}; // missing landmarks

    const auto report = filter_target_set(samples, params);
    REQUIRE(report.size() == 3);
    CHECK(report[0].kept);
    CHECK_FALSE(report[1].kept);
    CHECK(report[1].min_right == 150.0);
    CHECK(report[2].missing_landmarks);
    CHECK_FALSE(report[2].kept);

    const auto kept = kept_indices(report);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0] == 0);

    // re-filtering the kept subset keeps everything (idempotence)
    std::vector<EyeFilterSample> kept_samples{samples[0]};
    const auto again = filter_target_set(kept_samples, params);
    CHECK(kept_indices(again).size() == 1);
}

TEST_CASE("masked_l1_loss") {
    ImageF64 pred(4, 4, 1, 0.0);
    ImageF64 target(4, 4, 1, 0.0);
    ValidityMask mask(4, 4, 1, 1);
    CHECK(masked_l1_loss(pred, target, mask) == 0.0);

    // half the pixels differ by 0.2 -> mean 0.1
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 2; ++x) pred.at(y, x) = 0.2;
    }
    CHECK(masked_l1_loss(pred, target, mask) == doctest::Approx(0.1).epsilon(1e-12));

    // values at invalid pixels cannot influence the loss
    ImageF64 poisoned = pred;
    ValidityMask partial = mask;
    partial.at(0, 0) = 0;
    const double before = masked_l1_loss(pred, target, partial);
    poisoned.at(0, 0) = 1e9;
    CHECK(masked_l1_loss(poisoned, target, partial) == doctest::Approx(before).epsilon(1e-15));

    const ValidityMask none(4, 4, 1, 0);
    CHECK_THROWS_AS(masked_l1_loss(pred, target, none), EmptyMaskError);
    CHECK_THROWS_AS(masked_l1_loss(pred, ImageF64(3, 3, 1), mask), ShapeMismatchError);
}

TEST_CASE("gan_losses closed-form values") {
    const std::vector<double> half{0.5, 0.5};
    const GanLosses l = gan_losses(half, half);
    CHECK(l.discriminator == doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-12));
    CHECK(l.generator_adv == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK_FALSE(l.clamped);

    // near-perfect discriminator pushes L_D toward 0 from below
    const std::vector<double> real{1.0 - 1e-9};
    const std::vector<double> fake{1e-9};
    const GanLosses perfect = gan_losses(real, fake);
    CHECK(perfect.discriminator < 0.0);
    CHECK(perfect.discriminator > -1e-5);

    const std::vector<double> exact_one{1.0};
    const GanLosses clamped = gan_losses(exact_one, half);
    CHECK(clamped.clamped);
}

TEST_CASE("extract_depth_patches") {
    DepthMap d(32, 32, 1, 700);
    const EqualizedDepth eq = histogram_equalize(d);
    const auto flat = extract_depth_patches(eq, {10, 10}, {22, 10}, 5);
    REQUIRE(flat.size() == 50);
    for (const double v : flat) CHECK(v == doctest::Approx(700.0));

    // r = 1 picks exactly the two eye pixels
    Rng rng(3);
    DepthMap r(16, 16, 1);
    for (auto& v : r.storage()) v = static_cast<std::uint16_t>(rng.uniform_int(100, 2000));
    const EqualizedDepth req = histogram_equalize(r);
    const auto two = extract_depth_patches(req, {4, 5}, {11, 6}, 1);
    REQUIRE(two.size() == 2);
    CHECK(two[0] == doctest::Approx(static_cast<double>(r.at(5, 4))));
    CHECK(two[1] == doctest::Approx(static_cast<double>(r.at(6, 11))));

    // manual crop + lookup oracle, with border clamping
    const auto patch = extract_depth_patches(req, {0, 0}, {15, 15}, 3);
    REQUIRE(patch.size() == 18);
    int idx = 0;
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx, ++idx) {
            const int y = std::clamp(0 + dy, 0, 15), x = std::clamp(0 + dx, 0, 15);
            CHECK(patch[static_cast<std::size_t>(idx)] ==
                  doctest::Approx(static_cast<double>(r.at(y, x))));
        }
    }
}
