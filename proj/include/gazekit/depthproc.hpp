#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gazekit/image.hpp"
#include "gazekit/rng.hpp"

namespace gaze {

/// Raw depth map in millimeters; 0 marks missing data.
using DepthMap = ImageU16;

/// Binary validity grid, 1 = usable pixel.
using ValidityMask = ImageU8;

/// Histogram-equalized depth in [-1, 1]. Missing pixels are exactly -1;
/// the table maps each equalized level back to its source depth.
struct EqualizedDepth {
    ImageF64 values;
    std::vector<double> levels;          // strictly increasing, in (-1, 1]
    std::vector<std::uint16_t> depths;   // same length, source depth per level
    bool all_missing = false;
};

struct AugmentSpec {
    int max_big_patches = 1;
    int max_small_patches = 10;
    int big_min = 64, big_max = 128;   // square side range, px
    int small_min = 8, small_max = 24;
};

struct Rect {
    int x = 0, y = 0, width = 0, height = 0;
};

struct AugmentResult {
    DepthMap map;
    std::vector<Rect> patches;
};

struct EyeFilterParams {
    int region = 81;            // odd window side; 41 for 224-px, 81 for 448-px images
    double threshold_mm = 200.0;
};

/// One sample of the discriminator target-set filter.
struct EyeFilterSample {
    const DepthMap* depth = nullptr;
    std::optional<Eigen::Vector2d> right_eye;
    std::optional<Eigen::Vector2d> left_eye;
};

struct EyeFilterReportRow {
    std::size_t index = 0;
    double min_right = 0.0, min_left = 0.0;
    bool kept = false;
    bool missing_landmarks = false;
};

struct GanLosses {
    double discriminator = 0.0;   // maximization form, as defined
    double generator_adv = 0.0;
    bool clamped = false;         // a score fell outside (0, 1) and was clamped
};

/// Empirical-CDF equalization over the nonzero pixels, scaled to (-1, 1];
/// zeros (missing) map to exactly -1. An all-zero map is flagged, not fatal.
EqualizedDepth histogram_equalize(const DepthMap& depth);

/// Nearest-level inverse lookup. Throws EmptyTableError.
double undo_equalization(double level, const EqualizedDepth& eq);

/// Pixels within Euclidean distance erosion_radius of any value inside
/// [missing_value - missing_range, missing_value + missing_range] are
/// invalid. Defaults follow the post-equalization convention.
ValidityMask compute_valid_mask(const ImageF64& equalized, double missing_value = -1.0,
                                double missing_range = 0.01, int erosion_radius = 12);

/// Adds up to max_big + max_small random zero rectangles; deterministic per
/// seed, reported rectangles cover every altered pixel.
AugmentResult augment_missing(const DepthMap& depth, const AugmentSpec& spec, std::uint64_t seed);

/// Minimum depth (zeros included) over the region x region window centered
/// at each eye, clipped at the borders. Returns (min_right, min_left).
std::pair<double, double> eye_region_min_depth(const DepthMap& depth,
                                               const Eigen::Vector2d& right_eye,
                                               const Eigen::Vector2d& left_eye, int region);

/// Keeps samples whose eye-region minimum depth reaches the threshold in
/// both eyes; samples without landmarks are dropped and reported.
std::vector<EyeFilterReportRow> filter_target_set(std::span<const EyeFilterSample> samples,
                                                  const EyeFilterParams& params);

/// Indices of the kept samples (the target set tau).
std::vector<std::size_t> kept_indices(std::span<const EyeFilterReportRow> report);

/// Mean absolute difference over valid pixels. Throws EmptyMaskError.
double masked_l1_loss(const ImageF64& pred, const ImageF64& target, const ValidityMask& mask);

/// GAN losses in the written (maximization) form:
/// L_D = mean log d_real + mean log(1 - d_fake), L_G_adv = -mean log d_fake.
/// Scores outside (0,1) are clamped at 1e-7 and flagged.
GanLosses gan_losses(std::span<const double> d_real, std::span<const double> d_fake);

/// r x r un-equalized depth values (mm) around each eye, right then left,
/// flattened row-major. Coordinates are clamped at the borders.
std::vector<double> extract_depth_patches(const EqualizedDepth& eq,
                                          const Eigen::Vector2d& right_eye,
                                          const Eigen::Vector2d& left_eye, int r = 5);

} // namespace gaze
