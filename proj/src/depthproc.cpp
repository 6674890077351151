#include "gazekit/depthproc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace gaze {

EqualizedDepth histogram_equalize(const DepthMap& depth) {
    EqualizedDepth eq;
    eq.values = ImageF64(depth.height(), depth.width(), 1, -1.0);

    // counts of the nonzero values only; including zeros would compress the
    // valid range on mostly-missing maps
    std::map<std::uint16_t, std::size_t> counts;
    for (const auto v : depth.storage()) {
        if (v != 0) ++counts[v];
    }
    if (counts.empty()) {
        eq.all_missing = true;
        return eq;
    }

    std::size_t total = 0;
    for (const auto& [value, count] : counts) total += count;

    std::map<std::uint16_t, double> level_of;
    std::size_t cumulative = 0;
    for (const auto& [value, count] : counts) {
        cumulative += count;
        const double level = 2.0 * static_cast<double>(cumulative) / static_cast<double>(total) - 1.0;
        level_of[value] = level;
        eq.levels.push_back(level);
        eq.depths.push_back(value);
    }

    for (int y = 0; y < depth.height(); ++y) {
        for (int x = 0; x < depth.width(); ++x) {
            const auto v = depth.at(y, x);
            if (v != 0) eq.values.at(y, x) = level_of[v];
        }
    }
    return eq;
}

double undo_equalization(double level, const EqualizedDepth& eq) {
    if (eq.levels.empty()) throw EmptyTableError("undo_equalization: empty lookup table");
    const auto it = std::lower_bound(eq.levels.begin(), eq.levels.end(), level);
    std::size_t idx;
    if (it == eq.levels.begin()) {
        idx = 0;
    } else if (it == eq.levels.end()) {
        idx = eq.levels.size() - 1;
    } else {
        const std::size_t hi = static_cast<std::size_t>(it - eq.levels.begin());
        const std::size_t lo = hi - 1;
        idx = (level - eq.levels[lo] <= eq.levels[hi] - level) ? lo : hi;
    }
    return static_cast<double>(eq.depths[idx]);
}

ValidityMask compute_valid_mask(const ImageF64& equalized, double missing_value,
                                double missing_range, int erosion_radius) {
    const int h = equalized.height();
    const int w = equalized.width();
    ValidityMask mask(h, w, 1, 1);

    // disc offsets of the circular structuring element
    std::vector<std::pair<int, int>> disc;
    const int r = erosion_radius;
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            if (dx * dx + dy * dy <= r * r) disc.emplace_back(dy, dx);
        }
    }

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = equalized.at(y, x);
            if (std::abs(v - missing_value) > missing_range) continue;
            for (const auto& [dy, dx] : disc) {
                const int yy = y + dy;
                const int xx = x + dx;
                if (yy >= 0 && yy < h && xx >= 0 && xx < w) mask.at(yy, xx) = 0;
            }
        }
    }
    return mask;
}

AugmentResult augment_missing(const DepthMap& depth, const AugmentSpec& spec, std::uint64_t seed) {
    AugmentResult out;
    out.map = depth;
    Rng rng(seed);

    auto add_patches = [&](int max_count, int min_side, int max_side) {
        const int count = static_cast<int>(rng.uniform_int(0, max_count));
        for (int i = 0; i < count; ++i) {
            const int side_limit_w = std::min(max_side, depth.width());
            const int side_limit_h = std::min(max_side, depth.height());
            Rect rect;
            rect.width = static_cast<int>(rng.uniform_int(std::min(min_side, side_limit_w), side_limit_w));
            rect.height = static_cast<int>(rng.uniform_int(std::min(min_side, side_limit_h), side_limit_h));
            rect.x = static_cast<int>(rng.uniform_int(0, depth.width() - rect.width));
            rect.y = static_cast<int>(rng.uniform_int(0, depth.height() - rect.height));
            for (int y = rect.y; y < rect.y + rect.height; ++y) {
                for (int x = rect.x; x < rect.x + rect.width; ++x) {
                    out.map.at(y, x) = 0;
                }
            }
            out.patches.push_back(rect);
        }
    };

    add_patches(spec.max_big_patches, spec.big_min, spec.big_max);
    add_patches(spec.max_small_patches, spec.small_min, spec.small_max);
    return out;
}

std::pair<double, double> eye_region_min_depth(const DepthMap& depth,
                                               const Eigen::Vector2d& right_eye,
                                               const Eigen::Vector2d& left_eye, int region) {
    if (region < 1 || region % 2 == 0) throw Error("eye_region_min_depth: region must be odd and positive");
    const int half = region / 2;

    auto window_min = [&](const Eigen::Vector2d& eye) {
        const int cx = static_cast<int>(std::lround(eye.x()));
        const int cy = static_cast<int>(std::lround(eye.y()));
        const int x0 = std::max(cx - half, 0);
        const int x1 = std::min(cx + half, depth.width() - 1);
        const int y0 = std::max(cy - half, 0);
        const int y1 = std::min(cy + half, depth.height() - 1);
        double best = std::numeric_limits<double>::infinity();
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                best = std::min(best, static_cast<double>(depth.at(y, x)));
            }
        }
        return std::isfinite(best) ? best : 0.0;
    };

    return {window_min(right_eye), window_min(left_eye)};
}

std::vector<EyeFilterReportRow> filter_target_set(std::span<const EyeFilterSample> samples,
                                                  const EyeFilterParams& params) {
    std::vector<EyeFilterReportRow> report;
    report.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        EyeFilterReportRow row;
        row.index = i;
        const auto& s = samples[i];
        if (!s.depth || !s.right_eye || !s.left_eye) {
            row.missing_landmarks = true;
            report.push_back(row);
            continue;
        }
        std::tie(row.min_right, row.min_left) =
            eye_region_min_depth(*s.depth, *s.right_eye, *s.left_eye, params.region);
        row.kept = row.min_right >= params.threshold_mm && row.min_left >= params.threshold_mm;
        report.push_back(row);
    }
    return report;
}

std::vector<std::size_t> kept_indices(std::span<const EyeFilterReportRow> report) {
    std::vector<std::size_t> out;
    for (const auto& row : report) {
        if (row.kept) out.push_back(row.index);
    }
    return out;
}

double masked_l1_loss(const ImageF64& pred, const ImageF64& target, const ValidityMask& mask) {
    if (pred.height() != target.height() || pred.width() != target.width() ||
        pred.height() != mask.height() || pred.width() != mask.width()) {
        throw ShapeMismatchError("masked_l1_loss: shape mismatch");
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (int y = 0; y < pred.height(); ++y) {
        for (int x = 0; x < pred.width(); ++x) {
            if (!mask.at(y, x)) continue;
            sum += std::abs(pred.at(y, x) - target.at(y, x));
            ++count;
        }
    }
    if (count == 0) throw EmptyMaskError("masked_l1_loss: no valid pixels");
    return sum / static_cast<double>(count);
}

GanLosses gan_losses(std::span<const double> d_real, std::span<const double> d_fake) {
    GanLosses out;
    constexpr double kEps = 1e-7;
    auto clamped_log_mean = [&](std::span<const double> scores, bool one_minus) {
        double sum = 0.0;
        for (double s : scores) {
            if (s <= 0.0 || s >= 1.0) {
                out.clamped = true;
                s = std::clamp(s, kEps, 1.0 - kEps);
            }
            sum += std::log(one_minus ? 1.0 - s : s);
        }
        return scores.empty() ? 0.0 : sum / static_cast<double>(scores.size());
    };
    out.discriminator = clamped_log_mean(d_real, false) + clamped_log_mean(d_fake, true);
    out.generator_adv = -clamped_log_mean(d_fake, false);
    return out;
}

std::vector<double> extract_depth_patches(const EqualizedDepth& eq,
                                          const Eigen::Vector2d& right_eye,
                                          const Eigen::Vector2d& left_eye, int r) {
    if (r < 1 || r % 2 == 0) throw Error("extract_depth_patches: r must be odd and positive");
    const int half = r / 2;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(2 * r * r));

    auto extract = [&](const Eigen::Vector2d& eye) {
        const int cx = static_cast<int>(std::lround(eye.x()));
        const int cy = static_cast<int>(std::lround(eye.y()));
        for (int dy = -half; dy <= half; ++dy) {
            for (int dx = -half; dx <= half; ++dx) {
                const int y = std::clamp(cy + dy, 0, eq.values.height() - 1);
                const int x = std::clamp(cx + dx, 0, eq.values.width() - 1);
                const double level = eq.values.at(y, x);
                out.push_back(level <= -1.0 ? 0.0 : undo_equalization(level, eq));
            }
        }
    };

    extract(right_eye);
    extract(left_eye);
    return out;
}

} // namespace gaze
