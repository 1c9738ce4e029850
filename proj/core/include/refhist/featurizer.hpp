#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "refhist/point_cloud.hpp"

namespace refhist {

enum class NormKind : int {
    FullRange,   // dataset min/max per feature
    ManualClip,  // user-supplied per-feature bounds
    StatClip,    // [mu - 2*sigma, mu + 2*sigma], population sigma
};

std::string_view to_string(NormKind k);
NormKind norm_kind_from_string(std::string_view name);

struct NormStrategy {
    NormKind kind = NormKind::StatClip;
    std::array<double, kNumFeatures> manual_lo{};  // ManualClip only
    std::array<double, kNumFeatures> manual_hi{};

    static NormStrategy full_range() { return {NormKind::FullRange, {}, {}}; }
    static NormStrategy stat_clip() { return {NormKind::StatClip, {}, {}}; }
    static NormStrategy manual(const std::array<double, kNumFeatures>& lo,
                               const std::array<double, kNumFeatures>& hi);
};

// Per-feature effective value range, fitted on the training split only.
// Values outside [lo, hi] are clipped to the boundary at normalization
// time under every strategy.
struct Normalizer {
    NormKind kind = NormKind::StatClip;
    std::array<double, kNumFeatures> lo{};
    std::array<double, kNumFeatures> hi{};
    int bins = 20;
};

// Fits lo/hi per feature from the present values of the given samples.
// Missing values never enter the statistics. Throws std::runtime_error
// "unfittable feature ..." when a feature has zero present values, and
// "degenerate feature ..." when the fitted range has zero width
// (constant feature under FullRange, sigma = 0 under StatClip).
Normalizer fit_normalizer(std::span<const PointCloud> train_samples, const NormStrategy& strategy,
                          int bins = 20);

// u = clamp((v - lo_f)/(hi_f - lo_f), 0, 1).
double normalize_value(double v, int feature, const Normalizer& norm);

// M x K bin-count matrix in feature-major flattening: feature 0 bins
// 0..K-1, then feature 1, ...
struct HistogramFeature {
    int bins = 0;
    std::vector<std::int64_t> counts;

    std::int64_t& at(int feature, int bin) { return counts[feature * bins + bin]; }
    std::int64_t at(int feature, int bin) const { return counts[feature * bins + bin]; }

    // Number of present values per feature (bin sums).
    std::array<std::int64_t, kNumFeatures> feature_totals() const;

    bool operator==(const HistogramFeature&) const = default;
};

// A present value v of feature f lands in bin min(floor(u*K), K-1):
// bins are left-closed/right-open except the last, which includes 1.0.
// Missing values contribute nothing.
HistogramFeature featurize(const PointCloud& cloud, const Normalizer& norm, int bins);
inline HistogramFeature featurize(const PointCloud& cloud, const Normalizer& norm) {
    return featurize(cloud, norm, norm.bins);
}

enum class InputMode : int { Raw, Density };

std::string_view to_string(InputMode m);
InputMode input_mode_from_string(std::string_view name);

// Raw: counts cast to reals. Density: each feature's bins divided by
// that feature's present-value count; a feature with zero present
// values stays all-zero.
std::vector<double> counts_to_input(const HistogramFeature& h, InputMode mode);

// {"strategy": ..., "lo": [6], "hi": [6], "bins": K}
std::string normalizer_to_json(const Normalizer& norm);
Normalizer normalizer_from_json(const std::string& text);
void save_normalizer(const Normalizer& norm, const std::filesystem::path& path);
Normalizer load_normalizer(const std::filesystem::path& path);

}  // namespace refhist
