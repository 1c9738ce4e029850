#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace refhist {

// Feature column order is fixed: it defines histogram layout and the
// JSONL column order. Cartesian coordinates are relative to the tracked
// object's center (meters); Doppler is ego-motion compensated (m/s);
// RCS is in dBsm.
enum class FeatureKind : int {
    X = 0,
    Y = 1,
    Z = 2,
    RadialDistance = 3,
    DopplerVelocity = 4,
    Rcs = 5,
};

inline constexpr int kNumFeatures = 6;

// Fixed order defines class index 0..4 for logits, confusion matrices
// and reports.
enum class ClassId : int {
    Car = 0,
    Pedestrian = 1,
    Overridable = 2,
    TwoWheeler = 3,
    Underridable = 4,
};

inline constexpr int kNumClasses = 5;

std::string_view to_string(FeatureKind f);
std::string_view to_string(ClassId c);
FeatureKind feature_from_string(std::string_view name);
ClassId class_from_string(std::string_view name);

// One reflection: six slots, each possibly missing.
using Point = std::array<std::optional<double>, kNumFeatures>;

inline bool all_missing(const Point& p) {
    for (const auto& v : p)
        if (v.has_value()) return false;
    return true;
}

// All reflections associated to one object in one measurement cycle.
// N varies between samples. Construction-time data (JSONL, generator)
// never contains all-missing points; clouds derived by perturbation ops
// may (see perturb.hpp).
struct PointCloud {
    std::vector<Point> points;
    ClassId label = ClassId::Car;
    std::string track_id;

    std::size_t size() const { return points.size(); }

    // Throws std::invalid_argument if any point has all 6 slots missing.
    void validate() const;
};

enum class Split : int { Train = 0, Val = 1, Test = 2 };

std::string_view to_string(Split s);

struct Dataset {
    std::vector<PointCloud> samples;
    // Empty until split_by_track assigns; otherwise one entry per sample.
    std::vector<Split> split;

    bool has_split() const { return !split.empty(); }
    std::vector<std::size_t> indices_of(Split s) const;
};

// Track-exclusive greedy split: shuffle tracks with the seeded generator,
// fill the Train quota, then Val, remainder goes to Test. Fractions are
// by sample count and only approximately met (tracks are atomic).
// Throws std::invalid_argument("insufficient tracks") when there are
// fewer tracks than splits.
Dataset split_by_track(const Dataset& dataset, const std::array<double, 3>& fractions,
                       std::uint64_t seed);

// Per-class sample counts; nullopt selects the whole dataset.
std::array<std::size_t, kNumClasses> class_counts(const Dataset& dataset,
                                                  std::optional<Split> split = std::nullopt);

}  // namespace refhist
