#include "refhist/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

#include "refhist/seeding.hpp"

namespace refhist {

std::string_view to_string(FeatureKind f) {
    switch (f) {
        case FeatureKind::X: return "x";
        case FeatureKind::Y: return "y";
        case FeatureKind::Z: return "z";
        case FeatureKind::RadialDistance: return "radial_distance";
        case FeatureKind::DopplerVelocity: return "doppler_velocity";
        case FeatureKind::Rcs: return "rcs";
    }
    throw std::invalid_argument("unknown FeatureKind");
}

std::string_view to_string(ClassId c) {
    switch (c) {
        case ClassId::Car: return "car";
        case ClassId::Pedestrian: return "pedestrian";
        case ClassId::Overridable: return "overridable";
        case ClassId::TwoWheeler: return "two_wheeler";
        case ClassId::Underridable: return "underridable";
    }
    throw std::invalid_argument("unknown ClassId");
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    throw std::invalid_argument("unknown Split");
}

FeatureKind feature_from_string(std::string_view name) {
    for (int f = 0; f < kNumFeatures; ++f)
        if (name == to_string(static_cast<FeatureKind>(f))) return static_cast<FeatureKind>(f);
    throw std::invalid_argument("unknown feature name: " + std::string(name));
}

ClassId class_from_string(std::string_view name) {
    for (int c = 0; c < kNumClasses; ++c)
        if (name == to_string(static_cast<ClassId>(c))) return static_cast<ClassId>(c);
    throw std::invalid_argument("unknown class label: " + std::string(name));
}

void PointCloud::validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (all_missing(points[i]))
            throw std::invalid_argument("point " + std::to_string(i) + " of track '" + track_id +
                                        "' has all 6 feature slots missing");
    }
}

std::vector<std::size_t> Dataset::indices_of(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == s) out.push_back(i);
    return out;
}

Dataset split_by_track(const Dataset& dataset, const std::array<double, 3>& fractions,
                       std::uint64_t seed) {
    for (double f : fractions)
        if (!(f > 0.0)) throw std::invalid_argument("split fractions must be positive");
    if (dataset.samples.empty()) throw std::invalid_argument("cannot split an empty dataset");

    // Group sample indices by track, keeping first-appearance order so the
    // shuffle below is the only source of randomness.
    std::vector<std::string> track_order;
    std::map<std::string, std::vector<std::size_t>> by_track;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const std::string& t = dataset.samples[i].track_id;
        auto [it, inserted] = by_track.try_emplace(t);
        if (inserted) track_order.push_back(t);
        it->second.push_back(i);
    }
    if (track_order.size() < 3) throw std::invalid_argument("insufficient tracks");

    std::mt19937_64 rng(derive_seed(seed, "split"));
    std::shuffle(track_order.begin(), track_order.end(), rng);

    const double total = static_cast<double>(dataset.samples.size());
    const double norm = fractions[0] + fractions[1] + fractions[2];
    const std::size_t train_quota =
        static_cast<std::size_t>(std::llround(total * fractions[0] / norm));
    const std::size_t val_quota =
        static_cast<std::size_t>(std::llround(total * fractions[1] / norm));

    Dataset out;
    out.samples = dataset.samples;
    out.split.assign(out.samples.size(), Split::Test);

    std::size_t train_n = 0, val_n = 0;
    for (const std::string& t : track_order) {
        const auto& idx = by_track[t];
        Split target;
        if (train_n < train_quota)
            target = Split::Train;
        else if (val_n < val_quota)
            target = Split::Val;
        else
            target = Split::Test;
        for (std::size_t i : idx) out.split[i] = target;
        if (target == Split::Train) train_n += idx.size();
        if (target == Split::Val) val_n += idx.size();
    }
    return out;
}

std::array<std::size_t, kNumClasses> class_counts(const Dataset& dataset,
                                                  std::optional<Split> split) {
    if (split && !dataset.has_split())
        throw std::invalid_argument("dataset has no split assignments");
    std::array<std::size_t, kNumClasses> counts{};
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        if (split && dataset.split[i] != *split) continue;
        counts[static_cast<int>(dataset.samples[i].label)]++;
    }
    return counts;
}

}  // namespace refhist
