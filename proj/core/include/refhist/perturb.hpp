#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "refhist/baseline.hpp"
#include "refhist/featurizer.hpp"
#include "refhist/network.hpp"
#include "refhist/pipeline.hpp"
#include "refhist/point_cloud.hpp"

namespace refhist {

// Eval-time perturbations. All of them are pure (inputs untouched),
// seed-reproducible, and at sigma=0 / fraction=0 bit-level identities.
// Derived clouds may contain points with no present values left; every
// consumer treats such points as contributing nothing.

struct NoiseSpec {
    double sigma = 0.0;  // standard deviation in normalized feature units
    std::uint64_t seed = 0;
};

// Adds zero-mean Gaussian noise to every present value of every feature.
// sigma is anchored to the normalized [0,1] range (sigma = 0.025 is half a
// bin at K=20), so the raw-space perturbation is eps * (hi_f - lo_f).
// Per-sample derived seeds keep the result independent of iteration order.
std::vector<PointCloud> add_noise(std::span<const PointCloud> samples, const Normalizer& norm,
                                  const NoiseSpec& spec);

struct RemovalSpec {
    FeatureKind feature = FeatureKind::X;
    double fraction = 0.0;  // in [0,1]
    std::uint64_t seed = 0;
};

// Marks round(fraction * count) of the chosen feature's present values
// missing, sampled uniformly without replacement across the whole set
// (exact-count, not Bernoulli); individual clouds may lose all or none.
std::vector<PointCloud> remove_values(std::span<const PointCloud> samples,
                                      const RemovalSpec& spec);

struct AblationTarget {
    std::size_t point = 0;
    FeatureKind feature = FeatureKind::X;
};

struct AblationResult {
    std::vector<AblationTarget> targets;
    Prediction original;
    Prediction ablated;
    std::array<double, kNumClasses> probability_delta{};  // ablated - original
};

// Re-runs the predictor with the targeted values marked missing. Throws
// std::invalid_argument for out-of-range targets and
// std::runtime_error("nothing to ablate ...") when a target is already
// missing.
AblationResult ablate_sample(const MlpModel& model, const Normalizer& norm,
                             const PointCloud& cloud, std::span<const AblationTarget> targets);

std::string ablation_to_json(const AblationResult& result);

struct SweepCell {
    FeatureKind feature = FeatureKind::X;
    double fraction = 0.0;
    EvalReport report;
};

// remove_values + evaluate for every (feature, fraction) pair. Cell seeds
// derive from `seed` and the cell position only, so sweeping two different
// models with the same seed evaluates them on identical perturbed sets.
std::vector<SweepCell> importance_sweep(const MlpModel& model, const Normalizer& norm,
                                        std::span<const PointCloud> samples,
                                        std::span<const FeatureKind> features,
                                        std::span<const double> fractions, std::uint64_t seed,
                                        int threads = 1);
std::vector<SweepCell> importance_sweep(const PointNetModel& model, const Normalizer& norm,
                                        std::span<const PointCloud> samples,
                                        std::span<const FeatureKind> features,
                                        std::span<const double> fractions, std::uint64_t seed,
                                        int threads = 1);

// One removal spec per sweep cell; exposed so ad-hoc comparisons can reuse
// the exact perturbed sets a sweep would see.
RemovalSpec sweep_cell_spec(FeatureKind feature, double fraction, std::size_t fraction_index,
                            std::uint64_t seed);

std::string sweep_to_csv(std::span<const SweepCell> cells);

}  // namespace refhist
