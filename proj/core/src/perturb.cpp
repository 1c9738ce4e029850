#include "refhist/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "refhist/seeding.hpp"

namespace refhist {

std::vector<PointCloud> add_noise(std::span<const PointCloud> samples, const Normalizer& norm,
                                  const NoiseSpec& spec) {
    if (spec.sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
    std::vector<PointCloud> out(samples.begin(), samples.end());
    if (spec.sigma == 0.0) return out;

    for (std::size_t s = 0; s < out.size(); ++s) {
        std::mt19937_64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(s)));
        std::normal_distribution<double> noise(0.0, spec.sigma);
        for (Point& p : out[s].points) {
            for (int f = 0; f < kNumFeatures; ++f) {
                if (!p[f].has_value()) continue;
                const double eps = noise(rng);
                p[f] = *p[f] + eps * (norm.hi[f] - norm.lo[f]);
            }
        }
    }
    return out;
}

std::vector<PointCloud> remove_values(std::span<const PointCloud> samples,
                                      const RemovalSpec& spec) {
    if (spec.fraction < 0.0 || spec.fraction > 1.0)
        throw std::invalid_argument("removal fraction must be in [0,1]");
    std::vector<PointCloud> out(samples.begin(), samples.end());

    const int f = static_cast<int>(spec.feature);
    std::vector<std::pair<std::size_t, std::size_t>> present;  // (sample, point)
    for (std::size_t s = 0; s < out.size(); ++s)
        for (std::size_t p = 0; p < out[s].points.size(); ++p)
            if (out[s].points[p][f].has_value()) present.emplace_back(s, p);

    const auto k = static_cast<std::size_t>(
        std::llround(spec.fraction * static_cast<double>(present.size())));
    if (k == 0) return out;

    std::mt19937_64 rng(derive_seed(spec.seed, "remove"));
    std::vector<std::pair<std::size_t, std::size_t>> chosen;
    chosen.reserve(k);
    std::sample(present.begin(), present.end(), std::back_inserter(chosen), k, rng);
    for (const auto& [s, p] : chosen) out[s].points[p][f] = std::nullopt;
    return out;
}

AblationResult ablate_sample(const MlpModel& model, const Normalizer& norm,
                             const PointCloud& cloud, std::span<const AblationTarget> targets) {
    PointCloud ablated = cloud;
    for (const AblationTarget& t : targets) {
        if (t.point >= ablated.points.size())
            throw std::invalid_argument("ablation target out of range: point " +
                                        std::to_string(t.point));
        auto& slot = ablated.points[t.point][static_cast<int>(t.feature)];
        if (!slot.has_value())
            throw std::runtime_error("nothing to ablate: feature " +
                                     std::string(to_string(t.feature)) + " of point " +
                                     std::to_string(t.point) + " is already missing");
        slot = std::nullopt;
    }

    const auto run = [&](const PointCloud& c) {
        const auto x = counts_to_input(featurize(c, norm), model.config.input_mode);
        return predict(model, Eigen::Map<const Eigen::VectorXd>(
                                  x.data(), static_cast<Eigen::Index>(x.size())));
    };

    AblationResult result;
    result.targets.assign(targets.begin(), targets.end());
    result.original = run(cloud);
    result.ablated = run(ablated);
    for (int c = 0; c < kNumClasses; ++c)
        result.probability_delta[c] =
            result.ablated.probabilities(c) - result.original.probabilities(c);
    return result;
}

RemovalSpec sweep_cell_spec(FeatureKind feature, double fraction, std::size_t fraction_index,
                            std::uint64_t seed) {
    const std::string role = "remove:" + std::string(to_string(feature)) + ":" +
                             std::to_string(fraction_index);
    return RemovalSpec{feature, fraction, derive_seed(seed, role)};
}

namespace {

template <typename Model>
std::vector<SweepCell> sweep_impl(const Model& model, const Normalizer& norm,
                                  std::span<const PointCloud> samples,
                                  std::span<const FeatureKind> features,
                                  std::span<const double> fractions, std::uint64_t seed,
                                  int threads) {
    std::vector<SweepCell> cells;
    cells.reserve(features.size() * fractions.size());
    for (const FeatureKind f : features) {
        for (std::size_t pi = 0; pi < fractions.size(); ++pi) {
            const RemovalSpec spec = sweep_cell_spec(f, fractions[pi], pi, seed);
            const auto perturbed = remove_values(samples, spec);
            cells.push_back({f, fractions[pi], evaluate(model, norm, perturbed, threads)});
        }
    }
    return cells;
}

}  // namespace

std::vector<SweepCell> importance_sweep(const MlpModel& model, const Normalizer& norm,
                                        std::span<const PointCloud> samples,
                                        std::span<const FeatureKind> features,
                                        std::span<const double> fractions, std::uint64_t seed,
                                        int threads) {
    return sweep_impl(model, norm, samples, features, fractions, seed, threads);
}

std::vector<SweepCell> importance_sweep(const PointNetModel& model, const Normalizer& norm,
                                        std::span<const PointCloud> samples,
                                        std::span<const FeatureKind> features,
                                        std::span<const double> fractions, std::uint64_t seed,
                                        int threads) {
    return sweep_impl(model, norm, samples, features, fractions, seed, threads);
}

namespace {

nlohmann::json prediction_to_json(const Prediction& pred) {
    std::vector<double> probs(pred.probabilities.data(),
                              pred.probabilities.data() + pred.probabilities.size());
    return nlohmann::json{{"label", std::string(to_string(pred.label))},
                          {"probabilities", probs}};
}

}  // namespace

std::string ablation_to_json(const AblationResult& result) {
    nlohmann::json targets = nlohmann::json::array();
    for (const AblationTarget& t : result.targets)
        targets.push_back({{"point", t.point}, {"feature", std::string(to_string(t.feature))}});
    nlohmann::json obj;
    obj["targets"] = std::move(targets);
    obj["original"] = prediction_to_json(result.original);
    obj["ablated"] = prediction_to_json(result.ablated);
    obj["probability_delta"] = result.probability_delta;
    return obj.dump(2);
}

std::string sweep_to_csv(std::span<const SweepCell> cells) {
    std::ostringstream out;
    out << "feature,fraction,balanced_accuracy\n";
    for (const SweepCell& cell : cells)
        out << to_string(cell.feature) << ',' << format_double(cell.fraction) << ','
            << format_double(cell.report.balanced_accuracy) << '\n';
    return out.str();
}

}  // namespace refhist
