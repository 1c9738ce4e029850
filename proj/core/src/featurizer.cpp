#include "refhist/featurizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace refhist {

std::string_view to_string(NormKind k) {
    switch (k) {
        case NormKind::FullRange: return "full_range";
        case NormKind::ManualClip: return "manual_clip";
        case NormKind::StatClip: return "stat_clip";
    }
    throw std::invalid_argument("unknown NormKind");
}

NormKind norm_kind_from_string(std::string_view name) {
    if (name == "full_range") return NormKind::FullRange;
    if (name == "manual_clip") return NormKind::ManualClip;
    if (name == "stat_clip") return NormKind::StatClip;
    throw std::invalid_argument("unknown normalization strategy: " + std::string(name));
}

std::string_view to_string(InputMode m) {
    switch (m) {
        case InputMode::Raw: return "raw";
        case InputMode::Density: return "density";
    }
    throw std::invalid_argument("unknown InputMode");
}

InputMode input_mode_from_string(std::string_view name) {
    if (name == "raw") return InputMode::Raw;
    if (name == "density") return InputMode::Density;
    throw std::invalid_argument("unknown input mode: " + std::string(name));
}

NormStrategy NormStrategy::manual(const std::array<double, kNumFeatures>& lo,
                                  const std::array<double, kNumFeatures>& hi) {
    for (int f = 0; f < kNumFeatures; ++f)
        if (!(lo[f] < hi[f]))
            throw std::invalid_argument("manual bounds require lo < hi for feature " +
                                        std::string(to_string(static_cast<FeatureKind>(f))));
    return {NormKind::ManualClip, lo, hi};
}

Normalizer fit_normalizer(std::span<const PointCloud> train_samples, const NormStrategy& strategy,
                          int bins) {
    if (bins < 1) throw std::invalid_argument("bin count must be >= 1");

    Normalizer norm;
    norm.kind = strategy.kind;
    norm.bins = bins;

    if (strategy.kind == NormKind::ManualClip) {
        for (int f = 0; f < kNumFeatures; ++f) {
            if (!(strategy.manual_lo[f] < strategy.manual_hi[f]))
                throw std::invalid_argument("manual bounds require lo < hi for feature " +
                                            std::string(to_string(static_cast<FeatureKind>(f))));
        }
        norm.lo = strategy.manual_lo;
        norm.hi = strategy.manual_hi;
        return norm;
    }

    for (int f = 0; f < kNumFeatures; ++f) {
        double mn = std::numeric_limits<double>::infinity();
        double mx = -std::numeric_limits<double>::infinity();
        double sum = 0.0, sum_sq = 0.0;
        std::int64_t n = 0;
        for (const PointCloud& c : train_samples) {
            for (const Point& p : c.points) {
                if (!p[f].has_value()) continue;
                const double v = *p[f];
                mn = std::min(mn, v);
                mx = std::max(mx, v);
                sum += v;
                sum_sq += v * v;
                ++n;
            }
        }
        const auto fname = std::string(to_string(static_cast<FeatureKind>(f)));
        if (n == 0) throw std::runtime_error("unfittable feature: " + fname);

        if (strategy.kind == NormKind::FullRange) {
            if (!(mn < mx)) throw std::runtime_error("degenerate feature: " + fname);
            norm.lo[f] = mn;
            norm.hi[f] = mx;
        } else {  // StatClip
            const double mean = sum / static_cast<double>(n);
            const double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
            const double sigma = std::sqrt(var);
            if (sigma == 0.0) throw std::runtime_error("degenerate feature: " + fname);
            norm.lo[f] = mean - 2.0 * sigma;
            norm.hi[f] = mean + 2.0 * sigma;
        }
    }
    return norm;
}

double normalize_value(double v, int feature, const Normalizer& norm) {
    const double u = (v - norm.lo[feature]) / (norm.hi[feature] - norm.lo[feature]);
    return std::clamp(u, 0.0, 1.0);
}

HistogramFeature featurize(const PointCloud& cloud, const Normalizer& norm, int bins) {
    if (bins < 1) throw std::invalid_argument("bin count must be >= 1");
    HistogramFeature h;
    h.bins = bins;
    h.counts.assign(static_cast<std::size_t>(kNumFeatures) * bins, 0);
    for (const Point& p : cloud.points) {
        for (int f = 0; f < kNumFeatures; ++f) {
            if (!p[f].has_value()) continue;
            const double u = normalize_value(*p[f], f, norm);
            const int bin = std::min(static_cast<int>(u * bins), bins - 1);
            h.at(f, bin)++;
        }
    }
    return h;
}

std::array<std::int64_t, kNumFeatures> HistogramFeature::feature_totals() const {
    std::array<std::int64_t, kNumFeatures> totals{};
    for (int f = 0; f < kNumFeatures; ++f)
        for (int b = 0; b < bins; ++b) totals[f] += at(f, b);
    return totals;
}

std::vector<double> counts_to_input(const HistogramFeature& h, InputMode mode) {
    std::vector<double> x(h.counts.size());
    if (mode == InputMode::Raw) {
        for (std::size_t i = 0; i < h.counts.size(); ++i) x[i] = static_cast<double>(h.counts[i]);
        return x;
    }
    const auto totals = h.feature_totals();
    for (int f = 0; f < kNumFeatures; ++f) {
        const double denom = totals[f] > 0 ? static_cast<double>(totals[f]) : 1.0;
        for (int b = 0; b < h.bins; ++b)
            x[static_cast<std::size_t>(f) * h.bins + b] = static_cast<double>(h.at(f, b)) / denom;
    }
    return x;
}

std::string normalizer_to_json(const Normalizer& norm) {
    nlohmann::json obj;
    obj["strategy"] = std::string(to_string(norm.kind));
    obj["lo"] = norm.lo;
    obj["hi"] = norm.hi;
    obj["bins"] = norm.bins;
    return obj.dump(2);
}

Normalizer normalizer_from_json(const std::string& text) {
    nlohmann::json obj = nlohmann::json::parse(text);
    Normalizer norm;
    norm.kind = norm_kind_from_string(obj.at("strategy").get<std::string>());
    const auto lo = obj.at("lo").get<std::vector<double>>();
    const auto hi = obj.at("hi").get<std::vector<double>>();
    if (lo.size() != kNumFeatures || hi.size() != kNumFeatures)
        throw std::runtime_error("normalizer lo/hi must have 6 entries");
    std::copy(lo.begin(), lo.end(), norm.lo.begin());
    std::copy(hi.begin(), hi.end(), norm.hi.begin());
    norm.bins = obj.at("bins").get<int>();
    for (int f = 0; f < kNumFeatures; ++f)
        if (!(norm.lo[f] < norm.hi[f])) throw std::runtime_error("normalizer requires lo < hi");
    if (norm.bins < 1) throw std::runtime_error("normalizer bin count must be >= 1");
    return norm;
}

void save_normalizer(const Normalizer& norm, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());
    out << normalizer_to_json(norm) << '\n';
}

Normalizer load_normalizer(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open normalizer file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return normalizer_from_json(ss.str());
}

}  // namespace refhist
