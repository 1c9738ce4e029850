#include "refhist/featurizer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_oracles.hpp"

using namespace refhist;
using refhist::testing::brute_force_histogram;
using refhist::testing::random_cloud;
using refhist::testing::unit_normalizer;

namespace {

// One cloud whose feature 0 takes the given values (other features copy it).
PointCloud cloud_of(const std::vector<double>& values) {
    PointCloud cloud;
    cloud.track_id = "t";
    for (double v : values) {
        Point p{};
        for (int f = 0; f < kNumFeatures; ++f) p[f] = v;
        cloud.points.push_back(p);
    }
    return cloud;
}

}  // namespace

TEST(FitNormalizer, StatClipHandComputed) {
    const std::vector<PointCloud> train{cloud_of({0, 1, 2, 3, 4})};
    const Normalizer norm = fit_normalizer(train, NormStrategy::stat_clip());
    const double sigma = std::sqrt(2.0);  // population sd of {0..4}
    for (int f = 0; f < kNumFeatures; ++f) {
        EXPECT_NEAR(norm.lo[f], 2.0 - 2.0 * sigma, 1e-12);
        EXPECT_NEAR(norm.hi[f], 2.0 + 2.0 * sigma, 1e-12);
    }
    EXPECT_NEAR(norm.lo[0], -0.828427, 1e-6);
    EXPECT_NEAR(norm.hi[0], 4.828427, 1e-6);
}

TEST(FitNormalizer, FullRangeMinMax) {
    const std::vector<PointCloud> train{cloud_of({-1.0, 7.0})};
    const Normalizer norm = fit_normalizer(train, NormStrategy::full_range());
    EXPECT_EQ(norm.lo[0], -1.0);
    EXPECT_EQ(norm.hi[0], 7.0);
}

TEST(FitNormalizer, ConstantFeatureIsDegenerate) {
    const std::vector<PointCloud> train{cloud_of({5.0, 5.0, 5.0})};
    try {
        fit_normalizer(train, NormStrategy::full_range());
        FAIL() << "expected an exception";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("degenerate feature"), std::string::npos);
    }
    EXPECT_THROW(fit_normalizer(train, NormStrategy::stat_clip()), std::runtime_error);
}

TEST(FitNormalizer, FeatureWithoutValuesIsUnfittable) {
    PointCloud cloud = cloud_of({1.0, 2.0});
    for (Point& p : cloud.points) p[3] = std::nullopt;  // radial distance never present
    const std::vector<PointCloud> train{cloud};
    try {
        fit_normalizer(train, NormStrategy::full_range());
        FAIL() << "expected an exception";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("unfittable feature"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("radial_distance"), std::string::npos);
    }
}

TEST(FitNormalizer, MissingValuesExcludedFromStatistics) {
    PointCloud with_missing = cloud_of({0, 1, 2, 3, 4, 999.0});
    for (int f = 0; f < kNumFeatures; ++f) with_missing.points[5][f] = std::nullopt;
    with_missing.points[5][0] = 2.0;  // keep the point valid, neutral value
    const Normalizer a =
        fit_normalizer(std::vector<PointCloud>{with_missing}, NormStrategy::stat_clip());
    EXPECT_NEAR(a.lo[1], 2.0 - 2.0 * std::sqrt(2.0), 1e-12);
}

TEST(FitNormalizer, ManualBoundsPassThroughAndValidate) {
    std::array<double, kNumFeatures> lo{}, hi{};
    lo.fill(-2.0);
    hi.fill(3.0);
    const Normalizer norm =
        fit_normalizer(std::vector<PointCloud>{}, NormStrategy::manual(lo, hi));
    EXPECT_EQ(norm.lo[4], -2.0);
    EXPECT_EQ(norm.hi[4], 3.0);
    hi[2] = -2.0;  // lo == hi
    EXPECT_THROW(NormStrategy::manual(lo, hi), std::invalid_argument);
}

TEST(Normalize, EndpointsAndClipping) {
    Normalizer norm = unit_normalizer();
    norm.lo.fill(-0.5);
    norm.hi.fill(1.5);
    EXPECT_EQ(normalize_value(-0.5, 0, norm), 0.0);
    EXPECT_EQ(normalize_value(1.5, 0, norm), 1.0);
    EXPECT_EQ(normalize_value(-100.5, 0, norm), 0.0);
    EXPECT_EQ(normalize_value(900.0, 0, norm), 1.0);
}

TEST(Normalize, StatClipMidpoint) {
    Normalizer norm;
    norm.kind = NormKind::StatClip;
    norm.lo.fill(2.0 - 2.0 * std::sqrt(2.0));
    norm.hi.fill(2.0 + 2.0 * std::sqrt(2.0));
    EXPECT_NEAR(normalize_value(2.0, 0, norm), 0.5, 1e-12);
}

TEST(Featurize, EmptyCloudAllZero) {
    PointCloud empty;
    empty.track_id = "t";
    const HistogramFeature h = featurize(empty, unit_normalizer(), 20);
    EXPECT_EQ(h.counts.size(), 120u);
    for (std::int64_t c : h.counts) EXPECT_EQ(c, 0);
}

TEST(Featurize, HandAssignedBins) {
    // Normalized values 0.02, 0.07, 0.07, 0.99 at K=20 (bin width 0.05).
    PointCloud cloud;
    cloud.track_id = "t";
    for (double v : {0.02, 0.07, 0.07, 0.99}) {
        Point p{};
        p[0] = v;
        cloud.points.push_back(p);
    }
    const HistogramFeature h = featurize(cloud, unit_normalizer(), 20);
    EXPECT_EQ(h.at(0, 0), 1);
    EXPECT_EQ(h.at(0, 1), 2);
    EXPECT_EQ(h.at(0, 19), 1);
    std::int64_t total = 0;
    for (int b = 0; b < 20; ++b) total += h.at(0, b);
    EXPECT_EQ(total, 4);
    for (int f = 1; f < kNumFeatures; ++f)
        EXPECT_EQ(h.feature_totals()[f], 0);
}

TEST(Featurize, LastBinClosedAtOne) {
    PointCloud cloud;
    cloud.track_id = "t";
    Point p{};
    p[0] = 1.0;
    cloud.points.push_back(p);
    const HistogramFeature h = featurize(cloud, unit_normalizer(), 20);
    EXPECT_EQ(h.at(0, 19), 1);
}

TEST(Featurize, MatchesBruteForceOracle) {
    std::mt19937_64 rng(2024);
    Normalizer norm = unit_normalizer();
    norm.lo.fill(-8.0);
    norm.hi.fill(8.0);  // some values clip
    for (int trial = 0; trial < 1000; ++trial) {
        const PointCloud cloud = random_cloud(rng, 30, 0.25);
        const int bins = 1 + static_cast<int>(rng() % 32);
        ASSERT_EQ(featurize(cloud, norm, bins), brute_force_histogram(cloud, norm, bins))
            << "trial " << trial;
    }
}

TEST(Featurize, BinSumsCountPresentValues) {
    std::mt19937_64 rng(11);
    const Normalizer norm = unit_normalizer();
    for (int trial = 0; trial < 100; ++trial) {
        const PointCloud cloud = random_cloud(rng, 20, 0.4, 0.0, 1.0);
        const auto totals = featurize(cloud, norm, 20).feature_totals();
        for (int f = 0; f < kNumFeatures; ++f) {
            std::int64_t present = 0;
            for (const Point& p : cloud.points) present += p[f].has_value() ? 1 : 0;
            EXPECT_EQ(totals[f], present);
        }
    }
}

TEST(Featurize, DeletingOneValueChangesExactlyOneBin) {
    std::mt19937_64 rng(77);
    Normalizer norm = unit_normalizer();
    norm.lo.fill(-8.0);
    norm.hi.fill(8.0);
    int tested = 0;
    while (tested < 1000) {
        PointCloud cloud = random_cloud(rng, 20, 0.3);
        std::vector<std::pair<std::size_t, int>> present;
        for (std::size_t i = 0; i < cloud.points.size(); ++i)
            for (int f = 0; f < kNumFeatures; ++f)
                if (cloud.points[i][f].has_value()) present.emplace_back(i, f);
        if (present.empty()) continue;
        const auto [pi, pf] = present[rng() % present.size()];

        const HistogramFeature before = featurize(cloud, norm, 20);
        cloud.points[pi][pf] = std::nullopt;
        const HistogramFeature after = featurize(cloud, norm, 20);

        int changed = 0;
        for (int f = 0; f < kNumFeatures; ++f) {
            for (int b = 0; b < 20; ++b) {
                const std::int64_t delta = before.at(f, b) - after.at(f, b);
                if (delta != 0) {
                    ++changed;
                    EXPECT_EQ(delta, 1);
                    EXPECT_EQ(f, pf);
                }
            }
        }
        EXPECT_EQ(changed, 1);
        ++tested;
    }
}

TEST(Featurize, PermutationInvariant) {
    std::mt19937_64 rng(31337);
    const Normalizer norm = unit_normalizer();
    for (int trial = 0; trial < 100; ++trial) {
        PointCloud cloud = random_cloud(rng, 25, 0.2, 0.0, 1.0);
        const HistogramFeature before = featurize(cloud, norm, 20);
        std::shuffle(cloud.points.begin(), cloud.points.end(), rng);
        EXPECT_EQ(before, featurize(cloud, norm, 20));
    }
}

TEST(Featurize, StableUnderSubBinEdgePerturbation) {
    std::mt19937_64 rng(9);
    const Normalizer norm = unit_normalizer();
    const int bins = 20;
    const double width = 1.0 / bins;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        PointCloud cloud = random_cloud(rng, 10, 0.0, 0.0, 1.0);
        const HistogramFeature before = featurize(cloud, norm, bins);
        for (Point& p : cloud.points) {
            for (int f = 0; f < kNumFeatures; ++f) {
                if (!p[f].has_value()) continue;
                const double u = *p[f];
                const double pos = u / width - std::floor(u / width);
                const double gap = 0.9 * width * std::min(pos, 1.0 - pos);
                if (gap <= 0.0) continue;
                p[f] = u + (unit(rng) * 2.0 - 1.0) * gap;
            }
        }
        EXPECT_EQ(before, featurize(cloud, norm, bins)) << "trial " << trial;
    }
}

TEST(CountsToInput, RawCastsCounts) {
    PointCloud empty;
    const auto x = counts_to_input(featurize(empty, unit_normalizer(), 20), InputMode::Raw);
    EXPECT_EQ(x.size(), 120u);
    for (double v : x) EXPECT_EQ(v, 0.0);
}

TEST(CountsToInput, DensityDividesByPresentCount) {
    PointCloud cloud;
    cloud.track_id = "t";
    for (double v : {0.01, 0.02, 0.06, 0.09}) {  // bins 0,0,1,1
        Point p{};
        p[0] = v;
        cloud.points.push_back(p);
    }
    const auto x = counts_to_input(featurize(cloud, unit_normalizer(), 20), InputMode::Density);
    EXPECT_DOUBLE_EQ(x[0], 0.5);
    EXPECT_DOUBLE_EQ(x[1], 0.5);
    EXPECT_DOUBLE_EQ(x[2], 0.0);
    // feature 1 has no present values: stays all zero
    for (int b = 0; b < 20; ++b) EXPECT_EQ(x[20 + b], 0.0);
}

TEST(NormalizerJson, RoundTripAndSchema) {
    Normalizer norm;
    norm.kind = NormKind::StatClip;
    for (int f = 0; f < kNumFeatures; ++f) {
        norm.lo[f] = -1.5 * (f + 1);
        norm.hi[f] = 2.25 * (f + 1);
    }
    norm.bins = 20;
    const std::string text = normalizer_to_json(norm);
    EXPECT_NE(text.find("\"strategy\""), std::string::npos);
    EXPECT_NE(text.find("\"lo\""), std::string::npos);
    EXPECT_NE(text.find("\"hi\""), std::string::npos);
    EXPECT_NE(text.find("\"bins\""), std::string::npos);

    const Normalizer back = normalizer_from_json(text);
    EXPECT_EQ(back.kind, norm.kind);
    EXPECT_EQ(back.bins, norm.bins);
    for (int f = 0; f < kNumFeatures; ++f) {
        EXPECT_EQ(back.lo[f], norm.lo[f]);
        EXPECT_EQ(back.hi[f], norm.hi[f]);
    }
}
