// Acceptance suite: every release criterion runs here at its stated
// tolerance and prints one PASS/FAIL line. Criteria 6-9 share one
// deterministic pair of trained models (the recipe, scaled to 160 epochs
// at a learning rate matching the desk-scale corpus, identical for both
// architectures).

#include <gtest/gtest.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>

#include "refhist/baseline.hpp"
#include "refhist/dataset_io.hpp"
#include "refhist/featurizer.hpp"
#include "refhist/network.hpp"
#include "refhist/perturb.hpp"
#include "refhist/pipeline.hpp"
#include "refhist/point_cloud.hpp"
#include "refhist/seeding.hpp"
#include "refhist/synthgen.hpp"
#include "test_oracles.hpp"

#ifndef REFHIST_CLI_PATH
#error "REFHIST_CLI_PATH must point at the refhist executable"
#endif

namespace fs = std::filesystem;
using namespace refhist;
namespace rt = refhist::testing;

namespace {

void report_criterion(int number, const char* name, bool passed) {
    std::printf("[ACCEPTANCE] criterion %2d (%s): %s\n", number, name,
                passed ? "PASS" : "FAIL");
    std::fflush(stdout);
}

class Acceptance : public ::testing::Test {};

}  // namespace

TEST_F(Acceptance, Criterion01ParameterCountIdentities) {
    const auto start = std::chrono::steady_clock::now();
    const auto count = [](int h1, int h2) {
        MlpConfig cfg;
        cfg.hidden = {h1, h2};
        return count_parameters(cfg);
    };
    const std::array<std::tuple<int, int, std::int64_t>, 14> rows{{
        {4, 4, 529},    {4, 8, 569},    {4, 16, 649},   {8, 4, 1029},  {8, 8, 1085},
        {8, 16, 1197},  {8, 32, 1421},  {16, 4, 2029},  {16, 8, 2117}, {16, 16, 2293},
        {16, 32, 2645}, {32, 8, 4181},  {32, 16, 4485}, {32, 32, 5093},
    }};
    for (const auto& [h1, h2, expected] : rows)
        EXPECT_EQ(count(h1, h2), expected) << h1 << "x" << h2;
    EXPECT_EQ(count_parameters(MlpConfig{}), 2293);  // the shipped model size
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_LT(seconds, 1.0);
    report_criterion(1, "parameter-count identities", !HasFailure());
}

TEST_F(Acceptance, Criterion02GradientCorrectness) {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20260809);

    int tested = 0;
    while (tested < 100) {
        MlpConfig cfg;
        cfg.input_dim = 4 + static_cast<int>(rng() % 8);
        cfg.hidden = {3 + static_cast<int>(rng() % 5), 3 + static_cast<int>(rng() % 5)};
        cfg.output_dim = 3 + static_cast<int>(rng() % 3);
        const MlpModel model = init_mlp(cfg, rng());
        const Eigen::VectorXd x = rt::random_vector(rng, cfg.input_dim, 2.0);
        if (!rt::mlp_instance_is_smooth(model, x)) continue;
        EXPECT_LT(rt::fd_check_mlp(model, x, static_cast<int>(rng() % cfg.output_dim),
                                   0.5 + static_cast<double>(rng() % 6)),
                  rt::kFdRelTol);
        ++tested;
    }

    tested = 0;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (tested < 100) {
        PointNetConfig cfg;
        cfg.point_layers = {3 + static_cast<int>(rng() % 4), 3 + static_cast<int>(rng() % 4)};
        cfg.classifier_hidden = {3 + static_cast<int>(rng() % 4)};
        cfg.output_dim = 3 + static_cast<int>(rng() % 3);
        cfg.max_points = 16;
        const PointNetModel model = init_pointnet(cfg, rng());
        Eigen::MatrixXd points(kNumFeatures, 1 + static_cast<int>(rng() % 6));
        for (Eigen::Index r = 0; r < points.rows(); ++r)
            for (Eigen::Index c = 0; c < points.cols(); ++c) points(r, c) = unit(rng);
        if (!rt::pointnet_instance_is_smooth(model, points)) continue;
        EXPECT_LT(rt::fd_check_pointnet(model, points, static_cast<int>(rng() % cfg.output_dim),
                                        0.5 + static_cast<double>(rng() % 6)),
                  rt::kFdRelTol);
        ++tested;
    }

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_LT(seconds, 30.0);
    report_criterion(2, "gradient correctness vs finite differences", !HasFailure());
}

TEST_F(Acceptance, Criterion03HistogramOracleEquivalence) {
    std::mt19937_64 rng(333);
    Normalizer norm = rt::unit_normalizer();
    norm.lo.fill(-8.0);
    norm.hi.fill(8.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const PointCloud cloud = rt::random_cloud(rng, 30, 0.25);
        const int bins = 1 + static_cast<int>(rng() % 32);
        EXPECT_EQ(featurize(cloud, norm, bins), rt::brute_force_histogram(cloud, norm, bins))
            << "trial " << trial;
    }
    report_criterion(3, "histogram oracle equivalence", !HasFailure());
}

TEST_F(Acceptance, Criterion04MissingValueLocality) {
    std::mt19937_64 rng(444);
    Normalizer norm = rt::unit_normalizer();
    norm.lo.fill(-8.0);
    norm.hi.fill(8.0);
    int tested = 0;
    while (tested < 1000) {
        PointCloud cloud = rt::random_cloud(rng, 20, 0.3);
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
    report_criterion(4, "missing-value locality", !HasFailure());
}

TEST_F(Acceptance, Criterion05ClassWeights) {
    const ClassWeights weights = class_weights({97000, 27000, 31000, 11000, 23000});
    const std::array<double, kNumClasses> expected{
        0.3896907216494845,  // 189000 / (5 * 97000)
        1.4,                 // 189000 / (5 * 27000)
        1.2193548387096775,  // 189000 / (5 * 31000)
        3.4363636363636365,  // 189000 / (5 * 11000)
        1.6434782608695653,  // 189000 / (5 * 23000)
    };
    for (int c = 0; c < kNumClasses; ++c)
        EXPECT_LT(std::abs(weights.w[c] - expected[c]) / expected[c], 1e-9);
    report_criterion(5, "class-weight formula on the recorded composition", !HasFailure());
}

// ---------------------------------------------------------------
// Shared trained models for criteria 6-9
// ---------------------------------------------------------------

namespace {

struct TrainedState {
    Dataset dataset;
    std::vector<PointCloud> test_samples;
    TrainResult refhist;
    BaselineTrainResult baseline;
    double clean_refhist = 0.0;
    double clean_baseline = 0.0;
};

constexpr std::uint64_t kCorpusSeed = 11;
constexpr std::uint64_t kSplitSeed = 3;
constexpr std::uint64_t kTrainSeed = 5;
constexpr std::uint64_t kPerturbSeed = 9;

class TrainedModels : public ::testing::Test {
  protected:
    static void SetUpTestSuite() {
        state_ = std::make_unique<TrainedState>();
        SceneConfig scene = default_scene_config();
        ASSERT_EQ(scene.version, 2) << "acceptance pins profile config version 2";
        scene.seed = kCorpusSeed;
        std::size_t total = 0;
        for (std::size_t b : scene.budgets) total += b;
        ASSERT_GE(total, 5000u);

        Dataset corpus = generate(scene);
        state_->dataset = split_by_track(corpus, {0.7, 0.2, 0.1}, kSplitSeed);
        for (std::size_t i : state_->dataset.indices_of(Split::Test))
            state_->test_samples.push_back(state_->dataset.samples[i]);

        TrainConfig cfg;
        cfg.epochs = 160;  // within the 200-epoch cap
        cfg.batch_size = 64;
        cfg.lr = 1e-3;
        cfg.seed = kTrainSeed;
        state_->refhist = train(state_->dataset, cfg);
        state_->baseline = baseline_train(state_->dataset, cfg);

        state_->clean_refhist =
            evaluate(state_->refhist.model, state_->refhist.norm, state_->test_samples)
                .balanced_accuracy;
        state_->clean_baseline =
            evaluate(state_->baseline.model, state_->baseline.norm, state_->test_samples)
                .balanced_accuracy;
    }
    static void TearDownTestSuite() { state_.reset(); }

    static std::unique_ptr<TrainedState> state_;
};

std::unique_ptr<TrainedState> TrainedModels::state_;

}  // namespace

TEST_F(TrainedModels, Criterion06NoiseRobustnessTrend) {
    ASSERT_NE(state_, nullptr);
    // Near-parity on clean data first: histogram model within 0.1 of the
    // point-based baseline.
    EXPECT_LE(std::abs(state_->clean_refhist - state_->clean_baseline), 0.1);

    const NoiseSpec spec{0.025, derive_seed(kPerturbSeed, "noise")};
    const auto noisy = add_noise(state_->test_samples, state_->refhist.norm, spec);
    const double noisy_refhist =
        evaluate(state_->refhist.model, state_->refhist.norm, noisy).balanced_accuracy;
    const double noisy_baseline =
        evaluate(state_->baseline.model, state_->baseline.norm, noisy).balanced_accuracy;

    const double drop_refhist = state_->clean_refhist - noisy_refhist;
    const double drop_baseline = state_->clean_baseline - noisy_baseline;
    std::printf("  noise sigma=0.025: refhist %.4f -> %.4f (drop %.4f), "
                "baseline %.4f -> %.4f (drop %.4f)\n",
                state_->clean_refhist, noisy_refhist, drop_refhist, state_->clean_baseline,
                noisy_baseline, drop_baseline);
    EXPECT_LT(drop_refhist, drop_baseline);
    EXPECT_LE(drop_refhist, 0.05);
    report_criterion(6, "noise-robustness trend at sigma=0.025", !HasFailure());
}

TEST_F(TrainedModels, Criterion07RemovalRobustnessTrend) {
    ASSERT_NE(state_, nullptr);
    const RemovalSpec spec05 = sweep_cell_spec(FeatureKind::Y, 0.05, 0, kPerturbSeed);
    const RemovalSpec spec90 = sweep_cell_spec(FeatureKind::Y, 0.90, 1, kPerturbSeed);
    const auto removed05 = remove_values(state_->test_samples, spec05);
    const auto removed90 = remove_values(state_->test_samples, spec90);

    const double r05 =
        evaluate(state_->refhist.model, state_->refhist.norm, removed05).balanced_accuracy;
    const double b05 =
        evaluate(state_->baseline.model, state_->baseline.norm, removed05).balanced_accuracy;
    const double r90 =
        evaluate(state_->refhist.model, state_->refhist.norm, removed90).balanced_accuracy;

    const double drop_refhist = state_->clean_refhist - r05;
    const double drop_baseline = state_->clean_baseline - b05;
    std::printf("  remove 5%% of y: refhist %.4f -> %.4f, baseline %.4f -> %.4f; "
                "remove 90%% of y: refhist -> %.4f\n",
                state_->clean_refhist, r05, state_->clean_baseline, b05, r90);
    EXPECT_LE(std::abs(drop_refhist), 0.01);
    EXPECT_GT(drop_baseline, drop_refhist);
    EXPECT_GT(r90, 0.2 + 0.3);
    report_criterion(7, "removed-feature robustness trend", !HasFailure());
}

TEST_F(TrainedModels, Criterion08FeatureImportanceOrdering) {
    ASSERT_NE(state_, nullptr);
    const std::vector<FeatureKind> features{FeatureKind::Y, FeatureKind::Z};
    const std::vector<double> fractions{0.9};
    const auto cells = importance_sweep(state_->refhist.model, state_->refhist.norm,
                                        state_->test_samples, features, fractions, kPerturbSeed);
    ASSERT_EQ(cells.size(), 2u);
    const double drop_y = state_->clean_refhist - cells[0].report.balanced_accuracy;
    const double drop_z = state_->clean_refhist - cells[1].report.balanced_accuracy;
    std::printf("  90%% removal: y drop %.4f, z drop %.4f\n", drop_y, drop_z);
    EXPECT_GT(drop_z, drop_y);
    report_criterion(8, "elevation outweighs lateral displacement", !HasFailure());
}

TEST_F(TrainedModels, Criterion09AblationFlipsAConstructedSample) {
    ASSERT_NE(state_, nullptr);
    // Manhole-like clouds: flat, slow, small footprint, with elevation
    // unreliable on the ordinary points and a single spurious large z.
    // Scan moderately ambiguous RCS/footprint settings for a sample the
    // model calls underridable until that one value is removed.
    std::mt19937_64 rng(777);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::optional<AblationResult> flip;
    int candidates = 0;
    for (const double xy_scale : {0.45, 1.0, 1.5}) {
        for (const std::optional<double> rcs_level :
             {std::optional<double>{}, std::optional<double>{0.0}, std::optional<double>{4.0},
              std::optional<double>{8.0}}) {
            for (const int n_base : {2, 3, 4, 6}) {
                for (const double z_out : {4.2, 4.6, 5.0}) {
                    const double cx = 15.0 + 45.0 * unit(rng);
                    const double cy = -20.0 + 40.0 * unit(rng);
                    PointCloud cloud;
                    cloud.label = ClassId::Overridable;
                    cloud.track_id = "constructed";
                    for (int i = 0; i < n_base; ++i) {
                        const double dx = xy_scale * (2.0 * unit(rng) - 1.0);
                        const double dy = 0.5 * xy_scale * (2.0 * unit(rng) - 1.0);
                        Point p{};
                        p[0] = dx;
                        p[1] = dy;
                        p[3] = std::sqrt((cx + dx) * (cx + dx) + (cy + dy) * (cy + dy));
                        p[4] = 0.15 * (2.0 * unit(rng) - 1.0);
                        if (rcs_level) p[5] = *rcs_level + 1.5 * (2.0 * unit(rng) - 1.0);
                        cloud.points.push_back(p);
                    }
                    Point outlier{};
                    outlier[2] = z_out;  // only the spurious elevation
                    cloud.points.push_back(outlier);
                    ++candidates;

                    const AblationTarget target{cloud.points.size() - 1, FeatureKind::Z};
                    const AblationResult result =
                        ablate_sample(state_->refhist.model, state_->refhist.norm, cloud,
                                      std::vector<AblationTarget>{target});
                    if (result.original.label == ClassId::Underridable &&
                        result.ablated.label == ClassId::Overridable) {
                        flip = result;
                        break;
                    }
                }
                if (flip) break;
            }
            if (flip) break;
        }
        if (flip) break;
    }
    EXPECT_TRUE(flip.has_value()) << "no constructed sample flipped out of " << candidates;
    if (flip) {
        std::printf("  flip found: underridable -> overridable; probability delta per class:");
        for (double d : flip->probability_delta) std::printf(" %+.4f", d);
        std::printf("\n");
        EXPECT_GT(flip->probability_delta[static_cast<int>(ClassId::Overridable)], 0.0);
        EXPECT_LT(flip->probability_delta[static_cast<int>(ClassId::Underridable)], 0.0);
    }
    report_criterion(9, "single-value ablation flips a constructed sample", !HasFailure());
}

// ---------------------------------------------------------------
// Criterion 10: artifact determinism end to end through the CLI
// ---------------------------------------------------------------

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(REFHIST_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_F(Acceptance, Criterion10DeterministicArtifacts) {
    const fs::path dir = fs::temp_directory_path() / "refhist_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto path = [&](const std::string& name) { return (dir / name).string(); };

    for (const char* round : {"r1", "r2"}) {
        const std::string d = path(round);
        fs::create_directories(d);
        ASSERT_EQ(run_cli("generate --out " + d + "/data.jsonl --seed 7 --budgets "
                          "400,200,200,120,200"),
                  0);
        ASSERT_EQ(run_cli("split --input " + d + "/data.jsonl --out-prefix " + d +
                          "/data --fractions 0.7,0.2,0.1 --seed 5"),
                  0);
        ASSERT_EQ(run_cli("train --train " + d + "/data.train.jsonl --val " + d +
                          "/data.val.jsonl --out-dir " + d + "/run --epochs 8 --lr 1e-3 --seed 5"),
                  0);
        ASSERT_EQ(run_cli("eval --model " + d + "/run/model.json --normalizer " + d +
                          "/run/normalizer.json --data " + d + "/data.test.jsonl --out-report " +
                          d + "/report.json --out-confusion " + d + "/confusion.csv"),
                  0);
        ASSERT_EQ(run_cli("noise-sweep --model " + d + "/run/model.json --normalizer " + d +
                          "/run/normalizer.json --data " + d + "/data.test.jsonl --sigmas "
                          "0,0.025 --seed 9 --out " + d + "/noise.csv"),
                  0);
        ASSERT_EQ(run_cli("remove-sweep --model " + d + "/run/model.json --normalizer " + d +
                          "/run/normalizer.json --data " + d + "/data.test.jsonl --features y,z "
                          "--fractions 0.05,0.9 --seed 9 --out " + d + "/sweep.csv"),
                  0);
    }

    for (const char* file :
         {"data.jsonl", "data.train.jsonl", "data.val.jsonl", "data.test.jsonl",
          "run/model.json", "run/normalizer.json", "run/curve.csv", "report.json",
          "confusion.csv", "noise.csv", "sweep.csv"}) {
        const std::string a = read_file(dir / "r1" / file);
        const std::string b = read_file(dir / "r2" / file);
        EXPECT_FALSE(a.empty()) << file;
        EXPECT_EQ(a, b) << file << " differs between identical runs";
    }
    report_criterion(10, "byte-identical artifacts across reruns", !HasFailure());
}

TEST_F(Acceptance, Criterion11InvarianceSuite) {
    std::mt19937_64 rng(1111);

    // Histogram permutation invariance.
    const Normalizer norm = rt::unit_normalizer();
    for (int trial = 0; trial < 100; ++trial) {
        PointCloud cloud = rt::random_cloud(rng, 25, 0.2, 0.0, 1.0);
        const HistogramFeature before = featurize(cloud, norm, 20);
        std::shuffle(cloud.points.begin(), cloud.points.end(), rng);
        EXPECT_EQ(before, featurize(cloud, norm, 20));
    }

    // Point-network permutation invariance.
    const PointNetModel pointnet = init_pointnet(PointNetConfig{}, 3);
    for (int trial = 0; trial < 100; ++trial) {
        PointCloud cloud = rt::random_cloud(rng, 20, 0.2, 0.0, 1.0);
        const Eigen::VectorXd before = baseline_forward(pointnet, cloud, norm);
        std::shuffle(cloud.points.begin(), cloud.points.end(), rng);
        EXPECT_EQ(before, baseline_forward(pointnet, cloud, norm));
    }

    // Softmax shift invariance.
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::VectorXd logits = rt::random_vector(rng, 5, 50.0);
        const double shift = rt::random_vector(rng, 1, 100.0)(0);
        const Eigen::VectorXd a = softmax(logits);
        const Eigen::VectorXd b = softmax(logits.array() + shift);
        for (int i = 0; i < 5; ++i) EXPECT_NEAR(a(i), b(i), 1e-12);
    }

    // Evaluation order invariance.
    std::vector<PointCloud> samples;
    for (int i = 0; i < 200; ++i) {
        PointCloud c = rt::random_cloud(rng, 6, 0.1, 0.0, 1.0);
        c.track_id = "s" + std::to_string(i);
        samples.push_back(std::move(c));
    }
    const auto predictor = [](const PointCloud& c) {
        return static_cast<ClassId>(std::hash<std::string>{}(c.track_id) % kNumClasses);
    };
    const EvalReport reference = evaluate_with(predictor, samples, 0);
    for (int trial = 0; trial < 100; ++trial) {
        std::shuffle(samples.begin(), samples.end(), rng);
        const EvalReport shuffled = evaluate_with(predictor, samples, 0);
        EXPECT_EQ(reference.confusion, shuffled.confusion);
        EXPECT_EQ(reference.balanced_accuracy, shuffled.balanced_accuracy);
    }

    report_criterion(11, "invariance suite", !HasFailure());
}
