#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "refhist/featurizer.hpp"
#include "refhist/network.hpp"
#include "refhist/point_cloud.hpp"

namespace refhist {

struct TrainConfig {
    int epochs = 1000;
    int batch_size = 64;
    double lr = 1e-5;
    std::uint64_t seed = 0;
    NormStrategy norm_strategy{};  // StatClip by default
    int bins = 20;
    InputMode input_mode = InputMode::Raw;
    std::array<int, 2> hidden{16, 16};
    Activation activation = Activation::ReLU;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamParams adam() const { return {lr, beta1, beta2, eps}; }
    void validate() const;
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_balanced_accuracy = 0.0;  // NaN when the val split is empty
};

struct TrainResult {
    MlpModel model;
    Normalizer norm;
    std::vector<EpochStats> curve;
};

// Fits the normalizer on the train split only, then runs the standard
// recipe: seeded shuffling each epoch, mini-batches (last partial batch
// included), per-sample class-weighted cross-entropy averaged over the
// batch, one Adam step per batch. The final-epoch model is returned; no
// early stopping. Throws when the train split is empty or a class present
// in the dataset is missing from it.
TrainResult train(const Dataset& dataset, const TrainConfig& cfg);

struct EvalReport {
    // confusion[true][predicted]
    std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> confusion{};
    std::array<double, kNumClasses> per_class_accuracy{};
    double balanced_accuracy = 0.0;  // mean recall over classes with samples
    std::int64_t parameter_count = 0;
};

EvalReport report_from_confusion(
    const std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>& confusion,
    std::int64_t parameter_count);

// Shared accumulator for any classifier: pure map over samples plus an
// associative confusion merge, so the thread count never changes the
// result.
using PredictFn = std::function<ClassId(const PointCloud&)>;
EvalReport evaluate_with(const PredictFn& predict_fn, std::span<const PointCloud> samples,
                         std::int64_t parameter_count, int threads = 1);

EvalReport evaluate(const MlpModel& model, const Normalizer& norm,
                    std::span<const PointCloud> samples, int threads = 1);

std::string report_to_json(const EvalReport& report);
std::string confusion_to_csv(const EvalReport& report);
std::string curve_to_csv(std::span<const EpochStats> curve);

// Shortest round-trip decimal formatting; used by every CSV writer so
// re-runs are byte-identical.
std::string format_double(double v);

namespace detail {

// Shared between the histogram trainer and the point-based baseline so
// both use the identical recipe.
std::array<double, kNumClasses> present_class_weights(
    const std::array<std::size_t, kNumClasses>& counts);
void check_train_split(const Dataset& dataset, std::span<const std::size_t> train_idx);
double balanced_accuracy_of(
    const std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>& confusion);

}  // namespace detail

}  // namespace refhist
