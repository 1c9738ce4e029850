#include "refhist/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "refhist/seeding.hpp"

namespace refhist {

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
    if (bins < 1) throw std::invalid_argument("bin count must be >= 1");
    if (hidden[0] < 1 || hidden[1] < 1) throw std::invalid_argument("hidden widths must be >= 1");
}

namespace detail {

// Weights over the classes that actually occur in the training split:
// w_i = N_samples / (N_present_classes * N_i). With all 5 classes present
// this is exactly the standard class-weight formula.
std::array<double, kNumClasses> present_class_weights(
    const std::array<std::size_t, kNumClasses>& counts) {
    std::size_t total = 0;
    int present = 0;
    for (std::size_t c : counts) {
        total += c;
        if (c > 0) ++present;
    }
    if (present == 0) throw std::invalid_argument("train split is empty");
    std::array<double, kNumClasses> w{};
    for (int c = 0; c < kNumClasses; ++c)
        if (counts[c] > 0)
            w[c] = static_cast<double>(total) /
                   (static_cast<double>(present) * static_cast<double>(counts[c]));
    return w;
}

void check_train_split(const Dataset& dataset, std::span<const std::size_t> train_idx) {
    if (!dataset.has_split())
        throw std::invalid_argument("dataset has no split assignments; run split_by_track first");
    if (train_idx.empty()) throw std::invalid_argument("train split is empty");
    const auto all = class_counts(dataset);
    const auto train = class_counts(dataset, Split::Train);
    for (int c = 0; c < kNumClasses; ++c)
        if (all[c] > 0 && train[c] == 0)
            throw std::invalid_argument("missing class in train split: " +
                                        std::string(to_string(static_cast<ClassId>(c))));
}

double balanced_accuracy_of(
    const std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>& confusion) {
    double sum = 0.0;
    int nonempty = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        std::int64_t row = 0;
        for (int p = 0; p < kNumClasses; ++p) row += confusion[c][p];
        if (row > 0) {
            sum += static_cast<double>(confusion[c][c]) / static_cast<double>(row);
            ++nonempty;
        }
    }
    return nonempty > 0 ? sum / nonempty : 0.0;
}

}  // namespace detail

TrainResult train(const Dataset& dataset, const TrainConfig& cfg) {
    cfg.validate();
    const auto train_idx = dataset.indices_of(Split::Train);
    detail::check_train_split(dataset, train_idx);
    const auto val_idx = dataset.indices_of(Split::Val);

    std::vector<PointCloud> train_samples;
    train_samples.reserve(train_idx.size());
    for (std::size_t i : train_idx) train_samples.push_back(dataset.samples[i]);

    TrainResult result;
    result.norm = fit_normalizer(train_samples, cfg.norm_strategy, cfg.bins);

    const auto featurize_to_vec = [&](const PointCloud& cloud) {
        const auto x = counts_to_input(featurize(cloud, result.norm, cfg.bins), cfg.input_mode);
        return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()))
            .eval();
    };

    std::vector<Eigen::VectorXd> train_x(train_idx.size());
    std::vector<int> train_y(train_idx.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) {
        train_x[i] = featurize_to_vec(dataset.samples[train_idx[i]]);
        train_y[i] = static_cast<int>(dataset.samples[train_idx[i]].label);
    }
    std::vector<Eigen::VectorXd> val_x(val_idx.size());
    std::vector<int> val_y(val_idx.size());
    for (std::size_t i = 0; i < val_idx.size(); ++i) {
        val_x[i] = featurize_to_vec(dataset.samples[val_idx[i]]);
        val_y[i] = static_cast<int>(dataset.samples[val_idx[i]].label);
    }

    const auto weights = detail::present_class_weights(class_counts(dataset, Split::Train));

    MlpConfig net_cfg;
    net_cfg.input_dim = kNumFeatures * cfg.bins;
    net_cfg.hidden = cfg.hidden;
    net_cfg.output_dim = kNumClasses;
    net_cfg.activation = cfg.activation;
    net_cfg.input_mode = cfg.input_mode;
    result.model = init_mlp(net_cfg, derive_seed(cfg.seed, "init"));

    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    std::vector<std::size_t> order(train_idx.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    MlpGradients batch_grads = MlpGradients::zeros(net_cfg);
    MlpGradients sample_grads = MlpGradients::zeros(net_cfg);
    const AdamParams adam = cfg.adam();

    result.curve.reserve(cfg.epochs);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            const std::size_t end = std::min(pos + cfg.batch_size, order.size());
            batch_grads.scale(0.0);
            for (std::size_t k = pos; k < end; ++k) {
                const std::size_t s = order[k];
                epoch_loss += loss_and_grad(result.model, train_x[s], train_y[s],
                                            weights[train_y[s]], sample_grads);
                batch_grads.add(sample_grads);
            }
            batch_grads.scale(1.0 / static_cast<double>(end - pos));
            adam_step(result.model, batch_grads, adam);
            pos = end;
        }

        double val_bacc = std::numeric_limits<double>::quiet_NaN();
        if (!val_idx.empty()) {
            std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> confusion{};
            for (std::size_t i = 0; i < val_x.size(); ++i) {
                const int pred = argmax_index(forward(result.model, val_x[i]));
                confusion[val_y[i]][pred]++;
            }
            val_bacc = detail::balanced_accuracy_of(confusion);
        }
        result.curve.push_back(
            {epoch, epoch_loss / static_cast<double>(train_idx.size()), val_bacc});
    }
    return result;
}

EvalReport report_from_confusion(
    const std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>& confusion,
    std::int64_t parameter_count) {
    EvalReport report;
    report.confusion = confusion;
    report.parameter_count = parameter_count;
    for (int c = 0; c < kNumClasses; ++c) {
        std::int64_t row = 0;
        for (int p = 0; p < kNumClasses; ++p) row += confusion[c][p];
        report.per_class_accuracy[c] =
            row > 0 ? static_cast<double>(confusion[c][c]) / static_cast<double>(row) : 0.0;
    }
    report.balanced_accuracy = detail::balanced_accuracy_of(confusion);
    return report;
}

EvalReport evaluate_with(const PredictFn& predict_fn, std::span<const PointCloud> samples,
                         std::int64_t parameter_count, int threads) {
    if (samples.empty()) throw std::invalid_argument("cannot evaluate an empty sample set");
    if (threads < 1) threads = 1;
    threads = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(threads), samples.size()));

    using Confusion = std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>;
    std::vector<Confusion> partial(threads, Confusion{});

    const auto work = [&](int t) {
        const std::size_t chunk = (samples.size() + threads - 1) / threads;
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(begin + chunk, samples.size());
        for (std::size_t i = begin; i < end; ++i) {
            const int pred = static_cast<int>(predict_fn(samples[i]));
            partial[t][static_cast<int>(samples[i].label)][pred]++;
        }
    };

    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }

    Confusion merged{};
    for (const Confusion& c : partial)
        for (int i = 0; i < kNumClasses; ++i)
            for (int j = 0; j < kNumClasses; ++j) merged[i][j] += c[i][j];
    return report_from_confusion(merged, parameter_count);
}

EvalReport evaluate(const MlpModel& model, const Normalizer& norm,
                    std::span<const PointCloud> samples, int threads) {
    const auto predict_fn = [&](const PointCloud& cloud) {
        const auto x = counts_to_input(featurize(cloud, norm), model.config.input_mode);
        return predict(model,
                       Eigen::Map<const Eigen::VectorXd>(x.data(),
                                                         static_cast<Eigen::Index>(x.size())))
            .label;
    };
    return evaluate_with(predict_fn, samples, count_parameters(model.config), threads);
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json obj;
    obj["confusion"] = report.confusion;
    obj["per_class_accuracy"] = report.per_class_accuracy;
    obj["balanced_accuracy"] = report.balanced_accuracy;
    obj["parameter_count"] = report.parameter_count;
    return obj.dump(2);
}

std::string confusion_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "true_class";
    for (int p = 0; p < kNumClasses; ++p) out << ',' << to_string(static_cast<ClassId>(p));
    out << '\n';
    for (int c = 0; c < kNumClasses; ++c) {
        out << to_string(static_cast<ClassId>(c));
        for (int p = 0; p < kNumClasses; ++p) out << ',' << report.confusion[c][p];
        out << '\n';
    }
    return out.str();
}

std::string curve_to_csv(std::span<const EpochStats> curve) {
    std::ostringstream out;
    out << "epoch,train_loss,val_balanced_accuracy\n";
    for (const EpochStats& e : curve)
        out << e.epoch << ',' << format_double(e.train_loss) << ','
            << format_double(e.val_balanced_accuracy) << '\n';
    return out.str();
}

}  // namespace refhist
