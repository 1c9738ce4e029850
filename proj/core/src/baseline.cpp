#include "refhist/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "refhist/seeding.hpp"

namespace refhist {

void PointNetConfig::validate() const {
    if (point_layers.empty()) throw std::invalid_argument("at least one point layer is required");
    for (int wdt : point_layers)
        if (wdt < 1) throw std::invalid_argument("point layer widths must be >= 1");
    for (int wdt : classifier_hidden)
        if (wdt < 1) throw std::invalid_argument("classifier widths must be >= 1");
    if (output_dim < 1) throw std::invalid_argument("output_dim must be >= 1");
    if (max_points < 1) throw std::invalid_argument("max_points must be >= 1");
}

namespace {

// Layer dimension chain: 6 -> point layers -> (pool) -> classifier -> output.
std::vector<std::pair<int, int>> layer_shapes(const PointNetConfig& cfg) {
    std::vector<std::pair<int, int>> shapes;  // (out, in)
    int in = kNumFeatures;
    for (int out : cfg.point_layers) {
        shapes.emplace_back(out, in);
        in = out;
    }
    in = cfg.embedding_dim();
    for (int out : cfg.classifier_hidden) {
        shapes.emplace_back(out, in);
        in = out;
    }
    shapes.emplace_back(cfg.output_dim, in);
    return shapes;
}

Eigen::MatrixXd glorot_uniform(int rows, int cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) w(r, c) = dist(rng);
    return w;
}

struct BaselineCache {
    std::vector<Eigen::MatrixXd> point_pre, point_post;  // per point layer, dims x N
    std::vector<int> pool_argmax;                        // per embedding channel
    Eigen::VectorXd embedding;
    std::vector<Eigen::VectorXd> cls_pre, cls_post;  // classifier hidden layers
    Eigen::VectorXd logits;
};

Eigen::VectorXd forward_impl(const PointNetModel& model, const Eigen::MatrixXd& points,
                             BaselineCache* cache) {
    const PointNetConfig& cfg = model.config;
    if (points.rows() != kNumFeatures)
        throw std::invalid_argument("point matrix must have 6 rows");
    if (points.cols() > cfg.max_points)
        throw std::runtime_error("capacity exceeded: cloud has " + std::to_string(points.cols()) +
                                 " points, max_points is " + std::to_string(cfg.max_points));
    const Activation act = cfg.activation;
    const auto n_point = model.num_point_layers();
    const Eigen::Index n = points.cols();

    if (cache) {
        cache->point_pre.resize(n_point);
        cache->point_post.resize(n_point);
    }

    Eigen::MatrixXd a = points;
    for (std::size_t l = 0; l < n_point; ++l) {
        Eigen::MatrixXd pre = (model.w[l] * a).colwise() + model.b[l];
        Eigen::MatrixXd post = pre.unaryExpr([act](double v) { return apply_activation(act, v); });
        if (cache) {
            cache->point_pre[l] = pre;
            cache->point_post[l] = post;
        }
        a = std::move(post);
    }

    const int embed = cfg.embedding_dim();
    Eigen::VectorXd embedding = Eigen::VectorXd::Zero(embed);
    std::vector<int> argmax(embed, -1);
    if (n > 0) {
        for (int r = 0; r < embed; ++r) {
            int best = 0;
            for (Eigen::Index c = 1; c < n; ++c)
                if (a(r, c) > a(r, best)) best = static_cast<int>(c);
            argmax[r] = best;
            embedding(r) = a(r, best);
        }
    }
    if (cache) {
        cache->pool_argmax = std::move(argmax);
        cache->embedding = embedding;
        cache->cls_pre.resize(cfg.classifier_hidden.size());
        cache->cls_post.resize(cfg.classifier_hidden.size());
    }

    Eigen::VectorXd h = embedding;
    for (std::size_t l = 0; l < cfg.classifier_hidden.size(); ++l) {
        const std::size_t li = n_point + l;
        Eigen::VectorXd pre = model.w[li] * h + model.b[li];
        Eigen::VectorXd post = pre.unaryExpr([act](double v) { return apply_activation(act, v); });
        if (cache) {
            cache->cls_pre[l] = pre;
            cache->cls_post[l] = post;
        }
        h = std::move(post);
    }
    Eigen::VectorXd logits = model.w.back() * h + model.b.back();
    if (cache) cache->logits = logits;
    return logits;
}

}  // namespace

std::int64_t count_parameters(const PointNetConfig& cfg) {
    cfg.validate();
    std::int64_t total = 0;
    for (const auto& [out, in] : layer_shapes(cfg))
        total += static_cast<std::int64_t>(out) * in + out;
    return total;
}

PointNetModel init_pointnet(const PointNetConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    PointNetModel model;
    model.config = cfg;
    std::mt19937_64 rng(seed);
    for (const auto& [out, in] : layer_shapes(cfg)) {
        model.w.push_back(glorot_uniform(out, in, rng));
        model.b.push_back(Eigen::VectorXd::Zero(out));
        AdamState st;
        st.m_w = Eigen::MatrixXd::Zero(out, in);
        st.v_w = Eigen::MatrixXd::Zero(out, in);
        st.m_b = Eigen::VectorXd::Zero(out);
        st.v_b = Eigen::VectorXd::Zero(out);
        model.adam.push_back(std::move(st));
    }
    return model;
}

Eigen::MatrixXd normalized_points(const PointCloud& cloud, const Normalizer& norm) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(kNumFeatures, static_cast<Eigen::Index>(cloud.size()));
    for (std::size_t i = 0; i < cloud.size(); ++i)
        for (int f = 0; f < kNumFeatures; ++f)
            if (cloud.points[i][f].has_value())
                m(f, static_cast<Eigen::Index>(i)) = normalize_value(*cloud.points[i][f], f, norm);
    return m;
}

Eigen::VectorXd baseline_forward(const PointNetModel& model, const Eigen::MatrixXd& points) {
    return forward_impl(model, points, nullptr);
}

Eigen::VectorXd baseline_forward(const PointNetModel& model, const PointCloud& cloud,
                                 const Normalizer& norm) {
    return forward_impl(model, normalized_points(cloud, norm), nullptr);
}

PointNetGradients PointNetGradients::zeros(const PointNetConfig& cfg) {
    PointNetGradients g;
    for (const auto& [out, in] : layer_shapes(cfg)) {
        g.dw.push_back(Eigen::MatrixXd::Zero(out, in));
        g.db.push_back(Eigen::VectorXd::Zero(out));
    }
    return g;
}

void PointNetGradients::add(const PointNetGradients& other) {
    for (std::size_t l = 0; l < dw.size(); ++l) {
        dw[l] += other.dw[l];
        db[l] += other.db[l];
    }
}

void PointNetGradients::scale(double s) {
    for (std::size_t l = 0; l < dw.size(); ++l) {
        dw[l] *= s;
        db[l] *= s;
    }
}

double baseline_loss_and_grad(const PointNetModel& model, const Eigen::MatrixXd& points, int label,
                              double weight, PointNetGradients& out) {
    const PointNetConfig& cfg = model.config;
    if (label < 0 || label >= cfg.output_dim)
        throw std::invalid_argument("label index out of range");

    BaselineCache cache;
    forward_impl(model, points, &cache);
    const Eigen::VectorXd p = softmax(cache.logits);
    const double loss = weight * (-std::log(std::max(p(label), 1e-300)));

    Eigen::VectorXd dlogits = weight * p;
    dlogits(label) -= weight;

    const Activation act = cfg.activation;
    const auto n_point = model.num_point_layers();
    const auto n_cls = cfg.classifier_hidden.size();

    for (std::size_t l = 0; l < out.dw.size(); ++l) {
        out.dw[l].setZero();
        out.db[l].setZero();
    }

    // Classifier head.
    const Eigen::VectorXd& last_hidden = n_cls > 0 ? cache.cls_post[n_cls - 1] : cache.embedding;
    out.dw.back() = dlogits * last_hidden.transpose();
    out.db.back() = dlogits;
    Eigen::VectorXd d = model.w.back().transpose() * dlogits;
    for (std::size_t l = n_cls; l-- > 0;) {
        for (int i = 0; i < d.size(); ++i)
            d(i) *= activation_grad(act, cache.cls_pre[l](i), cache.cls_post[l](i));
        const std::size_t li = n_point + l;
        const Eigen::VectorXd& below = l > 0 ? cache.cls_post[l - 1] : cache.embedding;
        out.dw[li] = d * below.transpose();
        out.db[li] = d;
        d = model.w[li].transpose() * d;
    }

    // Max-pool routes each embedding channel's gradient to its argmax
    // point (first index on ties); an empty cloud stops here.
    const Eigen::Index n = points.cols();
    if (n == 0) return loss;
    Eigen::MatrixXd da = Eigen::MatrixXd::Zero(cfg.embedding_dim(), n);
    for (int r = 0; r < cfg.embedding_dim(); ++r) da(r, cache.pool_argmax[r]) = d(r);

    for (std::size_t l = n_point; l-- > 0;) {
        Eigen::MatrixXd dpre = da;
        for (Eigen::Index r = 0; r < dpre.rows(); ++r)
            for (Eigen::Index c = 0; c < dpre.cols(); ++c)
                dpre(r, c) *= activation_grad(act, cache.point_pre[l](r, c),
                                              cache.point_post[l](r, c));
        const Eigen::MatrixXd& below = l > 0 ? cache.point_post[l - 1] : points;
        out.dw[l] = dpre * below.transpose();
        out.db[l] = dpre.rowwise().sum();
        if (l > 0) da = model.w[l].transpose() * dpre;
    }
    return loss;
}

void adam_step(PointNetModel& model, const PointNetGradients& grads, const AdamParams& params) {
    model.adam_t += 1;
    for (std::size_t l = 0; l < model.w.size(); ++l) {
        adam_update_block(model.w[l], model.adam[l].m_w, model.adam[l].v_w, grads.dw[l],
                          model.adam_t, params);
        adam_update_block(model.b[l], model.adam[l].m_b, model.adam[l].v_b, grads.db[l],
                          model.adam_t, params);
    }
}

Prediction predict(const PointNetModel& model, const PointCloud& cloud, const Normalizer& norm) {
    if (model.config.output_dim != kNumClasses)
        throw std::invalid_argument("predict requires a 5-class output layer");
    const Eigen::VectorXd logits = baseline_forward(model, cloud, norm);
    Prediction pred;
    pred.probabilities = softmax(logits);
    pred.label = static_cast<ClassId>(argmax_index(logits));
    return pred;
}

BaselineTrainResult baseline_train(const Dataset& dataset, const TrainConfig& cfg,
                                   PointNetConfig net) {
    cfg.validate();
    const auto train_idx = dataset.indices_of(Split::Train);
    detail::check_train_split(dataset, train_idx);
    const auto val_idx = dataset.indices_of(Split::Val);

    std::size_t max_n = 0;
    for (const PointCloud& c : dataset.samples) max_n = std::max(max_n, c.size());
    net.max_points = std::max<int>(net.max_points, static_cast<int>(max_n));
    net.output_dim = kNumClasses;
    net.validate();

    std::vector<PointCloud> train_samples;
    train_samples.reserve(train_idx.size());
    for (std::size_t i : train_idx) train_samples.push_back(dataset.samples[i]);

    BaselineTrainResult result;
    result.norm = fit_normalizer(train_samples, cfg.norm_strategy, cfg.bins);

    std::vector<Eigen::MatrixXd> train_x(train_idx.size());
    std::vector<int> train_y(train_idx.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) {
        train_x[i] = normalized_points(dataset.samples[train_idx[i]], result.norm);
        train_y[i] = static_cast<int>(dataset.samples[train_idx[i]].label);
    }
    std::vector<Eigen::MatrixXd> val_x(val_idx.size());
    std::vector<int> val_y(val_idx.size());
    for (std::size_t i = 0; i < val_idx.size(); ++i) {
        val_x[i] = normalized_points(dataset.samples[val_idx[i]], result.norm);
        val_y[i] = static_cast<int>(dataset.samples[val_idx[i]].label);
    }

    const auto weights = detail::present_class_weights(class_counts(dataset, Split::Train));
    result.model = init_pointnet(net, derive_seed(cfg.seed, "init"));

    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    std::vector<std::size_t> order(train_idx.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    PointNetGradients batch_grads = PointNetGradients::zeros(net);
    PointNetGradients sample_grads = PointNetGradients::zeros(net);
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
                epoch_loss += baseline_loss_and_grad(result.model, train_x[s], train_y[s],
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
                const int pred = argmax_index(forward_impl(result.model, val_x[i], nullptr));
                confusion[val_y[i]][pred]++;
            }
            val_bacc = detail::balanced_accuracy_of(confusion);
        }
        result.curve.push_back(
            {epoch, epoch_loss / static_cast<double>(train_idx.size()), val_bacc});
    }
    return result;
}

EvalReport evaluate(const PointNetModel& model, const Normalizer& norm,
                    std::span<const PointCloud> samples, int threads) {
    const auto predict_fn = [&](const PointCloud& cloud) { return predict(model, cloud, norm).label; };
    return evaluate_with(predict_fn, samples, count_parameters(model.config), threads);
}

namespace {

using nlohmann::json;

json layer_to_json(const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
    json jw = json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) jw.push_back(w(r, c));
    json jb = json::array();
    for (Eigen::Index i = 0; i < b.size(); ++i) jb.push_back(b(i));
    return json{{"w", std::move(jw)}, {"b", std::move(jb)}};
}

}  // namespace

std::string model_to_json(const PointNetModel& model) {
    json obj;
    obj["kind"] = "pointnet";
    obj["config"] = {{"point_layers", model.config.point_layers},
                     {"classifier_hidden", model.config.classifier_hidden},
                     {"output_dim", model.config.output_dim},
                     {"max_points", model.config.max_points},
                     {"activation", std::string(to_string(model.config.activation))}};
    json layers = json::array();
    for (std::size_t l = 0; l < model.w.size(); ++l)
        layers.push_back(layer_to_json(model.w[l], model.b[l]));
    obj["layers"] = std::move(layers);
    return obj.dump(2);
}

PointNetModel pointnet_from_json(const std::string& text) {
    json obj = json::parse(text);
    if (obj.value("kind", "") != "pointnet")
        throw std::runtime_error("model file is not a pointnet checkpoint");
    PointNetConfig cfg;
    const json& jc = obj.at("config");
    cfg.point_layers = jc.at("point_layers").get<std::vector<int>>();
    cfg.classifier_hidden = jc.at("classifier_hidden").get<std::vector<int>>();
    cfg.output_dim = jc.at("output_dim").get<int>();
    cfg.max_points = jc.at("max_points").get<int>();
    cfg.activation = activation_from_string(jc.value("activation", "relu"));
    cfg.validate();

    PointNetModel model = init_pointnet(cfg, 0);
    const json& layers = obj.at("layers");
    if (!layers.is_array() || layers.size() != model.w.size())
        throw std::runtime_error("pointnet checkpoint layer count does not match config");
    for (std::size_t l = 0; l < model.w.size(); ++l) {
        const auto jw = layers[l].at("w").get<std::vector<double>>();
        const auto jb = layers[l].at("b").get<std::vector<double>>();
        const auto rows = model.w[l].rows();
        const auto cols = model.w[l].cols();
        if (jw.size() != static_cast<std::size_t>(rows * cols) ||
            jb.size() != static_cast<std::size_t>(rows))
            throw std::runtime_error("pointnet layer shape does not match config");
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                model.w[l](r, c) = jw[static_cast<std::size_t>(r * cols + c)];
        model.b[l] = Eigen::Map<const Eigen::VectorXd>(jb.data(), rows);
    }
    return model;
}

void save_model(const PointNetModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());
    out << model_to_json(model) << '\n';
}

PointNetModel load_pointnet(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return pointnet_from_json(ss.str());
}

}  // namespace refhist
