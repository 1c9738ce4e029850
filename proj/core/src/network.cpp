#include "refhist/network.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace refhist {

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::Tanh: return "tanh";
    }
    throw std::invalid_argument("unknown Activation");
}

Activation activation_from_string(std::string_view name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "tanh") return Activation::Tanh;
    throw std::invalid_argument("unknown activation: " + std::string(name));
}

double apply_activation(Activation a, double v) {
    switch (a) {
        case Activation::ReLU: return v > 0.0 ? v : 0.0;
        case Activation::Tanh: return std::tanh(v);
    }
    return v;
}

double activation_grad(Activation a, double pre, double post) {
    switch (a) {
        case Activation::ReLU: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: return 1.0 - post * post;
    }
    return 1.0;
}

void MlpConfig::validate() const {
    if (input_dim < 1 || hidden[0] < 1 || hidden[1] < 1 || output_dim < 1)
        throw std::invalid_argument("all MLP dimensions must be >= 1");
}

std::int64_t count_parameters(const MlpConfig& cfg) {
    cfg.validate();
    const auto ins = cfg.layer_inputs();
    const auto outs = cfg.layer_outputs();
    std::int64_t total = 0;
    for (int l = 0; l < 3; ++l)
        total += static_cast<std::int64_t>(outs[l]) * ins[l] + outs[l];
    return total;
}

namespace {

Eigen::MatrixXd glorot_uniform(int rows, int cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) w(r, c) = dist(rng);
    return w;
}

}  // namespace

MlpModel init_mlp(const MlpConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    MlpModel model;
    model.config = cfg;
    std::mt19937_64 rng(seed);
    const auto ins = cfg.layer_inputs();
    const auto outs = cfg.layer_outputs();
    for (int l = 0; l < 3; ++l) {
        model.w[l] = glorot_uniform(outs[l], ins[l], rng);
        model.b[l] = Eigen::VectorXd::Zero(outs[l]);
        model.adam[l].m_w = Eigen::MatrixXd::Zero(outs[l], ins[l]);
        model.adam[l].v_w = Eigen::MatrixXd::Zero(outs[l], ins[l]);
        model.adam[l].m_b = Eigen::VectorXd::Zero(outs[l]);
        model.adam[l].v_b = Eigen::VectorXd::Zero(outs[l]);
    }
    return model;
}

ClassWeights class_weights(const std::array<std::size_t, kNumClasses>& counts) {
    std::size_t total = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        if (counts[c] == 0)
            throw std::invalid_argument("empty class: " +
                                        std::string(to_string(static_cast<ClassId>(c))));
        total += counts[c];
    }
    ClassWeights weights;
    for (int c = 0; c < kNumClasses; ++c)
        weights.w[c] = static_cast<double>(total) /
                       (static_cast<double>(kNumClasses) * static_cast<double>(counts[c]));
    return weights;
}

Eigen::VectorXd forward(const MlpModel& model, const Eigen::VectorXd& x, ForwardCache* cache) {
    if (x.size() != model.config.input_dim)
        throw std::invalid_argument("input dimension mismatch: expected " +
                                    std::to_string(model.config.input_dim) + ", got " +
                                    std::to_string(x.size()));
    const Activation act = model.config.activation;

    Eigen::VectorXd pre1 = model.w[0] * x + model.b[0];
    Eigen::VectorXd z1 = pre1.unaryExpr([act](double v) { return apply_activation(act, v); });
    Eigen::VectorXd pre2 = model.w[1] * z1 + model.b[1];
    Eigen::VectorXd z2 = pre2.unaryExpr([act](double v) { return apply_activation(act, v); });
    Eigen::VectorXd logits = model.w[2] * z2 + model.b[2];

    if (cache) {
        cache->x = x;
        cache->pre1 = std::move(pre1);
        cache->z1 = z1;
        cache->pre2 = std::move(pre2);
        cache->z2 = z2;
        cache->logits = logits;
    }
    return logits;
}

MlpGradients MlpGradients::zeros(const MlpConfig& cfg) {
    MlpGradients g;
    const auto ins = cfg.layer_inputs();
    const auto outs = cfg.layer_outputs();
    for (int l = 0; l < 3; ++l) {
        g.dw[l] = Eigen::MatrixXd::Zero(outs[l], ins[l]);
        g.db[l] = Eigen::VectorXd::Zero(outs[l]);
    }
    return g;
}

void MlpGradients::add(const MlpGradients& other) {
    for (int l = 0; l < 3; ++l) {
        dw[l] += other.dw[l];
        db[l] += other.db[l];
    }
}

void MlpGradients::scale(double s) {
    for (int l = 0; l < 3; ++l) {
        dw[l] *= s;
        db[l] *= s;
    }
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double mx = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - mx).exp();
    return e / e.sum();
}

double loss_and_grad(const MlpModel& model, const Eigen::VectorXd& x, int label, double weight,
                     MlpGradients& out) {
    if (label < 0 || label >= model.config.output_dim)
        throw std::invalid_argument("label index out of range");
    ForwardCache cache;
    forward(model, x, &cache);

    const Eigen::VectorXd p = softmax(cache.logits);
    const double loss = weight * (-std::log(std::max(p(label), 1e-300)));

    // dL/dlogits = weight * (softmax - onehot)
    Eigen::VectorXd dlogits = weight * p;
    dlogits(label) -= weight;

    const Activation act = model.config.activation;
    out.dw[2] = dlogits * cache.z2.transpose();
    out.db[2] = dlogits;

    Eigen::VectorXd dz2 = model.w[2].transpose() * dlogits;
    for (int i = 0; i < dz2.size(); ++i)
        dz2(i) *= activation_grad(act, cache.pre2(i), cache.z2(i));
    out.dw[1] = dz2 * cache.z1.transpose();
    out.db[1] = dz2;

    Eigen::VectorXd dz1 = model.w[1].transpose() * dz2;
    for (int i = 0; i < dz1.size(); ++i)
        dz1(i) *= activation_grad(act, cache.pre1(i), cache.z1(i));
    out.dw[0] = dz1 * cache.x.transpose();
    out.db[0] = dz1;

    return loss;
}

double loss_and_grad(const MlpModel& model, const Eigen::VectorXd& x, ClassId label,
                     const ClassWeights& weights, MlpGradients& out) {
    const int idx = static_cast<int>(label);
    return loss_and_grad(model, x, idx, weights.w[idx], out);
}

void adam_step(MlpModel& model, const MlpGradients& grads, const AdamParams& params) {
    model.adam_t += 1;
    for (int l = 0; l < 3; ++l) {
        adam_update_block(model.w[l], model.adam[l].m_w, model.adam[l].v_w, grads.dw[l],
                          model.adam_t, params);
        adam_update_block(model.b[l], model.adam[l].m_b, model.adam[l].v_b, grads.db[l],
                          model.adam_t, params);
    }
}

int argmax_index(const Eigen::VectorXd& v) {
    int best = 0;
    for (int i = 1; i < v.size(); ++i)
        if (v(i) > v(best)) best = i;
    return best;
}

Prediction predict(const MlpModel& model, const Eigen::VectorXd& x) {
    if (model.config.output_dim != kNumClasses)
        throw std::invalid_argument("predict requires a 5-class output layer");
    const Eigen::VectorXd logits = forward(model, x);
    Prediction pred;
    pred.probabilities = softmax(logits);
    pred.label = static_cast<ClassId>(argmax_index(logits));
    return pred;
}

namespace {

using nlohmann::json;

json layer_to_json(const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
    json jw = json::array();
    for (int r = 0; r < w.rows(); ++r)
        for (int c = 0; c < w.cols(); ++c) jw.push_back(w(r, c));
    json jb = json::array();
    for (int i = 0; i < b.size(); ++i) jb.push_back(b(i));
    return json{{"w", std::move(jw)}, {"b", std::move(jb)}};
}

void layer_from_json(const json& layer, int out_dim, int in_dim, Eigen::MatrixXd& w,
                     Eigen::VectorXd& b) {
    const auto jw = layer.at("w").get<std::vector<double>>();
    const auto jb = layer.at("b").get<std::vector<double>>();
    if (jw.size() != static_cast<std::size_t>(out_dim) * in_dim ||
        jb.size() != static_cast<std::size_t>(out_dim))
        throw std::runtime_error("layer shape does not match config");
    w.resize(out_dim, in_dim);
    for (int r = 0; r < out_dim; ++r)
        for (int c = 0; c < in_dim; ++c) w(r, c) = jw[static_cast<std::size_t>(r) * in_dim + c];
    b = Eigen::Map<const Eigen::VectorXd>(jb.data(), out_dim);
}

}  // namespace

std::string model_to_json(const MlpModel& model) {
    json obj;
    obj["kind"] = "mlp";
    obj["config"] = {{"input_dim", model.config.input_dim},
                     {"hidden", model.config.hidden},
                     {"output_dim", model.config.output_dim},
                     {"activation", std::string(to_string(model.config.activation))},
                     {"input_mode", std::string(to_string(model.config.input_mode))}};
    json layers = json::array();
    for (int l = 0; l < 3; ++l) layers.push_back(layer_to_json(model.w[l], model.b[l]));
    obj["layers"] = std::move(layers);
    return obj.dump(2);
}

MlpModel model_from_json(const std::string& text) {
    json obj = json::parse(text);
    if (obj.value("kind", "mlp") != "mlp") throw std::runtime_error("model file is not an MLP");
    MlpConfig cfg;
    const json& jc = obj.at("config");
    cfg.input_dim = jc.at("input_dim").get<int>();
    const auto hidden = jc.at("hidden").get<std::vector<int>>();
    if (hidden.size() != 2) throw std::runtime_error("MLP config requires two hidden widths");
    cfg.hidden = {hidden[0], hidden[1]};
    cfg.output_dim = jc.at("output_dim").get<int>();
    cfg.activation = activation_from_string(jc.value("activation", "relu"));
    cfg.input_mode = input_mode_from_string(jc.value("input_mode", "raw"));
    cfg.validate();

    MlpModel model = init_mlp(cfg, 0);
    const json& layers = obj.at("layers");
    if (!layers.is_array() || layers.size() != 3)
        throw std::runtime_error("MLP checkpoint requires exactly 3 layers");
    const auto ins = cfg.layer_inputs();
    const auto outs = cfg.layer_outputs();
    for (int l = 0; l < 3; ++l) layer_from_json(layers[l], outs[l], ins[l], model.w[l], model.b[l]);
    return model;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());
    out << model_to_json(model) << '\n';
}

MlpModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace refhist
