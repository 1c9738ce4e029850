#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Core>

#include "refhist/featurizer.hpp"
#include "refhist/point_cloud.hpp"

namespace refhist {

enum class Activation : int { ReLU, Tanh };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

double apply_activation(Activation a, double v);
double activation_grad(Activation a, double pre, double post);

struct MlpConfig {
    int input_dim = 120;  // 6 features x 20 bins
    std::array<int, 2> hidden{16, 16};
    int output_dim = 5;
    Activation activation = Activation::ReLU;
    // How this model's input vector is produced from a histogram; part of
    // the checkpoint contract.
    InputMode input_mode = InputMode::Raw;

    void validate() const;
    std::array<int, 3> layer_inputs() const { return {input_dim, hidden[0], hidden[1]}; }
    std::array<int, 3> layer_outputs() const { return {hidden[0], hidden[1], output_dim}; }
};

// Sum over the 3 layers of out*in + out.
std::int64_t count_parameters(const MlpConfig& cfg);

struct AdamState {
    Eigen::MatrixXd m_w, v_w;
    Eigen::VectorXd m_b, v_b;
};

// 3 fully-connected layers; activation on the two hidden layers, linear
// output. Adam moments live alongside the parameters and are not part of
// serialized checkpoints.
struct MlpModel {
    MlpConfig config;
    std::array<Eigen::MatrixXd, 3> w;  // out x in
    std::array<Eigen::VectorXd, 3> b;
    std::array<AdamState, 3> adam;
    std::int64_t adam_t = 0;
};

// Weights uniform in +-sqrt(6/(in+out)), biases zero, seeded.
MlpModel init_mlp(const MlpConfig& cfg, std::uint64_t seed);

// Eq.-style class weights w_i = N_samples / (N_classes * N_i) over all 5
// classes. Throws std::invalid_argument("empty class: ...") if any count
// is zero.
struct ClassWeights {
    std::array<double, kNumClasses> w{};
};

ClassWeights class_weights(const std::array<std::size_t, kNumClasses>& counts);

struct ForwardCache {
    Eigen::VectorXd x;        // input
    Eigen::VectorXd pre1, z1; // layer 1 pre-activation / activation
    Eigen::VectorXd pre2, z2;
    Eigen::VectorXd logits;
};

// Throws std::invalid_argument on input dimension mismatch.
Eigen::VectorXd forward(const MlpModel& model, const Eigen::VectorXd& x,
                        ForwardCache* cache = nullptr);

struct MlpGradients {
    std::array<Eigen::MatrixXd, 3> dw;
    std::array<Eigen::VectorXd, 3> db;

    static MlpGradients zeros(const MlpConfig& cfg);
    void add(const MlpGradients& other);
    void scale(double s);
};

// Weighted softmax cross-entropy for one sample:
//   loss = weight * (-log softmax(logits)[label])
// with max-subtracted softmax; fills `out` with d loss / d {W_l, b_l}.
double loss_and_grad(const MlpModel& model, const Eigen::VectorXd& x, int label, double weight,
                     MlpGradients& out);
double loss_and_grad(const MlpModel& model, const Eigen::VectorXd& x, ClassId label,
                     const ClassWeights& weights, MlpGradients& out);

struct AdamParams {
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard bias-corrected Adam update; increments the step counter first.
void adam_step(MlpModel& model, const MlpGradients& grads, const AdamParams& params);

// Elementwise Adam update for one parameter block (shared with the
// point-based baseline).
template <typename Mat>
void adam_update_block(Mat& theta, Mat& m, Mat& v, const Mat& g, std::int64_t t,
                       const AdamParams& p) {
    m = p.beta1 * m + (1.0 - p.beta1) * g;
    v = p.beta2 * v.array().matrix() + (1.0 - p.beta2) * g.array().square().matrix();
    const double mc = 1.0 - std::pow(p.beta1, static_cast<double>(t));
    const double vc = 1.0 - std::pow(p.beta2, static_cast<double>(t));
    theta.array() -= p.lr * (m.array() / mc) / ((v.array() / vc).sqrt() + p.eps);
}

// Max-subtracted softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// Lowest index wins ties.
int argmax_index(const Eigen::VectorXd& v);

struct Prediction {
    ClassId label = ClassId::Car;
    Eigen::VectorXd probabilities;
};

// Requires output_dim == 5 (class logits).
Prediction predict(const MlpModel& model, const Eigen::VectorXd& x);

// {"kind":"mlp","config":{...},"layers":[{"w":[row-major],"b":[...]},x3]}
std::string model_to_json(const MlpModel& model);
MlpModel model_from_json(const std::string& text);
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace refhist
