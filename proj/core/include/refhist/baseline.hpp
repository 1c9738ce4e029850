#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "refhist/featurizer.hpp"
#include "refhist/network.hpp"
#include "refhist/pipeline.hpp"
#include "refhist/point_cloud.hpp"

namespace refhist {

// Minimal point-based comparator: shared fully-connected layers applied to
// each point independently, element-wise max over points, then a small
// classifier head. This is NOT a faithful replica of any published
// point-network; it is the smallest model exhibiting the per-point
// processing + max-pool aggregation mechanism the histogram approach is
// compared against. Missing feature values are substituted with 0 after
// normalization (the lower range boundary), because a per-point network
// cannot simply drop a slot.
struct PointNetConfig {
    std::vector<int> point_layers{16, 16};
    std::vector<int> classifier_hidden{16};
    int output_dim = 5;
    int max_points = 512;
    Activation activation = Activation::ReLU;

    void validate() const;
    int embedding_dim() const { return point_layers.back(); }
};

std::int64_t count_parameters(const PointNetConfig& cfg);

struct PointNetModel {
    PointNetConfig config;
    // Point layers first, then classifier hidden layers, then the output
    // layer; same order in checkpoints.
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;
    std::vector<AdamState> adam;
    std::int64_t adam_t = 0;

    std::size_t num_point_layers() const { return config.point_layers.size(); }
};

PointNetModel init_pointnet(const PointNetConfig& cfg, std::uint64_t seed);

// 6 x N matrix of normalized values, missing slots as 0.
Eigen::MatrixXd normalized_points(const PointCloud& cloud, const Normalizer& norm);

// Columns are points. Padded capacity never contributes: the max runs over
// the actual points only, and an empty cloud yields a zero embedding.
// Throws std::runtime_error("capacity exceeded ...") when N > max_points.
Eigen::VectorXd baseline_forward(const PointNetModel& model, const Eigen::MatrixXd& points);
Eigen::VectorXd baseline_forward(const PointNetModel& model, const PointCloud& cloud,
                                 const Normalizer& norm);

struct PointNetGradients {
    std::vector<Eigen::MatrixXd> dw;
    std::vector<Eigen::VectorXd> db;

    static PointNetGradients zeros(const PointNetConfig& cfg);
    void add(const PointNetGradients& other);
    void scale(double s);
};

double baseline_loss_and_grad(const PointNetModel& model, const Eigen::MatrixXd& points, int label,
                              double weight, PointNetGradients& out);

void adam_step(PointNetModel& model, const PointNetGradients& grads, const AdamParams& params);

Prediction predict(const PointNetModel& model, const PointCloud& cloud, const Normalizer& norm);

struct BaselineTrainResult {
    PointNetModel model;
    Normalizer norm;
    std::vector<EpochStats> curve;
};

// Same recipe as pipeline::train (epochs, batch size, lr, Adam, class
// weights, seeded shuffling) so comparisons between the two models are
// budget-matched. max_points is raised automatically to the corpus
// maximum when needed.
BaselineTrainResult baseline_train(const Dataset& dataset, const TrainConfig& cfg,
                                   PointNetConfig net = {});

EvalReport evaluate(const PointNetModel& model, const Normalizer& norm,
                    std::span<const PointCloud> samples, int threads = 1);

// {"kind":"pointnet","config":{...},"layers":[{"w":...,"b":...}, ...]}
std::string model_to_json(const PointNetModel& model);
PointNetModel pointnet_from_json(const std::string& text);
void save_model(const PointNetModel& model, const std::filesystem::path& path);
PointNetModel load_pointnet(const std::filesystem::path& path);

}  // namespace refhist
