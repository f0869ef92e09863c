#ifndef PRCORR_NET_HPP
#define PRCORR_NET_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "prcorr/features.hpp"

namespace prcorr {

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shared per-satellite MLP: input_dim -> H x L hidden (rectifier) -> 1 linear.
struct MlpModel {
  int input_dim = kFeatureDim;
  int hidden_width = 40;
  int hidden_layers = 20;
  std::vector<Eigen::MatrixXd> weights;  // layer l: out x in
  std::vector<Eigen::VectorXd> biases;

  static MlpModel init(int hidden_width, int hidden_layers, std::uint64_t seed);
  std::size_t parameter_count() const;
};

struct TrainConfig {
  double lr_start = 1e-2;
  double lr_end = 1e-7;
  int max_iters = 5000;
  int batch_size = 128;  // epochs per batch
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int hidden_width = 40;
  int hidden_layers = 20;
};

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Predicted bias per slot; non-visible slots are 0.
Eigen::Matrix<double, kSlots, 1> forward(const MlpModel& model, const FeatureSample& sample);

// Sum over visible n of (mu_n - h' M_hat - label_n)^2, with M_hat the visible
// predictions of this sample.
double loss(const Eigen::Matrix<double, kSlots, 1>& predictions, const FeatureSample& sample);

// Mean-over-epochs batch loss and its exact reverse-mode gradient.
std::pair<double, Gradients> gradients(const MlpModel& model,
                                       const std::vector<FeatureSample>& batch);

struct TrainResult {
  MlpModel model;
  std::vector<std::array<double, 3>> curve;  // iter, loss, lr
};

TrainResult train(const std::vector<FeatureSample>& dataset, const TrainConfig& config);

double learning_rate(const TrainConfig& config, int iter);

// pr_m' = pr_m - mu_hat per visible satellite.
MeasurementSet correct_pseudoranges(const MeasurementSet& epoch, const MlpModel& model,
                                    const EpochFeatures& features);

void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

void write_loss_curve_csv(std::ostream& out, const std::vector<std::array<double, 3>>& curve);

}  // namespace prcorr

#endif
