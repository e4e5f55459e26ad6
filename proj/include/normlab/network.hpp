#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <utility>
#include <vector>

#include "normlab/latentgen.hpp"
#include "normlab/ssl_grads.hpp"

// Two-layer ReLU encoder trained with the InfoNCE loss, written out by hand
// so the embedding-boundary gradients stay inspectable. Inputs are rows,
// z = W2^T relu(W1^T x + b1) + b2.

namespace normlab {

class ShapeMismatch : public std::runtime_error {
 public:
  explicit ShapeMismatch(const char* what) : std::runtime_error(what) {}
};

class TrainingCollapse : public std::runtime_error {
 public:
  TrainingCollapse() : std::runtime_error("mean embedding norm below 1e-6") {}
};

struct MlpParams {
  Eigen::MatrixXd w1;  // obs_dim x hidden_dim
  Eigen::VectorXd b1;  // hidden_dim
  Eigen::MatrixXd w2;  // hidden_dim x out_dim
  Eigen::VectorXd b2;  // out_dim
};

struct MlpGradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
};

struct TrainConfig {
  int hidden_dim = 128;
  int batch_size = 128;
  int epochs = 50;
  double learning_rate = 0.1;
  double weight_decay = 0.0;   // additive 2*lambda*param on every parameter
  double cut_constant = 1.0;   // divide all initial parameters by this
  double gradscale_p = 0.0;    // embedding-boundary hook exponent
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

struct EpochTrace {
  int epoch = 0;
  double mean_loss = 0.0;  // mean of the batch losses seen this epoch
  Eigen::VectorXd per_class_mean_norm;  // indexed by class id, full dataset
  double mean_embedding_norm = 0.0;     // full dataset
  // Stats over the anchor/positive embedding pairs used this epoch.
  double pair_mean_cos = 0.0;
  double pair_opposite_rate = 0.0;  // fraction with angle beyond pi/2
};

struct BatchPairStats {
  double mean_cos = 0.0;
  double opposite_rate = 0.0;
};

struct TrainResult {
  MlpParams params;
  std::vector<EpochTrace> trace;
};

// Zero-mean normal weights with scale 1/sqrt(fan_in), zero biases, then every
// parameter (biases included) divided by cut_constant. With zero biases the
// network is positively homogeneous, so the division only shrinks the
// initial embeddings; directions are untouched.
MlpParams init_params(int obs_dim, int hidden_dim, int out_dim,
                      double cut_constant, std::uint64_t seed);

// inputs: n x obs_dim, returns n x out_dim.
Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& inputs);

// Backprop of the mean InfoNCE loss over the given (anchor row, positive row)
// pairs; the partition sum of each anchor runs over every other row of the
// batch. The gradient hook multiplies each embedding's upstream gradient by
// its norm^p before entering the encoder, and weight decay adds
// 2*weight_decay*param everywhere. mean_loss_out, if non-null, receives the
// batch loss (decay excluded).
MlpGradients backward(const MlpParams& params, const Eigen::MatrixXd& inputs,
                      const std::vector<std::pair<int, int>>& anchor_positive,
                      const TrainConfig& cfg, double* mean_loss_out = nullptr,
                      BatchPairStats* pair_stats_out = nullptr);

// Plain SGD. Every epoch reshuffles the data and draws a fresh same-class
// positive per anchor from the whole dataset. Throws TrainingCollapse when
// the mean embedding norm over the dataset falls below 1e-6; epochs finished
// before the collapse are still visible through trace_sink when given.
TrainResult train(const LatentDataset& ds, const TrainConfig& cfg,
                  std::vector<EpochTrace>* trace_sink = nullptr);

// Text checkpoint: one `name rows cols` line per array followed by rows of
// comma-separated values at 17 significant digits, so a load restores the
// exact bits.
void save_checkpoint(const std::filesystem::path& path, const MlpParams& params);
MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace normlab
