#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "normlab/geometry.hpp"

// Closed forms for the InfoNCE loss on raw (unnormalized) embeddings and its
// exact gradients. The loss for anchor i with positive j over a batch is
//
//   L = -cos(z_i, z_j)/tau + log S_i,   S_i = sum_{k != i} exp(cos(z_i, z_k)/tau)
//
// (the positive also appears in the partition sum). Every gradient below is
// the true derivative of that expression; each lives in the tangent space of
// the point it updates and carries an inverse factor of that point's norm.

namespace normlab {

struct LossConfig {
  double temperature = 1.0;
};

struct PairGradient {
  Eigen::VectorXd grad_i;
  Eigen::VectorXd grad_j;
  // |grad_i| in closed form: sin(angle) / (tau * |z_i|).
  double magnitude_i = 0.0;
};

// Per-point gradients for one or more anchors over a shared batch.
// `gradients` has one column per batch point; `partition_sums` holds S_i for
// each anchor in the order the anchors were given.
struct BatchGradients {
  Eigen::MatrixXd gradients;
  Eigen::VectorXd partition_sums;
};

// Mini-batch reduction used by the network trainer: loss and gradients are
// averaged over the anchors.
struct MiniBatchGradients {
  Eigen::MatrixXd gradients;
  Eigen::VectorXd partition_sums;
  double mean_loss = 0.0;
};

double exp_sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
               const LossConfig& cfg);

// `points` holds one embedding per column.
double infonce_loss(const Eigen::MatrixXd& points, int anchor, int positive,
                    const LossConfig& cfg);

// Gradient of the attraction term -cos(z_i, z_j)/tau alone.
PairGradient attractive_gradient(const Eigen::VectorXd& z_i,
                                 const Eigen::VectorXd& z_j,
                                 const LossConfig& cfg);

BatchGradients infonce_gradients(const Eigen::MatrixXd& points, int anchor,
                                 int positive, const LossConfig& cfg);

MiniBatchGradients infonce_batch_gradients(
    const Eigen::MatrixXd& points,
    const std::vector<std::pair<int, int>>& anchor_positive,
    const LossConfig& cfg);

// Backward hook of the norm-rescaling layer: multiplies an upstream gradient
// by |z|^power, treating the norm as a constant. power = 1 cancels the
// inverse-norm factor of the closed-form gradients, power = 0 is the
// identity.
Eigen::VectorXd grad_scale(const Eigen::VectorXd& grad, const Eigen::VectorXd& z,
                           double power);

// Line integral of the field |z|^alpha * grad(t.z/|z|) around a fixed closed
// loop (out along the t ray from t to 2t, half great circle at radius 2 to
// -2t, back in to -t, half great circle at radius 1 to t). The radial legs
// contribute nothing; the circles give magnitude 2^(alpha+1) - 2, so a
// nonzero alpha certifies that the scaled field admits no potential.
// Great-circle legs are parameterized by angle with uniform midpoint steps.
double potential_loop_integral(double alpha, int steps_per_segment);

}  // namespace normlab
