#include "normlab/ssl_grads.hpp"

#include <cmath>
#include <stdexcept>

namespace normlab {

namespace {

void check_index(const Eigen::MatrixXd& points, int anchor, int positive) {
  const int n = static_cast<int>(points.cols());
  if (anchor < 0 || anchor >= n || positive < 0 || positive >= n)
    throw std::out_of_range("batch index out of range");
}

}  // namespace

double exp_sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
               const LossConfig& cfg) {
  return std::exp(cosine_similarity(a, b) / cfg.temperature);
}

double infonce_loss(const Eigen::MatrixXd& points, int anchor, int positive,
                    const LossConfig& cfg) {
  check_index(points, anchor, positive);
  const double tau = cfg.temperature;
  const Eigen::VectorXd zi_hat = normalize(points.col(anchor));
  double partition = 0.0;
  for (int k = 0; k < points.cols(); ++k) {
    if (k == anchor) continue;
    partition += std::exp(zi_hat.dot(normalize(points.col(k))) / tau);
  }
  const double cos_pos = zi_hat.dot(normalize(points.col(positive)));
  return -cos_pos / tau + std::log(partition);
}

PairGradient attractive_gradient(const Eigen::VectorXd& z_i,
                                 const Eigen::VectorXd& z_j,
                                 const LossConfig& cfg) {
  const double tau = cfg.temperature;
  const double ni = checked_norm(z_i);
  const double nj = checked_norm(z_j);
  PairGradient out;
  out.grad_i = -tangent_project((z_j / nj).eval(), z_i) / (tau * ni);
  out.grad_j = -tangent_project((z_i / ni).eval(), z_j) / (tau * nj);
  out.magnitude_i = std::sin(angle_between(z_i, z_j).radians) / (tau * ni);
  return out;
}

// One anchor, gradients for every point in the batch. The anchor receives
//   -(1/(tau |z_i|)) (zhat_j)_perp + (1/(tau |z_i|)) sum_k w_k (zhat_k)_perp
// with softmax weights w_k = ExpSim(z_i, z_k)/S_i, and every other point l
// receives (w_l - [l == positive]) / (tau |z_l|) * (zhat_i)_perp_l. The signs
// follow from differentiating the loss directly; finite differences agree
// (see the oracle tests).
BatchGradients infonce_gradients(const Eigen::MatrixXd& points, int anchor,
                                 int positive, const LossConfig& cfg) {
  check_index(points, anchor, positive);
  const double tau = cfg.temperature;
  const int n = static_cast<int>(points.cols());
  const Eigen::Index d = points.rows();

  Eigen::MatrixXd unit(d, n);
  Eigen::VectorXd norms(n);
  for (int k = 0; k < n; ++k) {
    norms[k] = checked_norm(points.col(k));
    unit.col(k) = points.col(k) / norms[k];
  }

  Eigen::VectorXd weights(n);
  double partition = 0.0;
  for (int k = 0; k < n; ++k) {
    if (k == anchor) {
      weights[k] = 0.0;
      continue;
    }
    weights[k] = std::exp(unit.col(anchor).dot(unit.col(k)) / tau);
    partition += weights[k];
  }
  weights /= partition;

  BatchGradients out;
  out.gradients = Eigen::MatrixXd::Zero(d, n);
  out.partition_sums = Eigen::VectorXd::Constant(1, partition);

  // Anchor: projection is linear, so project the combined direction once.
  Eigen::VectorXd combined = Eigen::VectorXd::Zero(d);
  for (int k = 0; k < n; ++k) {
    if (k == anchor) continue;
    combined += weights[k] * unit.col(k);
  }
  combined -= unit.col(positive);
  out.gradients.col(anchor) =
      tangent_project(combined, points.col(anchor)) / (tau * norms[anchor]);

  for (int l = 0; l < n; ++l) {
    if (l == anchor) continue;
    const double coeff = weights[l] - (l == positive ? 1.0 : 0.0);
    out.gradients.col(l) = (coeff / (tau * norms[l])) *
                           tangent_project(unit.col(anchor), points.col(l));
  }
  return out;
}

MiniBatchGradients infonce_batch_gradients(
    const Eigen::MatrixXd& points,
    const std::vector<std::pair<int, int>>& anchor_positive,
    const LossConfig& cfg) {
  if (anchor_positive.empty()) throw std::invalid_argument("no anchors");
  const double tau = cfg.temperature;
  const int n = static_cast<int>(points.cols());
  const Eigen::Index d = points.rows();

  Eigen::MatrixXd unit(d, n);
  Eigen::VectorXd norms(n);
  for (int k = 0; k < n; ++k) {
    norms[k] = checked_norm(points.col(k));
    unit.col(k) = points.col(k) / norms[k];
  }
  // All pairwise cosines at once; n stays small (a couple hundred).
  const Eigen::MatrixXd cos = unit.transpose() * unit;

  MiniBatchGradients out;
  out.gradients = Eigen::MatrixXd::Zero(d, n);
  out.partition_sums.resize(static_cast<Eigen::Index>(anchor_positive.size()));
  double loss_sum = 0.0;

  // Accumulate tangent-space coefficients per point first, then do a single
  // projection pass. grad_l = (1/(tau |z_l|)) * (coef_l)_perp_l where coef_l
  // collects contributions from every anchor loss the point participates in.
  Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(d, n);
  int a_idx = 0;
  for (const auto& [anchor, positive] : anchor_positive) {
    if (anchor < 0 || anchor >= n || positive < 0 || positive >= n)
      throw std::out_of_range("batch index out of range");
    Eigen::VectorXd w(n);
    double partition = 0.0;
    for (int k = 0; k < n; ++k) {
      if (k == anchor) {
        w[k] = 0.0;
        continue;
      }
      w[k] = std::exp(cos(anchor, k) / tau);
      partition += w[k];
    }
    w /= partition;
    out.partition_sums[a_idx++] = partition;
    loss_sum += -cos(anchor, positive) / tau + std::log(partition);

    for (int k = 0; k < n; ++k) {
      if (k == anchor) continue;
      coef.col(anchor) += w[k] * unit.col(k);
      coef.col(k) += w[k] * unit.col(anchor);
    }
    coef.col(anchor) -= unit.col(positive);
    coef.col(positive) -= unit.col(anchor);
  }

  const double inv_anchors = 1.0 / static_cast<double>(anchor_positive.size());
  for (int l = 0; l < n; ++l) {
    out.gradients.col(l) = tangent_project(coef.col(l), points.col(l)) *
                           (inv_anchors / (tau * norms[l]));
  }
  out.mean_loss = loss_sum * inv_anchors;
  return out;
}

Eigen::VectorXd grad_scale(const Eigen::VectorXd& grad, const Eigen::VectorXd& z,
                           double power) {
  if (power == 0.0) return grad;
  return grad * std::pow(checked_norm(z), power);
}

double potential_loop_integral(double alpha, int steps_per_segment) {
  if (steps_per_segment < 1) throw std::invalid_argument("steps_per_segment < 1");
  const int n = steps_per_segment;

  // Work in 3 dimensions with t = e0 and the circle plane spanned by e0, e1.
  const Eigen::Vector3d t(1.0, 0.0, 0.0);
  const Eigen::Vector3d u(0.0, 1.0, 0.0);

  const auto field = [&](const Eigen::Vector3d& z) -> Eigen::Vector3d {
    const double nz = z.norm();
    const Eigen::Vector3d zh = z / nz;
    const Eigen::Vector3d grad_p = (t - t.dot(zh) * zh) / nz;
    return std::pow(nz, alpha) * grad_p;
  };

  double total = 0.0;

  // Radial legs: t -> 2t and -2t -> -t. The field vanishes on the t line but
  // they are integrated like any other segment.
  const auto radial = [&](double from, double to) {
    const double h = (to - from) / n;
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      const double s = from + (k + 0.5) * h;
      acc += field(s * t).dot(t) * h;
    }
    return acc;
  };

  // Half great circle of radius r in the (t, u) plane, angle running from
  // theta0 to theta1, midpoint rule on the exact tangent.
  const auto arc = [&](double r, double theta0, double theta1) {
    const double h = (theta1 - theta0) / n;
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      const double th = theta0 + (k + 0.5) * h;
      const Eigen::Vector3d z = r * (std::cos(th) * t + std::sin(th) * u);
      const Eigen::Vector3d dz = r * (-std::sin(th) * t + std::cos(th) * u);
      acc += field(z).dot(dz) * h;
    }
    return acc;
  };

  constexpr double kPi = 3.14159265358979323846;
  total += radial(1.0, 2.0);          // t -> 2t
  total += arc(2.0, 0.0, kPi);        // 2t -> -2t
  total += radial(-2.0, -1.0);        // -2t -> -t
  total += arc(1.0, kPi, 2.0 * kPi);  // -t -> t, closing the loop
  return total;
}

}  // namespace normlab
