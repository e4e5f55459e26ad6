#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "normlab/ssl_grads.hpp"

// Nonparametric descent on the embeddings themselves: two index-aligned point
// sets where b.col(i) is the positive partner of a.col(i). Because every
// closed-form gradient is tangent to its point, plain gradient steps can only
// grow norms; shrinking them requires the explicit weight-decay term.

namespace normlab {

class CollapseDetected : public std::runtime_error {
 public:
  CollapseDetected() : std::runtime_error("embedding norms collapsed") {}
};

class UnequalNorms : public std::runtime_error {
 public:
  UnequalNorms() : std::runtime_error("pair norms differ beyond tolerance") {}
};

class InvalidEpsilon : public std::runtime_error {
 public:
  InvalidEpsilon() : std::runtime_error("epsilon must lie in (0, 1)") {}
};

struct EmbeddingSet {
  Eigen::MatrixXd a;  // one point per column
  Eigen::MatrixXd b;  // b.col(i) is the positive of a.col(i)
};

struct PairInitSpec {
  int dimension = 20;
  int num_pairs = 500;
  double target_norm = 1.0;
  // Interpolation weight in [-1, 1] steering the pair angle: 1 collapses the
  // pair onto the same direction, -1 makes it antipodal, 0 leaves the second
  // point independent.
  double angle_alpha = 0.0;
  std::uint64_t seed = 0;
};

enum class DescentMode { attraction_only, infonce };

struct DescentConfig {
  double learning_rate = 0.1;
  double weight_decay = 0.0;   // decoupled multiplicative shrink, see step
  double gradscale_p = 0.0;    // gradient hook exponent, 0 disables
  double temperature = 1.0;
  int max_steps = 100000;
  double converge_threshold = 0.999;  // on the mean pair cosine
  double collapse_threshold = 1e-2;   // on norms
  DescentMode mode = DescentMode::attraction_only;
};

enum class Outcome { converged, collapsed, exhausted };

const char* outcome_name(Outcome o);

struct ConvergenceResult {
  Outcome outcome = Outcome::exhausted;
  int steps = 0;
  double final_mean_cos = 0.0;
  // (step, mean norm) for every step incl. the initial state.
  std::vector<std::pair<int, double>> norm_trace;
};

// Both sets drawn standard normal and pushed onto the sphere; the second set
// is then steered toward (or away from) the first by angle_alpha and every
// point is rescaled to norm target_norm exactly, so norm and angle vary
// independently.
EmbeddingSet init_pairs(const PairInitSpec& spec);

// Loss gradients for every point under the configured mode, before learning
// rate, gradient scaling or weight decay. Exposed for the tangency tests.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> compute_gradients(
    const EmbeddingSet& set, const DescentConfig& cfg);

// One simultaneous update: z <- z - lr * |z|^p * grad for every point, then,
// if weight_decay > 0, the decoupled shrink z <- (1 - 2 lr wd) z. Throws
// CollapseDetected when the shrink factor is not positive or any point drops
// below collapse_threshold.
void descent_step(EmbeddingSet& set, const DescentConfig& cfg);

ConvergenceResult run_to_convergence(const PairInitSpec& spec,
                                     const DescentConfig& cfg);

struct StepBound {
  double delta_cos = 0.0;
  double bound = 0.0;
};

// Symmetric attraction step on an equal-norm pair (each point moves by
// gamma/rho times the tangent component of the other's direction), returning
// the realized cosine change next to the quadratic-slowdown bound
// 2 gamma sin^2(phi) / rho^2. Norms must match to 1e-9 relative.
StepBound cosine_step_bound_check(const Eigen::VectorXd& z_i,
                                  const Eigen::VectorXd& z_j, double gamma);

// Fraction of pairs with angle strictly greater than pi/2.
double opposite_halves_rate(const EmbeddingSet& set);

// Tail bound for the cosine of two random Gaussian directions in dimension d:
// P[cos >= 1 - eps] <= 1 / (2 d (1 - eps)^2).
double chebyshev_opposite_bound(int d, double eps);

}  // namespace normlab
