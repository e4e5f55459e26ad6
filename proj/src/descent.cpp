#include "normlab/descent.hpp"

#include <cmath>

#include "normlab/rng.hpp"

namespace normlab {

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::converged: return "converged";
    case Outcome::collapsed: return "collapsed";
    case Outcome::exhausted: return "exhausted";
  }
  return "unknown";
}

EmbeddingSet init_pairs(const PairInitSpec& spec) {
  Rng rng(spec.seed);
  const int d = spec.dimension;
  const int n = spec.num_pairs;
  const double rho = spec.target_norm;
  const double alpha = spec.angle_alpha;

  EmbeddingSet set;
  set.a.resize(d, n);
  set.b.resize(d, n);
  for (int i = 0; i < n; ++i) set.a.col(i) = normalize(normal_vector(rng, d));
  for (int i = 0; i < n; ++i) set.b.col(i) = normalize(normal_vector(rng, d));

  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd steered =
        set.b.col(i) * (1.0 - std::abs(alpha)) + set.a.col(i) * alpha;
    set.b.col(i) = rho * normalize(steered);
    set.a.col(i) *= rho;
  }
  return set;
}

namespace {

// Attraction gradients only: each point is pulled toward its partner.
void attraction_gradients(const EmbeddingSet& set, const LossConfig& loss,
                          Eigen::MatrixXd& ga, Eigen::MatrixXd& gb) {
  const int n = static_cast<int>(set.a.cols());
  for (int i = 0; i < n; ++i) {
    const PairGradient g =
        attractive_gradient(set.a.col(i), set.b.col(i), loss);
    ga.col(i) = g.grad_i;
    gb.col(i) = g.grad_j;
  }
}

// Full InfoNCE: every point of one set anchors a loss whose partition sum
// runs over its own set plus its positive partner. Gradients from all 2n
// anchor losses accumulate before the simultaneous update.
void infonce_gradients_sets(const EmbeddingSet& set, const LossConfig& loss,
                            Eigen::MatrixXd& ga, Eigen::MatrixXd& gb) {
  const int n = static_cast<int>(set.a.cols());
  const Eigen::Index d = set.a.rows();
  Eigen::MatrixXd batch(d, n + 1);

  const auto side = [&](const Eigen::MatrixXd& anchors,
                        const Eigen::MatrixXd& partners,
                        Eigen::MatrixXd& g_anchors, Eigen::MatrixXd& g_partners) {
    for (int i = 0; i < n; ++i) {
      batch.leftCols(n) = anchors;
      batch.col(n) = partners.col(i);
      const BatchGradients g = infonce_gradients(batch, i, n, loss);
      g_anchors += g.gradients.leftCols(n);
      g_partners.col(i) += g.gradients.col(n);
    }
  };
  side(set.a, set.b, ga, gb);
  side(set.b, set.a, gb, ga);
}

double mean_pair_cosine(const EmbeddingSet& set) {
  const int n = static_cast<int>(set.a.cols());
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    acc += cosine_similarity(set.a.col(i), set.b.col(i));
  return acc / n;
}

double mean_norm(const EmbeddingSet& set) {
  const int n = static_cast<int>(set.a.cols());
  return (set.a.colwise().norm().sum() + set.b.colwise().norm().sum()) /
         (2.0 * n);
}

}  // namespace

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> compute_gradients(
    const EmbeddingSet& set, const DescentConfig& cfg) {
  const LossConfig loss{cfg.temperature};
  Eigen::MatrixXd ga = Eigen::MatrixXd::Zero(set.a.rows(), set.a.cols());
  Eigen::MatrixXd gb = Eigen::MatrixXd::Zero(set.b.rows(), set.b.cols());
  if (cfg.mode == DescentMode::attraction_only)
    attraction_gradients(set, loss, ga, gb);
  else
    infonce_gradients_sets(set, loss, ga, gb);
  return {std::move(ga), std::move(gb)};
}

void descent_step(EmbeddingSet& set, const DescentConfig& cfg) {
  auto [ga, gb] = compute_gradients(set, cfg);

  const auto apply = [&](Eigen::MatrixXd& pts, const Eigen::MatrixXd& grads) {
    for (int i = 0; i < pts.cols(); ++i) {
      Eigen::VectorXd g = grads.col(i);
      if (cfg.gradscale_p != 0.0)
        g = grad_scale(g, pts.col(i), cfg.gradscale_p);
      pts.col(i) -= cfg.learning_rate * g;
    }
  };
  apply(set.a, ga);
  apply(set.b, gb);

  if (cfg.weight_decay > 0.0) {
    const double factor = 1.0 - 2.0 * cfg.learning_rate * cfg.weight_decay;
    if (factor <= 0.0) throw CollapseDetected{};
    set.a *= factor;
    set.b *= factor;
  }

  if (set.a.colwise().norm().minCoeff() < cfg.collapse_threshold ||
      set.b.colwise().norm().minCoeff() < cfg.collapse_threshold)
    throw CollapseDetected{};
}

ConvergenceResult run_to_convergence(const PairInitSpec& spec,
                                     const DescentConfig& cfg) {
  EmbeddingSet set = init_pairs(spec);
  ConvergenceResult res;
  res.norm_trace.reserve(64);
  res.norm_trace.emplace_back(0, mean_norm(set));

  for (int step = 0;; ++step) {
    const double mc = mean_pair_cosine(set);
    res.final_mean_cos = mc;
    res.steps = step;
    if (!std::isfinite(mc)) {
      res.outcome = Outcome::collapsed;
      return res;
    }
    if (mc >= cfg.converge_threshold) {
      res.outcome = Outcome::converged;
      return res;
    }
    if (res.norm_trace.back().second < cfg.collapse_threshold) {
      res.outcome = Outcome::collapsed;
      return res;
    }
    if (step == cfg.max_steps) {
      res.outcome = Outcome::exhausted;
      return res;
    }
    try {
      descent_step(set, cfg);
    } catch (const CollapseDetected&) {
      res.outcome = Outcome::collapsed;
      res.steps = step + 1;
      return res;
    }
    res.norm_trace.emplace_back(step + 1, mean_norm(set));
  }
}

StepBound cosine_step_bound_check(const Eigen::VectorXd& z_i,
                                  const Eigen::VectorXd& z_j, double gamma) {
  const double ni = checked_norm(z_i);
  const double nj = checked_norm(z_j);
  if (std::abs(ni - nj) > 1e-9 * std::max(ni, nj)) throw UnequalNorms{};
  const double rho = ni;

  const double cos0 = cosine_similarity(z_i, z_j);
  const Eigen::VectorXd zi_next =
      z_i + (gamma / rho) * tangent_project(normalize(z_j), z_i);
  const Eigen::VectorXd zj_next =
      z_j + (gamma / rho) * tangent_project(normalize(z_i), z_j);

  StepBound out;
  out.delta_cos = cosine_similarity(zi_next, zj_next) - cos0;
  const double sin2 = 1.0 - cos0 * cos0;
  out.bound = 2.0 * gamma * sin2 / (rho * rho);
  return out;
}

double opposite_halves_rate(const EmbeddingSet& set) {
  const int n = static_cast<int>(set.a.cols());
  if (n == 0) throw std::invalid_argument("empty embedding set");
  int count = 0;
  for (int i = 0; i < n; ++i)
    if (cosine_similarity(set.a.col(i), set.b.col(i)) < 0.0) ++count;
  return static_cast<double>(count) / n;
}

double chebyshev_opposite_bound(int d, double eps) {
  if (d < 1) throw std::invalid_argument("dimension must be positive");
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidEpsilon{};
  const double m = 1.0 - eps;
  return 1.0 / (2.0 * d * m * m);
}

}  // namespace normlab
