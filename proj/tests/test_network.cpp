#include "normlab/network.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "normlab/geometry.hpp"
#include "normlab/rng.hpp"
#include "oracles.hpp"

using namespace normlab;

namespace {

LatentDataset tiny_dataset(int samples, std::uint64_t seed) {
  LatentSpec spec;
  spec.latent_dim = 4;
  spec.num_classes = 3;
  spec.samples = samples;
  spec.obs_dim = 12;
  spec.seed = seed;
  return generate(spec);
}

// Mean batch loss as a plain function of the parameters, with the decay term
// included so finite differences validate the full backward pass.
double loss_of(const MlpParams& p, const Eigen::MatrixXd& x,
               const std::vector<std::pair<int, int>>& pairs,
               const TrainConfig& cfg) {
  const Eigen::MatrixXd z = forward(p, x);
  double acc = 0.0;
  for (const auto& [a, b] : pairs)
    acc += oracle::infonce_direct(z.transpose(), a, b, cfg.temperature);
  acc /= static_cast<double>(pairs.size());
  if (cfg.weight_decay != 0.0)
    acc += cfg.weight_decay *
           (p.w1.squaredNorm() + p.b1.squaredNorm() + p.w2.squaredNorm() +
            p.b2.squaredNorm());
  return acc;
}

// `target` must reference one of the members of `p` so the perturbation is
// visible to the loss evaluation.
template <typename Mat>
Mat numeric_grad(MlpParams& p, Mat& target, const Eigen::MatrixXd& x,
                 const std::vector<std::pair<int, int>>& pairs,
                 const TrainConfig& cfg) {
  const double h = 1e-5;
  Mat g(target.rows(), target.cols());
  for (Eigen::Index r = 0; r < target.rows(); ++r) {
    for (Eigen::Index c = 0; c < target.cols(); ++c) {
      const double keep = target(r, c);
      target(r, c) = keep + h;
      const double up = loss_of(p, x, pairs, cfg);
      target(r, c) = keep - h;
      const double dn = loss_of(p, x, pairs, cfg);
      target(r, c) = keep;
      g(r, c) = (up - dn) / (2.0 * h);
    }
  }
  return g;
}

double stacked_rel_err(const MlpGradients& a, const MlpGradients& b) {
  const auto stack = [](const MlpGradients& g) {
    Eigen::VectorXd v(g.w1.size() + g.b1.size() + g.w2.size() + g.b2.size());
    Eigen::Index at = 0;
    const auto put = [&](const Eigen::MatrixXd& m) {
      v.segment(at, m.size()) =
          Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
      at += m.size();
    };
    put(g.w1);
    put(g.b1);
    put(g.w2);
    put(g.b2);
    return v;
  };
  return oracle::rel_err(stack(a), stack(b));
}

}  // namespace

TEST_CASE("init_params shapes, scale and cut constant") {
  const MlpParams p = init_params(6, 8, 4, 1.0, 3);
  CHECK(p.w1.rows() == 6);
  CHECK(p.w1.cols() == 8);
  CHECK(p.b1.size() == 8);
  CHECK(p.w2.rows() == 8);
  CHECK(p.w2.cols() == 4);
  CHECK(p.b2.size() == 4);
  CHECK(p.b1.cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.b2.cwiseAbs().maxCoeff() == 0.0);

  SUBCASE("cut constant 2 halves every weight exactly") {
    const MlpParams p2 = init_params(6, 8, 4, 2.0, 3);
    CHECK(p2.w1 == (p.w1 / 2.0).eval());
    CHECK(p2.w2 == (p.w2 / 2.0).eval());
  }
  SUBCASE("invalid arguments") {
    CHECK_THROWS_AS(init_params(0, 8, 4, 1.0, 3), ShapeMismatch);
    CHECK_THROWS_AS(init_params(6, 8, 4, 0.0, 3), std::invalid_argument);
  }
}

TEST_CASE("cut constant shrinks initial embeddings but keeps directions") {
  Rng rng(61);
  const Eigen::MatrixXd x = normal_matrix(rng, 12, 5).transpose();  // 5 x 12
  const Eigen::MatrixXd z1 = forward(init_params(12, 16, 6, 1.0, 7), x);

  double prev_norm = z1.rowwise().norm().mean();
  for (double c : {2.0, 4.0, 8.0}) {
    const Eigen::MatrixXd zc = forward(init_params(12, 16, 6, c, 7), x);
    // zero biases make the net positively homogeneous: cutting by a power of
    // two rescales outputs by exactly 1/c^2
    CHECK(zc == (z1 / (c * c)).eval());
    const double norm = zc.rowwise().norm().mean();
    CHECK(norm < prev_norm);
    prev_norm = norm;
    for (int r = 0; r < 5; ++r)
      CHECK(cosine_similarity(zc.row(r).transpose(), z1.row(r).transpose()) ==
            doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("forward hand case with an active and a clipped unit") {
  MlpParams p;
  p.w1.resize(2, 2);
  p.w1 << 1.0, -1.0, 1.0, 1.0;
  p.b1 = Eigen::Vector2d(0.5, -0.5);
  p.w2.resize(2, 1);
  p.w2 << 2.0, -1.0;
  p.b2 = Eigen::VectorXd::Constant(1, 1.0);

  Eigen::MatrixXd x(2, 2);
  x.row(0) = Eigen::RowVector2d(1.0, 2.0);   // pre = (3.5, 0.5), both active
  x.row(1) = Eigen::RowVector2d(-1.0, 0.0);  // pre = (-0.5, 0.5), first clipped
  const Eigen::MatrixXd z = forward(p, x);
  CHECK(z(0, 0) == doctest::Approx(7.5).epsilon(1e-14));
  CHECK(z(1, 0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("forward of zero parameters is zero and shapes are enforced") {
  MlpParams p;
  p.w1 = Eigen::MatrixXd::Zero(3, 4);
  p.b1 = Eigen::VectorXd::Zero(4);
  p.w2 = Eigen::MatrixXd::Zero(4, 2);
  p.b2 = Eigen::VectorXd::Zero(2);
  Rng rng(62);
  const Eigen::MatrixXd x = normal_matrix(rng, 3, 6).transpose();
  CHECK(forward(p, x).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::MatrixXd bad = normal_matrix(rng, 4, 2).transpose();
  CHECK_THROWS_AS(forward(p, bad), ShapeMismatch);
}

TEST_CASE("forward treats rows independently") {
  Rng rng(63);
  const MlpParams p = init_params(5, 7, 3, 1.0, 64);
  const Eigen::MatrixXd x = normal_matrix(rng, 5, 4).transpose();
  const Eigen::MatrixXd z = forward(p, x);
  for (int r = 0; r < 4; ++r) {
    const Eigen::MatrixXd single = forward(p, x.row(r));
    CHECK((single - z.row(r)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("backward matches finite differences") {
  Rng rng(64);
  for (int t = 0; t < 12; ++t) {
    const MlpParams p = init_params(3, 4, 3, 1.0, 100 + t);
    // A row with every hidden unit clipped embeds to zero (undefined cosine)
    // and a preactivation on the ReLU kink breaks central differences, so
    // redraw inputs until the config is clear of both.
    Eigen::MatrixXd x;
    while (true) {
      x = normal_matrix(rng, 3, 6).transpose();
      const Eigen::MatrixXd pre = (x * p.w1).rowwise() + p.b1.transpose();
      if (pre.cwiseAbs().minCoeff() < 1e-3) continue;
      if (forward(p, x).rowwise().norm().minCoeff() < 1e-2) continue;
      break;
    }
    const std::vector<std::pair<int, int>> pairs = {{0, 3}, {1, 4}, {2, 5}};
    TrainConfig cfg;
    cfg.temperature = (t % 2 == 0) ? 1.0 : 0.5;
    cfg.weight_decay = (t % 3 == 0) ? 0.3 : 0.0;

    const MlpGradients g = backward(p, x, pairs, cfg);
    MlpParams q = p;
    MlpGradients num;
    num.w1 = numeric_grad(q, q.w1, x, pairs, cfg);
    num.b1 = numeric_grad(q, q.b1, x, pairs, cfg);
    num.w2 = numeric_grad(q, q.w2, x, pairs, cfg);
    num.b2 = numeric_grad(q, q.b2, x, pairs, cfg);
    CHECK(stacked_rel_err(g, num) <= 1e-4);
  }
}

TEST_CASE("weight decay adds exactly 2 lambda param") {
  Rng rng(65);
  const MlpParams p = init_params(4, 5, 3, 1.0, 66);
  const Eigen::MatrixXd x = normal_matrix(rng, 4, 4).transpose();
  const std::vector<std::pair<int, int>> pairs = {{0, 2}, {1, 3}};
  TrainConfig base;
  TrainConfig decayed = base;
  decayed.weight_decay = 0.3;
  const MlpGradients g0 = backward(p, x, pairs, base);
  const MlpGradients g1 = backward(p, x, pairs, decayed);
  CHECK(g1.w1 == (g0.w1 + 0.6 * p.w1).eval());
  CHECK(g1.b1 == (g0.b1 + 0.6 * p.b1).eval());
  CHECK(g1.w2 == (g0.w2 + 0.6 * p.w2).eval());
  CHECK(g1.b2 == (g0.b2 + 0.6 * p.b2).eval());
}

TEST_CASE("a single pair carries no data gradient, only decay") {
  // with one anchor and its positive as the lone negative, the loss is
  // identically zero, so the parameter gradient is pure decay
  Rng rng(66);
  const MlpParams p = init_params(4, 6, 3, 1.0, 67);
  const Eigen::MatrixXd x = normal_matrix(rng, 4, 2).transpose();
  TrainConfig cfg;
  cfg.weight_decay = 0.25;
  double loss = 1.0;
  const MlpGradients g = backward(p, x, {{0, 1}}, cfg, &loss);
  CHECK(std::abs(loss) <= 1e-14);
  CHECK(g.w1 == (0.5 * p.w1).eval());
  CHECK(g.b1 == (0.5 * p.b1).eval());
  CHECK(g.w2 == (0.5 * p.w2).eval());
  CHECK(g.b2 == (0.5 * p.b2).eval());
}

TEST_CASE("backward reports pair statistics") {
  Rng rng(67);
  const MlpParams p = init_params(4, 6, 3, 1.0, 68);
  const Eigen::MatrixXd x = normal_matrix(rng, 4, 6).transpose();
  const std::vector<std::pair<int, int>> pairs = {{0, 3}, {1, 4}, {2, 5}};
  BatchPairStats stats{};
  backward(p, x, pairs, {}, nullptr, &stats);

  const Eigen::MatrixXd z = forward(p, x);
  double acc = 0.0;
  int opp = 0;
  for (const auto& [a, b] : pairs) {
    const double c = cosine_similarity(z.row(a).transpose(), z.row(b).transpose());
    acc += c;
    if (c < 0.0) ++opp;
  }
  CHECK(stats.mean_cos == doctest::Approx(acc / 3.0).epsilon(1e-12));
  CHECK(stats.opposite_rate == doctest::Approx(opp / 3.0).epsilon(1e-12));
}

TEST_CASE("gradient hook exponent changes the parameter gradients") {
  Rng rng(68);
  const MlpParams p = init_params(5, 6, 4, 4.0, 69);  // small outputs, norms != 1
  const Eigen::MatrixXd x = normal_matrix(rng, 5, 4).transpose();
  const std::vector<std::pair<int, int>> pairs = {{0, 2}, {1, 3}};
  TrainConfig plain;
  TrainConfig hooked;
  hooked.gradscale_p = 1.0;
  const MlpGradients g0 = backward(p, x, pairs, plain);
  const MlpGradients g1 = backward(p, x, pairs, hooked);
  CHECK((g0.w1 - g1.w1).cwiseAbs().maxCoeff() > 0.0);
  CHECK((g0.w2 - g1.w2).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("training with zero learning rate leaves parameters at init") {
  const LatentDataset ds = tiny_dataset(90, 70);
  TrainConfig cfg;
  cfg.hidden_dim = 8;
  cfg.batch_size = 30;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  cfg.seed = 71;
  const TrainResult res = train(ds, cfg);

  const MlpParams ref = init_params(
      static_cast<int>(ds.observations.cols()), cfg.hidden_dim,
      static_cast<int>(ds.latents.cols()), cfg.cut_constant, child_seed(71, 0));
  CHECK(res.params.w1 == ref.w1);
  CHECK(res.params.b1 == ref.b1);
  CHECK(res.params.w2 == ref.w2);
  CHECK(res.params.b2 == ref.b2);

  REQUIRE(res.trace.size() == 3);
  for (const EpochTrace& t : res.trace) {
    // parameters never move, so the full-dataset statistics are frozen
    CHECK(t.mean_embedding_norm == res.trace[0].mean_embedding_norm);
    CHECK(t.per_class_mean_norm == res.trace[0].per_class_mean_norm);
    CHECK(t.per_class_mean_norm.size() == 3);
    CHECK(t.pair_opposite_rate >= 0.0);
    CHECK(t.pair_opposite_rate <= 1.0);
  }
  CHECK(res.trace[0].epoch == 0);
  CHECK(res.trace[2].epoch == 2);
}

TEST_CASE("training reduces the loss") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const LatentDataset ds = tiny_dataset(240, 72 + seed);
    TrainConfig cfg;
    cfg.hidden_dim = 32;
    cfg.batch_size = 40;
    cfg.epochs = 8;
    cfg.learning_rate = 0.1;
    cfg.seed = seed;
    const TrainResult res = train(ds, cfg);
    REQUIRE(res.trace.size() == 8);
    CHECK(res.trace.back().mean_loss < res.trace.front().mean_loss);
    CHECK(std::isfinite(res.trace.back().mean_loss));
  }
}

TEST_CASE("training is reproducible per seed") {
  const LatentDataset ds = tiny_dataset(90, 74);
  TrainConfig cfg;
  cfg.hidden_dim = 8;
  cfg.batch_size = 30;
  cfg.epochs = 2;
  cfg.seed = 75;
  const TrainResult r1 = train(ds, cfg);
  const TrainResult r2 = train(ds, cfg);
  CHECK(r1.params.w1 == r2.params.w1);
  CHECK(r1.params.w2 == r2.params.w2);
  REQUIRE(r1.trace.size() == r2.trace.size());
  for (size_t k = 0; k < r1.trace.size(); ++k) {
    CHECK(r1.trace[k].mean_loss == r2.trace[k].mean_loss);
    CHECK(r1.trace[k].mean_embedding_norm == r2.trace[k].mean_embedding_norm);
  }
}

TEST_CASE("runaway weight decay collapses and reports partial progress") {
  const LatentDataset ds = tiny_dataset(120, 76);
  TrainConfig cfg;
  cfg.hidden_dim = 8;
  cfg.batch_size = 30;
  cfg.epochs = 10;
  cfg.learning_rate = 1.0;
  cfg.weight_decay = 0.49;  // per-batch shrink factor 1 - 2 lr wd = 0.02
  // an enormous temperature flattens the loss so the decay term dominates;
  // at moderate temperatures the inverse-norm gradient growth fights the
  // decay and the norms stabilize well above the collapse threshold
  cfg.temperature = 1e9;
  cfg.seed = 77;
  std::vector<EpochTrace> sink;
  CHECK_THROWS_AS(train(ds, cfg, &sink), TrainingCollapse);
  REQUIRE(!sink.empty());
  CHECK(sink.back().mean_embedding_norm < 1e-6);
}

TEST_CASE("checkpoints round-trip bitwise") {
  const MlpParams p = init_params(5, 7, 4, 3.0, 78);
  const auto path =
      std::filesystem::temp_directory_path() / "normlab_ckpt_test.txt";
  save_checkpoint(path, p);
  const MlpParams q = load_checkpoint(path);
  CHECK(p.w1 == q.w1);
  CHECK(p.b1 == q.b1);
  CHECK(p.w2 == q.w2);
  CHECK(p.b2 == q.b2);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects damaged files") {
  const auto dir = std::filesystem::temp_directory_path();
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(dir / "normlab_ckpt_missing.txt"),
                    std::runtime_error);
  }
  SUBCASE("garbage header") {
    const auto path = dir / "normlab_ckpt_garbage.txt";
    std::ofstream(path) << "definitely not a checkpoint\n";
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    std::filesystem::remove(path);
  }
  SUBCASE("inconsistent shapes") {
    const auto path = dir / "normlab_ckpt_shapes.txt";
    std::ofstream(path) << "w1 1 2\n0,0\n"
                        << "b1 2 1\n0\n0\n"
                        << "w2 3 1\n0\n0\n0\n"
                        << "b2 1 1\n0\n";
    CHECK_THROWS_AS(load_checkpoint(path), ShapeMismatch);
    std::filesystem::remove(path);
  }
}
