#include "normlab/network.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "normlab/csv.hpp"
#include "normlab/geometry.hpp"

namespace normlab {

MlpParams init_params(int obs_dim, int hidden_dim, int out_dim,
                      double cut_constant, std::uint64_t seed) {
  if (obs_dim < 1 || hidden_dim < 1 || out_dim < 1)
    throw ShapeMismatch("non-positive layer width");
  if (!(cut_constant > 0.0))
    throw std::invalid_argument("cut constant must be positive");

  Rng rng(seed);
  MlpParams p;
  p.w1 = normal_matrix(rng, obs_dim, hidden_dim) / std::sqrt(double(obs_dim));
  p.b1 = Eigen::VectorXd::Zero(hidden_dim);
  p.w2 = normal_matrix(rng, hidden_dim, out_dim) / std::sqrt(double(hidden_dim));
  p.b2 = Eigen::VectorXd::Zero(out_dim);

  p.w1 /= cut_constant;
  p.b1 /= cut_constant;
  p.w2 /= cut_constant;
  p.b2 /= cut_constant;
  return p;
}

Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != params.w1.rows())
    throw ShapeMismatch("input width does not match first layer");
  const Eigen::MatrixXd hidden =
      ((inputs * params.w1).rowwise() + params.b1.transpose()).cwiseMax(0.0);
  return (hidden * params.w2).rowwise() + params.b2.transpose();
}

MlpGradients backward(const MlpParams& params, const Eigen::MatrixXd& inputs,
                      const std::vector<std::pair<int, int>>& anchor_positive,
                      const TrainConfig& cfg, double* mean_loss_out,
                      BatchPairStats* pair_stats_out) {
  if (inputs.cols() != params.w1.rows())
    throw ShapeMismatch("input width does not match first layer");

  const Eigen::MatrixXd pre =
      (inputs * params.w1).rowwise() + params.b1.transpose();
  const Eigen::MatrixXd hidden = pre.cwiseMax(0.0);
  const Eigen::MatrixXd z =
      (hidden * params.w2).rowwise() + params.b2.transpose();

  const LossConfig loss{cfg.temperature};
  const MiniBatchGradients g =
      infonce_batch_gradients(z.transpose(), anchor_positive, loss);
  if (mean_loss_out) *mean_loss_out = g.mean_loss;
  if (pair_stats_out) {
    double cos_sum = 0.0;
    int opposite = 0;
    for (const auto& [a, p] : anchor_positive) {
      const double c =
          cosine_similarity(z.row(a).transpose(), z.row(p).transpose());
      cos_sum += c;
      if (c < 0.0) ++opposite;
    }
    const double m = static_cast<double>(anchor_positive.size());
    pair_stats_out->mean_cos = cos_sum / m;
    pair_stats_out->opposite_rate = opposite / m;
  }

  Eigen::MatrixXd gz = g.gradients.transpose();  // n x out_dim
  if (cfg.gradscale_p != 0.0) {
    for (Eigen::Index r = 0; r < gz.rows(); ++r)
      gz.row(r) *= std::pow(z.row(r).norm(), cfg.gradscale_p);
  }

  MlpGradients out;
  out.w2 = hidden.transpose() * gz;
  out.b2 = gz.colwise().sum();
  Eigen::MatrixXd gh = gz * params.w2.transpose();
  gh = (pre.array() > 0.0).select(gh, 0.0);
  out.w1 = inputs.transpose() * gh;
  out.b1 = gh.colwise().sum();

  if (cfg.weight_decay != 0.0) {
    const double two_wd = 2.0 * cfg.weight_decay;
    out.w1 += two_wd * params.w1;
    out.b1 += two_wd * params.b1;
    out.w2 += two_wd * params.w2;
    out.b2 += two_wd * params.b2;
  }
  return out;
}

namespace {

void epoch_stats(const MlpParams& params, const LatentDataset& ds,
                 EpochTrace& trace) {
  const Eigen::MatrixXd z = forward(params, ds.observations);
  const Eigen::VectorXd norms = z.rowwise().norm();
  trace.mean_embedding_norm = norms.mean();

  const int k = static_cast<int>(ds.class_members.size());
  trace.per_class_mean_norm = Eigen::VectorXd::Zero(k);
  for (int c = 0; c < k; ++c) {
    const auto& members = ds.class_members[c];
    if (members.empty()) continue;
    double acc = 0.0;
    for (int s : members) acc += norms[s];
    trace.per_class_mean_norm[c] = acc / static_cast<double>(members.size());
  }
}

}  // namespace

TrainResult train(const LatentDataset& ds, const TrainConfig& cfg,
                  std::vector<EpochTrace>* trace_sink) {
  if (cfg.batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");

  const int n = static_cast<int>(ds.observations.rows());
  const int obs_dim = static_cast<int>(ds.observations.cols());
  const int out_dim = static_cast<int>(ds.latents.cols());

  TrainResult res;
  res.params = init_params(obs_dim, cfg.hidden_dim, out_dim, cfg.cut_constant,
                           child_seed(cfg.seed, 0));
  Rng rng(child_seed(cfg.seed, 1));

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.next_below(i + 1));
      std::swap(order[i], order[j]);
    }

    double loss_acc = 0.0;
    double cos_acc = 0.0;
    double opp_acc = 0.0;
    long pair_count = 0;
    int batches = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, n - start);
      Eigen::MatrixXd inputs(2 * bsz, obs_dim);
      std::vector<std::pair<int, int>> pairs;
      pairs.reserve(bsz);
      for (int m = 0; m < bsz; ++m) {
        const int anchor = order[start + m];
        const int partner = sample_positive_for(ds, anchor, rng);
        inputs.row(m) = ds.observations.row(anchor);
        inputs.row(bsz + m) = ds.observations.row(partner);
        pairs.emplace_back(m, bsz + m);
      }

      double batch_loss = 0.0;
      BatchPairStats stats{};
      const MlpGradients g =
          backward(res.params, inputs, pairs, cfg, &batch_loss, &stats);
      res.params.w1 -= cfg.learning_rate * g.w1;
      res.params.b1 -= cfg.learning_rate * g.b1;
      res.params.w2 -= cfg.learning_rate * g.w2;
      res.params.b2 -= cfg.learning_rate * g.b2;
      loss_acc += batch_loss;
      cos_acc += stats.mean_cos * bsz;
      opp_acc += stats.opposite_rate * bsz;
      pair_count += bsz;
      ++batches;
    }

    EpochTrace trace;
    trace.epoch = epoch;
    trace.mean_loss = loss_acc / batches;
    trace.pair_mean_cos = cos_acc / static_cast<double>(pair_count);
    trace.pair_opposite_rate = opp_acc / static_cast<double>(pair_count);
    epoch_stats(res.params, ds, trace);
    res.trace.push_back(trace);
    if (trace_sink) trace_sink->push_back(trace);
    if (trace.mean_embedding_norm < 1e-6) throw TrainingCollapse{};
  }
  return res;
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());

  const auto write_matrix = [&](const char* name, const Eigen::MatrixXd& m) {
    out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c) out << ',';
        out << format_double(m(r, c));
      }
      out << '\n';
    }
  };
  write_matrix("w1", params.w1);
  write_matrix("b1", params.b1);
  write_matrix("w2", params.w2);
  write_matrix("b2", params.b2);
}

namespace {

Eigen::MatrixXd read_matrix(std::istream& in, const std::string& expect_name) {
  std::string name;
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> name >> rows >> cols) || name != expect_name || rows < 1 || cols < 1)
    throw std::runtime_error("malformed checkpoint near " + expect_name);
  in.ignore();  // trailing newline
  Eigen::MatrixXd m(rows, cols);
  std::string line, cell;
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!std::getline(in, line))
      throw std::runtime_error("truncated checkpoint in " + expect_name);
    std::istringstream ls(line);
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!std::getline(ls, cell, ','))
        throw std::runtime_error("short row in " + expect_name);
      m(r, c) = std::stod(cell);
    }
  }
  return m;
}

}  // namespace

MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  MlpParams p;
  p.w1 = read_matrix(in, "w1");
  p.b1 = read_matrix(in, "b1");
  p.w2 = read_matrix(in, "w2");
  p.b2 = read_matrix(in, "b2");
  if (p.w1.cols() != p.b1.rows() || p.w2.rows() != p.b1.rows() ||
      p.w2.cols() != p.b2.rows())
    throw ShapeMismatch("inconsistent checkpoint shapes");
  return p;
}

}  // namespace normlab
