#include "normlab/experiments.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "normlab/analysis.hpp"
#include "normlab/csv.hpp"
#include "normlab/descent.hpp"
#include "normlab/geometry.hpp"
#include "normlab/latentgen.hpp"
#include "normlab/network.hpp"
#include "normlab/rng.hpp"
#include "normlab/ssl_grads.hpp"

namespace normlab {
namespace {

namespace fs = std::filesystem;

fs::path out_dir(const ConfigView& view) {
  fs::path dir = view.get_string("out", "out");
  fs::create_directories(dir);
  return dir;
}

DescentMode parse_mode(const ConfigView& view, const std::string& key) {
  const std::string s = view.get_string(key, "attraction_only");
  if (s == "attraction_only") return DescentMode::attraction_only;
  if (s == "infonce") return DescentMode::infonce;
  view.fail(key, "expected attraction_only or infonce for");
}

// Reads the pair-descent knobs shared by converge, wd_sweep and opphalves.
DescentConfig read_descent_config(const ConfigView& view, double lr_fallback) {
  DescentConfig cfg;
  cfg.learning_rate = view.get_double("lr", lr_fallback);
  cfg.weight_decay = view.get_double("wd", 0.0);
  cfg.gradscale_p = view.get_double("gradscale_p", 0.0);
  cfg.temperature = view.get_double("temperature", 1.0);
  cfg.max_steps = view.get_int("max_steps", 100000);
  cfg.converge_threshold = view.get_double("converge_threshold", 0.999);
  cfg.collapse_threshold = view.get_double("collapse_threshold", 1e-2);
  cfg.mode = parse_mode(view, "mode");
  if (cfg.learning_rate <= 0) view.fail("lr", "must be positive:");
  if (cfg.weight_decay < 0) view.fail("wd", "must be nonnegative:");
  if (cfg.temperature <= 0) view.fail("temperature", "must be positive:");
  if (cfg.max_steps < 1) view.fail("max_steps", "must be at least 1:");
  if (cfg.converge_threshold <= 0 || cfg.converge_threshold >= 1)
    view.fail("converge_threshold", "must lie in (0, 1):");
  return cfg;
}

void check_pair_dims(const ConfigView& view, int d, int num_pairs) {
  if (d < 2) view.fail("d", "must be at least 2:");
  if (num_pairs < 1) view.fail("num_pairs", "must be at least 1:");
}

void check_alpha(const ConfigView& view, const std::string& key, double a) {
  if (a < -1.0 || a > 1.0) view.fail(key, "must lie in [-1, 1]:");
}

const std::vector<std::string> kSweepHeader = {
    "seed", "d",  "num_pairs",   "norm",  "alpha",          "lr",
    "wd",   "gradscale_p", "outcome", "steps", "final_mean_cos"};

void sweep_row(CsvWriter& csv, const PairInitSpec& spec,
               const DescentConfig& cfg, const ConvergenceResult& res) {
  csv.row({CsvWriter::cell(static_cast<unsigned long long>(spec.seed)),
           CsvWriter::cell(spec.dimension), CsvWriter::cell(spec.num_pairs),
           CsvWriter::cell(spec.target_norm),
           CsvWriter::cell(spec.angle_alpha),
           CsvWriter::cell(cfg.learning_rate),
           CsvWriter::cell(cfg.weight_decay),
           CsvWriter::cell(cfg.gradscale_p), outcome_name(res.outcome),
           CsvWriter::cell(res.steps), CsvWriter::cell(res.final_mean_cos)});
}

double mean_pair_cos(const EmbeddingSet& set) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < set.a.cols(); ++i)
    acc += cosine_similarity(set.a.col(i), set.b.col(i));
  return acc / static_cast<double>(set.a.cols());
}

LatentSpec read_latent_spec(const ConfigView& view, std::uint64_t seed) {
  LatentSpec spec;
  spec.latent_dim = view.get_int("latent_dim", 10);
  spec.num_classes = view.get_int("num_classes", 4);
  spec.samples = view.get_int("samples", 4000);
  spec.sigma = view.get_double("sigma", 0.1);
  spec.obs_dim = view.get_int("obs_dim", 64);
  spec.imbalance = view.get_bool("imbalance", false);
  spec.seed = child_seed(seed, 0);
  if (spec.latent_dim < 2) view.fail("latent_dim", "must be at least 2:");
  if (spec.num_classes < 2) view.fail("num_classes", "must be at least 2:");
  if (spec.samples < spec.num_classes)
    view.fail("samples", "need at least one sample per class:");
  if (spec.sigma <= 0) view.fail("sigma", "must be positive:");
  if (spec.obs_dim < spec.latent_dim + 1)
    view.fail("obs_dim", "must be at least latent_dim + 1:");
  return spec;
}

TrainConfig read_train_config(const ConfigView& view, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.hidden_dim = view.get_int("hidden_dim", 128);
  cfg.batch_size = view.get_int("batch_size", 128);
  cfg.epochs = view.get_int("epochs", 50);
  cfg.learning_rate = view.get_double("lr", 0.1);
  cfg.weight_decay = view.get_double("weight_decay", 0.0);
  cfg.cut_constant = view.get_double("cut_constant", 1.0);
  cfg.gradscale_p = view.get_double("gradscale_p", 0.0);
  cfg.temperature = view.get_double("temperature", 1.0);
  cfg.seed = child_seed(seed, 1);
  if (cfg.hidden_dim < 1) view.fail("hidden_dim", "must be at least 1:");
  if (cfg.batch_size < 2) view.fail("batch_size", "must be at least 2:");
  if (cfg.epochs < 1) view.fail("epochs", "must be at least 1:");
  if (cfg.learning_rate < 0) view.fail("lr", "must be nonnegative:");
  if (cfg.weight_decay < 0) view.fail("weight_decay", "must be nonnegative:");
  if (cfg.cut_constant <= 0) view.fail("cut_constant", "must be positive:");
  if (cfg.temperature <= 0) view.fail("temperature", "must be positive:");
  return cfg;
}

std::string nan_cell() { return format_double(std::nan("")); }

}  // namespace

int cmd_converge(const ConfigMap& values) {
  static const std::set<std::string> allowed = {
      "out",         "seed",        "d",
      "num_pairs",   "norms",       "alphas",
      "lr",          "wd",          "gradscale_p",
      "temperature", "max_steps",   "converge_threshold",
      "collapse_threshold",         "mode",
      "strict"};
  const ConfigView view(values, "converge", allowed);
  const fs::path dir = out_dir(view);
  const std::uint64_t seed = view.get_u64("seed", 0);
  const int d = view.get_int("d", 20);
  const int num_pairs = view.get_int("num_pairs", 500);
  check_pair_dims(view, d, num_pairs);
  const std::vector<double> norms = view.get_list("norms", {1, 2, 4, 8});
  const std::vector<double> alphas = view.get_list("alphas", {0});
  for (double n : norms)
    if (n <= 0) view.fail("norms", "entries must be positive:");
  for (double a : alphas) check_alpha(view, "alphas", a);
  const DescentConfig cfg = read_descent_config(view, 0.1);
  const bool strict = view.get_bool("strict", false);

  CsvWriter csv(dir / "converge.csv", kSweepHeader);
  bool all_converged = true;
  std::uint64_t cell = 0;
  for (double norm : norms) {
    for (double alpha : alphas) {
      PairInitSpec spec;
      spec.dimension = d;
      spec.num_pairs = num_pairs;
      spec.target_norm = norm;
      spec.angle_alpha = alpha;
      spec.seed = child_seed(seed, cell++);
      const ConvergenceResult res = run_to_convergence(spec, cfg);
      all_converged = all_converged && res.outcome == Outcome::converged;
      sweep_row(csv, spec, cfg, res);
    }
  }
  return strict && !all_converged ? 3 : 0;
}

int cmd_wd_sweep(const ConfigMap& values) {
  static const std::set<std::string> allowed = {
      "out",         "seed",      "d",
      "num_pairs",   "norms",     "wds",
      "alpha",       "lr",        "gradscale_p",
      "temperature", "max_steps", "converge_threshold",
      "collapse_threshold",       "mode",
      "strict"};
  const ConfigView view(values, "wd_sweep", allowed);
  const fs::path dir = out_dir(view);
  const std::uint64_t seed = view.get_u64("seed", 0);
  const int d = view.get_int("d", 20);
  const int num_pairs = view.get_int("num_pairs", 500);
  check_pair_dims(view, d, num_pairs);
  const std::vector<double> norms = view.get_list("norms", {1, 4, 7});
  const std::vector<double> wds = view.get_list("wds", {0.5, 1.0, 10.0});
  const double alpha = view.get_double("alpha", 0.0);
  check_alpha(view, "alpha", alpha);
  for (double n : norms)
    if (n <= 0) view.fail("norms", "entries must be positive:");
  for (double w : wds)
    if (w < 0) view.fail("wds", "entries must be nonnegative:");
  // The decay race only shows up when the radial shrink outpaces the angular
  // closing rate early on; 0.05 puts the strongest sweep value right at the
  // contraction limit 2*lr*wd = 1.
  DescentConfig cfg = read_descent_config(view, 0.05);
  const bool strict = view.get_bool("strict", false);

  CsvWriter csv(dir / "wd_sweep.csv", kSweepHeader);
  bool any_fatal = false;
  std::uint64_t cell = 0;
  for (double norm : norms) {
    for (double wd : wds) {
      cfg.weight_decay = wd;
      PairInitSpec spec;
      spec.dimension = d;
      spec.num_pairs = num_pairs;
      spec.target_norm = norm;
      spec.angle_alpha = alpha;
      spec.seed = child_seed(seed, cell++);
      const ConvergenceResult res = run_to_convergence(spec, cfg);
      any_fatal = any_fatal || res.outcome != Outcome::converged;
      sweep_row(csv, spec, cfg, res);
    }
  }
  return strict && any_fatal ? 3 : 0;
}

int cmd_latent_train(const ConfigMap& values) {
  static const std::set<std::string> allowed = {
      "out",        "seed",        "latent_dim",
      "num_classes", "samples",    "sigma",
      "obs_dim",    "imbalance",   "hidden_dim",
      "batch_size", "epochs",      "lr",
      "weight_decay",              "cut_constant",
      "gradscale_p", "temperature", "knn_k",
      "density_m",  "bucket_min_count",
      "export_dataset",            "strict"};
  const ConfigView view(values, "latent_train", allowed);
  const fs::path dir = out_dir(view);
  const std::uint64_t seed = view.get_u64("seed", 0);
  const LatentSpec lspec = read_latent_spec(view, seed);
  const TrainConfig tcfg = read_train_config(view, seed);
  const int knn_k = view.get_int("knn_k", 10);
  const int density_m = view.get_int("density_m", 10);
  const int bucket_min_count = view.get_int("bucket_min_count", 20);
  if (knn_k < 1) view.fail("knn_k", "must be at least 1:");
  if (density_m < 1) view.fail("density_m", "must be at least 1:");
  if (bucket_min_count < 1) view.fail("bucket_min_count", "must be at least 1:");
  const bool export_dataset = view.get_bool("export_dataset", false);
  const bool strict = view.get_bool("strict", false);

  const LatentDataset ds = generate(lspec);
  if (export_dataset)
    write_dataset_csv(ds, dir / "data.csv", dir / "meta.csv");

  std::vector<EpochTrace> trace;
  MlpParams params;
  bool collapsed = false;
  try {
    TrainResult res = train(ds, tcfg, &trace);
    params = std::move(res.params);
  } catch (const TrainingCollapse&) {
    collapsed = true;
  }

  {
    std::vector<std::string> header = {"epoch", "mean_loss"};
    for (int c = 0; c < lspec.num_classes; ++c)
      header.push_back("class_norm_" + std::to_string(c));
    header.push_back("mean_norm");
    header.push_back("outcome");
    CsvWriter csv(dir / "epochs.csv", header);
    for (std::size_t i = 0; i < trace.size(); ++i) {
      const EpochTrace& t = trace[i];
      std::vector<std::string> row = {CsvWriter::cell(t.epoch),
                                      CsvWriter::cell(t.mean_loss)};
      for (int c = 0; c < lspec.num_classes; ++c)
        row.push_back(CsvWriter::cell(t.per_class_mean_norm(c)));
      row.push_back(CsvWriter::cell(t.mean_embedding_norm));
      const bool last = i + 1 == trace.size();
      row.push_back(collapsed && last ? "collapsed" : "ok");
      csv.row(row);
    }
  }

  CsvWriter points(dir / "points.csv",
                   {"index", "label", "norm", "inv_density", "knn_pred"});
  CsvWriter buckets(dir / "buckets.csv", {"lo", "hi", "count", "accuracy"});
  std::vector<std::string> summary_header = {"outcome", "knn_accuracy",
                                             "spearman_rho", "final_mean_norm"};
  for (int c = 0; c < lspec.num_classes; ++c)
    summary_header.push_back("class_norm_" + std::to_string(c));
  CsvWriter summary(dir / "summary.csv", summary_header);

  if (!collapsed) {
    save_checkpoint(dir / "checkpoint.txt", params);
    const Eigen::MatrixXd z = forward(params, ds.observations);
    const Eigen::VectorXd norms = z.rowwise().norm();
    const KnnResult knn = knn_classify(z, ds.labels, knn_k);
    const Eigen::VectorXd dens = inverse_density(z, density_m);
    const double rho = spearman_rho(norms, dens);
    const BucketReport report =
        bucket_accuracy(z, ds.labels, knn_k, bucket_min_count);
    const Eigen::VectorXd class_norms = per_class_norm_means(z, ds.labels);

    for (int i = 0; i < lspec.samples; ++i)
      points.row({CsvWriter::cell(i), CsvWriter::cell(ds.labels(i)),
                  CsvWriter::cell(norms(i)), CsvWriter::cell(dens(i)),
                  CsvWriter::cell(knn.predictions(i))});
    for (const auto& b : report.buckets)
      buckets.row({CsvWriter::cell(b.lo), CsvWriter::cell(b.hi),
                   CsvWriter::cell(b.count),
                   b.has_metric ? CsvWriter::cell(b.accuracy) : nan_cell()});
    std::vector<std::string> row = {"ok", CsvWriter::cell(knn.accuracy),
                                    CsvWriter::cell(rho),
                                    CsvWriter::cell(norms.mean())};
    for (int c = 0; c < lspec.num_classes; ++c)
      row.push_back(CsvWriter::cell(class_norms(c)));
    summary.row(row);
  } else {
    // Headers only for the per-point tables; the summary still reports the
    // last observed norms so the collapse is visible downstream.
    std::vector<std::string> row = {"collapsed", nan_cell(), nan_cell()};
    const EpochTrace& last = trace.back();
    row.push_back(CsvWriter::cell(last.mean_embedding_norm));
    for (int c = 0; c < lspec.num_classes; ++c)
      row.push_back(CsvWriter::cell(last.per_class_mean_norm(c)));
    summary.row(row);
  }

  return strict && collapsed ? 3 : 0;
}

int cmd_bound_check(const ConfigMap& values) {
  static const std::set<std::string> allowed = {
      "out",        "seed",    "trials",      "d",          "rhos",
      "gammas",     "mc_samples", "mc_dims", "mc_epsilons"};
  const ConfigView view(values, "bound_check", allowed);
  const fs::path dir = out_dir(view);
  const std::uint64_t seed = view.get_u64("seed", 0);
  const int trials = view.get_int("trials", 1000);
  const int d = view.get_int("d", 8);
  if (trials < 1) view.fail("trials", "must be at least 1:");
  if (d < 2) view.fail("d", "must be at least 2:");
  const std::vector<double> rhos = view.get_list("rhos", {0.5, 1, 2, 8});
  const std::vector<double> gammas = view.get_list("gammas", {0.01, 0.1, 1});
  for (double r : rhos)
    if (r <= 0) view.fail("rhos", "entries must be positive:");
  for (double g : gammas)
    if (g <= 0) view.fail("gammas", "entries must be positive:");
  const int mc_samples = view.get_int("mc_samples", 100000);
  if (mc_samples < 1) view.fail("mc_samples", "must be at least 1:");
  const std::vector<double> mc_dims = view.get_list("mc_dims", {10, 20, 100});
  const std::vector<double> mc_epsilons =
      view.get_list("mc_epsilons", {0.3, 0.5});
  for (double dim : mc_dims)
    if (dim < 1 || dim != std::floor(dim))
      view.fail("mc_dims", "entries must be positive integers:");
  for (double e : mc_epsilons)
    if (e <= 0 || e >= 1) view.fail("mc_epsilons", "entries must lie in (0, 1):");

  std::uint64_t cell = 0;
  {
    CsvWriter csv(dir / "bound_trials.csv",
                  {"trial", "d", "rho", "gamma", "cos0", "delta_cos", "bound",
                   "margin"});
    for (double rho : rhos) {
      for (double gamma : gammas) {
        Rng rng(child_seed(seed, cell++));
        for (int t = 0; t < trials; ++t) {
          const Eigen::VectorXd zi = rho * normalize(normal_vector(rng, d));
          const Eigen::VectorXd zj = rho * normalize(normal_vector(rng, d));
          const double cos0 = cosine_similarity(zi, zj);
          const StepBound sb = cosine_step_bound_check(zi, zj, gamma);
          csv.row({CsvWriter::cell(t), CsvWriter::cell(d),
                   CsvWriter::cell(rho), CsvWriter::cell(gamma),
                   CsvWriter::cell(cos0), CsvWriter::cell(sb.delta_cos),
                   CsvWriter::cell(sb.bound),
                   CsvWriter::cell(sb.bound - sb.delta_cos)});
        }
      }
    }
  }

  {
    CsvWriter csv(dir / "chebyshev.csv",
                  {"d", "epsilon", "bound", "empirical_rate", "samples"});
    for (double dim_real : mc_dims) {
      const int dim = static_cast<int>(dim_real);
      Rng rng(child_seed(seed, cell++));
      std::vector<long> hits(mc_epsilons.size(), 0);
      for (int s = 0; s < mc_samples; ++s) {
        const Eigen::VectorXd u = normal_vector(rng, dim);
        const Eigen::VectorXd v = normal_vector(rng, dim);
        const double c = cosine_similarity(u, v);
        for (std::size_t e = 0; e < mc_epsilons.size(); ++e)
          if (c >= 1.0 - mc_epsilons[e]) ++hits[e];
      }
      for (std::size_t e = 0; e < mc_epsilons.size(); ++e)
        csv.row({CsvWriter::cell(dim), CsvWriter::cell(mc_epsilons[e]),
                 CsvWriter::cell(chebyshev_opposite_bound(dim, mc_epsilons[e])),
                 CsvWriter::cell(static_cast<double>(hits[e]) / mc_samples),
                 CsvWriter::cell(mc_samples)});
    }
  }
  return 0;
}

int cmd_opphalves(const ConfigMap& values) {
  static const std::set<std::string> allowed = {
      "out",         "seed",      "engine",
      "record_every", "d",        "num_pairs",
      "norm",        "alpha",     "lr",
      "wd",          "gradscale_p",
      "temperature", "max_steps", "converge_threshold",
      "collapse_threshold",       "mode",
      "latent_dim",  "num_classes",
      "samples",     "sigma",     "obs_dim",
      "imbalance",   "hidden_dim", "batch_size",
      "epochs",      "weight_decay",
      "cut_constant", "strict"};
  const ConfigView view(values, "opphalves", allowed);
  const fs::path dir = out_dir(view);
  const std::uint64_t seed = view.get_u64("seed", 0);
  const std::string engine = view.get_string("engine", "nonparametric");
  const int record_every = view.get_int("record_every", 1);
  if (record_every < 1) view.fail("record_every", "must be at least 1:");
  const bool strict = view.get_bool("strict", false);

  CsvWriter csv(dir / "opphalves.csv",
                {"engine", "step", "mean_pair_cos", "opposite_rate"});

  if (engine == "nonparametric") {
    const int d = view.get_int("d", 20);
    const int num_pairs = view.get_int("num_pairs", 2000);
    check_pair_dims(view, d, num_pairs);
    const double alpha = view.get_double("alpha", 0.0);
    check_alpha(view, "alpha", alpha);
    PairInitSpec spec;
    spec.dimension = d;
    spec.num_pairs = num_pairs;
    spec.target_norm = view.get_double("norm", 1.0);
    if (spec.target_norm <= 0) view.fail("norm", "must be positive:");
    spec.angle_alpha = alpha;
    spec.seed = child_seed(seed, 0);
    const DescentConfig cfg = read_descent_config(view, 0.1);

    EmbeddingSet set = init_pairs(spec);
    const auto emit = [&](int step) {
      csv.row({"nonparametric", CsvWriter::cell(step),
               CsvWriter::cell(mean_pair_cos(set)),
               CsvWriter::cell(opposite_halves_rate(set))});
    };
    emit(0);
    Outcome outcome = Outcome::exhausted;
    if (mean_pair_cos(set) >= cfg.converge_threshold)
      outcome = Outcome::converged;
    int step = 0;
    while (outcome == Outcome::exhausted && step < cfg.max_steps) {
      ++step;
      try {
        descent_step(set, cfg);
      } catch (const CollapseDetected&) {
        outcome = Outcome::collapsed;
        break;
      }
      const double mc = mean_pair_cos(set);
      if (!std::isfinite(mc)) {
        outcome = Outcome::collapsed;
        break;
      }
      if (mc >= cfg.converge_threshold) outcome = Outcome::converged;
      const bool terminal =
          outcome != Outcome::exhausted || step == cfg.max_steps;
      if (step % record_every == 0 || terminal) emit(step);
    }
    return strict && outcome != Outcome::converged ? 3 : 0;
  }

  if (engine == "parametric") {
    const LatentSpec lspec = read_latent_spec(view, seed);
    TrainConfig tcfg = read_train_config(view, seed);
    std::vector<EpochTrace> trace;
    bool collapsed = false;
    try {
      train(generate(lspec), tcfg, &trace);
    } catch (const TrainingCollapse&) {
      collapsed = true;
    }
    for (std::size_t i = 0; i < trace.size(); ++i) {
      const bool terminal = i + 1 == trace.size();
      if (trace[i].epoch % record_every != 0 && !terminal) continue;
      csv.row({"parametric", CsvWriter::cell(trace[i].epoch),
               CsvWriter::cell(trace[i].pair_mean_cos),
               CsvWriter::cell(trace[i].pair_opposite_rate)});
    }
    return strict && collapsed ? 3 : 0;
  }

  view.fail("engine", "expected nonparametric or parametric for");
}

int cmd_potential(const ConfigMap& values) {
  static const std::set<std::string> allowed = {"out", "seed", "alphas",
                                                "steps"};
  const ConfigView view(values, "potential", allowed);
  const fs::path dir = out_dir(view);
  const std::vector<double> alphas = view.get_list("alphas", {0, 0.5, 1, 2});
  const std::vector<double> steps = view.get_list("steps", {10000, 20000});
  for (double s : steps)
    if (s < 1 || s != std::floor(s))
      view.fail("steps", "entries must be positive integers:");

  CsvWriter csv(dir / "potential.csv",
                {"alpha", "steps_per_segment", "integral", "closed_form",
                 "residual"});
  for (double alpha : alphas) {
    for (double s : steps) {
      const int n = static_cast<int>(s);
      const double integral = potential_loop_integral(alpha, n);
      const double closed = std::pow(2.0, alpha + 1.0) - 2.0;
      csv.row({CsvWriter::cell(alpha), CsvWriter::cell(n),
               CsvWriter::cell(integral), CsvWriter::cell(closed),
               CsvWriter::cell(std::abs(std::abs(integral) - closed))});
    }
  }
  return 0;
}

}  // namespace normlab
