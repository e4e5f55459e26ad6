#include "normlab/analysis.hpp"

#include <algorithm>
#include <numeric>

#include "normlab/geometry.hpp"

namespace normlab {

namespace {

// Rows normalized onto the sphere; distances derive from the Gram matrix.
Eigen::MatrixXd cosine_distances(const Eigen::MatrixXd& embeddings) {
  const Eigen::Index n = embeddings.rows();
  Eigen::MatrixXd unit(n, embeddings.cols());
  for (Eigen::Index r = 0; r < n; ++r)
    unit.row(r) = embeddings.row(r) / checked_norm(embeddings.row(r).transpose());
  return Eigen::MatrixXd::Ones(n, n) - unit * unit.transpose();
}

// Indices of the k nearest neighbors of row i, self excluded, ties by index.
std::vector<int> nearest_of(const Eigen::MatrixXd& dist, int i, int k) {
  const int n = static_cast<int>(dist.rows());
  std::vector<int> idx;
  idx.reserve(n - 1);
  for (int j = 0; j < n; ++j)
    if (j != i) idx.push_back(j);
  const auto closer = [&](int a, int b) {
    if (dist(i, a) != dist(i, b)) return dist(i, a) < dist(i, b);
    return a < b;
  };
  std::nth_element(idx.begin(), idx.begin() + k, idx.end(), closer);
  idx.resize(k);
  std::sort(idx.begin(), idx.end(), closer);
  return idx;
}

}  // namespace

KnnResult knn_classify(const Eigen::MatrixXd& embeddings,
                       const Eigen::VectorXi& labels, int k) {
  const int n = static_cast<int>(embeddings.rows());
  if (k < 1) throw std::invalid_argument("k must be positive");
  if (n < k + 1) throw TooFewPoints{};
  if (labels.size() != n) throw std::invalid_argument("label count mismatch");

  const Eigen::MatrixXd dist = cosine_distances(embeddings);
  const int num_classes = labels.maxCoeff() + 1;

  KnnResult res;
  res.predictions.resize(n);
  int hits = 0;
  std::vector<int> votes(num_classes);
  for (int i = 0; i < n; ++i) {
    std::fill(votes.begin(), votes.end(), 0);
    for (int j : nearest_of(dist, i, k)) ++votes[labels[j]];
    int best = 0;
    for (int c = 1; c < num_classes; ++c)
      if (votes[c] > votes[best]) best = c;  // ties stay at the smaller id
    res.predictions[i] = best;
    if (best == labels[i]) ++hits;
  }
  res.accuracy = static_cast<double>(hits) / n;
  return res;
}

Eigen::VectorXd inverse_density(const Eigen::MatrixXd& embeddings, int m) {
  const int n = static_cast<int>(embeddings.rows());
  if (m < 1) throw std::invalid_argument("m must be positive");
  if (n < m + 1) throw TooFewPoints{};

  const Eigen::MatrixXd dist = cosine_distances(embeddings);
  Eigen::VectorXd out(n);
  std::vector<double> row(n - 1);
  for (int i = 0; i < n; ++i) {
    int w = 0;
    for (int j = 0; j < n; ++j)
      if (j != i) row[w++] = dist(i, j);
    std::nth_element(row.begin(), row.begin() + (m - 1), row.end());
    out[i] = row[m - 1];
  }
  return out;
}

namespace {

Eigen::VectorXd average_ranks(const Eigen::VectorXd& v) {
  const int n = static_cast<int>(v.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](int a, int b) { return v[a] < v[b]; });
  Eigen::VectorXd ranks(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double mean_rank = 0.5 * (i + j) + 1.0;  // 1-based
    for (int t = i; t <= j; ++t) ranks[idx[t]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_rho(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw std::invalid_argument("length mismatch");
  if (x.size() < 2) throw TooFewPoints{};
  const Eigen::VectorXd rx = average_ranks(x);
  const Eigen::VectorXd ry = average_ranks(y);
  const Eigen::VectorXd cx = rx.array() - rx.mean();
  const Eigen::VectorXd cy = ry.array() - ry.mean();
  const double vx = cx.squaredNorm();
  const double vy = cy.squaredNorm();
  if (vx == 0.0 || vy == 0.0) return 0.0;
  return cx.dot(cy) / std::sqrt(vx * vy);
}

double norm_density_correlation(const Eigen::MatrixXd& embeddings) {
  if (embeddings.rows() < 30) throw TooFewPoints{};
  const Eigen::VectorXd norms = embeddings.rowwise().norm();
  return spearman_rho(norms, inverse_density(embeddings, 10));
}

BucketReport bucket_accuracy(const Eigen::MatrixXd& embeddings,
                             const Eigen::VectorXi& labels, int k,
                             int min_count) {
  const int n = static_cast<int>(embeddings.rows());
  const KnnResult knn = knn_classify(embeddings, labels, k);
  const Eigen::VectorXd norms = embeddings.rowwise().norm();
  const double max_norm = norms.maxCoeff();
  if (max_norm < kZeroNormThreshold) throw ZeroVectorError{};

  BucketReport report;
  report.min_count = min_count;
  report.buckets.resize(20);
  for (int b = 0; b < 20; ++b) {
    report.buckets[b].lo = 0.05 * b;
    report.buckets[b].hi = 0.05 * (b + 1);
  }

  std::vector<int> hits(20, 0);
  for (int i = 0; i < n; ++i) {
    const double r = norms[i] / max_norm;
    const int b = std::min(static_cast<int>(r / 0.05), 19);
    ++report.buckets[b].count;
    if (knn.predictions[i] == labels[i]) ++hits[b];
  }
  for (int b = 0; b < 20; ++b) {
    if (report.buckets[b].count >= min_count && report.buckets[b].count > 0) {
      report.buckets[b].accuracy =
          static_cast<double>(hits[b]) / report.buckets[b].count;
      report.buckets[b].has_metric = true;
    }
  }
  return report;
}

Eigen::VectorXd per_class_norm_means(const Eigen::MatrixXd& embeddings,
                                     const Eigen::VectorXi& labels) {
  if (embeddings.rows() != labels.size())
    throw std::invalid_argument("label count mismatch");
  if (labels.size() == 0) throw TooFewPoints{};
  const int k = labels.maxCoeff() + 1;
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(k);
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
  for (int i = 0; i < labels.size(); ++i) {
    sums[labels[i]] += embeddings.row(i).norm();
    ++counts[labels[i]];
  }
  for (int c = 0; c < k; ++c) {
    if (counts[c] == 0) throw EmptyClass{};
    sums[c] /= counts[c];
  }
  return sums;
}

}  // namespace normlab
