#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <vector>

// Post-hoc diagnostics on a set of embeddings (rows). Everything angular uses
// cosine distance 1 - cos, so results are invariant to per-point rescaling.

namespace normlab {

class TooFewPoints : public std::runtime_error {
 public:
  TooFewPoints() : std::runtime_error("not enough points for this statistic") {}
};

class EmptyClass : public std::runtime_error {
 public:
  EmptyClass() : std::runtime_error("class has no members") {}
};

struct KnnResult {
  Eigen::VectorXi predictions;
  double accuracy = 0.0;
};

struct BucketReport {
  struct Bucket {
    double lo = 0.0;
    double hi = 0.0;
    int count = 0;
    double accuracy = 0.0;
    bool has_metric = false;  // false when count < min_count
  };
  std::vector<Bucket> buckets;
  int min_count = 0;
};

// Leave-one-out k-nearest-neighbor vote under cosine distance. Distance ties
// break toward the smaller index, vote ties toward the smaller class id.
KnnResult knn_classify(const Eigen::MatrixXd& embeddings,
                       const Eigen::VectorXi& labels, int k);

// Distance to the m-th nearest neighbor; larger means locally sparser.
Eigen::VectorXd inverse_density(const Eigen::MatrixXd& embeddings, int m = 10);

// Spearman rank correlation with average ranks on ties; 0 when either side
// is degenerate (all tied).
double spearman_rho(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// spearman_rho of embedding norms against inverse_density (m = 10).
double norm_density_correlation(const Eigen::MatrixXd& embeddings);

// Norms divided by the dataset maximum, binned into 20 buckets of width 0.05
// (top bucket closed); per-bucket leave-one-out kNN accuracy, reported only
// where the bucket holds at least min_count points.
BucketReport bucket_accuracy(const Eigen::MatrixXd& embeddings,
                             const Eigen::VectorXi& labels, int k,
                             int min_count);

// Mean norm per class id 0..max(labels); every class must be populated.
Eigen::VectorXd per_class_norm_means(const Eigen::MatrixXd& embeddings,
                                     const Eigen::VectorXi& labels);

}  // namespace normlab
