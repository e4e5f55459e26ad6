#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <utility>
#include <vector>

#include "normlab/rng.hpp"

// Synthetic classification data with a known latent structure: unit class
// centers, noisy latents renormalized onto the sphere, and observations
// obtained by pushing latents through one fixed random linear map. Labels
// are known exactly, which is what the retrieval analyses lean on.

namespace normlab {

class SingletonClass : public std::runtime_error {
 public:
  SingletonClass() : std::runtime_error("class has fewer than two members") {}
};

struct LatentSpec {
  int latent_dim = 10;  // sphere dimension; ambient latent space is d + 1
  int num_classes = 4;
  int samples = 4000;
  double sigma = 0.1;  // stddev of the pre-normalization noise
  int obs_dim = 64;
  // false: classes uniform; true: class i drawn with weight 2^-(i+1),
  // renormalized, so class 0 is the most frequent.
  bool imbalance = false;
  std::uint64_t seed = 0;
};

struct LatentDataset {
  Eigen::MatrixXd observations;  // samples x obs_dim
  Eigen::VectorXi labels;        // samples
  Eigen::MatrixXd latents;       // samples x (latent_dim + 1), unit rows
  Eigen::MatrixXd class_centers; // num_classes x (latent_dim + 1), unit rows
  Eigen::MatrixXd generator;     // (latent_dim + 1) x obs_dim
  std::vector<std::vector<int>> class_members;  // sample indices per class
};

// Draw order is part of the schema: centers, generator, then per sample the
// class pick followed by the noise vector. observations = latents * generator
// in one product.
LatentDataset generate(const LatentSpec& spec);

// Uniform same-class partner for a given sample. Throws SingletonClass when
// no partner exists.
int sample_positive_for(const LatentDataset& ds, int first, Rng& rng);

// Uniform sample plus a uniform same-class partner.
std::pair<int, int> sample_positive_pair(const LatentDataset& ds, Rng& rng);

// Observations as label,obs_0..obs_{D-1}; the sidecar lists the class centers
// and the generator columns, one per row, all of width latent_dim + 1.
void write_dataset_csv(const LatentDataset& ds,
                       const std::filesystem::path& data_path,
                       const std::filesystem::path& meta_path);

}  // namespace normlab
