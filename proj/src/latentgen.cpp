#include "normlab/latentgen.hpp"

#include <algorithm>
#include <cmath>

#include "normlab/csv.hpp"
#include "normlab/geometry.hpp"

namespace normlab {

LatentDataset generate(const LatentSpec& spec) {
  if (spec.latent_dim < 1 || spec.num_classes < 1 || spec.samples < 1 ||
      spec.obs_dim < 1 || !(spec.sigma > 0.0))
    throw std::invalid_argument("invalid latent spec");

  Rng rng(spec.seed);
  const int ambient = spec.latent_dim + 1;
  const int k = spec.num_classes;

  LatentDataset ds;
  ds.class_centers.resize(k, ambient);
  for (int c = 0; c < k; ++c)
    ds.class_centers.row(c) = normalize(normal_vector(rng, ambient)).transpose();

  ds.generator = normal_matrix(rng, ambient, spec.obs_dim);

  std::vector<double> cumulative(k, 0.0);
  {
    double total = 0.0;
    for (int c = 0; c < k; ++c) {
      const double w = spec.imbalance ? std::pow(2.0, -(c + 1)) : 1.0;
      total += w;
      cumulative[c] = total;
    }
    for (double& v : cumulative) v /= total;
  }

  ds.labels.resize(spec.samples);
  ds.latents.resize(spec.samples, ambient);
  ds.class_members.assign(k, {});
  for (int s = 0; s < spec.samples; ++s) {
    const double u = rng.next_double();
    int c = 0;
    while (c + 1 < k && u >= cumulative[c]) ++c;
    ds.labels[s] = c;
    ds.class_members[c].push_back(s);

    const Eigen::VectorXd noisy =
        ds.class_centers.row(c).transpose() + spec.sigma * normal_vector(rng, ambient);
    ds.latents.row(s) = normalize(noisy).transpose();
  }

  ds.observations = ds.latents * ds.generator;
  return ds;
}

int sample_positive_for(const LatentDataset& ds, int first, Rng& rng) {
  if (first < 0 || first >= ds.labels.size())
    throw std::out_of_range("sample index out of range");
  const auto& members = ds.class_members[ds.labels[first]];
  const int m = static_cast<int>(members.size());
  if (m < 2) throw SingletonClass{};

  // members is sorted by construction; skip over `first` to stay uniform.
  const auto pos = std::lower_bound(members.begin(), members.end(), first) -
                   members.begin();
  const auto r = static_cast<int>(rng.next_below(m - 1));
  return members[r < pos ? r : r + 1];
}

std::pair<int, int> sample_positive_pair(const LatentDataset& ds, Rng& rng) {
  const int first = static_cast<int>(rng.next_below(ds.labels.size()));
  return {first, sample_positive_for(ds, first, rng)};
}

void write_dataset_csv(const LatentDataset& ds,
                       const std::filesystem::path& data_path,
                       const std::filesystem::path& meta_path) {
  const int d_obs = static_cast<int>(ds.observations.cols());
  std::vector<std::string> header{"label"};
  for (int c = 0; c < d_obs; ++c) header.push_back("obs_" + std::to_string(c));
  CsvWriter data(data_path, header);
  std::vector<std::string> row(header.size());
  for (int s = 0; s < ds.observations.rows(); ++s) {
    row[0] = CsvWriter::cell(ds.labels[s]);
    for (int c = 0; c < d_obs; ++c)
      row[c + 1] = CsvWriter::cell(ds.observations(s, c));
    data.row(row);
  }

  const int ambient = static_cast<int>(ds.class_centers.cols());
  std::vector<std::string> mheader{"kind", "index"};
  for (int c = 0; c < ambient; ++c) mheader.push_back("v_" + std::to_string(c));
  CsvWriter meta(meta_path, mheader);
  std::vector<std::string> mrow(mheader.size());
  for (int c = 0; c < ds.class_centers.rows(); ++c) {
    mrow[0] = "center";
    mrow[1] = CsvWriter::cell(c);
    for (int j = 0; j < ambient; ++j)
      mrow[j + 2] = CsvWriter::cell(ds.class_centers(c, j));
    meta.row(mrow);
  }
  for (int c = 0; c < ds.generator.cols(); ++c) {
    mrow[0] = "generator_col";
    mrow[1] = CsvWriter::cell(c);
    for (int j = 0; j < ambient; ++j)
      mrow[j + 2] = CsvWriter::cell(ds.generator(j, c));
    meta.row(mrow);
  }
}

}  // namespace normlab
