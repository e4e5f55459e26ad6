#include "normlab/latentgen.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"

using namespace normlab;

namespace {

LatentSpec small_spec() {
  LatentSpec spec;
  spec.latent_dim = 6;
  spec.num_classes = 3;
  spec.samples = 300;
  spec.obs_dim = 16;
  spec.seed = 5;
  return spec;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("generate produces the documented shapes") {
  const LatentSpec spec = small_spec();
  const LatentDataset ds = generate(spec);
  const int ambient = spec.latent_dim + 1;
  CHECK(ds.observations.rows() == spec.samples);
  CHECK(ds.observations.cols() == spec.obs_dim);
  CHECK(ds.labels.size() == spec.samples);
  CHECK(ds.latents.rows() == spec.samples);
  CHECK(ds.latents.cols() == ambient);
  CHECK(ds.class_centers.rows() == spec.num_classes);
  CHECK(ds.class_centers.cols() == ambient);
  CHECK(ds.generator.rows() == ambient);
  CHECK(ds.generator.cols() == spec.obs_dim);

  size_t member_total = 0;
  for (int c = 0; c < spec.num_classes; ++c) {
    member_total += ds.class_members[c].size();
    for (size_t k = 0; k < ds.class_members[c].size(); ++k) {
      CHECK(ds.labels[ds.class_members[c][k]] == c);
      if (k > 0) CHECK(ds.class_members[c][k] > ds.class_members[c][k - 1]);
    }
  }
  CHECK(member_total == static_cast<size_t>(spec.samples));
  for (int s = 0; s < spec.samples; ++s) {
    CHECK(ds.labels[s] >= 0);
    CHECK(ds.labels[s] < spec.num_classes);
  }
}

TEST_CASE("latents and centers live on the unit sphere") {
  const LatentDataset ds = generate(small_spec());
  CHECK((ds.latents.rowwise().norm().array() - 1.0).abs().maxCoeff() <= 1e-10);
  CHECK((ds.class_centers.rowwise().norm().array() - 1.0).abs().maxCoeff() <=
        1e-10);
}

TEST_CASE("observations are exactly the pushed-forward latents") {
  const LatentDataset ds = generate(small_spec());
  CHECK((ds.observations - ds.latents * ds.generator).cwiseAbs().maxCoeff() <=
        1e-12);
  // spot-check the linearity row by row against a hand accumulation
  for (int s = 0; s < 5; ++s) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(ds.observations.cols());
    for (int j = 0; j < ds.latents.cols(); ++j)
      acc += ds.latents(s, j) * ds.generator.row(j);
    CHECK((ds.observations.row(s) - acc).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("labels are recoverable from latents at the default noise level") {
  LatentSpec spec;  // defaults: sigma 0.1, 4 classes, 4000 samples, sphere d=10
  spec.seed = 5;
  const LatentDataset ds = generate(spec);
  int correct = 0;
  for (int s = 0; s < spec.samples; ++s) {
    int best = -1;
    double best_cos = -2.0;
    for (int c = 0; c < spec.num_classes; ++c) {
      const double cs = ds.latents.row(s).dot(ds.class_centers.row(c));
      if (cs > best_cos) {
        best_cos = cs;
        best = c;
      }
    }
    if (best == ds.labels[s]) ++correct;
  }
  CHECK(static_cast<double>(correct) / spec.samples >= 0.99);
}

TEST_CASE("class frequencies follow the sampling weights") {
  LatentSpec spec;
  spec.seed = 9;
  SUBCASE("balanced") {
    const LatentDataset ds = generate(spec);
    for (int c = 0; c < 4; ++c) {
      const double expected = 1000.0;
      const double sigma3 = 3.0 * std::sqrt(4000.0 * 0.25 * 0.75);
      CHECK(std::abs(ds.class_members[c].size() - expected) <= sigma3);
    }
  }
  SUBCASE("imbalanced halving weights") {
    spec.imbalance = true;
    const LatentDataset ds = generate(spec);
    const double ps[] = {8.0 / 15.0, 4.0 / 15.0, 2.0 / 15.0, 1.0 / 15.0};
    for (int c = 0; c < 4; ++c) {
      const double expected = 4000.0 * ps[c];
      const double sigma3 = 3.0 * std::sqrt(4000.0 * ps[c] * (1.0 - ps[c]));
      CHECK(std::abs(ds.class_members[c].size() - expected) <= sigma3);
    }
    CHECK(ds.class_members[0].size() > ds.class_members[1].size());
    CHECK(ds.class_members[1].size() > ds.class_members[2].size());
    CHECK(ds.class_members[2].size() > ds.class_members[3].size());
  }
}

TEST_CASE("positive sampling stays in class and skips the query") {
  LatentDataset ds;
  ds.labels.resize(5);
  ds.labels << 0, 1, 0, 1, 0;
  ds.class_members = {{0, 2, 4}, {1, 3}};
  Rng rng(51);

  SUBCASE("partner shares the label and differs from the query") {
    for (int t = 0; t < 500; ++t) {
      const int p = sample_positive_for(ds, 2, rng);
      CHECK((p == 0 || p == 4));
    }
  }
  SUBCASE("two-member class always returns the other member") {
    for (int t = 0; t < 100; ++t)
      CHECK(sample_positive_for(ds, 1, rng) == 3);
  }
  SUBCASE("index bounds") {
    CHECK_THROWS_AS(sample_positive_for(ds, -1, rng), std::out_of_range);
    CHECK_THROWS_AS(sample_positive_for(ds, 5, rng), std::out_of_range);
  }
}

TEST_CASE("singleton classes are rejected") {
  LatentDataset ds;
  ds.labels.resize(3);
  ds.labels << 0, 0, 1;
  ds.class_members = {{0, 1}, {2}};
  Rng rng(52);
  CHECK_THROWS_AS(sample_positive_for(ds, 2, rng), SingletonClass);
}

TEST_CASE("positive sampling is uniform over the candidates") {
  LatentDataset ds;
  ds.labels.resize(5);
  ds.labels << 0, 0, 0, 0, 0;
  ds.class_members = {{0, 1, 2, 3, 4}};
  Rng rng(53);
  // partner of 2 is uniform over {0, 1, 3, 4}
  int counts[5] = {0, 0, 0, 0, 0};
  const int draws = 8000;
  for (int t = 0; t < draws; ++t) ++counts[sample_positive_for(ds, 2, rng)];
  CHECK(counts[2] == 0);
  double chi2 = 0.0;
  const double expected = draws / 4.0;
  for (int i : {0, 1, 3, 4}) {
    const double dlt = counts[i] - expected;
    chi2 += dlt * dlt / expected;
  }
  CHECK(chi2 < 11.345);  // chi-square df=3 at the 1% level
}

TEST_CASE("sample_positive_pair returns a valid in-class pair") {
  const LatentDataset ds = generate(small_spec());
  Rng rng(54);
  for (int t = 0; t < 400; ++t) {
    const auto [i, j] = sample_positive_pair(ds, rng);
    CHECK(i >= 0);
    CHECK(i < 300);
    CHECK(j >= 0);
    CHECK(j < 300);
    CHECK(i != j);
    CHECK(ds.labels[i] == ds.labels[j]);
  }
}

TEST_CASE("generation is reproducible per seed") {
  LatentSpec spec = small_spec();
  const LatentDataset d1 = generate(spec);
  const LatentDataset d2 = generate(spec);
  CHECK(d1.observations == d2.observations);
  CHECK(d1.labels == d2.labels);
  spec.seed = 6;
  const LatentDataset d3 = generate(spec);
  CHECK(d1.class_centers != d3.class_centers);
}

TEST_CASE("invalid specs are rejected") {
  LatentSpec spec = small_spec();
  spec.sigma = 0.0;
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
  spec = small_spec();
  spec.latent_dim = 0;
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
  spec = small_spec();
  spec.num_classes = 0;
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
  spec = small_spec();
  spec.samples = 0;
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
}

TEST_CASE("dataset export writes the documented layout") {
  LatentSpec spec;
  spec.latent_dim = 2;  // ambient 3
  spec.num_classes = 2;
  spec.samples = 3;
  spec.obs_dim = 2;
  spec.seed = 55;
  const LatentDataset ds = generate(spec);

  const auto dir = std::filesystem::temp_directory_path() / "normlab_test_csv";
  std::filesystem::create_directories(dir);
  const auto data_path = dir / "data.csv";
  const auto meta_path = dir / "meta.csv";
  write_dataset_csv(ds, data_path, meta_path);

  const auto data = read_lines(data_path);
  REQUIRE(data.size() == 4);
  CHECK(data[0] == "label,obs_0,obs_1");
  for (int s = 0; s < 3; ++s) {
    const std::string& line = data[s + 1];
    const auto c1 = line.find(',');
    CHECK(line.substr(0, c1) == std::to_string(ds.labels[s]));
    // round-trip the remaining two floats
    const auto c2 = line.find(',', c1 + 1);
    CHECK(std::stod(line.substr(c1 + 1, c2 - c1 - 1)) == ds.observations(s, 0));
    CHECK(std::stod(line.substr(c2 + 1)) == ds.observations(s, 1));
  }

  const auto meta = read_lines(meta_path);
  REQUIRE(meta.size() == 1 + 2 + 2);  // header, 2 centers, 2 generator columns
  CHECK(meta[0] == "kind,index,v_0,v_1,v_2");
  CHECK(meta[1].substr(0, 9) == "center,0,");
  CHECK(meta[3].substr(0, 16) == "generator_col,0,");

  std::filesystem::remove_all(dir);
}
