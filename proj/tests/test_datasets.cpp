#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <Eigen/Dense>

#include "advlab/datasets.hpp"
#include "advlab/error.hpp"
#include "advlab/rng.hpp"

using namespace advlab;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
  const fs::path dir = fs::temp_directory_path() / "advlab_dataset_tests";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << content;
  return p;
}

void check_unit_box(const Dataset& d) {
  for (const auto& s : d.samples) {
    for (double v : s.features) CHECK((v >= 0.0 && v <= 1.0));
  }
}

// Plain logistic regression by full-batch gradient descent.
double linear_probe_accuracy(const Dataset& d) {
  double w0 = 0, w1 = 0, b = 0;
  for (int it = 0; it < 3000; ++it) {
    double g0 = 0, g1 = 0, gb = 0;
    for (const auto& s : d.samples) {
      const double z = w0 * s.features[0] + w1 * s.features[1] + b;
      const double r = 1.0 / (1.0 + std::exp(-z)) - static_cast<double>(s.label());
      g0 += r * s.features[0];
      g1 += r * s.features[1];
      gb += r;
    }
    const double n = static_cast<double>(d.size());
    w0 -= 2.0 * g0 / n;
    w1 -= 2.0 * g1 / n;
    b -= 2.0 * gb / n;
  }
  std::size_t ok = 0;
  for (const auto& s : d.samples) {
    const double z = w0 * s.features[0] + w1 * s.features[1] + b;
    ok += (z > 0.0 ? 1u : 0u) == s.label();
  }
  return static_cast<double>(ok) / d.size();
}

Dataset from_points(const std::vector<std::vector<double>>& pts) {
  Dataset d;
  d.dim = pts[0].size();
  d.num_classes = 2;
  for (std::size_t i = 0; i < pts.size(); ++i) d.samples.push_back(make_original(i, pts[i], i % 2, 2));
  return d;
}

}  // namespace

TEST_CASE("two Gaussians") {
  const std::array<Point2, 2> centers{{{0.3, 0.4}, {0.7, 0.6}}};
  const auto d = gen_two_gaussians(800, centers, 0.05, 21);
  CHECK(d.size() == 1600);
  CHECK(d.class_counts() == std::vector<std::size_t>{800, 800});
  check_unit_box(d);
  CHECK(d == gen_two_gaussians(800, centers, 0.05, 21));
  CHECK_FALSE(d == gen_two_gaussians(800, centers, 0.05, 22));
  for (std::size_t c = 0; c < 2; ++c) {
    double mx = 0, my = 0;
    for (const auto& s : d.samples) {
      if (s.label() != c) continue;
      mx += s.features[0] / 800.0;
      my += s.features[1] / 800.0;
    }
    const double bound = 3.0 * 0.05 / std::sqrt(800.0);
    CHECK(std::abs(mx - centers[c][0]) <= bound);
    CHECK(std::abs(my - centers[c][1]) <= bound);
  }
  const auto tight = gen_two_gaussians(50, centers, 1e-12, 1);
  for (const auto& s : tight.samples) {
    CHECK(std::abs(s.features[0] - centers[s.label()][0]) < 1e-9);
    CHECK(std::abs(s.features[1] - centers[s.label()][1]) < 1e-9);
  }
  CHECK_THROWS_AS(gen_two_gaussians(10, centers, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(gen_two_gaussians(10, {{{1.2, 0.5}, {0.5, 0.5}}}, 0.1, 1), ValidationError);
}

TEST_CASE("rings") {
  const std::array<double, 2> radii{0.15, 0.35};
  const auto exact = gen_rings(200, radii, 0.0, 4);
  CHECK(exact.class_counts() == std::vector<std::size_t>{200, 200});
  for (const auto& s : exact.samples) {
    const double r = std::hypot(s.features[0] - 0.5, s.features[1] - 0.5);
    CHECK(r == doctest::Approx(radii[s.label()]).epsilon(1e-12));
  }
  const auto noisy = gen_rings(400, radii, 0.03, 4);
  check_unit_box(noisy);
  CHECK(noisy == gen_rings(400, radii, 0.03, 4));
  CHECK(linear_probe_accuracy(noisy) <= 0.75);
  CHECK_THROWS_AS(gen_rings(10, {0.3, 0.6}, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(gen_rings(10, {0.3, 0.2}, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(gen_rings(10, {0.0, 0.2}, 0.0, 1), ValidationError);
}

TEST_CASE("csv loading") {
  SUBCASE("single row maps features to zero") {
    const auto p = temp_file("one.csv", "3.5,7,1\n");
    const auto loaded = load_csv(p, CsvOptions{2, ',', false});
    REQUIRE(loaded.data.size() == 1);
    CHECK(loaded.data.samples[0].features == std::vector<double>{0.0, 0.0});
    CHECK(loaded.data.samples[0].label() == 1);
  }
  SUBCASE("write then load round-trips") {
    Dataset d = from_points({{0.0, 1.0, 0.25}, {1.0, 0.0, 1.0 / 3.0}, {0.125, 0.5, 0.0}, {0.7, 0.3, 1.0}});
    const auto p = fs::temp_directory_path() / "advlab_dataset_tests" / "rt.csv";
    write_csv(p, d);
    const auto back = load_csv(p, CsvOptions{3, ',', false});
    REQUIRE(back.data.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(back.data.samples[i].label() == d.samples[i].label());
      for (std::size_t c = 0; c < 3; ++c) {
        CHECK(std::abs(back.data.samples[i].features[c] - d.samples[i].features[c]) <= 1e-12);
      }
    }
  }
  SUBCASE("three classes, header, custom delimiter") {
    const auto p = temp_file("three.csv", "label;a;b\n0;1;2\n2;3;4\n1;5;0\n");
    const auto loaded = load_csv(p, CsvOptions{0, ';', true});
    CHECK(loaded.data.num_classes == 3);
    CHECK(loaded.data.samples[0].soft_label.size() == 3);
    CHECK(loaded.data.samples[1].features == std::vector<double>{0.5, 1.0});
    CHECK(loaded.normalization.min == std::vector<double>{1.0, 0.0});
    CHECK(loaded.normalization.max == std::vector<double>{5.0, 4.0});
  }
  SUBCASE("errors carry line numbers") {
    auto line_of = [](const fs::path& p, std::optional<std::size_t> classes = std::nullopt,
                      std::optional<MinMaxNormalization> norm = std::nullopt) -> std::size_t {
      try {
        load_csv(p, CsvOptions{2, ',', false}, norm, classes);
      } catch (const ParseError& e) {
        return e.line();
      }
      return 0;
    };
    CHECK(line_of(temp_file("ragged.csv", "1,2,0\n3,4\n")) == 2);
    CHECK(line_of(temp_file("nan.csv", "1,2,0\n3,4,1\nx,4,1\n")) == 3);
    CHECK(line_of(temp_file("label.csv", "1,2,0\n3,4,1.5\n")) == 2);
    const MinMaxNormalization norm{{0, 0}, {1, 1}};
    CHECK(line_of(temp_file("unseen.csv", "0.1,0.2,0\n0.3,0.4,5\n"), 2, norm) == 2);
  }
}

TEST_CASE("pca") {
  CounterRng rng(StreamKey::derive(31, "pca"));
  SUBCASE("full-rank 2-D data is a rotation of the centred data") {
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 50; ++i) pts.push_back({rng.uniform01(), 0.3 * rng.uniform01() + 0.2});
    const auto d = from_points(pts);
    const auto r = pca_project(d, 2);
    for (const auto& s : d.samples) {
      std::vector<double> c{s.features[0] - r.mean[0], s.features[1] - r.mean[1]};
      std::vector<double> rec(2, 0.0);
      for (std::size_t k = 0; k < 2; ++k) {
        const double coef = c[0] * r.basis(k, 0) + c[1] * r.basis(k, 1);
        for (std::size_t j = 0; j < 2; ++j) rec[j] += coef * r.basis(k, j);
      }
      CHECK(std::abs(rec[0] - c[0]) < 1e-12);
      CHECK(std::abs(rec[1] - c[1]) < 1e-12);
    }
    for (const auto& s : r.projected.samples) {
      for (double v : s.features) CHECK((v >= 0.0 && v <= 1.0));
    }
  }
  SUBCASE("collinear data has one component") {
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 30; ++i) {
      const double t = rng.uniform01();
      pts.push_back({0.1 + 0.5 * t, 0.9 - 0.4 * t, 0.2 + 0.1 * t});
    }
    const auto r = pca_project(from_points(pts), 1);
    CHECK(std::abs(r.explained_variance_ratio[0] - 1.0) <= 1e-9);
  }
  SUBCASE("top-2 eigenpairs of random 5-D data match a dense solver") {
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 200; ++i) {
      std::vector<double> p(5);
      for (std::size_t j = 0; j < 5; ++j) p[j] = std::pow(rng.uniform01(), 1.0 + j);
      pts.push_back(p);
    }
    const auto d = from_points(pts);
    const auto r = pca_project(d, 2);

    Eigen::MatrixXd x(200, 5);
    for (int i = 0; i < 200; ++i) {
      for (int j = 0; j < 5; ++j) x(i, j) = pts[i][j];
    }
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd c = x.rowwise() - mean;
    const Eigen::MatrixXd cov = (c.transpose() * c) / 200.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    for (int k = 0; k < 2; ++k) {
      const int idx = 4 - k;  // ascending order from the solver
      CHECK(std::abs(r.eigenvalues[k] - es.eigenvalues()(idx)) <= 1e-6);
      Eigen::VectorXd v(5);
      for (int j = 0; j < 5; ++j) v(j) = r.basis(k, j);
      const double sign = v.dot(es.eigenvectors().col(idx)) < 0 ? -1.0 : 1.0;
      CHECK((v - sign * es.eigenvectors().col(idx)).cwiseAbs().maxCoeff() <= 1e-6);
    }
    for (std::size_t a = 0; a < 2; ++a) {
      for (std::size_t b = 0; b < 2; ++b) {
        double dot = 0.0;
        for (std::size_t j = 0; j < 5; ++j) dot += r.basis(a, j) * r.basis(b, j);
        CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) <= 1e-9);
      }
    }
  }
  CHECK_THROWS_AS(pca_project(from_points({{0.1, 0.2}, {0.3, 0.1}}), 3), ValidationError);
}

TEST_CASE("stratified split") {
  const auto d = gen_two_gaussians(40, {{{0.3, 0.3}, {0.7, 0.7}}}, 0.1, 3);
  const auto [train, test] = split(d, 0.5, 9);
  CHECK(train.class_counts() == std::vector<std::size_t>{20, 20});
  CHECK(test.class_counts() == std::vector<std::size_t>{20, 20});
  CHECK(test.split == Split::test);
  for (std::size_t i = 0; i < train.size(); ++i) CHECK(train.samples[i].id == i);

  auto key = [](const LabeledSample& s) { return std::pair{s.features, s.label()}; };
  std::vector<std::pair<std::vector<double>, std::size_t>> all, parts;
  for (const auto& s : d.samples) all.push_back(key(s));
  for (const auto& s : train.samples) parts.push_back(key(s));
  for (const auto& s : test.samples) parts.push_back(key(s));
  std::sort(all.begin(), all.end());
  std::sort(parts.begin(), parts.end());
  CHECK(all == parts);

  const auto again = split(d, 0.5, 9);
  CHECK(again.first == train);
  CHECK(again.second == test);

  Dataset tiny = from_points({{0.1, 0.1}, {0.2, 0.2}, {0.3, 0.3}});  // class 1 has one sample
  CHECK_THROWS_AS(split(tiny, 0.5, 1), ValidationError);
  CHECK_THROWS_AS(split(d, 1.0, 1), ValidationError);
}
