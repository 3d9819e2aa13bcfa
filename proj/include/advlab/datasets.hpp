#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "advlab/dataset.hpp"

namespace advlab {

using Point2 = std::array<double, 2>;

/// Two isotropic Gaussian clusters (class 0 at centers[0], class 1 at
/// centers[1]), clipped into the unit square.
Dataset gen_two_gaussians(std::size_t n_per_class, std::array<Point2, 2> centers, double sigma,
                          std::uint64_t seed);

/// Concentric annuli around (0.5, 0.5): class 0 inner radius, class 1 outer.
/// `noise` is the standard deviation of the radial jitter.
Dataset gen_rings(std::size_t n_per_class, std::array<double, 2> radii, double noise,
                  std::uint64_t seed);

struct CsvOptions {
  std::size_t label_column = 0;  // may be given as from-the-end via negative in config
  char delimiter = ',';
  bool header = false;
};

/// Per-column min-max constants; a column with min == max maps to 0.
struct MinMaxNormalization {
  std::vector<double> min;
  std::vector<double> max;

  double apply(std::size_t column, double value) const;
};

struct CsvDataset {
  Dataset data;
  MinMaxNormalization normalization;
};

/// Reads a rectangular numeric table with integer labels >= 0. Features
/// are min-max normalised per column; pass the constants from a training file
/// (and its class count) to load a matching test file.
CsvDataset load_csv(const std::filesystem::path& path, const CsvOptions& options,
                    const std::optional<MinMaxNormalization>& reuse = std::nullopt,
                    std::optional<std::size_t> num_classes = std::nullopt);

/// Writes features followed by the integer label (label column last).
void write_csv(const std::filesystem::path& path, const Dataset& data, char delimiter = ',',
               bool header = false);

struct PcaResult {
  Dataset projected;
  DenseMatrix basis;  // k x d, orthonormal rows
  std::vector<double> mean;
  std::vector<double> eigenvalues;  // of the 1/n covariance, descending
  std::vector<double> explained_variance_ratio;
  MinMaxNormalization output_normalization;  // applied to projected coordinates
};

/// Top-k principal directions by power iteration with deflation (at most
/// 1000 iterations per component or until the update moves less than 1e-12).
/// Projected coordinates are min-max renormalised into [0,1]^k.
PcaResult pca_project(const Dataset& data, std::size_t k = 2);

/// Stratified split; every class needs at least two samples. Sample ids are
/// renumbered to the position inside their split.
std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed);

}  // namespace advlab
