#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "advlab/matrix.hpp"

namespace advlab {

/// Where a sample came from. Interpolated samples remember both parents so
/// their features can be rebuilt bit for bit and attackability can
/// be judged against either parent class.
struct Provenance {
  bool interpolated = false;
  std::size_t parent_i = 0;
  std::size_t parent_j = 0;
  std::size_t parent_class_i = 0;
  std::size_t parent_class_j = 0;
  double lambda = 1.0;

  bool operator==(const Provenance&) const = default;
};

struct LabeledSample {
  std::size_t id = 0;  // index in the originating dataset for originals
  std::vector<double> features;
  std::vector<double> soft_label;
  Provenance provenance;

  std::size_t label() const;  // argmax(soft_label), ties low
  bool operator==(const LabeledSample&) const = default;
};

LabeledSample make_original(std::size_t id, std::vector<double> features, std::size_t label,
                            std::size_t num_classes);

enum class Split { train, test };

struct Dataset {
  std::vector<LabeledSample> samples;
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  Split split = Split::train;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  /// Checks the unit-box, one-hot and class-range invariants.
  void validate() const;
  std::vector<std::size_t> class_counts() const;

  bool operator==(const Dataset&) const = default;
};

DenseMatrix feature_matrix(std::span<const LabeledSample> samples);
DenseMatrix label_matrix(std::span<const LabeledSample> samples);
DenseMatrix feature_matrix(const Dataset& data);
DenseMatrix label_matrix(const Dataset& data);

}  // namespace advlab
