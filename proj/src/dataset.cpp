#include "advlab/dataset.hpp"

#include <string>

#include "advlab/error.hpp"

namespace advlab {

std::size_t LabeledSample::label() const { return argmax(soft_label); }

LabeledSample make_original(std::size_t id, std::vector<double> features, std::size_t label,
                            std::size_t num_classes) {
  if (label >= num_classes) throw ValidationError("label " + std::to_string(label) + " out of range");
  LabeledSample s;
  s.id = id;
  s.features = std::move(features);
  s.soft_label.assign(num_classes, 0.0);
  s.soft_label[label] = 1.0;
  return s;
}

void Dataset::validate() const {
  for (const auto& s : samples) {
    if (s.features.size() != dim) throw DimensionError("dataset: sample feature dim mismatch");
    if (s.soft_label.size() != num_classes) throw DimensionError("dataset: label width mismatch");
    for (const double v : s.features) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError("dataset: sample " + std::to_string(s.id) + " leaves [0,1]^d");
      }
    }
    std::size_t ones = 0;
    for (const double v : s.soft_label) {
      if (v == 1.0) ++ones;
      else if (v != 0.0) throw ValidationError("dataset: labels must be one-hot");
    }
    if (ones != 1 || s.provenance.interpolated) throw ValidationError("dataset: labels must be one-hot");
  }
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto& s : samples) ++counts[s.label()];
  return counts;
}

DenseMatrix feature_matrix(std::span<const LabeledSample> samples) {
  if (samples.empty()) return {};
  DenseMatrix m(samples.size(), samples.front().features.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].features.size() != m.cols()) throw DimensionError("feature_matrix: ragged samples");
    std::copy(samples[i].features.begin(), samples[i].features.end(), m.row(i).begin());
  }
  return m;
}

DenseMatrix label_matrix(std::span<const LabeledSample> samples) {
  if (samples.empty()) return {};
  DenseMatrix m(samples.size(), samples.front().soft_label.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].soft_label.size() != m.cols()) throw DimensionError("label_matrix: ragged samples");
    std::copy(samples[i].soft_label.begin(), samples[i].soft_label.end(), m.row(i).begin());
  }
  return m;
}

DenseMatrix feature_matrix(const Dataset& data) { return feature_matrix(std::span(data.samples)); }
DenseMatrix label_matrix(const Dataset& data) { return label_matrix(std::span(data.samples)); }

}  // namespace advlab
