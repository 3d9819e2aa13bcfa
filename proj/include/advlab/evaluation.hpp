#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "advlab/attacks.hpp"
#include "advlab/dataset.hpp"
#include "advlab/mlp.hpp"

namespace advlab {

/// Fraction of samples whose argmax prediction matches argmax(label).
double eval_natural(const MlpModel& model, const Dataset& data);

/// Attacks every sample from its natural point (init forced to natural)
/// and scores the prediction on the adversarial variant.
double eval_robust(const MlpModel& model, const Dataset& data, const AttackSpec& attack,
                   std::size_t threads = 1);

enum class InterpRule { original, interpolated };

/// Attacks each sample and returns the fraction meeting the matching
/// attackability predicate. Samples must share one provenance kind.
double attackable_ratio(const MlpModel& model, std::span<const LabeledSample> samples,
                        const AttackSpec& attack, InterpRule rule, std::size_t threads = 1);

/// Same predicate over variants that were already generated.
double attackable_ratio_from_variants(const MlpModel& model, std::span<const LabeledSample> samples,
                                      const DenseMatrix& variants, InterpRule rule);

struct SegmentReport {
  double deviation = 0.0;  // D: mean |p(t) - L(t)|
  double sharpness = 0.0;  // S: max |p(t+dt) - p(t)| / dt
};

struct LinearityReport {
  std::vector<SegmentReport> segments;
  double mean_deviation = 0.0;
  double max_deviation = 0.0;
  double mean_sharpness = 0.0;
  double max_sharpness = 0.0;
};

/// D and S for one confidence profile sampled on a uniform t grid over [0,1].
SegmentReport profile_linearity(std::span<const double> profile);

using Segment = std::pair<std::vector<double>, std::vector<double>>;

/// Class-1 softmax confidence along each segment a + t (b - a) on
/// `samples_per_segment` uniform t values.
LinearityReport linearity_probe(const MlpModel& model, const std::vector<Segment>& segments,
                                std::size_t samples_per_segment = 101);

/// `count` random cross-class pairs of samples plus the class-0 / class-1
/// mean pair.
std::vector<Segment> default_probe_segments(const Dataset& data, std::size_t count,
                                            std::uint64_t seed);

struct GridBounds {
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;
};

struct ConfidenceGrid {
  std::size_t resolution_x = 0;
  std::size_t resolution_y = 0;
  std::size_t num_classes = 0;
  /// Row-major over (y outer, x inner): x, y, p_0 ... p_{C-1}.
  std::vector<std::vector<double>> rows;
};

ConfidenceGrid confidence_grid(const MlpModel& model, const GridBounds& bounds,
                               std::size_t resolution_x, std::size_t resolution_y);

void write_grid(std::ostream& out, const ConfidenceGrid& grid);
void write_linearity_report(std::ostream& out, const LinearityReport& report);
LinearityReport read_linearity_report(std::istream& in);

}  // namespace advlab
