#include "advlab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "advlab/error.hpp"
#include "advlab/interpolation.hpp"
#include "advlab/losses.hpp"
#include "advlab/rng.hpp"

namespace advlab {

namespace {

std::size_t count_correct(const DenseMatrix& logits, std::span<const LabeledSample> samples) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (argmax(logits.row(i)) == samples[i].label()) ++correct;
  }
  return correct;
}

}  // namespace

double eval_natural(const MlpModel& model, const Dataset& data) {
  if (data.empty()) throw ValidationError("eval_natural: empty dataset");
  const DenseMatrix logits = forward(model, feature_matrix(data));
  return static_cast<double>(count_correct(logits, data.samples)) / static_cast<double>(data.size());
}

double eval_robust(const MlpModel& model, const Dataset& data, const AttackSpec& attack,
                   std::size_t threads) {
  if (data.empty()) throw ValidationError("eval_robust: empty dataset");
  AttackSpec spec = attack;
  spec.init = AttackInit::natural;
  const DenseMatrix x = feature_matrix(data);
  DenseMatrix x_adv = x;
  if (spec.epsilon > 0.0) {
    AttackContext ctx;
    ctx.threads = threads;
    x_adv = run_attack(model, x, label_matrix(data), spec, ctx);
  }
  const DenseMatrix logits = forward(model, x_adv);
  return static_cast<double>(count_correct(logits, data.samples)) / static_cast<double>(data.size());
}

namespace {

InterpRule homogeneous_rule(std::span<const LabeledSample> samples) {
  if (samples.empty()) throw ValidationError("attackable_ratio: no samples");
  const bool interp = samples.front().provenance.interpolated;
  for (const auto& s : samples) {
    if (s.provenance.interpolated != interp) {
      throw ContractError("attackable_ratio: samples mix original and interpolated provenance");
    }
  }
  return interp ? InterpRule::interpolated : InterpRule::original;
}

}  // namespace

double attackable_ratio_from_variants(const MlpModel& model, std::span<const LabeledSample> samples,
                                      const DenseMatrix& variants, InterpRule rule) {
  if (homogeneous_rule(samples) != rule) {
    throw ContractError("attackable_ratio: rule does not match sample provenance");
  }
  if (variants.rows() != samples.size()) throw DimensionError("attackable_ratio: variant count mismatch");
  const DenseMatrix logits = forward(model, variants);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::size_t pred = argmax(logits.row(i));
    const bool hit = rule == InterpRule::original ? attackable_original(pred, samples[i])
                                                  : attackable_interpolated(pred, samples[i]);
    if (hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

double attackable_ratio(const MlpModel& model, std::span<const LabeledSample> samples,
                        const AttackSpec& attack, InterpRule rule, std::size_t threads) {
  if (homogeneous_rule(samples) != rule) {
    throw ContractError("attackable_ratio: rule does not match sample provenance");
  }
  const DenseMatrix x = feature_matrix(samples);
  AttackContext ctx;
  ctx.threads = threads;
  const DenseMatrix x_adv = attack.epsilon > 0.0 ? run_attack(model, x, label_matrix(samples), attack, ctx) : x;
  return attackable_ratio_from_variants(model, samples, x_adv, rule);
}

SegmentReport profile_linearity(std::span<const double> p) {
  if (p.size() < 3) throw ValidationError("linearity probe needs at least 3 points per segment");
  const std::size_t n = p.size();
  const double dt = 1.0 / static_cast<double>(n - 1);
  SegmentReport r;
  double dev = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double linear = p.front() + t * (p.back() - p.front());
    dev += std::abs(p[k] - linear);
  }
  r.deviation = dev / static_cast<double>(n);
  for (std::size_t k = 0; k + 1 < n; ++k) r.sharpness = std::max(r.sharpness, std::abs(p[k + 1] - p[k]) / dt);
  return r;
}

LinearityReport linearity_probe(const MlpModel& model, const std::vector<Segment>& segments,
                                std::size_t samples_per_segment) {
  if (samples_per_segment < 3) throw ValidationError("linearity probe needs at least 3 points per segment");
  if (model.num_classes() < 2) throw ValidationError("linearity probe needs at least two classes");
  LinearityReport report;
  for (const auto& [a, b] : segments) {
    if (a.size() != model.input_dim() || b.size() != model.input_dim()) {
      throw DimensionError("linearity probe: endpoint dim does not match model");
    }
    if (a == b) throw ValidationError("linearity probe: identical segment endpoints");
    DenseMatrix pts(samples_per_segment, a.size());
    for (std::size_t k = 0; k < samples_per_segment; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(samples_per_segment - 1);
      for (std::size_t c = 0; c < a.size(); ++c) pts(k, c) = a[c] + t * (b[c] - a[c]);
    }
    const DenseMatrix prob = softmax(forward(model, pts));
    std::vector<double> profile(samples_per_segment);
    for (std::size_t k = 0; k < samples_per_segment; ++k) profile[k] = prob(k, 1);
    report.segments.push_back(profile_linearity(profile));
  }
  if (!report.segments.empty()) {
    for (const auto& s : report.segments) {
      report.mean_deviation += s.deviation;
      report.mean_sharpness += s.sharpness;
      report.max_deviation = std::max(report.max_deviation, s.deviation);
      report.max_sharpness = std::max(report.max_sharpness, s.sharpness);
    }
    report.mean_deviation /= static_cast<double>(report.segments.size());
    report.mean_sharpness /= static_cast<double>(report.segments.size());
  }
  return report;
}

std::vector<Segment> default_probe_segments(const Dataset& data, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> class0;
  std::vector<std::size_t> class1;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto l = data.samples[i].label();
    if (l == 0) class0.push_back(i);
    else if (l == 1) class1.push_back(i);
  }
  if (class0.empty() || class1.empty()) throw ValidationError("probe segments need samples of classes 0 and 1");
  std::vector<Segment> out;
  CounterRng rng(StreamKey::derive(seed, "probe_segments"));
  for (std::size_t k = 0; k < count; ++k) {
    const auto& a = data.samples[class0[rng.below(class0.size())]].features;
    const auto& b = data.samples[class1[rng.below(class1.size())]].features;
    if (a != b) out.emplace_back(a, b);
  }
  std::vector<double> m0(data.dim, 0.0);
  std::vector<double> m1(data.dim, 0.0);
  for (const auto i : class0) {
    for (std::size_t c = 0; c < data.dim; ++c) m0[c] += data.samples[i].features[c];
  }
  for (const auto i : class1) {
    for (std::size_t c = 0; c < data.dim; ++c) m1[c] += data.samples[i].features[c];
  }
  for (auto& v : m0) v /= static_cast<double>(class0.size());
  for (auto& v : m1) v /= static_cast<double>(class1.size());
  if (m0 != m1) out.emplace_back(std::move(m0), std::move(m1));
  return out;
}

ConfidenceGrid confidence_grid(const MlpModel& model, const GridBounds& bounds,
                               std::size_t resolution_x, std::size_t resolution_y) {
  if (model.input_dim() != 2) throw ContractError("confidence_grid needs a model with 2-D input");
  if (resolution_x == 0 || resolution_y == 0) throw ValidationError("confidence_grid: resolution must be >= 1");
  auto coord = [](double lo, double hi, std::size_t i, std::size_t n) {
    return n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  DenseMatrix pts(resolution_x * resolution_y, 2);
  for (std::size_t iy = 0; iy < resolution_y; ++iy) {
    for (std::size_t ix = 0; ix < resolution_x; ++ix) {
      const std::size_t r = iy * resolution_x + ix;
      pts(r, 0) = coord(bounds.x_min, bounds.x_max, ix, resolution_x);
      pts(r, 1) = coord(bounds.y_min, bounds.y_max, iy, resolution_y);
    }
  }
  const DenseMatrix prob = softmax(forward(model, pts));
  ConfidenceGrid grid{resolution_x, resolution_y, model.num_classes(), {}};
  grid.rows.reserve(pts.rows());
  for (std::size_t r = 0; r < pts.rows(); ++r) {
    std::vector<double> row{pts(r, 0), pts(r, 1)};
    row.insert(row.end(), prob.row(r).begin(), prob.row(r).end());
    grid.rows.push_back(std::move(row));
  }
  return grid;
}

void write_grid(std::ostream& out, const ConfidenceGrid& grid) {
  out << "x,y";
  for (std::size_t c = 0; c < grid.num_classes; ++c) out << ",p" << c;
  out << '\n';
  out.precision(17);
  for (const auto& row : grid.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

// Report layout:
//   segments <n>
//   segment <i> deviation <D> sharpness <S>
//   mean_deviation <v> / max_deviation <v> / mean_sharpness <v> / max_sharpness <v>
void write_linearity_report(std::ostream& out, const LinearityReport& report) {
  out.precision(17);
  out << "segments " << report.segments.size() << '\n';
  for (std::size_t i = 0; i < report.segments.size(); ++i) {
    out << "segment " << i << " deviation " << report.segments[i].deviation << " sharpness "
        << report.segments[i].sharpness << '\n';
  }
  out << "mean_deviation " << report.mean_deviation << '\n';
  out << "max_deviation " << report.max_deviation << '\n';
  out << "mean_sharpness " << report.mean_sharpness << '\n';
  out << "max_sharpness " << report.max_sharpness << '\n';
}

LinearityReport read_linearity_report(std::istream& in) {
  LinearityReport r;
  std::string key;
  std::size_t n = 0;
  if (!(in >> key >> n) || key != "segments") throw ValidationError("linearity report: missing header");
  for (std::size_t i = 0; i < n; ++i) {
    std::string seg, dev, sharp;
    std::size_t idx = 0;
    SegmentReport s;
    if (!(in >> seg >> idx >> dev >> s.deviation >> sharp >> s.sharpness) || seg != "segment") {
      throw ValidationError("linearity report: bad segment line " + std::to_string(i));
    }
    r.segments.push_back(s);
  }
  auto read_named = [&](const char* name, double& v) {
    if (!(in >> key >> v) || key != name) throw ValidationError(std::string("linearity report: missing ") + name);
  };
  read_named("mean_deviation", r.mean_deviation);
  read_named("max_deviation", r.max_deviation);
  read_named("mean_sharpness", r.mean_sharpness);
  read_named("max_sharpness", r.max_sharpness);
  return r;
}

}  // namespace advlab
