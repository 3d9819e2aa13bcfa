#include "advlab/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "advlab/error.hpp"
#include "advlab/rng.hpp"

namespace advlab {

namespace {

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

void renumber(Dataset& d) {
  for (std::size_t i = 0; i < d.samples.size(); ++i) d.samples[i].id = i;
}

}  // namespace

Dataset gen_two_gaussians(std::size_t n_per_class, std::array<Point2, 2> centers, double sigma,
                          std::uint64_t seed) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("gen_two_gaussians: sigma must be > 0");
  for (const auto& c : centers) {
    if (!(c[0] > 0.0 && c[0] < 1.0 && c[1] > 0.0 && c[1] < 1.0)) {
      throw ValidationError("gen_two_gaussians: centers must lie inside (0,1)^2");
    }
  }
  Dataset d;
  d.dim = 2;
  d.num_classes = 2;
  for (std::size_t cls = 0; cls < 2; ++cls) {
    CounterRng rng(StreamKey::derive(seed, "two_gaussians", cls));
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const double x = clip01(centers[cls][0] + sigma * rng.normal());
      const double y = clip01(centers[cls][1] + sigma * rng.normal());
      d.samples.push_back(make_original(0, {x, y}, cls, 2));
    }
  }
  renumber(d);
  return d;
}

Dataset gen_rings(std::size_t n_per_class, std::array<double, 2> radii, double noise,
                  std::uint64_t seed) {
  if (!(radii[0] > 0.0 && radii[0] < radii[1] && radii[1] <= 0.5)) {
    throw ValidationError("gen_rings: need 0 < r_inner < r_outer <= 0.5");
  }
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ValidationError("gen_rings: noise must be >= 0");
  Dataset d;
  d.dim = 2;
  d.num_classes = 2;
  for (std::size_t cls = 0; cls < 2; ++cls) {
    CounterRng rng(StreamKey::derive(seed, "rings", cls));
    for (std::size_t i = 0; i < n_per_class; ++i) {
      const double theta = 2.0 * std::numbers::pi * rng.uniform01();
      const double r = radii[cls] + (noise > 0.0 ? noise * rng.normal() : 0.0);
      const double x = clip01(0.5 + r * std::cos(theta));
      const double y = clip01(0.5 + r * std::sin(theta));
      d.samples.push_back(make_original(0, {x, y}, cls, 2));
    }
  }
  renumber(d);
  return d;
}

double MinMaxNormalization::apply(std::size_t column, double value) const {
  const double lo = min.at(column);
  const double hi = max.at(column);
  if (hi == lo) return 0.0;
  return clip01((value - lo) / (hi - lo));
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, delimiter)) cells.push_back(cell);
  if (!line.empty() && line.back() == delimiter) cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& text, std::size_t line) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v)) {
    throw ParseError("non-numeric cell '" + t + "'", line);
  }
  return v;
}

}  // namespace

CsvDataset load_csv(const std::filesystem::path& path, const CsvOptions& options,
                    const std::optional<MinMaxNormalization>& reuse,
                    std::optional<std::size_t> num_classes) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open CSV file " + path.string());

  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> line_numbers;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  bool skipped_header = !options.header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    const auto cells = split_line(line, options.delimiter);
    if (width == 0) {
      width = cells.size();
      if (options.label_column >= width) throw ParseError("label column out of range", line_no);
      if (width < 2) throw ParseError("need at least one feature column and a label", line_no);
    } else if (cells.size() != width) {
      throw ParseError("ragged row: expected " + std::to_string(width) + " cells, got " +
                           std::to_string(cells.size()),
                       line_no);
    }
    std::vector<double> features;
    features.reserve(width - 1);
    for (std::size_t c = 0; c < width; ++c) {
      const double v = parse_real(cells[c], line_no);
      if (c == options.label_column) {
        if (v < 0.0 || v != std::floor(v)) throw ParseError("label must be a non-negative integer", line_no);
        labels.push_back(static_cast<std::size_t>(v));
      } else {
        features.push_back(v);
      }
    }
    rows.push_back(std::move(features));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw ValidationError("CSV file " + path.string() + " has no data rows");

  const std::size_t dim = width - 1;
  MinMaxNormalization norm;
  if (reuse) {
    if (reuse->min.size() != dim) throw ValidationError("reused normalization has wrong width");
    norm = *reuse;
  } else {
    norm.min.assign(dim, 0.0);
    norm.max.assign(dim, 0.0);
    for (std::size_t c = 0; c < dim; ++c) {
      norm.min[c] = norm.max[c] = rows[0][c];
      for (const auto& r : rows) {
        norm.min[c] = std::min(norm.min[c], r[c]);
        norm.max[c] = std::max(norm.max[c], r[c]);
      }
    }
  }

  std::size_t classes = 0;
  if (num_classes) {
    classes = *num_classes;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= classes) {
        throw ParseError("unseen label " + std::to_string(labels[i]), line_numbers[i]);
      }
    }
  } else {
    classes = *std::max_element(labels.begin(), labels.end()) + 1;
  }
  if (classes < 2) classes = 2;

  CsvDataset out;
  out.normalization = norm;
  out.data.dim = dim;
  out.data.num_classes = classes;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<double> f(dim);
    for (std::size_t c = 0; c < dim; ++c) f[c] = norm.apply(c, rows[i][c]);
    out.data.samples.push_back(make_original(i, std::move(f), labels[i], classes));
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& data, char delimiter, bool header) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write CSV file " + path.string());
  out.precision(17);
  if (header) {
    for (std::size_t c = 0; c < data.dim; ++c) out << 'x' << c << delimiter;
    out << "label\n";
  }
  for (const auto& s : data.samples) {
    for (const double v : s.features) out << v << delimiter;
    out << s.label() << '\n';
  }
}

PcaResult pca_project(const Dataset& data, std::size_t k) {
  const std::size_t d = data.dim;
  if (k == 0 || k > d) throw ValidationError("pca_project: need 1 <= k <= d");
  if (data.empty()) throw ValidationError("pca_project: empty dataset");
  const std::size_t n = data.size();

  PcaResult res;
  res.mean.assign(d, 0.0);
  for (const auto& s : data.samples) {
    for (std::size_t c = 0; c < d; ++c) res.mean[c] += s.features[c];
  }
  for (auto& m : res.mean) m /= static_cast<double>(n);

  DenseMatrix cov(d, d);
  for (const auto& s : data.samples) {
    for (std::size_t a = 0; a < d; ++a) {
      const double da = s.features[a] - res.mean[a];
      for (std::size_t b = 0; b < d; ++b) cov(a, b) += da * (s.features[b] - res.mean[b]);
    }
  }
  for (auto& v : cov.values()) v /= static_cast<double>(n);
  double total_variance = 0.0;
  for (std::size_t a = 0; a < d; ++a) total_variance += cov(a, a);

  res.basis = DenseMatrix(k, d);
  DenseMatrix work = cov;
  for (std::size_t comp = 0; comp < k; ++comp) {
    std::vector<double> v(d);
    // Deterministic start that is not orthogonal to any axis.
    for (std::size_t c = 0; c < d; ++c) v[c] = 1.0 + 0.1 * static_cast<double>(c + comp);
    auto normalize = [](std::vector<double>& x) {
      double nrm = 0.0;
      for (const double e : x) nrm += e * e;
      nrm = std::sqrt(nrm);
      if (nrm > 0.0) {
        for (auto& e : x) e /= nrm;
      }
      return nrm;
    };
    // Keep the iterate orthogonal to earlier components so that zero
    // eigenvalues still yield an orthonormal basis.
    auto orthogonalize = [&](std::vector<double>& x) {
      for (std::size_t p = 0; p < comp; ++p) {
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += x[c] * res.basis(p, c);
        for (std::size_t c = 0; c < d; ++c) x[c] -= dot * res.basis(p, c);
      }
    };
    orthogonalize(v);
    if (normalize(v) == 0.0) {
      v.assign(d, 0.0);
      v[comp] = 1.0;
      orthogonalize(v);
      normalize(v);
    }
    for (int it = 0; it < 1000; ++it) {
      std::vector<double> w(d, 0.0);
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < d; ++b) w[a] += work(a, b) * v[b];
      }
      orthogonalize(w);
      if (normalize(w) == 0.0) break;  // remaining spectrum is zero
      // Fix the sign so the iteration cannot oscillate.
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += w[c] * v[c];
      if (dot < 0.0) {
        for (auto& e : w) e = -e;
      }
      double delta = 0.0;
      for (std::size_t c = 0; c < d; ++c) delta = std::max(delta, std::abs(w[c] - v[c]));
      v = std::move(w);
      if (delta < 1e-12) break;
    }
    double lambda = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      double row = 0.0;
      for (std::size_t b = 0; b < d; ++b) row += cov(a, b) * v[b];
      lambda += v[a] * row;
    }
    for (std::size_t c = 0; c < d; ++c) res.basis(comp, c) = v[c];
    res.eigenvalues.push_back(lambda);
    res.explained_variance_ratio.push_back(total_variance > 0.0 ? lambda / total_variance : 0.0);
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) work(a, b) -= lambda * v[a] * v[b];
    }
  }

  std::vector<std::vector<double>> coords(n, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t comp = 0; comp < k; ++comp) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += (data.samples[i].features[c] - res.mean[c]) * res.basis(comp, c);
      coords[i][comp] = acc;
    }
  }
  res.output_normalization.min.assign(k, 0.0);
  res.output_normalization.max.assign(k, 0.0);
  for (std::size_t comp = 0; comp < k; ++comp) {
    res.output_normalization.min[comp] = res.output_normalization.max[comp] = coords[0][comp];
    for (const auto& c : coords) {
      res.output_normalization.min[comp] = std::min(res.output_normalization.min[comp], c[comp]);
      res.output_normalization.max[comp] = std::max(res.output_normalization.max[comp], c[comp]);
    }
  }
  res.projected.dim = k;
  res.projected.num_classes = data.num_classes;
  res.projected.split = data.split;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> f(k);
    for (std::size_t comp = 0; comp < k; ++comp) f[comp] = res.output_normalization.apply(comp, coords[i][comp]);
    LabeledSample s = data.samples[i];
    s.features = std::move(f);
    res.projected.samples.push_back(std::move(s));
  }
  return res;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError("split: test fraction must lie in (0,1)");
  }
  std::vector<std::vector<std::size_t>> by_class(data.num_classes);
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data.samples[i].label()].push_back(i);

  Dataset train;
  Dataset test;
  train.dim = test.dim = data.dim;
  train.num_classes = test.num_classes = data.num_classes;
  train.split = Split::train;
  test.split = Split::test;
  for (std::size_t cls = 0; cls < by_class.size(); ++cls) {
    auto& idx = by_class[cls];
    if (idx.empty()) continue;
    if (idx.size() < 2) {
      throw ValidationError("split: class " + std::to_string(cls) + " has fewer than two samples");
    }
    CounterRng rng(StreamKey::derive(seed, "split", cls));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::sort(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      (i < n_test ? test : train).samples.push_back(data.samples[idx[i]]);
    }
  }
  renumber(train);
  renumber(test);
  return {std::move(train), std::move(test)};
}

}  // namespace advlab
