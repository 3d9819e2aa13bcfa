#include "advlab/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "advlab/error.hpp"

namespace advlab {

namespace {

constexpr const char* kMagic = "advlab-mlp";
constexpr int kVersion = 1;

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    while (!(current_ >> w)) {
      std::string text;
      if (!std::getline(in_, text)) throw ParseError("checkpoint: unexpected end of file", line_);
      ++line_;
      current_ = std::istringstream(text);
    }
    return w;
  }

  void expect(const std::string& keyword) {
    const std::string w = word();
    if (w != keyword) {
      throw ParseError("checkpoint: expected '" + keyword + "', got '" + w + "'", line_);
    }
  }

  std::size_t count() {
    const std::string w = word();
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(w, &pos);
      if (pos != w.size()) throw std::invalid_argument(w);
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw ParseError("checkpoint: expected a count, got '" + w + "'", line_);
    }
  }

  double real() {
    const std::string w = word();
    char* end = nullptr;
    const double v = std::strtod(w.c_str(), &end);
    if (end != w.c_str() + w.size()) throw ParseError("checkpoint: bad number '" + w + "'", line_);
    return v;
  }

  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::istringstream current_;
  std::size_t line_ = 0;
};

}  // namespace

void write_checkpoint(std::ostream& out, const MlpModel& model) {
  model.validate();
  out << kMagic << ' ' << kVersion << '\n';
  out << "activation " << to_string(model.activation) << '\n';
  out << "layers " << model.layer_sizes.size();
  for (const auto s : model.layer_sizes) out << ' ' << s;
  out << '\n';
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    const auto& w = model.weights[l];
    out << "weight " << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
    for (std::size_t r = 0; r < w.rows(); ++r) {
      for (std::size_t c = 0; c < w.cols(); ++c) out << (c ? " " : "") << hex(w(r, c));
      out << '\n';
    }
    out << "bias " << l << ' ' << model.biases[l].size() << '\n';
    for (std::size_t i = 0; i < model.biases[l].size(); ++i) out << (i ? " " : "") << hex(model.biases[l][i]);
    out << '\n';
  }
  out << "end\n";
}

MlpModel read_checkpoint(std::istream& in) {
  TokenReader r(in);
  r.expect(kMagic);
  const std::size_t version = r.count();
  if (version != kVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version), r.line());
  }
  MlpModel model;
  r.expect("activation");
  model.activation = parse_activation(r.word());
  r.expect("layers");
  const std::size_t n = r.count();
  if (n < 2) throw ValidationError("checkpoint: need at least two layers");
  for (std::size_t i = 0; i < n; ++i) model.layer_sizes.push_back(r.count());
  for (std::size_t l = 0; l + 1 < n; ++l) {
    r.expect("weight");
    if (r.count() != l) throw ValidationError("checkpoint: layers out of order");
    const std::size_t rows = r.count();
    const std::size_t cols = r.count();
    std::vector<double> data(rows * cols);
    for (auto& v : data) v = r.real();
    model.weights.emplace_back(rows, cols, std::move(data));
    r.expect("bias");
    if (r.count() != l) throw ValidationError("checkpoint: layers out of order");
    std::vector<double> bias(r.count());
    for (auto& v : bias) v = r.real();
    model.biases.push_back(std::move(bias));
  }
  r.expect("end");
  model.validate();
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const MlpModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  write_checkpoint(out, model);
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace advlab
