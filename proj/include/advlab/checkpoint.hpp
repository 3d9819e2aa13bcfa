#pragma once

#include <filesystem>
#include <iosfwd>

#include "advlab/mlp.hpp"

namespace advlab {

// Text checkpoint, version 1:
//
//   advlab-mlp 1
//   activation <relu|tanh>
//   layers <n> <size_0> ... <size_{n-1}>
//   weight <l> <rows> <cols>
//   <rows*cols hex floats, one row per line>
//   bias <l> <len>
//   <len hex floats>
//   end
//
// Values are written as C99 hex floats so reloading is bit exact.
void write_checkpoint(std::ostream& out, const MlpModel& model);
MlpModel read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const MlpModel& model);
MlpModel load_checkpoint(const std::filesystem::path& path);

}  // namespace advlab
