#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wmfrec/cf.hpp"

namespace wmfrec {

/// Contents of a model file.
struct ModelFile {
  FactorModel model;
  std::vector<double> objective_trace;
  std::uint64_t seed = 0;
  std::string config_hash;
};

/// Versioned little-endian binary container; doubles are stored as raw IEEE
/// bits so a save/load round trip is exact.
void save_model(std::ostream& out, const ModelFile& file);
ModelFile load_model(std::istream& in);

}  // namespace wmfrec
