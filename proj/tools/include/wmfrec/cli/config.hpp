#pragma once

// Run configuration for the command line driver. One JSON file describes a
// whole experiment; command-line flags patch individual fields.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wmfrec/cf.hpp"
#include "wmfrec/eval.hpp"
#include "wmfrec/features.hpp"
#include "wmfrec/ingest.hpp"

namespace wmfrec::cli {

enum class Variant { kContentFree, kContentAware };

std::string_view to_string(Variant v) noexcept;

enum class Method { kContentFree, kContentAware, kPureContent, kRandom };

std::string_view to_string(Method m) noexcept;
Method parse_method(std::string_view text);

struct Grid {
  std::vector<double> lambda_w;
  std::vector<double> lambda_h;

  bool empty() const { return lambda_w.empty() && lambda_h.empty(); }
};

struct RunConfig {
  std::filesystem::path playcounts;
  std::filesystem::path features;  // empty: no content features
  std::filesystem::path output_dir = "wmfrec_out";
  std::uint64_t seed = 0;

  ActivityFilter filter;
  std::uint32_t binarize_threshold = 5;
  SplitConfig split;

  Index n_components = 3;
  RotationOptions rotation;  // observer unused

  // Experiments default to the classic weighting: unobserved pairs get
  // confidence 1 (the library default is the literal 0).
  Hyperparams train = [] {
    Hyperparams h;
    h.base_confidence = 1.0;
    return h;
  }();
  std::vector<Variant> variants{Variant::kContentFree, Variant::kContentAware};
  Grid grid;

  std::vector<Task> tasks{Task::kInMatrix, Task::kOutOfMatrix};
  std::vector<Method> methods{Method::kContentFree, Method::kPureContent, Method::kContentAware};
  BaselineOptions baseline;
  int random_seeds = 1000;

  bool has_features() const { return !features.empty(); }
  bool trains(Variant v) const;

  /// Checks value ranges; paths are checked per command.
  void validate() const;
};

/// Parses the JSON text. Unknown keys are rejected so typos do not silently
/// fall back to defaults. Relative paths resolve against `base_dir`.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully expanded configuration, defaults included.
std::string to_json(const RunConfig& config);

/// FNV-1a over the expanded configuration minus the evaluate section and the
/// output directory, as 16 hex digits. Embedded in every artifact.
std::string config_hash(const RunConfig& config);

/// Throws Error(kPath) naming `field` when `path` is not a readable file.
void require_file(const std::filesystem::path& path, std::string_view field);

}  // namespace wmfrec::cli
