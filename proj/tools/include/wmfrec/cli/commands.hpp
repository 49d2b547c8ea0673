#pragma once

// Pipeline stages. Each reads its inputs from the configured paths and the
// output directory, and writes its artifacts back there:
//
//   ingest    playcounts.tsv, split.manifest
//   features  factors.json, content.tsv, correlations.tsv
//   train     model_<variant>.bin, trace_<variant>.txt, grid_<variant>.tsv
//   evaluate  report_<task>_<method>.txt, summary.txt

#include <iosfwd>
#include <string>
#include <vector>

#include "wmfrec/cli/config.hpp"
#include "wmfrec/error.hpp"
#include "wmfrec/eval.hpp"

namespace wmfrec::cli {

struct Context {
  RunConfig config;
  std::string hash;  // config_hash(config)
  bool allow_hash_mismatch = false;
  std::ostream* log = nullptr;  // progress lines; null for silence

  explicit Context(RunConfig c, std::ostream* log_stream = nullptr);
};

void cmd_ingest(const Context& ctx);
void cmd_features(const Context& ctx);
void cmd_train(const Context& ctx);
/// Returns the reports in (task, method) order, skipping pairs the method
/// cannot run. Throws Error(kCapability) when no requested method can run a
/// requested task.
std::vector<EvalReport> cmd_evaluate(const Context& ctx);
void run_all(const Context& ctx);

/// Rows content-free / pure-content / content-aware (then random) by the
/// configured task columns; '-' where the pair is undefined.
std::string summary_table(const std::vector<EvalReport>& reports, const std::vector<Task>& tasks,
                          const std::string& config_hash);

/// Exit status for an error category; 0 is success, 1 an unexpected failure.
int exit_code(ErrorKind kind) noexcept;

}  // namespace wmfrec::cli
