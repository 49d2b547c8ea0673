#include "wmfrec/cli/commands.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "wmfrec/cf.hpp"
#include "wmfrec/features.hpp"
#include "wmfrec/ingest.hpp"
#include "wmfrec/model_io.hpp"
#include "wmfrec/random.hpp"

namespace wmfrec::cli {
namespace {

constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kRandomStream = 1000;

namespace fs = std::filesystem;

fs::path out_path(const Context& ctx, const std::string& name) { return ctx.config.output_dir / name; }

std::string model_name(Variant v) { return "model_" + std::string(to_string(v)) + ".bin"; }

std::string shortest(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void say(const Context& ctx, const std::string& line) {
  if (ctx.log != nullptr) *ctx.log << line << '\n';
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kPath, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path, const std::string& produced_by) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kPath, "missing " + path.string() + " (run '" + produced_by + "' first)");
  }
  return in;
}

void check_hash(const Context& ctx, const std::string& artifact, const std::string& found) {
  if (found == ctx.hash) return;
  const std::string msg = artifact + " was written with config hash '" + found +
                          "' but the current config hashes to '" + ctx.hash + "'";
  if (!ctx.allow_hash_mismatch) {
    throw Error(ErrorKind::kHashMismatch, msg + "; rerun the earlier stage or pass --allow-hash-mismatch");
  }
  say(ctx, "warning: " + msg);
}

struct Dataset {
  PlaycountMatrix raw;
  InteractionSet split;
};

Dataset load_dataset(const Context& ctx) {
  Dataset d;
  {
    auto in = open_in(out_path(ctx, "playcounts.tsv"), "ingest");
    d.raw = parse_playcounts(in);
  }
  auto in = open_in(out_path(ctx, "split.manifest"), "ingest");
  LoadedSplit loaded = read_split_manifest(in, d.raw);
  check_hash(ctx, "split.manifest", loaded.config_hash);
  d.split = std::move(loaded.interactions);
  return d;
}

// content.tsv: `# config_hash: <h>`, a header, then one row per item in the
// filtered item order. Returns Z as L x I.
void write_content(const fs::path& path, const std::vector<std::string>& item_ids, const Matrix& z,
                   const std::string& hash) {
  auto out = open_out(path);
  out << "# config_hash: " << hash << "\nitem_id";
  for (Index c = 0; c < z.cols(); ++c) out << "\tfactor" << c + 1;
  out << '\n';
  for (Index i = 0; i < z.rows(); ++i) {
    out << item_ids[static_cast<std::size_t>(i)];
    for (Index c = 0; c < z.cols(); ++c) out << '\t' << shortest(z(i, c));
    out << '\n';
  }
}

Matrix load_content(const Context& ctx, const std::vector<std::string>& item_ids) {
  auto in = open_in(out_path(ctx, "content.tsv"), "features");
  std::string first;
  std::getline(in, first);
  const std::string prefix = "# config_hash: ";
  if (first.rfind(prefix, 0) != 0) throw ParseError(1, "content.tsv: missing config hash line");
  check_hash(ctx, "content.tsv", first.substr(prefix.size()));
  const FeatureTable table = parse_feature_table(in);
  if (table.item_ids != item_ids) {
    throw Error(ErrorKind::kData, "content.tsv does not list the filtered items in order; rerun 'features'");
  }
  return table.values.transpose();
}

FactorModel load_model_file(const Context& ctx, Variant v) {
  auto in = open_in(out_path(ctx, model_name(v)), "train");
  ModelFile file = load_model(in);
  check_hash(ctx, model_name(v), file.config_hash);
  return std::move(file.model);
}

std::vector<double> grid_values(const std::vector<double>& grid, double fallback) {
  return grid.empty() ? std::vector<double>{fallback} : grid;
}

// Mean NDCG over seeded random scorers, averaged per user.
EvalReport random_report(const InteractionSet& split, Task task, std::uint64_t seed, int n_seeds) {
  EvalReport acc;
  for (int k = 0; k < n_seeds; ++k) {
    const RandomScorer scorer(mix_seed(seed, kRandomStream + static_cast<std::uint64_t>(k)));
    EvalReport r = evaluate(scorer, split, task);
    if (k == 0) {
      acc = std::move(r);
      continue;
    }
    for (std::size_t u = 0; u < acc.ndcg.size(); ++u) acc.ndcg[u] += r.ndcg[u];
  }
  double total = 0.0;
  for (double& v : acc.ndcg) {
    v /= n_seeds;
    total += v;
  }
  acc.mean = acc.users.empty() ? std::numeric_limits<double>::quiet_NaN()
                               : total / static_cast<double>(acc.users.size());
  acc.method = "random";
  return acc;
}

std::string row_label(std::string_view method) {
  std::string s(method);
  for (char& c : s) c = c == '_' ? '-' : c;
  return s;
}

}  // namespace

Context::Context(RunConfig c, std::ostream* log_stream)
    : config(std::move(c)), hash(config_hash(config)), log(log_stream) {}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kParse: return 10;
    case ErrorKind::kData: return 11;
    case ErrorKind::kConfig: return 12;
    case ErrorKind::kPath: return 13;
    case ErrorKind::kShape: return 14;
    case ErrorKind::kIndex: return 15;
    case ErrorKind::kRank: return 16;
    case ErrorKind::kSolver: return 17;
    case ErrorKind::kDegenerate: return 18;
    case ErrorKind::kDivergence: return 19;
    case ErrorKind::kCapability: return 20;
    case ErrorKind::kHashMismatch: return 21;
  }
  return 1;
}

void cmd_ingest(const Context& ctx) {
  const RunConfig& cfg = ctx.config;
  cfg.validate();
  require_file(cfg.playcounts, "paths.playcounts");
  PlaycountMatrix raw = load_playcounts(cfg.playcounts);
  say(ctx, "ingest: read " + std::to_string(raw.entries.size()) + " playcounts, " +
               std::to_string(raw.n_users()) + " users, " + std::to_string(raw.n_items()) + " songs");
  if (cfg.has_features()) {
    require_file(cfg.features, "paths.features");
    const FeatureTable table = load_feature_table(cfg.features);
    const std::unordered_set<std::string> keep(table.item_ids.begin(), table.item_ids.end());
    raw = restrict_items(raw, keep);
    say(ctx, "ingest: " + std::to_string(raw.n_items()) + " songs have feature rows");
  }
  const PlaycountMatrix filtered = filter_activity(raw, cfg.filter);
  say(ctx, "ingest: after activity filter " + std::to_string(filtered.n_users()) + " users, " +
               std::to_string(filtered.n_items()) + " songs");
  SplitConfig split_cfg = cfg.split;
  split_cfg.seed = cfg.seed;
  const InteractionSet split = make_splits(binarize(filtered, cfg.binarize_threshold), filtered, split_cfg);

  fs::create_directories(cfg.output_dir);
  {
    auto out = open_out(out_path(ctx, "playcounts.tsv"));
    write_playcounts(out, filtered);
  }
  auto out = open_out(out_path(ctx, "split.manifest"));
  write_split_manifest(out, split, ctx.hash);
  say(ctx, "ingest: " + std::to_string(split.positives.size()) + " positives, " +
               std::to_string(split.out_of_matrix_items.size()) + " out-of-matrix songs");
}

void cmd_features(const Context& ctx) {
  const RunConfig& cfg = ctx.config;
  cfg.validate();
  require_file(cfg.features, "paths.features");
  const Dataset d = load_dataset(ctx);
  const FeatureTable table = load_feature_table(cfg.features);
  const auto n_features = static_cast<Index>(table.feature_names.size());
  if (cfg.n_components > n_features) {
    throw Error(ErrorKind::kConfig, "features.n_components (" + std::to_string(cfg.n_components) +
                                        ") exceeds the feature count (" + std::to_string(n_features) + ")");
  }
  const Matrix x = select_rows(table, d.raw.item_ids);
  std::vector<Index> in_matrix;
  for (Index i = 0; i < d.split.n_items; ++i) {
    if (!d.split.is_out_of_matrix(i)) in_matrix.push_back(i);
  }
  const Matrix x_in = x(in_matrix, Eigen::all);
  const StandardizeResult st = standardize(x_in, table.feature_names);

  FactorArtifact artifact;
  artifact.feature_names = table.feature_names;
  artifact.standardization = st.stats;
  artifact.factors = fit_factors(st.standardized, cfg.n_components, cfg.rotation);
  artifact.seed = cfg.seed;
  artifact.config_hash = ctx.hash;
  if (!artifact.factors.converged) say(ctx, "features: warning: rotation did not converge");
  const Matrix z = artifact.score(x);
  const Matrix corr = correlation_report(st.standardized, z(in_matrix, Eigen::all));

  fs::create_directories(cfg.output_dir);
  {
    auto out = open_out(out_path(ctx, "factors.json"));
    save_factor_artifact(out, artifact);
  }
  write_content(out_path(ctx, "content.tsv"), d.raw.item_ids, z, ctx.hash);
  auto out = open_out(out_path(ctx, "correlations.tsv"));
  out << "feature";
  for (Index c = 0; c < corr.cols(); ++c) out << "\tfactor" << c + 1;
  out << '\n' << std::fixed << std::setprecision(4);
  for (Index j = 0; j < corr.rows(); ++j) {
    out << table.feature_names[static_cast<std::size_t>(j)];
    for (Index c = 0; c < corr.cols(); ++c) out << '\t' << corr(j, c);
    out << '\n';
  }
  say(ctx, "features: " + std::to_string(n_features) + " features -> " +
               std::to_string(cfg.n_components) + " factors, rotation iterations " +
               std::to_string(artifact.factors.iterations));
}

void cmd_train(const Context& ctx) {
  const RunConfig& cfg = ctx.config;
  cfg.validate();
  const Dataset d = load_dataset(ctx);
  std::optional<Matrix> content;
  if (cfg.trains(Variant::kContentAware)) content = load_content(ctx, d.raw.item_ids);
  const std::uint64_t seed = mix_seed(cfg.seed, kTrainStream);

  for (Variant variant : cfg.variants) {
    const std::string name(to_string(variant));
    const Matrix* z = variant == Variant::kContentAware ? &*content : nullptr;
    auto fit = [&](const Hyperparams& p) {
      const ConfidenceMatrix data = ConfidenceMatrix::from_interactions(d.split, p);
      return z != nullptr ? train(data, *z, p, seed) : train(data, p, seed);
    };

    std::optional<TrainResult> best;
    if (cfg.grid.empty()) {
      best = fit(cfg.train);
    } else {
      auto out = open_out(out_path(ctx, "grid_" + name + ".tsv"));
      out << "lambda_w\tlambda_h\tvalidation_ndcg\n";
      double best_score = -std::numeric_limits<double>::infinity();
      for (double lw : grid_values(cfg.grid.lambda_w, cfg.train.lambda_w)) {
        for (double lh : grid_values(cfg.grid.lambda_h, cfg.train.lambda_h)) {
          Hyperparams p = cfg.train;
          p.lambda_w = lw;
          p.lambda_h = lh;
          TrainResult r = fit(p);
          const double score = evaluate(FactorScorer(r.model), d.split, Task::kValidation).mean;
          out << shortest(lw) << '\t' << shortest(lh) << '\t' << shortest(score) << '\n';
          say(ctx, "train[" + name + "]: lambda_w=" + shortest(lw) + " lambda_h=" + shortest(lh) +
                       " validation NDCG " + shortest(score));
          if (score > best_score) {
            best_score = score;
            best = std::move(r);
          }
        }
      }
      if (!best) throw Error(ErrorKind::kData, "no grid point produced a validation NDCG");
    }

    fs::create_directories(cfg.output_dir);
    {
      auto out = open_out(out_path(ctx, model_name(variant)));
      save_model(out, ModelFile{best->model, best->objective_trace, cfg.seed, ctx.hash});
    }
    auto out = open_out(out_path(ctx, "trace_" + name + ".txt"));
    for (double v : best->objective_trace) out << shortest(v) << '\n';
    say(ctx, "train[" + name + "]: " + std::to_string(best->objective_trace.size()) + " sweeps, final objective " +
                 (best->objective_trace.empty() ? std::string("-") : shortest(best->objective_trace.back())));
  }
}

std::vector<EvalReport> cmd_evaluate(const Context& ctx) {
  const RunConfig& cfg = ctx.config;
  cfg.validate();
  const Dataset d = load_dataset(ctx);

  bool need_content = false;
  for (Method m : cfg.methods) need_content = need_content || m == Method::kPureContent;
  for (Task t : cfg.tasks) {
    for (Method m : cfg.methods) need_content = need_content || (m == Method::kContentAware && t == Task::kOutOfMatrix);
  }
  std::optional<Matrix> content;
  if (need_content) content = load_content(ctx, d.raw.item_ids);

  std::map<Variant, FactorModel> models;
  auto model = [&](Variant v) -> const FactorModel& {
    auto it = models.find(v);
    if (it == models.end()) it = models.emplace(v, load_model_file(ctx, v)).first;
    return it->second;
  };
  auto supports = [](Method m, Task t) {
    switch (m) {
      case Method::kContentFree: return t != Task::kOutOfMatrix;
      case Method::kContentAware: return true;
      case Method::kPureContent: return t == Task::kOutOfMatrix;
      case Method::kRandom: return true;
    }
    return false;
  };

  std::vector<EvalReport> reports;
  for (Task task : cfg.tasks) {
    bool any = false;
    for (Method m : cfg.methods) any = any || supports(m, task);
    if (!any) {
      throw Error(ErrorKind::kCapability, "no requested method can run task " + std::string(to_string(task)) +
                                              " (content_free cannot score out-of-matrix songs; add "
                                              "content_aware or pure_content)");
    }
    for (Method m : cfg.methods) {
      if (!supports(m, task)) continue;
      EvalReport report;
      switch (m) {
        case Method::kContentFree:
          report = evaluate(FactorScorer(model(Variant::kContentFree), "content_free"), d.split, task);
          break;
        case Method::kContentAware: {
          const FactorModel& fm = model(Variant::kContentAware);
          if (task == Task::kOutOfMatrix) {
            report = evaluate(ColdStartScorer(fm, *content, "content_aware"), d.split, task);
          } else {
            report = evaluate(FactorScorer(fm, "content_aware"), d.split, task);
          }
          break;
        }
        case Method::kPureContent:
          report = evaluate(pure_content_baseline(d.split, *content, cfg.baseline), d.split, task);
          break;
        case Method::kRandom:
          report = random_report(d.split, task, cfg.seed, cfg.random_seeds);
          break;
      }
      fs::create_directories(cfg.output_dir);
      auto out = open_out(out_path(ctx, "report_" + std::string(to_string(task)) + "_" +
                                            std::string(to_string(m)) + ".txt"));
      write_report(out, report, d.raw.user_ids, ctx.hash);
      say(ctx, "evaluate: " + std::string(to_string(task)) + " / " + report.method + " mean NDCG " +
                   shortest(report.mean) + " over " + std::to_string(report.users.size()) + " users");
      reports.push_back(std::move(report));
    }
  }
  auto out = open_out(out_path(ctx, "summary.txt"));
  out << summary_table(reports, cfg.tasks, ctx.hash);
  return reports;
}

void run_all(const Context& ctx) {
  cmd_ingest(ctx);
  if (ctx.config.has_features()) cmd_features(ctx);
  cmd_train(ctx);
  cmd_evaluate(ctx);
}

std::string summary_table(const std::vector<EvalReport>& reports, const std::vector<Task>& tasks,
                          const std::string& config_hash) {
  auto emit = [](std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      out << cells[k];
      if (k + 1 < cells.size()) out << std::string(cells[k].size() < 16 ? 16 - cells[k].size() : 1, ' ');
    }
    out << '\n';
  };
  std::ostringstream out;
  out << "# mean NDCG over users; '-' where the method cannot run the task\n";
  std::vector<std::string> header{"method"};
  for (Task t : tasks) header.emplace_back(to_string(t));
  emit(out, header);
  for (Method m : {Method::kContentFree, Method::kPureContent, Method::kContentAware, Method::kRandom}) {
    bool present = false;
    for (const auto& r : reports) present = present || r.method == to_string(m);
    if (!present) continue;
    std::vector<std::string> row{row_label(to_string(m))};
    for (Task t : tasks) {
      std::string cell = "-";
      for (const auto& r : reports) {
        if (r.method == to_string(m) && r.task == t && !std::isnan(r.mean)) {
          std::ostringstream v;
          v << std::fixed << std::setprecision(4) << r.mean;
          cell = v.str();
        }
      }
      row.push_back(cell);
    }
    emit(out, row);
  }
  out << "# config_hash: " << config_hash << '\n';
  return out.str();
}

}  // namespace wmfrec::cli
