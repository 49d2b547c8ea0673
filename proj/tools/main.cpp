// wmfrec: ingest -> features -> train -> evaluate from one JSON config.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "wmfrec/cli/commands.hpp"
#include "wmfrec/cli/config.hpp"
#include "wmfrec/error.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string playcounts;
  std::string features;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_iters;
  std::optional<long> rank;
  bool no_content = false;
  bool allow_hash_mismatch = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "JSON run configuration")->required();
  cmd->add_option("--playcounts", o.playcounts, "override paths.playcounts");
  cmd->add_option("--features", o.features, "override paths.features");
  cmd->add_option("-o,--output-dir", o.output_dir, "override paths.output_dir");
  cmd->add_option("--seed", o.seed, "override seed");
  cmd->add_option("--n-iters", o.n_iters, "override train.n_iters");
  cmd->add_option("--rank", o.rank, "override train.rank");
  cmd->add_flag("--no-content", o.no_content, "train the content-free variant only");
  cmd->add_flag("--allow-hash-mismatch", o.allow_hash_mismatch,
                "use artifacts written under a different configuration");
  cmd->add_flag("-q,--quiet", o.quiet, "no progress output");
}

wmfrec::cli::RunConfig build_config(const Overrides& o) {
  using namespace wmfrec::cli;
  RunConfig c = load_run_config(o.config);
  if (!o.playcounts.empty()) c.playcounts = o.playcounts;
  if (!o.features.empty()) c.features = o.features;
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  if (o.seed) c.seed = *o.seed;
  if (o.n_iters) c.train.n_iters = *o.n_iters;
  if (o.rank) c.train.rank = *o.rank;
  if (o.no_content) {
    c.variants = {Variant::kContentFree};
    std::erase(c.methods, Method::kContentAware);
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted matrix factorization recommender with content-aware cold start"};
  app.require_subcommand(1);
  Overrides o;
  bool print_config = false;
  struct Sub {
    const char* name;
    const char* help;
  };
  for (const Sub& s : {Sub{"ingest", "filter, binarize and split the playcounts"},
                       Sub{"features", "fit content factors from the feature table"},
                       Sub{"train", "train the configured model variants"},
                       Sub{"evaluate", "NDCG reports and the summary table"},
                       Sub{"run-all", "every stage in order"}}) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, o);
    cmd->add_flag("--print-config", print_config, "print the expanded configuration and its hash, then exit");
  }
  CLI11_PARSE(app, argc, argv);

  const std::string which = app.get_subcommands().front()->get_name();
  try {
    wmfrec::cli::Context ctx(build_config(o), o.quiet ? nullptr : &std::cerr);
    ctx.allow_hash_mismatch = o.allow_hash_mismatch;
    if (print_config) {
      std::cout << wmfrec::cli::to_json(ctx.config) << "\n# config_hash: " << ctx.hash << '\n';
      return 0;
    }
    if (which == "ingest") wmfrec::cli::cmd_ingest(ctx);
    else if (which == "features") wmfrec::cli::cmd_features(ctx);
    else if (which == "train") wmfrec::cli::cmd_train(ctx);
    else if (which == "evaluate") std::cout << wmfrec::cli::summary_table(wmfrec::cli::cmd_evaluate(ctx), ctx.config.tasks, ctx.hash);
    else wmfrec::cli::run_all(ctx);
  } catch (const wmfrec::Error& e) {
    std::cerr << "wmfrec " << which << ": " << e.what() << '\n';
    return wmfrec::cli::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "wmfrec " << which << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
