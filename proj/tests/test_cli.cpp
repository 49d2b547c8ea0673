#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "wmfrec/cli/commands.hpp"
#include "wmfrec/cli/config.hpp"
#include "wmfrec/error.hpp"
#include "wmfrec/features.hpp"
#include "wmfrec/model_io.hpp"
#include "wmfrec/random.hpp"

namespace wmfrec::cli {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kParse;
}

// Listening data driven by 3 latent content factors; 16 noisy features per
// song are linear in the same factors.
class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("wmfrec_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    Rng rng(2024);
    const Index users = 80, items = 70, l = 3, features = 16;
    const Matrix z = oracle::random_matrix(rng, l, items);
    const Matrix taste = oracle::random_matrix(rng, l, users);
    const Matrix mixing = oracle::random_matrix(rng, features, l);
    std::ofstream pc(dir_ / "plays.txt");
    for (Index u = 0; u < users; ++u) {
      for (Index i = 0; i < items; ++i) {
        const double affinity = taste.col(u).dot(z.col(i)) + 0.5 * rng.normal();
        if (affinity > 0.3 || rng.uniform() < 0.05) {
          pc << "user" << u << '\t' << "song" << i << '\t' << 1 + rng.below(affinity > 1.0 ? 12 : 4) << '\n';
        }
      }
    }
    std::ofstream ft(dir_ / "features.csv");
    ft << "song_id";
    for (Index f = 0; f < features; ++f) ft << ",feat" << f;
    ft << '\n';
    for (Index i = 0; i < items; ++i) {
      ft << "song" << i;
      const Vector x = mixing * z.col(i);
      for (Index f = 0; f < features; ++f) ft << ',' << x(f) + 0.3 * rng.normal();
      ft << '\n';
    }
  }

  void TearDown() override { fs::remove_all(dir_); }

  RunConfig config(const std::string& extra = "") const {
    const std::string text = R"({
      "seed": 11,
      "paths": {"playcounts": "plays.txt", "features": "features.csv", "output_dir": "out"},
      "filter": {"min_songs_per_user": 3, "min_users_per_song": 3},
      "binarize_threshold": 3,
      "split": {"out_of_matrix_song_fraction": 0.1},
      "train": {"rank": 4, "n_iters": 6})" + extra + "}";
    return parse_run_config(text, dir_);
  }

  fs::path out(const std::string& name) const { return dir_ / "out" / name; }

  fs::path dir_;
};

TEST(RunConfigParse, DefaultsWhenUnset) {
  const RunConfig c = parse_run_config("{}");
  EXPECT_EQ(c.train.rank, 50);
  EXPECT_EQ(c.train.n_iters, 20);
  EXPECT_EQ(c.train.alpha, 2.0);
  EXPECT_EQ(c.train.epsilon, 1e-6);
  EXPECT_EQ(c.train.base_confidence, 1.0);
  EXPECT_EQ(c.filter.min_songs_per_user, 20);
  EXPECT_EQ(c.filter.min_users_per_song, 50);
  EXPECT_FALSE(c.filter.top_users.has_value());
  EXPECT_EQ(c.binarize_threshold, 5u);
  EXPECT_EQ(c.split.out_of_matrix_song_fraction, 0.05);
  EXPECT_EQ(c.n_components, 3);
  EXPECT_EQ(c.rotation.gamma, 0.0);
}

TEST(RunConfigParse, RejectsUnknownKeysAndBadValues) {
  EXPECT_EQ(kind_of([] { parse_run_config(R"({"train": {"rnak": 5}})"); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { parse_run_config(R"({"train": {"rank": "five"}})"); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { parse_run_config(R"({"evaluate": {"methods": ["magic"]}})"); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([] { parse_run_config("{not json"); }), ErrorKind::kParse);
  RunConfig c = parse_run_config(R"({"split": {"train": 0.5}})");
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::kConfig);
}

TEST(RunConfigParse, HashIgnoresEvaluateSectionAndOutputDir) {
  const RunConfig a = parse_run_config(R"({"seed": 3})");
  const RunConfig b = parse_run_config(R"({"seed": 3, "train": {"rank": 50},
      "evaluate": {"tasks": ["in_matrix"]}, "paths": {"output_dir": "elsewhere"}})");
  const RunConfig c = parse_run_config(R"({"seed": 4})");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(c));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(ExitCodes, DistinctPerCategory) {
  std::set<int> codes;
  for (int k = 0; k <= static_cast<int>(ErrorKind::kHashMismatch); ++k) {
    const int code = exit_code(static_cast<ErrorKind>(k));
    EXPECT_GT(code, 1);
    codes.insert(code);
  }
  EXPECT_EQ(codes.size(), static_cast<std::size_t>(ErrorKind::kHashMismatch) + 1);
}

TEST_F(CliTest, IngestWritesDeterministicManifest) {
  const Context ctx(config());
  cmd_ingest(ctx);
  const std::string first = slurp(out("split.manifest"));
  EXPECT_NE(first.find("\"seed\":11"), std::string::npos);
  EXPECT_NE(first.find("\"out_of_matrix_song\":0.1"), std::string::npos);
  EXPECT_NE(first.find("\"train\":0.7"), std::string::npos);
  EXPECT_NE(first.find(ctx.hash), std::string::npos);
  cmd_ingest(ctx);
  EXPECT_EQ(slurp(out("split.manifest")), first);
}

TEST_F(CliTest, MissingPlaycountFileNamesTheField) {
  RunConfig c = config();
  c.playcounts = dir_ / "nope.txt";
  try {
    cmd_ingest(Context(c));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kPath);
    EXPECT_NE(std::string(e.what()).find("paths.playcounts"), std::string::npos);
  }
}

TEST_F(CliTest, FeaturesArtifactShapeAndDeterminism) {
  const Context ctx(config());
  cmd_ingest(ctx);
  cmd_features(ctx);
  const std::string first = slurp(out("factors.json"));
  std::ifstream in(out("factors.json"));
  const FactorArtifact art = load_factor_artifact(in);
  EXPECT_EQ(art.factors.loadings.rows(), 16);
  EXPECT_EQ(art.factors.loadings.cols(), 3);
  EXPECT_EQ(art.factors.factor_correlation.rows(), 3);
  EXPECT_EQ(art.factors.factor_correlation.cols(), 3);
  EXPECT_EQ(art.config_hash, ctx.hash);
  EXPECT_EQ(art.seed, 11u);
  const std::string corr = slurp(out("correlations.tsv"));
  EXPECT_EQ(corr.rfind("feature\tfactor1\tfactor2\tfactor3\n", 0), 0u);
  cmd_features(ctx);
  EXPECT_EQ(slurp(out("factors.json")), first);
}

TEST_F(CliTest, TooManyComponentsIsAConfigError) {
  Context ctx(config(R"(, "features": {"n_components": 17})"));
  cmd_ingest(ctx);
  EXPECT_EQ(kind_of([&] { cmd_features(ctx); }), ErrorKind::kConfig);
}

TEST_F(CliTest, ContentFreeModelIsRefusedOutOfMatrix) {
  Context ctx(config(R"(, "evaluate": {"tasks": ["in_matrix", "out_of_matrix"], "methods": ["content_free"]})"));
  ctx.config.variants = {Variant::kContentFree};
  ctx = Context(ctx.config);
  cmd_ingest(ctx);
  cmd_train(ctx);
  std::ifstream in(out("model_content_free.bin"), std::ios::binary);
  const ModelFile model = load_model(in);
  EXPECT_FALSE(model.model.content_aware());
  EXPECT_EQ(model.seed, 11u);
  std::istringstream trace(slurp(out("trace_content_free.txt")));
  int lines = 0;
  for (std::string line; std::getline(trace, line);) ++lines;
  EXPECT_EQ(lines, 6);
  EXPECT_EQ(kind_of([&] { cmd_evaluate(ctx); }), ErrorKind::kCapability);

  Context in_only(config(R"(, "evaluate": {"tasks": ["in_matrix"], "methods": ["content_free"]})"));
  in_only.config.variants = {Variant::kContentFree};
  in_only = Context(in_only.config);
  const auto reports = cmd_evaluate(in_only);
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_TRUE(fs::exists(out("report_in_matrix_content_free.txt")));
}

TEST_F(CliTest, FullRunSummaryMirrorsTableLayout) {
  const Context ctx(config());
  run_all(ctx);
  const std::string summary = slurp(out("summary.txt"));
  std::istringstream lines(summary);
  std::vector<std::string> rows;
  for (std::string line; std::getline(lines, line);) {
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  }
  ASSERT_EQ(rows.size(), 4u) << summary;
  EXPECT_EQ(rows[0].rfind("method", 0), 0u);
  EXPECT_NE(rows[0].find("in_matrix"), std::string::npos);
  EXPECT_NE(rows[0].find("out_of_matrix"), std::string::npos);
  EXPECT_EQ(rows[1].rfind("content-free", 0), 0u);
  EXPECT_EQ(rows[2].rfind("pure-content", 0), 0u);
  EXPECT_EQ(rows[3].rfind("content-aware", 0), 0u);
  // content-free has no out-of-matrix score, pure-content no in-matrix one.
  EXPECT_EQ(rows[1].back(), '-');
  EXPECT_NE(rows[2].find(" - "), std::string::npos);
  EXPECT_EQ(rows[3].find(" - "), std::string::npos);
  EXPECT_TRUE(fs::exists(out("report_out_of_matrix_content_aware.txt")));
  EXPECT_TRUE(fs::exists(out("report_out_of_matrix_pure_content.txt")));

  // Identical inputs give identical outputs.
  const std::string model = slurp(out("model_content_aware.bin"));
  run_all(ctx);
  EXPECT_EQ(slurp(out("summary.txt")), summary);
  EXPECT_EQ(slurp(out("model_content_aware.bin")), model);
}

TEST_F(CliTest, HashMismatchIsRefusedUnlessOverridden) {
  const Context ctx(config());
  run_all(ctx);
  Context changed(config(R"(, "binarize_threshold": 4)"));
  EXPECT_NE(changed.hash, ctx.hash);
  EXPECT_EQ(kind_of([&] { cmd_evaluate(changed); }), ErrorKind::kHashMismatch);
  changed.allow_hash_mismatch = true;
  EXPECT_NO_THROW(cmd_evaluate(changed));
}

TEST_F(CliTest, GridSearchWritesOneRowPerPoint) {
  Context ctx(config(R"(, "evaluate": {"tasks": ["in_matrix"], "methods": ["content_free"]})"));
  ctx.config.variants = {Variant::kContentFree};
  ctx.config.grid.lambda_w = {0.1, 10.0};
  ctx.config.grid.lambda_h = {0.1, 10.0};
  ctx = Context(ctx.config);
  cmd_ingest(ctx);
  cmd_train(ctx);
  std::istringstream grid(slurp(out("grid_content_free.tsv")));
  std::vector<std::string> rows;
  for (std::string line; std::getline(grid, line);) rows.push_back(line);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "lambda_w\tlambda_h\tvalidation_ndcg");
  double best = -1.0;
  double best_w = 0.0, best_h = 0.0;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    std::istringstream row(rows[k]);
    double w = 0, h = 0, v = 0;
    row >> w >> h >> v;
    if (v > best) {
      best = v;
      best_w = w;
      best_h = h;
    }
  }
  std::ifstream in(out("model_content_free.bin"), std::ios::binary);
  const ModelFile model = load_model(in);
  EXPECT_EQ(model.model.hyperparams.lambda_w, best_w);
  EXPECT_EQ(model.model.hyperparams.lambda_h, best_h);
}

}  // namespace
}  // namespace wmfrec::cli
