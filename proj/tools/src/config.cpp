#include "wmfrec/cli/config.hpp"

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "wmfrec/error.hpp"

namespace wmfrec::cli {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw Error(ErrorKind::kConfig, field + ": " + why);
}

void only_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!obj.is_object()) bad(std::string(where), "expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (auto k : keys) known = known || key == k;
    if (!known) bad(std::string(where) + (where.empty() ? "" : ".") + key, "unknown key");
  }
}

// Reads obj[key] into out if present; type errors name the field.
template <class T>
void read(const json& obj, const std::string& prefix, const char* key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    bad(prefix + key, std::string("wrong type (") + e.what() + ")");
  }
}

std::filesystem::path resolve(const std::string& text, const std::filesystem::path& base) {
  if (text.empty()) return {};
  std::filesystem::path p(text);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

Similarity parse_similarity(const std::string& s) {
  if (s == "cosine") return Similarity::kCosine;
  if (s == "euclidean") return Similarity::kEuclidean;
  bad("evaluate.baseline.similarity", "expected cosine or euclidean, got '" + s + "'");
}

ProfileWeighting parse_weighting(const std::string& s) {
  if (s == "uniform") return ProfileWeighting::kUniform;
  if (s == "playcount") return ProfileWeighting::kPlaycount;
  bad("evaluate.baseline.weighting", "expected uniform or playcount, got '" + s + "'");
}

Variant parse_variant(const std::string& s) {
  if (s == "content_free") return Variant::kContentFree;
  if (s == "content_aware") return Variant::kContentAware;
  bad("train.variants", "expected content_free or content_aware, got '" + s + "'");
}

json expanded(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["paths"] = {{"playcounts", c.playcounts.generic_string()},
                {"features", c.features.generic_string()},
                {"output_dir", c.output_dir.generic_string()}};
  j["filter"] = {{"min_songs_per_user", c.filter.min_songs_per_user},
                 {"min_users_per_song", c.filter.min_users_per_song},
                 {"top_users", c.filter.top_users ? json(*c.filter.top_users) : json()},
                 {"top_items", c.filter.top_items ? json(*c.filter.top_items) : json()}};
  j["binarize_threshold"] = c.binarize_threshold;
  j["split"] = {{"out_of_matrix_song_fraction", c.split.out_of_matrix_song_fraction},
                {"train", c.split.train},
                {"validation", c.split.validation},
                {"test_in", c.split.test_in}};
  j["features"] = {{"n_components", c.n_components},
                   {"gamma", c.rotation.gamma},
                   {"max_iter", c.rotation.max_iter},
                   {"tol", c.rotation.tol}};
  json variants = json::array();
  for (auto v : c.variants) variants.push_back(std::string(to_string(v)));
  j["train"] = {{"rank", c.train.rank},
                {"lambda_w", c.train.lambda_w},
                {"lambda_h", c.train.lambda_h},
                {"lambda_b", c.train.lambda_b},
                {"alpha", c.train.alpha},
                {"epsilon", c.train.epsilon},
                {"n_iters", c.train.n_iters},
                {"base_confidence", c.train.base_confidence},
                {"variants", variants},
                {"grid", {{"lambda_w", c.grid.lambda_w}, {"lambda_h", c.grid.lambda_h}}}};
  json tasks = json::array();
  for (auto t : c.tasks) tasks.push_back(std::string(to_string(t)));
  json methods = json::array();
  for (auto m : c.methods) methods.push_back(std::string(to_string(m)));
  j["evaluate"] = {
      {"tasks", tasks},
      {"methods", methods},
      {"baseline",
       {{"similarity", c.baseline.similarity == Similarity::kCosine ? "cosine" : "euclidean"},
        {"weighting", c.baseline.weighting == ProfileWeighting::kUniform ? "uniform" : "playcount"}}},
      {"random_seeds", c.random_seeds}};
  return j;
}

}  // namespace

std::string_view to_string(Variant v) noexcept {
  return v == Variant::kContentFree ? "content_free" : "content_aware";
}

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::kContentFree: return "content_free";
    case Method::kContentAware: return "content_aware";
    case Method::kPureContent: return "pure_content";
    case Method::kRandom: return "random";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  if (text == "content_free") return Method::kContentFree;
  if (text == "content_aware") return Method::kContentAware;
  if (text == "pure_content") return Method::kPureContent;
  if (text == "random") return Method::kRandom;
  bad("evaluate.methods", "unknown method '" + std::string(text) + "'");
}

bool RunConfig::trains(Variant v) const {
  for (auto x : variants) {
    if (x == v) return true;
  }
  return false;
}

void RunConfig::validate() const {
  if (filter.min_songs_per_user < 1) bad("filter.min_songs_per_user", "must be >= 1");
  if (filter.min_users_per_song < 1) bad("filter.min_users_per_song", "must be >= 1");
  if (binarize_threshold < 1) bad("binarize_threshold", "must be >= 1");
  split.validate();
  if (split.out_of_matrix_song_fraction > 1.0) bad("split.out_of_matrix_song_fraction", "must be <= 1");
  if (n_components < 1) bad("features.n_components", "must be >= 1");
  if (rotation.max_iter < 0) bad("features.max_iter", "must be >= 0");
  if (!(rotation.tol > 0.0)) bad("features.tol", "must be > 0");
  train.validate();
  if (variants.empty()) bad("train.variants", "needs at least one variant");
  if (trains(Variant::kContentAware) && !has_features()) {
    bad("train.variants", "content_aware needs paths.features");
  }
  for (double v : grid.lambda_w) {
    if (!(v >= 0.0)) bad("train.grid.lambda_w", "values must be nonnegative");
  }
  for (double v : grid.lambda_h) {
    if (!(v >= 0.0)) bad("train.grid.lambda_h", "values must be nonnegative");
  }
  if (random_seeds < 1) bad("evaluate.random_seeds", "must be >= 1");
  for (auto m : methods) {
    if (m == Method::kPureContent && !has_features()) bad("evaluate.methods", "pure_content needs paths.features");
  }
}

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("config is not valid JSON: ") + e.what());
  }
  only_keys(root, "", {"seed", "paths", "filter", "binarize_threshold", "split", "features", "train", "evaluate"});
  RunConfig c;
  read(root, "", "seed", c.seed);
  read(root, "", "binarize_threshold", c.binarize_threshold);

  if (root.contains("paths")) {
    const json& p = root["paths"];
    only_keys(p, "paths", {"playcounts", "features", "output_dir"});
    std::string playcounts, features, output_dir;
    read(p, "paths.", "playcounts", playcounts);
    read(p, "paths.", "features", features);
    read(p, "paths.", "output_dir", output_dir);
    c.playcounts = resolve(playcounts, base_dir);
    c.features = resolve(features, base_dir);
    if (!output_dir.empty()) c.output_dir = resolve(output_dir, base_dir);
  }
  if (root.contains("filter")) {
    const json& f = root["filter"];
    only_keys(f, "filter", {"min_songs_per_user", "min_users_per_song", "top_users", "top_items"});
    read(f, "filter.", "min_songs_per_user", c.filter.min_songs_per_user);
    read(f, "filter.", "min_users_per_song", c.filter.min_users_per_song);
    if (f.contains("top_users") && !f["top_users"].is_null()) {
      Index n = 0;
      read(f, "filter.", "top_users", n);
      c.filter.top_users = n;
    }
    if (f.contains("top_items") && !f["top_items"].is_null()) {
      Index n = 0;
      read(f, "filter.", "top_items", n);
      c.filter.top_items = n;
    }
  }
  if (root.contains("split")) {
    const json& s = root["split"];
    only_keys(s, "split", {"out_of_matrix_song_fraction", "train", "validation", "test_in"});
    read(s, "split.", "out_of_matrix_song_fraction", c.split.out_of_matrix_song_fraction);
    read(s, "split.", "train", c.split.train);
    read(s, "split.", "validation", c.split.validation);
    read(s, "split.", "test_in", c.split.test_in);
  }
  if (root.contains("features")) {
    const json& f = root["features"];
    only_keys(f, "features", {"n_components", "gamma", "max_iter", "tol"});
    read(f, "features.", "n_components", c.n_components);
    read(f, "features.", "gamma", c.rotation.gamma);
    read(f, "features.", "max_iter", c.rotation.max_iter);
    read(f, "features.", "tol", c.rotation.tol);
  }
  if (root.contains("train")) {
    const json& t = root["train"];
    only_keys(t, "train", {"rank", "lambda_w", "lambda_h", "lambda_b", "alpha", "epsilon", "n_iters",
                           "base_confidence", "variants", "grid"});
    read(t, "train.", "rank", c.train.rank);
    read(t, "train.", "lambda_w", c.train.lambda_w);
    read(t, "train.", "lambda_h", c.train.lambda_h);
    read(t, "train.", "lambda_b", c.train.lambda_b);
    read(t, "train.", "alpha", c.train.alpha);
    read(t, "train.", "epsilon", c.train.epsilon);
    read(t, "train.", "n_iters", c.train.n_iters);
    read(t, "train.", "base_confidence", c.train.base_confidence);
    if (t.contains("variants")) {
      std::vector<std::string> names;
      read(t, "train.", "variants", names);
      c.variants.clear();
      for (const auto& n : names) c.variants.push_back(parse_variant(n));
    }
    if (t.contains("grid")) {
      const json& g = t["grid"];
      only_keys(g, "train.grid", {"lambda_w", "lambda_h"});
      read(g, "train.grid.", "lambda_w", c.grid.lambda_w);
      read(g, "train.grid.", "lambda_h", c.grid.lambda_h);
    }
  }
  if (root.contains("evaluate")) {
    const json& e = root["evaluate"];
    only_keys(e, "evaluate", {"tasks", "methods", "baseline", "random_seeds"});
    if (e.contains("tasks")) {
      std::vector<std::string> names;
      read(e, "evaluate.", "tasks", names);
      c.tasks.clear();
      for (const auto& n : names) c.tasks.push_back(parse_task(n));
    }
    if (e.contains("methods")) {
      std::vector<std::string> names;
      read(e, "evaluate.", "methods", names);
      c.methods.clear();
      for (const auto& n : names) c.methods.push_back(parse_method(n));
    }
    if (e.contains("baseline")) {
      const json& b = e["baseline"];
      only_keys(b, "evaluate.baseline", {"similarity", "weighting"});
      std::string sim = "cosine", weighting = "uniform";
      read(b, "evaluate.baseline.", "similarity", sim);
      read(b, "evaluate.baseline.", "weighting", weighting);
      c.baseline = {parse_similarity(sim), parse_weighting(weighting)};
    }
    read(e, "evaluate.", "random_seeds", c.random_seeds);
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  require_file(path, "--config");
  std::ifstream in(path);
  std::stringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.parent_path());
}

std::string to_json(const RunConfig& config) { return expanded(config).dump(2); }

std::string config_hash(const RunConfig& config) {
  json j = expanded(config);
  j.erase("evaluate");
  j["paths"].erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void require_file(const std::filesystem::path& path, std::string_view field) {
  if (path.empty()) throw Error(ErrorKind::kPath, std::string(field) + ": not set");
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorKind::kPath, std::string(field) + ": no such file '" + path.string() + "'");
  }
}

}  // namespace wmfrec::cli
