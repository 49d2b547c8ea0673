#include <istream>
#include <ostream>

#include <json.hpp>

#include "wmfrec/error.hpp"
#include "wmfrec/features.hpp"

namespace wmfrec {
namespace {

using nlohmann::json;

constexpr std::string_view kFormat = "wmfrec-factors";
constexpr int kVersion = 1;

json to_json(const Vector& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

Vector vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

Matrix matrix_from(const json& j, Index cols) {
  Matrix m(static_cast<Index>(j.size()), cols);
  for (Index r = 0; r < m.rows(); ++r) {
    const auto row = j.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
    if (static_cast<Index>(row.size()) != cols) throw Error(ErrorKind::kShape, "ragged matrix in artifact");
    for (Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

}  // namespace

void save_factor_artifact(std::ostream& out, const FactorArtifact& a) {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["feature_names"] = a.feature_names;
  j["n_components"] = a.factors.loadings.cols();
  j["mean"] = to_json(a.standardization.mean);
  j["stddev"] = to_json(a.standardization.stddev);
  j["loadings"] = to_json(a.factors.loadings);
  j["factor_correlation"] = to_json(a.factors.factor_correlation);
  j["score_weights"] = to_json(a.factors.score_weights);
  j["explained_variance"] = to_json(a.factors.explained_variance);
  j["rotation_criterion"] = a.factors.rotation_criterion;
  j["gamma"] = a.factors.gamma;
  j["iterations"] = a.factors.iterations;
  j["converged"] = a.factors.converged;
  j["seed"] = a.seed;
  j["config_hash"] = a.config_hash;
  out << j.dump(1) << '\n';
}

FactorArtifact load_factor_artifact(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("factor artifact is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != kFormat || j.value("version", 0) != kVersion) {
    throw ParseError(0, "unsupported factor artifact format");
  }
  FactorArtifact a;
  try {
    a.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    const Index k = j.at("n_components").get<Index>();
    a.standardization.mean = vector_from(j.at("mean"));
    a.standardization.stddev = vector_from(j.at("stddev"));
    a.factors.loadings = matrix_from(j.at("loadings"), k);
    a.factors.factor_correlation = matrix_from(j.at("factor_correlation"), k);
    a.factors.score_weights = matrix_from(j.at("score_weights"), k);
    a.factors.explained_variance = vector_from(j.at("explained_variance"));
    a.factors.rotation_criterion = j.at("rotation_criterion").get<double>();
    a.factors.gamma = j.at("gamma").get<double>();
    a.factors.iterations = j.at("iterations").get<int>();
    a.factors.converged = j.at("converged").get<bool>();
    a.seed = j.at("seed").get<std::uint64_t>();
    a.config_hash = j.at("config_hash").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("incomplete factor artifact: ") + e.what());
  }
  const auto f = static_cast<Index>(a.feature_names.size());
  if (a.standardization.mean.size() != f || a.standardization.stddev.size() != f ||
      a.factors.score_weights.rows() != f || a.factors.loadings.rows() != f) {
    throw Error(ErrorKind::kShape, "factor artifact arrays disagree on the feature count");
  }
  return a;
}

}  // namespace wmfrec
