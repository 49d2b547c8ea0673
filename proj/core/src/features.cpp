#include "wmfrec/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <unordered_map>

#include "detail/text.hpp"
#include "wmfrec/error.hpp"

namespace wmfrec {
namespace {

double parse_value(std::string_view field, std::size_t line_no) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() ||
      !std::isfinite(value)) {
    throw ParseError(line_no, "bad or missing feature value '" + std::string(field) + "'");
  }
  return value;
}

// Flips columns so the entry of largest magnitude in each column of `anchor`
// is positive. Returns the applied signs.
Vector sign_fix(Matrix& anchor) {
  Vector signs = Vector::Ones(anchor.cols());
  for (Index j = 0; j < anchor.cols(); ++j) {
    Index arg = 0;
    anchor.col(j).cwiseAbs().maxCoeff(&arg);
    if (anchor(arg, j) < 0.0) {
      anchor.col(j) *= -1.0;
      signs(j) = -1.0;
    }
  }
  return signs;
}

struct CriterionAndGradient {
  double value;
  Matrix gradient;  // d criterion / d loadings
};

CriterionAndGradient oblimin_value_and_gradient(const Matrix& loadings, double gamma) {
  const Matrix squared = loadings.cwiseAbs2();
  const Index k = loadings.cols();
  const Index p = loadings.rows();
  const Matrix off_diagonal = Matrix::Ones(k, k) - Matrix::Identity(k, k);
  Matrix cross = squared * off_diagonal;
  if (gamma != 0.0) {
    cross = (Matrix::Identity(p, p) - Matrix::Constant(p, p, gamma / static_cast<double>(p))) * cross;
  }
  return {squared.cwiseProduct(cross).sum() / 4.0, loadings.cwiseProduct(cross)};
}

Matrix inverse_transpose(const Matrix& transform) {
  return transform.partialPivLu().inverse().transpose();
}

// Symmetric pseudo-inverse; eigen-directions below a relative cutoff are
// treated as null.
Matrix pseudo_inverse_spd(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  const Vector& values = eig.eigenvalues();
  const double cutoff = 1e-10 * std::max(values.cwiseAbs().maxCoeff(), 1e-300);
  Vector inv = Vector::Zero(values.size());
  for (Index j = 0; j < values.size(); ++j) {
    if (values(j) > cutoff) inv(j) = 1.0 / values(j);
  }
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

FeatureTable parse_feature_table(std::istream& in) {
  FeatureTable table;
  std::vector<std::vector<double>> rows;
  std::unordered_map<std::string, std::size_t> seen;
  detail::Separator sep = detail::Separator::kComma;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = detail::trim(line);
    if (view.empty()) continue;
    if (!have_header) {
      sep = detail::detect_separator(view);
      const auto fields = detail::split(view, sep);
      if (fields.size() < 2) throw ParseError(line_no, "header needs an id column and >= 1 feature");
      for (std::size_t j = 1; j < fields.size(); ++j) table.feature_names.emplace_back(fields[j]);
      have_header = true;
      continue;
    }
    const auto fields = detail::split(view, sep);
    if (fields.size() != table.feature_names.size() + 1) {
      throw ParseError(line_no, "expected " + std::to_string(table.feature_names.size() + 1) +
                                    " fields, found " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw ParseError(line_no, "empty item id");
    auto [it, inserted] = seen.try_emplace(std::string(fields[0]), line_no);
    if (!inserted) {
      throw Error(ErrorKind::kData, "item '" + std::string(fields[0]) + "' listed twice (lines " +
                                        std::to_string(it->second) + ", " +
                                        std::to_string(line_no) + ")");
    }
    table.item_ids.emplace_back(fields[0]);
    std::vector<double>& row = rows.emplace_back();
    row.reserve(fields.size() - 1);
    for (std::size_t j = 1; j < fields.size(); ++j) row.push_back(parse_value(fields[j], line_no));
  }
  if (!have_header) throw ParseError(0, "feature table is empty");
  table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(table.feature_names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < rows[r].size(); ++j) {
      table.values(static_cast<Index>(r), static_cast<Index>(j)) = rows[r][j];
    }
  }
  return table;
}

FeatureTable load_feature_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kPath, "cannot open feature table " + path.string());
  return parse_feature_table(in);
}

Matrix select_rows(const FeatureTable& table, std::span<const std::string> item_ids) {
  std::unordered_map<std::string_view, Index> row_of;
  row_of.reserve(table.item_ids.size());
  for (std::size_t r = 0; r < table.item_ids.size(); ++r) row_of.emplace(table.item_ids[r], static_cast<Index>(r));
  Matrix out(static_cast<Index>(item_ids.size()), table.values.cols());
  for (std::size_t k = 0; k < item_ids.size(); ++k) {
    const auto found = row_of.find(item_ids[k]);
    if (found == row_of.end()) {
      throw Error(ErrorKind::kData, "item '" + item_ids[k] + "' has no feature row");
    }
    out.row(static_cast<Index>(k)) = table.values.row(found->second);
  }
  return out;
}

Matrix Standardization::apply(const Matrix& raw) const {
  if (raw.cols() != mean.size()) {
    throw Error(ErrorKind::kShape, "expected " + std::to_string(mean.size()) + " features, got " +
                                       std::to_string(raw.cols()));
  }
  return (raw.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array();
}

StandardizeResult standardize(const Matrix& raw, std::span<const std::string> names) {
  if (raw.rows() < 1) throw Error(ErrorKind::kShape, "cannot standardize an empty matrix");
  const auto n = static_cast<double>(raw.rows());
  StandardizeResult result;
  result.stats.mean = raw.colwise().sum().transpose() / n;
  const Matrix centered = raw.rowwise() - result.stats.mean.transpose();
  result.stats.stddev = (centered.colwise().squaredNorm().transpose() / n).cwiseSqrt();
  for (Index j = 0; j < raw.cols(); ++j) {
    const double scale = std::max(1.0, std::abs(result.stats.mean(j)));
    if (!(result.stats.stddev(j) > 1e-12 * scale)) {
      const std::string name = static_cast<std::size_t>(j) < names.size()
                                   ? names[static_cast<std::size_t>(j)]
                                   : "#" + std::to_string(j);
      throw Error(ErrorKind::kDegenerate, "feature '" + name + "' has zero variance");
    }
  }
  result.standardized = centered.array().rowwise() / result.stats.stddev.transpose().array();
  return result;
}

PcaResult pca(const Matrix& standardized, Index n_components) {
  const Index n = standardized.rows();
  const Index f = standardized.cols();
  if (n_components < 1 || n_components > f || f > n) {
    throw Error(ErrorKind::kShape, "pca needs 1 <= n_components (" + std::to_string(n_components) +
                                       ") <= features (" + std::to_string(f) + ") <= items (" +
                                       std::to_string(n) + ")");
  }
  const Matrix correlation = standardized.transpose() * standardized / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(correlation);
  if (eig.info() != Eigen::Success) throw Error(ErrorKind::kSolver, "eigendecomposition failed");

  PcaResult result;
  result.total_variance = correlation.trace();
  result.axes.resize(f, n_components);
  result.explained_variance.resize(n_components);
  for (Index k = 0; k < n_components; ++k) {
    result.axes.col(k) = eig.eigenvectors().col(f - 1 - k);
    result.explained_variance(k) = eig.eigenvalues()(f - 1 - k);
  }
  const double largest = std::max(eig.eigenvalues()(f - 1), 0.0);
  if (!(result.explained_variance(n_components - 1) > 1e-10 * largest) || largest <= 0.0) {
    throw Error(ErrorKind::kRank, "data has fewer than " + std::to_string(n_components) +
                                      " directions with nonzero variance");
  }
  sign_fix(result.axes);
  const Vector root = result.explained_variance.cwiseSqrt();
  result.loadings = result.axes * root.asDiagonal();
  result.scores = standardized * result.axes * root.cwiseInverse().asDiagonal();
  return result;
}

double oblimin_criterion(const Matrix& loadings, double gamma) {
  return oblimin_value_and_gradient(loadings, gamma).value;
}

RotationResult oblimin_rotate(const Matrix& loadings, const RotationOptions& options) {
  const Index k = loadings.cols();
  if (k < 2) throw Error(ErrorKind::kShape, "rotation needs at least two factors");

  RotationResult result;
  Matrix transform = Matrix::Identity(k, k);
  Matrix pattern = loadings;
  auto current = oblimin_value_and_gradient(pattern, options.gamma);
  // Gradient with respect to the transform for L = A * inv(T)^T.
  auto transform_gradient = [](const Matrix& pattern_, const Matrix& grad, const Matrix& t) {
    return Matrix(-(pattern_.transpose() * grad * t.partialPivLu().inverse()).transpose());
  };
  Matrix gradient = transform_gradient(pattern, current.gradient, transform);
  result.criterion_trace.push_back(current.value);

  double step = 1.0;
  int iteration = 0;
  bool converged = false;
  for (; iteration < options.max_iter; ++iteration) {
    const Vector col_dots = transform.cwiseProduct(gradient).colwise().sum().transpose();
    const Matrix projected = gradient - transform * col_dots.asDiagonal();
    const double grad_norm = projected.norm();
    if (grad_norm < options.tol) {
      converged = true;
      break;
    }
    step *= 2.0;
    bool accepted = false;
    Matrix next_transform;
    Matrix next_pattern;
    CriterionAndGradient next;
    for (int halving = 0; halving < 60; ++halving) {
      next_transform = transform - step * projected;
      const Vector norms = next_transform.colwise().norm().transpose();
      next_transform = next_transform * norms.cwiseInverse().asDiagonal();
      next_pattern = loadings * inverse_transpose(next_transform);
      next = oblimin_value_and_gradient(next_pattern, options.gamma);
      if (current.value - next.value > 0.5 * grad_norm * grad_norm * step) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent step is representable: stationary to working precision.
      converged = true;
      break;
    }
    const double decrease = current.value - next.value;
    transform = std::move(next_transform);
    pattern = std::move(next_pattern);
    current = std::move(next);
    gradient = transform_gradient(pattern, current.gradient, transform);
    result.criterion_trace.push_back(current.value);
    if (options.observer) {
      const Matrix phi = transform.transpose() * transform;
      options.observer(RotationStep{iteration + 1, current.value, pattern, phi});
    }
    if (decrease < options.tol) {
      converged = true;
      ++iteration;
      break;
    }
  }

  result.transform = transform;
  result.pattern = pattern;
  result.factor_correlation = transform.transpose() * transform;
  result.criterion = current.value;
  result.iterations = iteration;
  result.converged = converged;
  return result;
}

Matrix regression_score_weights(const Matrix& standardized, const Matrix& pattern,
                                const Matrix& factor_correlation) {
  const Matrix correlation =
      standardized.transpose() * standardized / static_cast<double>(standardized.rows());
  return pseudo_inverse_spd(correlation) * pattern * factor_correlation;
}

FactorResult fit_factors(const Matrix& standardized, Index n_components,
                         const RotationOptions& options) {
  const PcaResult components = pca(standardized, n_components);
  FactorResult result;
  result.explained_variance = components.explained_variance;
  result.gamma = options.gamma;
  if (n_components == 1) {
    result.loadings = components.loadings;
    result.factor_correlation = Matrix::Identity(1, 1);
    result.converged = true;
  } else {
    RotationResult rotated = oblimin_rotate(components.loadings, options);
    const Vector signs = sign_fix(rotated.pattern);
    result.loadings = rotated.pattern;
    result.factor_correlation = signs.asDiagonal() * rotated.factor_correlation * signs.asDiagonal();
    result.rotation_criterion = rotated.criterion;
    result.iterations = rotated.iterations;
    result.converged = rotated.converged;
  }
  result.score_weights =
      regression_score_weights(standardized, result.loadings, result.factor_correlation);
  return result;
}

Matrix factor_scores(const Matrix& standardized, const FactorResult& factors) {
  if (standardized.cols() != factors.score_weights.rows()) {
    throw Error(ErrorKind::kShape, "expected " + std::to_string(factors.score_weights.rows()) +
                                       " features, got " + std::to_string(standardized.cols()));
  }
  return standardized * factors.score_weights;
}

Matrix correlation_report(const Matrix& standardized, const Matrix& scores) {
  if (standardized.rows() != scores.rows()) {
    throw Error(ErrorKind::kShape, "features and scores cover different item counts");
  }
  if (standardized.rows() < 2) throw Error(ErrorKind::kShape, "correlations need >= 2 items");
  const auto n = static_cast<double>(standardized.rows());
  auto center = [n](const Matrix& m) -> Matrix {
    return m.rowwise() - (m.colwise().sum() / n);
  };
  const Matrix x = center(standardized);
  const Matrix z = center(scores);
  const Vector x_sd = (x.colwise().squaredNorm().transpose() / n).cwiseSqrt();
  const Vector z_sd = (z.colwise().squaredNorm().transpose() / n).cwiseSqrt();
  for (Index k = 0; k < z_sd.size(); ++k) {
    if (!(z_sd(k) > 0.0)) {
      throw Error(ErrorKind::kDegenerate, "factor " + std::to_string(k) + " has zero variance");
    }
  }
  for (Index j = 0; j < x_sd.size(); ++j) {
    if (!(x_sd(j) > 0.0)) {
      throw Error(ErrorKind::kDegenerate, "feature " + std::to_string(j) + " has zero variance");
    }
  }
  Matrix corr = (x.transpose() * z / n).array().colwise() / x_sd.array();
  corr = corr.array().rowwise() / z_sd.transpose().array();
  return corr.cwiseMax(-1.0).cwiseMin(1.0);
}

Matrix FactorArtifact::score(const Matrix& raw) const {
  return factor_scores(standardization.apply(raw), factors);
}

}  // namespace wmfrec
