#pragma once

// Content features: standardization, principal components, oblimin rotation
// and regression factor scores. With 16 high-level audio descriptors and three
// components the scores are the arousal / valence / depth content vectors.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "wmfrec/types.hpp"

namespace wmfrec {

/// Raw per-item feature values, one row per item.
struct FeatureTable {
  std::vector<std::string> item_ids;
  std::vector<std::string> feature_names;
  Matrix values;  // items x features
};

/// Header `item_id,<name>,...` then `item_id,v1,...,vF` rows. Comma or tab
/// separated. Missing or non-finite values are rejected.
FeatureTable parse_feature_table(std::istream& in);
FeatureTable load_feature_table(const std::filesystem::path& path);

/// Rows of `table` for the given ids, in that order. Throws Error(kData)
/// naming the first id without a feature row.
Matrix select_rows(const FeatureTable& table, std::span<const std::string> item_ids);

/// Per-feature affine map to zero mean and unit (population) variance.
struct Standardization {
  Vector mean;
  Vector stddev;

  Matrix apply(const Matrix& raw) const;
};

struct StandardizeResult {
  Matrix standardized;
  Standardization stats;
};

/// Throws Error(kDegenerate) naming the first constant column. `names` is
/// only used for the message and may be empty.
StandardizeResult standardize(const Matrix& raw, std::span<const std::string> names = {});

struct PcaResult {
  Matrix axes;      // features x k, unit eigenvectors of the correlation matrix
  Matrix loadings;  // features x k, axes scaled by sqrt(eigenvalue)
  Matrix scores;    // items x k, unit-variance component scores
  Vector explained_variance;  // k leading eigenvalues, non-increasing
  double total_variance = 0.0;
};

/// Principal components of standardized data. Loadings are feature/score
/// correlations; each column is signed so its largest |loading| is positive.
/// Throws Error(kShape) unless n_components <= features <= items, and
/// Error(kRank) if fewer than n_components directions carry variance.
PcaResult pca(const Matrix& standardized, Index n_components = 3);

/// Accepted iterate of the rotation, passed to RotationOptions::observer.
struct RotationStep {
  int iteration;
  double criterion;
  const Matrix& pattern;
  const Matrix& factor_correlation;
};

struct RotationOptions {
  double gamma = 0.0;  // 0 = quartimin
  int max_iter = 1000;
  double tol = 1e-8;
  std::function<void(const RotationStep&)> observer;
};

struct RotationResult {
  Matrix pattern;             // loadings * inverse(transform)^T
  Matrix factor_correlation;  // transform^T * transform
  Matrix transform;           // unit-norm columns
  double criterion = 0.0;
  std::vector<double> criterion_trace;  // starting value, then one per accepted step
  int iterations = 0;
  bool converged = false;
};

/// Oblimin criterion 1/4 * sum_{j!=k} sum_i (C L_j^2)_i (L_k^2)_i with
/// C = I - (gamma / p) 11^T.
double oblimin_criterion(const Matrix& loadings, double gamma);

/// Oblique gradient-projection rotation from the identity with step halving.
/// Only strictly improving steps are accepted. Stops when the criterion
/// decrease or the projected gradient norm drops below `tol`; hitting
/// `max_iter` returns the best iterate with converged = false.
RotationResult oblimin_rotate(const Matrix& loadings, const RotationOptions& options = {});

/// Rotated solution plus the weights that map standardized features to
/// factor scores.
struct FactorResult {
  Matrix loadings;            // features x L pattern matrix
  Matrix factor_correlation;  // L x L
  Matrix score_weights;       // features x L
  Vector explained_variance;  // pre-rotation, per component
  double rotation_criterion = 0.0;
  double gamma = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Least-squares (regression) score weights R^+ * pattern * Phi, where R is
/// the correlation matrix of the standardized features.
Matrix regression_score_weights(const Matrix& standardized, const Matrix& pattern,
                                const Matrix& factor_correlation);

/// standardized -> pca -> oblimin_rotate -> sign fix -> regression weights
/// S = R^+ * pattern * Phi, with R the feature correlation matrix.
FactorResult fit_factors(const Matrix& standardized, Index n_components = 3,
                         const RotationOptions& options = {});

/// Z = standardized * score_weights. Throws Error(kShape) on a feature-count
/// mismatch.
Matrix factor_scores(const Matrix& standardized, const FactorResult& factors);

/// Pearson correlation (population convention) of every feature column with
/// every factor column: features x factors. Throws Error(kDegenerate) for a
/// constant factor and Error(kShape) for fewer than two items.
Matrix correlation_report(const Matrix& standardized, const Matrix& scores);

/// Everything needed to score an unseen item from its raw features.
struct FactorArtifact {
  std::vector<std::string> feature_names;
  Standardization standardization;
  FactorResult factors;
  std::uint64_t seed = 0;
  std::string config_hash;

  Matrix score(const Matrix& raw) const;
};

/// JSON with shortest round-trip doubles, so a reload scores bit-exactly.
void save_factor_artifact(std::ostream& out, const FactorArtifact& artifact);
FactorArtifact load_factor_artifact(std::istream& in);

}  // namespace wmfrec
