#pragma once

// Weighted matrix factorization for implicit feedback, with an optional
// linear content prior h_i ~ N(B z_i, I / lambda_h) on the item factors.
//
//   min_{W,H,B}  sum_{u,i} c_ui (r_ui - w_u^T h_i)^2
//                + lambda_w sum_u |w_u|^2 + lambda_h sum_i |h_i - B z_i|^2
//
// Factors are stored column-wise: W is K x U, H is K x I, B is K x L and the
// content matrix Z is L x I.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wmfrec/ingest.hpp"
#include "wmfrec/types.hpp"

namespace wmfrec {

struct Hyperparams {
  Index rank = 50;
  double lambda_w = 1.0;
  double lambda_h = 1.0;
  double lambda_b = 1e-2;
  double alpha = 2.0;
  double epsilon = 1e-6;
  int n_iters = 20;
  // Confidence of unobserved pairs. 0 is the literal log-confidence; 1 gives
  // the classic 1 + alpha * log(1 + y / epsilon) weighting.
  double base_confidence = 0.0;

  /// Throws Error(kConfig) on rank < 1, alpha/epsilon <= 0, negative
  /// regularizers, negative base confidence or n_iters < 0.
  void validate() const;
};

/// base_confidence + alpha * ln(1 + count / epsilon).
double confidence(double count, double alpha, double epsilon, double base_confidence = 0.0);

struct WeightedEntry {
  Index user;
  Index item;
  double preference;  // r_ui, 0 or 1
  double confidence;  // c_ui
};

/// Explicitly weighted entries of the full U x I matrix; every other pair of
/// an active item has r = 0 and c = base_confidence. Inactive (held-out)
/// items take no part in training or the objective.
class ConfidenceMatrix {
 public:
  struct Cell {
    Index index;  // item for a user row, user for an item column
    double preference;
    double confidence;
  };

  ConfidenceMatrix(Index n_users, Index n_items, std::span<const WeightedEntry> entries,
                   double base_confidence, std::vector<bool> active_items = {});

  /// Train positives (r = 1) and in-matrix sub-threshold counts (r = 0), each
  /// weighted by its playcount confidence. Validation and test entries are
  /// left unobserved; held-out items are inactive.
  static ConfidenceMatrix from_interactions(const InteractionSet& interactions,
                                            const Hyperparams& params);

  Index n_users() const { return n_users_; }
  Index n_items() const { return n_items_; }
  double base_confidence() const { return base_confidence_; }
  bool is_active(Index item) const { return active_[static_cast<std::size_t>(item)]; }
  const std::vector<bool>& active_items() const { return active_; }

  std::span<const Cell> user_row(Index user) const;
  std::span<const Cell> item_column(Index item) const;

 private:
  Index n_users_;
  Index n_items_;
  double base_confidence_;
  std::vector<bool> active_;
  std::vector<std::size_t> row_offsets_;
  std::vector<Cell> rows_;
  std::vector<std::size_t> col_offsets_;
  std::vector<Cell> cols_;
};

struct FactorModel {
  Matrix user_factors;                 // K x U
  Matrix item_factors;                 // K x I
  std::optional<Matrix> content_map;   // K x L when trained content-aware
  Hyperparams hyperparams;

  Index rank() const { return user_factors.rows(); }
  Index n_users() const { return user_factors.cols(); }
  Index n_items() const { return item_factors.cols(); }
  bool content_aware() const { return content_map.has_value(); }
  Index content_dim() const { return content_map ? content_map->cols() : 0; }
};

/// Objective value over all (user, active item) pairs. The content variant
/// uses the model's B and `content` (L x I); the content-free variant takes
/// B z = 0. lambda_b is a numerical offset in the B solve and is not part of
/// the value.
double objective(const FactorModel& model, const ConfidenceMatrix& data);
double objective(const FactorModel& model, const ConfidenceMatrix& data, const Matrix& content);

/// w_u = (H C_u H^T + lambda_w I)^-1 H C_u r_u over active items.
Vector update_user(Index user, const Matrix& item_factors, const ConfidenceMatrix& data,
                   double lambda_w);

/// h_i = (W C_i W^T + lambda_h I)^-1 (W C_i r_i + lambda_h B z_i).
Vector update_item(Index item, const Matrix& user_factors, const ConfidenceMatrix& data,
                   double lambda_h, const Matrix& content_map, const Vector& content);
/// Content-free variant (B z_i = 0).
Vector update_item(Index item, const Matrix& user_factors, const ConfidenceMatrix& data,
                   double lambda_h);

/// B = H Z^T (Z Z^T + lambda_b I)^-1 over the given columns. Throws
/// Error(kSolver) when the system is singular.
Matrix update_content_map(const Matrix& item_factors, const Matrix& content, double lambda_b);

struct TrainResult {
  FactorModel model;
  std::vector<double> objective_trace;  // one value per sweep
  std::uint64_t seed = 0;
};

/// Alternating exact block updates: all users, then all active items, then
/// (content-aware) B. W and H start from N(0, 0.01^2) draws seeded by `seed`;
/// B starts at zero. Throws Error(kDivergence) on a non-finite objective.
TrainResult train(const ConfidenceMatrix& data, const Hyperparams& params, std::uint64_t seed);
TrainResult train(const ConfidenceMatrix& data, const Matrix& content, const Hyperparams& params,
                  std::uint64_t seed);

/// w_u^T h_i. Throws Error(kIndex) out of bounds.
double predict_in_matrix(const FactorModel& model, Index user, Index item);

/// w_u^T B z. Throws Error(kCapability) for a content-free model.
double predict_out_of_matrix(const FactorModel& model, Index user, const Vector& content);

}  // namespace wmfrec
