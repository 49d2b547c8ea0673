#include "wmfrec/cf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "wmfrec/error.hpp"
#include "wmfrec/random.hpp"

namespace wmfrec {
namespace {

constexpr double kInitStddev = 0.01;

std::vector<Index> active_indices(const ConfidenceMatrix& data) {
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(data.n_items()));
  for (Index i = 0; i < data.n_items(); ++i) {
    if (data.is_active(i)) idx.push_back(i);
  }
  return idx;
}

// base_confidence * F_a F_a^T, the contribution of every unobserved pair.
Matrix base_gram(const Matrix& factors, const std::vector<Index>& columns, double base) {
  const Index k = factors.rows();
  if (base == 0.0) return Matrix::Zero(k, k);
  const Matrix selected = factors(Eigen::all, columns);
  Matrix gram = base * (selected * selected.transpose());
  return gram;
}

Matrix base_gram(const Matrix& factors, double base) {
  const Index k = factors.rows();
  if (base == 0.0) return Matrix::Zero(k, k);
  return base * (factors * factors.transpose());
}

// Solves (gram + sum (c - c0) f f^T + lambda I) x = sum c r f + lambda prior.
Vector solve_block(const Matrix& gram, std::span<const ConfidenceMatrix::Cell> cells,
                   const Matrix& other, double base, double lambda, const Vector* prior) {
  const Index k = other.rows();
  Matrix lhs = gram;
  Vector rhs = Vector::Zero(k);
  for (const auto& cell : cells) {
    const auto f = other.col(cell.index);
    lhs.noalias() += (cell.confidence - base) * (f * f.transpose());
    if (cell.preference != 0.0) rhs.noalias() += (cell.confidence * cell.preference) * f;
  }
  lhs.diagonal().array() += lambda;
  if (prior != nullptr) rhs.noalias() += lambda * *prior;
  Eigen::LLT<Matrix> llt(lhs);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::kSolver, "normal equations are not positive definite (regularizer 0 "
                                    "with rank-deficient factors?)");
  }
  return llt.solve(rhs);
}

void check_content(const ConfidenceMatrix& data, const Matrix& content) {
  if (content.cols() != data.n_items() || content.rows() < 1) {
    throw Error(ErrorKind::kShape, "content matrix must be L x n_items (" +
                                       std::to_string(data.n_items()) + " columns), got " +
                                       std::to_string(content.rows()) + " x " +
                                       std::to_string(content.cols()));
  }
}

void check_model(const FactorModel& model, const ConfidenceMatrix& data) {
  if (model.n_users() != data.n_users() || model.n_items() != data.n_items() ||
      model.item_factors.rows() != model.rank()) {
    throw Error(ErrorKind::kShape, "model dimensions do not match the interaction data");
  }
}

double data_and_user_terms(const FactorModel& model, const ConfidenceMatrix& data,
                           const std::vector<Index>& active) {
  const Matrix& w = model.user_factors;
  const Matrix& h = model.item_factors;
  const double base = data.base_confidence();
  double total = 0.0;
  if (base != 0.0) {
    const Matrix h_active = h(Eigen::all, active);
    total += base * ((w * w.transpose()).cwiseProduct(h_active * h_active.transpose())).sum();
  }
  for (Index u = 0; u < data.n_users(); ++u) {
    for (const auto& cell : data.user_row(u)) {
      const double pred = w.col(u).dot(h.col(cell.index));
      const double err = cell.preference - pred;
      total += cell.confidence * err * err - base * pred * pred;
    }
  }
  return total + model.hyperparams.lambda_w * w.squaredNorm();
}

TrainResult train_impl(const ConfidenceMatrix& data, const Matrix* content,
                       const Hyperparams& params, std::uint64_t seed) {
  params.validate();
  if (content != nullptr) check_content(data, *content);
  const Index k = params.rank;
  const std::vector<Index> active = active_indices(data);
  if (active.empty()) throw Error(ErrorKind::kData, "no active items to train on");

  TrainResult result;
  result.seed = seed;
  FactorModel& model = result.model;
  model.hyperparams = params;
  model.user_factors.resize(k, data.n_users());
  model.item_factors.resize(k, data.n_items());
  Rng rng(seed);
  for (Index u = 0; u < data.n_users(); ++u) {
    for (Index r = 0; r < k; ++r) model.user_factors(r, u) = kInitStddev * rng.normal();
  }
  for (Index i = 0; i < data.n_items(); ++i) {
    for (Index r = 0; r < k; ++r) model.item_factors(r, i) = kInitStddev * rng.normal();
    if (!data.is_active(i)) model.item_factors.col(i).setZero();
  }
  if (content != nullptr) model.content_map = Matrix::Zero(k, content->rows());

  Matrix& w = model.user_factors;
  Matrix& h = model.item_factors;
  const double base = data.base_confidence();
  Matrix active_content;
  if (content != nullptr) active_content = (*content)(Eigen::all, active);

  for (int sweep = 0; sweep < params.n_iters; ++sweep) {
    const Matrix item_gram = base_gram(h, active, base);
    for (Index u = 0; u < data.n_users(); ++u) {
      w.col(u) = solve_block(item_gram, data.user_row(u), h, base, params.lambda_w, nullptr);
    }
    const Matrix user_gram = base_gram(w, base);
    Vector prior;
    for (Index i : active) {
      const Vector* prior_ptr = nullptr;
      if (content != nullptr) {
        prior = *model.content_map * content->col(i);
        prior_ptr = &prior;
      }
      h.col(i) = solve_block(user_gram, data.item_column(i), w, base, params.lambda_h, prior_ptr);
    }
    if (content != nullptr) {
      model.content_map = update_content_map(h(Eigen::all, active), active_content, params.lambda_b);
    }
    const double value = content != nullptr ? objective(model, data, *content) : objective(model, data);
    if (!std::isfinite(value)) {
      throw Error(ErrorKind::kDivergence, "objective became non-finite at sweep " + std::to_string(sweep + 1));
    }
    result.objective_trace.push_back(value);
  }
  return result;
}

}  // namespace

void Hyperparams::validate() const {
  if (rank < 1) throw Error(ErrorKind::kConfig, "rank K must be >= 1");
  if (!(alpha > 0.0)) throw Error(ErrorKind::kConfig, "alpha must be > 0");
  if (!(epsilon > 0.0)) throw Error(ErrorKind::kConfig, "epsilon must be > 0");
  if (!(lambda_w >= 0.0) || !(lambda_h >= 0.0) || !(lambda_b >= 0.0)) {
    throw Error(ErrorKind::kConfig, "regularizers must be nonnegative");
  }
  if (!(base_confidence >= 0.0)) throw Error(ErrorKind::kConfig, "base_confidence must be >= 0");
  if (n_iters < 0) throw Error(ErrorKind::kConfig, "n_iters must be >= 0");
}

double confidence(double count, double alpha, double epsilon, double base_confidence) {
  return base_confidence + alpha * std::log1p(count / epsilon);
}

ConfidenceMatrix::ConfidenceMatrix(Index n_users, Index n_items,
                                   std::span<const WeightedEntry> entries, double base_confidence,
                                   std::vector<bool> active_items)
    : n_users_(n_users),
      n_items_(n_items),
      base_confidence_(base_confidence),
      active_(std::move(active_items)) {
  if (n_users < 0 || n_items < 0) throw Error(ErrorKind::kShape, "negative dimensions");
  if (active_.empty()) active_.assign(static_cast<std::size_t>(n_items), true);
  if (static_cast<Index>(active_.size()) != n_items) {
    throw Error(ErrorKind::kShape, "active item mask has the wrong length");
  }
  std::vector<WeightedEntry> sorted(entries.begin(), entries.end());
  std::sort(sorted.begin(), sorted.end(), [](const WeightedEntry& a, const WeightedEntry& b) {
    return std::tie(a.user, a.item) < std::tie(b.user, b.item);
  });
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const auto& e = sorted[k];
    if (e.user < 0 || e.user >= n_users || e.item < 0 || e.item >= n_items) {
      throw Error(ErrorKind::kIndex, "entry index out of bounds");
    }
    if (!is_active(e.item)) throw Error(ErrorKind::kData, "entry on an inactive item");
    if (!(e.confidence >= 0.0) || !std::isfinite(e.preference)) {
      throw Error(ErrorKind::kData, "confidence must be finite and nonnegative");
    }
    if (k > 0 && sorted[k - 1].user == e.user && sorted[k - 1].item == e.item) {
      throw Error(ErrorKind::kData, "duplicate (user, item) entry");
    }
  }
  row_offsets_.assign(static_cast<std::size_t>(n_users) + 1, 0);
  col_offsets_.assign(static_cast<std::size_t>(n_items) + 1, 0);
  for (const auto& e : sorted) {
    ++row_offsets_[static_cast<std::size_t>(e.user) + 1];
    ++col_offsets_[static_cast<std::size_t>(e.item) + 1];
  }
  std::partial_sum(row_offsets_.begin(), row_offsets_.end(), row_offsets_.begin());
  std::partial_sum(col_offsets_.begin(), col_offsets_.end(), col_offsets_.begin());
  rows_.resize(sorted.size());
  cols_.resize(sorted.size());
  std::vector<std::size_t> row_fill(row_offsets_.begin(), row_offsets_.end() - 1);
  std::vector<std::size_t> col_fill(col_offsets_.begin(), col_offsets_.end() - 1);
  for (const auto& e : sorted) {
    rows_[row_fill[static_cast<std::size_t>(e.user)]++] = {e.item, e.preference, e.confidence};
    cols_[col_fill[static_cast<std::size_t>(e.item)]++] = {e.user, e.preference, e.confidence};
  }
}

ConfidenceMatrix ConfidenceMatrix::from_interactions(const InteractionSet& set,
                                                     const Hyperparams& params) {
  std::vector<WeightedEntry> entries;
  entries.reserve(set.positives.size() + set.weak.size());
  for (const auto& e : set.positives) {
    if (e.label != SplitLabel::kTrain) continue;
    entries.push_back({e.user, e.item, 1.0,
                       confidence(e.count, params.alpha, params.epsilon, params.base_confidence)});
  }
  for (const auto& e : set.weak) {
    entries.push_back({e.user, e.item, 0.0,
                       confidence(e.count, params.alpha, params.epsilon, params.base_confidence)});
  }
  std::vector<bool> active(static_cast<std::size_t>(set.n_items));
  for (Index i = 0; i < set.n_items; ++i) active[static_cast<std::size_t>(i)] = !set.is_out_of_matrix(i);
  return ConfidenceMatrix(set.n_users, set.n_items, entries, params.base_confidence, std::move(active));
}

std::span<const ConfidenceMatrix::Cell> ConfidenceMatrix::user_row(Index user) const {
  const auto u = static_cast<std::size_t>(user);
  return {rows_.data() + row_offsets_[u], row_offsets_[u + 1] - row_offsets_[u]};
}

std::span<const ConfidenceMatrix::Cell> ConfidenceMatrix::item_column(Index item) const {
  const auto i = static_cast<std::size_t>(item);
  return {cols_.data() + col_offsets_[i], col_offsets_[i + 1] - col_offsets_[i]};
}

double objective(const FactorModel& model, const ConfidenceMatrix& data) {
  check_model(model, data);
  const auto active = active_indices(data);
  double total = data_and_user_terms(model, data, active);
  double prior = 0.0;
  for (Index i : active) prior += model.item_factors.col(i).squaredNorm();
  return total + model.hyperparams.lambda_h * prior;
}

double objective(const FactorModel& model, const ConfidenceMatrix& data, const Matrix& content) {
  check_model(model, data);
  check_content(data, content);
  if (!model.content_map || model.content_map->cols() != content.rows()) {
    throw Error(ErrorKind::kShape, "content-aware objective needs a K x L content map");
  }
  const auto active = active_indices(data);
  double total = data_and_user_terms(model, data, active);
  double prior = 0.0;
  for (Index i : active) {
    prior += (model.item_factors.col(i) - *model.content_map * content.col(i)).squaredNorm();
  }
  return total + model.hyperparams.lambda_h * prior;
}

Vector update_user(Index user, const Matrix& item_factors, const ConfidenceMatrix& data,
                   double lambda_w) {
  if (user < 0 || user >= data.n_users()) throw Error(ErrorKind::kIndex, "user index out of bounds");
  if (item_factors.cols() != data.n_items()) throw Error(ErrorKind::kShape, "H must have n_items columns");
  const double base = data.base_confidence();
  return solve_block(base_gram(item_factors, active_indices(data), base), data.user_row(user),
                     item_factors, base, lambda_w, nullptr);
}

Vector update_item(Index item, const Matrix& user_factors, const ConfidenceMatrix& data,
                   double lambda_h, const Matrix& content_map, const Vector& content) {
  if (item < 0 || item >= data.n_items()) throw Error(ErrorKind::kIndex, "item index out of bounds");
  if (user_factors.cols() != data.n_users()) throw Error(ErrorKind::kShape, "W must have n_users columns");
  if (content_map.rows() != user_factors.rows() || content_map.cols() != content.size()) {
    throw Error(ErrorKind::kShape, "content map must be K x L and match the content vector");
  }
  const double base = data.base_confidence();
  const Vector prior = content_map * content;
  return solve_block(base_gram(user_factors, base), data.item_column(item), user_factors, base,
                     lambda_h, &prior);
}

Vector update_item(Index item, const Matrix& user_factors, const ConfidenceMatrix& data,
                   double lambda_h) {
  if (item < 0 || item >= data.n_items()) throw Error(ErrorKind::kIndex, "item index out of bounds");
  if (user_factors.cols() != data.n_users()) throw Error(ErrorKind::kShape, "W must have n_users columns");
  const double base = data.base_confidence();
  return solve_block(base_gram(user_factors, base), data.item_column(item), user_factors, base,
                     lambda_h, nullptr);
}

Matrix update_content_map(const Matrix& item_factors, const Matrix& content, double lambda_b) {
  if (item_factors.cols() != content.cols()) {
    throw Error(ErrorKind::kShape, "H and Z must have the same number of columns");
  }
  Matrix gram = content * content.transpose();
  gram.diagonal().array() += lambda_b;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::kSolver, "Z Z^T + lambda_b I is singular; use lambda_b > 0");
  }
  // B^T = (Z Z^T + lambda_b I)^-1 Z H^T
  return llt.solve(content * item_factors.transpose()).transpose();
}

TrainResult train(const ConfidenceMatrix& data, const Hyperparams& params, std::uint64_t seed) {
  return train_impl(data, nullptr, params, seed);
}

TrainResult train(const ConfidenceMatrix& data, const Matrix& content, const Hyperparams& params,
                  std::uint64_t seed) {
  return train_impl(data, &content, params, seed);
}

double predict_in_matrix(const FactorModel& model, Index user, Index item) {
  if (user < 0 || user >= model.n_users() || item < 0 || item >= model.n_items()) {
    throw Error(ErrorKind::kIndex, "prediction index out of bounds");
  }
  return model.user_factors.col(user).dot(model.item_factors.col(item));
}

double predict_out_of_matrix(const FactorModel& model, Index user, const Vector& content) {
  if (!model.content_aware()) {
    throw Error(ErrorKind::kCapability, "content-free model cannot score out-of-matrix items");
  }
  if (user < 0 || user >= model.n_users()) throw Error(ErrorKind::kIndex, "user index out of bounds");
  if (content.size() != model.content_dim()) {
    throw Error(ErrorKind::kShape, "content vector has the wrong dimension");
  }
  return model.user_factors.col(user).dot(*model.content_map * content);
}

}  // namespace wmfrec
