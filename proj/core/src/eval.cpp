#include "wmfrec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

#include "wmfrec/error.hpp"
#include "wmfrec/random.hpp"

namespace wmfrec {
namespace {

std::string_view candidate_definition(Task task) {
  switch (task) {
    case Task::kInMatrix:
      return "in-matrix items excluding the user's train and validation positives";
    case Task::kValidation:
      return "in-matrix items excluding the user's train positives";
    case Task::kOutOfMatrix:
      return "held-out (out-of-matrix) items";
  }
  return "";
}

SplitLabel relevant_label(Task task) {
  switch (task) {
    case Task::kInMatrix: return SplitLabel::kTestIn;
    case Task::kValidation: return SplitLabel::kValidation;
    case Task::kOutOfMatrix: return SplitLabel::kTestOut;
  }
  return SplitLabel::kTestIn;
}

bool excluded_from_candidates(Task task, SplitLabel label) {
  switch (task) {
    case Task::kInMatrix: return label == SplitLabel::kTrain || label == SplitLabel::kValidation;
    case Task::kValidation: return label == SplitLabel::kTrain;
    case Task::kOutOfMatrix: return false;
  }
  return false;
}

}  // namespace

std::string_view to_string(Task task) noexcept {
  switch (task) {
    case Task::kInMatrix: return "in_matrix";
    case Task::kOutOfMatrix: return "out_of_matrix";
    case Task::kValidation: return "validation";
  }
  return "?";
}

Task parse_task(std::string_view text) {
  if (text == "in_matrix") return Task::kInMatrix;
  if (text == "out_of_matrix") return Task::kOutOfMatrix;
  if (text == "validation") return Task::kValidation;
  throw Error(ErrorKind::kConfig, "unknown task '" + std::string(text) + "'");
}

RankedList rank_candidates(const ScoreFn& score, Index user, std::span<const Index> candidates) {
  if (candidates.empty()) throw Error(ErrorKind::kConfig, "empty candidate set");
  std::vector<std::pair<double, Index>> scored;
  scored.reserve(candidates.size());
  for (Index item : candidates) {
    const double s = score(user, item);
    if (std::isnan(s)) throw Error(ErrorKind::kData, "scorer produced NaN");
    scored.emplace_back(s, item);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  RankedList list;
  list.user = user;
  list.items.reserve(scored.size());
  list.scores.reserve(scored.size());
  for (const auto& [s, item] : scored) {
    list.items.push_back(item);
    list.scores.push_back(s);
  }
  return list;
}

std::optional<double> ndcg(std::span<const std::uint8_t> relevance) {
  double dcg = 0.0;
  std::size_t n_relevant = 0;
  for (std::size_t p = 0; p < relevance.size(); ++p) {
    if (relevance[p] != 0) {
      dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
      ++n_relevant;
    }
  }
  if (n_relevant == 0) return std::nullopt;
  double ideal = 0.0;
  for (std::size_t p = 0; p < n_relevant; ++p) ideal += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  return dcg / ideal;
}

FactorScorer::FactorScorer(const FactorModel& model, std::string name)
    : model_(model), name_(std::move(name)) {
  if (name_.empty()) name_ = model.content_aware() ? "content_aware" : "content_free";
}

double FactorScorer::score(Index user, Index item) const {
  return model_.user_factors.col(user).dot(model_.item_factors.col(item));
}

ColdStartScorer::ColdStartScorer(const FactorModel& model, const Matrix& content, std::string name)
    : content_(content), name_(std::move(name)) {
  if (!model.content_aware()) {
    throw Error(ErrorKind::kCapability, "content-free model cannot score out-of-matrix items");
  }
  if (content.rows() != model.content_dim()) {
    throw Error(ErrorKind::kShape, "content matrix must have L rows");
  }
  if (name_.empty()) name_ = "content_aware";
  user_content_ = model.content_map->transpose() * model.user_factors;
}

double ColdStartScorer::score(Index user, Index item) const {
  return user_content_.col(user).dot(content_.col(item));
}

ContentBaselineScorer::ContentBaselineScorer(Matrix profiles, std::vector<bool> has_profile,
                                             const Matrix& content, BaselineOptions options)
    : profiles_(std::move(profiles)),
      has_profile_(std::move(has_profile)),
      content_(content),
      options_(options) {}

double ContentBaselineScorer::score(Index user, Index item) const {
  const auto profile = profiles_.col(user);
  const auto z = content_.col(item);
  if (options_.similarity == Similarity::kEuclidean) return -(profile - z).norm();
  const double denom = profile.norm() * z.norm();
  return denom > 0.0 ? profile.dot(z) / denom : 0.0;
}

ContentBaselineScorer pure_content_baseline(const InteractionSet& interactions, const Matrix& content,
                                            const BaselineOptions& options) {
  if (content.cols() != interactions.n_items) {
    throw Error(ErrorKind::kShape, "content matrix must have one column per item");
  }
  const Index l = content.rows();
  Matrix sums = Matrix::Zero(l, interactions.n_users);
  Vector weights = Vector::Zero(interactions.n_users);
  for (const auto& e : interactions.positives) {
    if (e.label != SplitLabel::kTrain) continue;
    const double w = options.weighting == ProfileWeighting::kPlaycount ? static_cast<double>(e.count) : 1.0;
    sums.col(e.user) += w * content.col(e.item);
    weights(e.user) += w;
  }
  std::vector<bool> has_profile(static_cast<std::size_t>(interactions.n_users), false);
  for (Index u = 0; u < interactions.n_users; ++u) {
    if (weights(u) > 0.0) {
      sums.col(u) /= weights(u);
      has_profile[static_cast<std::size_t>(u)] =
          options.similarity == Similarity::kEuclidean || sums.col(u).norm() > 0.0;
    }
  }
  return ContentBaselineScorer(std::move(sums), std::move(has_profile), content, options);
}

double RandomScorer::score(Index user, Index item) const {
  const std::uint64_t bits = mix_seed(mix_seed(seed_, static_cast<std::uint64_t>(user)),
                                      static_cast<std::uint64_t>(item));
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

EvalReport evaluate(const Scorer& scorer, const InteractionSet& set, Task task) {
  if (!scorer.supports(task)) {
    throw Error(ErrorKind::kCapability, "method '" + scorer.name() + "' cannot run task " +
                                            std::string(to_string(task)));
  }
  std::vector<Index> universe;
  if (task == Task::kOutOfMatrix) {
    universe = set.out_of_matrix_items;
  } else {
    for (Index i = 0; i < set.n_items; ++i) {
      if (!set.is_out_of_matrix(i)) universe.push_back(i);
    }
  }
  if (universe.empty()) {
    throw Error(ErrorKind::kConfig, "task " + std::string(to_string(task)) + " has no candidate items");
  }

  EvalReport report;
  report.task = task;
  report.method = scorer.name();
  report.candidate_definition = std::string(candidate_definition(task));
  const SplitLabel wanted = relevant_label(task);

  // Positives are sorted by user, so walk them one user block at a time.
  std::vector<std::uint8_t> relevant_flag(static_cast<std::size_t>(set.n_items), 0);
  std::vector<std::uint8_t> excluded_flag(static_cast<std::size_t>(set.n_items), 0);
  std::vector<Index> candidates;
  std::vector<std::uint8_t> relevance;
  const ScoreFn score = [&scorer](Index u, Index i) { return scorer.score(u, i); };
  double total = 0.0;
  std::size_t cursor = 0;
  for (Index u = 0; u < set.n_users; ++u) {
    const std::size_t begin = cursor;
    while (cursor < set.positives.size() && set.positives[cursor].user == u) ++cursor;
    bool any_relevant = false;
    for (std::size_t k = begin; k < cursor; ++k) {
      const auto& e = set.positives[k];
      if (e.label == wanted) {
        relevant_flag[static_cast<std::size_t>(e.item)] = 1;
        any_relevant = true;
      } else if (excluded_from_candidates(task, e.label)) {
        excluded_flag[static_cast<std::size_t>(e.item)] = 1;
      }
    }
    auto reset = [&] {
      for (std::size_t k = begin; k < cursor; ++k) {
        relevant_flag[static_cast<std::size_t>(set.positives[k].item)] = 0;
        excluded_flag[static_cast<std::size_t>(set.positives[k].item)] = 0;
      }
    };
    if (!any_relevant) {
      ++report.skipped_no_relevant;
      reset();
      continue;
    }
    if (!scorer.can_score(u)) {
      ++report.skipped_unscorable;
      reset();
      continue;
    }
    candidates.clear();
    for (Index i : universe) {
      if (!excluded_flag[static_cast<std::size_t>(i)]) candidates.push_back(i);
    }
    const RankedList ranked = rank_candidates(score, u, candidates);
    relevance.resize(ranked.items.size());
    for (std::size_t p = 0; p < ranked.items.size(); ++p) {
      relevance[p] = relevant_flag[static_cast<std::size_t>(ranked.items[p])];
    }
    const auto value = ndcg(relevance);
    reset();
    if (!value) {
      ++report.skipped_no_relevant;
      continue;
    }
    report.users.push_back(u);
    report.ndcg.push_back(*value);
    total += *value;
  }
  report.mean = report.users.empty() ? std::numeric_limits<double>::quiet_NaN()
                                     : total / static_cast<double>(report.users.size());
  return report;
}

void write_report(std::ostream& out, const EvalReport& report, std::span<const std::string> user_ids,
                  std::string_view config_hash) {
  const auto precision = out.precision(std::numeric_limits<double>::max_digits10);
  for (std::size_t k = 0; k < report.users.size(); ++k) {
    const auto u = static_cast<std::size_t>(report.users[k]);
    if (u < user_ids.size()) {
      out << user_ids[u];
    } else {
      out << report.users[k];
    }
    out << ' ' << report.ndcg[k] << '\n';
  }
  out << "# task: " << to_string(report.task) << '\n'
      << "# method: " << report.method << '\n'
      << "# candidates: " << report.candidate_definition << '\n'
      << "# mean_ndcg: " << report.mean << '\n'
      << "# users_evaluated: " << report.users.size() << '\n'
      << "# skipped_no_relevant: " << report.skipped_no_relevant << '\n'
      << "# skipped_unscorable: " << report.skipped_unscorable << '\n'
      << "# config_hash: " << config_hash << '\n';
  out.precision(precision);
}

}  // namespace wmfrec
