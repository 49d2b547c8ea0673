#pragma once

// Ranked-list construction, NDCG and per-task evaluation harness.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmfrec/cf.hpp"
#include "wmfrec/ingest.hpp"
#include "wmfrec/types.hpp"

namespace wmfrec {

enum class Task {
  kInMatrix,     // rank in-matrix items against test_in positives
  kOutOfMatrix,  // rank held-out items against test_out positives
  kValidation,   // rank in-matrix items against validation positives (tuning)
};

std::string_view to_string(Task task) noexcept;
Task parse_task(std::string_view text);

struct RankedList {
  Index user = 0;
  std::vector<Index> items;   // descending score, ties by ascending item index
  std::vector<double> scores;
};

using ScoreFn = std::function<double(Index user, Index item)>;

/// Throws Error(kData) on a NaN score and Error(kConfig) on an empty
/// candidate set.
RankedList rank_candidates(const ScoreFn& score, Index user, std::span<const Index> candidates);

/// DCG / IDCG with DCG = sum_p rel_p / log2(p + 1) over 1-based positions.
/// Returns nullopt when nothing is relevant (the user is skipped upstream).
std::optional<double> ndcg(std::span<const std::uint8_t> relevance);

class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual std::string name() const = 0;
  virtual bool supports(Task task) const = 0;
  /// False for users the method has no basis to score; they are skipped and
  /// counted.
  virtual bool can_score(Index /*user*/) const { return true; }
  virtual double score(Index user, Index item) const = 0;
};

/// In-matrix WMF predictions w_u^T h_i. Keeps a reference to the model.
class FactorScorer final : public Scorer {
 public:
  explicit FactorScorer(const FactorModel& model, std::string name = {});

  std::string name() const override { return name_; }
  bool supports(Task task) const override { return task != Task::kOutOfMatrix; }
  double score(Index user, Index item) const override;

 private:
  const FactorModel& model_;
  std::string name_;
};

/// Cold-start predictions w_u^T B z_i for items without trained factors.
/// Throws Error(kCapability) for a content-free model. `content` (L x I) must
/// outlive the scorer.
class ColdStartScorer final : public Scorer {
 public:
  ColdStartScorer(const FactorModel& model, const Matrix& content, std::string name = {});

  std::string name() const override { return name_; }
  bool supports(Task task) const override { return task == Task::kOutOfMatrix; }
  double score(Index user, Index item) const override;

 private:
  Matrix user_content_;  // B^T W, L x U
  const Matrix& content_;
  std::string name_;
};

enum class Similarity { kCosine, kEuclidean };
enum class ProfileWeighting { kUniform, kPlaycount };

struct BaselineOptions {
  Similarity similarity = Similarity::kCosine;
  ProfileWeighting weighting = ProfileWeighting::kUniform;
};

/// Pure-content cold-start baseline: a user's profile is the mean content
/// vector of their training positives and an item scores by its similarity to
/// it (cosine, or negative Euclidean distance).
class ContentBaselineScorer final : public Scorer {
 public:
  ContentBaselineScorer(Matrix profiles, std::vector<bool> has_profile, const Matrix& content,
                        BaselineOptions options);

  std::string name() const override { return "pure_content"; }
  bool supports(Task task) const override { return task == Task::kOutOfMatrix; }
  bool can_score(Index user) const override { return has_profile_[static_cast<std::size_t>(user)]; }
  double score(Index user, Index item) const override;

  const Matrix& profiles() const { return profiles_; }

 private:
  Matrix profiles_;  // L x U
  std::vector<bool> has_profile_;
  const Matrix& content_;
  BaselineOptions options_;
};

/// `content` is L x I and must outlive the scorer.
ContentBaselineScorer pure_content_baseline(const InteractionSet& interactions,
                                            const Matrix& content,
                                            const BaselineOptions& options = {});

/// Uniform pseudo-random score per (user, item), fixed by the seed.
class RandomScorer final : public Scorer {
 public:
  explicit RandomScorer(std::uint64_t seed) : seed_(seed) {}

  std::string name() const override { return "random"; }
  bool supports(Task) const override { return true; }
  double score(Index user, Index item) const override;

 private:
  std::uint64_t seed_;
};

/// Adapts a plain function; supports every task.
class FunctionScorer final : public Scorer {
 public:
  FunctionScorer(ScoreFn fn, std::string name) : fn_(std::move(fn)), name_(std::move(name)) {}

  std::string name() const override { return name_; }
  bool supports(Task) const override { return true; }
  double score(Index user, Index item) const override { return fn_(user, item); }

 private:
  ScoreFn fn_;
  std::string name_;
};

struct EvalReport {
  Task task = Task::kInMatrix;
  std::string method;
  std::string candidate_definition;
  std::vector<Index> users;   // evaluated users, ascending
  std::vector<double> ndcg;   // aligned with users
  double mean = 0.0;          // NaN when no user was evaluated
  Index skipped_no_relevant = 0;
  Index skipped_unscorable = 0;
};

/// Candidate sets:
///  in_matrix   - in-matrix items minus the user's train and validation positives
///  validation  - in-matrix items minus the user's train positives
///  out_of_matrix - the held-out items
/// Throws Error(kCapability) if the scorer does not support the task and
/// Error(kConfig) if the candidate universe is empty.
EvalReport evaluate(const Scorer& scorer, const InteractionSet& interactions, Task task);

/// `user_id ndcg` lines followed by a `#`-prefixed summary block.
void write_report(std::ostream& out, const EvalReport& report,
                  std::span<const std::string> user_ids, std::string_view config_hash = {});

}  // namespace wmfrec
