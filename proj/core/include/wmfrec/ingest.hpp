#pragma once

// Playcount ingestion, activity filtering, binarization and the
// train/validation/test split used by every downstream stage.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "wmfrec/types.hpp"

namespace wmfrec {

struct Playcount {
  Index user;
  Index item;
  std::uint32_t count;
};

/// Sparse user x item listening counts. Zero counts are never stored, and
/// each (user, item) pair appears at most once.
struct PlaycountMatrix {
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::vector<Playcount> entries;

  Index n_users() const { return static_cast<Index>(user_ids.size()); }
  Index n_items() const { return static_cast<Index>(item_ids.size()); }
};

/// Reads `user<sep>item<sep>count` records. The separator is detected from the
/// first non-blank line: tab if present, else comma, else runs of spaces.
/// Indices are assigned in order of first appearance.
PlaycountMatrix parse_playcounts(std::istream& in);
PlaycountMatrix load_playcounts(const std::filesystem::path& path);

/// Tab-separated, one record per line, in storage order.
void write_playcounts(std::ostream& out, const PlaycountMatrix& m);

struct ActivityFilter {
  Index min_songs_per_user = 20;
  Index min_users_per_song = 50;
  // Optional popularity cut applied before the threshold fixpoint: keep only
  // the users (items) with the largest total playcount. Off by default.
  std::optional<Index> top_users;
  std::optional<Index> top_items;
};

/// Alternately drops items with fewer than `min_users_per_song` listeners and
/// users with fewer than `min_songs_per_user` songs until neither rule removes
/// anything. Surviving ids keep their relative order.
PlaycountMatrix filter_activity(const PlaycountMatrix& m, const ActivityFilter& filter = {});

/// Keeps only items whose external id is in `keep` (e.g. songs with content
/// features). Users left without entries are dropped too.
PlaycountMatrix restrict_items(const PlaycountMatrix& m,
                               const std::unordered_set<std::string>& keep);

struct Cell {
  Index user;
  Index item;

  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

struct BinaryMatrix {
  Index n_users = 0;
  Index n_items = 0;
  std::uint32_t threshold = 5;
  std::vector<Cell> positives;
};

/// r = 1 iff playcount >= threshold.
BinaryMatrix binarize(const PlaycountMatrix& m, std::uint32_t threshold = 5);

enum class SplitLabel : std::uint8_t { kTrain, kValidation, kTestIn, kTestOut };

std::string_view to_string(SplitLabel label) noexcept;
SplitLabel parse_split_label(std::string_view text);

struct SplitConfig {
  double out_of_matrix_song_fraction = 0.05;
  double train = 0.70;
  double validation = 0.20;
  double test_in = 0.10;
  std::uint64_t seed = 0;

  /// Throws Error(kConfig) on negative fractions or when the in-matrix
  /// fractions do not sum to one within 1e-12.
  void validate() const;
};

struct LabeledEntry {
  Index user;
  Index item;
  std::uint32_t count;
  SplitLabel label;
};

/// Observed playcount below the binarization threshold. Only kept for
/// in-matrix items; training treats it as r = 0 with the count's confidence.
struct WeakEntry {
  Index user;
  Index item;
  std::uint32_t count;
};

struct InteractionSet {
  Index n_users = 0;
  Index n_items = 0;
  std::uint32_t threshold = 5;
  SplitConfig config;
  std::vector<LabeledEntry> positives;  // sorted by (user, item)
  std::vector<WeakEntry> weak;          // sorted by (user, item)
  std::vector<Index> out_of_matrix_items;  // sorted
  std::vector<bool> held_out;           // per item

  bool is_out_of_matrix(Index item) const { return held_out[static_cast<std::size_t>(item)]; }
  Index count(SplitLabel label) const;
  Index in_matrix_item_count() const {
    return n_items - static_cast<Index>(out_of_matrix_items.size());
  }
};

/// Holds out ceil(fraction * n_items) items (all their positives become
/// test_out), then partitions the remaining positives per entry into
/// train/validation/test_in. Deterministic in `cfg.seed`.
InteractionSet make_splits(const BinaryMatrix& binary, const PlaycountMatrix& raw,
                           const SplitConfig& cfg);

/// Split manifest: a `# {json}` header (seed, fractions, threshold, sizes,
/// held-out items, config hash) followed by `user_index item_index label`
/// lines for every positive entry.
void write_split_manifest(std::ostream& out, const InteractionSet& split,
                          std::string_view config_hash = {});

struct LoadedSplit {
  InteractionSet interactions;
  std::string config_hash;
};

/// Rebuilds the InteractionSet written by write_split_manifest. Counts and
/// sub-threshold entries come from `raw`, which must be the matrix the split
/// was made from.
LoadedSplit read_split_manifest(std::istream& in, const PlaycountMatrix& raw);

}  // namespace wmfrec
