#include "wmfrec/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <tuple>
#include <unordered_map>

#include "detail/text.hpp"
#include "wmfrec/error.hpp"
#include "wmfrec/random.hpp"

namespace wmfrec {
namespace {

std::uint64_t cell_key(Index user, Index item) {
  return (static_cast<std::uint64_t>(user) << 32) | static_cast<std::uint64_t>(item);
}

std::uint32_t parse_count(std::string_view field, std::size_t line_no) {
  std::uint64_t value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw ParseError(line_no, "count '" + std::string(field) + "' is not a nonnegative integer");
  }
  if (value == 0) throw ParseError(line_no, "count must be positive");
  if (value > UINT32_MAX) throw ParseError(line_no, "count out of range");
  return static_cast<std::uint32_t>(value);
}

Index intern(std::unordered_map<std::string, Index>& index, std::vector<std::string>& ids,
             std::string_view id) {
  auto [it, inserted] = index.try_emplace(std::string(id), static_cast<Index>(ids.size()));
  if (inserted) ids.emplace_back(id);
  return it->second;
}

PlaycountMatrix compact(const PlaycountMatrix& m, const std::vector<bool>& keep_user,
                        const std::vector<bool>& keep_item) {
  std::vector<Index> user_map(m.user_ids.size(), -1);
  std::vector<Index> item_map(m.item_ids.size(), -1);
  PlaycountMatrix out;
  for (std::size_t u = 0; u < m.user_ids.size(); ++u) {
    if (!keep_user[u]) continue;
    user_map[u] = static_cast<Index>(out.user_ids.size());
    out.user_ids.push_back(m.user_ids[u]);
  }
  for (std::size_t i = 0; i < m.item_ids.size(); ++i) {
    if (!keep_item[i]) continue;
    item_map[i] = static_cast<Index>(out.item_ids.size());
    out.item_ids.push_back(m.item_ids[i]);
  }
  for (const auto& e : m.entries) {
    const Index u = user_map[static_cast<std::size_t>(e.user)];
    const Index i = item_map[static_cast<std::size_t>(e.item)];
    if (u >= 0 && i >= 0) out.entries.push_back({u, i, e.count});
  }
  return out;
}

std::vector<bool> top_by_total(Index n, const std::vector<std::uint64_t>& totals, Index keep) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return totals[static_cast<std::size_t>(a)] > totals[static_cast<std::size_t>(b)];
  });
  std::vector<bool> alive(static_cast<std::size_t>(n), false);
  for (Index k = 0; k < std::min(n, keep); ++k) alive[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = true;
  return alive;
}

}  // namespace

PlaycountMatrix parse_playcounts(std::istream& in) {
  PlaycountMatrix m;
  std::unordered_map<std::string, Index> user_index;
  std::unordered_map<std::string, Index> item_index;
  std::unordered_map<std::uint64_t, std::size_t> seen;

  std::optional<detail::Separator> sep;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    if (!sep) sep = detail::detect_separator(view);
    const auto fields = detail::split(view, *sep);
    if (fields.size() != 3) {
      throw ParseError(line_no, "expected 3 fields (user, item, count), found " +
                                    std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) throw ParseError(line_no, "empty id field");
    const std::uint32_t count = parse_count(fields[2], line_no);
    const Index u = intern(user_index, m.user_ids, fields[0]);
    const Index i = intern(item_index, m.item_ids, fields[1]);
    auto [it, inserted] = seen.try_emplace(cell_key(u, i), line_no);
    if (!inserted) {
      throw Error(ErrorKind::kData, "duplicate pair (" + std::string(fields[0]) + ", " +
                                        std::string(fields[1]) + ") on lines " +
                                        std::to_string(it->second) + " and " +
                                        std::to_string(line_no));
    }
    m.entries.push_back({u, i, count});
  }
  return m;
}

PlaycountMatrix load_playcounts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kPath, "cannot open playcount file " + path.string());
  return parse_playcounts(in);
}

void write_playcounts(std::ostream& out, const PlaycountMatrix& m) {
  for (const auto& e : m.entries) {
    out << m.user_ids[static_cast<std::size_t>(e.user)] << '\t'
        << m.item_ids[static_cast<std::size_t>(e.item)] << '\t' << e.count << '\n';
  }
}

PlaycountMatrix filter_activity(const PlaycountMatrix& m, const ActivityFilter& filter) {
  if (filter.min_songs_per_user < 1 || filter.min_users_per_song < 1) {
    throw Error(ErrorKind::kConfig, "activity thresholds must be >= 1");
  }
  const auto n_users = static_cast<std::size_t>(m.n_users());
  const auto n_items = static_cast<std::size_t>(m.n_items());
  std::vector<bool> user_alive(n_users, true);
  std::vector<bool> item_alive(n_items, true);

  if (filter.top_users || filter.top_items) {
    std::vector<std::uint64_t> user_total(n_users, 0);
    std::vector<std::uint64_t> item_total(n_items, 0);
    for (const auto& e : m.entries) {
      user_total[static_cast<std::size_t>(e.user)] += e.count;
      item_total[static_cast<std::size_t>(e.item)] += e.count;
    }
    if (filter.top_users) user_alive = top_by_total(m.n_users(), user_total, *filter.top_users);
    if (filter.top_items) item_alive = top_by_total(m.n_items(), item_total, *filter.top_items);
  }

  std::vector<Index> degree;
  bool changed = true;
  while (changed) {
    changed = false;
    degree.assign(n_items, 0);
    for (const auto& e : m.entries) {
      if (user_alive[static_cast<std::size_t>(e.user)] && item_alive[static_cast<std::size_t>(e.item)]) {
        ++degree[static_cast<std::size_t>(e.item)];
      }
    }
    for (std::size_t i = 0; i < n_items; ++i) {
      if (item_alive[i] && degree[i] < filter.min_users_per_song) {
        item_alive[i] = false;
        changed = true;
      }
    }
    degree.assign(n_users, 0);
    for (const auto& e : m.entries) {
      if (user_alive[static_cast<std::size_t>(e.user)] && item_alive[static_cast<std::size_t>(e.item)]) {
        ++degree[static_cast<std::size_t>(e.user)];
      }
    }
    for (std::size_t u = 0; u < n_users; ++u) {
      if (user_alive[u] && degree[u] < filter.min_songs_per_user) {
        user_alive[u] = false;
        changed = true;
      }
    }
  }
  return compact(m, user_alive, item_alive);
}

PlaycountMatrix restrict_items(const PlaycountMatrix& m,
                               const std::unordered_set<std::string>& keep) {
  std::vector<bool> item_alive(static_cast<std::size_t>(m.n_items()));
  for (std::size_t i = 0; i < item_alive.size(); ++i) item_alive[i] = keep.contains(m.item_ids[i]);
  std::vector<bool> user_alive(static_cast<std::size_t>(m.n_users()), false);
  for (const auto& e : m.entries) {
    if (item_alive[static_cast<std::size_t>(e.item)]) user_alive[static_cast<std::size_t>(e.user)] = true;
  }
  return compact(m, user_alive, item_alive);
}

BinaryMatrix binarize(const PlaycountMatrix& m, std::uint32_t threshold) {
  if (threshold < 1) throw Error(ErrorKind::kConfig, "binarization threshold must be >= 1");
  BinaryMatrix b{m.n_users(), m.n_items(), threshold, {}};
  for (const auto& e : m.entries) {
    if (e.count >= threshold) b.positives.push_back({e.user, e.item});
  }
  return b;
}

std::string_view to_string(SplitLabel label) noexcept {
  switch (label) {
    case SplitLabel::kTrain: return "train";
    case SplitLabel::kValidation: return "validation";
    case SplitLabel::kTestIn: return "test_in";
    case SplitLabel::kTestOut: return "test_out";
  }
  return "?";
}

SplitLabel parse_split_label(std::string_view text) {
  if (text == "train") return SplitLabel::kTrain;
  if (text == "validation") return SplitLabel::kValidation;
  if (text == "test_in") return SplitLabel::kTestIn;
  if (text == "test_out") return SplitLabel::kTestOut;
  throw ParseError(0, "unknown split label '" + std::string(text) + "'");
}

void SplitConfig::validate() const {
  for (double f : {out_of_matrix_song_fraction, train, validation, test_in}) {
    if (!(f >= 0.0) || f > 1.0) throw Error(ErrorKind::kConfig, "split fractions must lie in [0, 1]");
  }
  if (std::abs(train + validation + test_in - 1.0) > 1e-12) {
    throw Error(ErrorKind::kConfig, "train + validation + test_in must equal 1");
  }
}

Index InteractionSet::count(SplitLabel label) const {
  return static_cast<Index>(std::count_if(positives.begin(), positives.end(),
                                          [&](const LabeledEntry& e) { return e.label == label; }));
}

InteractionSet make_splits(const BinaryMatrix& binary, const PlaycountMatrix& raw,
                           const SplitConfig& cfg) {
  cfg.validate();
  if (binary.n_users != raw.n_users() || binary.n_items != raw.n_items()) {
    throw Error(ErrorKind::kShape, "binary matrix and playcounts have different dimensions");
  }
  if (binary.positives.empty()) throw Error(ErrorKind::kData, "no positive entries to split");

  InteractionSet set;
  set.n_users = binary.n_users;
  set.n_items = binary.n_items;
  set.threshold = binary.threshold;
  set.config = cfg;
  set.held_out.assign(static_cast<std::size_t>(set.n_items), false);

  Rng rng(cfg.seed);

  const double wanted = cfg.out_of_matrix_song_fraction * static_cast<double>(set.n_items);
  const auto n_out = std::min<Index>(set.n_items, static_cast<Index>(std::ceil(wanted - 1e-9)));
  std::vector<Index> items(static_cast<std::size_t>(set.n_items));
  std::iota(items.begin(), items.end(), Index{0});
  rng.shuffle(items);
  set.out_of_matrix_items.assign(items.begin(), items.begin() + n_out);
  std::sort(set.out_of_matrix_items.begin(), set.out_of_matrix_items.end());
  for (Index i : set.out_of_matrix_items) set.held_out[static_cast<std::size_t>(i)] = true;

  std::unordered_map<std::uint64_t, std::uint32_t> counts;
  counts.reserve(raw.entries.size());
  for (const auto& e : raw.entries) counts.emplace(cell_key(e.user, e.item), e.count);

  std::vector<Cell> cells = binary.positives;
  std::sort(cells.begin(), cells.end());

  std::vector<std::size_t> in_matrix;
  set.positives.reserve(cells.size());
  for (const auto& c : cells) {
    const auto found = counts.find(cell_key(c.user, c.item));
    if (found == counts.end()) {
      throw Error(ErrorKind::kData, "positive entry missing from the playcount matrix");
    }
    const bool out = set.is_out_of_matrix(c.item);
    if (!out) in_matrix.push_back(set.positives.size());
    set.positives.push_back({c.user, c.item, found->second,
                             out ? SplitLabel::kTestOut : SplitLabel::kTrain});
  }

  const auto n_in = static_cast<double>(in_matrix.size());
  auto n_train = static_cast<std::size_t>(std::llround(cfg.train * n_in));
  auto n_valid = static_cast<std::size_t>(std::llround(cfg.validation * n_in));
  n_train = std::min(n_train, in_matrix.size());
  n_valid = std::min(n_valid, in_matrix.size() - n_train);
  if (n_train == 0) {
    throw Error(ErrorKind::kConfig, "split leaves no training entries");
  }
  rng.shuffle(in_matrix);
  for (std::size_t k = 0; k < in_matrix.size(); ++k) {
    auto& e = set.positives[in_matrix[k]];
    e.label = k < n_train             ? SplitLabel::kTrain
              : k < n_train + n_valid ? SplitLabel::kValidation
                                      : SplitLabel::kTestIn;
  }

  std::unordered_set<std::uint64_t> positive_keys;
  positive_keys.reserve(cells.size());
  for (const auto& c : cells) positive_keys.insert(cell_key(c.user, c.item));
  for (const auto& e : raw.entries) {
    if (set.is_out_of_matrix(e.item) || positive_keys.contains(cell_key(e.user, e.item))) continue;
    set.weak.push_back({e.user, e.item, e.count});
  }
  std::sort(set.weak.begin(), set.weak.end(), [](const WeakEntry& a, const WeakEntry& b) {
    return std::tie(a.user, a.item) < std::tie(b.user, b.item);
  });
  return set;
}

}  // namespace wmfrec
