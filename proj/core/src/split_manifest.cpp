#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <tuple>
#include <unordered_map>

#include <json.hpp>

#include "detail/text.hpp"
#include "wmfrec/error.hpp"
#include "wmfrec/ingest.hpp"

namespace wmfrec {
namespace {

constexpr std::string_view kFormat = "wmfrec-split-manifest";
constexpr int kVersion = 1;

Index parse_index(std::string_view field, std::size_t line_no) {
  Index value = -1;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || value < 0) {
    throw ParseError(line_no, "bad index '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

void write_split_manifest(std::ostream& out, const InteractionSet& split,
                          std::string_view config_hash) {
  nlohmann::json header;
  header["format"] = kFormat;
  header["version"] = kVersion;
  header["seed"] = split.config.seed;
  header["fractions"] = {{"out_of_matrix_song", split.config.out_of_matrix_song_fraction},
                         {"train", split.config.train},
                         {"validation", split.config.validation},
                         {"test_in", split.config.test_in}};
  header["binarize_threshold"] = split.threshold;
  header["n_users"] = split.n_users;
  header["n_items"] = split.n_items;
  header["n_positives"] = split.positives.size();
  header["out_of_matrix_items"] = split.out_of_matrix_items;
  header["config_hash"] = std::string(config_hash);
  out << "# " << header.dump() << '\n';
  for (const auto& e : split.positives) {
    out << e.user << ' ' << e.item << ' ' << to_string(e.label) << '\n';
  }
}

LoadedSplit read_split_manifest(std::istream& in, const PlaycountMatrix& raw) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw ParseError(1, "split manifest must start with a '# {...}' header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line.substr(2));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("bad manifest header: ") + e.what());
  }
  if (header.value("format", "") != kFormat || header.value("version", 0) != kVersion) {
    throw ParseError(1, "unsupported split manifest format");
  }

  LoadedSplit loaded;
  InteractionSet& set = loaded.interactions;
  try {
    set.n_users = header.at("n_users").get<Index>();
    set.n_items = header.at("n_items").get<Index>();
    set.threshold = header.at("binarize_threshold").get<std::uint32_t>();
    set.config.seed = header.at("seed").get<std::uint64_t>();
    const auto& f = header.at("fractions");
    set.config.out_of_matrix_song_fraction = f.at("out_of_matrix_song").get<double>();
    set.config.train = f.at("train").get<double>();
    set.config.validation = f.at("validation").get<double>();
    set.config.test_in = f.at("test_in").get<double>();
    set.out_of_matrix_items = header.at("out_of_matrix_items").get<std::vector<Index>>();
    loaded.config_hash = header.value("config_hash", "");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("incomplete manifest header: ") + e.what());
  }
  if (set.n_users != raw.n_users() || set.n_items != raw.n_items()) {
    throw Error(ErrorKind::kShape, "split manifest does not match the playcount matrix dimensions");
  }
  set.held_out.assign(static_cast<std::size_t>(set.n_items), false);
  for (Index i : set.out_of_matrix_items) {
    if (i < 0 || i >= set.n_items) throw Error(ErrorKind::kData, "held-out item index out of range");
    set.held_out[static_cast<std::size_t>(i)] = true;
  }

  std::unordered_map<std::uint64_t, std::uint32_t> counts;
  counts.reserve(raw.entries.size());
  auto key = [](Index u, Index i) {
    return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(i);
  };
  for (const auto& e : raw.entries) counts.emplace(key(e.user, e.item), e.count);

  std::unordered_map<std::uint64_t, bool> positive;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = detail::trim(line);
    if (view.empty()) continue;
    const auto fields = detail::split(view, detail::Separator::kSpace);
    if (fields.size() != 3) throw ParseError(line_no, "expected 'user item label'");
    const Index u = parse_index(fields[0], line_no);
    const Index i = parse_index(fields[1], line_no);
    if (u >= set.n_users || i >= set.n_items) throw ParseError(line_no, "index out of range");
    SplitLabel label;
    try {
      label = parse_split_label(fields[2]);
    } catch (const ParseError& e) {
      throw ParseError(line_no, e.what());
    }
    if ((label == SplitLabel::kTestOut) != set.is_out_of_matrix(i)) {
      throw Error(ErrorKind::kData, "line " + std::to_string(line_no) +
                                        ": label inconsistent with the held-out item set");
    }
    const auto found = counts.find(key(u, i));
    if (found == counts.end() || found->second < set.threshold) {
      throw Error(ErrorKind::kData, "line " + std::to_string(line_no) +
                                        ": entry is not a positive of the playcount matrix");
    }
    positive.emplace(key(u, i), true);
    set.positives.push_back({u, i, found->second, label});
  }
  if (header.contains("n_positives") &&
      header["n_positives"].get<std::size_t>() != set.positives.size()) {
    throw Error(ErrorKind::kData, "split manifest is truncated");
  }
  std::sort(set.positives.begin(), set.positives.end(),
            [](const LabeledEntry& a, const LabeledEntry& b) {
              return std::tie(a.user, a.item) < std::tie(b.user, b.item);
            });
  for (const auto& e : raw.entries) {
    if (set.is_out_of_matrix(e.item) || positive.contains(key(e.user, e.item))) continue;
    set.weak.push_back({e.user, e.item, e.count});
  }
  std::sort(set.weak.begin(), set.weak.end(), [](const WeakEntry& a, const WeakEntry& b) {
    return std::tie(a.user, a.item) < std::tie(b.user, b.item);
  });
  return loaded;
}

}  // namespace wmfrec
