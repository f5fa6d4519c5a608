#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fossil/common.hpp"

namespace fossil {

struct Event {
  std::string user;
  std::string item;
  std::int64_t timestamp = 0;
  std::size_t sequence_index = 0;  // position in the source, breaks timestamp ties

  bool operator==(const Event&) const = default;
};

struct EventLog {
  std::vector<Event> events;
  std::string provenance;
};

// Column layout of a delimited interaction log. Indices are zero-based.
struct EventFormat {
  std::string delimiter = "\t";
  std::size_t user_column = 0;
  std::size_t item_column = 1;
  std::size_t timestamp_column = 2;
  std::optional<std::size_t> rating_column;
  bool skip_header = false;

  // Parses a comma-separated column order such as "user,item,timestamp,rating".
  static EventFormat from_columns(std::string_view columns,
                                  std::string delimiter = "\t") {
    EventFormat format;
    format.delimiter = std::move(delimiter);
    std::optional<std::size_t> user, item, timestamp;
    std::size_t index = 0;
    std::size_t start = 0;
    while (start <= columns.size()) {
      std::size_t end = columns.find(',', start);
      if (end == std::string_view::npos) end = columns.size();
      const std::string_view name = columns.substr(start, end - start);
      if (name == "user") {
        user = index;
      } else if (name == "item") {
        item = index;
      } else if (name == "timestamp") {
        timestamp = index;
      } else if (name == "rating") {
        format.rating_column = index;
      } else if (name != "_" && !name.empty()) {
        throw std::invalid_argument("unknown column name '" +
                                    std::string(name) + "'");
      }
      ++index;
      start = end + 1;
    }
    if (!user || !item || !timestamp) {
      throw std::invalid_argument(
          "column order must name user, item and timestamp");
    }
    format.user_column = *user;
    format.item_column = *item;
    format.timestamp_column = *timestamp;
    return format;
  }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line,
                                                  std::string_view delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = line.find(delimiter, start);
    if (end == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, end - start));
    start = end + delimiter.size();
  }
}

template <class T>
bool parse_number(std::string_view text, T& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace detail

// Reads one event per non-blank row. Row order becomes the tie-break index.
inline EventLog load_events(std::istream& source, const EventFormat& format,
                            std::string provenance = {}) {
  if (format.delimiter.empty()) {
    throw std::invalid_argument("delimiter must not be empty");
  }
  std::size_t needed = std::max({format.user_column, format.item_column,
                                 format.timestamp_column}) + 1;
  if (format.rating_column) needed = std::max(needed, *format.rating_column + 1);

  EventLog log;
  log.provenance = std::move(provenance);
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(source, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_number == 1 && format.skip_header) continue;
    if (line.empty()) continue;

    const auto fields = detail::split_fields(line, format.delimiter);
    auto fail = [&](const std::string& why) {
      return DataError("line " + std::to_string(line_number) + ": " + why);
    };
    if (fields.size() < needed) {
      throw fail("expected at least " + std::to_string(needed) +
                 " fields, found " + std::to_string(fields.size()));
    }
    Event event;
    event.user = std::string(fields[format.user_column]);
    event.item = std::string(fields[format.item_column]);
    if (event.user.empty()) throw fail("empty user identifier");
    if (event.item.empty()) throw fail("empty item identifier");
    if (!detail::parse_number(fields[format.timestamp_column], event.timestamp)) {
      throw fail("timestamp '" + std::string(fields[format.timestamp_column]) +
                 "' is not an integer");
    }
    if (format.rating_column) {
      double rating = 0.0;
      if (!detail::parse_number(fields[*format.rating_column], rating)) {
        throw fail("rating '" + std::string(fields[*format.rating_column]) +
                   "' is not a number");
      }
    }
    event.sequence_index = log.events.size();
    log.events.push_back(std::move(event));
  }
  return log;
}

// Drops events of items with fewer than min_count events, then events of
// users with fewer than min_count events in what remains. A single pass of
// each; the result is not iterated to a fixpoint.
inline EventLog densify(const EventLog& log, std::size_t min_count) {
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");

  std::unordered_map<std::string_view, std::size_t> item_counts;
  for (const auto& e : log.events) ++item_counts[e.item];

  std::vector<const Event*> kept;
  kept.reserve(log.events.size());
  std::unordered_map<std::string_view, std::size_t> user_counts;
  for (const auto& e : log.events) {
    if (item_counts[e.item] >= min_count) {
      kept.push_back(&e);
      ++user_counts[e.user];
    }
  }

  EventLog out;
  out.provenance = log.provenance;
  for (const Event* e : kept) {
    if (user_counts[e->user] >= min_count) out.events.push_back(*e);
  }
  return out;
}

enum class Role : char { kTrain = 'T', kValidation = 'V', kTest = 'E' };

struct SequenceDataset {
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::vector<std::vector<ItemIndex>> sequences;  // S^u, oldest first
  std::vector<std::vector<ItemIndex>> itemsets;   // I+_u, sorted distinct
  std::vector<std::vector<Role>> roles;           // empty until split

  std::size_t num_users() const { return user_ids.size(); }
  std::size_t num_items() const { return item_ids.size(); }
  bool is_split() const { return !roles.empty(); }

  std::size_t num_actions() const {
    std::size_t total = 0;
    for (const auto& s : sequences) total += s.size();
    return total;
  }

  // Number of leading train positions of user u (whole sequence if unsplit).
  std::size_t train_length(UserIndex u) const {
    return is_split() ? sequences[u].size() - 2 : sequences[u].size();
  }

  bool operator==(const SequenceDataset&) const = default;
};

inline std::vector<ItemIndex> distinct_items(std::span<const ItemIndex> items) {
  std::vector<ItemIndex> set(items.begin(), items.end());
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
  return set;
}

inline void recompute_itemsets(SequenceDataset& ds) {
  ds.itemsets.resize(ds.sequences.size());
  for (std::size_t u = 0; u < ds.sequences.size(); ++u) {
    ds.itemsets[u] = distinct_items(ds.sequences[u]);
  }
}

// Dense indices follow first appearance in the log. Each user's events are
// ordered by (timestamp, sequence_index).
inline SequenceDataset build_sequences(const EventLog& log) {
  if (log.events.empty()) throw DataError("cannot build sequences from an empty log");

  SequenceDataset ds;
  std::unordered_map<std::string, UserIndex> user_index;
  std::unordered_map<std::string, ItemIndex> item_index;
  struct Keyed {
    std::int64_t timestamp;
    std::size_t sequence_index;
    ItemIndex item;
  };
  std::vector<std::vector<Keyed>> per_user;

  for (const auto& e : log.events) {
    auto [uit, new_user] =
        user_index.try_emplace(e.user, static_cast<UserIndex>(ds.user_ids.size()));
    if (new_user) {
      ds.user_ids.push_back(e.user);
      per_user.emplace_back();
    }
    auto [iit, new_item] =
        item_index.try_emplace(e.item, static_cast<ItemIndex>(ds.item_ids.size()));
    if (new_item) ds.item_ids.push_back(e.item);
    per_user[uit->second].push_back({e.timestamp, e.sequence_index, iit->second});
  }

  ds.sequences.resize(per_user.size());
  for (std::size_t u = 0; u < per_user.size(); ++u) {
    auto& events = per_user[u];
    std::sort(events.begin(), events.end(), [](const Keyed& a, const Keyed& b) {
      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
      return a.sequence_index < b.sequence_index;
    });
    ds.sequences[u].reserve(events.size());
    for (const auto& k : events) ds.sequences[u].push_back(k.item);
  }
  recompute_itemsets(ds);
  return ds;
}

// Marks the last action of every user as test and the one before it as
// validation.
inline SequenceDataset split_leave_last(SequenceDataset ds) {
  ds.roles.assign(ds.sequences.size(), {});
  for (std::size_t u = 0; u < ds.sequences.size(); ++u) {
    const std::size_t n = ds.sequences[u].size();
    if (n < 3) {
      throw DataError("user '" + ds.user_ids[u] + "' has " + std::to_string(n) +
                      " actions; at least 3 are needed to split");
    }
    ds.roles[u].assign(n, Role::kTrain);
    ds.roles[u][n - 2] = Role::kValidation;
    ds.roles[u][n - 1] = Role::kTest;
  }
  return ds;
}

inline SequenceDataset strip_roles(SequenceDataset ds) {
  ds.roles.clear();
  return ds;
}

// Keeps the n most recent actions of each user and drops items left without
// any action. Users are kept as they are.
inline SequenceDataset truncate_recent(const SequenceDataset& ds, std::size_t n) {
  if (n < 3) throw std::invalid_argument("truncation threshold must be >= 3");
  if (ds.is_split()) {
    throw std::invalid_argument("truncate_recent must run before splitting");
  }

  std::vector<std::vector<ItemIndex>> kept(ds.sequences.size());
  std::vector<bool> used(ds.num_items(), false);
  for (std::size_t u = 0; u < ds.sequences.size(); ++u) {
    const auto& seq = ds.sequences[u];
    const std::size_t take = std::min(n, seq.size());
    kept[u].assign(seq.end() - static_cast<std::ptrdiff_t>(take), seq.end());
    for (ItemIndex i : kept[u]) used[i] = true;
  }

  constexpr ItemIndex kDropped = static_cast<ItemIndex>(-1);
  std::vector<ItemIndex> remap(ds.num_items(), kDropped);
  SequenceDataset out;
  out.user_ids = ds.user_ids;
  for (std::size_t i = 0; i < ds.num_items(); ++i) {
    if (!used[i]) continue;
    remap[i] = static_cast<ItemIndex>(out.item_ids.size());
    out.item_ids.push_back(ds.item_ids[i]);
  }
  out.sequences = std::move(kept);
  for (auto& seq : out.sequences) {
    for (ItemIndex& i : seq) i = remap[i];
  }
  recompute_itemsets(out);
  return out;
}

struct DatasetSummary {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t actions = 0;
  double actions_per_user = 0.0;
  double actions_per_item = 0.0;

  bool operator==(const DatasetSummary&) const = default;
};

inline DatasetSummary summarize(const SequenceDataset& ds) {
  DatasetSummary s;
  s.users = ds.num_users();
  s.items = ds.num_items();
  s.actions = ds.num_actions();
  if (s.users > 0) s.actions_per_user = double(s.actions) / double(s.users);
  if (s.items > 0) s.actions_per_item = double(s.actions) / double(s.items);
  return s;
}

// Canonical dataset file:
//   fossil-dataset <version> <users> <items> <actions>
//   <user-id>\t<item-index>:<role> <item-index>:<role> ...   (one per user)
//   <item-id>                                                 (one per item)
// Role characters are T/V/E; unsplit datasets carry bare indices.
inline constexpr std::string_view kDatasetMagic = "fossil-dataset";
inline constexpr int kDatasetVersion = 1;

inline void write_dataset(std::ostream& out, const SequenceDataset& ds) {
  out << kDatasetMagic << ' ' << kDatasetVersion << ' ' << ds.num_users() << ' '
      << ds.num_items() << ' ' << ds.num_actions() << '\n';
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    out << ds.user_ids[u] << '\t';
    const auto& seq = ds.sequences[u];
    for (std::size_t p = 0; p < seq.size(); ++p) {
      if (p > 0) out << ' ';
      out << seq[p];
      if (ds.is_split()) out << ':' << static_cast<char>(ds.roles[u][p]);
    }
    out << '\n';
  }
  for (const auto& id : ds.item_ids) out << id << '\n';
}

inline std::string dataset_to_string(const SequenceDataset& ds) {
  std::ostringstream out;
  write_dataset(out, ds);
  return out.str();
}

inline SequenceDataset read_dataset(std::istream& in) {
  std::string line;
  std::size_t line_number = 0;
  auto fail = [&](const std::string& why) {
    return DataError("dataset line " + std::to_string(line_number) + ": " + why);
  };
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw fail("unexpected end of file");
    ++line_number;
  };

  next_line();
  std::istringstream header(line);
  std::string magic;
  int version = 0;
  std::size_t users = 0, items = 0, actions = 0;
  if (!(header >> magic >> version >> users >> items >> actions) ||
      magic != kDatasetMagic) {
    throw fail("not a dataset file");
  }
  if (version != kDatasetVersion) {
    throw fail("unsupported dataset version " + std::to_string(version));
  }

  SequenceDataset ds;
  ds.user_ids.reserve(users);
  ds.sequences.resize(users);
  std::vector<std::vector<Role>> roles(users);
  std::optional<bool> split;
  for (std::size_t u = 0; u < users; ++u) {
    next_line();
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw fail("missing user identifier");
    ds.user_ids.push_back(line.substr(0, tab));
    std::istringstream tokens(line.substr(tab + 1));
    std::string token;
    while (tokens >> token) {
      const std::size_t colon = token.find(':');
      const bool has_role = colon != std::string::npos;
      if (split && *split != has_role) throw fail("mixed role marks");
      split = has_role;
      std::uint64_t index = 0;
      const std::string_view digits =
          std::string_view(token).substr(0, has_role ? colon : token.size());
      if (!detail::parse_number(digits, index) || index >= items) {
        throw fail("bad item index '" + token + "'");
      }
      ds.sequences[u].push_back(static_cast<ItemIndex>(index));
      if (has_role) {
        if (colon + 2 != token.size()) throw fail("bad role in '" + token + "'");
        const char c = token[colon + 1];
        if (c != 'T' && c != 'V' && c != 'E') throw fail("bad role in '" + token + "'");
        roles[u].push_back(static_cast<Role>(c));
      }
    }
  }
  ds.item_ids.reserve(items);
  for (std::size_t i = 0; i < items; ++i) {
    next_line();
    if (line.empty()) throw fail("empty item identifier");
    ds.item_ids.push_back(line);
  }
  if (ds.num_actions() != actions) throw fail("action count does not match header");

  if (split.value_or(false)) {
    for (std::size_t u = 0; u < users; ++u) {
      const auto& r = roles[u];
      const std::size_t n = r.size();
      bool ok = n >= 3 && r[n - 1] == Role::kTest && r[n - 2] == Role::kValidation;
      for (std::size_t p = 0; ok && p + 2 < n; ++p) ok = r[p] == Role::kTrain;
      if (!ok) {
        throw DataError("user '" + ds.user_ids[u] +
                        "' role marks must be train..., validation, test");
      }
    }
    ds.roles = std::move(roles);
  }
  recompute_itemsets(ds);
  return ds;
}

// FNV-1a over the given bytes.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::uint64_t dataset_checksum(const SequenceDataset& ds) {
  return fnv1a64(dataset_to_string(ds));
}

}  // namespace fossil
