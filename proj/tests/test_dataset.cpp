#include <gtest/gtest.h>

#include <map>
#include <sstream>
#include <string>
#include <utility>

#include "fossil/fossil.hpp"
#include "support/oracles.hpp"

namespace fossil {
namespace {

EventLog parse(const std::string& text, const EventFormat& format = {}) {
  std::istringstream in(text);
  return load_events(in, format, "test");
}

EventLog log_of(const std::vector<std::pair<std::string, std::string>>& pairs) {
  EventLog log;
  for (const auto& [u, i] : pairs) {
    log.events.push_back({u, i, std::int64_t(log.events.size()), log.events.size()});
  }
  return log;
}

std::vector<std::string> ids_of(const SequenceDataset& ds, UserIndex u) {
  std::vector<std::string> out;
  for (ItemIndex i : ds.sequences[u]) out.push_back(ds.item_ids[i]);
  return out;
}

TEST(LoadEvents, ParsesRowsInOrder) {
  const auto log = parse("u1\ti1\t100\nu1\ti2\t200\nu2\ti1\t150\n");
  ASSERT_EQ(log.events.size(), 3u);
  EXPECT_EQ(log.events[2].user, "u2");
  EXPECT_EQ(log.events[2].timestamp, 150);
  EXPECT_EQ(log.events[1].sequence_index, 1u);
  EXPECT_EQ(log.provenance, "test");
}

TEST(LoadEvents, EmptyStreamIsEmptyLog) {
  EXPECT_TRUE(parse("").events.empty());
  EXPECT_TRUE(parse("\n\n").events.empty());
}

TEST(LoadEvents, BadTimestampNamesLine) {
  try {
    parse("u1\ti1\t100\nu1\ti2\tsoon\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(LoadEvents, TooFewFieldsRejected) {
  EXPECT_THROW(parse("u1\ti1\n"), DataError);
}

TEST(LoadEvents, MovieLensLayout) {
  const auto format = EventFormat::from_columns("user,item,rating,timestamp", "::");
  const auto log = parse("1::1193::5::978300760\r\n1::661::3::978302109\r\n", format);
  ASSERT_EQ(log.events.size(), 2u);
  EXPECT_EQ(log.events[0].item, "1193");
  EXPECT_EQ(log.events[1].timestamp, 978302109);
}

TEST(LoadEvents, RatingMustBeNumeric) {
  const auto format = EventFormat::from_columns("user,item,rating,timestamp", ",");
  EXPECT_THROW(parse("a,b,x,1\n", format), DataError);
}

TEST(LoadEvents, SkipHeaderAndIgnoredColumns) {
  auto format = EventFormat::from_columns("_,timestamp,user,item", ",");
  format.skip_header = true;
  const auto log = parse("row,ts,who,what\n9,5,alice,book\n", format);
  ASSERT_EQ(log.events.size(), 1u);
  EXPECT_EQ(log.events[0].user, "alice");
  EXPECT_EQ(log.events[0].item, "book");
  EXPECT_EQ(log.events[0].timestamp, 5);
}

TEST(EventFormat, RejectsIncompleteOrUnknownColumns) {
  EXPECT_THROW(EventFormat::from_columns("user,item"), std::invalid_argument);
  EXPECT_THROW(EventFormat::from_columns("user,item,timestamp,colour"), std::invalid_argument);
}

TEST(Densify, FixpointInputUnchanged) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int u = 0; u < 5; ++u) {
    for (int i = 0; i < 5; ++i) pairs.emplace_back("u" + std::to_string(u), "i" + std::to_string(i));
  }
  const auto log = log_of(pairs);
  EXPECT_EQ(densify(log, 5).events, log.events);
}

TEST(Densify, DropsInactiveUser) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int u = 0; u < 5; ++u) {
    for (int i = 0; i < 5; ++i) pairs.emplace_back("u" + std::to_string(u), "i" + std::to_string(i));
  }
  for (int i = 0; i < 3; ++i) pairs.emplace_back("lazy", "i" + std::to_string(i));
  const auto out = densify(log_of(pairs), 5);
  EXPECT_EQ(out.events.size(), 25u);
  for (const auto& e : out.events) EXPECT_NE(e.user, "lazy");
}

TEST(Densify, ItemPassRunsBeforeUserPass) {
  // u0 has five events, one of them on an item seen only once.
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int u = 1; u < 6; ++u) {
    for (int i = 0; i < 5; ++i) pairs.emplace_back("u" + std::to_string(u), "i" + std::to_string(i));
  }
  for (int i = 0; i < 4; ++i) pairs.emplace_back("u0", "i" + std::to_string(i));
  pairs.emplace_back("u0", "rare");
  const auto out = densify(log_of(pairs), 5);

  std::map<std::string, int> users, items;
  for (const auto& e : out.events) {
    ++users[e.user];
    ++items[e.item];
  }
  EXPECT_EQ(users.count("u0"), 0u);
  EXPECT_EQ(items.count("rare"), 0u);
  for (const auto& [u, n] : users) EXPECT_GE(n, 5) << u;
  EXPECT_EQ(out.events.size(), 25u);
}

TEST(Densify, RandomLogsMatchRecount) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    EventLog log;
    const std::size_t n = rng.uniform_index(80);
    for (std::size_t e = 0; e < n; ++e) {
      log.events.push_back({"u" + std::to_string(rng.uniform_index(8)),
                            "i" + std::to_string(rng.uniform_index(10)), 0, e});
    }
    const std::size_t m = 1 + rng.uniform_index(5);
    const auto out = densify(log, m);

    std::map<std::string, std::size_t> item_in, user_after_items;
    for (const auto& e : log.events) ++item_in[e.item];
    for (const auto& e : log.events) {
      if (item_in[e.item] >= m) ++user_after_items[e.user];
    }
    std::vector<Event> expected;
    for (const auto& e : log.events) {
      if (item_in[e.item] >= m && user_after_items[e.user] >= m) expected.push_back(e);
    }
    ASSERT_EQ(out.events, expected);

    // Reapplying changes nothing once the output is itself a fixpoint.
    std::map<std::string, std::size_t> items_out, users_out;
    for (const auto& e : out.events) {
      ++items_out[e.item];
      ++users_out[e.user];
    }
    bool fixpoint = true;
    for (const auto& [_, c] : items_out) fixpoint = fixpoint && c >= m;
    if (fixpoint) {
      EXPECT_EQ(densify(out, m).events, out.events);
    }
  }
}

TEST(BuildSequences, SortsByTimestamp) {
  const auto ds = build_sequences(parse("u1\ta\t300\nu1\tb\t100\nu1\tc\t200\n"));
  EXPECT_EQ(ids_of(ds, 0), (std::vector<std::string>{"b", "c", "a"}));
  EXPECT_FALSE(ds.is_split());
}

TEST(BuildSequences, EqualTimestampsKeepInputOrder) {
  const auto ds = build_sequences(parse("u1\tz\t5\nu1\ty\t5\nu1\tx\t1\n"));
  EXPECT_EQ(ids_of(ds, 0), (std::vector<std::string>{"x", "z", "y"}));
}

TEST(BuildSequences, RepeatsStayInSequenceNotItemset) {
  const auto ds = build_sequences(parse("u\ta\t1\nu\tb\t2\nu\ta\t3\n"));
  EXPECT_EQ(ds.sequences[0].size(), 3u);
  EXPECT_EQ(ds.itemsets[0].size(), 2u);
}

TEST(BuildSequences, IndicesFollowFirstAppearance) {
  const auto ds = build_sequences(parse("v\tq\t9\nu\tp\t1\nv\tp\t2\n"));
  EXPECT_EQ(ds.user_ids, (std::vector<std::string>{"v", "u"}));
  EXPECT_EQ(ds.item_ids, (std::vector<std::string>{"q", "p"}));
}

TEST(BuildSequences, EmptyLogRejected) {
  EXPECT_THROW(build_sequences(EventLog{}), DataError);
}

TEST(SplitLeaveLast, MarksFinalTwoPositions) {
  SequenceDataset ds;
  ds.user_ids = {"a", "b"};
  ds.item_ids = {"0", "1", "2", "3", "4"};
  ds.sequences = {{0, 1, 2, 3, 4}, {4, 3, 2}};
  recompute_itemsets(ds);
  const auto split = split_leave_last(ds);
  using R = Role;
  EXPECT_EQ(split.roles[0], (std::vector<R>{R::kTrain, R::kTrain, R::kTrain, R::kValidation, R::kTest}));
  EXPECT_EQ(split.roles[1], (std::vector<R>{R::kTrain, R::kValidation, R::kTest}));
  EXPECT_EQ(split.train_length(0), 3u);
  EXPECT_EQ(split.sequences, ds.sequences);
}

TEST(SplitLeaveLast, ShortUserNamed) {
  SequenceDataset ds;
  ds.user_ids = {"ok", "short"};
  ds.item_ids = {"x", "y", "z"};
  ds.sequences = {{0, 1, 2}, {0, 1}};
  recompute_itemsets(ds);
  try {
    split_leave_last(ds);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'short'"), std::string::npos);
  }
}

TEST(TruncateRecent, KeepsMostRecent) {
  SequenceDataset ds;
  ds.user_ids = {"long", "short"};
  for (int i = 0; i < 80; ++i) ds.item_ids.push_back("i" + std::to_string(i));
  ds.sequences.resize(2);
  for (ItemIndex i = 0; i < 80; ++i) ds.sequences[0].push_back(i);
  ds.sequences[1] = {70, 71, 72, 73};
  recompute_itemsets(ds);

  const auto out = truncate_recent(ds, 50);
  EXPECT_EQ(out.sequences[0].size(), 50u);
  EXPECT_EQ(out.sequences[1].size(), 4u);
  EXPECT_EQ(out.num_items(), 50u);
  EXPECT_EQ(out.item_ids.front(), "i30");
  EXPECT_EQ(ids_of(out, 1), (std::vector<std::string>{"i70", "i71", "i72", "i73"}));
}

TEST(TruncateRecent, LargeThresholdIsIdentity) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto ds = strip_roles(testing::random_split_dataset(rng, 6, 12, 3, 15));
    // Items never used would be dropped, so compare against a dataset that
    // only indexes used items.
    const auto compact = truncate_recent(ds, 1000);
    EXPECT_EQ(truncate_recent(compact, 1000), compact);
    for (std::size_t u = 0; u < ds.num_users(); ++u) {
      EXPECT_EQ(ids_of(compact, UserIndex(u)), ids_of(ds, UserIndex(u)));
    }
  }
}

TEST(TruncateRecent, Preconditions) {
  SequenceDataset ds;
  ds.user_ids = {"u"};
  ds.item_ids = {"a", "b", "c"};
  ds.sequences = {{0, 1, 2}};
  recompute_itemsets(ds);
  EXPECT_THROW(truncate_recent(ds, 2), std::invalid_argument);
  EXPECT_THROW(truncate_recent(split_leave_last(ds), 5), std::invalid_argument);
}

TEST(Summarize, Arithmetic) {
  SequenceDataset ds;
  ds.user_ids = {"a", "b"};
  ds.item_ids = {"0", "1", "2", "3"};
  ds.sequences = {{0, 1, 2}, {3, 2, 1, 0, 0}};
  recompute_itemsets(ds);
  const auto s = summarize(ds);
  EXPECT_EQ(s.actions, 8u);
  EXPECT_DOUBLE_EQ(s.actions_per_user, 4.0);
  EXPECT_DOUBLE_EQ(s.actions_per_item, 2.0);
  EXPECT_EQ(summarize(split_leave_last(ds)), s);
}

TEST(Summarize, MatchesEventRecount) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    EventLog log;
    const std::size_t n = 1 + rng.uniform_index(60);
    for (std::size_t e = 0; e < n; ++e) {
      log.events.push_back({"u" + std::to_string(rng.uniform_index(7)),
                            "i" + std::to_string(rng.uniform_index(9)),
                            std::int64_t(rng.uniform_index(5)), e});
    }
    std::set<std::string> users, items;
    for (const auto& e : log.events) {
      users.insert(e.user);
      items.insert(e.item);
    }
    const auto s = summarize(build_sequences(log));
    EXPECT_EQ(s.users, users.size());
    EXPECT_EQ(s.items, items.size());
    EXPECT_EQ(s.actions, n);
    EXPECT_DOUBLE_EQ(s.actions_per_user, double(n) / double(users.size()));
  }
}

TEST(DatasetFile, RoundTripsSplitAndUnsplit) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto split = testing::random_split_dataset(rng, 5, 9, 3, 12);
    for (const auto& ds : {split, strip_roles(split)}) {
      std::istringstream in(dataset_to_string(ds));
      const auto back = read_dataset(in);
      EXPECT_EQ(back, ds);
      EXPECT_EQ(dataset_checksum(back), dataset_checksum(ds));
    }
  }
}

TEST(DatasetFile, ExactLayout) {
  SequenceDataset ds;
  ds.user_ids = {"alice"};
  ds.item_ids = {"x", "y"};
  ds.sequences = {{1, 0, 1}};
  recompute_itemsets(ds);
  EXPECT_EQ(dataset_to_string(split_leave_last(ds)),
            "fossil-dataset 1 1 2 3\nalice\t1:T 0:V 1:E\nx\ny\n");
}

TEST(DatasetFile, RejectsBadRoles) {
  std::istringstream misplaced("fossil-dataset 1 1 2 3\nu\t0:T 1:E 0:V\na\nb\n");
  EXPECT_THROW(read_dataset(misplaced), DataError);
  std::istringstream mixed("fossil-dataset 1 1 2 3\nu\t0:T 1 0:E\na\nb\n");
  EXPECT_THROW(read_dataset(mixed), DataError);
  std::istringstream range("fossil-dataset 1 1 2 3\nu\t0:T 5:V 0:E\na\nb\n");
  EXPECT_THROW(read_dataset(range), DataError);
  std::istringstream count("fossil-dataset 1 1 2 4\nu\t0:T 1:V 0:E\na\nb\n");
  EXPECT_THROW(read_dataset(count), DataError);
}

TEST(SplitProperty, RolesPartitionSequence) {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto ds = testing::random_split_dataset(rng, 4, 6, 3, 20);
    for (std::size_t u = 0; u < ds.num_users(); ++u) {
      std::vector<ItemIndex> train, valid, test;
      for (std::size_t p = 0; p < ds.sequences[u].size(); ++p) {
        auto& dst = ds.roles[u][p] == Role::kTrain        ? train
                    : ds.roles[u][p] == Role::kValidation ? valid
                                                          : test;
        dst.push_back(ds.sequences[u][p]);
      }
      ASSERT_EQ(valid.size(), 1u);
      ASSERT_EQ(test.size(), 1u);
      train.insert(train.end(), valid.begin(), valid.end());
      train.insert(train.end(), test.begin(), test.end());
      EXPECT_EQ(train, ds.sequences[u]);
    }
  }
}

}  // namespace
}  // namespace fossil
