#include <gtest/gtest.h>

#include "fossil/fossil.hpp"
#include "support/oracles.hpp"

namespace fossil {
namespace {

struct Instance {
  UserContext ctx;
  ItemIndex g = 0, j = 1;
};

Instance random_instance(Rng& rng, std::size_t users, std::size_t items, std::size_t order) {
  Instance in;
  in.ctx.user = UserIndex(rng.uniform_index(users));
  for (ItemIndex i = 0; i < items; ++i) {
    if (rng.uniform01() < 0.5) in.ctx.history.push_back(i);
  }
  const std::size_t r = 1 + rng.uniform_index(order);
  for (std::size_t k = 0; k < r; ++k) in.ctx.recents.push_back(ItemIndex(rng.uniform_index(items)));
  in.g = ItemIndex(rng.uniform_index(items));
  in.j = ItemIndex((in.g + 1 + rng.uniform_index(items - 1)) % items);
  return in;
}

TEST(Pop, CountsTrainPositionsOnly) {
  Rng rng(1);
  const auto ds = testing::random_split_dataset(rng, 20, 15, 3, 10);
  const auto pop = PopModel::fit(ds);
  std::vector<std::uint64_t> expected(15, 0);
  std::uint64_t train_positions = 0;
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    for (std::size_t p = 0; p < ds.sequences[u].size(); ++p) {
      if (ds.roles[u][p] != Role::kTrain) continue;
      ++expected[ds.sequences[u][p]];
      ++train_positions;
    }
  }
  EXPECT_EQ(pop.counts, expected);
  EXPECT_EQ(std::accumulate(pop.counts.begin(), pop.counts.end(), std::uint64_t(0)), train_positions);
}

TEST(Pop, ScoresAreCounts) {
  PopModel pop{{7, 3, 0}};
  EXPECT_GT(score_pop(pop, 0), score_pop(pop, 1));
  EXPECT_EQ(score_pop(pop, 2), 0.0);
  std::vector<double> all(3);
  pop.score_all(UserContext{}, all);
  EXPECT_EQ(all, (std::vector<double>{7, 3, 0}));
}

TEST(BprMf, ScalarProduct) {
  BprMfModel zero(Matrix(2, 3), Matrix(4, 3));
  EXPECT_EQ(score_bprmf(zero, 1, 2), 0.0);
  Matrix X(1, 1), Y(2, 1);
  X(0, 0) = 2.0;
  Y(1, 0) = -3.0;
  BprMfModel m(X, Y);
  EXPECT_EQ(score_bprmf(m, 0, 1), -6.0);
  EXPECT_FALSE(m.sequential());
}

TEST(Fism, ArithmeticExample) {
  auto m = FossilModel::create_fism(0.2, 1, 1, 2, 0);
  auto& p = m.params();
  p.P(0, 0) = 1.0;  // a
  p.Q(1, 0) = 1.0;  // j
  p.beta(1, 0) = 0.5;
  EXPECT_DOUBLE_EQ(score_fism(m, UserContext{0, {0}, {}}, 1), 1.5);
  EXPECT_DOUBLE_EQ(score_fism(m, UserContext{0, {}, {}}, 1), 0.5);
}

TEST(Fism, EqualsFossilWithZeroWeights) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto fism = FossilModel::create_fism(0.2, 3, 2, 8, trial);
    testing::randomize(fism, rng);
    for (double& v : fism.params().eta.values()) v = 0.0;
    for (double& v : fism.params().eta_user.values()) v = 0.0;
    const FossilModel fossil(fism.hyper(), fism.params(), false);
    const auto in = random_instance(rng, 2, 8, 1);
    EXPECT_EQ(score_fism(fism, in.ctx, in.g), fossil.score(in.ctx, in.g));
  }
}

TEST(Fmc, NonPersonalised) {
  Rng rng(4);
  auto m = FmcModel::create(3, 6, 1);
  testing::randomize(m, rng);
  std::vector<double> a(6), b(6);
  m.score_all(UserContext{0, {1, 2}, {4}}, a);
  m.score_all(UserContext{5, {0}, {4}}, b);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a[3], score_fmc(m, 4, 3));
  EXPECT_EQ(score_fmc(FmcModel(Matrix(2, 2), Matrix(2, 2)), 0, 1), 0.0);
}

TEST(Fmc, PlantedCycleRanksSuccessorFirst) {
  // Users walk 0 -> 1 -> ... -> 9 -> 0.
  SequenceDataset ds;
  for (int i = 0; i < 10; ++i) ds.item_ids.push_back("c" + std::to_string(i));
  Rng rng(5);
  for (int u = 0; u < 200; ++u) {
    ds.user_ids.push_back("u" + std::to_string(u));
    ItemIndex cur = ItemIndex(rng.uniform_index(10));
    std::vector<ItemIndex> seq;
    for (int p = 0; p < 6; ++p) {
      seq.push_back(cur);
      cur = (cur + 1) % 10;
    }
    ds.sequences.push_back(seq);
  }
  recompute_itemsets(ds);
  const auto split = split_leave_last(ds);
  TrainConfig config;
  config.factors = 6;
  // Validation AUC saturates early; keep the final model.
  config.max_epochs = 100;
  config.eval_every = 100;
  config.threads = 2;
  const auto trained = train_model(ModelKind::kFmc, split, config);
  const auto& fmc = std::get<FmcModel>(trained.model);
  for (ItemIndex a = 0; a < 10; ++a) {
    ItemIndex best = 0;
    for (ItemIndex j = 1; j < 10; ++j) {
      if (score_fmc(fmc, a, j) > score_fmc(fmc, a, best)) best = j;
    }
    EXPECT_EQ(best, (a + 1) % 10) << "after " << a;
  }
}

TEST(Fpmc, AdditiveDefinition) {
  Rng rng(6);
  auto m = FpmcModel::create(3, 2, 7, 1);
  testing::randomize(m, rng);
  const BprMfModel mf(m.X(), m.Y());
  const FmcModel fmc(m.M(), m.N());
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = random_instance(rng, 2, 7, 1);
    EXPECT_DOUBLE_EQ(m.score(in.ctx, in.g),
                     score_bprmf(mf, in.ctx.user, in.g) + score_fmc(fmc, in.ctx.recents[0], in.g));
    EXPECT_EQ(m.score(in.ctx, in.g), score_fpmc(m, in.ctx.user, in.ctx.recents[0], in.g));
  }
  EXPECT_EQ(score_fpmc(FpmcModel(Matrix(1, 2), Matrix(3, 2), Matrix(3, 2), Matrix(3, 2), false), 0, 1, 2), 0.0);
}

TEST(Fpmc, Degenerations) {
  Rng rng(7);
  auto base = FpmcModel::create(3, 2, 7, 1);
  testing::randomize(base, rng);
  const FpmcModel no_user(Matrix(2, 3), base.Y(), base.M(), base.N(), false);
  const FpmcModel no_m(base.X(), base.Y(), Matrix(7, 3), base.N(), false);
  const FpmcModel no_n(base.X(), base.Y(), base.M(), Matrix(7, 3), false);
  const FmcModel fmc(base.M(), base.N());
  const BprMfModel mf(base.X(), base.Y());
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = random_instance(rng, 2, 7, 1);
    EXPECT_EQ(no_user.score(in.ctx, in.g), fmc.score(in.ctx, in.g));
    EXPECT_EQ(no_m.score(in.ctx, in.g), mf.score(in.ctx, in.g));
    EXPECT_EQ(no_n.score(in.ctx, in.g), mf.score(in.ctx, in.g));
  }
}

TEST(Fpmc, TiedTransitionsShareMatrix) {
  auto m = FpmcModel::create(2, 1, 4, 3, true);
  EXPECT_TRUE(m.tied());
  EXPECT_EQ(&m.N(), &m.M());
  EXPECT_EQ(m.blocks().size(), 3u);
}

// Which arguments each scorer reads.
TEST(TableTwo, DependencyProperties) {
  Rng rng(8);
  auto mf = BprMfModel::create(3, 3, 9, 1);
  auto fism = FossilModel::create_fism(0.2, 3, 3, 9, 1);
  auto fmc = FmcModel::create(3, 9, 1);
  auto fpmc = FpmcModel::create(3, 3, 9, 1);
  auto fossil = FossilModel::create({3, 1, 0.2}, 3, 9, 1);
  testing::randomize(mf, rng);
  testing::randomize(fism, rng);
  testing::randomize(fmc, rng);
  testing::randomize(fpmc, rng);
  testing::randomize(fossil, rng);
  for (double& v : fism.params().eta.values()) v = 0.0;
  for (double& v : fism.params().eta_user.values()) v = 0.0;

  const UserContext base{0, {1, 2, 5}, {3}};
  UserContext other_user = base;
  other_user.user = 2;
  UserContext other_recent = base;
  other_recent.recents = {7};

  for (ItemIndex j = 0; j < 9; ++j) {
    EXPECT_EQ(fmc.score(base, j), fmc.score(other_user, j));
    EXPECT_EQ(mf.score(base, j), mf.score(other_recent, j));
    EXPECT_EQ(fism.score(base, j), fism.score(other_recent, j));
  }
  auto differs = [&](const auto& m, const UserContext& a, const UserContext& b) {
    for (ItemIndex j = 0; j < 9; ++j) {
      if (m.score(a, j) != m.score(b, j)) return true;
    }
    return false;
  };
  EXPECT_TRUE(differs(fpmc, base, other_user));
  EXPECT_TRUE(differs(fpmc, base, other_recent));
  EXPECT_TRUE(differs(fossil, base, other_user));
  EXPECT_TRUE(differs(fossil, base, other_recent));
}

TEST(Gradients, AllTrainableBaselines) {
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = random_instance(rng, 3, 8, 1);
    auto mf = BprMfModel::create(4, 3, 8, trial);
    auto fmc = FmcModel::create(4, 8, trial);
    auto fpmc = FpmcModel::create(4, 3, 8, trial);
    auto tied = FpmcModel::create(4, 3, 8, trial, true);
    auto fism = FossilModel::create_fism(0.2, 4, 3, 8, trial);
    testing::randomize(mf, rng);
    testing::randomize(fmc, rng);
    testing::randomize(fpmc, rng);
    testing::randomize(tied, rng);
    testing::randomize(fism, rng);
    for (double& v : fism.params().eta.values()) v = 0.0;
    for (double& v : fism.params().eta_user.values()) v = 0.0;
    EXPECT_LT(testing::max_gradient_error(mf, in.ctx, in.g, in.j), 1e-4);
    EXPECT_LT(testing::max_gradient_error(fmc, in.ctx, in.g, in.j), 1e-4);
    EXPECT_LT(testing::max_gradient_error(fpmc, in.ctx, in.g, in.j), 1e-4);
    EXPECT_LT(testing::max_gradient_error(tied, in.ctx, in.g, in.j), 1e-4);
    EXPECT_LT(testing::max_gradient_error(fism, in.ctx, in.g, in.j), 1e-4);
  }
}

TEST(Training, FismNeverTouchesWeights) {
  Rng rng(11);
  const auto ds = testing::random_split_dataset(rng, 30, 20, 4, 10);
  TrainConfig config;
  config.factors = 3;
  config.max_epochs = 4;
  const auto trained = train_model(ModelKind::kFism, ds, config);
  const auto& m = std::get<FossilModel>(trained.model);
  EXPECT_TRUE(m.frozen_weights());
  for (double v : m.params().eta.values()) EXPECT_EQ(v, 0.0);
  for (double v : m.params().eta_user.values()) EXPECT_EQ(v, 0.0);
}

}  // namespace
}  // namespace fossil
