#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <thread>
#include <vector>

#include "fossil/common.hpp"
#include "fossil/context.hpp"
#include "fossil/dataset.hpp"

namespace fossil {

// Anything that can rank every item for a context.
template <class S>
concept Scorer = requires(const S& s, const UserContext& ctx, std::span<double> out) {
  { s.order() } -> std::convertible_to<std::size_t>;
  s.score_all(ctx, out);
};

// Adapts a per-item callable (ctx, item) -> double into a Scorer.
class FunctionScorer {
 public:
  using Fn = std::function<double(const UserContext&, ItemIndex)>;

  FunctionScorer(Fn fn, std::size_t items, std::size_t order = 0)
      : fn_(std::move(fn)), items_(items), order_(order) {}

  std::size_t order() const { return order_; }
  double score(const UserContext& ctx, ItemIndex j) const { return fn_(ctx, j); }
  void score_all(const UserContext& ctx, std::span<double> out) const {
    for (std::size_t j = 0; j < items_; ++j) out[j] = fn_(ctx, static_cast<ItemIndex>(j));
  }

 private:
  Fn fn_;
  std::size_t items_;
  std::size_t order_;
};

enum class Target { kValidation, kTest };

struct UserAuc {
  UserIndex user = 0;
  std::size_t wins = 0;       // negatives scored strictly below the truth
  std::size_t negatives = 0;  // |I \ I+_u|

  double value() const { return double(wins) / double(negatives); }
  bool operator==(const UserAuc&) const = default;
};

struct AucResult {
  double mean = 0.0;
  std::vector<UserAuc> per_user;  // users with at least one negative
  std::size_t excluded = 0;       // users without negatives
};

inline std::size_t default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return std::clamp<std::size_t>(hw == 0 ? 1 : hw, 1, 16);
}

// Position of the held-out action for `target`.
inline std::size_t target_position(const SequenceDataset& ds, UserIndex u,
                                   Target target) {
  const std::size_t n = ds.sequences[u].size();
  return target == Target::kTest ? n - 1 : n - 2;
}

// Per-user AUC of the held-out item against all items the user never
// touched, averaged over users. Ties count as misses.
template <Scorer S>
AucResult auc(const S& scorer, const SequenceDataset& ds, Target target,
              std::size_t threads = 0) {
  if (!ds.is_split()) throw std::invalid_argument("auc needs a split dataset");
  const std::size_t users = ds.num_users();
  const std::size_t items = ds.num_items();
  std::vector<UserAuc> results(users);
  std::vector<char> has_negatives(users, 0);

  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores(items);
    for (std::size_t u = begin; u < end; ++u) {
      const auto user = static_cast<UserIndex>(u);
      const std::size_t pos = target_position(ds, user, target);
      const UserContext ctx = context_before(ds, user, pos, scorer.order());
      scorer.score_all(ctx, scores);
      const double truth = scores[ds.sequences[u][pos]];
      const auto& consumed = ds.itemsets[u];
      UserAuc r{user, 0, 0};
      std::size_t cursor = 0;
      for (std::size_t j = 0; j < items; ++j) {
        while (cursor < consumed.size() && consumed[cursor] < j) ++cursor;
        if (cursor < consumed.size() && consumed[cursor] == j) continue;
        ++r.negatives;
        if (truth > scores[j]) ++r.wins;
      }
      results[u] = r;
      has_negatives[u] = r.negatives > 0;
    }
  };

  if (threads == 0) threads = default_threads();
  threads = std::min(threads, std::max<std::size_t>(users, 1));
  if (threads <= 1) {
    work(0, users);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (users + threads - 1) / threads;
    for (std::size_t b = 0; b < users; b += chunk) {
      pool.emplace_back(work, b, std::min(users, b + chunk));
    }
  }

  AucResult out;
  double sum = 0.0;
  for (std::size_t u = 0; u < users; ++u) {
    if (!has_negatives[u]) {
      ++out.excluded;
      continue;
    }
    out.per_user.push_back(results[u]);
    sum += results[u].value();
  }
  out.mean = out.per_user.empty()
                 ? std::numeric_limits<double>::quiet_NaN()
                 : sum / double(out.per_user.size());
  return out;
}

}  // namespace fossil
