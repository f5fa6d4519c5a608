#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "fossil/common.hpp"
#include "fossil/context.hpp"
#include "fossil/rng.hpp"
#include "fossil/sparse_delta.hpp"

namespace fossil {

struct FossilHyper {
  std::size_t factors = 10;  // K
  std::size_t order = 1;     // L, Markov chain order
  double alpha = 0.2;        // exponent of the long-term normalisation

  void validate() const {
    if (factors < 1) throw std::invalid_argument("K must be >= 1");
    if (order < 1) throw std::invalid_argument("L must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
      throw std::invalid_argument("alpha must lie in [0, 1]");
    }
  }

  bool operator==(const FossilHyper&) const = default;
};

// Item biases, the two item factor matrices, and the global and per-user
// weights of the last L actions.
struct FossilParams {
  Matrix beta;      // |I| x 1
  Matrix P;         // |I| x K
  Matrix Q;         // |I| x K
  Matrix eta;       // 1 x L
  Matrix eta_user;  // |U| x L

  std::size_t num_items() const { return P.rows(); }
  std::size_t num_users() const { return eta_user.rows(); }

  bool operator==(const FossilParams&) const = default;
};

inline constexpr double kInitScale = 0.01;

// P and Q uniform on [-0.01, 0.01); biases and weights start at zero.
inline FossilParams init_params(const FossilHyper& hyper, std::size_t users,
                                std::size_t items, std::uint64_t seed) {
  hyper.validate();
  if (users == 0 || items == 0) {
    throw std::invalid_argument("user and item counts must be positive");
  }
  FossilParams params{Matrix(items, 1), Matrix(items, hyper.factors),
                      Matrix(items, hyper.factors), Matrix(1, hyper.order),
                      Matrix(users, hyper.order)};
  Rng rng = Rng::stream(seed, 0);
  for (double& v : params.P.values()) v = rng.uniform(-kInitScale, kInitScale);
  for (double& v : params.Q.values()) v = rng.uniform(-kInitScale, kInitScale);
  return params;
}

namespace detail {

// 1 / |H|^alpha, or 0 for an empty set.
inline double history_norm(std::size_t size, double alpha) {
  return size == 0 ? 0.0 : std::pow(static_cast<double>(size), -alpha);
}

inline double recent_weight(const FossilParams& params, UserIndex u, std::size_t k) {
  return params.eta(0, k) + params.eta_user(u, k);
}

inline std::size_t usable_recents(const UserContext& ctx, const FossilHyper& hyper) {
  return std::min(ctx.recents.size(), hyper.order);
}

}  // namespace detail

// Long-term term over history \ {target} plus the weighted recent items.
inline std::vector<double> compose_user_vector(const FossilParams& params,
                                               const FossilHyper& hyper,
                                               const UserContext& ctx,
                                               ItemIndex target) {
  std::vector<double> v(hyper.factors, 0.0);
  std::size_t count = 0;
  for (ItemIndex j : ctx.history) {
    if (j == target) continue;
    axpy(1.0, params.P.row(j), v);
    ++count;
  }
  const double norm = detail::history_norm(count, hyper.alpha);
  for (double& x : v) x *= norm;
  for (std::size_t k = 0; k < detail::usable_recents(ctx, hyper); ++k) {
    axpy(detail::recent_weight(params, ctx.user, k), params.P.row(ctx.recents[k]), v);
  }
  return v;
}

inline double score(const FossilParams& params, const FossilHyper& hyper,
                    const UserContext& ctx, ItemIndex j) {
  const auto v = compose_user_vector(params, hyper, ctx, j);
  return params.beta(j, 0) + dot(v, params.Q.row(j));
}

// Shares one sum over the history across all items; items inside the
// history get their own row removed and the smaller normaliser.
inline void score_all(const FossilParams& params, const FossilHyper& hyper,
                      const UserContext& ctx, std::span<double> out) {
  const std::size_t K = hyper.factors;
  std::vector<double> history_sum(K, 0.0);
  for (ItemIndex j : ctx.history) axpy(1.0, params.P.row(j), history_sum);
  std::vector<double> short_term(K, 0.0);
  for (std::size_t k = 0; k < detail::usable_recents(ctx, hyper); ++k) {
    axpy(detail::recent_weight(params, ctx.user, k), params.P.row(ctx.recents[k]),
         short_term);
  }

  const std::size_t n = ctx.history.size();
  const double norm_out = detail::history_norm(n, hyper.alpha);
  const double norm_in = detail::history_norm(n > 0 ? n - 1 : 0, hyper.alpha);
  std::size_t cursor = 0;  // walks the sorted history alongside j
  for (std::size_t j = 0; j < params.num_items(); ++j) {
    const auto q = params.Q.row(j);
    while (cursor < n && ctx.history[cursor] < j) ++cursor;
    const bool inside = cursor < n && ctx.history[cursor] == j;
    const double long_term =
        inside ? (dot(history_sum, q) - dot(params.P.row(j), q)) * norm_in
               : dot(history_sum, q) * norm_out;
    out[j] = params.beta(j, 0) + long_term + dot(short_term, q);
  }
}

inline std::vector<double> score_all(const FossilParams& params,
                                     const FossilHyper& hyper,
                                     const UserContext& ctx) {
  std::vector<double> out(params.num_items());
  score_all(params, hyper, ctx, out);
  return out;
}

// Items most likely to follow `query`: <P_query, Q_j> descending, ties by
// index, the query itself excluded.
inline std::vector<ScoredItem> rank_transitions(const FossilParams& params,
                                                ItemIndex query, std::size_t k) {
  const std::size_t items = params.num_items();
  if (query >= items) throw std::invalid_argument("query item out of range");
  std::vector<ScoredItem> ranked;
  ranked.reserve(items - 1);
  for (std::size_t j = 0; j < items; ++j) {
    if (j == query) continue;
    ranked.push_back({static_cast<ItemIndex>(j),
                      dot(params.P.row(query), params.Q.row(j))});
  }
  k = std::min(k, ranked.size());
  auto before = [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item < b.item;
  };
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k),
                    ranked.end(), before);
  ranked.resize(k);
  return ranked;
}

// Trainable wrapper. With frozen weights the model is FISM: the recent-item
// weights are neither read nor updated.
class FossilModel {
 public:
  enum Block : std::size_t { kBeta, kP, kQ, kEta, kEtaUser };

  FossilModel() = default;
  FossilModel(FossilHyper hyper, FossilParams params, bool frozen_weights = false)
      : hyper_(hyper), params_(std::move(params)), frozen_(frozen_weights) {}

  static FossilModel create(const FossilHyper& hyper, std::size_t users,
                            std::size_t items, std::uint64_t seed) {
    return FossilModel(hyper, init_params(hyper, users, items, seed), false);
  }
  static FossilModel create_fism(double alpha, std::size_t factors,
                                 std::size_t users, std::size_t items,
                                 std::uint64_t seed) {
    FossilHyper hyper{factors, 1, alpha};
    return FossilModel(hyper, init_params(hyper, users, items, seed), true);
  }

  const FossilHyper& hyper() const { return hyper_; }
  const FossilParams& params() const { return params_; }
  FossilParams& params() { return params_; }
  bool frozen_weights() const { return frozen_; }
  std::size_t order() const { return frozen_ ? 0 : hyper_.order; }
  // FISM ignores order and is trained like the other sequence-unaware models.
  bool sequential() const { return !frozen_; }

  double score(const UserContext& ctx, ItemIndex j) const {
    return fossil::score(params_, scoring_hyper(), ctx, j);
  }
  void score_all(const UserContext& ctx, std::span<double> out) const {
    fossil::score_all(params_, scoring_hyper(), ctx, out);
  }

  // delta += coef * d score(ctx, target) / d params
  void accumulate_gradient(const UserContext& ctx, ItemIndex target, double coef,
                           SparseDelta& delta) const {
    const std::size_t K = hyper_.factors;
    const auto v = compose_user_vector(params_, scoring_hyper(), ctx, target);
    const auto q = params_.Q.row(target);

    delta.row(kBeta, target, 1)[0] += coef;
    axpy(coef, v, delta.row(kQ, target, K));

    const std::size_t h = ctx.history.size() - (ctx.in_history(target) ? 1 : 0);
    const double norm = detail::history_norm(h, hyper_.alpha);
    for (ItemIndex j : ctx.history) {
      if (j == target) continue;
      axpy(coef * norm, q, delta.row(kP, j, K));
    }
    if (frozen_) return;
    for (std::size_t k = 0; k < detail::usable_recents(ctx, hyper_); ++k) {
      const ItemIndex r = ctx.recents[k];
      const double w = detail::recent_weight(params_, ctx.user, k);
      axpy(coef * w, q, delta.row(kP, r, K));
      const double ip = dot(params_.P.row(r), q);
      delta.row(kEta, 0, hyper_.order)[k] += coef * ip;
      delta.row(kEtaUser, ctx.user, hyper_.order)[k] += coef * ip;
    }
  }

  std::vector<ParamBlock> blocks() {
    return {{"beta", &params_.beta},
            {"P", &params_.P},
            {"Q", &params_.Q},
            {"eta", &params_.eta},
            {"eta_user", &params_.eta_user}};
  }
  std::vector<ConstParamBlock> blocks() const {
    return {{"beta", &params_.beta},
            {"P", &params_.P},
            {"Q", &params_.Q},
            {"eta", &params_.eta},
            {"eta_user", &params_.eta_user}};
  }

  bool operator==(const FossilModel&) const = default;

 private:
  // FISM reads no recent items.
  FossilHyper scoring_hyper() const {
    return frozen_ ? FossilHyper{hyper_.factors, 0, hyper_.alpha} : hyper_;
  }

  FossilHyper hyper_;
  FossilParams params_;
  bool frozen_ = false;
};

}  // namespace fossil
