#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fossil/common.hpp"
#include "fossil/context.hpp"
#include "fossil/dataset.hpp"
#include "fossil/fossil_model.hpp"
#include "fossil/rng.hpp"
#include "fossil/sparse_delta.hpp"

namespace fossil {

namespace detail {

inline Matrix random_factors(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-kInitScale, kInitScale);
  return m;
}

}  // namespace detail

// Popularity: number of training occurrences of each item.
struct PopModel {
  std::vector<std::uint64_t> counts;

  static PopModel fit(const SequenceDataset& ds) {
    PopModel model;
    model.counts.assign(ds.num_items(), 0);
    for (std::size_t u = 0; u < ds.num_users(); ++u) {
      const std::size_t n = ds.train_length(static_cast<UserIndex>(u));
      for (std::size_t p = 0; p < n; ++p) ++model.counts[ds.sequences[u][p]];
    }
    return model;
  }

  std::size_t order() const { return 0; }
  double score(const UserContext&, ItemIndex j) const {
    return static_cast<double>(counts[j]);
  }
  void score_all(const UserContext&, std::span<double> out) const {
    for (std::size_t j = 0; j < counts.size(); ++j) out[j] = double(counts[j]);
  }

  bool operator==(const PopModel&) const = default;
};

inline double score_pop(const PopModel& model, ItemIndex j) {
  return static_cast<double>(model.counts[j]);
}

// <X_u, Y_j>, no item bias.
class BprMfModel {
 public:
  enum Block : std::size_t { kX, kY };

  BprMfModel() = default;
  BprMfModel(Matrix X, Matrix Y) : X_(std::move(X)), Y_(std::move(Y)) {}

  static BprMfModel create(std::size_t factors, std::size_t users,
                           std::size_t items, std::uint64_t seed) {
    Rng rng = Rng::stream(seed, 0);
    Matrix X = detail::random_factors(users, factors, rng);
    Matrix Y = detail::random_factors(items, factors, rng);
    return {std::move(X), std::move(Y)};
  }

  const Matrix& X() const { return X_; }
  const Matrix& Y() const { return Y_; }
  std::size_t factors() const { return X_.cols(); }
  std::size_t order() const { return 0; }
  bool sequential() const { return false; }

  double score(const UserContext& ctx, ItemIndex j) const {
    return dot(X_.row(ctx.user), Y_.row(j));
  }
  void score_all(const UserContext& ctx, std::span<double> out) const {
    for (std::size_t j = 0; j < Y_.rows(); ++j) out[j] = dot(X_.row(ctx.user), Y_.row(j));
  }
  void accumulate_gradient(const UserContext& ctx, ItemIndex target, double coef,
                           SparseDelta& delta) const {
    axpy(coef, Y_.row(target), delta.row(kX, ctx.user, factors()));
    axpy(coef, X_.row(ctx.user), delta.row(kY, target, factors()));
  }

  std::vector<ParamBlock> blocks() { return {{"X", &X_}, {"Y", &Y_}}; }
  std::vector<ConstParamBlock> blocks() const { return {{"X", &X_}, {"Y", &Y_}}; }

  bool operator==(const BprMfModel&) const = default;

 private:
  Matrix X_, Y_;
};

inline double score_bprmf(const BprMfModel& model, UserIndex u, ItemIndex j) {
  return dot(model.X().row(u), model.Y().row(j));
}

inline double score_fism(const FossilModel& model, const UserContext& ctx,
                         ItemIndex j) {
  return model.score(ctx, j);
}

// First-order factorised transitions <M_prev, N_j>; scores 0 without a
// previous item.
class FmcModel {
 public:
  enum Block : std::size_t { kM, kN };

  FmcModel() = default;
  FmcModel(Matrix M, Matrix N) : M_(std::move(M)), N_(std::move(N)) {}

  static FmcModel create(std::size_t factors, std::size_t items, std::uint64_t seed) {
    Rng rng = Rng::stream(seed, 0);
    Matrix M = detail::random_factors(items, factors, rng);
    Matrix N = detail::random_factors(items, factors, rng);
    return {std::move(M), std::move(N)};
  }

  const Matrix& M() const { return M_; }
  const Matrix& N() const { return N_; }
  std::size_t factors() const { return M_.cols(); }
  std::size_t order() const { return 1; }
  bool sequential() const { return true; }

  double score(const UserContext& ctx, ItemIndex j) const {
    if (ctx.recents.empty()) return 0.0;
    return dot(M_.row(ctx.recents[0]), N_.row(j));
  }
  void score_all(const UserContext& ctx, std::span<double> out) const {
    for (std::size_t j = 0; j < N_.rows(); ++j) {
      out[j] = score(ctx, static_cast<ItemIndex>(j));
    }
  }
  void accumulate_gradient(const UserContext& ctx, ItemIndex target, double coef,
                           SparseDelta& delta) const {
    if (ctx.recents.empty()) return;
    const ItemIndex prev = ctx.recents[0];
    axpy(coef, N_.row(target), delta.row(kM, prev, factors()));
    axpy(coef, M_.row(prev), delta.row(kN, target, factors()));
  }

  std::vector<ParamBlock> blocks() { return {{"M", &M_}, {"N", &N_}}; }
  std::vector<ConstParamBlock> blocks() const { return {{"M", &M_}, {"N", &N_}}; }

  bool operator==(const FmcModel&) const = default;

 private:
  Matrix M_, N_;
};

inline double score_fmc(const FmcModel& model, ItemIndex prev, ItemIndex j) {
  return dot(model.M().row(prev), model.N().row(j));
}

// <X_u, Y_j> + <M_prev, N_j>. With tied transitions N is M.
class FpmcModel {
 public:
  enum Block : std::size_t { kX, kY, kM, kN };

  FpmcModel() = default;
  FpmcModel(Matrix X, Matrix Y, Matrix M, Matrix N, bool tied)
      : X_(std::move(X)), Y_(std::move(Y)), M_(std::move(M)), N_(std::move(N)),
        tied_(tied) {
    if (tied_) N_ = Matrix();
  }

  static FpmcModel create(std::size_t factors, std::size_t users, std::size_t items,
                          std::uint64_t seed, bool tied = false) {
    Rng rng = Rng::stream(seed, 0);
    Matrix X = detail::random_factors(users, factors, rng);
    Matrix Y = detail::random_factors(items, factors, rng);
    Matrix M = detail::random_factors(items, factors, rng);
    Matrix N = tied ? Matrix() : detail::random_factors(items, factors, rng);
    return {std::move(X), std::move(Y), std::move(M), std::move(N), tied};
  }

  const Matrix& X() const { return X_; }
  const Matrix& Y() const { return Y_; }
  const Matrix& M() const { return M_; }
  const Matrix& N() const { return tied_ ? M_ : N_; }
  bool tied() const { return tied_; }
  std::size_t factors() const { return X_.cols(); }
  std::size_t order() const { return 1; }
  bool sequential() const { return true; }

  double score(const UserContext& ctx, ItemIndex j) const {
    double s = dot(X_.row(ctx.user), Y_.row(j));
    if (!ctx.recents.empty()) s += dot(M_.row(ctx.recents[0]), N().row(j));
    return s;
  }
  void score_all(const UserContext& ctx, std::span<double> out) const {
    for (std::size_t j = 0; j < Y_.rows(); ++j) {
      out[j] = score(ctx, static_cast<ItemIndex>(j));
    }
  }
  void accumulate_gradient(const UserContext& ctx, ItemIndex target, double coef,
                           SparseDelta& delta) const {
    const std::size_t K = factors();
    axpy(coef, Y_.row(target), delta.row(kX, ctx.user, K));
    axpy(coef, X_.row(ctx.user), delta.row(kY, target, K));
    if (ctx.recents.empty()) return;
    const ItemIndex prev = ctx.recents[0];
    axpy(coef, N().row(target), delta.row(kM, prev, K));
    axpy(coef, M_.row(prev), delta.row(tied_ ? kM : kN, target, K));
  }

  std::vector<ParamBlock> blocks() {
    if (tied_) return {{"X", &X_}, {"Y", &Y_}, {"M", &M_}};
    return {{"X", &X_}, {"Y", &Y_}, {"M", &M_}, {"N", &N_}};
  }
  std::vector<ConstParamBlock> blocks() const {
    if (tied_) return {{"X", &X_}, {"Y", &Y_}, {"M", &M_}};
    return {{"X", &X_}, {"Y", &Y_}, {"M", &M_}, {"N", &N_}};
  }

  bool operator==(const FpmcModel&) const = default;

 private:
  Matrix X_, Y_, M_, N_;
  bool tied_ = false;
};

inline double score_fpmc(const FpmcModel& model, UserIndex u, ItemIndex prev,
                         ItemIndex j) {
  return dot(model.X().row(u), model.Y().row(j)) +
         dot(model.M().row(prev), model.N().row(j));
}

}  // namespace fossil
