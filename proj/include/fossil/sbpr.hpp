#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fossil/auc.hpp"
#include "fossil/common.hpp"
#include "fossil/context.hpp"
#include "fossil/dataset.hpp"
#include "fossil/rng.hpp"
#include "fossil/sparse_delta.hpp"

namespace fossil {

// Logistic function, evaluated on the branch where exp() cannot overflow.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ln sigmoid(x) without overflow or log(0) for large |x|.
inline double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

struct TrainConfig {
  double epsilon = 0.01;  // learning rate
  double lambda = 0.1;    // shared regularisation
  std::map<std::string, double, std::less<>> lambda_overrides;  // per block
  std::size_t factors = 10;
  std::size_t order = 1;
  double alpha = 0.2;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  std::size_t eval_every = 2;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // validation AUC workers, 0 = hardware
  bool tie_fpmc = false;

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("learning rate must be > 0");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    for (const auto& [name, value] : lambda_overrides) {
      if (!(value >= 0.0)) throw std::invalid_argument("lambda for " + name + " must be >= 0");
    }
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
    if (factors < 1) throw std::invalid_argument("K must be >= 1");
    if (order < 1) throw std::invalid_argument("L must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  }

  double lambda_for(std::string_view block) const {
    auto it = lambda_overrides.find(block);
    return it == lambda_overrides.end() ? lambda : it->second;
  }
};

template <class M>
concept TrainableModel =
    Scorer<M> && requires(M& m, const M& cm, const UserContext& ctx, ItemIndex i,
                          double c, SparseDelta& d) {
      { cm.sequential() } -> std::convertible_to<bool>;
      { cm.score(ctx, i) } -> std::convertible_to<double>;
      cm.accumulate_gradient(ctx, i, c, d);
      { m.blocks() } -> std::convertible_to<std::vector<ParamBlock>>;
      { cm.blocks() } -> std::convertible_to<std::vector<ConstParamBlock>>;
    };

// (user, 1-based time step, negative item).
struct Triple {
  UserIndex u = 0;
  std::size_t t = 0;
  ItemIndex j = 0;

  bool operator==(const Triple&) const = default;
};

// Draws training triples from the train positions of a split dataset.
// Sequential models draw t from {2..T_u} and exclude the positive and its
// min(L, t-1) predecessors; sequence-unaware models draw t from {1..T_u}
// and exclude every train item of the user.
class TripleSampler {
 public:
  TripleSampler(const SequenceDataset& ds, std::size_t order, bool sequential)
      : ds_(ds), order_(order), sequential_(sequential) {
    if (!ds.is_split()) throw std::invalid_argument("training needs a split dataset");
    const std::size_t min_train = sequential ? 2 : 1;
    train_items_.resize(ds.num_users());
    for (std::size_t u = 0; u < ds.num_users(); ++u) {
      const auto user = static_cast<UserIndex>(u);
      const std::size_t n = ds.train_length(user);
      train_items_[u] = distinct_items(std::span(ds.sequences[u]).first(n));
      if (n < min_train) continue;
      if (!sequential && train_items_[u].size() >= ds.num_items()) {
        throw DataError("user '" + ds.user_ids[u] + "' has no negative item to sample");
      }
      eligible_.push_back(user);
    }
    if (eligible_.empty()) throw DataError("no user has enough train actions");
    if (sequential && ds.num_items() <= order + 1) {
      throw DataError("need more than L+1 items to sample negatives");
    }
  }

  Triple sample(Rng& rng) const {
    Triple tr;
    tr.u = eligible_[rng.uniform_index(eligible_.size())];
    const auto& seq = ds_.sequences[tr.u];
    const std::size_t n = ds_.train_length(tr.u);
    if (sequential_) {
      tr.t = 2 + rng.uniform_index(n - 1);
      const std::size_t window = std::min(order_, tr.t - 1);
      while (true) {
        tr.j = static_cast<ItemIndex>(rng.uniform_index(ds_.num_items()));
        bool clash = false;
        for (std::size_t k = 0; k <= window && !clash; ++k) {
          clash = seq[tr.t - 1 - k] == tr.j;
        }
        if (!clash) return tr;
      }
    }
    tr.t = 1 + rng.uniform_index(n);
    const auto& consumed = train_items_[tr.u];
    do {
      tr.j = static_cast<ItemIndex>(rng.uniform_index(ds_.num_items()));
    } while (std::binary_search(consumed.begin(), consumed.end(), tr.j));
    return tr;
  }

  ItemIndex positive(const Triple& tr) const { return ds_.sequences[tr.u][tr.t - 1]; }

  // Long-term history is the user's train item set; recents precede t.
  void fill_context(const Triple& tr, std::size_t order, UserContext& ctx) const {
    ctx.user = tr.u;
    ctx.history.assign(train_items_[tr.u].begin(), train_items_[tr.u].end());
    fill_recents(ds_.sequences[tr.u], tr.t - 1, order, ctx.recents);
  }

  // One expected pass over the positive positions the sampler can draw.
  std::size_t epoch_size() const {
    std::size_t total = 0;
    for (UserIndex u : eligible_) {
      const std::size_t n = ds_.train_length(u);
      total += sequential_ ? n - 1 : n;
    }
    return total;
  }

  std::span<const UserIndex> eligible_users() const { return eligible_; }
  const std::vector<ItemIndex>& train_items(UserIndex u) const { return train_items_[u]; }

 private:
  const SequenceDataset& ds_;
  std::size_t order_;
  bool sequential_;
  std::vector<UserIndex> eligible_;
  std::vector<std::vector<ItemIndex>> train_items_;
};

// Writes sigma(p_j - p_g) * d(p_g - p_j)/dTheta into `delta` and returns the
// scale sigma(p_j - p_g).
template <TrainableModel M>
double sbpr_gradient(const M& model, const UserContext& ctx, ItemIndex positive,
                     ItemIndex negative, SparseDelta& delta) {
  delta.clear();
  const double scale =
      sigmoid(model.score(ctx, negative) - model.score(ctx, positive));
  model.accumulate_gradient(ctx, positive, scale, delta);
  model.accumulate_gradient(ctx, negative, -scale, delta);
  return scale;
}

// Theta += epsilon * (delta - lambda * Theta) on touched rows only.
inline void apply_update(std::span<const ParamBlock> blocks, const SparseDelta& delta,
                         const TrainConfig& config) {
  for (const auto& e : delta.entries()) {
    const ParamBlock& block = blocks[e.block];
    const double lambda = config.lambda_for(block.name);
    auto row = block.values->row(e.row);
    const auto d = delta.values(e);
    for (std::size_t k = 0; k < e.width; ++k) {
      row[k] += config.epsilon * (d[k] - lambda * row[k]);
    }
    if (!all_finite(row)) {
      throw NumericError("non-finite value in parameter group '" +
                         std::string(block.name) + "' row " + std::to_string(e.row));
    }
  }
}

template <TrainableModel M>
void apply_update(M& model, const SparseDelta& delta, const TrainConfig& config) {
  const auto blocks = model.blocks();
  apply_update(std::span<const ParamBlock>(blocks), delta, config);
}

struct TraceEntry {
  std::size_t epoch = 0;
  double validation_auc = 0.0;
  double seconds = 0.0;
  std::uint64_t triples = 0;
};

template <class M>
struct TrainResult {
  M model;  // best validation snapshot
  std::vector<TraceEntry> trace;
  double best_validation_auc = -std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
};

// Plain S-BPR SGD with early stopping on validation AUC. Deterministic for a
// given (dataset, initial model, config).
template <TrainableModel M>
TrainResult<M> train(const SequenceDataset& split, M model, const TrainConfig& config) {
  config.validate();
  const TripleSampler sampler(split, model.order(), model.sequential());
  const std::size_t epoch_size = sampler.epoch_size();
  if (epoch_size == 0) throw DataError("no training triples available");

  Rng rng = Rng::stream(config.seed, 1);
  const auto start = std::chrono::steady_clock::now();
  TrainResult<M> result{model, {}, -std::numeric_limits<double>::infinity(), 0};
  const auto blocks = model.blocks();
  SparseDelta delta;
  UserContext ctx;
  std::uint64_t consumed = 0;
  std::size_t stale = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (std::size_t s = 0; s < epoch_size; ++s) {
      const Triple tr = sampler.sample(rng);
      sampler.fill_context(tr, model.order(), ctx);
      sbpr_gradient(model, ctx, sampler.positive(tr), tr.j, delta);
      apply_update(std::span<const ParamBlock>(blocks), delta, config);
    }
    consumed += epoch_size;

    if (epoch % config.eval_every != 0 && epoch != config.max_epochs) continue;
    const double value = auc(model, split, Target::kValidation, config.threads).mean;
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.trace.push_back({epoch, value, seconds, consumed});
    if (value > result.best_validation_auc) {
      result.best_validation_auc = value;
      result.best_epoch = epoch;
      result.model = model;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  return result;
}

inline void write_trace(std::ostream& out, std::span<const TraceEntry> trace,
                        const TrainConfig& config) {
  out << "epoch\tvalidation_auc\tseconds\ttriples\trng\tseed\n";
  char buf[64];
  for (const auto& e : trace) {
    std::snprintf(buf, sizeof buf, "%.6f", e.validation_auc);
    out << e.epoch << '\t' << buf << '\t';
    std::snprintf(buf, sizeof buf, "%.3f", e.seconds);
    out << buf << '\t' << e.triples << '\t' << Rng::kAlgorithm << '\t'
        << config.seed << '\n';
  }
}

}  // namespace fossil
