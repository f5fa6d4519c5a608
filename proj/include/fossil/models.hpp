#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fossil/auc.hpp"
#include "fossil/baselines.hpp"
#include "fossil/dataset.hpp"
#include "fossil/fossil_model.hpp"
#include "fossil/sbpr.hpp"

namespace fossil {

enum class ModelKind : std::uint8_t {
  kPop = 0,
  kBprMf = 1,
  kFism = 2,
  kFmc = 3,
  kFpmc = 4,
  kFossil = 5,
};

inline constexpr std::string_view kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kPop: return "pop";
    case ModelKind::kBprMf: return "bprmf";
    case ModelKind::kFism: return "fism";
    case ModelKind::kFmc: return "fmc";
    case ModelKind::kFpmc: return "fpmc";
    case ModelKind::kFossil: return "fossil";
  }
  return "?";
}

inline std::optional<ModelKind> parse_kind(std::string_view name) {
  for (auto kind : {ModelKind::kPop, ModelKind::kBprMf, ModelKind::kFism,
                    ModelKind::kFmc, ModelKind::kFpmc, ModelKind::kFossil}) {
    if (kind_name(kind) == name) return kind;
  }
  return std::nullopt;
}

using AnyModel = std::variant<PopModel, BprMfModel, FossilModel, FmcModel, FpmcModel>;

inline ModelKind kind_of(const AnyModel& model) {
  return std::visit(
      [](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, PopModel>) return ModelKind::kPop;
        if constexpr (std::is_same_v<M, BprMfModel>) return ModelKind::kBprMf;
        if constexpr (std::is_same_v<M, FmcModel>) return ModelKind::kFmc;
        if constexpr (std::is_same_v<M, FpmcModel>) return ModelKind::kFpmc;
        if constexpr (std::is_same_v<M, FossilModel>) {
          return m.frozen_weights() ? ModelKind::kFism : ModelKind::kFossil;
        }
      },
      model);
}

// Freshly initialised model of the given kind. POP is fitted directly.
inline AnyModel make_model(ModelKind kind, const SequenceDataset& ds,
                           const TrainConfig& config) {
  const std::size_t users = ds.num_users();
  const std::size_t items = ds.num_items();
  switch (kind) {
    case ModelKind::kPop:
      return PopModel::fit(ds);
    case ModelKind::kBprMf:
      return BprMfModel::create(config.factors, users, items, config.seed);
    case ModelKind::kFism:
      return FossilModel::create_fism(config.alpha, config.factors, users, items,
                                      config.seed);
    case ModelKind::kFmc:
      return FmcModel::create(config.factors, items, config.seed);
    case ModelKind::kFpmc:
      return FpmcModel::create(config.factors, users, items, config.seed,
                               config.tie_fpmc);
    case ModelKind::kFossil:
      return FossilModel::create({config.factors, config.order, config.alpha},
                                 users, items, config.seed);
  }
  throw std::invalid_argument("unknown model kind");
}

inline std::size_t order_of(const AnyModel& model) {
  return std::visit([](const auto& m) { return m.order(); }, model);
}

template <class Fn>
decltype(auto) visit_model(const AnyModel& model, Fn&& fn) {
  return std::visit(std::forward<Fn>(fn), model);
}

inline AucResult auc(const AnyModel& model, const SequenceDataset& ds, Target target,
                     std::size_t threads = 0) {
  return std::visit([&](const auto& m) { return auc(m, ds, target, threads); }, model);
}

struct TrainedModel {
  AnyModel model;
  std::vector<TraceEntry> trace;
  double validation_auc = 0.0;
  std::size_t best_epoch = 0;
};

// Trains a model of `kind` on the train positions of `split`.
inline TrainedModel train_model(ModelKind kind, const SequenceDataset& split,
                                const TrainConfig& config) {
  config.validate();
  AnyModel init = make_model(kind, split, config);
  if (kind == ModelKind::kPop) {
    const double value = auc(init, split, Target::kValidation, config.threads).mean;
    return {std::move(init), {}, value, 0};
  }
  return std::visit(
      [&](auto& m) -> TrainedModel {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, PopModel>) {
          throw std::logic_error("unreachable");
        } else {
          auto result = train(split, std::move(m), config);
          return {AnyModel(std::move(result.model)), std::move(result.trace),
                  result.best_validation_auc, result.best_epoch};
        }
      },
      init);
}

}  // namespace fossil
