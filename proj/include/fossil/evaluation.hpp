#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fossil/auc.hpp"
#include "fossil/dataset.hpp"
#include "fossil/models.hpp"
#include "fossil/sbpr.hpp"

namespace fossil {

// Relative gain of a over b, in percent.
inline double improvement_pct(double a, double b) { return (a - b) / b * 100.0; }

struct ModelSpec {
  ModelKind kind = ModelKind::kFossil;
  std::size_t order = 1;  // only meaningful for fossil

  std::string label() const {
    if (kind == ModelKind::kFossil) return "fossil-L" + std::to_string(order);
    return std::string(kind_name(kind));
  }
  bool operator==(const ModelSpec&) const = default;
};

// "pop,bprmf,fossil:2" -> specs. A bare "fossil" is first order.
inline std::vector<ModelSpec> parse_model_list(std::string_view text) {
  std::vector<ModelSpec> specs;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view token = text.substr(start, end - start);
    start = end + 1;
    if (token.empty()) continue;
    ModelSpec spec;
    std::string_view name = token;
    if (const auto colon = token.find(':'); colon != std::string_view::npos) {
      name = token.substr(0, colon);
      if (!detail::parse_number(token.substr(colon + 1), spec.order) || spec.order < 1) {
        throw std::invalid_argument("bad model order in '" + std::string(token) + "'");
      }
    }
    const auto kind = parse_kind(name);
    if (!kind) throw std::invalid_argument("unknown model '" + std::string(name) + "'");
    if (*kind != ModelKind::kFossil && name != token) {
      throw std::invalid_argument("only fossil takes an order: '" + std::string(token) + "'");
    }
    spec.kind = *kind;
    specs.push_back(spec);
  }
  if (specs.empty()) throw std::invalid_argument("empty model list");
  return specs;
}

inline TrainConfig config_for(const ModelSpec& spec, TrainConfig config) {
  if (spec.kind == ModelKind::kFossil) config.order = spec.order;
  return config;
}

struct Provenance {
  std::uint64_t seed = 0;
  std::uint64_t dataset_checksum = 0;
  std::string config;
};

inline std::string describe(const TrainConfig& c) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "k=%zu;alpha=%g;lr=%g;lambda=%g;max_epochs=%zu;patience=%zu;"
                "eval_every=%zu;tie_fpmc=%d",
                c.factors, c.alpha, c.epsilon, c.lambda, c.max_epochs, c.patience,
                c.eval_every, c.tie_fpmc ? 1 : 0);
  std::string out = buf;
  for (const auto& [name, value] : c.lambda_overrides) {
    std::snprintf(buf, sizeof buf, ";lambda_%s=%g", name.c_str(), value);
    out += buf;
  }
  return out;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct ModelRow {
  std::string label;
  ModelKind kind = ModelKind::kPop;
  std::size_t order = 0;
  AucResult test;
};

struct Improvement {
  std::string name;  // e.g. "fossil-L1_vs_fism"
  double pct = 0.0;
};

struct EvalReport {
  std::vector<ModelRow> rows;
  DatasetSummary summary;
  std::vector<Improvement> improvements;
  Provenance provenance;

  const ModelRow* find(std::string_view label) const {
    for (const auto& r : rows) {
      if (r.label == label) return &r;
    }
    return nullptr;
  }
};

namespace detail {

inline const ModelRow* best_of(std::span<const ModelRow> rows, bool fossil) {
  const ModelRow* best = nullptr;
  for (const auto& r : rows) {
    if ((r.kind == ModelKind::kFossil) != fossil) continue;
    if (!best || r.test.mean > best->test.mean) best = &r;
  }
  return best;
}

inline const ModelRow* first_of(std::span<const ModelRow> rows, ModelKind kind) {
  for (const auto& r : rows) {
    if (r.kind == kind) return &r;
  }
  return nullptr;
}

}  // namespace detail

// The four comparison columns: FPMC vs BPR-MF, Fossil vs FISM, Fossil vs
// FPMC and Fossil vs the best baseline. "Fossil" is the best order present.
// A column is emitted only when both of its models were evaluated.
inline std::vector<Improvement> table_improvements(std::span<const ModelRow> rows) {
  std::vector<Improvement> out;
  const ModelRow* fpmc = detail::first_of(rows, ModelKind::kFpmc);
  const ModelRow* bprmf = detail::first_of(rows, ModelKind::kBprMf);
  const ModelRow* fism = detail::first_of(rows, ModelKind::kFism);
  const ModelRow* fossil = detail::best_of(rows, true);
  const ModelRow* baseline = detail::best_of(rows, false);
  if (fpmc && bprmf) out.push_back({"fpmc_vs_bprmf", improvement_pct(fpmc->test.mean, bprmf->test.mean)});
  if (fossil && fism) out.push_back({"fossil_vs_fism", improvement_pct(fossil->test.mean, fism->test.mean)});
  if (fossil && fpmc) out.push_back({"fossil_vs_fpmc", improvement_pct(fossil->test.mean, fpmc->test.mean)});
  if (fossil && baseline) {
    out.push_back({"fossil_vs_best", improvement_pct(fossil->test.mean, baseline->test.mean)});
  }
  return out;
}

struct LabeledModel {
  std::string label;
  AnyModel model;
};

// Test AUC of already trained models.
inline EvalReport evaluate_trained(const SequenceDataset& split,
                                   std::span<const LabeledModel> models,
                                   Provenance provenance, std::size_t threads = 0) {
  EvalReport report;
  report.summary = summarize(split);
  report.provenance = std::move(provenance);
  for (const auto& lm : models) {
    report.rows.push_back({lm.label, kind_of(lm.model), order_of(lm.model),
                           auc(lm.model, split, Target::kTest, threads)});
  }
  report.improvements = table_improvements(report.rows);
  return report;
}

inline std::string label_of(const AnyModel& model) {
  const ModelKind kind = kind_of(model);
  if (kind == ModelKind::kFossil) return ModelSpec{kind, order_of(model)}.label();
  return std::string(kind_name(kind));
}

// Trains every listed model on `split` and reports test AUC.
inline EvalReport evaluate_models(const SequenceDataset& split,
                                  std::span<const ModelSpec> specs,
                                  const TrainConfig& config) {
  std::vector<LabeledModel> trained;
  for (const auto& spec : specs) {
    trained.push_back({spec.label(), train_model(spec.kind, split, config_for(spec, config)).model});
  }
  return evaluate_trained(split, trained,
                          {config.seed, dataset_checksum(split), describe(config)},
                          config.threads);
}

struct StudyCurve {
  std::string name;
  std::vector<double> pct;  // one per threshold
};

struct SparsityStudyReport {
  std::vector<std::size_t> thresholds;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> grid;  // [threshold][model] test AUC
  std::vector<DatasetSummary> summaries;
  std::vector<StudyCurve> curves;
  Provenance provenance;

  double cell(std::size_t threshold, std::string_view label) const {
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      if (thresholds[t] != threshold) continue;
      for (std::size_t m = 0; m < labels.size(); ++m) {
        if (labels[m] == label) return grid[t][m];
      }
    }
    return std::numeric_limits<double>::quiet_NaN();
  }
};

// Improvement curves across thresholds: each Fossil order against FISM,
// FMC and FPMC, plus FPMC against BPR-MF and FMC.
inline std::vector<StudyCurve> study_curves(const SparsityStudyReport& r) {
  std::vector<StudyCurve> curves;
  auto index = [&](std::string_view label) -> std::optional<std::size_t> {
    for (std::size_t m = 0; m < r.labels.size(); ++m) {
      if (r.labels[m] == label) return m;
    }
    return std::nullopt;
  };
  auto add = [&](const std::string& a, const std::string& b) {
    const auto ia = index(a), ib = index(b);
    if (!ia || !ib) return;
    StudyCurve c{a + "_vs_" + b, {}};
    for (const auto& row : r.grid) c.pct.push_back(improvement_pct(row[*ia], row[*ib]));
    curves.push_back(std::move(c));
  };
  add("fpmc", "bprmf");
  add("fpmc", "fmc");
  for (const auto& label : r.labels) {
    if (label.rfind("fossil-L", 0) != 0) continue;
    add(label, "fism");
    add(label, "fmc");
    add(label, "fpmc");
  }
  return curves;
}

// For each threshold: truncate the unsplit base dataset, split, train and
// test every model. Users are not re-filtered after truncation.
inline SparsityStudyReport sparsity_study(const SequenceDataset& base,
                                          std::span<const std::size_t> thresholds,
                                          std::span<const ModelSpec> specs,
                                          const TrainConfig& config) {
  if (thresholds.empty()) throw std::invalid_argument("no thresholds given");
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    if (thresholds[t] < 3) throw std::invalid_argument("thresholds must be >= 3");
    if (t > 0 && thresholds[t] >= thresholds[t - 1]) {
      throw std::invalid_argument("thresholds must be strictly descending");
    }
  }
  const SequenceDataset unsplit = strip_roles(base);

  SparsityStudyReport report;
  report.thresholds.assign(thresholds.begin(), thresholds.end());
  for (const auto& spec : specs) report.labels.push_back(spec.label());
  report.provenance = {config.seed, dataset_checksum(unsplit), describe(config)};
  for (std::size_t n : thresholds) {
    const SequenceDataset split = split_leave_last(truncate_recent(unsplit, n));
    report.summaries.push_back(summarize(split));
    const EvalReport eval = evaluate_models(split, specs, config);
    std::vector<double> row;
    for (const auto& r : eval.rows) row.push_back(r.test.mean);
    report.grid.push_back(std::move(row));
  }
  report.curves = study_curves(report);
  return report;
}

struct UserWeightRow {
  UserIndex user = 0;
  std::string user_id;
  std::size_t train_actions = 0;
  double weight = 0.0;  // eta^u_1
};

// One row per user, ascending by train action count (ties by user index).
inline std::vector<UserWeightRow> export_user_weights(const FossilModel& model,
                                                      const SequenceDataset& ds) {
  const auto& eta_user = model.params().eta_user;
  if (eta_user.rows() != ds.num_users()) {
    throw DataError("model and dataset disagree on the number of users");
  }
  std::vector<UserWeightRow> rows;
  for (std::size_t u = 0; u < ds.num_users(); ++u) {
    const auto user = static_cast<UserIndex>(u);
    rows.push_back({user, ds.user_ids[u], ds.train_length(user), eta_user(u, 0)});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.train_actions < b.train_actions;
  });
  return rows;
}

namespace detail {

// Ranks with ties given their average rank.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

// Spearman rank correlation; NaN when either side is constant.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = detail::average_ranks(x);
  const auto ry = detail::average_ranks(y);
  const double n = double(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

inline double weight_count_correlation(std::span<const UserWeightRow> rows) {
  std::vector<double> counts, weights;
  for (const auto& r : rows) {
    counts.push_back(double(r.train_actions));
    weights.push_back(r.weight);
  }
  return spearman(counts, weights);
}

// Top-k items the user has not consumed, for the step after their last
// observed action. Ties by item index.
template <Scorer S>
std::vector<ScoredItem> recommend_next(const S& scorer, const SequenceDataset& ds,
                                       UserIndex u, std::size_t k) {
  const UserContext ctx = context_after_all(ds, u, scorer.order());
  std::vector<double> scores(ds.num_items());
  scorer.score_all(ctx, scores);
  std::vector<ScoredItem> ranked;
  const auto& consumed = ds.itemsets[u];
  for (std::size_t j = 0; j < ds.num_items(); ++j) {
    if (std::binary_search(consumed.begin(), consumed.end(), ItemIndex(j))) continue;
    ranked.push_back({static_cast<ItemIndex>(j), scores[j]});
  }
  k = std::min(k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k),
                    ranked.end(), [](const ScoredItem& a, const ScoredItem& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.item < b.item;
                    });
  ranked.resize(k);
  return ranked;
}

inline std::vector<ScoredItem> recommend_next(const AnyModel& model,
                                              const SequenceDataset& ds, UserIndex u,
                                              std::size_t k) {
  return std::visit([&](const auto& m) { return recommend_next(m, ds, u, k); }, model);
}

struct LambdaSearch {
  double best_lambda = 0.0;
  std::vector<std::pair<double, double>> tried;  // (lambda, validation AUC)
};

inline constexpr std::array<double, 3> kLambdaGrid = {1.0, 0.1, 0.01};

// Picks lambda by validation AUC. Earlier grid entries win ties.
inline LambdaSearch grid_search_lambda(ModelKind kind, const SequenceDataset& split,
                                       const TrainConfig& config,
                                       std::span<const double> grid = kLambdaGrid) {
  LambdaSearch out;
  double best = -std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    TrainConfig c = config;
    c.lambda = lambda;
    const double value = train_model(kind, split, c).validation_auc;
    out.tried.emplace_back(lambda, value);
    if (value > best) {
      best = value;
      out.best_lambda = lambda;
    }
  }
  return out;
}

// ---- report output ----

namespace detail {

inline std::string fmt(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline void provenance_columns(std::ostream& out, const Provenance& p) {
  out << '\t' << p.seed << '\t' << hex64(p.dataset_checksum) << '\t' << p.config << '\n';
}

}  // namespace detail

inline void write_eval_tsv(std::ostream& out, const EvalReport& r) {
  out << "metric\tname\tvalue\tusers\texcluded\tseed\tdataset_checksum\tconfig\n";
  for (const auto& row : r.rows) {
    out << "auc\t" << row.label << '\t' << detail::fmt(row.test.mean, 6) << '\t'
        << row.test.per_user.size() << '\t' << row.test.excluded;
    detail::provenance_columns(out, r.provenance);
  }
  for (const auto& imp : r.improvements) {
    out << "improvement_pct\t" << imp.name << '\t' << detail::fmt(imp.pct, 4) << "\t\t";
    detail::provenance_columns(out, r.provenance);
  }
}

inline nlohmann::ordered_json to_json(const DatasetSummary& s) {
  return {{"users", s.users},
          {"items", s.items},
          {"actions", s.actions},
          {"actions_per_user", s.actions_per_user},
          {"actions_per_item", s.actions_per_item}};
}

inline nlohmann::ordered_json to_json(const Provenance& p) {
  return {{"seed", p.seed}, {"dataset_checksum", hex64(p.dataset_checksum)}, {"config", p.config}};
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json models = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json per_user = nlohmann::ordered_json::array();
    for (const auto& u : row.test.per_user) per_user.push_back(u.value());
    models.push_back({{"label", row.label},
                      {"kind", kind_name(row.kind)},
                      {"order", row.order},
                      {"auc", row.test.mean},
                      {"excluded_users", row.test.excluded},
                      {"per_user_auc", per_user}});
  }
  nlohmann::ordered_json improvements = nlohmann::ordered_json::object();
  for (const auto& imp : r.improvements) improvements[imp.name] = imp.pct;
  return {{"provenance", to_json(r.provenance)},
          {"dataset", to_json(r.summary)},
          {"models", models},
          {"improvement_pct", improvements}};
}

inline void write_study_tsv(std::ostream& out, const SparsityStudyReport& r) {
  out << "threshold\tusers\titems\tactions\tactions_per_user\tactions_per_item\t"
         "metric\tname\tvalue\tseed\tdataset_checksum\tconfig\n";
  for (std::size_t t = 0; t < r.thresholds.size(); ++t) {
    const auto& s = r.summaries[t];
    auto prefix = [&] {
      out << r.thresholds[t] << '\t' << s.users << '\t' << s.items << '\t' << s.actions
          << '\t' << detail::fmt(s.actions_per_user, 2) << '\t'
          << detail::fmt(s.actions_per_item, 2) << '\t';
    };
    for (std::size_t m = 0; m < r.labels.size(); ++m) {
      prefix();
      out << "auc\t" << r.labels[m] << '\t' << detail::fmt(r.grid[t][m], 6);
      detail::provenance_columns(out, r.provenance);
    }
    for (const auto& c : r.curves) {
      prefix();
      out << "improvement_pct\t" << c.name << '\t' << detail::fmt(c.pct[t], 4);
      detail::provenance_columns(out, r.provenance);
    }
  }
}

inline nlohmann::ordered_json to_json(const SparsityStudyReport& r) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < r.thresholds.size(); ++t) {
    nlohmann::ordered_json aucs = nlohmann::ordered_json::object();
    for (std::size_t m = 0; m < r.labels.size(); ++m) aucs[r.labels[m]] = r.grid[t][m];
    rows.push_back({{"threshold", r.thresholds[t]},
                    {"dataset", to_json(r.summaries[t])},
                    {"auc", aucs}});
  }
  nlohmann::ordered_json curves = nlohmann::ordered_json::object();
  for (const auto& c : r.curves) curves[c.name] = c.pct;
  return {{"provenance", to_json(r.provenance)},
          {"models", r.labels},
          {"thresholds", rows},
          {"improvement_pct", curves}};
}

inline void write_weights_tsv(std::ostream& out, std::span<const UserWeightRow> rows) {
  out << "user\ttrain_actions\teta_u1\n";
  for (const auto& r : rows) {
    out << r.user_id << '\t' << r.train_actions << '\t' << detail::fmt(r.weight, 9) << '\n';
  }
}

}  // namespace fossil
