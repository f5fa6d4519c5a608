// Command-line front end: prepare, train, eval, study, query, weights,
// recommend. Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fossil/fossil.hpp"

namespace {

using namespace fossil;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Writes to a sibling temporary file and renames it into place on commit();
// an uncommitted file is removed. An empty path means stdout.
class OutputFile {
 public:
  explicit OutputFile(std::string path, bool binary = false) : path_(std::move(path)) {
    if (path_.empty() || path_ == "-") return;
    tmp_ = path_ + ".partial";
    file_ = std::make_unique<std::ofstream>(
        tmp_, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!*file_) throw DataError("cannot open '" + path_ + "' for writing");
  }
  OutputFile(const OutputFile&) = delete;
  OutputFile& operator=(const OutputFile&) = delete;
  ~OutputFile() {
    if (file_ && !committed_) {
      file_.reset();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

  std::ostream& stream() { return file_ ? *file_ : std::cout; }

  void commit() {
    if (!file_) {
      std::cout.flush();
      return;
    }
    file_->close();
    if (!*file_) throw DataError("failed writing '" + path_ + "'");
    std::filesystem::rename(tmp_, path_);
    committed_ = true;
  }

 private:
  std::string path_;
  std::string tmp_;
  std::unique_ptr<std::ofstream> file_;
  bool committed_ = false;
};

std::ifstream open_input(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

SequenceDataset load_dataset_file(const std::string& path) {
  auto in = open_input(path);
  return read_dataset(in);
}

ModelFile load_model_file(const std::string& path) {
  auto in = open_input(path, true);
  return load_model(in);
}

void require_split(const SequenceDataset& ds) {
  if (!ds.is_split()) throw DataError("dataset has no train/validation/test marks");
}

void require_matching(const ModelFile& model, const SequenceDataset& ds) {
  if (model.user_ids != ds.user_ids || model.item_ids != ds.item_ids) {
    throw DataError("model was trained on a different dataset");
  }
}

std::string unescape_delimiter(const std::string& text) {
  if (text == "\\t" || text == "tab") return "\t";
  if (text == "\\s" || text == "space") return " ";
  return text;
}

std::vector<std::size_t> parse_thresholds(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    std::size_t value = 0;
    if (!detail::parse_number(std::string_view(text).substr(start, end - start), value)) {
      throw UsageError("bad threshold list '" + text + "'");
    }
    out.push_back(value);
    start = end + 1;
  }
  return out;
}

struct HyperFlags {
  TrainConfig config;
  std::vector<std::string> lambda_for;

  void add_to(CLI::App* cmd, bool with_order) {
    cmd->add_option("--k", config.factors, "latent dimensions")->capture_default_str();
    if (with_order) cmd->add_option("--l", config.order, "Markov order")->capture_default_str();
    cmd->add_option("--alpha", config.alpha, "long-term normalisation exponent")->capture_default_str();
    cmd->add_option("--lr", config.epsilon, "learning rate")->capture_default_str();
    cmd->add_option("--lambda", config.lambda, "regularisation")->capture_default_str();
    cmd->add_option("--lambda-for", lambda_for, "per-block override, NAME=VALUE");
    cmd->add_option("--seed", config.seed, "random seed")->capture_default_str();
    cmd->add_option("--max-epochs", config.max_epochs)->capture_default_str();
    cmd->add_option("--patience", config.patience, "validation checks without improvement")
        ->capture_default_str();
    cmd->add_option("--eval-every", config.eval_every, "epochs between validation checks")
        ->capture_default_str();
    cmd->add_option("--threads", config.threads, "evaluation threads, 0 = all cores")
        ->capture_default_str();
    cmd->add_flag("--tie-fpmc", config.tie_fpmc, "share FPMC's M and N");
  }

  TrainConfig resolve() const {
    TrainConfig c = config;
    for (const auto& entry : lambda_for) {
      const auto eq = entry.find('=');
      double value = 0.0;
      if (eq == std::string::npos || eq == 0 ||
          !detail::parse_number(std::string_view(entry).substr(eq + 1), value)) {
        throw UsageError("--lambda-for expects NAME=VALUE, got '" + entry + "'");
      }
      c.lambda_overrides[entry.substr(0, eq)] = value;
    }
    c.validate();
    return c;
  }
};

void print_ranked(std::ostream& out, const std::vector<ScoredItem>& ranked,
                  const std::vector<std::string>& item_ids) {
  out << "rank\titem\tscore\n";
  char buf[64];
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    std::snprintf(buf, sizeof buf, "%.9g", ranked[r].score);
    out << r + 1 << '\t' << item_ids[ranked[r].item] << '\t' << buf << '\n';
  }
}

std::size_t find_index(const std::vector<std::string>& ids, const std::string& id,
                       const char* what) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return i;
  }
  throw DataError(std::string("unknown ") + what + " '" + id + "'");
}

int run(int argc, char** argv) {
  CLI::App app{"Sequential recommendation with similarity models and Markov chains"};
  app.require_subcommand(1, 1);
  app.allow_extras(false);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "raw interaction log -> dataset file");
  std::string raw_path, dataset_out, delimiter = "\\t", columns = "user,item,timestamp";
  std::size_t min_count = 5;
  std::optional<std::size_t> truncate;
  bool skip_header = false;
  prepare->add_option("--input", raw_path, "delimited log")->required();
  prepare->add_option("--output", dataset_out, "dataset file")->required();
  prepare->add_option("--delimiter", delimiter, "field delimiter (\\t, ::, ...)")->capture_default_str();
  prepare->add_option("--columns", columns, "column order, e.g. user,item,rating,timestamp")
      ->capture_default_str();
  prepare->add_flag("--skip-header", skip_header, "ignore the first line");
  prepare->add_option("--min-count", min_count, "minimum actions per user and item")
      ->capture_default_str();
  prepare->add_option("--truncate", truncate, "keep the N most recent actions per user");

  // train
  auto* train_cmd = app.add_subcommand("train", "train one model");
  HyperFlags train_flags;
  std::string train_dataset, model_kind, model_out, trace_out;
  bool grid_search = false;
  train_cmd->add_option("--dataset", train_dataset)->required();
  train_cmd->add_option("--model", model_kind, "pop|bprmf|fism|fmc|fpmc|fossil")->required();
  train_cmd->add_option("--output", model_out, "model file")->required();
  train_cmd->add_option("--trace", trace_out, "training trace (TSV)");
  train_cmd->add_flag("--grid-search", grid_search, "pick lambda from {1, 0.1, 0.01}");
  train_flags.add_to(train_cmd, true);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "test AUC of trained models");
  std::string eval_dataset, eval_out, eval_json;
  std::vector<std::string> eval_models;
  std::size_t eval_threads = 0;
  eval_cmd->add_option("--dataset", eval_dataset)->required();
  eval_cmd->add_option("--model", eval_models, "model file(s)")->required();
  eval_cmd->add_option("--output", eval_out, "report TSV (default stdout)");
  eval_cmd->add_option("--json", eval_json, "report as JSON");
  eval_cmd->add_option("--threads", eval_threads)->capture_default_str();

  // study
  auto* study_cmd = app.add_subcommand("study", "sparsity study over truncation thresholds");
  HyperFlags study_flags;
  std::string study_dataset, thresholds = "50,30,20,10,5",
                             study_models = "pop,bprmf,fism,fmc,fpmc,fossil:1,fossil:2,fossil:3",
                             study_out, study_json;
  study_cmd->add_option("--dataset", study_dataset)->required();
  study_cmd->add_option("--thresholds", thresholds)->capture_default_str();
  study_cmd->add_option("--models", study_models)->capture_default_str();
  study_cmd->add_option("--output", study_out, "report TSV (default stdout)");
  study_cmd->add_option("--json", study_json, "report as JSON");
  study_flags.add_to(study_cmd, false);

  // query
  auto* query_cmd = app.add_subcommand("query", "items most likely to follow an item");
  std::string query_model, query_item, query_out;
  std::size_t query_top = 10;
  query_cmd->add_option("--model", query_model)->required();
  query_cmd->add_option("--item", query_item)->required();
  query_cmd->add_option("--top", query_top)->capture_default_str();
  query_cmd->add_option("--output", query_out);

  // weights
  auto* weights_cmd = app.add_subcommand("weights", "per-user first-order weights");
  std::string weights_model, weights_dataset, weights_out;
  weights_cmd->add_option("--model", weights_model)->required();
  weights_cmd->add_option("--dataset", weights_dataset)->required();
  weights_cmd->add_option("--output", weights_out);

  // recommend
  auto* rec_cmd = app.add_subcommand("recommend", "top-k next items for a user");
  std::string rec_model, rec_dataset, rec_user, rec_out;
  std::size_t rec_top = 10;
  rec_cmd->add_option("--model", rec_model)->required();
  rec_cmd->add_option("--dataset", rec_dataset)->required();
  rec_cmd->add_option("--user", rec_user)->required();
  rec_cmd->add_option("--top", rec_top)->capture_default_str();
  rec_cmd->add_option("--output", rec_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "fossil: " << e.what() << '\n';
    return kExitUsage;
  }

  if (prepare->parsed()) {
    auto in = open_input(raw_path);
    EventFormat format = EventFormat::from_columns(columns, unescape_delimiter(delimiter));
    format.skip_header = skip_header;
    const EventLog log = densify(load_events(in, format, raw_path), min_count);
    SequenceDataset ds = build_sequences(log);
    if (truncate) ds = truncate_recent(ds, *truncate);
    ds = split_leave_last(std::move(ds));
    OutputFile out(dataset_out);
    write_dataset(out.stream(), ds);
    out.commit();
    const auto s = summarize(ds);
    std::printf("users\titems\tactions\tactions_per_user\tactions_per_item\n");
    std::printf("%zu\t%zu\t%zu\t%.2f\t%.2f\n", s.users, s.items, s.actions,
                s.actions_per_user, s.actions_per_item);
    return 0;
  }

  if (train_cmd->parsed()) {
    const auto kind = parse_kind(model_kind);
    if (!kind) throw UsageError("unknown model kind '" + model_kind + "'");
    TrainConfig config = train_flags.resolve();
    const SequenceDataset ds = load_dataset_file(train_dataset);
    require_split(ds);
    if (grid_search && *kind != ModelKind::kPop) {
      const auto search = grid_search_lambda(*kind, ds, config);
      for (const auto& [lambda, value] : search.tried) {
        std::fprintf(stderr, "lambda=%g validation_auc=%.6f\n", lambda, value);
      }
      config.lambda = search.best_lambda;
    }
    const TrainedModel trained = train_model(*kind, ds, config);
    std::optional<OutputFile> trace;
    if (!trace_out.empty()) {
      trace.emplace(trace_out);
      write_trace(trace->stream(), trained.trace, config);
    }
    OutputFile out(model_out, true);
    save_model(out.stream(), {trained.model, ds.user_ids, ds.item_ids});
    out.commit();
    if (trace) trace->commit();
    std::fprintf(stderr, "best validation AUC %.6f at epoch %zu\n", trained.validation_auc,
                 trained.best_epoch);
    return 0;
  }

  if (eval_cmd->parsed()) {
    const SequenceDataset ds = load_dataset_file(eval_dataset);
    require_split(ds);
    std::vector<LabeledModel> models;
    for (const auto& path : eval_models) {
      ModelFile file = load_model_file(path);
      require_matching(file, ds);
      models.push_back({label_of(file.model), std::move(file.model)});
    }
    const EvalReport report =
        evaluate_trained(ds, models, {0, dataset_checksum(ds), "loaded models"}, eval_threads);
    std::optional<OutputFile> json;
    if (!eval_json.empty()) {
      json.emplace(eval_json);
      json->stream() << to_json(report).dump(2) << '\n';
    }
    OutputFile out(eval_out);
    write_eval_tsv(out.stream(), report);
    out.commit();
    if (json) json->commit();
    return 0;
  }

  if (study_cmd->parsed()) {
    const TrainConfig config = study_flags.resolve();
    const auto specs = parse_model_list(study_models);
    const auto ths = parse_thresholds(thresholds);
    const SequenceDataset ds = load_dataset_file(study_dataset);
    const SparsityStudyReport report = sparsity_study(ds, ths, specs, config);
    std::optional<OutputFile> json;
    if (!study_json.empty()) {
      json.emplace(study_json);
      json->stream() << to_json(report).dump(2) << '\n';
    }
    OutputFile out(study_out);
    write_study_tsv(out.stream(), report);
    out.commit();
    if (json) json->commit();
    return 0;
  }

  if (query_cmd->parsed()) {
    const ModelFile file = load_model_file(query_model);
    const auto* model = std::get_if<FossilModel>(&file.model);
    if (!model) throw DataError("query needs a fossil or fism model");
    const auto item = find_index(file.item_ids, query_item, "item");
    OutputFile out(query_out);
    print_ranked(out.stream(),
                 rank_transitions(model->params(), static_cast<ItemIndex>(item), query_top),
                 file.item_ids);
    out.commit();
    return 0;
  }

  if (weights_cmd->parsed()) {
    const ModelFile file = load_model_file(weights_model);
    const auto* model = std::get_if<FossilModel>(&file.model);
    if (!model || model->frozen_weights()) throw DataError("weights needs a fossil model");
    const SequenceDataset ds = load_dataset_file(weights_dataset);
    require_matching(file, ds);
    OutputFile out(weights_out);
    write_weights_tsv(out.stream(), export_user_weights(*model, ds));
    out.commit();
    return 0;
  }

  if (rec_cmd->parsed()) {
    const ModelFile file = load_model_file(rec_model);
    const SequenceDataset ds = load_dataset_file(rec_dataset);
    require_matching(file, ds);
    const auto user = find_index(ds.user_ids, rec_user, "user");
    OutputFile out(rec_out);
    print_ranked(out.stream(),
                 recommend_next(file.model, ds, static_cast<UserIndex>(user), rec_top),
                 file.item_ids);
    out.commit();
    return 0;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "fossil: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "fossil: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fossil::NumericError& e) {
    std::cerr << "fossil: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "fossil: " << e.what() << '\n';
    return kExitData;
  }
}
