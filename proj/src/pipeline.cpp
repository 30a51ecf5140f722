#include "flick/pipeline.hpp"

#include <fstream>
#include <unordered_set>

#include "flick/errors.hpp"
#include "flick/log.hpp"
#include "flick/random.hpp"

namespace flick {

namespace {

template <typename F>
auto in_stage(const char* stage, F&& body) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
}

TrainConfig with_shuffle(TrainConfig cfg, std::uint64_t stage_seed) {
  cfg.shuffle_seed = derive_seed(stage_seed, 1);
  return cfg;
}

struct SupervisedRows {
  Matrix inputs;
  std::vector<int> targets;
};

SupervisedRows few_label_rows(const LabeledData& labeled, const FewLabelSample& few) {
  if (few.ids.empty()) throw ArgumentError("few-label sample is empty");
  std::vector<std::size_t> rows;
  SupervisedRows out;
  rows.reserve(few.ids.size());
  out.targets.reserve(few.ids.size());
  std::unordered_set<std::string> seen;
  for (const auto& id : few.ids) {
    if (!seen.insert(id).second) throw DataError("few-label sample repeats id '" + id + "'");
    const auto row = labeled.embeddings.find(id);
    const auto label = labeled.labels.label_of(id);
    if (!row || !label) {
      throw DataError("few-label id '" + id + "' is not in the labeled set");
    }
    rows.push_back(*row);
    out.targets.push_back(*label);
  }
  out.inputs = labeled.embeddings.rows_matrix(rows);
  return out;
}

SupervisedRows heldout_rows(const LabeledData& heldout, const LabelTable& reference,
                            const FewLabelSample& few) {
  std::unordered_set<std::string> few_ids(few.ids.begin(), few.ids.end());
  const auto& names = reference.class_names();
  std::vector<int> remap(heldout.labels.class_count(), -1);
  for (std::size_t c = 0; c < heldout.labels.class_count(); ++c) {
    const auto& name = heldout.labels.class_names()[c];
    auto pos = std::lower_bound(names.begin(), names.end(), name);
    if (pos == names.end() || *pos != name) {
      throw DataError("held-out class '" + name + "' is not a labeled class");
    }
    remap[c] = static_cast<int>(pos - names.begin());
  }

  std::vector<std::size_t> rows;
  SupervisedRows out;
  for (const auto& entry : heldout.labels.entries()) {
    if (few_ids.contains(entry.id)) {
      throw DataError("held-out id '" + entry.id + "' is also in the few-label sample");
    }
    const auto row = heldout.embeddings.find(entry.id);
    if (!row) throw DataError("held-out id '" + entry.id + "' has no embedding");
    rows.push_back(*row);
    out.targets.push_back(remap[static_cast<std::size_t>(entry.label)]);
  }
  if (rows.empty()) throw DataError("held-out set has no labeled records");
  out.inputs = heldout.embeddings.rows_matrix(rows);
  return out;
}

EvaluationReport evaluate(const ClassifierModel& model, const SupervisedRows& heldout,
                          std::size_t classes) {
  const auto predicted = predict(model, heldout.inputs);
  return compute_metrics(confusion_matrix(heldout.targets, predicted, classes));
}

void stage1(const PipelineConfig& config, const EmbeddingSet& unlabeled, PipelineResult& result) {
  in_stage("stage1", [&] {
    KMeansOptions options;
    options.k = config.k_clusters;
    options.max_iter = config.kmeans_max_iter;
    options.tol = config.kmeans_tol;
    options.seed = config.seeds.cluster;
    options.init = config.kmeans_init;
    result.cluster_model = kmeans_fit(unlabeled, options);
    result.pseudo_labels = pseudo_label(unlabeled, *result.cluster_model);
    log::info("stage1: k-means converged after " +
              std::to_string(result.cluster_model->iterations_run) + " iterations, inertia " +
              std::to_string(result.cluster_model->inertia));
  });
}

void train_plft(const PipelineConfig& config, const EmbeddingSet& unlabeled,
                const std::vector<std::size_t>& positions, const std::vector<int>& labels,
                std::size_t classes, PipelineResult& result) {
  in_stage("plft", [&] {
    ClassifierModel fresh =
        init_classifier(unlabeled.dim(), config.hidden_size, classes, config.seeds.plft);
    fresh.profile_name = std::string(to_string(config.profile));
    TrainResult trained = train(fresh, unlabeled.rows_matrix(positions), labels,
                                with_shuffle(config.plft_train, config.seeds.plft));
    result.plft_records = positions.size();
    result.plft_model = std::move(trained.model);
    result.plft_history = std::move(trained.history);
    log::info("plft: " + std::to_string(classes) + " pseudo-classes, " +
              std::to_string(positions.size()) + " records, loss " +
              std::to_string(result.plft_history->final_loss));
  });
}

void finish(const PipelineConfig& config, const LabeledData& labeled, const FewLabelSample& few,
            const LabeledData& heldout, const ClassifierModel& start,
            PipelineResult& result) {
  const SupervisedRows train_rows = in_stage("clsft", [&] { return few_label_rows(labeled, few); });
  const SupervisedRows eval_rows =
      in_stage("eval", [&] { return heldout_rows(heldout, labeled.labels, few); });
  in_stage("clsft", [&] {
    TrainResult trained = train(start, train_rows.inputs, train_rows.targets,
                                with_shuffle(config.clsft_train, config.seeds.clsft));
    result.final_model = std::move(trained.model);
    result.final_history = std::move(trained.history);
  });
  in_stage("eval", [&] {
    result.evaluation = evaluate(result.final_model, eval_rows, labeled.labels.class_count());
    log::info(std::string(to_string(result.mode)) + ": held-out accuracy " +
              std::to_string(result.evaluation.accuracy) + ", macro-F1 " +
              std::to_string(result.evaluation.macro_f1));
  });
}

ClassifierModel transfer_from_plft(const PipelineConfig& config, std::size_t classes,
                                   PipelineResult& result) {
  return in_stage("clsft", [&] {
    ClassifierModel start = transfer_init(*result.plft_model, classes, config.seeds.clsft);
    result.clsft_initial_hidden = HiddenSnapshot{start.w1, start.b1};
    return start;
  });
}

PipelineResult begin(RunMode mode, const PipelineConfig& config, const LabeledData& labeled) {
  in_stage("config", [&] { config.validate(); });
  PipelineResult result;
  result.mode = mode;
  result.config = config;
  result.class_names = labeled.labels.class_names();
  in_stage("clsft", [&] {
    if (labeled.labels.class_count() < 2) {
      throw ArgumentError("labeled data has fewer than 2 classes");
    }
  });
  return result;
}

}  // namespace

std::string_view to_string(Profile profile) {
  return profile == Profile::replication ? "replication" : "proxy";
}

Profile parse_profile(std::string_view text) {
  if (text == "replication") return Profile::replication;
  if (text == "proxy") return Profile::proxy;
  throw ArgumentError("unknown profile '" + std::string(text) + "'");
}

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::flick: return "flick";
    case RunMode::no_refinement: return "no_refinement";
    case RunMode::baseline: return "baseline";
  }
  return "flick";
}

RunMode parse_run_mode(std::string_view text) {
  if (text == "flick") return RunMode::flick;
  if (text == "no_refinement") return RunMode::no_refinement;
  if (text == "baseline") return RunMode::baseline;
  throw ArgumentError("unknown mode '" + std::string(text) + "'");
}

SeedBundle SeedBundle::from_seed(std::uint64_t seed) {
  return {derive_seed(seed, 0), derive_seed(seed, 1), derive_seed(seed, 2),
          derive_seed(seed, 3), derive_seed(seed, 4), derive_seed(seed, 5)};
}

PipelineConfig::PipelineConfig() { apply_profile(profile); }

void PipelineConfig::apply_profile(Profile p) {
  profile = p;
  const double lr = p == Profile::replication ? 3e-5 : 1e-3;
  const double eps = p == Profile::replication ? 1e-6 : 1e-8;
  for (TrainConfig* cfg : {&probe_train, &plft_train, &clsft_train}) {
    cfg->learning_rate = lr;
    cfg->epsilon = eps;
  }
}

void PipelineConfig::validate() const {
  if (k_clusters == 0) throw ArgumentError("k_clusters must be at least 1");
  if (kmeans_max_iter == 0) throw ArgumentError("kmeans_max_iter must be at least 1");
  if (!(kmeans_tol >= 0.0)) throw ArgumentError("kmeans_tol must be non-negative");
  if (!(split_train_frac > 0.0 && split_train_frac < 1.0)) {
    throw ArgumentError("split_train_frac must lie in (0, 1)");
  }
  if (k_top == 0) throw ArgumentError("k_top must be at least 1");
  if (hidden_size == 0) throw ArgumentError("hidden_size must be at least 1");
  if (few_label.count == 0) throw ArgumentError("few_label.count must be at least 1");
  probe_train.validate();
  plft_train.validate();
  clsft_train.validate();
}

PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig config;
  try {
    if (!j.is_object()) throw FormatError("pipeline config must be a JSON object");
    if (j.contains("profile")) config.apply_profile(parse_profile(j["profile"].get<std::string>()));
    config.k_clusters = j.value("k_clusters", config.k_clusters);
    config.kmeans_max_iter = j.value("kmeans_max_iter", config.kmeans_max_iter);
    config.kmeans_tol = j.value("kmeans_tol", config.kmeans_tol);
    if (j.contains("kmeans_init")) {
      config.kmeans_init = parse_kmeans_init(j["kmeans_init"].get<std::string>());
    }
    config.split_train_frac = j.value("split_train_frac", config.split_train_frac);
    config.k_top = j.value("k_top", config.k_top);
    config.hidden_size = j.value("hidden_size", config.hidden_size);
    if (j.contains("probe_train")) from_json(j["probe_train"], config.probe_train);
    if (j.contains("plft_train")) from_json(j["plft_train"], config.plft_train);
    if (j.contains("clsft_train")) from_json(j["clsft_train"], config.clsft_train);
    if (j.contains("seed")) config.seeds = SeedBundle::from_seed(j["seed"].get<std::uint64_t>());
    if (j.contains("seeds")) {
      const auto& s = j["seeds"];
      config.seeds.cluster = s.value("cluster", config.seeds.cluster);
      config.seeds.split = s.value("split", config.seeds.split);
      config.seeds.probe = s.value("probe", config.seeds.probe);
      config.seeds.plft = s.value("plft", config.seeds.plft);
      config.seeds.clsft = s.value("clsft", config.seeds.clsft);
      config.seeds.subsample = s.value("subsample", config.seeds.subsample);
    }
    if (j.contains("few_label")) {
      const auto& f = j["few_label"];
      if (f.contains("mode")) config.few_label.mode = parse_few_label_mode(f["mode"].get<std::string>());
      config.few_label.count = f.value("count", config.few_label.count);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("pipeline config: ") + e.what());
  }
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void to_json(nlohmann::json& j, const PipelineConfig& config) {
  j = nlohmann::json{
      {"k_clusters", config.k_clusters},
      {"kmeans_max_iter", config.kmeans_max_iter},
      {"kmeans_tol", config.kmeans_tol},
      {"kmeans_init", std::string(to_string(config.kmeans_init))},
      {"split_train_frac", config.split_train_frac},
      {"k_top", config.k_top},
      {"hidden_size", config.hidden_size},
      {"profile", std::string(to_string(config.profile))},
      {"probe_train", config.probe_train},
      {"plft_train", config.plft_train},
      {"clsft_train", config.clsft_train},
      {"seeds",
       {{"cluster", config.seeds.cluster},
        {"split", config.seeds.split},
        {"probe", config.seeds.probe},
        {"plft", config.seeds.plft},
        {"clsft", config.seeds.clsft},
        {"subsample", config.seeds.subsample}}},
      {"few_label",
       {{"mode", std::string(to_string(config.few_label.mode))},
        {"count", config.few_label.count}}}};
}

bool PipelineResult::hidden_layer_transferred() const {
  return plft_model && clsft_initial_hidden && clsft_initial_hidden->w1 == plft_model->w1 &&
         clsft_initial_hidden->b1 == plft_model->b1;
}

FewLabelSample draw_few_labels(const PipelineConfig& config, const LabelTable& labels) {
  return subsample_few_labels(labels, config.few_label.mode, config.few_label.count,
                              config.seeds.subsample);
}

PipelineResult run_flick(const PipelineConfig& config, const EmbeddingSet& unlabeled,
                         const LabeledData& labeled, const FewLabelSample& few,
                         const LabeledData& heldout) {
  PipelineResult result = begin(RunMode::flick, config, labeled);
  stage1(config, unlabeled, result);

  const RefinedSet refined = in_stage("stage2", [&] {
    const auto& pseudo = *result.pseudo_labels;
    const SplitPair split = stratified_split(pseudo, config.split_train_frac, config.seeds.split);
    ProbeResult probe =
        probe_and_report(pseudo, split, unlabeled, with_shuffle(config.probe_train, config.seeds.probe),
                         config.hidden_size, config.seeds.probe);
    result.cluster_report = std::move(probe.report);
    result.selection = select_top_k(*result.cluster_report, config.k_top);
    for (const auto& w : result.selection->warnings) log::info("stage2: " + w);
    log::info("stage2: probe accuracy " +
              std::to_string(result.cluster_report->probe_overall_accuracy) + ", kept " +
              std::to_string(result.selection->clusters.size()) + " clusters");
    return build_refined(pseudo, *result.selection);
  });

  train_plft(config, unlabeled, refined.positions, refined.labels,
             refined.selected_clusters.size(), result);
  const ClassifierModel start = transfer_from_plft(config, labeled.labels.class_count(), result);
  finish(config, labeled, few, heldout, start, result);
  return result;
}

PipelineResult run_no_refinement(const PipelineConfig& config, const EmbeddingSet& unlabeled,
                                 const LabeledData& labeled, const FewLabelSample& few,
                                 const LabeledData& heldout) {
  PipelineResult result = begin(RunMode::no_refinement, config, labeled);
  stage1(config, unlabeled, result);

  const auto& pseudo = *result.pseudo_labels;
  std::vector<std::size_t> positions(pseudo.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  train_plft(config, unlabeled, positions, pseudo.labels, pseudo.k, result);
  const ClassifierModel start = transfer_from_plft(config, labeled.labels.class_count(), result);
  finish(config, labeled, few, heldout, start, result);
  return result;
}

PipelineResult run_baseline(const PipelineConfig& config, const LabeledData& labeled,
                            const FewLabelSample& few, const LabeledData& heldout) {
  PipelineResult result = begin(RunMode::baseline, config, labeled);
  const ClassifierModel start = in_stage("clsft", [&] {
    ClassifierModel fresh = init_classifier(labeled.embeddings.dim(), config.hidden_size,
                                            labeled.labels.class_count(), config.seeds.clsft);
    fresh.profile_name = std::string(to_string(config.profile));
    return fresh;
  });
  finish(config, labeled, few, heldout, start, result);
  return result;
}

PipelineResult run_mode(RunMode mode, const PipelineConfig& config,
                        const EmbeddingSet& unlabeled, const LabeledData& labeled,
                        const FewLabelSample& few, const LabeledData& heldout) {
  switch (mode) {
    case RunMode::flick: return run_flick(config, unlabeled, labeled, few, heldout);
    case RunMode::no_refinement:
      return run_no_refinement(config, unlabeled, labeled, few, heldout);
    case RunMode::baseline: return run_baseline(config, labeled, few, heldout);
  }
  throw ArgumentError("unknown run mode");
}

namespace {

template <typename T>
nlohmann::json optional_json(const std::optional<T>& value) {
  return value ? nlohmann::json(*value) : nlohmann::json();
}

template <typename T>
void read_optional(const nlohmann::json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j[key].is_null()) {
    out = j[key].get<T>();
  } else {
    out.reset();
  }
}

}  // namespace

void to_json(nlohmann::json& j, const PipelineResult& result) {
  nlohmann::json pseudo;
  if (result.pseudo_labels) {
    pseudo = {{"k", result.pseudo_labels->k},
              {"ids", result.pseudo_labels->ids},
              {"labels", result.pseudo_labels->labels}};
  }
  nlohmann::json hidden;
  if (result.clsft_initial_hidden) {
    hidden = {{"W1", result.clsft_initial_hidden->w1.values},
              {"b1", result.clsft_initial_hidden->b1}};
  }
  j = nlohmann::json{{"mode", std::string(to_string(result.mode))},
                     {"config", result.config},
                     {"class_names", result.class_names},
                     {"cluster_model", optional_json(result.cluster_model)},
                     {"pseudo_labels", pseudo},
                     {"cluster_report", optional_json(result.cluster_report)},
                     {"selection", optional_json(result.selection)},
                     {"plft_records", optional_json(result.plft_records)},
                     {"plft_model", optional_json(result.plft_model)},
                     {"plft_history", optional_json(result.plft_history)},
                     {"clsft_initial_hidden", hidden},
                     {"hidden_layer_transferred", result.hidden_layer_transferred()},
                     {"final_model", result.final_model},
                     {"final_history", result.final_history},
                     {"evaluation", result.evaluation}};
}

void from_json(const nlohmann::json& j, PipelineResult& result) {
  try {
    result.mode = parse_run_mode(j.at("mode").get<std::string>());
    result.config = config_from_json(j.at("config"));
    result.class_names = j.at("class_names").get<std::vector<std::string>>();
    read_optional(j, "cluster_model", result.cluster_model);
    if (const auto& p = j.at("pseudo_labels"); !p.is_null()) {
      result.pseudo_labels = PseudoLabeledSet{p.at("ids").get<std::vector<std::string>>(),
                                              p.at("labels").get<std::vector<int>>(),
                                              p.at("k").get<std::size_t>()};
    } else {
      result.pseudo_labels.reset();
    }
    read_optional(j, "cluster_report", result.cluster_report);
    read_optional(j, "selection", result.selection);
    read_optional(j, "plft_records", result.plft_records);
    read_optional(j, "plft_model", result.plft_model);
    read_optional(j, "plft_history", result.plft_history);
    if (const auto& h = j.at("clsft_initial_hidden"); !h.is_null()) {
      HiddenSnapshot snapshot;
      snapshot.b1 = h.at("b1").get<std::vector<double>>();
      auto values = h.at("W1").get<std::vector<double>>();
      if (snapshot.b1.empty() || values.size() % snapshot.b1.size() != 0) {
        throw FormatError("pipeline result JSON: hidden snapshot shape is inconsistent");
      }
      snapshot.w1 = Matrix(values.size() / snapshot.b1.size(), snapshot.b1.size());
      snapshot.w1.values = std::move(values);
      result.clsft_initial_hidden = std::move(snapshot);
    } else {
      result.clsft_initial_hidden.reset();
    }
    result.final_model = j.at("final_model").get<ClassifierModel>();
    result.final_history = j.at("final_history").get<TrainHistory>();
    result.evaluation = j.at("evaluation").get<EvaluationReport>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("pipeline result JSON: ") + e.what());
  }
}

void write_report_dir(const PipelineResult& result, const std::filesystem::path& dir,
                      std::string_view generated_at) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create report directory " + dir.string() + ": " + ec.message());

  auto write = [&](const char* name, const nlohmann::json& body) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << body.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
  };

  write("config.json", result.config);
  if (result.cluster_model) write("cluster_model.json", *result.cluster_model);
  if (result.cluster_report) {
    nlohmann::json report = *result.cluster_report;
    if (result.selection) {
      report["selection"] = result.selection->clusters;
      report["warnings"] = result.selection->warnings;
      report["clamped"] = result.selection->clamped;
    }
    write("cluster_report.json", report);
  }
  if (result.plft_model) write("plft_model.json", *result.plft_model);
  write("final_model.json", result.final_model);

  nlohmann::json metrics = result.evaluation;
  metrics["class_names"] = result.class_names;
  metrics["mode"] = std::string(to_string(result.mode));
  write("metrics.json", metrics);

  nlohmann::json summary = result;
  summary["generated_at"] = std::string(generated_at);
  write("result.json", summary);
}

}  // namespace flick
