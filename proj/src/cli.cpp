#include "flick/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "flick/errors.hpp"
#include "flick/log.hpp"
#include "flick/pipeline.hpp"
#include "flick/random.hpp"
#include "flick/synth.hpp"

namespace flick::cli {

namespace {

namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::argument: return bad_arguments;
    case ErrorKind::numeric: return numeric_error;
    case ErrorKind::format:
    case ErrorKind::data:
    case ErrorKind::io:
    case ErrorKind::selection: return data_error;
  }
  return data_error;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm parts{};
  gmtime_r(&now, &parts);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &parts);
  return buf;
}

void write_json(const fs::path& path, const nlohmann::json& body) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << body.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::string padded(const char* prefix, std::size_t value, std::size_t count) {
  int width = 1;
  for (std::size_t n = count > 0 ? count - 1 : 0; n >= 10; n /= 10) ++width;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, value);
  return buf;
}

/// Flags shared by every subcommand that reads a pipeline config.
struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string profile;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--config", config_path, "Pipeline config JSON")->check(CLI::ExistingFile);
    cmd.add_option("--seed", seed, "Expands into the per-stage seed bundle");
    cmd.add_option("--profile", profile, "replication | proxy")
        ->check(CLI::IsMember({"replication", "proxy"}));
  }

  PipelineConfig resolve() const {
    PipelineConfig config = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    if (!profile.empty()) config.apply_profile(parse_profile(profile));
    if (seed) config.seeds = SeedBundle::from_seed(*seed);
    return config;
  }
};

// --- synth -----------------------------------------------------------------

struct SynthCommand {
  SynthSpec spec;
  std::string out_dir;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("synth", "Generate a Gaussian-blob fixture");
    cmd->add_option("--out", out_dir, "Output directory")->required();
    cmd->add_option("--n-unlabeled", spec.n_unlabeled);
    cmd->add_option("--n-labeled", spec.n_labeled);
    cmd->add_option("--n-heldout", spec.n_heldout);
    cmd->add_option("--classes", spec.classes);
    cmd->add_option("--dim", spec.dim);
    cmd->add_option("--std", spec.cluster_std, "Per-coordinate standard deviation");
    cmd->add_option("--separation", spec.center_separation, "Distance between class centers");
    cmd->add_option("--noise", spec.noise_fraction, "Fraction of unlabeled points swapped across blobs");
    cmd->add_option("--seed", spec.seed);
  }

  int execute(std::ostream& out) const {
    const SynthData data = generate_synth(spec);
    write_synth(data, spec, out_dir);
    out << "wrote fixture to " << out_dir << " (" << data.swapped << " swapped points)\n";
    return ok;
  }
};

// --- cluster ---------------------------------------------------------------

struct ClusterCommand {
  CommonFlags common;
  std::string embeddings;
  std::string out_dir;
  std::optional<std::size_t> k;
  std::optional<std::size_t> max_iter;
  std::optional<double> tol;
  std::string init;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("cluster", "K-means pseudo-labels over an embedding file");
    common.add_to(*cmd);
    cmd->add_option("--embeddings", embeddings, "FLKE file")->required();
    cmd->add_option("--out", out_dir, "Output directory")->required();
    cmd->add_option("--k", k);
    cmd->add_option("--max-iter", max_iter);
    cmd->add_option("--tol", tol);
    cmd->add_option("--init", init)->check(CLI::IsMember({"kmeans++", "uniform"}));
  }

  int execute(std::ostream& out) const {
    PipelineConfig config = common.resolve();
    const EmbeddingSet data = load_embeddings(embeddings);
    KMeansOptions options;
    options.k = k.value_or(config.k_clusters);
    options.max_iter = max_iter.value_or(config.kmeans_max_iter);
    options.tol = tol.value_or(config.kmeans_tol);
    options.seed = config.seeds.cluster;
    options.init = init.empty() ? config.kmeans_init : parse_kmeans_init(init);
    const ClusterModel model = kmeans_fit(data, options);
    const PseudoLabeledSet pseudo = pseudo_label(data, model);

    ensure_dir(out_dir);
    write_json(fs::path(out_dir) / "cluster_model.json", model);
    std::ofstream labels(fs::path(out_dir) / "pseudo_labels.jsonl", std::ios::trunc);
    for (std::size_t i = 0; i < pseudo.size(); ++i) {
      const auto cluster = static_cast<std::size_t>(pseudo.labels[i]);
      labels << nlohmann::json{{"id", pseudo.ids[i]},
                               {"label", padded("cluster_", cluster, model.k)},
                               {"cluster", cluster}}
                    .dump()
             << '\n';
    }
    if (!labels) throw IoError("failed writing pseudo_labels.jsonl");
    out << "k=" << model.k << " iterations=" << model.iterations_run
        << " inertia=" << model.inertia << '\n';
    return ok;
  }
};

// --- refine ----------------------------------------------------------------

struct RefineCommand {
  CommonFlags common;
  std::string embeddings;
  std::string cluster_model;
  std::string out_dir;
  std::optional<std::size_t> k_top;
  std::optional<double> split_frac;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("refine", "Probe clusters and keep the top-k");
    common.add_to(*cmd);
    cmd->add_option("--embeddings", embeddings, "FLKE file that was clustered")->required();
    cmd->add_option("--cluster-model", cluster_model, "cluster_model.json")->required();
    cmd->add_option("--out", out_dir, "Output directory")->required();
    cmd->add_option("--k-top", k_top);
    cmd->add_option("--split-frac", split_frac);
  }

  int execute(std::ostream& out) const {
    PipelineConfig config = common.resolve();
    const EmbeddingSet data = load_embeddings(embeddings);
    const ClusterModel model = read_json(cluster_model).get<ClusterModel>();
    const PseudoLabeledSet pseudo = pseudo_label(data, model);

    TrainConfig probe_cfg = config.probe_train;
    probe_cfg.shuffle_seed = derive_seed(config.seeds.probe, 1);
    const SplitPair split =
        stratified_split(pseudo, split_frac.value_or(config.split_train_frac), config.seeds.split);
    const ProbeResult probe =
        probe_and_report(pseudo, split, data, probe_cfg, config.hidden_size, config.seeds.probe);
    const TopKSelection selection = select_top_k(probe.report, k_top.value_or(config.k_top));
    const RefinedSet refined = build_refined(pseudo, selection);

    ensure_dir(out_dir);
    nlohmann::json report = probe.report;
    report["selection"] = selection.clusters;
    report["warnings"] = selection.warnings;
    report["clamped"] = selection.clamped;
    write_json(fs::path(out_dir) / "cluster_report.json", report);
    if (probe.model) write_json(fs::path(out_dir) / "probe_model.json", *probe.model);

    std::ofstream labels(fs::path(out_dir) / "refined_labels.jsonl", std::ios::trunc);
    for (std::size_t i = 0; i < refined.size(); ++i) {
      const auto rank = static_cast<std::size_t>(refined.labels[i]);
      labels << nlohmann::json{{"id", refined.ids[i]},
                               {"label", padded("rank_", rank, refined.selected_clusters.size())},
                               {"cluster", refined.selected_clusters[rank]}}
                    .dump()
             << '\n';
    }
    if (!labels) throw IoError("failed writing refined_labels.jsonl");
    for (const auto& w : selection.warnings) log::info("refine: " + w);
    out << "probe accuracy " << probe.report.probe_overall_accuracy << ", kept "
        << selection.clusters.size() << " clusters, " << refined.size() << " records\n";
    return ok;
  }
};

// --- train -----------------------------------------------------------------

struct TrainCommand {
  CommonFlags common;
  std::string embeddings;
  std::string labels;
  std::string out_dir;
  std::string init_from;
  std::string stage = "clsft";
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> hidden;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("train", "Train a classifier head on labeled embeddings");
    common.add_to(*cmd);
    cmd->add_option("--embeddings", embeddings, "FLKE file")->required();
    cmd->add_option("--labels", labels, "JSONL labels; only these ids are used")->required();
    cmd->add_option("--out", out_dir, "Output directory")->required();
    cmd->add_option("--init-from", init_from, "Model JSON whose hidden layer is transferred");
    cmd->add_option("--stage", stage, "Which training settings to use")
        ->check(CLI::IsMember({"probe", "plft", "clsft"}));
    cmd->add_option("--epochs", epochs);
    cmd->add_option("--hidden", hidden);
  }

  int execute(std::ostream& out) const {
    PipelineConfig config = common.resolve();
    const EmbeddingSet data = load_embeddings(embeddings);
    const LabelTable table = load_labels(labels);

    std::vector<std::size_t> rows;
    std::vector<int> targets;
    for (const auto& entry : table.entries()) {
      const auto row = data.find(entry.id);
      if (!row) throw DataError("label id '" + entry.id + "' has no embedding");
      rows.push_back(*row);
      targets.push_back(entry.label);
    }

    TrainConfig cfg = stage == "probe" ? config.probe_train
                      : stage == "plft" ? config.plft_train
                                        : config.clsft_train;
    const std::uint64_t stage_seed = stage == "probe" ? config.seeds.probe
                                     : stage == "plft" ? config.seeds.plft
                                                       : config.seeds.clsft;
    if (epochs) cfg.epochs = *epochs;
    cfg.shuffle_seed = derive_seed(stage_seed, 1);

    ClassifierModel start;
    if (init_from.empty()) {
      start = init_classifier(data.dim(), hidden.value_or(config.hidden_size), table.class_count(),
                              stage_seed);
    } else {
      start = transfer_init(read_json(init_from).get<ClassifierModel>(), table.class_count(),
                            stage_seed);
    }
    start.profile_name = std::string(to_string(config.profile));
    const TrainResult result = train(start, data.rows_matrix(rows), targets, cfg);

    ensure_dir(out_dir);
    nlohmann::json model = result.model;
    model["class_names"] = table.class_names();
    write_json(fs::path(out_dir) / "model.json", model);
    write_json(fs::path(out_dir) / "history.json", result.history);
    out << "trained " << result.history.adam_steps << " steps, final loss "
        << result.history.final_loss << '\n';
    return ok;
  }
};

// --- eval ------------------------------------------------------------------

struct EvalCommand {
  std::string model_path;
  std::string embeddings;
  std::string labels;
  std::string out_dir;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("eval", "Evaluate a trained model on labeled embeddings");
    cmd->add_option("--model", model_path, "Model JSON")->required();
    cmd->add_option("--embeddings", embeddings, "FLKE file")->required();
    cmd->add_option("--labels", labels, "JSONL labels")->required();
    cmd->add_option("--out", out_dir, "Output directory");
  }

  int execute(std::ostream& out) const {
    const nlohmann::json model_json = read_json(model_path);
    const ClassifierModel model = model_json.get<ClassifierModel>();
    const EmbeddingSet data = load_embeddings(embeddings);
    const LabelTable table = load_labels(labels);

    std::vector<std::string> names = table.class_names();
    std::vector<int> remap(table.class_count());
    if (model_json.contains("class_names")) {
      names = model_json["class_names"].get<std::vector<std::string>>();
      for (std::size_t c = 0; c < table.class_count(); ++c) {
        auto pos = std::find(names.begin(), names.end(), table.class_names()[c]);
        if (pos == names.end()) {
          throw DataError("class '" + table.class_names()[c] + "' unknown to the model");
        }
        remap[c] = static_cast<int>(pos - names.begin());
      }
    } else {
      for (std::size_t c = 0; c < remap.size(); ++c) remap[c] = static_cast<int>(c);
    }
    if (names.size() != model.c) {
      throw DataError("model has " + std::to_string(model.c) + " classes, labels have " +
                      std::to_string(names.size()));
    }

    std::vector<std::size_t> rows;
    std::vector<int> truth;
    for (const auto& entry : table.entries()) {
      const auto row = data.find(entry.id);
      if (!row) throw DataError("label id '" + entry.id + "' has no embedding");
      rows.push_back(*row);
      truth.push_back(remap[static_cast<std::size_t>(entry.label)]);
    }
    const auto predicted = predict(model, data.rows_matrix(rows));
    const EvaluationReport report = compute_metrics(confusion_matrix(truth, predicted, model.c));

    if (!out_dir.empty()) {
      ensure_dir(out_dir);
      nlohmann::json metrics = report;
      metrics["class_names"] = names;
      write_json(fs::path(out_dir) / "metrics.json", metrics);
    }
    out << render_table(report, names);
    return ok;
  }
};

// --- run -------------------------------------------------------------------

struct RunCommand {
  CommonFlags common;
  std::string data_dir;
  std::string unlabeled;
  std::string labeled;
  std::string labeled_labels;
  std::string heldout;
  std::string heldout_labels;
  std::string out_dir;
  std::string mode = "flick";
  std::optional<std::size_t> k;
  std::optional<std::size_t> k_top;
  std::optional<std::size_t> few_count;
  std::string few_mode;

  void add_to(CLI::App& app) {
    auto* cmd = app.add_subcommand("run", "End-to-end run: cluster, refine, PL-FT, Cls-FT, eval");
    common.add_to(*cmd);
    cmd->add_option("--data", data_dir, "Fixture directory with the standard file names");
    cmd->add_option("--unlabeled", unlabeled, "Unlabeled FLKE file");
    cmd->add_option("--labeled", labeled, "Labeled FLKE file");
    cmd->add_option("--labeled-labels", labeled_labels, "Labels JSONL for the labeled file");
    cmd->add_option("--heldout", heldout, "Held-out FLKE file");
    cmd->add_option("--heldout-labels", heldout_labels, "Labels JSONL for the held-out file");
    cmd->add_option("--out", out_dir, "Report directory")->required();
    cmd->add_option("--mode", mode)->check(CLI::IsMember({"flick", "no_refinement", "baseline"}));
    cmd->add_option("--k", k);
    cmd->add_option("--k-top", k_top);
    cmd->add_option("--few-count", few_count);
    cmd->add_option("--few-mode", few_mode)
        ->check(CLI::IsMember({"total-count", "per-class-shots"}));
  }

  fs::path pick(const std::string& explicit_path, const char* standard_name) const {
    if (!explicit_path.empty()) return explicit_path;
    if (data_dir.empty()) {
      throw ArgumentError(std::string("missing input: give --data or the path for ") +
                          standard_name);
    }
    return fs::path(data_dir) / standard_name;
  }

  int execute(std::ostream& out) const {
    PipelineConfig config = common.resolve();
    if (k) config.k_clusters = *k;
    if (k_top) config.k_top = *k_top;
    if (few_count) config.few_label.count = *few_count;
    if (!few_mode.empty()) config.few_label.mode = parse_few_label_mode(few_mode);
    const RunMode run_mode = parse_run_mode(mode);

    const LabeledData labeled_data{load_embeddings(pick(labeled, synth_files::labeled)),
                                   load_labels(pick(labeled_labels, synth_files::labeled_labels))};
    const LabeledData heldout_data{load_embeddings(pick(heldout, synth_files::heldout)),
                                   load_labels(pick(heldout_labels, synth_files::heldout_labels))};
    std::optional<EmbeddingSet> unlabeled_data;
    if (run_mode != RunMode::baseline) {
      unlabeled_data = load_embeddings(pick(unlabeled, synth_files::unlabeled));
    }
    const FewLabelSample few = draw_few_labels(config, labeled_data.labels);

    PipelineResult result =
        run_mode == RunMode::baseline
            ? run_baseline(config, labeled_data, few, heldout_data)
            : flick::run_mode(run_mode, config, *unlabeled_data, labeled_data, few, heldout_data);
    write_report_dir(result, out_dir, utc_timestamp());
    out << render_table(result.evaluation, result.class_names);
    return ok;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-label text classification over sentence embeddings", "flick"};
  app.require_subcommand(1);
  SynthCommand synth;
  ClusterCommand cluster;
  RefineCommand refine;
  TrainCommand train_cmd;
  EvalCommand eval;
  RunCommand run_cmd;
  synth.add_to(app);
  cluster.add_to(app);
  refine.add_to(app);
  train_cmd.add_to(app);
  eval.add_to(app);
  run_cmd.add_to(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "flick: " << e.what() << "\n\n" << app.help();
    return bad_arguments;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "synth") return synth.execute(out);
    if (name == "cluster") return cluster.execute(out);
    if (name == "refine") return refine.execute(out);
    if (name == "train") return train_cmd.execute(out);
    if (name == "eval") return eval.execute(out);
    return run_cmd.execute(out);
  } catch (const Error& e) {
    err << "flick " << name << ": " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const CLI::ParseError& e) {
    err << "flick " << name << ": " << e.what() << '\n';
    return bad_arguments;
  }
}

}  // namespace flick::cli
