#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flick/classifier.hpp"
#include "flick/clustering.hpp"
#include "flick/evaluation.hpp"
#include "flick/ingestion.hpp"
#include "flick/refinement.hpp"
#include "json.hpp"

namespace flick {

enum class Profile { replication, proxy };
enum class RunMode { flick, no_refinement, baseline };

std::string_view to_string(Profile profile);
Profile parse_profile(std::string_view text);
std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view text);

struct SeedBundle {
  std::uint64_t cluster = 0;
  std::uint64_t split = 1;
  std::uint64_t probe = 2;
  std::uint64_t plft = 3;
  std::uint64_t clsft = 4;
  std::uint64_t subsample = 5;

  /// Expands one seed into independent per-stage seeds.
  static SeedBundle from_seed(std::uint64_t seed);

  friend bool operator==(const SeedBundle&, const SeedBundle&) = default;
};

struct FewLabelConfig {
  FewLabelMode mode = FewLabelMode::total_count;
  std::size_t count = 100;
};

struct PipelineConfig {
  std::size_t k_clusters = 20;
  std::size_t kmeans_max_iter = 300;
  double kmeans_tol = 1e-4;
  KMeansInit kmeans_init = KMeansInit::kmeans_plus_plus;
  double split_train_frac = 0.25;
  std::size_t k_top = 15;
  std::size_t hidden_size = 256;
  Profile profile = Profile::replication;
  TrainConfig probe_train{.epochs = 10};
  TrainConfig plft_train{.epochs = 1};
  TrainConfig clsft_train{.epochs = 10};
  SeedBundle seeds;
  FewLabelConfig few_label;

  PipelineConfig();

  /// Sets learning rate and epsilon of every training stage from the profile:
  /// replication = 3e-5 / 1e-6, proxy = 1e-3 / 1e-8.
  void apply_profile(Profile p);
  void validate() const;
};

/// Config JSON: every field optional. "profile" is applied before explicit
/// per-stage train settings, and "seed" expands into the seed bundle before
/// explicit "seeds" entries.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const PipelineConfig& config);

struct LabeledData {
  EmbeddingSet embeddings;
  LabelTable labels;
};

/// Hidden-layer parameters captured right after transfer, before Cls-FT.
struct HiddenSnapshot {
  Matrix w1;
  std::vector<double> b1;

  friend bool operator==(const HiddenSnapshot&, const HiddenSnapshot&) = default;
};

struct PipelineResult {
  RunMode mode = RunMode::flick;
  PipelineConfig config;
  std::vector<std::string> class_names;
  std::optional<ClusterModel> cluster_model;
  std::optional<PseudoLabeledSet> pseudo_labels;
  std::optional<ClusterReport> cluster_report;
  std::optional<TopKSelection> selection;
  std::optional<std::size_t> plft_records;
  std::optional<ClassifierModel> plft_model;
  std::optional<TrainHistory> plft_history;
  std::optional<HiddenSnapshot> clsft_initial_hidden;
  ClassifierModel final_model;
  TrainHistory final_history;
  EvaluationReport evaluation;

  /// True when the snapshot equals the PL-FT hidden layer bit for bit.
  bool hidden_layer_transferred() const;
};

FewLabelSample draw_few_labels(const PipelineConfig& config, const LabelTable& labels);

PipelineResult run_flick(const PipelineConfig& config, const EmbeddingSet& unlabeled,
                         const LabeledData& labeled, const FewLabelSample& few,
                         const LabeledData& heldout);

PipelineResult run_no_refinement(const PipelineConfig& config, const EmbeddingSet& unlabeled,
                                 const LabeledData& labeled, const FewLabelSample& few,
                                 const LabeledData& heldout);

PipelineResult run_baseline(const PipelineConfig& config, const LabeledData& labeled,
                            const FewLabelSample& few, const LabeledData& heldout);

PipelineResult run_mode(RunMode mode, const PipelineConfig& config,
                        const EmbeddingSet& unlabeled, const LabeledData& labeled,
                        const FewLabelSample& few, const LabeledData& heldout);

void to_json(nlohmann::json& j, const PipelineResult& result);
void from_json(const nlohmann::json& j, PipelineResult& result);

/// Writes config.json, metrics.json, final_model.json, result.json and, for
/// modes that cluster, cluster_model.json, cluster_report.json and
/// plft_model.json. Only result.json carries the "generated_at" timestamp.
void write_report_dir(const PipelineResult& result, const std::filesystem::path& dir,
                      std::string_view generated_at);

}  // namespace flick
