#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flick/classifier.hpp"
#include "flick/clustering.hpp"
#include "flick/ingestion.hpp"
#include "json.hpp"

namespace flick {

/// Record positions (indices into the pseudo-labeled set), each sorted.
struct SplitPair {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  double train_frac = 0.25;
};

struct ClusterRow {
  int cluster_id = 0;
  std::size_t test_support = 0;
  std::size_t correct = 0;
  std::optional<double> accuracy;  // empty when test_support == 0
};

struct ClusterReport {
  std::vector<ClusterRow> rows;  // one per cluster, by cluster id
  double probe_overall_accuracy = 0.0;
};

struct TopKSelection {
  std::vector<int> clusters;  // rank order
  std::size_t requested = 0;
  bool clamped = false;  // fewer rankable clusters than requested
  std::vector<std::string> warnings;
};

struct RefinedSet {
  std::vector<int> selected_clusters;
  std::vector<int> label_map;  // original cluster id -> new label, -1 if dropped
  std::vector<std::size_t> positions;  // into the pseudo-labeled set
  std::vector<std::string> ids;
  std::vector<int> labels;

  std::size_t size() const noexcept { return ids.size(); }
};

struct ProbeResult {
  std::optional<ClassifierModel> model;  // empty for the single-cluster case
  ClusterReport report;
};

/// Per-cluster proportional split: round(frac * size) train members, clamped
/// to [1, size - 1] for clusters of size >= 2. Singletons go to test.
SplitPair stratified_split(const PseudoLabeledSet& pseudo, double train_frac,
                           std::uint64_t seed);

/// Trains a fresh probe on the train half (targets = cluster ids), predicts
/// the test half and tallies per-cluster accuracy. `data` rows must line up
/// with the pseudo-labeled ids. With k == 1 every prediction is cluster 0.
ProbeResult probe_and_report(const PseudoLabeledSet& pseudo, const SplitPair& split,
                             const EmbeddingSet& data, const TrainConfig& config,
                             std::size_t hidden_size, std::uint64_t seed);

/// Accuracy desc, then test support desc, then cluster id asc. Clusters with
/// no test support are never selected.
TopKSelection select_top_k(const ClusterReport& report, std::size_t k_top);

/// Every record whose pseudo-label was selected, relabeled by rank.
RefinedSet build_refined(const PseudoLabeledSet& pseudo, const TopKSelection& selection);

void to_json(nlohmann::json& j, const ClusterReport& report);
void from_json(const nlohmann::json& j, ClusterReport& report);
void to_json(nlohmann::json& j, const TopKSelection& selection);
void from_json(const nlohmann::json& j, TopKSelection& selection);

}  // namespace flick
