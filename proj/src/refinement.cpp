#include "flick/refinement.hpp"

#include <algorithm>
#include <cmath>

#include "flick/errors.hpp"
#include "flick/random.hpp"

namespace flick {

SplitPair stratified_split(const PseudoLabeledSet& pseudo, double train_frac,
                           std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw ArgumentError("train_frac must lie in (0, 1)");
  }
  if (pseudo.size() == 0) throw ArgumentError("cannot split an empty pseudo-labeled set");
  if (pseudo.labels.size() != pseudo.ids.size()) {
    throw ArgumentError("pseudo-labeled set has mismatched ids and labels");
  }

  std::vector<std::vector<std::size_t>> members(pseudo.k);
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    const int label = pseudo.labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= pseudo.k) {
      throw ArgumentError("pseudo-label " + std::to_string(label) + " outside [0, k)");
    }
    members[static_cast<std::size_t>(label)].push_back(i);
  }

  Rng rng(seed);
  SplitPair split;
  split.train_frac = train_frac;
  for (auto& group : members) {
    const std::size_t size = group.size();
    if (size == 0) continue;
    std::size_t n_train = 0;
    if (size >= 2) {
      n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(size)));
      n_train = std::clamp<std::size_t>(n_train, 1, size - 1);
    }
    rng.shuffle(std::span<std::size_t>(group));
    split.train.insert(split.train.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.insert(split.test.end(), group.begin() + static_cast<std::ptrdiff_t>(n_train), group.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

ProbeResult probe_and_report(const PseudoLabeledSet& pseudo, const SplitPair& split,
                             const EmbeddingSet& data, const TrainConfig& config,
                             std::size_t hidden_size, std::uint64_t seed) {
  if (split.train.empty()) throw ArgumentError("probe train split is empty");
  if (data.ids() != pseudo.ids) {
    throw ArgumentError("embedding rows do not line up with pseudo-labeled ids");
  }
  auto targets_of = [&](const std::vector<std::size_t>& positions) {
    std::vector<int> out;
    out.reserve(positions.size());
    for (std::size_t p : positions) {
      if (p >= pseudo.size()) throw ArgumentError("split position out of range");
      out.push_back(pseudo.labels[p]);
    }
    return out;
  };

  ProbeResult result;
  const std::vector<int> truth = targets_of(split.test);
  std::vector<int> predicted(split.test.size(), 0);
  if (pseudo.k >= 2) {
    const std::vector<int> train_targets = targets_of(split.train);
    ClassifierModel fresh = init_classifier(data.dim(), hidden_size, pseudo.k, seed);
    TrainResult trained = train(fresh, data.rows_matrix(split.train), train_targets, config);
    if (!split.test.empty()) predicted = predict(trained.model, data.rows_matrix(split.test));
    result.model = std::move(trained.model);
  }

  auto& rows = result.report.rows;
  rows.resize(pseudo.k);
  for (std::size_t c = 0; c < pseudo.k; ++c) rows[c].cluster_id = static_cast<int>(c);
  std::size_t total_correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& row = rows[static_cast<std::size_t>(truth[i])];
    ++row.test_support;
    if (predicted[i] == truth[i]) {
      ++row.correct;
      ++total_correct;
    }
  }
  for (auto& row : rows) {
    if (row.test_support > 0) {
      row.accuracy = static_cast<double>(row.correct) / static_cast<double>(row.test_support);
    }
  }
  result.report.probe_overall_accuracy =
      truth.empty() ? 0.0 : static_cast<double>(total_correct) / static_cast<double>(truth.size());
  return result;
}

TopKSelection select_top_k(const ClusterReport& report, std::size_t k_top) {
  if (k_top == 0) throw ArgumentError("k_top must be at least 1");
  std::vector<const ClusterRow*> rankable;
  for (const auto& row : report.rows) {
    if (row.test_support > 0 && row.accuracy) rankable.push_back(&row);
  }
  if (rankable.empty()) throw SelectionError("no cluster has test support; nothing to rank");

  auto better = [](const ClusterRow* a, const ClusterRow* b) {
    if (*a->accuracy != *b->accuracy) return *a->accuracy > *b->accuracy;
    if (a->test_support != b->test_support) return a->test_support > b->test_support;
    return a->cluster_id < b->cluster_id;
  };
  const std::size_t take = std::min(k_top, rankable.size());
  std::partial_sort(rankable.begin(), rankable.begin() + static_cast<std::ptrdiff_t>(take),
                    rankable.end(), better);

  TopKSelection selection;
  selection.requested = k_top;
  for (std::size_t i = 0; i < take; ++i) selection.clusters.push_back(rankable[i]->cluster_id);
  if (take < k_top) {
    selection.clamped = true;
    selection.warnings.push_back("requested top " + std::to_string(k_top) + " but only " +
                                 std::to_string(take) + " clusters are rankable");
  }
  return selection;
}

RefinedSet build_refined(const PseudoLabeledSet& pseudo, const TopKSelection& selection) {
  if (selection.clusters.empty()) throw ArgumentError("selection is empty");
  RefinedSet refined;
  refined.selected_clusters = selection.clusters;
  refined.label_map.assign(pseudo.k, -1);
  for (std::size_t rank = 0; rank < selection.clusters.size(); ++rank) {
    const int cluster = selection.clusters[rank];
    if (cluster < 0 || static_cast<std::size_t>(cluster) >= pseudo.k) {
      throw ArgumentError("selected cluster " + std::to_string(cluster) + " outside [0, k)");
    }
    if (refined.label_map[static_cast<std::size_t>(cluster)] != -1) {
      throw ArgumentError("cluster " + std::to_string(cluster) + " selected twice");
    }
    refined.label_map[static_cast<std::size_t>(cluster)] = static_cast<int>(rank);
  }
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    const int mapped = refined.label_map[static_cast<std::size_t>(pseudo.labels[i])];
    if (mapped < 0) continue;
    refined.positions.push_back(i);
    refined.ids.push_back(pseudo.ids[i]);
    refined.labels.push_back(mapped);
  }
  return refined;
}

void to_json(nlohmann::json& j, const ClusterReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"cluster_id", row.cluster_id},
                    {"test_support", row.test_support},
                    {"correct", row.correct},
                    {"accuracy", row.accuracy ? nlohmann::json(*row.accuracy) : nlohmann::json()},
                    {"rankable", row.accuracy.has_value()}});
  }
  j = nlohmann::json{{"rows", rows}, {"probe_overall_accuracy", report.probe_overall_accuracy}};
}

void from_json(const nlohmann::json& j, ClusterReport& report) {
  report.rows.clear();
  for (const auto& r : j.at("rows")) {
    ClusterRow row;
    row.cluster_id = r.at("cluster_id").get<int>();
    row.test_support = r.at("test_support").get<std::size_t>();
    row.correct = r.at("correct").get<std::size_t>();
    if (!r.at("accuracy").is_null()) row.accuracy = r.at("accuracy").get<double>();
    report.rows.push_back(row);
  }
  report.probe_overall_accuracy = j.at("probe_overall_accuracy").get<double>();
}

void to_json(nlohmann::json& j, const TopKSelection& selection) {
  j = nlohmann::json{{"clusters", selection.clusters},
                     {"requested", selection.requested},
                     {"clamped", selection.clamped},
                     {"warnings", selection.warnings}};
}

void from_json(const nlohmann::json& j, TopKSelection& selection) {
  selection.clusters = j.at("clusters").get<std::vector<int>>();
  selection.requested = j.at("requested").get<std::size_t>();
  selection.clamped = j.at("clamped").get<bool>();
  selection.warnings = j.at("warnings").get<std::vector<std::string>>();
}

}  // namespace flick
