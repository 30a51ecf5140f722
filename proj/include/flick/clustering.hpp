#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "flick/ingestion.hpp"
#include "flick/matrix.hpp"
#include "json.hpp"

namespace flick {

enum class KMeansInit { kmeans_plus_plus, uniform };

std::string_view to_string(KMeansInit init);
KMeansInit parse_kmeans_init(std::string_view text);

struct KMeansOptions {
  std::size_t k = 20;
  std::size_t max_iter = 300;
  double tol = 1e-4;  // relative inertia improvement
  std::uint64_t seed = 0;
  KMeansInit init = KMeansInit::kmeans_plus_plus;
};

/// Fitted K-means model. `inertia_trace[t]` is the objective of iteration t's
/// assignment against the centroids it produced; it never increases.
struct ClusterModel {
  std::size_t k = 0;
  std::size_t dim = 0;
  Matrix centroids;  // k x dim
  double inertia = 0.0;
  std::size_t iterations_run = 0;
  std::uint64_t seed = 0;
  KMeansInit init = KMeansInit::kmeans_plus_plus;
  std::vector<double> inertia_trace;
  std::size_t empty_repairs = 0;
  std::vector<int> assignments;  // final nearest-centroid labels of the fit data
};

ClusterModel kmeans_fit(const EmbeddingSet& data, const KMeansOptions& options);

/// Nearest centroid by squared Euclidean distance; lowest index wins ties.
std::vector<int> assign(const ClusterModel& model, const EmbeddingSet& data);

struct PseudoLabeledSet {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::size_t k = 0;

  std::size_t size() const noexcept { return ids.size(); }
  std::vector<std::size_t> cluster_sizes() const;
};

PseudoLabeledSet pseudo_label(const EmbeddingSet& data, const ClusterModel& model);

void to_json(nlohmann::json& j, const ClusterModel& model);
void from_json(const nlohmann::json& j, ClusterModel& model);

}  // namespace flick
