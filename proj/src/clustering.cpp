#include "flick/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flick/errors.hpp"
#include "flick/random.hpp"

namespace flick {

namespace {

double squared_distance(std::span<const float> point, std::span<const double> centroid) {
  double sum = 0.0;
  for (std::size_t j = 0; j < point.size(); ++j) {
    const double diff = static_cast<double>(point[j]) - centroid[j];
    sum += diff * diff;
  }
  return sum;
}

struct Assignment {
  std::vector<int> labels;
  std::vector<double> distances;  // squared distance to the assigned centroid
};

Assignment assign_all(const Matrix& centroids, const EmbeddingSet& data) {
  Assignment out;
  out.labels.resize(data.size());
  out.distances.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto point = data.row(i);
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows; ++c) {
      const double dist = squared_distance(point, centroids.row(c));
      if (dist < best_dist) {
        best_dist = dist;
        best = static_cast<int>(c);
      }
    }
    out.labels[i] = best;
    out.distances[i] = best_dist;
  }
  return out;
}

double sum_of(const std::vector<double>& values) {
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

void copy_point(const EmbeddingSet& data, std::size_t i, std::span<double> dst) {
  const auto src = data.row(i);
  for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j];
}

Matrix seed_plus_plus(const EmbeddingSet& data, std::size_t k, Rng& rng) {
  const std::size_t n = data.size();
  Matrix centroids(k, data.dim());
  copy_point(data, rng.uniform_index(n), centroids.row(0));

  std::vector<double> closest(n);
  for (std::size_t i = 0; i < n; ++i) {
    closest[i] = squared_distance(data.row(i), centroids.row(0));
  }
  for (std::size_t c = 1; c < k; ++c) {
    const double total = sum_of(closest);
    std::size_t pick = n - 1;
    if (total > 0.0) {
      const double target = rng.uniform01() * total;
      double running = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (closest[i] > 0.0) pick = i;  // rounding fallback: last eligible point
        running += closest[i];
        if (running > target && closest[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      // All points coincide with chosen centroids.
      pick = rng.uniform_index(n);
    }
    copy_point(data, pick, centroids.row(c));
    for (std::size_t i = 0; i < n; ++i) {
      closest[i] = std::min(closest[i], squared_distance(data.row(i), centroids.row(c)));
    }
  }
  return centroids;
}

Matrix seed_uniform(const EmbeddingSet& data, std::size_t k, Rng& rng) {
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(order[i], order[i + rng.uniform_index(order.size() - i)]);
  }
  Matrix centroids(k, data.dim());
  for (std::size_t c = 0; c < k; ++c) copy_point(data, order[c], centroids.row(c));
  return centroids;
}

}  // namespace

std::string_view to_string(KMeansInit init) {
  return init == KMeansInit::kmeans_plus_plus ? "kmeans++" : "uniform";
}

KMeansInit parse_kmeans_init(std::string_view text) {
  if (text == "kmeans++") return KMeansInit::kmeans_plus_plus;
  if (text == "uniform") return KMeansInit::uniform;
  throw ArgumentError("unknown k-means init '" + std::string(text) + "'");
}

ClusterModel kmeans_fit(const EmbeddingSet& data, const KMeansOptions& options) {
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  const std::size_t k = options.k;
  if (k == 0) throw ArgumentError("k must be at least 1");
  if (k > n) {
    throw ArgumentError("k = " + std::to_string(k) + " exceeds point count " +
                        std::to_string(n));
  }
  if (options.max_iter == 0) throw ArgumentError("max_iter must be at least 1");
  if (!(options.tol >= 0.0)) throw ArgumentError("tol must be non-negative");

  Rng rng(options.seed);
  ClusterModel model;
  model.k = k;
  model.dim = d;
  model.seed = options.seed;
  model.init = options.init;
  model.centroids = options.init == KMeansInit::kmeans_plus_plus ? seed_plus_plus(data, k, rng)
                                                                 : seed_uniform(data, k, rng);

  Assignment current = assign_all(model.centroids, data);
  std::vector<double> sums(k * d);
  std::vector<std::size_t> counts(k);

  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    // Update step: centroid = mean of members, in fixed row order.
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(current.labels[i]);
      ++counts[c];
      const auto point = data.row(i);
      for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += point[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) {
        model.centroids(c, j) = sums[c * d + j] / static_cast<double>(counts[c]);
      }
    }

    double objective = 0.0;
    std::vector<double> own(n);
    for (std::size_t i = 0; i < n; ++i) {
      own[i] = squared_distance(data.row(i),
                                model.centroids.row(static_cast<std::size_t>(current.labels[i])));
      objective += own[i];
    }

    // Empty clusters have no members, so moving them leaves the objective of
    // the current assignment unchanged. Each takes the point farthest from its
    // own centroid; a point is used at most once.
    bool repaired = false;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (own[i] < 0.0) continue;
        if (far == n || own[i] > own[far]) far = i;
      }
      if (far == n) break;
      copy_point(data, far, model.centroids.row(c));
      own[far] = -1.0;
      ++model.empty_repairs;
      repaired = true;
    }

    model.inertia_trace.push_back(objective);
    model.iterations_run = iter + 1;

    Assignment next = assign_all(model.centroids, data);
    const bool changed = next.labels != current.labels;
    current = std::move(next);
    if (!changed && !repaired) break;
    if (model.inertia_trace.size() >= 2) {
      const double prev = model.inertia_trace[model.inertia_trace.size() - 2];
      if (prev <= 0.0) break;
      if ((prev - objective) / prev < options.tol) break;
    }
  }

  model.assignments = std::move(current.labels);
  model.inertia = sum_of(current.distances);
  return model;
}

std::vector<int> assign(const ClusterModel& model, const EmbeddingSet& data) {
  if (data.dim() != model.dim || model.centroids.cols != model.dim) {
    throw ArgumentError("dimension mismatch: data d=" + std::to_string(data.dim()) +
                        ", centroids d=" + std::to_string(model.dim));
  }
  if (model.k == 0 || model.centroids.rows != model.k) {
    throw ArgumentError("cluster model has no centroids");
  }
  return assign_all(model.centroids, data).labels;
}

std::vector<std::size_t> PseudoLabeledSet::cluster_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (int label : labels) ++sizes[static_cast<std::size_t>(label)];
  return sizes;
}

PseudoLabeledSet pseudo_label(const EmbeddingSet& data, const ClusterModel& model) {
  PseudoLabeledSet out;
  out.labels = assign(model, data);
  out.ids = data.ids();
  out.k = model.k;
  return out;
}

void to_json(nlohmann::json& j, const ClusterModel& model) {
  j = nlohmann::json{{"k", model.k},
                     {"dim", model.dim},
                     {"centroids", model.centroids.values},
                     {"inertia", model.inertia},
                     {"iterations_run", model.iterations_run},
                     {"seed", model.seed},
                     {"init", std::string(to_string(model.init))},
                     {"inertia_trace", model.inertia_trace},
                     {"empty_repairs", model.empty_repairs}};
}

void from_json(const nlohmann::json& j, ClusterModel& model) {
  try {
    model.k = j.at("k").get<std::size_t>();
    model.dim = j.at("dim").get<std::size_t>();
    model.centroids = Matrix(model.k, model.dim);
    model.centroids.values = j.at("centroids").get<std::vector<double>>();
    model.inertia = j.at("inertia").get<double>();
    model.iterations_run = j.at("iterations_run").get<std::size_t>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.init = parse_kmeans_init(j.value("init", std::string("kmeans++")));
    model.inertia_trace = j.value("inertia_trace", std::vector<double>{});
    model.empty_repairs = j.value("empty_repairs", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("cluster model JSON: ") + e.what());
  }
  if (model.k == 0 || model.centroids.values.size() != model.k * model.dim) {
    throw FormatError("cluster model JSON: centroid array does not match k*dim");
  }
  for (double v : model.centroids.values) {
    if (!std::isfinite(v)) throw DataError("cluster model JSON: non-finite centroid");
  }
}

}  // namespace flick
