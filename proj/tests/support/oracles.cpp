#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <tuple>

namespace flick::oracle {

Blobs make_blobs(std::size_t per_blob, std::size_t dim, std::size_t blobs, double separation,
                 double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<std::string> ids;
  std::vector<float> values;
  std::vector<int> labels;
  for (std::size_t b = 0; b < blobs; ++b) {
    for (std::size_t i = 0; i < per_blob; ++i) {
      ids.push_back("p" + std::to_string(b) + "_" + std::to_string(i));
      labels.push_back(static_cast<int>(b));
      for (std::size_t j = 0; j < dim; ++j) {
        // Centers on distinct axes scaled so pairwise distance >= separation.
        const double center = (j == b % dim) ? separation * static_cast<double>(b / dim + 1) : 0.0;
        values.push_back(static_cast<float>(center + noise(rng)));
      }
    }
  }
  return {EmbeddingSet(std::move(ids), std::move(values), dim), std::move(labels)};
}

EmbeddingSet random_embeddings(std::size_t n, std::size_t dim, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<std::string> ids;
  std::vector<float> values;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("r" + std::to_string(i));
    for (std::size_t j = 0; j < dim; ++j) values.push_back(static_cast<float>(u(rng)));
  }
  return EmbeddingSet(std::move(ids), std::move(values), dim);
}

std::vector<int> nearest_centroids(const Matrix& centroids, const EmbeddingSet& data) {
  std::vector<int> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    long double best = 0;
    int best_c = -1;
    for (std::size_t c = 0; c < centroids.rows; ++c) {
      long double dist = 0;
      for (std::size_t j = 0; j < data.dim(); ++j) {
        long double diff = static_cast<long double>(data.row(i)[j]) - centroids(c, j);
        dist += diff * diff;
      }
      if (best_c < 0 || dist < best) {
        best = dist;
        best_c = static_cast<int>(c);
      }
    }
    out.push_back(best_c);
  }
  return out;
}

long double objective(const Matrix& centroids, const EmbeddingSet& data,
                      std::span<const int> labels) {
  long double total = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.dim(); ++j) {
      long double diff = static_cast<long double>(data.row(i)[j]) -
                         centroids(static_cast<std::size_t>(labels[i]), j);
      total += diff * diff;
    }
  }
  return total;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  std::map<std::pair<int, int>, long long> cells;
  std::map<int, long long> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++cells[{a[i], b[i]}];
    ++rows[a[i]];
    ++cols[b[i]];
  }
  auto choose2 = [](long long x) { return static_cast<double>(x) * (x - 1) / 2.0; };
  double index = 0, sum_rows = 0, sum_cols = 0;
  for (auto& [k, v] : cells) index += choose2(v);
  for (auto& [k, v] : rows) sum_rows += choose2(v);
  for (auto& [k, v] : cols) sum_cols += choose2(v);
  const double expected = sum_rows * sum_cols / choose2(static_cast<long long>(a.size()));
  const double max_index = (sum_rows + sum_cols) / 2.0;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

std::vector<std::vector<long double>> probabilities(const ClassifierModel& model,
                                                    const Matrix& batch) {
  std::vector<std::vector<long double>> out;
  for (std::size_t i = 0; i < batch.rows; ++i) {
    std::vector<long double> hidden(model.h);
    for (std::size_t k = 0; k < model.h; ++k) {
      long double z = model.b1[k];
      for (std::size_t r = 0; r < model.d; ++r) z += batch(i, r) * model.w1(r, k);
      hidden[k] = z > 0 ? z : 0;
    }
    std::vector<long double> logits(model.c);
    for (std::size_t j = 0; j < model.c; ++j) {
      long double z = model.b2[j];
      for (std::size_t k = 0; k < model.h; ++k) z += hidden[k] * model.w2(k, j);
      logits[j] = z;
    }
    long double denom = 0;
    for (auto z : logits) denom += std::exp(z);
    for (auto& z : logits) z = std::exp(z) / denom;
    out.push_back(logits);
  }
  return out;
}

long double loss(const ClassifierModel& model, const Matrix& batch, std::span<const int> targets) {
  const auto probs = probabilities(model, batch);
  long double total = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    total += -std::log(std::max<long double>(probs[i][static_cast<std::size_t>(targets[i])], 1e-12L));
  }
  return total / static_cast<long double>(probs.size());
}

std::vector<double> numeric_gradient(const ClassifierModel& model, const Matrix& batch,
                                     std::span<const int> targets, double step) {
  std::vector<double> grad;
  ClassifierModel probe = model;
  auto visit = [&](std::vector<double>& params) {
    for (double& p : params) {
      const double saved = p;
      p = saved + step;
      const long double up = loss(probe, batch, targets);
      p = saved - step;
      const long double down = loss(probe, batch, targets);
      p = saved;
      grad.push_back(static_cast<double>((up - down) / (2.0L * step)));
    }
  };
  visit(probe.w1.values);
  visit(probe.b1);
  visit(probe.w2.values);
  visit(probe.b2);
  return grad;
}

std::vector<int> full_ranking(const ClusterReport& report) {
  std::vector<std::tuple<double, long long, int>> keys;
  for (const auto& row : report.rows) {
    if (row.test_support == 0) continue;
    const double acc = static_cast<double>(row.correct) / static_cast<double>(row.test_support);
    keys.emplace_back(-acc, -static_cast<long long>(row.test_support), row.cluster_id);
  }
  std::sort(keys.begin(), keys.end());
  std::vector<int> out;
  for (const auto& key : keys) out.push_back(std::get<2>(key));
  return out;
}

ScalarMetrics tally_metrics(const ConfusionMatrix& confusion) {
  const std::size_t z = confusion.classes;
  ScalarMetrics m;
  double total = 0, diagonal = 0;
  for (std::size_t t = 0; t < z; ++t) {
    for (std::size_t p = 0; p < z; ++p) {
      total += static_cast<double>(confusion(t, p));
      if (t == p) diagonal += static_cast<double>(confusion(t, p));
    }
  }
  m.accuracy = diagonal / total;
  for (std::size_t c = 0; c < z; ++c) {
    double tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t t = 0; t < z; ++t) {
      for (std::size_t p = 0; p < z; ++p) {
        const double v = static_cast<double>(confusion(t, p));
        if (t == c && p == c) tp += v;
        else if (p == c) fp += v;
        else if (t == c) fn += v;
        else tn += v;
      }
    }
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double sensitivity = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double specificity = tn + fp > 0 ? tn / (tn + fp) : 0.0;
    const double f1 = (tp + fp > 0 && tp + fn > 0 && precision + sensitivity > 0)
                          ? 2 * precision * sensitivity / (precision + sensitivity)
                          : 0.0;
    m.precision.push_back(precision);
    m.sensitivity.push_back(sensitivity);
    m.specificity.push_back(specificity);
    m.f1.push_back(f1);
    m.macro_f1 += f1 / static_cast<double>(z);
  }
  return m;
}

ClusterReport random_report(std::size_t clusters, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ClusterReport report;
  std::size_t correct_total = 0, support_total = 0;
  for (std::size_t c = 0; c < clusters; ++c) {
    ClusterRow row;
    row.cluster_id = static_cast<int>(c);
    // Small supports make equal accuracies common.
    row.test_support = rng() % 7 == 0 ? 0 : 1 + rng() % 10;
    if (row.test_support > 0) {
      row.correct = rng() % (row.test_support + 1);
      row.accuracy = static_cast<double>(row.correct) / static_cast<double>(row.test_support);
    }
    correct_total += row.correct;
    support_total += row.test_support;
    report.rows.push_back(row);
  }
  report.probe_overall_accuracy =
      support_total ? static_cast<double>(correct_total) / static_cast<double>(support_total) : 0.0;
  return report;
}

PseudoLabeledSet random_pseudo_labels(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PseudoLabeledSet out;
  out.k = k;
  // Skewed cluster sizes, including empty and singleton clusters.
  std::vector<double> weights(k);
  for (auto& w : weights) w = std::pow(static_cast<double>(rng() % 1000) / 1000.0, 3.0);
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  for (std::size_t i = 0; i < n; ++i) {
    out.ids.push_back("q" + std::to_string(i));
    out.labels.push_back(pick(rng));
  }
  return out;
}

}  // namespace flick::oracle

namespace flick::oracle {

GradientProblem random_gradient_problem(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    GradientProblem p;
    const std::size_t d = 1 + rng() % 8, h = 1 + rng() % 8, c = 2 + rng() % 7;
    const std::size_t m = 1 + rng() % 6;
    p.model = init_classifier(d, h, c, rng());
    for (auto& b : p.model.b1) b = 0.3 * u(rng);
    for (auto& b : p.model.b2) b = 0.3 * u(rng);
    p.batch = Matrix(m, d);
    for (auto& v : p.batch.values) v = 2.0 * u(rng);
    for (std::size_t i = 0; i < m; ++i) p.targets.push_back(static_cast<int>(rng() % c));

    bool smooth = true;
    for (std::size_t i = 0; i < m && smooth; ++i) {
      for (std::size_t k = 0; k < h && smooth; ++k) {
        double z = p.model.b1[k];
        for (std::size_t r = 0; r < d; ++r) z += p.batch(i, r) * p.model.w1(r, k);
        smooth = std::abs(z) > 1e-3;
      }
    }
    if (smooth) return p;
  }
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-7});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

}  // namespace flick::oracle
