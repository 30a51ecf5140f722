#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace flick {

/// Z x Z counts; rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;

  std::uint64_t operator()(std::size_t truth, std::size_t predicted) const {
    return counts[truth * classes + predicted];
  }
  std::uint64_t total() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// A metric whose denominator was zero is reported as 0 with `defined` unset.
struct Metric {
  double value = 0.0;
  bool defined = true;
};

struct ClassMetrics {
  Metric precision;
  Metric sensitivity;
  Metric specificity;
  Metric f1;
};

struct EvaluationReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double macro_precision = 0.0;
  double macro_sensitivity = 0.0;
  double macro_specificity = 0.0;
  std::vector<ClassMetrics> per_class;
};

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 std::size_t classes);

/// One-vs-rest metrics per class plus unweighted macro means.
EvaluationReport compute_metrics(const ConfusionMatrix& confusion);

/// Fixed-width table: class, precision, sensitivity, specificity, F1.
std::string render_table(const EvaluationReport& report,
                         const std::vector<std::string>& class_names);

void to_json(nlohmann::json& j, const ConfusionMatrix& confusion);
void from_json(const nlohmann::json& j, ConfusionMatrix& confusion);
void to_json(nlohmann::json& j, const EvaluationReport& report);
void from_json(const nlohmann::json& j, EvaluationReport& report);

}  // namespace flick
