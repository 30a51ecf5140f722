#include "flick/evaluation.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

#include "flick/errors.hpp"

namespace flick {

namespace {

Metric ratio(double numerator, double denominator) {
  if (denominator == 0.0) return {0.0, false};
  return {numerator / denominator, true};
}

nlohmann::json metric_json(const Metric& m) {
  return {{"value", m.value}, {"defined", m.defined}};
}

Metric metric_from(const nlohmann::json& j) {
  return {j.at("value").get<double>(), j.at("defined").get<bool>()};
}

}  // namespace

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 std::size_t classes) {
  if (truth.size() != predicted.size()) {
    throw ArgumentError("label length mismatch: " + std::to_string(truth.size()) + " vs " +
                        std::to_string(predicted.size()));
  }
  if (truth.empty()) throw ArgumentError("confusion matrix of zero records");
  if (classes == 0) throw ArgumentError("confusion matrix needs at least one class");
  ConfusionMatrix out{classes, std::vector<std::uint64_t>(classes * classes, 0)};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = predicted[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= classes ||
        static_cast<std::size_t>(p) >= classes) {
      throw ArgumentError("label outside [0, " + std::to_string(classes) + ") at position " +
                          std::to_string(i));
    }
    ++out.counts[static_cast<std::size_t>(t) * classes + static_cast<std::size_t>(p)];
  }
  return out;
}

EvaluationReport compute_metrics(const ConfusionMatrix& confusion) {
  const std::size_t z = confusion.classes;
  if (z == 0 || confusion.counts.size() != z * z) {
    throw ArgumentError("confusion matrix shape is inconsistent");
  }
  const std::uint64_t total = confusion.total();
  if (total == 0) throw ArgumentError("confusion matrix is all zeros");

  std::vector<std::uint64_t> row_sum(z, 0);
  std::vector<std::uint64_t> col_sum(z, 0);
  std::uint64_t trace = 0;
  for (std::size_t t = 0; t < z; ++t) {
    for (std::size_t p = 0; p < z; ++p) {
      row_sum[t] += confusion(t, p);
      col_sum[p] += confusion(t, p);
    }
    trace += confusion(t, t);
  }

  EvaluationReport report;
  report.confusion = confusion;
  report.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  report.per_class.resize(z);
  for (std::size_t c = 0; c < z; ++c) {
    const auto tp = static_cast<double>(confusion(c, c));
    const auto fp = static_cast<double>(col_sum[c]) - tp;
    const auto fn = static_cast<double>(row_sum[c]) - tp;
    const auto tn = static_cast<double>(total) - tp - fp - fn;
    auto& m = report.per_class[c];
    m.precision = ratio(tp, tp + fp);
    m.sensitivity = ratio(tp, tp + fn);
    m.specificity = ratio(tn, tn + fp);
    if (m.precision.defined && m.sensitivity.defined &&
        m.precision.value + m.sensitivity.value > 0.0) {
      m.f1 = {2.0 * m.precision.value * m.sensitivity.value /
                  (m.precision.value + m.sensitivity.value),
              true};
    } else {
      m.f1 = {0.0, false};
    }
    report.macro_precision += m.precision.value;
    report.macro_sensitivity += m.sensitivity.value;
    report.macro_specificity += m.specificity.value;
    report.macro_f1 += m.f1.value;
  }
  const auto zd = static_cast<double>(z);
  report.macro_precision /= zd;
  report.macro_sensitivity /= zd;
  report.macro_specificity /= zd;
  report.macro_f1 /= zd;
  return report;
}

std::string render_table(const EvaluationReport& report,
                         const std::vector<std::string>& class_names) {
  std::ostringstream out;
  char line[160];
  auto cell = [](const Metric& m) {
    char buf[16];
    if (m.defined) {
      std::snprintf(buf, sizeof buf, "%6.2f%%", 100.0 * m.value);
    } else {
      std::snprintf(buf, sizeof buf, "%7s", "n/a");
    }
    return std::string(buf);
  };
  std::snprintf(line, sizeof line, "%-20s %11s %11s %11s %11s\n", "class", "Precision",
                "Sensitivity", "Specificity", "F1");
  out << line;
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto& m = report.per_class[c];
    const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
    std::snprintf(line, sizeof line, "%-20.20s %11s %11s %11s %11s\n", name.c_str(),
                  cell(m.precision).c_str(), cell(m.sensitivity).c_str(),
                  cell(m.specificity).c_str(), cell(m.f1).c_str());
    out << line;
  }
  std::snprintf(line, sizeof line, "%-20s %10.2f%% %10.2f%% %10.2f%% %10.2f%%\n", "macro",
                100.0 * report.macro_precision, 100.0 * report.macro_sensitivity,
                100.0 * report.macro_specificity, 100.0 * report.macro_f1);
  out << line;
  std::snprintf(line, sizeof line, "accuracy %.2f%%  (n=%llu)\n", 100.0 * report.accuracy,
                static_cast<unsigned long long>(report.confusion.total()));
  out << line;
  return out.str();
}

void to_json(nlohmann::json& j, const ConfusionMatrix& confusion) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t t = 0; t < confusion.classes; ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t p = 0; p < confusion.classes; ++p) row.push_back(confusion(t, p));
    rows.push_back(row);
  }
  j = rows;
}

void from_json(const nlohmann::json& j, ConfusionMatrix& confusion) {
  confusion.classes = j.size();
  confusion.counts.clear();
  for (const auto& row : j) {
    if (row.size() != confusion.classes) throw FormatError("confusion matrix is not square");
    for (const auto& v : row) confusion.counts.push_back(v.get<std::uint64_t>());
  }
}

void to_json(nlohmann::json& j, const EvaluationReport& report) {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& m : report.per_class) {
    per_class.push_back({{"precision", metric_json(m.precision)},
                         {"sensitivity", metric_json(m.sensitivity)},
                         {"specificity", metric_json(m.specificity)},
                         {"f1", metric_json(m.f1)}});
  }
  j = nlohmann::json{{"confusion", report.confusion},
                     {"accuracy", report.accuracy},
                     {"macro_f1", report.macro_f1},
                     {"macro_precision", report.macro_precision},
                     {"macro_sensitivity", report.macro_sensitivity},
                     {"macro_specificity", report.macro_specificity},
                     {"per_class", per_class}};
}

void from_json(const nlohmann::json& j, EvaluationReport& report) {
  report.confusion = j.at("confusion").get<ConfusionMatrix>();
  report.accuracy = j.at("accuracy").get<double>();
  report.macro_f1 = j.at("macro_f1").get<double>();
  report.macro_precision = j.at("macro_precision").get<double>();
  report.macro_sensitivity = j.at("macro_sensitivity").get<double>();
  report.macro_specificity = j.at("macro_specificity").get<double>();
  report.per_class.clear();
  for (const auto& m : j.at("per_class")) {
    report.per_class.push_back({metric_from(m.at("precision")), metric_from(m.at("sensitivity")),
                                metric_from(m.at("specificity")), metric_from(m.at("f1"))});
  }
}

}  // namespace flick
