#include "flick/classifier.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "flick/errors.hpp"
#include "flick/random.hpp"

namespace flick {

namespace {

constexpr double kProbFloor = 1e-12;

void fill_glorot(Matrix& weights, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& w : weights.values) w = rng.uniform(-bound, bound);
}

void check_input(const ClassifierModel& model, const Matrix& batch) {
  if (batch.cols != model.d) {
    throw ArgumentError("input dimension " + std::to_string(batch.cols) +
                        " does not match model d=" + std::to_string(model.d));
  }
}

void check_targets(std::span<const int> targets, std::size_t rows, std::size_t classes) {
  if (targets.size() != rows) {
    throw ArgumentError("target count " + std::to_string(targets.size()) +
                        " does not match row count " + std::to_string(rows));
  }
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= classes) {
      throw ArgumentError("target " + std::to_string(t) + " outside [0, " +
                          std::to_string(classes) + ")");
    }
  }
}

// Hidden pre-activations (m x h).
Matrix hidden_layer(const ClassifierModel& model, const Matrix& batch) {
  Matrix z(batch.rows, model.h);
  for (std::size_t i = 0; i < batch.rows; ++i) {
    auto out = z.row(i);
    std::copy(model.b1.begin(), model.b1.end(), out.begin());
    for (std::size_t k = 0; k < model.d; ++k) {
      const double x = batch(i, k);
      if (x == 0.0) continue;
      const auto w = model.w1.row(k);
      for (std::size_t j = 0; j < model.h; ++j) out[j] += x * w[j];
    }
  }
  return z;
}

Matrix output_probs(const ClassifierModel& model, const Matrix& hidden_pre) {
  Matrix probs(hidden_pre.rows, model.c);
  for (std::size_t i = 0; i < hidden_pre.rows; ++i) {
    auto out = probs.row(i);
    std::copy(model.b2.begin(), model.b2.end(), out.begin());
    const auto z = hidden_pre.row(i);
    for (std::size_t k = 0; k < model.h; ++k) {
      const double a = z[k] < 0.0 ? 0.0 : z[k];  // NaN passes through
      if (a == 0.0) continue;
      const auto w = model.w2.row(k);
      for (std::size_t j = 0; j < model.c; ++j) out[j] += a * w[j];
    }
    const double peak = *std::max_element(out.begin(), out.end());
    double total = 0.0;
    for (double& v : out) {
      v = std::exp(v - peak);
      total += v;
    }
    for (double& v : out) v /= total;
  }
  return probs;
}

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& state,
               const TrainConfig& cfg, double correction1, double correction2) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be positive");
  if (!(epsilon > 0.0)) throw ArgumentError("epsilon must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ArgumentError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ArgumentError("beta2 must lie in [0, 1)");
  if (batch_size == 0) throw ArgumentError("batch_size must be at least 1");
  if (epochs == 0) throw ArgumentError("epochs must be at least 1");
}

void validate(const ClassifierModel& model) {
  if (model.d == 0 || model.h == 0) throw ArgumentError("classifier needs d >= 1 and h >= 1");
  if (model.c < 2) {
    throw ArgumentError("classifier needs at least 2 classes, got " + std::to_string(model.c));
  }
  if (model.w1.rows != model.d || model.w1.cols != model.h ||
      model.w1.values.size() != model.d * model.h || model.b1.size() != model.h ||
      model.w2.rows != model.h || model.w2.cols != model.c ||
      model.w2.values.size() != model.h * model.c || model.b2.size() != model.c) {
    throw ArgumentError("classifier parameter shapes are inconsistent");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(model.w1.values.begin(), model.w1.values.end(), finite) ||
      !std::all_of(model.b1.begin(), model.b1.end(), finite) ||
      !std::all_of(model.w2.values.begin(), model.w2.values.end(), finite) ||
      !std::all_of(model.b2.begin(), model.b2.end(), finite)) {
    throw NumericError("classifier has non-finite parameters");
  }
}

ClassifierModel init_classifier(std::size_t d, std::size_t h, std::size_t c,
                                std::uint64_t seed) {
  if (d == 0 || h == 0) throw ArgumentError("classifier needs d >= 1 and h >= 1");
  if (c < 2) throw ArgumentError("classifier needs at least 2 classes, got " + std::to_string(c));
  Rng rng(seed);
  ClassifierModel model;
  model.d = d;
  model.h = h;
  model.c = c;
  model.seed = seed;
  model.w1 = Matrix(d, h);
  model.b1.assign(h, 0.0);
  model.w2 = Matrix(h, c);
  model.b2.assign(c, 0.0);
  fill_glorot(model.w1, d, h, rng);
  fill_glorot(model.w2, h, c, rng);
  return model;
}

Matrix forward(const ClassifierModel& model, const Matrix& batch) {
  check_input(model, batch);
  return output_probs(model, hidden_layer(model, batch));
}

double cross_entropy(const Matrix& probs, std::span<const int> targets) {
  check_targets(targets, probs.rows, probs.cols);
  if (probs.rows == 0) throw ArgumentError("cross_entropy of an empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.rows; ++i) {
    total -= std::log(std::max(probs(i, static_cast<std::size_t>(targets[i])), kProbFloor));
  }
  return total / static_cast<double>(probs.rows);
}

double loss_and_gradients(const ClassifierModel& model, const Matrix& batch,
                          std::span<const int> targets, Gradients& grads) {
  check_input(model, batch);
  check_targets(targets, batch.rows, model.c);
  if (batch.rows == 0) throw ArgumentError("gradient of an empty batch");

  const Matrix pre = hidden_layer(model, batch);
  const Matrix probs = output_probs(model, pre);
  const double loss = cross_entropy(probs, targets);
  const double scale = 1.0 / static_cast<double>(batch.rows);

  grads.w1 = Matrix(model.d, model.h);
  grads.b1.assign(model.h, 0.0);
  grads.w2 = Matrix(model.h, model.c);
  grads.b2.assign(model.c, 0.0);

  std::vector<double> delta_out(model.c);
  std::vector<double> delta_hidden(model.h);
  for (std::size_t i = 0; i < batch.rows; ++i) {
    for (std::size_t j = 0; j < model.c; ++j) delta_out[j] = probs(i, j) * scale;
    delta_out[static_cast<std::size_t>(targets[i])] -= scale;

    const auto z = pre.row(i);
    for (std::size_t k = 0; k < model.h; ++k) {
      const auto w = model.w2.row(k);
      double back = 0.0;
      for (std::size_t j = 0; j < model.c; ++j) back += delta_out[j] * w[j];
      delta_hidden[k] = z[k] > 0.0 ? back : 0.0;
      if (z[k] > 0.0) {
        auto g = grads.w2.row(k);
        for (std::size_t j = 0; j < model.c; ++j) g[j] += z[k] * delta_out[j];
      }
    }
    for (std::size_t j = 0; j < model.c; ++j) grads.b2[j] += delta_out[j];
    for (std::size_t k = 0; k < model.h; ++k) grads.b1[k] += delta_hidden[k];
    for (std::size_t r = 0; r < model.d; ++r) {
      const double x = batch(i, r);
      if (x == 0.0) continue;
      auto g = grads.w1.row(r);
      for (std::size_t k = 0; k < model.h; ++k) g[k] += x * delta_hidden[k];
    }
  }
  return loss;
}

TrainResult train(const ClassifierModel& model, const Matrix& inputs,
                  std::span<const int> targets, const TrainConfig& config) {
  config.validate();
  validate(model);
  if (inputs.rows == 0) throw ArgumentError("training data is empty");
  check_input(model, inputs);
  check_targets(targets, inputs.rows, model.c);

  TrainResult result{model, {}};
  ClassifierModel& m = result.model;
  std::array<std::span<double>, 4> params = {std::span<double>(m.w1.values), std::span<double>(m.b1),
                                             std::span<double>(m.w2.values), std::span<double>(m.b2)};
  std::array<AdamMoments, 4> moments;
  for (std::size_t p = 0; p < params.size(); ++p) {
    moments[p].m.assign(params[p].size(), 0.0);
    moments[p].v.assign(params[p].size(), 0.0);
  }

  Rng rng(config.shuffle_seed);
  std::vector<std::size_t> order(inputs.rows);
  std::iota(order.begin(), order.end(), 0);
  Gradients grads;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double weighted_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      Matrix batch(stop - start, inputs.cols);
      std::vector<int> batch_targets(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const auto src = inputs.row(order[i]);
        std::copy(src.begin(), src.end(), batch.row(i - start).begin());
        batch_targets[i - start] = targets[order[i]];
      }

      const double loss = loss_and_gradients(m, batch, batch_targets, grads);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss in epoch " + std::to_string(epoch + 1));
      }
      weighted_loss += loss * static_cast<double>(stop - start);

      ++step;
      const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      const std::array<std::span<const double>, 4> g = {
          std::span<const double>(grads.w1.values), std::span<const double>(grads.b1),
          std::span<const double>(grads.w2.values), std::span<const double>(grads.b2)};
      for (std::size_t p = 0; p < params.size(); ++p) {
        adam_step(params[p], g[p], moments[p], config, correction1, correction2);
      }
    }
    const double epoch_loss = weighted_loss / static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) {
      throw NumericError("non-finite loss in epoch " + std::to_string(epoch + 1));
    }
    result.history.epoch_loss.push_back(epoch_loss);
  }
  result.history.final_loss = result.history.epoch_loss.back();
  result.history.adam_steps = step;
  return result;
}

std::vector<int> predict(const ClassifierModel& model, const Matrix& inputs) {
  const Matrix probs = forward(model, inputs);
  std::vector<int> out(probs.rows);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    const auto row = probs.row(i);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

ClassifierModel transfer_init(const ClassifierModel& source, std::size_t class_count,
                              std::uint64_t seed) {
  if (class_count < 2) {
    throw ArgumentError("transfer target needs at least 2 classes, got " +
                        std::to_string(class_count));
  }
  validate(source);
  ClassifierModel out;
  out.d = source.d;
  out.h = source.h;
  out.c = class_count;
  out.seed = seed;
  out.profile_name = source.profile_name;
  out.w1 = source.w1;
  out.b1 = source.b1;
  out.w2 = Matrix(source.h, class_count);
  out.b2.assign(class_count, 0.0);
  Rng rng(seed);
  fill_glorot(out.w2, source.h, class_count, rng);
  return out;
}

void to_json(nlohmann::json& j, const ClassifierModel& model) {
  j = nlohmann::json{{"d", model.d},
                     {"h", model.h},
                     {"c", model.c},
                     {"W1", model.w1.values},
                     {"b1", model.b1},
                     {"W2", model.w2.values},
                     {"b2", model.b2},
                     {"seed", model.seed},
                     {"profile_name", model.profile_name}};
}

void from_json(const nlohmann::json& j, ClassifierModel& model) {
  try {
    model.d = j.at("d").get<std::size_t>();
    model.h = j.at("h").get<std::size_t>();
    model.c = j.at("c").get<std::size_t>();
    model.w1 = Matrix(model.d, model.h);
    model.w1.values = j.at("W1").get<std::vector<double>>();
    model.b1 = j.at("b1").get<std::vector<double>>();
    model.w2 = Matrix(model.h, model.c);
    model.w2.values = j.at("W2").get<std::vector<double>>();
    model.b2 = j.at("b2").get<std::vector<double>>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.profile_name = j.value("profile_name", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("classifier JSON: ") + e.what());
  }
  validate(model);
}

void to_json(nlohmann::json& j, const TrainConfig& config) {
  j = nlohmann::json{{"learning_rate", config.learning_rate},
                     {"epsilon", config.epsilon},
                     {"batch_size", config.batch_size},
                     {"epochs", config.epochs},
                     {"beta1", config.beta1},
                     {"beta2", config.beta2},
                     {"shuffle_seed", config.shuffle_seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& config) {
  try {
    config.learning_rate = j.value("learning_rate", config.learning_rate);
    config.epsilon = j.value("epsilon", config.epsilon);
    config.batch_size = j.value("batch_size", config.batch_size);
    config.epochs = j.value("epochs", config.epochs);
    config.beta1 = j.value("beta1", config.beta1);
    config.beta2 = j.value("beta2", config.beta2);
    config.shuffle_seed = j.value("shuffle_seed", config.shuffle_seed);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("train config JSON: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const TrainHistory& history) {
  j = nlohmann::json{{"epoch_loss", history.epoch_loss},
                     {"final_loss", history.final_loss},
                     {"adam_steps", history.adam_steps}};
}

void from_json(const nlohmann::json& j, TrainHistory& history) {
  history.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
  history.final_loss = j.at("final_loss").get<double>();
  history.adam_steps = j.at("adam_steps").get<std::size_t>();
}

}  // namespace flick
