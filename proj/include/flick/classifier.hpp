#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flick/matrix.hpp"
#include "json.hpp"

namespace flick {

/// softmax(relu(x W1 + b1) W2 + b2). W1 is d x h, W2 is h x c, row-major.
struct ClassifierModel {
  std::size_t d = 0;
  std::size_t h = 0;
  std::size_t c = 0;
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
  std::uint64_t seed = 0;
  std::string profile_name;

  friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;
};

/// Adam hyperparameters plus batching. Defaults are the proxy profile.
struct TrainConfig {
  double learning_rate = 1e-3;
  double epsilon = 1e-8;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t shuffle_seed = 0;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> epoch_loss;
  double final_loss = 0.0;
  std::size_t adam_steps = 0;
};

struct TrainResult {
  ClassifierModel model;
  TrainHistory history;
};

/// Same shapes as the model's parameters.
struct Gradients {
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
};

/// Glorot-uniform weights, zero biases.
ClassifierModel init_classifier(std::size_t d, std::size_t h, std::size_t c,
                                std::uint64_t seed);

Matrix forward(const ClassifierModel& model, const Matrix& batch);

/// Mean negative log-likelihood; probabilities are clamped to >= 1e-12.
double cross_entropy(const Matrix& probs, std::span<const int> targets);

/// Loss and its gradient at the current parameters.
double loss_and_gradients(const ClassifierModel& model, const Matrix& batch,
                          std::span<const int> targets, Gradients& grads);

/// Mini-batch Adam on cross-entropy. Moments start at zero.
TrainResult train(const ClassifierModel& model, const Matrix& inputs,
                  std::span<const int> targets, const TrainConfig& config);

/// Row-wise argmax of forward(); lowest class index wins ties.
std::vector<int> predict(const ClassifierModel& model, const Matrix& inputs);

/// Keeps (W1, b1) and reinitializes the output layer for `class_count` classes.
ClassifierModel transfer_init(const ClassifierModel& source, std::size_t class_count,
                              std::uint64_t seed);

void validate(const ClassifierModel& model);

void to_json(nlohmann::json& j, const ClassifierModel& model);
void from_json(const nlohmann::json& j, ClassifierModel& model);
void to_json(nlohmann::json& j, const TrainConfig& config);
void from_json(const nlohmann::json& j, TrainConfig& config);
void to_json(nlohmann::json& j, const TrainHistory& history);
void from_json(const nlohmann::json& j, TrainHistory& history);

}  // namespace flick
