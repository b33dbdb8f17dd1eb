#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "seedsel/corpus.hpp"
#include "seedsel/error.hpp"
#include "seedsel/textpipe.hpp"

namespace seedsel {

struct TrainConfig {
  double l2_lambda = 1e-4;
  std::size_t max_epochs = 200;
  double tolerance = 1e-7;
  bool fit_intercept = true;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(l2_lambda >= 0.0) || !std::isfinite(l2_lambda))
      throw ValidationError("l2_lambda must be a finite nonnegative number");
    if (max_epochs < 1) throw ValidationError("max_epochs must be at least 1");
    if (!(tolerance >= 0.0)) throw ValidationError("tolerance must be nonnegative");
  }
};

struct TrainingExample {
  SparseVector features;
  Label label;
};

struct TrainMeta {
  std::size_t epochs = 0;
  double final_loss = 0.0;
  std::size_t seed_size = 0;
  std::size_t positives = 0;
};

struct Model {
  std::vector<double> weights;
  double intercept = 0.0;
  TrainMeta meta;
  std::uint64_t vocabulary_hash = 0;
};

/// Overflow-safe logistic function.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

struct Objective {
  double loss = 0.0;
  std::vector<double> gradient;
  double intercept_gradient = 0.0;
};

/// Mean logistic loss plus (lambda / 2) * ||w||^2 and its gradient. The
/// intercept is not regularized.
inline Objective logistic_objective(std::span<const TrainingExample> examples,
                                    std::span<const double> weights, double intercept,
                                    double l2_lambda, bool with_gradient = true) {
  Objective obj;
  if (with_gradient) obj.gradient.assign(weights.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(examples.size());
  for (const auto& ex : examples) {
    const double z = ex.features.dot(weights) + intercept;
    const double y = ex.label == Label::positive ? 1.0 : 0.0;
    // -[y log p + (1-y) log(1-p)] = softplus(z) - y z
    obj.loss += softplus(z) - y * z;
    if (with_gradient) {
      const double r = (sigmoid(z) - y) * inv_n;
      for (const auto& e : ex.features.entries) obj.gradient[e.column] += r * e.weight;
      obj.intercept_gradient += r;
    }
  }
  obj.loss *= inv_n;
  double norm = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    norm += weights[j] * weights[j];
    if (with_gradient) obj.gradient[j] += l2_lambda * weights[j];
  }
  obj.loss += 0.5 * l2_lambda * norm;
  return obj;
}

/// Full-batch gradient descent with Armijo backtracking. The trial step
/// doubles after each accepted step and halves on each rejection.
inline Model train(std::span<const TrainingExample> examples, std::size_t dimension,
                   const TrainConfig& cfg = {}) {
  cfg.validate();
  if (examples.size() < 2) throw DegenerateSeedError("training needs at least 2 labeled examples");
  std::size_t positives = 0;
  for (const auto& ex : examples) {
    if (ex.label == Label::positive) ++positives;
    for (const auto& e : ex.features.entries)
      if (e.column >= dimension) throw ValidationError("feature column outside the vocabulary");
  }
  if (positives == 0) throw DegenerateSeedError("seed set has no positive documents");
  if (positives == examples.size()) throw DegenerateSeedError("seed set has no negative documents");

  Model model;
  model.weights.assign(dimension, 0.0);
  model.meta.seed_size = examples.size();
  model.meta.positives = positives;

  Objective current = logistic_objective(examples, model.weights, model.intercept, cfg.l2_lambda);
  if (!cfg.fit_intercept) current.intercept_gradient = 0.0;
  double step = 1.0;
  std::vector<double> trial(dimension);
  std::size_t epoch = 0;
  for (; epoch < cfg.max_epochs; ++epoch) {
    double grad_sq = current.intercept_gradient * current.intercept_gradient;
    for (double g : current.gradient) grad_sq += g * g;
    if (grad_sq == 0.0) break;

    bool accepted = false;
    double trial_b = model.intercept;
    Objective next;
    for (int attempt = 0; attempt < 60; ++attempt) {
      for (std::size_t j = 0; j < dimension; ++j)
        trial[j] = model.weights[j] - step * current.gradient[j];
      trial_b = model.intercept - step * current.intercept_gradient;
      next = logistic_objective(examples, trial, trial_b, cfg.l2_lambda, false);
      if (!std::isfinite(next.loss)) throw NumericalError("training loss became non-finite");
      if (next.loss <= current.loss - 1e-4 * step * grad_sq) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    if (next.loss > current.loss) throw std::logic_error("accepted step increased the training loss");

    const double previous_loss = current.loss;
    model.weights.swap(trial);
    model.intercept = trial_b;
    current = logistic_objective(examples, model.weights, model.intercept, cfg.l2_lambda);
    if (!cfg.fit_intercept) current.intercept_gradient = 0.0;
    step *= 2.0;
    const double decrease = (previous_loss - current.loss) / std::max(previous_loss, 1e-300);
    if (decrease < cfg.tolerance) {
      ++epoch;
      break;
    }
  }
  for (double w : model.weights)
    if (!std::isfinite(w)) throw NumericalError("non-finite weight after training");
  model.meta.epochs = epoch;
  model.meta.final_loss = current.loss;
  return model;
}

inline double score(const Model& model, const SparseVector& vec) {
  return sigmoid(vec.dot(model.weights) + model.intercept);
}

inline nlohmann::json model_to_json(const Model& model) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(model.vocabulary_hash));
  return nlohmann::json{
      {"vocabulary_hash", hash},
      {"intercept", model.intercept},
      {"weights", model.weights},
      {"train_meta",
       {{"epochs", model.meta.epochs},
        {"final_loss", model.meta.final_loss},
        {"seed_size", model.meta.seed_size},
        {"positives", model.meta.positives}}},
  };
}

/// Parses a model dump and checks it was trained against `vocab`.
inline Model model_from_json(const nlohmann::json& j, const Vocabulary& vocab) {
  Model m;
  try {
    m.vocabulary_hash = std::stoull(j.at("vocabulary_hash").get<std::string>(), nullptr, 16);
    m.intercept = j.at("intercept").get<double>();
    m.weights = j.at("weights").get<std::vector<double>>();
    const auto& meta = j.at("train_meta");
    m.meta.epochs = meta.at("epochs").get<std::size_t>();
    m.meta.final_loss = meta.at("final_loss").get<double>();
    m.meta.seed_size = meta.at("seed_size").get<std::size_t>();
    m.meta.positives = meta.at("positives").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model: ") + e.what());
  }
  if (m.vocabulary_hash != vocab.hash())
    throw ValidationError("model was trained against a different vocabulary");
  if (m.weights.size() != vocab.size()) throw ValidationError("model weight count does not match vocabulary");
  return m;
}

inline void save_model(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write model file " + path.string());
  out << model_to_json(model).dump() << '\n';
}

inline Model load_model(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed model: ") + e.what());
  }
  return model_from_json(j, vocab);
}

}  // namespace seedsel
