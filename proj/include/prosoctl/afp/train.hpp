// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "prosoctl/afp/model.hpp"
#include "prosoctl/corpus/feature_store.hpp"

namespace prosoctl::afp {

using corpus::FeatureRecord;

enum class BatchStrategy { one_utterance_shuffled };

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  BatchStrategy batch = BatchStrategy::one_utterance_shuffled;
  std::uint64_t max_iterations = 5000;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;
  // Learning rate decays linearly to learning_rate * lr_final_fraction.
  double lr_final_fraction = 1.0;
  std::uint64_t log_every = 100;
  AfpDims dims;
};

inline void validate_train_config(const TrainConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate))
    throw UsageError("train: learning_rate must be finite and >= 0");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
    throw UsageError("train: adam betas must lie in [0, 1)");
  if (!(cfg.adam_epsilon > 0.0)) throw UsageError("train: adam epsilon must be > 0");
  if (cfg.max_iterations < 1) throw UsageError("train: max_iterations must be >= 1");
  if (!(cfg.clip_norm > 0.0)) throw UsageError("train: clip norm must be > 0");
  if (!(cfg.lr_final_fraction >= 0.0 && cfg.lr_final_fraction <= 1.0))
    throw UsageError("train: lr_final_fraction must lie in [0, 1]");
}

/// One utterance prepared for the network.
struct AfpExample {
  std::string utterance_id;
  std::vector<std::size_t> phone_rows;
  std::size_t speaker_row = 0;
  Matrix<double> target;  // N x 3, boundary rows are 0
  std::vector<bool> mask;
};

inline AfpExample make_example(const AfpCheckpoint& ckpt, const FeatureRecord& record) {
  if (record.normalized.size() != record.phones.size())
    throw DataError("afp: record '" + record.utterance_id + "' has no normalized features");
  AfpExample ex;
  ex.utterance_id = record.utterance_id;
  ex.speaker_row = speaker_row(ckpt, record.speaker_id);
  ex.target = Matrix<double>(record.phones.size(), kOutputs);
  ex.mask.assign(record.phones.size(), true);
  for (std::size_t t = 0; t < record.phones.size(); ++t) {
    ex.phone_rows.push_back(phone_row(ckpt, record.phones[t]));
    if (record.phones[t].is_boundary()) continue;
    ex.target(t, 0) = record.normalized[t].f0;
    ex.target(t, 1) = record.normalized[t].energy;
    ex.target(t, 2) = record.normalized[t].duration;
  }
  return ex;
}

/// Untrained checkpoint whose vocabulary covers the given records.
inline AfpCheckpoint init_checkpoint(const std::vector<FeatureRecord>& records,
                                     const AfpDims& dims, std::uint64_t seed) {
  if (records.empty()) throw DataError("afp: empty training set");
  std::set<std::string> symbols, speakers, versions;
  for (const auto& r : records) {
    for (const auto& p : r.phones) symbols.insert(token_key(p));
    speakers.insert(r.speaker_id);
    versions.insert(r.stats_version);
  }
  if (versions.size() != 1)
    throw VersionError("afp: training records carry mixed stats versions");
  AfpCheckpoint ckpt;
  ckpt.dims = dims;
  ckpt.phone_symbols.push_back(kUnknownSymbol);
  ckpt.phone_symbols.insert(ckpt.phone_symbols.end(), symbols.begin(), symbols.end());
  ckpt.speaker_ids.assign(speakers.begin(), speakers.end());
  ckpt.seed = seed;
  ckpt.stats_version = *versions.begin();
  Rng rng(derive_seed(seed, "afp:init"));
  ckpt.weights = init_weights(dims, ckpt.phone_symbols.size(), ckpt.speaker_ids.size(), rng);
  return ckpt;
}

struct AdamState {
  AfpWeights m;
  AfpWeights v;
  std::uint64_t step = 0;
};

inline double global_norm(AfpWeights& grad) {
  double sq = 0.0;
  for (auto* t : tensor_list(grad))
    for (double g : t->data()) sq += g * g;
  return std::sqrt(sq);
}

inline void clip_gradients(AfpWeights& grad, double max_norm) {
  const double norm = global_norm(grad);
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  for (auto* t : tensor_list(grad))
    for (double& g : t->data()) g *= s;
}

inline void adam_step(AfpWeights& params, AfpWeights& grad, AdamState& state, double lr,
                      const TrainConfig& cfg) {
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto p = tensor_list(params);
  auto g = tensor_list(grad);
  auto m = tensor_list(state.m);
  auto v = tensor_list(state.v);
  for (std::size_t k = 0; k < p.size(); ++k) {
    auto& pd = p[k]->data();
    const auto& gd = g[k]->data();
    auto& md = m[k]->data();
    auto& vd = v[k]->data();
    for (std::size_t i = 0; i < pd.size(); ++i) {
      md[i] = cfg.beta1 * md[i] + (1.0 - cfg.beta1) * gd[i];
      vd[i] = cfg.beta2 * vd[i] + (1.0 - cfg.beta2) * gd[i] * gd[i];
      const double mhat = md[i] / c1;
      const double vhat = vd[i] / c2;
      pd[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
    }
  }
}

inline double scheduled_lr(const TrainConfig& cfg, std::uint64_t iteration) {
  if (cfg.lr_final_fraction == 1.0 || cfg.max_iterations <= 1) return cfg.learning_rate;
  const double progress =
      static_cast<double>(iteration) / static_cast<double>(cfg.max_iterations - 1);
  return cfg.learning_rate * (1.0 - (1.0 - cfg.lr_final_fraction) * progress);
}

struct TrainResult {
  AfpCheckpoint checkpoint;
  std::vector<double> loss_trace;  // one entry per iteration
};

/// Called every log_every iterations with the iteration count and the mean
/// loss since the previous call.
using TrainLogger = std::function<void(std::uint64_t iteration, double mean_loss)>;

inline TrainResult afp_train(const std::vector<FeatureRecord>& records, const TrainConfig& cfg,
                             const TrainLogger& log = {}) {
  validate_train_config(cfg);
  TrainResult result;
  result.checkpoint = init_checkpoint(records, cfg.dims, cfg.seed);
  AfpCheckpoint& ckpt = result.checkpoint;
  std::vector<AfpExample> examples;
  examples.reserve(records.size());
  for (const auto& r : records) examples.push_back(make_example(ckpt, r));

  const auto zeros = [&] {
    return zero_weights(ckpt.dims, ckpt.phone_symbols.size(), ckpt.speaker_ids.size());
  };
  AdamState adam{zeros(), zeros(), 0};
  AfpWeights grad = zeros();
  Rng order_rng(derive_seed(cfg.seed, "afp:order"));
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  ForwardCache cache;
  Matrix<double> dy;
  double window_sum = 0.0;
  std::uint64_t window_n = 0;
  result.loss_trace.reserve(cfg.max_iterations);

  for (std::uint64_t it = 0; it < cfg.max_iterations; ++it) {
    if (cursor == order.size()) {
      order = order_rng.permutation(examples.size());
      cursor = 0;
    }
    const AfpExample& ex = examples[order[cursor++]];
    forward(ckpt, ex.phone_rows, ex.speaker_row, cache);
    const double loss = l1_loss(cache.output, ex.target, ex.mask, &dy);
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "afp_train: non-finite loss at iteration " << it << " on utterance '"
          << ex.utterance_id << "'";
      throw NumericalError(msg.str());
    }
    for (auto* t : tensor_list(grad)) t->fill(0.0);
    backward(ckpt, cache, dy, grad);
    clip_gradients(grad, cfg.clip_norm);
    adam_step(ckpt.weights, grad, adam, scheduled_lr(cfg, it), cfg);
    ckpt.iteration = it + 1;
    result.loss_trace.push_back(loss);
    window_sum += loss;
    ++window_n;
    if (log && cfg.log_every > 0 && (it + 1) % cfg.log_every == 0) {
      log(it + 1, window_sum / static_cast<double>(window_n));
      window_sum = 0.0;
      window_n = 0;
    }
  }
  if (!is_finite(ckpt.weights))
    throw NumericalError("afp_train: weights became non-finite");
  return result;
}

/// L1 over all token components of the records, pooled.
inline double afp_evaluate(const AfpCheckpoint& ckpt, const std::vector<FeatureRecord>& records) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : records) {
    const AfpExample ex = make_example(ckpt, r);
    const Matrix<double> y = forward_matrix(ckpt, ex.phone_rows, ex.speaker_row);
    const double loss = l1_loss(y, ex.target, ex.mask, nullptr);
    sum += loss * static_cast<double>(y.size());
    count += y.size();
  }
  if (count == 0) throw DataError("afp_evaluate: no records");
  return sum / static_cast<double>(count);
}

}  // namespace prosoctl::afp
