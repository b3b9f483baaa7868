// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "prosoctl/afp/train.hpp"

namespace prosoctl::afp {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t parameters_checked = 0;
};

inline constexpr double kGradCheckFloor = 1e-6;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(std::abs(analytic) + std::abs(numeric), kGradCheckFloor);
}

/// Mean L1 loss over a batch of examples.
inline double batch_loss(const AfpCheckpoint& ckpt, const std::vector<AfpExample>& batch) {
  double sum = 0.0;
  for (const auto& ex : batch) {
    const Matrix<double> y = forward_matrix(ckpt, ex.phone_rows, ex.speaker_row);
    sum += l1_loss(y, ex.target, ex.mask, nullptr);
  }
  return sum / static_cast<double>(batch.size());
}

inline AfpWeights batch_gradient(const AfpCheckpoint& ckpt, const std::vector<AfpExample>& batch) {
  AfpWeights grad =
      zero_weights(ckpt.dims, ckpt.phone_symbols.size(), ckpt.speaker_ids.size());
  ForwardCache cache;
  Matrix<double> dy;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    forward(ckpt, ex.phone_rows, ex.speaker_row, cache);
    l1_loss(cache.output, ex.target, ex.mask, &dy);
    for (double& v : dy.data()) v *= scale;
    backward(ckpt, cache, dy, grad);
  }
  return grad;
}

/// Compares backpropagated gradients against central differences for
/// every parameter.
inline GradCheckReport gradient_check(const AfpCheckpoint& ckpt,
                                      const std::vector<AfpExample>& batch,
                                      double epsilon = 1e-5) {
  if (batch.empty()) throw UsageError("gradient_check: empty batch");
  AfpWeights analytic = batch_gradient(ckpt, batch);
  AfpCheckpoint probe = ckpt;
  GradCheckReport report;
  std::vector<std::string> names;
  visit_tensors(ckpt.weights, [&](const std::string& name, const Matrix<double>&) {
    names.push_back(name);
  });
  auto params = tensor_list(probe.weights);
  auto grads = tensor_list(analytic);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& data = params[k]->data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + epsilon;
      const double up = batch_loss(probe, batch);
      data[i] = saved - epsilon;
      const double down = batch_loss(probe, batch);
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = grads[k]->data()[i];
      const double err = relative_error(a, numeric);
      ++report.parameters_checked;
      if (report.worst_tensor.empty() || err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_tensor = names[k];
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

/// A small random model with targets kept at least `min_gap` away from
/// the predictions, so no finite-difference probe straddles an L1 kink.
struct GradCheckCase {
  AfpCheckpoint checkpoint;
  std::vector<AfpExample> batch;
};

inline GradCheckCase random_gradcheck_case(std::uint64_t seed, double min_gap = 1e-3) {
  Rng rng(derive_seed(seed, "gradcheck:case"));
  GradCheckCase c;
  AfpCheckpoint& ckpt = c.checkpoint;
  ckpt.dims.phone_dim = 2 + rng.index(4);
  ckpt.dims.speaker_dim = 1 + rng.index(3);
  ckpt.dims.layer_units = {2 + rng.index(3), 2 + rng.index(3), 1 + rng.index(3),
                           1 + rng.index(3)};
  ckpt.dims.dense_units = 2 + rng.index(3);
  ckpt.phone_symbols = {kUnknownSymbol, "a", "b", "c", "d"};
  ckpt.speaker_ids = {"s0", "s1"};
  ckpt.seed = seed;
  ckpt.weights = init_weights(ckpt.dims, ckpt.phone_symbols.size(), ckpt.speaker_ids.size(), rng);
  // Spread biases so every gate path is exercised.
  for (auto& layer : ckpt.weights.lstm)
    for (auto& lw : layer) fill_uniform(lw.b, rng, 0.5);
  fill_uniform(ckpt.weights.dense_b, rng, 0.5);
  fill_uniform(ckpt.weights.proj_b, rng, 0.5);

  const std::size_t n_examples = 1 + rng.index(2);
  for (std::size_t e = 0; e < n_examples; ++e) {
    AfpExample ex;
    ex.utterance_id = "case" + std::to_string(e);
    const std::size_t n = 2 + rng.index(4);
    for (std::size_t t = 0; t < n; ++t) ex.phone_rows.push_back(rng.index(5));
    ex.speaker_row = rng.index(2);
    ex.mask.assign(n, true);
    if (n > 2 && rng.uniform() < 0.5) ex.mask[rng.index(n)] = false;
    const Matrix<double> y = forward_matrix(ckpt, ex.phone_rows, ex.speaker_row);
    ex.target = Matrix<double>(n, kOutputs);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double gap = rng.uniform(std::max(min_gap, 0.05), 1.0);
      ex.target.data()[i] = y.data()[i] + (rng.uniform() < 0.5 ? -gap : gap);
    }
    c.batch.push_back(std::move(ex));
  }
  return c;
}

/// Runs `configs` random cases derived from seed and returns the worst.
inline GradCheckReport gradient_check_suite(std::uint64_t seed, std::size_t configs,
                                            double epsilon = 1e-5) {
  GradCheckReport worst;
  for (std::size_t k = 0; k < configs; ++k) {
    const GradCheckCase c = random_gradcheck_case(derive_seed(seed, "gradcheck:" + std::to_string(k)));
    const GradCheckReport r = gradient_check(c.checkpoint, c.batch, epsilon);
    const std::size_t checked = worst.parameters_checked + r.parameters_checked;
    if (k == 0 || r.max_relative_error > worst.max_relative_error) worst = r;
    worst.parameters_checked = checked;
  }
  return worst;
}

}  // namespace prosoctl::afp
