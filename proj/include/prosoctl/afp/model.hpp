// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "prosoctl/common.hpp"
#include "prosoctl/corpus/phone.hpp"
#include "prosoctl/features/vector.hpp"
#include "prosoctl/matrix.hpp"

namespace prosoctl::afp {

using corpus::PhoneToken;

inline constexpr int kOutputs = 3;
inline constexpr const char* kUnknownSymbol = "<unk>";

/// Layer sizes. `layer_units` lists units per direction for each stacked
/// bidirectional layer, bottom first.
struct AfpDims {
  std::size_t phone_dim = 64;
  std::size_t speaker_dim = 16;
  std::vector<std::size_t> layer_units{32, 32, 16, 16};
  std::size_t dense_units = 16;

  std::size_t input_dim() const { return phone_dim + speaker_dim; }
  std::size_t layer_input(std::size_t l) const {
    return l == 0 ? input_dim() : 2 * layer_units[l - 1];
  }
  std::size_t top_dim() const { return 2 * layer_units.back(); }

  friend bool operator==(const AfpDims&, const AfpDims&) = default;
};

// Gate rows are stacked i, f, g, o.
struct LstmWeights {
  Matrix<double> w;  // 4h x in
  Matrix<double> u;  // 4h x h
  Matrix<double> b;  // 4h x 1

  friend bool operator==(const LstmWeights&, const LstmWeights&) = default;
};

struct AfpWeights {
  Matrix<double> phone_embedding;    // vocab x phone_dim, row 0 is UNK
  Matrix<double> speaker_embedding;  // speakers x speaker_dim
  std::vector<std::array<LstmWeights, 2>> lstm;  // [layer][forward, backward]
  Matrix<double> dense_w;  // dense x top
  Matrix<double> dense_b;  // dense x 1
  Matrix<double> proj_w;   // 3 x dense
  Matrix<double> proj_b;   // 3 x 1

  friend bool operator==(const AfpWeights&, const AfpWeights&) = default;
};

inline std::string lstm_tensor_name(std::size_t layer, int dir, const char* part) {
  return "lstm" + std::to_string(layer) + (dir == 0 ? ".fwd." : ".bwd.") + part;
}

/// Calls fn(name, tensor) for every tensor in a fixed order.
template <class W, class Fn>
void visit_tensors(W& weights, Fn&& fn) {
  fn(std::string("phone_embedding"), weights.phone_embedding);
  fn(std::string("speaker_embedding"), weights.speaker_embedding);
  for (std::size_t l = 0; l < weights.lstm.size(); ++l) {
    for (int d = 0; d < 2; ++d) {
      fn(lstm_tensor_name(l, d, "w"), weights.lstm[l][d].w);
      fn(lstm_tensor_name(l, d, "u"), weights.lstm[l][d].u);
      fn(lstm_tensor_name(l, d, "b"), weights.lstm[l][d].b);
    }
  }
  fn(std::string("dense.w"), weights.dense_w);
  fn(std::string("dense.b"), weights.dense_b);
  fn(std::string("proj.w"), weights.proj_w);
  fn(std::string("proj.b"), weights.proj_b);
}

inline std::vector<Matrix<double>*> tensor_list(AfpWeights& weights) {
  std::vector<Matrix<double>*> out;
  visit_tensors(weights, [&](const std::string&, Matrix<double>& m) { out.push_back(&m); });
  return out;
}

inline std::size_t parameter_count(const AfpWeights& weights) {
  std::size_t n = 0;
  visit_tensors(weights, [&](const std::string&, const Matrix<double>& m) { n += m.size(); });
  return n;
}

/// Zero-filled weights with the shapes implied by dims.
inline AfpWeights zero_weights(const AfpDims& dims, std::size_t vocab, std::size_t speakers) {
  if (dims.layer_units.empty()) throw UsageError("afp: at least one recurrent layer required");
  AfpWeights w;
  w.phone_embedding = Matrix<double>(vocab, dims.phone_dim);
  w.speaker_embedding = Matrix<double>(speakers, dims.speaker_dim);
  for (std::size_t l = 0; l < dims.layer_units.size(); ++l) {
    const std::size_t h = dims.layer_units[l];
    const std::size_t in = dims.layer_input(l);
    std::array<LstmWeights, 2> pair;
    for (auto& lw : pair) {
      lw.w = Matrix<double>(4 * h, in);
      lw.u = Matrix<double>(4 * h, h);
      lw.b = Matrix<double>(4 * h, 1);
    }
    w.lstm.push_back(std::move(pair));
  }
  w.dense_w = Matrix<double>(dims.dense_units, dims.top_dim());
  w.dense_b = Matrix<double>(dims.dense_units, 1);
  w.proj_w = Matrix<double>(kOutputs, dims.dense_units);
  w.proj_b = Matrix<double>(kOutputs, 1);
  return w;
}

inline void fill_uniform(Matrix<double>& m, Rng& rng, double bound) {
  for (double& v : m.data()) v = rng.uniform(-bound, bound);
}

/// Embeddings uniform in +-1, matrices uniform in +-1/sqrt(fan_in), forget
/// gate bias 1, other biases 0.
inline AfpWeights init_weights(const AfpDims& dims, std::size_t vocab, std::size_t speakers,
                               Rng& rng) {
  AfpWeights w = zero_weights(dims, vocab, speakers);
  fill_uniform(w.phone_embedding, rng, 1.0);
  fill_uniform(w.speaker_embedding, rng, 1.0);
  for (std::size_t l = 0; l < w.lstm.size(); ++l) {
    const std::size_t h = dims.layer_units[l];
    for (auto& lw : w.lstm[l]) {
      fill_uniform(lw.w, rng, 1.0 / std::sqrt(static_cast<double>(lw.w.cols())));
      fill_uniform(lw.u, rng, 1.0 / std::sqrt(static_cast<double>(h)));
      for (std::size_t j = 0; j < h; ++j) lw.b(h + j, 0) = 1.0;
    }
  }
  fill_uniform(w.dense_w, rng, 1.0 / std::sqrt(static_cast<double>(w.dense_w.cols())));
  fill_uniform(w.proj_w, rng, 1.0 / std::sqrt(static_cast<double>(w.proj_w.cols())));
  return w;
}

/// Everything needed to run the predictor.
struct AfpCheckpoint {
  int format_version = 1;
  AfpDims dims;
  std::vector<std::string> phone_symbols;  // row order, [0] is UNK
  std::vector<std::string> speaker_ids;
  AfpWeights weights;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
  std::string stats_version;

  friend bool operator==(const AfpCheckpoint&, const AfpCheckpoint&) = default;
};

/// Vocabulary key of a token. Boundary tokens share one key per kind.
inline std::string token_key(const PhoneToken& token) {
  if (token.is_boundary()) return "<" + corpus::to_string(token.kind) + ">";
  return token.symbol;
}

inline bool is_finite(const AfpWeights& weights) {
  bool ok = true;
  visit_tensors(weights, [&](const std::string&, const Matrix<double>& m) {
    for (double v : m.data()) ok = ok && std::isfinite(v);
  });
  return ok;
}

inline void validate_checkpoint(const AfpCheckpoint& ckpt) {
  if (ckpt.phone_symbols.empty() || ckpt.phone_symbols[0] != kUnknownSymbol)
    throw DataError("afp checkpoint: phone vocabulary must start with " +
                    std::string(kUnknownSymbol));
  if (ckpt.speaker_ids.empty()) throw DataError("afp checkpoint: no speakers");
  const AfpWeights expected =
      zero_weights(ckpt.dims, ckpt.phone_symbols.size(), ckpt.speaker_ids.size());
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> want, have;
  visit_tensors(expected, [&](const std::string& name, const Matrix<double>& m) {
    want.push_back({name, {m.rows(), m.cols()}});
  });
  if (ckpt.weights.lstm.size() != ckpt.dims.layer_units.size())
    throw DataError("afp checkpoint: layer count does not match dims");
  visit_tensors(ckpt.weights, [&](const std::string& name, const Matrix<double>& m) {
    have.push_back({name, {m.rows(), m.cols()}});
  });
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i] != have[i]) {
      throw DataError("afp checkpoint: tensor '" + want[i].first + "' has shape " +
                      std::to_string(have[i].second.first) + "x" +
                      std::to_string(have[i].second.second) + ", expected " +
                      std::to_string(want[i].second.first) + "x" +
                      std::to_string(want[i].second.second));
    }
  }
  if (!is_finite(ckpt.weights)) throw DataError("afp checkpoint: non-finite weight");
}

inline std::size_t phone_row(const AfpCheckpoint& ckpt, const PhoneToken& token) {
  const std::string key = token_key(token);
  for (std::size_t i = 1; i < ckpt.phone_symbols.size(); ++i)
    if (ckpt.phone_symbols[i] == key) return i;
  return 0;
}

inline std::size_t speaker_row(const AfpCheckpoint& ckpt, const std::string& speaker_id) {
  for (std::size_t i = 0; i < ckpt.speaker_ids.size(); ++i)
    if (ckpt.speaker_ids[i] == speaker_id) return i;
  throw DataError("afp: unknown speaker '" + speaker_id + "' (no embedding row)");
}

/// Activations kept for backpropagation.
struct ForwardCache {
  std::vector<std::size_t> phone_rows;
  std::size_t speaker_row = 0;
  std::vector<Matrix<double>> inputs;  // inputs[l] is N x layer_input(l); back() is the top
  // gates[l][d] is N x 4h holding activated i, f, g, o; cells[l][d] is N x h.
  std::vector<std::array<Matrix<double>, 2>> gates;
  std::vector<std::array<Matrix<double>, 2>> cells;
  Matrix<double> dense;   // N x dense, after tanh
  Matrix<double> output;  // N x 3
};

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void lstm_direction(const LstmWeights& lw, const Matrix<double>& x, int dir,
                           std::size_t h, Matrix<double>& out, std::size_t out_offset,
                           Matrix<double>& gates, Matrix<double>& cells) {
  const std::size_t n = x.rows();
  const std::size_t in = x.cols();
  gates = Matrix<double>(n, 4 * h);
  cells = Matrix<double>(n, h);
  std::vector<double> z(4 * h);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t t = dir == 0 ? s : n - 1 - s;
    const bool has_prev = s > 0;
    const std::size_t tp = dir == 0 ? t - 1 : t + 1;
    const double* xt = &x(t, 0);
    for (std::size_t r = 0; r < 4 * h; ++r) {
      double acc = lw.b(r, 0);
      const double* wr = &lw.w(r, 0);
      for (std::size_t c = 0; c < in; ++c) acc += wr[c] * xt[c];
      if (has_prev) {
        const double* ur = &lw.u(r, 0);
        for (std::size_t c = 0; c < h; ++c) acc += ur[c] * out(tp, out_offset + c);
      }
      z[r] = acc;
    }
    for (std::size_t j = 0; j < h; ++j) {
      const double i = sigmoid(z[j]);
      const double f = sigmoid(z[h + j]);
      const double g = std::tanh(z[2 * h + j]);
      const double o = sigmoid(z[3 * h + j]);
      const double c_prev = has_prev ? cells(tp, j) : 0.0;
      const double c = f * c_prev + i * g;
      gates(t, j) = i;
      gates(t, h + j) = f;
      gates(t, 2 * h + j) = g;
      gates(t, 3 * h + j) = o;
      cells(t, j) = c;
      out(t, out_offset + j) = o * std::tanh(c);
    }
  }
}

// Accumulates parameter gradients and adds the input gradient into dx.
inline void lstm_direction_backward(const LstmWeights& lw, LstmWeights& grad,
                                    const Matrix<double>& x, const Matrix<double>& out,
                                    std::size_t out_offset, const Matrix<double>& gates,
                                    const Matrix<double>& cells, const Matrix<double>& dout,
                                    int dir, std::size_t h, Matrix<double>& dx) {
  const std::size_t n = x.rows();
  const std::size_t in = x.cols();
  std::vector<double> dh_next(h, 0.0), dc_next(h, 0.0), dz(4 * h);
  for (std::size_t step = n; step-- > 0;) {
    const std::size_t t = dir == 0 ? step : n - 1 - step;
    const bool has_prev = step > 0;
    const std::size_t tp = dir == 0 ? t - 1 : t + 1;
    for (std::size_t j = 0; j < h; ++j) {
      const double i = gates(t, j);
      const double f = gates(t, h + j);
      const double g = gates(t, 2 * h + j);
      const double o = gates(t, 3 * h + j);
      const double c = cells(t, j);
      const double tc = std::tanh(c);
      const double c_prev = has_prev ? cells(tp, j) : 0.0;
      const double dh = dout(t, out_offset + j) + dh_next[j];
      const double dc = dh * o * (1.0 - tc * tc) + dc_next[j];
      dz[j] = dc * g * i * (1.0 - i);
      dz[h + j] = dc * c_prev * f * (1.0 - f);
      dz[2 * h + j] = dc * i * (1.0 - g * g);
      dz[3 * h + j] = dh * tc * o * (1.0 - o);
      dc_next[j] = dc * f;
    }
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    const double* xt = &x(t, 0);
    double* dxt = &dx(t, 0);
    for (std::size_t r = 0; r < 4 * h; ++r) {
      const double d = dz[r];
      if (d == 0.0) continue;
      grad.b(r, 0) += d;
      double* gw = &grad.w(r, 0);
      const double* wr = &lw.w(r, 0);
      for (std::size_t c = 0; c < in; ++c) {
        gw[c] += d * xt[c];
        dxt[c] += d * wr[c];
      }
      if (has_prev) {
        double* gu = &grad.u(r, 0);
        const double* ur = &lw.u(r, 0);
        for (std::size_t c = 0; c < h; ++c) {
          gu[c] += d * out(tp, out_offset + c);
          dh_next[c] += d * ur[c];
        }
      }
    }
  }
}

}  // namespace detail

/// Forward pass over already-resolved embedding rows. Fills cache.
inline void forward(const AfpCheckpoint& ckpt, const std::vector<std::size_t>& phone_rows,
                    std::size_t spk_row, ForwardCache& cache) {
  const AfpDims& dims = ckpt.dims;
  const AfpWeights& w = ckpt.weights;
  const std::size_t n = phone_rows.size();
  if (n == 0) throw DataError("afp: empty phone sequence");
  cache.phone_rows = phone_rows;
  cache.speaker_row = spk_row;
  const std::size_t layers = dims.layer_units.size();
  cache.inputs.assign(layers + 1, {});
  cache.gates.assign(layers, {});
  cache.cells.assign(layers, {});

  Matrix<double>& x0 = cache.inputs[0];
  x0 = Matrix<double>(n, dims.input_dim());
  for (std::size_t t = 0; t < n; ++t) {
    const auto pe = w.phone_embedding.row(phone_rows[t]);
    const auto se = w.speaker_embedding.row(spk_row);
    std::copy(pe.begin(), pe.end(), &x0(t, 0));
    std::copy(se.begin(), se.end(), &x0(t, dims.phone_dim));
  }
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t h = dims.layer_units[l];
    cache.inputs[l + 1] = Matrix<double>(n, 2 * h);
    for (int d = 0; d < 2; ++d) {
      detail::lstm_direction(w.lstm[l][d], cache.inputs[l], d, h, cache.inputs[l + 1],
                             d == 0 ? 0 : h, cache.gates[l][d], cache.cells[l][d]);
    }
  }
  const Matrix<double>& top = cache.inputs[layers];
  cache.dense = Matrix<double>(n, dims.dense_units);
  cache.output = Matrix<double>(n, kOutputs);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t r = 0; r < dims.dense_units; ++r) {
      double acc = w.dense_b(r, 0);
      for (std::size_t c = 0; c < top.cols(); ++c) acc += w.dense_w(r, c) * top(t, c);
      cache.dense(t, r) = std::tanh(acc);
    }
    for (int k = 0; k < kOutputs; ++k) {
      double acc = w.proj_b(k, 0);
      for (std::size_t c = 0; c < dims.dense_units; ++c)
        acc += w.proj_w(k, c) * cache.dense(t, c);
      cache.output(t, k) = acc;
    }
  }
}

/// Backpropagates d loss / d output (N x 3) and accumulates into grad, which
/// must already have the checkpoint's shapes.
inline void backward(const AfpCheckpoint& ckpt, const ForwardCache& cache,
                     const Matrix<double>& doutput, AfpWeights& grad) {
  const AfpDims& dims = ckpt.dims;
  const AfpWeights& w = ckpt.weights;
  const std::size_t n = cache.output.rows();
  const std::size_t layers = dims.layer_units.size();
  Matrix<double> dtop(n, dims.top_dim());
  const Matrix<double>& top = cache.inputs[layers];
  std::vector<double> du(dims.dense_units);
  for (std::size_t t = 0; t < n; ++t) {
    std::fill(du.begin(), du.end(), 0.0);
    for (int k = 0; k < kOutputs; ++k) {
      const double d = doutput(t, k);
      grad.proj_b(k, 0) += d;
      for (std::size_t c = 0; c < dims.dense_units; ++c) {
        grad.proj_w(k, c) += d * cache.dense(t, c);
        du[c] += d * w.proj_w(k, c);
      }
    }
    for (std::size_t r = 0; r < dims.dense_units; ++r) {
      const double a = cache.dense(t, r);
      const double d = du[r] * (1.0 - a * a);
      grad.dense_b(r, 0) += d;
      for (std::size_t c = 0; c < top.cols(); ++c) {
        grad.dense_w(r, c) += d * top(t, c);
        dtop(t, c) += d * w.dense_w(r, c);
      }
    }
  }
  Matrix<double> dout = std::move(dtop);
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t h = dims.layer_units[l];
    Matrix<double> dx(n, dims.layer_input(l));
    for (int d = 0; d < 2; ++d) {
      detail::lstm_direction_backward(w.lstm[l][d], grad.lstm[l][d], cache.inputs[l],
                                      cache.inputs[l + 1], d == 0 ? 0 : h, cache.gates[l][d],
                                      cache.cells[l][d], dout, d, h, dx);
    }
    dout = std::move(dx);
  }
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c < dims.phone_dim; ++c)
      grad.phone_embedding(cache.phone_rows[t], c) += dout(t, c);
    for (std::size_t c = 0; c < dims.speaker_dim; ++c)
      grad.speaker_embedding(cache.speaker_row, c) += dout(t, dims.phone_dim + c);
  }
}

/// Unclamped network output, N x 3.
inline Matrix<double> forward_matrix(const AfpCheckpoint& ckpt,
                                     const std::vector<std::size_t>& phone_rows,
                                     std::size_t spk_row) {
  ForwardCache cache;
  forward(ckpt, phone_rows, spk_row, cache);
  return cache.output;
}

/// Per-component bound |y_k| < sum_j |proj_w(k, j)| + |proj_b(k)|.
inline std::array<double, kOutputs> output_bounds(const AfpCheckpoint& ckpt) {
  std::array<double, kOutputs> bounds{};
  for (int k = 0; k < kOutputs; ++k) {
    double s = std::abs(ckpt.weights.proj_b(k, 0));
    for (std::size_t c = 0; c < ckpt.weights.proj_w.cols(); ++c)
      s += std::abs(ckpt.weights.proj_w(k, c));
    bounds[k] = s;
  }
  return bounds;
}

/// Predicted normalized features, one per token. Boundary tokens report 0.
inline std::vector<AcousticFeatureVector> afp_forward(const std::vector<PhoneToken>& phones,
                                                      const std::string& speaker_id,
                                                      const AfpCheckpoint& ckpt) {
  if (phones.empty()) throw DataError("afp_forward: empty phone sequence");
  const std::size_t spk = speaker_row(ckpt, speaker_id);
  std::vector<std::size_t> rows;
  rows.reserve(phones.size());
  for (const auto& p : phones) rows.push_back(phone_row(ckpt, p));
  const Matrix<double> y = forward_matrix(ckpt, rows, spk);
  std::vector<AcousticFeatureVector> out(phones.size());
  for (std::size_t t = 0; t < phones.size(); ++t) {
    out[t].space = FeatureSpace::normalized;
    if (phones[t].is_boundary()) continue;
    out[t].f0 = y(t, 0);
    out[t].energy = y(t, 1);
    out[t].duration = y(t, 2);
  }
  return out;
}

/// Mean absolute error over the components of unmasked tokens; fills dy
/// with the subgradient when non-null (sign 0 at exact ties).
inline double l1_loss(const Matrix<double>& y, const Matrix<double>& target,
                      const std::vector<bool>& mask, Matrix<double>* dy) {
  if (y.rows() != target.rows() || y.cols() != target.cols() || mask.size() != y.rows())
    throw DataError("afp_loss: length mismatch");
  std::size_t active = 0;
  for (bool m : mask) active += m ? 1 : 0;
  if (active == 0) throw DataError("afp_loss: every token is masked");
  const double scale = 1.0 / static_cast<double>(active * y.cols());
  if (dy) *dy = Matrix<double>(y.rows(), y.cols());
  double sum = 0.0;
  for (std::size_t t = 0; t < y.rows(); ++t) {
    if (!mask[t]) continue;
    for (std::size_t k = 0; k < y.cols(); ++k) {
      const double diff = y(t, k) - target(t, k);
      sum += std::abs(diff);
      if (dy) (*dy)(t, k) = diff > 0 ? scale : (diff < 0 ? -scale : 0.0);
    }
  }
  return sum * scale;
}

inline Matrix<double> to_matrix(const std::vector<AcousticFeatureVector>& v) {
  Matrix<double> m(v.size(), kOutputs);
  for (std::size_t t = 0; t < v.size(); ++t) {
    m(t, 0) = v[t].f0;
    m(t, 1) = v[t].energy;
    m(t, 2) = v[t].duration;
  }
  return m;
}

inline double afp_loss(const std::vector<AcousticFeatureVector>& predicted,
                       const std::vector<AcousticFeatureVector>& target,
                       const std::vector<bool>& mask) {
  if (predicted.size() != target.size()) throw DataError("afp_loss: length mismatch");
  return l1_loss(to_matrix(predicted), to_matrix(target), mask, nullptr);
}

}  // namespace prosoctl::afp
