#pragma once

#include <Eigen/Core>
#include <Eigen/QR>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "crest/core/rng.hpp"

namespace crest::nn {

// One head reads a subset of the context (by index) through a tanh MLP.
// An empty index list means the head sees a single constant-1 input.
struct HeadSpec {
  std::vector<int> input_indices;
  std::vector<int> hidden_widths;
  int output_dim = 1;

  int input_dim() const {
    return input_indices.empty() ? 1 : static_cast<int>(input_indices.size());
  }

  std::vector<int> layer_dims() const {
    std::vector<int> dims;
    dims.push_back(input_dim());
    for (int w : hidden_widths) dims.push_back(w);
    dims.push_back(output_dim);
    return dims;
  }
};

struct NetworkSpec {
  std::vector<HeadSpec> heads;
  double hidden_scale = std::sqrt(2.0);
  double output_scale = 0.01;

  int output_dim() const {
    int d = 0;
    for (const auto& h : heads) d += h.output_dim;
    return d;
  }

  int max_input_index() const {
    int m = -1;
    for (const auto& h : heads)
      for (int i : h.input_indices) m = std::max(m, i);
    return m;
  }
};

struct LayerWeights {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
};

struct HeadWeights {
  std::vector<LayerWeights> layers;
};

// Also serves as the gradient container (same shapes as the weights).
struct NetworkWeights {
  std::vector<HeadWeights> heads;
  Eigen::VectorXd log_std;  // empty for critics
};

// Weight + bias count; log_std is tracked separately at the policy level.
inline int count_params(const NetworkSpec& spec) {
  int n = 0;
  for (const auto& h : spec.heads) {
    auto dims = h.layer_dims();
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) n += dims[k + 1] * (dims[k] + 1);
  }
  return n;
}

namespace detail {

// Orthogonal matrix via QR of a standard normal draw, with the sign of
// diag(R) folded in so the result is unique for a given draw.
inline Eigen::MatrixXd orthogonal(int rows, int cols, double scale, Rng& rng) {
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  Eigen::MatrixXd a(big, small);
  for (int i = 0; i < big; ++i)
    for (int j = 0; j < small; ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(small, small);
  for (int j = 0; j < small; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  if (rows < cols) return scale * q.transpose();
  return scale * q;
}

}  // namespace detail

// Orthogonal init (sqrt(2) hidden, output_scale output), zero biases,
// zero log_std.
inline NetworkWeights init_weights(const NetworkSpec& spec, Rng& rng, bool gaussian_head = true) {
  NetworkWeights w;
  for (const auto& h : spec.heads) {
    HeadWeights hw;
    auto dims = h.layer_dims();
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
      const bool last = (k + 2 == dims.size());
      LayerWeights lw;
      lw.W = detail::orthogonal(dims[k + 1], dims[k],
                                last ? spec.output_scale : spec.hidden_scale, rng);
      lw.b = Eigen::VectorXd::Zero(dims[k + 1]);
      hw.layers.push_back(std::move(lw));
    }
    w.heads.push_back(std::move(hw));
  }
  if (gaussian_head) w.log_std = Eigen::VectorXd::Zero(spec.output_dim());
  return w;
}

inline NetworkWeights zeros_like(const NetworkSpec& spec, bool gaussian_head = true) {
  NetworkWeights w;
  for (const auto& h : spec.heads) {
    HeadWeights hw;
    auto dims = h.layer_dims();
    for (std::size_t k = 0; k + 1 < dims.size(); ++k)
      hw.layers.push_back({Eigen::MatrixXd::Zero(dims[k + 1], dims[k]),
                           Eigen::VectorXd::Zero(dims[k + 1])});
    w.heads.push_back(std::move(hw));
  }
  if (gaussian_head) w.log_std = Eigen::VectorXd::Zero(spec.output_dim());
  return w;
}

// Gathers the head's input columns from a full-context batch (rows = samples).
inline Eigen::MatrixXd head_input(const HeadSpec& h, const Eigen::MatrixXd& x_full) {
  if (h.input_indices.empty()) return Eigen::MatrixXd::Ones(x_full.rows(), 1);
  Eigen::MatrixXd x(x_full.rows(), h.input_indices.size());
  for (std::size_t j = 0; j < h.input_indices.size(); ++j) {
    const int idx = h.input_indices[j];
    if (idx < 0 || idx >= x_full.cols())
      throw std::out_of_range("head input index out of range of context");
    x.col(j) = x_full.col(idx);
  }
  return x;
}

// Per-head activations (input + post-activation per layer), kept for backward.
struct ForwardCache {
  std::vector<std::vector<Eigen::MatrixXd>> acts;
};

// Batched forward pass. x_full holds one full context per row; each head
// gathers its own inputs. Output columns are head outputs in head order.
inline Eigen::MatrixXd forward(const NetworkSpec& spec, const NetworkWeights& w,
                               const Eigen::MatrixXd& x_full, ForwardCache* cache = nullptr) {
  if (spec.heads.size() != w.heads.size())
    throw std::invalid_argument("weights do not match spec head count");
  const auto n = x_full.rows();
  Eigen::MatrixXd out(n, spec.output_dim());
  if (cache) cache->acts.assign(spec.heads.size(), {});
  int col = 0;
  for (std::size_t h = 0; h < spec.heads.size(); ++h) {
    const auto& hs = spec.heads[h];
    const auto& hw = w.heads[h];
    Eigen::MatrixXd a = head_input(hs, x_full);
    if (cache) cache->acts[h].push_back(a);
    for (std::size_t k = 0; k < hw.layers.size(); ++k) {
      const auto& lw = hw.layers[k];
      Eigen::MatrixXd z = (a * lw.W.transpose()).rowwise() + lw.b.transpose();
      if (k + 1 < hw.layers.size()) z = z.array().tanh();
      a = std::move(z);
      if (cache) cache->acts[h].push_back(a);
    }
    out.middleCols(col, hs.output_dim) = a;
    col += hs.output_dim;
  }
  return out;
}

inline Eigen::VectorXd forward(const NetworkSpec& spec, const NetworkWeights& w,
                               const Eigen::VectorXd& x_full) {
  return forward(spec, w, Eigen::MatrixXd(x_full.transpose())).row(0);
}

// Backprop of dL/d(output) through the cached forward pass. Returns gradients
// in a weight-shaped container; log_std gradient is left zero for callers that
// own that term.
inline NetworkWeights backward(const NetworkSpec& spec, const NetworkWeights& w,
                               const ForwardCache& cache, const Eigen::MatrixXd& d_out) {
  NetworkWeights g = zeros_like(spec, w.log_std.size() > 0);
  int col = 0;
  for (std::size_t h = 0; h < spec.heads.size(); ++h) {
    const auto& hs = spec.heads[h];
    const auto& hw = w.heads[h];
    const auto& acts = cache.acts[h];
    Eigen::MatrixXd dz = d_out.middleCols(col, hs.output_dim);
    col += hs.output_dim;
    for (int k = static_cast<int>(hw.layers.size()) - 1; k >= 0; --k) {
      const Eigen::MatrixXd& a_prev = acts[k];
      g.heads[h].layers[k].W = dz.transpose() * a_prev;
      g.heads[h].layers[k].b = dz.colwise().sum();
      if (k > 0) {
        Eigen::MatrixXd da = dz * hw.layers[k].W;
        dz = da.array() * (1.0 - acts[k].array().square());
      }
    }
  }
  return g;
}

// In-place elementwise update helpers over every tensor in the container.
template <typename F>
inline void for_each_tensor(NetworkWeights& w, F&& f) {
  for (auto& h : w.heads)
    for (auto& l : h.layers) {
      f(l.W);
      f(l.b);
    }
  if (w.log_std.size() > 0) f(w.log_std);
}

template <typename F>
inline void for_each_tensor(NetworkWeights& a, const NetworkWeights& b, F&& f) {
  for (std::size_t h = 0; h < a.heads.size(); ++h)
    for (std::size_t k = 0; k < a.heads[h].layers.size(); ++k) {
      f(a.heads[h].layers[k].W, b.heads[h].layers[k].W);
      f(a.heads[h].layers[k].b, b.heads[h].layers[k].b);
    }
  if (a.log_std.size() > 0) f(a.log_std, b.log_std);
}

}  // namespace crest::nn
