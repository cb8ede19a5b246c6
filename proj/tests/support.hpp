#pragma once

// Shared helpers for unit and acceptance tests.

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "crest/core/rng.hpp"
#include "crest/nn/network.hpp"

namespace test_support {

// Naive per-sample, per-unit reference implementation of the network forward
// pass, kept independent of the library's batched code path.
inline Eigen::VectorXd reference_forward(const crest::nn::NetworkSpec& spec,
                                         const crest::nn::NetworkWeights& w,
                                         const Eigen::VectorXd& x_full) {
  Eigen::VectorXd out(spec.output_dim());
  int col = 0;
  for (std::size_t h = 0; h < spec.heads.size(); ++h) {
    const auto& hs = spec.heads[h];
    std::vector<double> a;
    if (hs.input_indices.empty()) {
      a = {1.0};
    } else {
      for (int idx : hs.input_indices) a.push_back(x_full[idx]);
    }
    for (std::size_t k = 0; k < w.heads[h].layers.size(); ++k) {
      const auto& l = w.heads[h].layers[k];
      std::vector<double> z(l.W.rows(), 0.0);
      for (Eigen::Index i = 0; i < l.W.rows(); ++i) {
        double acc = l.b[i];
        for (Eigen::Index j = 0; j < l.W.cols(); ++j) acc += l.W(i, j) * a[j];
        z[i] = (k + 1 < w.heads[h].layers.size()) ? std::tanh(acc) : acc;
      }
      a = std::move(z);
    }
    for (double v : a) out[col++] = v;
  }
  return out;
}

// Max relative error between analytic and central-difference gradients of the
// scalar loss sum(R .* forward(X)) over every weight and bias entry.
inline double gradient_check(const crest::nn::NetworkSpec& spec, crest::nn::NetworkWeights w,
                             const Eigen::MatrixXd& x, const Eigen::MatrixXd& r,
                             double h = 1e-5) {
  namespace nn = crest::nn;
  nn::ForwardCache cache;
  nn::forward(spec, w, x, &cache);
  nn::NetworkWeights analytic = nn::backward(spec, w, cache, r);

  double worst = 0.0;
  auto loss = [&]() { return (nn::forward(spec, w, x).array() * r.array()).sum(); };
  for (std::size_t hh = 0; hh < w.heads.size(); ++hh) {
    for (std::size_t k = 0; k < w.heads[hh].layers.size(); ++k) {
      auto probe = [&](Eigen::MatrixXd& tensor, const Eigen::MatrixXd& grad) {
        for (Eigen::Index i = 0; i < tensor.rows(); ++i)
          for (Eigen::Index j = 0; j < tensor.cols(); ++j) {
            const double keep = tensor(i, j);
            tensor(i, j) = keep + h;
            const double up = loss();
            tensor(i, j) = keep - h;
            const double dn = loss();
            tensor(i, j) = keep;
            const double fd = (up - dn) / (2.0 * h);
            const double an = grad(i, j);
            const double scale = std::max({std::abs(fd), std::abs(an), 1e-8});
            worst = std::max(worst, std::abs(fd - an) / scale);
          }
      };
      probe(w.heads[hh].layers[k].W, analytic.heads[hh].layers[k].W);
      Eigen::MatrixXd b = w.heads[hh].layers[k].b;
      Eigen::MatrixXd gb = analytic.heads[hh].layers[k].b;
      // biases: probe through the same path by temporarily writing back
      for (Eigen::Index i = 0; i < b.rows(); ++i) {
        const double keep = w.heads[hh].layers[k].b[i];
        w.heads[hh].layers[k].b[i] = keep + h;
        const double up = loss();
        w.heads[hh].layers[k].b[i] = keep - h;
        const double dn = loss();
        w.heads[hh].layers[k].b[i] = keep;
        const double fd = (up - dn) / (2.0 * h);
        const double an = gb(i, 0);
        const double scale = std::max({std::abs(fd), std::abs(an), 1e-8});
        worst = std::max(worst, std::abs(fd - an) / scale);
      }
    }
  }
  return worst;
}

}  // namespace test_support
