#pragma once

#include <cmath>

#include "crest/nn/network.hpp"

namespace crest::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  NetworkWeights m;
  NetworkWeights v;
  long t = 0;
};

inline AdamState make_adam(const NetworkSpec& spec, bool gaussian_head = true) {
  return {zeros_like(spec, gaussian_head), zeros_like(spec, gaussian_head), 0};
}

// Gradient-descent step on `w` (minimizes; pass the gradient of the loss).
inline void adam_step(NetworkWeights& w, const NetworkWeights& grad, AdamState& st, double lr,
                      const AdamConfig& cfg = {}) {
  st.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));

  auto update = [&](auto& wt, const auto& gt, auto& mt, auto& vt) {
    mt.array() = cfg.beta1 * mt.array() + (1.0 - cfg.beta1) * gt.array();
    vt.array() = cfg.beta2 * vt.array() + (1.0 - cfg.beta2) * gt.array().square();
    wt.array() -= lr * (mt.array() / bc1) / ((vt.array() / bc2).sqrt() + cfg.eps);
  };

  for (std::size_t h = 0; h < w.heads.size(); ++h)
    for (std::size_t k = 0; k < w.heads[h].layers.size(); ++k) {
      update(w.heads[h].layers[k].W, grad.heads[h].layers[k].W, st.m.heads[h].layers[k].W,
             st.v.heads[h].layers[k].W);
      update(w.heads[h].layers[k].b, grad.heads[h].layers[k].b, st.m.heads[h].layers[k].b,
             st.v.heads[h].layers[k].b);
    }
  if (w.log_std.size() > 0) update(w.log_std, grad.log_std, st.m.log_std, st.v.log_std);
}

}  // namespace crest::nn
