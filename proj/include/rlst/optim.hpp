#pragma once
// Adam with coupled L2 weight decay, plus global-norm gradient clipping.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlst/tensor.hpp"

namespace rlst {

template <typename T>
struct Param {
  std::string name;
  ad::Shape shape;
  std::vector<T> data;
};

// One gradient array per parameter slot, shape-identical to the parameter.
template <typename T>
using GradBuffer = std::vector<std::vector<T>>;

template <typename T>
GradBuffer<T> make_grad_buffer(const std::vector<Param<T>>& params) {
  GradBuffer<T> g(params.size());
  for (size_t i = 0; i < params.size(); ++i) g[i].assign(params[i].data.size(), T(0));
  return g;
}

template <typename T>
void zero_grads(GradBuffer<T>& g) {
  for (auto& a : g)
    for (auto& v : a) v = T(0);
}

struct AdamConfig {
  double lr = 0.0003;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  void validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("adam: lr must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw std::invalid_argument("adam: betas must be in [0, 1)");
  }
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  int64_t step = 0;

  static AdamState init(const std::vector<Param<T>>& params) {
    AdamState s;
    s.m.resize(params.size());
    s.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      s.m[i].assign(params[i].data.size(), T(0));
      s.v[i].assign(params[i].data.size(), T(0));
    }
    return s;
  }
};

// Scales all gradients by c/norm when the joint Euclidean norm exceeds c.
// Returns the pre-clip norm.
template <typename T>
double clip_global_norm(GradBuffer<T>& grads, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("clip_global_norm: c must be > 0");
  double sq = 0.0;
  for (const auto& a : grads)
    for (T g : a) sq += double(g) * double(g);
  const double norm = std::sqrt(sq);
  if (norm > c) {
    const T f = T(c / norm);
    for (auto& a : grads)
      for (T& g : a) g *= f;
  }
  return norm;
}

template <typename T>
void adam_step(std::vector<Param<T>>& params, const GradBuffer<T>& grads, AdamState<T>& state,
               const AdamConfig& cfg) {
  cfg.validate();
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data;
    const auto& g = grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (size_t t = 0; t < p.size(); ++t) {
      const double gt = double(g[t]) + cfg.weight_decay * double(p[t]);
      m[t] = T(cfg.beta1 * double(m[t]) + (1.0 - cfg.beta1) * gt);
      v[t] = T(cfg.beta2 * double(v[t]) + (1.0 - cfg.beta2) * gt * gt);
      const double mhat = double(m[t]) / bc1;
      const double vhat = double(v[t]) / bc2;
      p[t] = T(double(p[t]) - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

}  // namespace rlst
