#pragma once
// Parameter bookkeeping, layers, Adam, and the finite-difference gradient oracle.

#include <cstdint>
#include <map>
#include <string>

#include "simtlab/rng.hpp"
#include "simtlab/tensor.hpp"

namespace simtlab {

// Named parameters with lexicographic iteration order (std::map keeps paths sorted).
template <class Real>
using ParameterSet = std::map<std::string, Tensor<Real>>;

// Glorot-uniform init: uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)).
template <class Real>
Tensor<Real>& add_param(ParameterSet<Real>& ps, const std::string& path, std::vector<int> shape,
                        int fan_in, int fan_out, Rng& rng) {
  Tensor<Real> t(std::move(shape), Real(0), /*requires_grad=*/true);
  double a = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : t.values()) v = static_cast<Real>(rng.next_uniform(-a, a));
  auto [it, inserted] = ps.emplace(path, std::move(t));
  if (!inserted) throw std::invalid_argument("add_param: duplicate path " + path);
  return it->second;
}

template <class Real>
Tensor<Real>& add_param_const(ParameterSet<Real>& ps, const std::string& path, std::vector<int> shape,
                              Real fill) {
  Tensor<Real> t(std::move(shape), fill, /*requires_grad=*/true);
  auto [it, inserted] = ps.emplace(path, std::move(t));
  if (!inserted) throw std::invalid_argument("add_param: duplicate path " + path);
  return it->second;
}

template <class Real>
void zero_grads(ParameterSet<Real>& ps) {
  for (auto& [path, t] : ps) t.zero_grad();
}

template <class Real>
Tensor<Real> linear_forward(const Tensor<Real>& input, const Tensor<Real>& weights,
                            const Tensor<Real>& bias) {
  return add_rowvec(matmul(input, weights), bias);
}

// Scaled dot-product attention over pre-projected q/k/v, split into heads.
// mask is row-major [Tq x Tk], nonzero = may attend; null = full attention.
template <class Real>
Tensor<Real> multi_head_attention(const Tensor<Real>& queries, const Tensor<Real>& keys,
                                  const Tensor<Real>& values, int head_count,
                                  const std::vector<std::uint8_t>* mask = nullptr) {
  int d = queries.cols();
  if (d % head_count != 0)
    throw std::invalid_argument("multi_head_attention: dim not divisible by head count");
  if (keys.cols() != d || values.cols() != d) shape_error("multi_head_attention", queries.shape(), keys.shape());
  int dh = d / head_count;
  Real inv_sqrt = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(dh)));
  std::vector<Tensor<Real>> heads;
  heads.reserve(head_count);
  for (int h = 0; h < head_count; ++h) {
    auto qh = slice_cols(queries, h * dh, (h + 1) * dh);
    auto kh = slice_cols(keys, h * dh, (h + 1) * dh);
    auto vh = slice_cols(values, h * dh, (h + 1) * dh);
    auto scores = scale(matmul_nt(qh, kh), inv_sqrt);
    auto probs = masked_softmax_rows(scores, mask);
    heads.push_back(matmul(probs, vh));
  }
  return head_count == 1 ? heads[0] : concat_cols(heads);
}

// Prefix mask: query row i may attend key positions 0..limits[i]-1.
inline std::vector<std::uint8_t> prefix_mask(const std::vector<int>& limits, int tk) {
  std::vector<std::uint8_t> m(limits.size() * static_cast<std::size_t>(tk), 0);
  for (std::size_t i = 0; i < limits.size(); ++i) {
    int lim = std::min(limits[i], tk);
    if (lim < 1) throw std::invalid_argument("prefix_mask: limit must be >= 1");
    for (int j = 0; j < lim; ++j) m[i * tk + j] = 1;
  }
  return m;
}

inline std::vector<std::uint8_t> causal_mask(int t) {
  std::vector<int> limits(t);
  for (int i = 0; i < t; ++i) limits[i] = i + 1;
  return prefix_mask(limits, t);
}

// ---- Adam ----

template <class Real>
struct AdamState {
  std::map<std::string, std::vector<Real>> m, v;
  long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double lr = 1e-3;
};

template <class Real>
void adam_step(ParameterSet<Real>& params, AdamState<Real>& state) {
  ++state.step;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& [path, p] : params) {
    if (p.grad_ref().empty())
      throw std::runtime_error("adam_step: missing gradient for parameter " + path);
    auto& m = state.m[path];
    auto& v = state.v[path];
    if (m.empty()) m.assign(p.size(), Real(0));
    if (v.empty()) v.assign(p.size(), Real(0));
    const auto& g = p.grad_ref();
    auto& val = p.values();
    for (std::size_t i = 0; i < val.size(); ++i) {
      double gi = static_cast<double>(g[i]);
      m[i] = static_cast<Real>(state.beta1 * m[i] + (1.0 - state.beta1) * gi);
      v[i] = static_cast<Real>(state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi);
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      val[i] = static_cast<Real>(val[i] - state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
  zero_grads(params);
}

// ---- gradient oracle ----

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  std::string worst_param;
  std::size_t worst_index = 0;
  int checked = 0;
};

// Central differences on `samples` randomly chosen parameter coordinates.
// loss_fn must be a deterministic pure function of the parameter values; the
// caller is expected to instantiate with Real = double.
template <class Real, class LossFn>
GradCheckReport finite_difference_check(LossFn&& loss_fn, ParameterSet<Real>& params, int samples,
                                        double h, double tol, std::uint64_t seed = 0) {
  // analytic gradients
  zero_grads(params);
  {
    Tensor<Real> loss = loss_fn(params);
    if (!std::isfinite(static_cast<double>(loss.item())))
      throw std::runtime_error("finite_difference_check: non-finite loss");
    loss.backward();
  }
  // flatten coordinate space
  std::vector<std::pair<std::string, std::size_t>> coords;
  for (auto& [path, t] : params)
    for (std::size_t i = 0; i < t.size(); ++i) coords.emplace_back(path, i);
  Rng rng(seed ^ 0x5eedf00dULL);
  GradCheckReport rep;
  for (int s = 0; s < samples; ++s) {
    auto [path, idx] = coords[rng.next_below(coords.size())];
    Tensor<Real>& t = params.at(path);
    double g_ad = t.grad_ref().empty() ? 0.0 : static_cast<double>(t.grad_ref()[idx]);
    Real orig = t.values()[idx];
    NoGrad ng;
    t.values()[idx] = orig + static_cast<Real>(h);
    double lp = static_cast<double>(loss_fn(params).item());
    t.values()[idx] = orig - static_cast<Real>(h);
    double lm = static_cast<double>(loss_fn(params).item());
    t.values()[idx] = orig;
    if (!std::isfinite(lp) || !std::isfinite(lm))
      throw std::runtime_error("finite_difference_check: non-finite loss at " + path + "[" +
                               std::to_string(idx) + "]");
    double g_fd = (lp - lm) / (2.0 * h);
    double rel = std::abs(g_ad - g_fd) / std::max(1e-8, std::abs(g_ad) + std::abs(g_fd));
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_param = path;
      rep.worst_index = idx;
    }
    ++rep.checked;
  }
  rep.pass = rep.max_rel_err < tol;
  zero_grads(params);
  return rep;
}

}  // namespace simtlab
