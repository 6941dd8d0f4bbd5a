#pragma once
// Confidence-weighting formulas for weighted prefix-to-prefix training:
// diagonal distance/regularizer, token weight, reordering cost, sentence
// weight with batch normalization, the wait-k schedule, and prefix sampling.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "simtlab/rng.hpp"

namespace simtlab {

struct WeightConfig {
  double lambda = 1.0;       // diagonal regularization exponent
  double gamma = 0.25;       // confidence scaling exponent
  double sigma_floor = 1e-6; // batch std floor

  void validate() const {
    if (lambda <= 0) throw std::invalid_argument("WeightConfig: lambda must be > 0");
    if (gamma < 0) throw std::invalid_argument("WeightConfig: gamma must be >= 0");
    if (sigma_floor <= 0) throw std::invalid_argument("WeightConfig: sigma floor must be > 0");
  }
};

// d_{j,i} = |i/I - j/J|
inline double diagonal_distance(int i, int target_len, int j, int source_len) {
  return std::abs(static_cast<double>(i) / target_len - static_cast<double>(j) / source_len);
}

// D_{j,i} = 1 - d^lambda
inline double diagonal_regularizer(double d, double lambda) {
  return 1.0 - std::pow(d, lambda);
}

// alpha_{j,i} = p^gamma * D_{j,i}; treated as a constant during optimization.
inline double token_weight(double p, double diag, double gamma) {
  return std::pow(p, gamma) * diag;
}

// c_{j,i} = max(0, i/I - j/J)
inline double reorder_cost(int i, int target_len, int j, int source_len) {
  return std::max(0.0, static_cast<double>(i) / target_len - static_cast<double>(j) / source_len);
}

// C = sum over available cells of p_{j,i} * c_{j,i}.
// `prob_rows[s][i-1]` is the confidence row for prefix length `prefixes[s]`.
inline double sentence_reorder_score(const std::vector<int>& prefixes,
                                     const std::vector<std::vector<double>>& prob_rows,
                                     int source_len, int target_len) {
  if (prefixes.empty() || prob_rows.empty())
    throw std::invalid_argument("sentence_reorder_score: empty matrix");
  double c = 0.0;
  for (std::size_t s = 0; s < prefixes.size(); ++s)
    for (int i = 1; i <= target_len; ++i)
      c += prob_rows[s][i - 1] * reorder_cost(i, target_len, prefixes[s], source_len);
  return c;
}

// beta = max(0, 1 - (C - mu)/sigma), sigma floored; single-sentence batch -> 1.
inline double sentence_weight(double c, const std::vector<double>& batch_cs,
                              double sigma_floor = 1e-6) {
  if (batch_cs.empty()) throw std::invalid_argument("sentence_weight: empty batch");
  if (batch_cs.size() == 1) return 1.0;
  double mu = 0.0;
  for (double v : batch_cs) mu += v;
  mu /= static_cast<double>(batch_cs.size());
  double var = 0.0;
  for (double v : batch_cs) var += (v - mu) * (v - mu);
  var /= static_cast<double>(batch_cs.size());
  double sigma = std::max(std::sqrt(var), sigma_floor);
  return std::max(0.0, 1.0 - (c - mu) / sigma);
}

// Wait-k source coverage: g_i = min(k + i - 1, J).
inline int wait_k_prefix(int i, int k, int source_len) {
  if (i < 1 || k < 1 || source_len < 1)
    throw std::invalid_argument("wait_k_prefix: arguments must be >= 1");
  return std::min(k + i - 1, source_len);
}

struct WaitKSchedule {
  int k = 1;
  int source_len = 0;
  int target_len = 0;

  std::vector<int> coverage() const {
    std::vector<int> g(target_len);
    for (int i = 1; i <= target_len; ++i) g[i - 1] = wait_k_prefix(i, k, source_len);
    return g;
  }

  static WaitKSchedule offline(int source_len, int target_len) {
    return {source_len, source_len, target_len};
  }
};

// Prefix sampling cap: all of 1..J when J <= cap, else J plus cap-1 distinct
// values from 1..J-1, sorted ascending. Deterministic under seed.
inline std::vector<int> sample_prefixes(int source_len, int cap, std::uint64_t seed) {
  if (cap < 1) throw std::invalid_argument("sample_prefixes: cap must be >= 1");
  if (source_len < 1) throw std::invalid_argument("sample_prefixes: J must be >= 1");
  std::vector<int> out;
  if (source_len <= cap) {
    for (int j = 1; j <= source_len; ++j) out.push_back(j);
    return out;
  }
  Rng rng(seed);
  out = rng.sample_without_replacement(1, source_len - 1, cap - 1);
  out.push_back(source_len);
  return out;
}

}  // namespace simtlab
