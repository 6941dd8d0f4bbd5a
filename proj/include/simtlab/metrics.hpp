#pragma once
// Evaluation: Average Anticipation, Average Lagging, hallucination ratio
// against an alignment oracle, and corpus-level BLEU-4.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "simtlab/policy.hpp"

namespace simtlab {

// AA = (1/n) sum over alignment pairs (source i, target j) of max(i - j, 0).
inline double average_anticipation(const std::vector<std::pair<int, int>>& alignment) {
  if (alignment.empty()) throw std::invalid_argument("average_anticipation: empty alignment set");
  double s = 0.0;
  for (auto [i, j] : alignment) s += std::max(i - j, 0);
  return s / static_cast<double>(alignment.size());
}

// AL = (1/tau) sum_{i=1..tau} (g_i - (i-1)/r), r = I/J, tau = first index
// whose delay reaches J (or all of them if none does).
inline double average_lagging(const std::vector<int>& delays, int source_len, int target_len) {
  if (delays.empty()) throw std::invalid_argument("average_lagging: empty trace");
  if (source_len < 1 || target_len < 1)
    throw std::invalid_argument("average_lagging: lengths must be >= 1");
  double r = static_cast<double>(target_len) / source_len;
  std::size_t tau = delays.size();
  for (std::size_t i = 0; i < delays.size(); ++i)
    if (delays[i] >= source_len) {
      tau = i + 1;
      break;
    }
  double s = 0.0;
  for (std::size_t i = 0; i < tau; ++i)
    s += delays[i] - static_cast<double>(i) / r;
  return s / static_cast<double>(tau);
}

inline double average_lagging(const ContentTrace& trace, int source_len) {
  return average_lagging(trace.delays, source_len, static_cast<int>(trace.tokens.size()));
}

// Aligned source position (1-based) per emitted token, or nothing.
using AlignmentOracle = std::function<std::vector<std::optional<int>>(
    std::size_t sentence_index, const ContentTrace& trace)>;

// A token is hallucinated iff its oracle alignment points past the source
// prefix read at emission time, or it aligns to nothing. Each emitted token is
// counted once, at its emission delay.
inline double hallucination_ratio(const std::vector<ContentTrace>& traces,
                                  const AlignmentOracle& oracle) {
  if (!oracle) throw std::invalid_argument("hallucination_ratio: alignment oracle unavailable");
  long total = 0, hallucinated = 0;
  for (std::size_t s = 0; s < traces.size(); ++s) {
    const auto& t = traces[s];
    auto aligned = oracle(s, t);
    if (aligned.size() != t.tokens.size())
      throw std::invalid_argument("hallucination_ratio: oracle output size mismatch");
    for (std::size_t i = 0; i < t.tokens.size(); ++i) {
      ++total;
      if (!aligned[i] || *aligned[i] > t.delays[i]) ++hallucinated;
    }
  }
  if (total == 0) return 0.0;
  return static_cast<double>(hallucinated) / static_cast<double>(total);
}

// Corpus BLEU-4: geometric mean of clipped 1..4-gram precisions times brevity
// penalty. `smooth` adds one to numerator and denominator of empty higher-order
// counts (for tiny corpora); default is the standard unsmoothed score.
inline double corpus_bleu(const std::vector<std::vector<int>>& hypotheses,
                          const std::vector<std::vector<int>>& references, bool smooth = false) {
  if (hypotheses.empty()) throw std::invalid_argument("corpus_bleu: empty hypothesis set");
  if (hypotheses.size() != references.size())
    throw std::invalid_argument("corpus_bleu: hypothesis/reference count mismatch");
  constexpr int kMaxOrder = 4;
  long match[kMaxOrder] = {0, 0, 0, 0};
  long total[kMaxOrder] = {0, 0, 0, 0};
  long hyp_len = 0, ref_len = 0;
  using Ngram = std::vector<int>;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto& hyp = hypotheses[s];
    const auto& ref = references[s];
    hyp_len += static_cast<long>(hyp.size());
    ref_len += static_cast<long>(ref.size());
    for (int n = 1; n <= kMaxOrder; ++n) {
      std::map<Ngram, long> ref_counts;
      for (std::size_t i = 0; i + n <= ref.size(); ++i)
        ++ref_counts[Ngram(ref.begin() + i, ref.begin() + i + n)];
      std::map<Ngram, long> hyp_counts;
      for (std::size_t i = 0; i + n <= hyp.size(); ++i)
        ++hyp_counts[Ngram(hyp.begin() + i, hyp.begin() + i + n)];
      for (const auto& [g, c] : hyp_counts) {
        total[n - 1] += c;
        auto it = ref_counts.find(g);
        if (it != ref_counts.end()) match[n - 1] += std::min(c, it->second);
      }
    }
  }
  double log_prec = 0.0;
  for (int n = 0; n < kMaxOrder; ++n) {
    double num = static_cast<double>(match[n]);
    double den = static_cast<double>(total[n]);
    if (smooth && n > 0) {
      num += 1.0;
      den += 1.0;
    }
    if (den == 0.0 || num == 0.0) return 0.0;
    log_prec += std::log(num / den);
  }
  double bp = hyp_len >= ref_len ? 1.0
                                 : std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);
  if (hyp_len == 0) return 0.0;
  return 100.0 * bp * std::exp(log_prec / kMaxOrder);
}

// One row of a latency-quality report.
struct LatencyQualityPoint {
  std::string policy;    // "waitk" | "threshold" | "offline"
  std::string setting;   // e.g. "k=3" or "lmax=9,delta=0.5"
  double al = 0.0;
  double bleu = 0.0;
  double hallucination = 0.0;
  std::string trace_path;
};

}  // namespace simtlab
