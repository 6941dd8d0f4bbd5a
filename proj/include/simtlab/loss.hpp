#pragma once
// Training objectives: prefix cross-entropy under a wait-k schedule, and the
// confidence-weighted multi-prefix loss with token weights alpha (diagonal
// regularization) and batch-normalized sentence weights beta. Weights are
// computed from detached probabilities; gradients flow only through log p.

#include <vector>

#include "simtlab/model.hpp"
#include "simtlab/weights.hpp"

namespace simtlab {

inline constexpr double kProbFloor = 1e-12;

// Per-sentence record of every weighting term (Eqs. 5-11 symbols).
struct WeightedLossBreakdown {
  std::vector<int> prefixes;                    // sampled j values
  std::vector<std::vector<double>> p;           // detached p_{j,i}, row per sampled j
  std::vector<std::vector<double>> diag;        // D_{j,i}
  std::vector<std::vector<double>> alpha;       // alpha_{j,i}
  std::vector<std::vector<double>> cost;        // c_{j,i}
  double reorder_score = 0.0;                   // C
  double beta = 1.0;
  double mu_batch = 0.0, sigma_batch = 0.0;
  double loss = 0.0;                            // this sentence's contribution
};

struct LossStats {
  long clamped = 0;  // zero-probability cells floored before log
};

// -sum_i log P(y*_i | x_{<=g_i}, y*_{<i}). Offline is the g_i = J schedule.
template <class Real>
Tensor<Real> ce_prefix_loss(const Model<Real>& model, const SentencePair& pair,
                            const WaitKSchedule& schedule, LossStats* stats = nullptr) {
  auto src = Model<Real>::with_eos(pair.source);
  auto tgt_in = Model<Real>::with_bos(pair.target);
  auto tgt_out = Model<Real>::with_eos(pair.target);
  if (schedule.source_len != static_cast<int>(src.size()) ||
      schedule.target_len != static_cast<int>(tgt_out.size()))
    throw std::invalid_argument("ce_prefix_loss: schedule does not match pair");
  auto enc = model.encode(src);
  auto logits = model.decode_logits(tgt_in, enc, schedule.coverage());
  auto logp = log_softmax_rows(logits);
  auto picked = gather_elems(logp, tgt_out);
  long clamped = 0;
  picked = clamp_min(picked, static_cast<Real>(std::log(kProbFloor)), &clamped);
  if (stats) stats->clamped += clamped;
  return scale(sum_all(picked), Real(-1));
}

struct CbsimtOptions {
  WeightConfig weights;
  int prefix_cap = 10;
  bool alpha_one = false;  // ablation: force alpha = 1
  bool beta_one = false;   // ablation: force beta = 1
  bool diag_one = false;   // ablation: remove D_{j,i}
};

// Frozen weights for one sentence, reusable across loss evaluations (the
// finite-difference oracle perturbs parameters under fixed alpha/beta).
struct FrozenWeights {
  std::vector<std::vector<double>> alpha;
  double beta = 1.0;
};

namespace detail {

template <class Real>
struct SentenceForward {
  std::vector<int> prefixes;
  std::vector<Tensor<Real>> picked;        // per sampled j: log p_{j,i} over i
  std::vector<std::vector<double>> p_rows; // detached probabilities
  int source_len = 0, target_len = 0;
};

template <class Real>
SentenceForward<Real> forward_prefixes(const Model<Real>& model, const SentencePair& pair,
                                       const std::vector<int>& prefixes, LossStats* stats) {
  auto src = Model<Real>::with_eos(pair.source);
  auto tgt_in = Model<Real>::with_bos(pair.target);
  auto tgt_out = Model<Real>::with_eos(pair.target);
  SentenceForward<Real> fw;
  fw.prefixes = prefixes;
  fw.source_len = static_cast<int>(src.size());
  fw.target_len = static_cast<int>(tgt_out.size());
  auto enc = model.encode(src);
  for (int j : prefixes) {
    std::vector<int> limits(tgt_in.size(), j);
    auto logp = log_softmax_rows(model.decode_logits(tgt_in, enc, limits));
    auto picked = gather_elems(logp, tgt_out);
    long clamped = 0;
    picked = clamp_min(picked, static_cast<Real>(std::log(kProbFloor)), &clamped);
    if (stats) stats->clamped += clamped;
    std::vector<double> p_row(picked.size());
    for (std::size_t i = 0; i < p_row.size(); ++i)
      p_row[i] = std::exp(static_cast<double>(picked.values()[i]));
    fw.p_rows.push_back(std::move(p_row));
    fw.picked.push_back(std::move(picked));
  }
  return fw;
}

}  // namespace detail

// Weighted multi-prefix loss for one batch of sentences:
//   L_s = -beta_s * (1/|S_s|) * sum_{j in S_s} sum_i alpha_{j,i} log p_{j,i}
// batch loss = mean over sentences. Per-sentence breakdowns are appended to
// `breakdowns` when given. When `frozen` is non-null its weights are used
// instead of freshly computed ones (gradient-check mode).
template <class Real>
Tensor<Real> cbsimt_batch_loss(const Model<Real>& model, const std::vector<SentencePair>& batch,
                               const CbsimtOptions& opt, std::uint64_t prefix_seed,
                               std::vector<WeightedLossBreakdown>* breakdowns = nullptr,
                               LossStats* stats = nullptr,
                               const std::vector<FrozenWeights>* frozen = nullptr) {
  if (batch.empty()) throw std::invalid_argument("cbsimt_batch_loss: empty batch");
  opt.weights.validate();

  std::vector<detail::SentenceForward<Real>> fws;
  fws.reserve(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    int j_max = static_cast<int>(batch[s].source.size()) + 1;  // includes EOS position
    auto prefixes = sample_prefixes(j_max, opt.prefix_cap,
                                    prefix_seed ^ (0x9e3779b97f4a7c15ULL * (s + 1)));
    fws.push_back(detail::forward_prefixes(model, batch[s], prefixes, stats));
  }

  // sentence reordering scores over the sampled cells (detached p)
  std::vector<double> batch_cs(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s)
    batch_cs[s] = sentence_reorder_score(fws[s].prefixes, fws[s].p_rows, fws[s].source_len,
                                         fws[s].target_len);
  double mu = 0.0;
  for (double c : batch_cs) mu += c;
  mu /= static_cast<double>(batch_cs.size());
  double var = 0.0;
  for (double c : batch_cs) var += (c - mu) * (c - mu);
  var /= static_cast<double>(batch_cs.size());
  double sigma = std::max(std::sqrt(var), opt.weights.sigma_floor);

  Tensor<Real> total({1}, Real(0));
  for (std::size_t s = 0; s < batch.size(); ++s) {
    auto& fw = fws[s];
    WeightedLossBreakdown bd;
    bd.prefixes = fw.prefixes;
    bd.p = fw.p_rows;
    bd.mu_batch = mu;
    bd.sigma_batch = sigma;
    double beta;
    if (frozen) {
      beta = (*frozen)[s].beta;
    } else if (opt.beta_one) {
      beta = 1.0;
    } else {
      beta = sentence_weight(batch_cs[s], batch_cs, opt.weights.sigma_floor);
    }
    bd.reorder_score = batch_cs[s];
    bd.beta = beta;

    Tensor<Real> sent({1}, Real(0));
    for (std::size_t r = 0; r < fw.prefixes.size(); ++r) {
      int j = fw.prefixes[r];
      std::vector<Real> w(fw.target_len);
      std::vector<double> drow(fw.target_len), arow(fw.target_len), crow(fw.target_len);
      for (int i = 1; i <= fw.target_len; ++i) {
        double d = diagonal_distance(i, fw.target_len, j, fw.source_len);
        double diag = opt.diag_one ? 1.0 : diagonal_regularizer(d, opt.weights.lambda);
        double alpha;
        if (frozen) {
          alpha = (*frozen)[s].alpha[r][i - 1];
        } else if (opt.alpha_one) {
          alpha = 1.0;
        } else {
          alpha = token_weight(fw.p_rows[r][i - 1], diag, opt.weights.gamma);
        }
        drow[i - 1] = diag;
        arow[i - 1] = alpha;
        crow[i - 1] = reorder_cost(i, fw.target_len, j, fw.source_len);
        w[i - 1] = static_cast<Real>(alpha);
      }
      bd.diag.push_back(std::move(drow));
      bd.alpha.push_back(std::move(arow));
      bd.cost.push_back(std::move(crow));
      sent = add(sent, dot_const(fw.picked[r], w));
    }
    Real coef = static_cast<Real>(-beta / static_cast<double>(fw.prefixes.size()));
    sent = scale(sent, coef);
    bd.loss = static_cast<double>(sent.item());
    if (breakdowns) breakdowns->push_back(std::move(bd));
    total = add(total, sent);
  }
  total = scale(total, static_cast<Real>(1.0 / batch.size()));
  if (!std::isfinite(static_cast<double>(total.item())))
    throw std::runtime_error("cbsimt_batch_loss: non-finite loss");
  return total;
}

// Convenience wrapper for a single sentence pair with explicit batch context.
template <class Real>
Tensor<Real> cbsimt_loss(const Model<Real>& model, const SentencePair& pair,
                         const CbsimtOptions& opt, std::uint64_t prefix_seed,
                         WeightedLossBreakdown* breakdown = nullptr, LossStats* stats = nullptr) {
  std::vector<WeightedLossBreakdown> bds;
  auto loss = cbsimt_batch_loss(model, std::vector<SentencePair>{pair}, opt, prefix_seed,
                                breakdown ? &bds : nullptr, stats);
  if (breakdown) *breakdown = std::move(bds[0]);
  return loss;
}

// Capture the detached weights of a batch at the current parameters; used by
// the finite-difference oracle so perturbed evaluations share fixed weights.
template <class Real>
std::vector<FrozenWeights> freeze_cbsimt_weights(const Model<Real>& model,
                                                 const std::vector<SentencePair>& batch,
                                                 const CbsimtOptions& opt,
                                                 std::uint64_t prefix_seed) {
  NoGrad ng;
  std::vector<WeightedLossBreakdown> bds;
  cbsimt_batch_loss(model, batch, opt, prefix_seed, &bds);
  std::vector<FrozenWeights> out;
  for (auto& bd : bds) out.push_back(FrozenWeights{bd.alpha, bd.beta});
  return out;
}

}  // namespace simtlab
