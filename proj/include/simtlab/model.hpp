#pragma once
// Encoder-decoder with a strictly causal (unidirectional) encoder. One encoder
// pass yields the hidden sequence of every source prefix by truncation; the
// decoder's cross-attention is restricted per query position, which covers the
// per-prefix decode, wait-k training, and offline decoding with one mechanism.

#include <optional>
#include <vector>

#include "simtlab/nn.hpp"

namespace simtlab {

inline constexpr int kBos = 0;
inline constexpr int kEos = 1;
inline constexpr int kPad = 2;
inline constexpr int kNumSpecial = 3;

struct ModelConfig {
  int src_vocab = 20;
  int tgt_vocab = 20;
  int dim = 64;
  int ffn_dim = 256;
  int heads = 2;
  int enc_layers = 2;
  int dec_layers = 2;
  int max_len = 64;
  std::uint64_t seed = 1;

  void validate() const {
    if (dim < 1 || ffn_dim < 1 || heads < 1 || enc_layers < 1 || dec_layers < 1 || max_len < 1)
      throw std::invalid_argument("ModelConfig: all dims must be >= 1");
    if (dim % heads != 0) throw std::invalid_argument("ModelConfig: dim must be divisible by heads");
    if (src_vocab <= kNumSpecial || tgt_vocab <= kNumSpecial)
      throw std::invalid_argument("ModelConfig: vocab too small");
  }
};

// Sentence pair with oracle alignment (source index, target index), 1-based.
struct SentencePair {
  std::vector<int> source;  // content token ids, no EOS
  std::vector<int> target;
  std::vector<std::pair<int, int>> alignment;
  double aa = 0.0;  // cached Average Anticipation
};

// Encoder states for the full source; entry j is the first j rows.
template <class Real>
struct HiddenStream {
  Tensor<Real> full;  // [J x D]
  int length() const { return full.rows(); }

  // Materialized j-row prefix (for oracle tests and external callers).
  Tensor<Real> prefix(int j) const {
    if (j < 1 || j > length()) throw std::invalid_argument("HiddenStream: prefix length out of range");
    Tensor<Real> out({j, full.cols()});
    std::copy(full.values().begin(), full.values().begin() + static_cast<std::size_t>(j) * full.cols(),
              out.values().begin());
    return out;
  }
};

// Probability stream p[j][i]: confidence of ground-truth token i after reading
// j source tokens. Rows exist only for prefix lengths in `prefixes`.
struct ConfidenceMatrix {
  std::vector<int> prefixes;              // sampled j values, ascending
  std::vector<std::vector<double>> rows;  // rows[s][i] for prefixes[s]
  int source_len = 0;                     // J (model-level, includes EOS)
  int target_len = 0;                     // I (model-level, includes EOS)

  const std::vector<double>& row_for(int j) const {
    for (std::size_t s = 0; s < prefixes.size(); ++s)
      if (prefixes[s] == j) return rows[s];
    throw std::invalid_argument("ConfidenceMatrix: no row for prefix " + std::to_string(j));
  }
};

template <class Real>
class Model {
 public:
  explicit Model(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    init_params(rng);
    build_posenc();
  }

  const ModelConfig& config() const { return cfg_; }
  ParameterSet<Real>& params() { return params_; }
  const ParameterSet<Real>& params() const { return params_; }

  // Model-level source sequence: content tokens followed by EOS.
  static std::vector<int> with_eos(const std::vector<int>& content) {
    std::vector<int> out = content;
    out.push_back(kEos);
    return out;
  }

  // Decoder input [BOS, y...]; the matching outputs are [y..., EOS].
  static std::vector<int> with_bos(const std::vector<int>& content) {
    std::vector<int> out;
    out.reserve(content.size() + 1);
    out.push_back(kBos);
    out.insert(out.end(), content.begin(), content.end());
    return out;
  }

  // Causal pass over the full source. Gradients flow if autograd is enabled.
  Tensor<Real> encode(const std::vector<int>& src_seq) const {
    if (src_seq.empty()) throw std::invalid_argument("encode: empty source");
    if (static_cast<int>(src_seq.size()) > cfg_.max_len)
      throw std::invalid_argument("encode: source exceeds max length");
    auto x = embed(src_seq, "src_embed");
    auto mask = causal_mask(static_cast<int>(src_seq.size()));
    for (int l = 0; l < cfg_.enc_layers; ++l) {
      const std::string p = "enc/l" + std::to_string(l) + "/";
      x = attn_block(x, x, p + "self", &mask);
      x = ffn_block(x, p + "ffn");
    }
    return layer_norm(x, param("enc/final_norm/gain"), param("enc/final_norm/shift"));
  }

  HiddenStream<Real> encode_full(const std::vector<int>& src_seq) const {
    return HiddenStream<Real>{encode(src_seq)};
  }

  // Teacher-forced logits. cross_limits[i] = number of source positions target
  // position i may attend to (the g_i schedule, or a constant prefix length).
  Tensor<Real> decode_logits(const std::vector<int>& tgt_in, const Tensor<Real>& enc_out,
                             const std::vector<int>& cross_limits) const {
    if (tgt_in.empty() || tgt_in.front() != kBos)
      throw std::invalid_argument("decode_logits: target prefix must begin with BOS");
    if (enc_out.rows() < 1) throw std::invalid_argument("decode_logits: empty hidden sequence");
    if (cross_limits.size() != tgt_in.size())
      throw std::invalid_argument("decode_logits: cross limit per target position required");
    int t = static_cast<int>(tgt_in.size());
    auto y = embed(tgt_in, "tgt_embed");
    auto self_m = causal_mask(t);
    auto cross_m = prefix_mask(cross_limits, enc_out.rows());
    for (int l = 0; l < cfg_.dec_layers; ++l) {
      const std::string p = "dec/l" + std::to_string(l) + "/";
      y = attn_block(y, y, p + "self", &self_m);
      y = attn_block(y, enc_out, p + "cross", &cross_m);
      y = ffn_block(y, p + "ffn");
    }
    y = layer_norm(y, param("dec/final_norm/gain"), param("dec/final_norm/shift"));
    return linear_forward(y, param("out/weight"), param("out/bias"));
  }

  // Next-token distribution given a target prefix and the hidden sequence H_j.
  std::vector<double> decode_distribution(const std::vector<int>& tgt_prefix,
                                          const Tensor<Real>& h_j) const {
    NoGrad ng;
    std::vector<int> limits(tgt_prefix.size(), h_j.rows());
    auto logits = decode_logits(tgt_prefix, h_j, limits);
    auto probs = softmax_rows(logits);
    int v = probs.cols(), last = probs.rows() - 1;
    std::vector<double> out(v);
    for (int i = 0; i < v; ++i) out[i] = static_cast<double>(probs.at(last, i));
    return out;
  }

  // Probability stream over the sampled prefix set (Eq. 4 semantics).
  ConfidenceMatrix probability_stream(const SentencePair& pair,
                                      const std::vector<int>& prefix_set) const {
    NoGrad ng;
    auto src = with_eos(pair.source);
    auto tgt_in = with_bos(pair.target);
    auto tgt_out = with_eos(pair.target);
    int j_max = static_cast<int>(src.size());
    if (prefix_set.empty()) throw std::invalid_argument("probability_stream: empty prefix set");
    for (std::size_t s = 0; s < prefix_set.size(); ++s) {
      if (prefix_set[s] < 1 || prefix_set[s] > j_max)
        throw std::invalid_argument("probability_stream: prefix length out of range");
      if (s > 0 && prefix_set[s] <= prefix_set[s - 1])
        throw std::invalid_argument("probability_stream: prefix set must be sorted ascending");
    }
    auto enc = encode(src);
    ConfidenceMatrix cm;
    cm.prefixes = prefix_set;
    cm.source_len = j_max;
    cm.target_len = static_cast<int>(tgt_out.size());
    for (int j : prefix_set) {
      std::vector<int> limits(tgt_in.size(), j);
      auto probs = softmax_rows(decode_logits(tgt_in, enc, limits));
      std::vector<double> row(tgt_out.size());
      for (std::size_t i = 0; i < tgt_out.size(); ++i)
        row[i] = static_cast<double>(probs.at(static_cast<int>(i), tgt_out[i]));
      cm.rows.push_back(std::move(row));
    }
    return cm;
  }

  // Full forced-decoding confidence matrix: one row per source prefix length.
  ConfidenceMatrix forced_confidence_matrix(const SentencePair& pair) const {
    std::vector<int> all(with_eos(pair.source).size());
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = static_cast<int>(j) + 1;
    return probability_stream(pair, all);
  }

 private:
  ModelConfig cfg_;
  ParameterSet<Real> params_;
  std::vector<Real> posenc_;  // max_len x dim, sinusoidal

  const Tensor<Real>& param(const std::string& path) const { return params_.at(path); }

  void init_params(Rng& rng) {
    int d = cfg_.dim, f = cfg_.ffn_dim;
    add_param(params_, "src_embed", {cfg_.src_vocab, d}, cfg_.src_vocab, d, rng);
    add_param(params_, "tgt_embed", {cfg_.tgt_vocab, d}, cfg_.tgt_vocab, d, rng);
    auto attn = [&](const std::string& p) {
      add_param(params_, p + "/wq", {d, d}, d, d, rng);
      add_param(params_, p + "/wk", {d, d}, d, d, rng);
      add_param(params_, p + "/wv", {d, d}, d, d, rng);
      add_param(params_, p + "/wo", {d, d}, d, d, rng);
      add_param_const(params_, p + "/bq", {1, d}, Real(0));
      add_param_const(params_, p + "/bk", {1, d}, Real(0));
      add_param_const(params_, p + "/bv", {1, d}, Real(0));
      add_param_const(params_, p + "/bo", {1, d}, Real(0));
      add_param_const(params_, p + "/norm/gain", {1, d}, Real(1));
      add_param_const(params_, p + "/norm/shift", {1, d}, Real(0));
    };
    auto ffn = [&](const std::string& p) {
      add_param(params_, p + "/w1", {d, f}, d, f, rng);
      add_param(params_, p + "/w2", {f, d}, f, d, rng);
      add_param_const(params_, p + "/b1", {1, f}, Real(0));
      add_param_const(params_, p + "/b2", {1, d}, Real(0));
      add_param_const(params_, p + "/norm/gain", {1, d}, Real(1));
      add_param_const(params_, p + "/norm/shift", {1, d}, Real(0));
    };
    for (int l = 0; l < cfg_.enc_layers; ++l) {
      attn("enc/l" + std::to_string(l) + "/self");
      ffn("enc/l" + std::to_string(l) + "/ffn");
    }
    for (int l = 0; l < cfg_.dec_layers; ++l) {
      attn("dec/l" + std::to_string(l) + "/self");
      attn("dec/l" + std::to_string(l) + "/cross");
      ffn("dec/l" + std::to_string(l) + "/ffn");
    }
    add_param_const(params_, "enc/final_norm/gain", {1, d}, Real(1));
    add_param_const(params_, "enc/final_norm/shift", {1, d}, Real(0));
    add_param_const(params_, "dec/final_norm/gain", {1, d}, Real(1));
    add_param_const(params_, "dec/final_norm/shift", {1, d}, Real(0));
    add_param(params_, "out/weight", {d, cfg_.tgt_vocab}, d, cfg_.tgt_vocab, rng);
    add_param_const(params_, "out/bias", {1, cfg_.tgt_vocab}, Real(0));
  }

  void build_posenc() {
    int d = cfg_.dim;
    posenc_.assign(static_cast<std::size_t>(cfg_.max_len) * d, Real(0));
    for (int pos = 0; pos < cfg_.max_len; ++pos)
      for (int i = 0; i < d / 2; ++i) {
        double angle = pos / std::pow(10000.0, 2.0 * i / d);
        posenc_[static_cast<std::size_t>(pos) * d + 2 * i] = static_cast<Real>(std::sin(angle));
        posenc_[static_cast<std::size_t>(pos) * d + 2 * i + 1] = static_cast<Real>(std::cos(angle));
      }
  }

  Tensor<Real> embed(const std::vector<int>& ids, const std::string& table) const {
    auto x = scale(gather_rows(param(table), ids),
                   static_cast<Real>(std::sqrt(static_cast<double>(cfg_.dim))));
    std::vector<Real> pe(posenc_.begin(), posenc_.begin() + x.size());
    return add_const(x, pe);
  }

  // Pre-norm residual attention sublayer; kv = x for self-attention.
  Tensor<Real> attn_block(const Tensor<Real>& x, const Tensor<Real>& kv, const std::string& p,
                          const std::vector<std::uint8_t>* mask) const {
    auto xn = layer_norm(x, param(p + "/norm/gain"), param(p + "/norm/shift"));
    const Tensor<Real>& kvn = (kv.node() == x.node()) ? xn : kv;
    auto q = linear_forward(xn, param(p + "/wq"), param(p + "/bq"));
    auto k = linear_forward(kvn, param(p + "/wk"), param(p + "/bk"));
    auto v = linear_forward(kvn, param(p + "/wv"), param(p + "/bv"));
    auto a = multi_head_attention(q, k, v, cfg_.heads, mask);
    return add(x, linear_forward(a, param(p + "/wo"), param(p + "/bo")));
  }

  Tensor<Real> ffn_block(const Tensor<Real>& x, const std::string& p) const {
    auto xn = layer_norm(x, param(p + "/norm/gain"), param(p + "/norm/shift"));
    auto h = relu(linear_forward(xn, param(p + "/w1"), param(p + "/b1")));
    return add(x, linear_forward(h, param(p + "/w2"), param(p + "/b2")));
  }
};

}  // namespace simtlab
