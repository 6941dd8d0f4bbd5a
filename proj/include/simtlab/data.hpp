#pragma once
// Synthetic translation tasks: a token cipher with controllable monotonicity.
// A fraction of each sentence is permuted by reversing non-overlapping blocks,
// and every pair carries its exact oracle alignment, so anticipation and
// hallucination are measurable without an external aligner.

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "simtlab/model.hpp"
#include "simtlab/rng.hpp"

namespace simtlab {

struct CorpusSpec {
  int sentences = 1000;
  int len_min = 5;
  int len_max = 10;
  int vocab = 20;           // shared size for source and target vocabularies
  double distortion = 0.0;  // fraction of positions inside reversed blocks
  int block = 2;            // reversal block size
  int cipher_offset = 1;
  int content_min = kNumSpecial;  // source content ids drawn from [content_min, content_max)
  int content_max = 0;            // 0: use vocab
  std::uint64_t seed = 1;

  int content_hi() const { return content_max > 0 ? content_max : vocab; }

  void validate() const {
    if (sentences < 0) throw std::invalid_argument("CorpusSpec: negative sentence count");
    if (len_min < 1 || len_max < len_min) throw std::invalid_argument("CorpusSpec: bad length range");
    if (vocab <= kNumSpecial) throw std::invalid_argument("CorpusSpec: vocab too small");
    if (content_min < kNumSpecial || content_min >= content_hi() || content_hi() > vocab)
      throw std::invalid_argument("CorpusSpec: bad content range");
    if (distortion < 0.0 || distortion > 1.0)
      throw std::invalid_argument("CorpusSpec: distortion must be in [0,1]");
    if (distortion > 0.0 && (block < 2 || block > len_min))
      throw std::invalid_argument("CorpusSpec: need 2 <= block <= len_min when distortion > 0");
  }
};

// Content ids occupy [kNumSpecial, vocab). The cipher is a bijection on that range.
struct Vocab {
  int size = 0;
  int offset = 1;

  int content_count() const { return size - kNumSpecial; }

  int cipher(int src_token) const {
    int c = src_token - kNumSpecial;
    return kNumSpecial + (c + offset) % content_count();
  }
  int inverse(int tgt_token) const {
    int c = tgt_token - kNumSpecial;
    return kNumSpecial + (c - offset % content_count() + content_count()) % content_count();
  }
};

inline Vocab build_vocab(const CorpusSpec& spec) {
  spec.validate();
  return Vocab{spec.vocab, spec.cipher_offset};
}

inline double average_anticipation_of(const std::vector<std::pair<int, int>>& alignment) {
  if (alignment.empty()) throw std::invalid_argument("average_anticipation: empty alignment set");
  double s = 0.0;
  for (auto [i, j] : alignment) s += std::max(i - j, 0);
  return s / static_cast<double>(alignment.size());
}

// Target order: identity permutation with floor(distortion*L/block) aligned
// blocks chosen uniformly without replacement and reversed.
inline SentencePair generate_pair(const CorpusSpec& spec, const Vocab& vocab, Rng& rng) {
  int len = rng.next_int(spec.len_min, spec.len_max);
  SentencePair pair;
  pair.source.resize(len);
  for (auto& t : pair.source) t = rng.next_int(spec.content_min, spec.content_hi() - 1);

  std::vector<int> perm(len);
  for (int i = 0; i < len; ++i) perm[i] = i;
  if (spec.distortion > 0.0) {
    int slots = len / spec.block;
    int nblocks = static_cast<int>(spec.distortion * len / spec.block);
    if (nblocks > slots) throw std::invalid_argument("generate_pair: infeasible block layout");
    auto chosen = rng.sample_without_replacement(0, slots - 1, nblocks);
    for (int slot : chosen) {
      int lo = slot * spec.block, hi = lo + spec.block - 1;
      while (lo < hi) std::swap(perm[lo++], perm[hi--]);
    }
  }

  pair.target.resize(len);
  for (int j = 0; j < len; ++j) {
    pair.target[j] = vocab.cipher(pair.source[perm[j]]);
    pair.alignment.emplace_back(perm[j] + 1, j + 1);  // (source idx, target idx), 1-based
  }
  pair.aa = average_anticipation_of(pair.alignment);
  return pair;
}

inline std::vector<SentencePair> generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  Vocab vocab = build_vocab(spec);
  std::vector<SentencePair> corpus;
  corpus.reserve(spec.sentences);
  for (int s = 0; s < spec.sentences; ++s) {
    Rng rng = Rng::stream(spec.seed, static_cast<std::uint64_t>(s));
    corpus.push_back(generate_pair(spec, vocab, rng));
  }
  return corpus;
}

// ---- AA binning ----

struct CorpusBins {
  std::vector<std::vector<int>> bins;  // pair indices, ascending AA across bins
};

inline CorpusBins bin_by_aa(const std::vector<SentencePair>& corpus, int bin_count = 4) {
  if (corpus.empty()) throw std::invalid_argument("bin_by_aa: empty corpus");
  if (bin_count < 1) throw std::invalid_argument("bin_by_aa: bad bin count");
  std::vector<int> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return corpus[a].aa < corpus[b].aa; });
  CorpusBins out;
  out.bins.resize(bin_count);
  std::size_t per = corpus.size() / static_cast<std::size_t>(bin_count);
  std::size_t pos = 0;
  for (int b = 0; b < bin_count; ++b) {
    std::size_t take = (b == bin_count - 1) ? corpus.size() - pos : per;
    for (std::size_t i = 0; i < take; ++i) out.bins[b].push_back(order[pos++]);
  }
  return out;
}

// ---- batching ----

struct Batch {
  std::vector<int> indices;
  std::vector<std::vector<int>> src_padded, tgt_padded;  // PAD-filled to batch max
  std::vector<int> src_len, tgt_len;
};

inline std::vector<Batch> make_batches(const std::vector<SentencePair>& corpus, int batch_size,
                                       std::uint64_t seed) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch size must be >= 1");
  std::vector<int> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<Batch> out;
  for (std::size_t pos = 0; pos < order.size(); pos += batch_size) {
    Batch b;
    std::size_t end = std::min(order.size(), pos + batch_size);
    int max_src = 0, max_tgt = 0;
    for (std::size_t i = pos; i < end; ++i) {
      b.indices.push_back(order[i]);
      max_src = std::max(max_src, static_cast<int>(corpus[order[i]].source.size()));
      max_tgt = std::max(max_tgt, static_cast<int>(corpus[order[i]].target.size()));
    }
    for (int idx : b.indices) {
      auto s = corpus[idx].source;
      auto t = corpus[idx].target;
      b.src_len.push_back(static_cast<int>(s.size()));
      b.tgt_len.push_back(static_cast<int>(t.size()));
      s.resize(max_src, kPad);
      t.resize(max_tgt, kPad);
      b.src_padded.push_back(std::move(s));
      b.tgt_padded.push_back(std::move(t));
    }
    out.push_back(std::move(b));
  }
  return out;
}

// Unpadded view of one batch row; losses consume only real tokens, so padding
// contributes exactly zero.
inline SentencePair batch_pair(const std::vector<SentencePair>& corpus, const Batch& b, int row) {
  return corpus[b.indices[row]];
}

// ---- corpus files ----
// Triple of aligned text files (source / target / Pharaoh alignment) plus the
// spec as a flat key=value file.

namespace detail {

inline std::string int_line(const std::vector<int>& ids) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ids.size(); ++i) os << (i ? " " : "") << ids[i];
  return os.str();
}

inline std::vector<int> parse_int_line(const std::string& line, const std::string& file, int lineno) {
  std::vector<int> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t used = 0;
      int v = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw std::runtime_error(file + ":" + std::to_string(lineno) + ": malformed token '" + tok + "'");
    }
  }
  return out;
}

}  // namespace detail

inline void write_corpus(const std::string& dir, const std::vector<SentencePair>& corpus,
                         const CorpusSpec* spec = nullptr) {
  std::filesystem::create_directories(dir);
  std::ofstream src(dir + "/corpus.src"), tgt(dir + "/corpus.tgt"), aln(dir + "/corpus.align");
  if (!src || !tgt || !aln) throw std::runtime_error("write_corpus: cannot open files in " + dir);
  for (const auto& pair : corpus) {
    src << detail::int_line(pair.source) << "\n";
    tgt << detail::int_line(pair.target) << "\n";
    for (std::size_t a = 0; a < pair.alignment.size(); ++a)
      aln << (a ? " " : "") << pair.alignment[a].first << "-" << pair.alignment[a].second;
    aln << "\n";
  }
  if (spec) {
    std::ofstream sp(dir + "/corpus.spec");
    sp << "sentences=" << spec->sentences << "\nlen_min=" << spec->len_min
       << "\nlen_max=" << spec->len_max << "\nvocab=" << spec->vocab
       << "\ndistortion=" << spec->distortion << "\nblock=" << spec->block
       << "\ncipher_offset=" << spec->cipher_offset << "\ncontent_min=" << spec->content_min
       << "\ncontent_max=" << spec->content_max << "\nseed=" << spec->seed << "\n";
  }
}

inline std::vector<SentencePair> read_corpus(const std::string& dir) {
  std::ifstream src(dir + "/corpus.src"), tgt(dir + "/corpus.tgt"), aln(dir + "/corpus.align");
  if (!src || !tgt || !aln) throw std::runtime_error("read_corpus: cannot open files in " + dir);
  std::vector<SentencePair> corpus;
  std::string sl, tl, al;
  int lineno = 0;
  while (std::getline(src, sl)) {
    ++lineno;
    if (!std::getline(tgt, tl) || !std::getline(aln, al))
      throw std::runtime_error("read_corpus: file length mismatch at line " + std::to_string(lineno));
    SentencePair pair;
    pair.source = detail::parse_int_line(sl, dir + "/corpus.src", lineno);
    pair.target = detail::parse_int_line(tl, dir + "/corpus.tgt", lineno);
    std::istringstream is(al);
    std::string tok;
    while (is >> tok) {
      std::size_t dash = tok.find('-');
      if (dash == std::string::npos)
        throw std::runtime_error(dir + "/corpus.align:" + std::to_string(lineno) +
                                 ": malformed pair '" + tok + "'");
      try {
        pair.alignment.emplace_back(std::stoi(tok.substr(0, dash)), std::stoi(tok.substr(dash + 1)));
      } catch (const std::exception&) {
        throw std::runtime_error(dir + "/corpus.align:" + std::to_string(lineno) +
                                 ": malformed pair '" + tok + "'");
      }
    }
    if (!pair.alignment.empty()) pair.aa = average_anticipation_of(pair.alignment);
    corpus.push_back(std::move(pair));
  }
  return corpus;
}

inline std::optional<CorpusSpec> read_corpus_spec(const std::string& dir) {
  std::ifstream sp(dir + "/corpus.spec");
  if (!sp) return std::nullopt;
  CorpusSpec spec;
  std::string line;
  while (std::getline(sp, line)) {
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "sentences") spec.sentences = std::stoi(v);
    else if (k == "len_min") spec.len_min = std::stoi(v);
    else if (k == "len_max") spec.len_max = std::stoi(v);
    else if (k == "vocab") spec.vocab = std::stoi(v);
    else if (k == "distortion") spec.distortion = std::stod(v);
    else if (k == "block") spec.block = std::stoi(v);
    else if (k == "cipher_offset") spec.cipher_offset = std::stoi(v);
    else if (k == "content_min") spec.content_min = std::stoi(v);
    else if (k == "content_max") spec.content_max = std::stoi(v);
    else if (k == "seed") spec.seed = std::stoull(v);
  }
  return spec;
}

// Oracle aligner for generated corpora: map each emitted token to the earliest
// unused source position carrying its pre-image under the cipher. Tokens with
// no available pre-image align to nothing.
inline std::vector<std::optional<int>> oracle_align_hypothesis(const std::vector<int>& source,
                                                               const std::vector<int>& hypothesis,
                                                               const Vocab& vocab) {
  std::vector<bool> used(source.size(), false);
  std::vector<std::optional<int>> out;
  out.reserve(hypothesis.size());
  for (int y : hypothesis) {
    std::optional<int> pos;
    if (y >= kNumSpecial && y < vocab.size) {
      int want = vocab.inverse(y);
      for (std::size_t q = 0; q < source.size(); ++q)
        if (!used[q] && source[q] == want) {
          used[q] = true;
          pos = static_cast<int>(q) + 1;  // 1-based
          break;
        }
    }
    out.push_back(pos);
  }
  return out;
}

}  // namespace simtlab
