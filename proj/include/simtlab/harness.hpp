#pragma once
// Experiment driver: corpus mixing, model training orchestration, latency
// sweeps, the monotonicity bin study, ablations, and the end-to-end pipeline.
// Every run is a pure function of (config, seed); metric TSVs are byte-stable.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "simtlab/data.hpp"
#include "simtlab/metrics.hpp"
#include "simtlab/policy.hpp"
#include "simtlab/trainer.hpp"

#include "json.hpp"

namespace simtlab {

using real_t = float;  // training storage precision

struct ExperimentConfig {
  std::string out_dir = "out";
  std::uint64_t seed = 1;

  // corpus mixture: one sub-corpus per (distortion, block) pair
  int sentences = 2000;
  int test_sentences = 200;
  int len_min = 8;
  int len_max = 16;
  int vocab = 30;
  int cipher_offset = 1;
  std::vector<double> distortions{0.6};
  std::vector<int> blocks{4};
  std::vector<int> group_content_min;  // per-group source content floor (empty: all groups use 3)
  std::vector<int> group_content_max;  // per-group source content ceiling (empty: full vocab)

  // model
  int dim = 64, ffn_dim = 256, heads = 2, enc_layers = 2, dec_layers = 2, max_len = 64;

  // training
  int pretrain_steps = 1500, finetune_steps = 600, waitk_steps = 1500;
  int batch_size = 16, prefix_cap = 10;
  double pretrain_lr = 2.5e-4, finetune_lr = 5e-5;
  int k_train = 9;
  WeightConfig weights;

  // inference
  double th_max = 0.9;
  std::vector<std::pair<int, double>> threshold_grid = default_threshold_grid();
  std::vector<int> k_grid{1, 2, 3, 4, 5, 7, 9};
  int bins = 4;
  int bin_k = 5;  // wait-k used by the monotonicity study
  std::vector<double> ablation_deltas{0.5, 2.0, 7.0};
  int ablation_lmax = 9;

  static std::vector<std::pair<int, double>> default_threshold_grid() {
    std::vector<std::pair<int, double>> g;
    for (double d : {0.1, 0.3, 0.5, 0.9, 1.5, 2.0, 3.0, 5.0}) g.emplace_back(9, d);
    for (double d : {1.5, 3.0, 5.0}) g.emplace_back(19, d);
    return g;
  }

  ModelConfig model_config() const {
    ModelConfig mc;
    mc.src_vocab = vocab;
    mc.tgt_vocab = vocab;
    mc.dim = dim;
    mc.ffn_dim = ffn_dim;
    mc.heads = heads;
    mc.enc_layers = enc_layers;
    mc.dec_layers = dec_layers;
    mc.max_len = max_len;
    mc.seed = seed;
    return mc;
  }

  Vocab vocab_table() const { return Vocab{vocab, cipher_offset}; }
};

// ---- config file (flat key=value; lists are colon-separated) ----

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t next = s.find(sep, pos);
    if (next == std::string::npos) next = s.size();
    if (next > pos) out.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

}  // namespace detail

inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& val) {
  auto ints = [&] {
    std::vector<int> out;
    for (auto& t : detail::split(val, ':')) out.push_back(std::stoi(t));
    return out;
  };
  auto doubles = [&] {
    std::vector<double> out;
    for (auto& t : detail::split(val, ':')) out.push_back(std::stod(t));
    return out;
  };
  if (key == "out_dir") cfg.out_dir = val;
  else if (key == "seed") cfg.seed = std::stoull(val);
  else if (key == "sentences") cfg.sentences = std::stoi(val);
  else if (key == "test_sentences") cfg.test_sentences = std::stoi(val);
  else if (key == "len_min") cfg.len_min = std::stoi(val);
  else if (key == "len_max") cfg.len_max = std::stoi(val);
  else if (key == "vocab") cfg.vocab = std::stoi(val);
  else if (key == "cipher_offset") cfg.cipher_offset = std::stoi(val);
  else if (key == "distortions") cfg.distortions = doubles();
  else if (key == "blocks") cfg.blocks = ints();
  else if (key == "group_content_min") cfg.group_content_min = ints();
  else if (key == "group_content_max") cfg.group_content_max = ints();
  else if (key == "dim") cfg.dim = std::stoi(val);
  else if (key == "ffn_dim") cfg.ffn_dim = std::stoi(val);
  else if (key == "heads") cfg.heads = std::stoi(val);
  else if (key == "enc_layers") cfg.enc_layers = std::stoi(val);
  else if (key == "dec_layers") cfg.dec_layers = std::stoi(val);
  else if (key == "max_len") cfg.max_len = std::stoi(val);
  else if (key == "pretrain_steps") cfg.pretrain_steps = std::stoi(val);
  else if (key == "finetune_steps") cfg.finetune_steps = std::stoi(val);
  else if (key == "waitk_steps") cfg.waitk_steps = std::stoi(val);
  else if (key == "batch_size") cfg.batch_size = std::stoi(val);
  else if (key == "prefix_cap") cfg.prefix_cap = std::stoi(val);
  else if (key == "pretrain_lr") cfg.pretrain_lr = std::stod(val);
  else if (key == "finetune_lr") cfg.finetune_lr = std::stod(val);
  else if (key == "k_train") cfg.k_train = std::stoi(val);
  else if (key == "lambda") cfg.weights.lambda = std::stod(val);
  else if (key == "gamma") cfg.weights.gamma = std::stod(val);
  else if (key == "th_max") cfg.th_max = std::stod(val);
  else if (key == "k_grid") cfg.k_grid = ints();
  else if (key == "bins") cfg.bins = std::stoi(val);
  else if (key == "bin_k") cfg.bin_k = std::stoi(val);
  else if (key == "ablation_deltas") cfg.ablation_deltas = doubles();
  else if (key == "ablation_lmax") cfg.ablation_lmax = std::stoi(val);
  else if (key == "threshold_grid") {
    // entries "lmax,delta" joined by ':'
    cfg.threshold_grid.clear();
    for (auto& t : detail::split(val, ':')) {
      auto parts = detail::split(t, ',');
      if (parts.size() != 2) throw std::invalid_argument("threshold_grid entry must be lmax,delta");
      cfg.threshold_grid.emplace_back(std::stoi(parts[0]), std::stod(parts[1]));
    }
  } else {
    throw std::invalid_argument("unknown config key: " + key);
  }
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file " + path);
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key=value");
    apply_config_entry(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

// ---- corpus assembly ----

inline std::vector<SentencePair> mixed_corpus(const ExperimentConfig& cfg, int total,
                                              std::uint64_t seed) {
  if (cfg.distortions.size() != cfg.blocks.size() || cfg.distortions.empty())
    throw std::invalid_argument("mixed_corpus: distortions and blocks must pair up");
  std::vector<SentencePair> out;
  int n = static_cast<int>(cfg.distortions.size());
  for (int g = 0; g < n; ++g) {
    CorpusSpec spec;
    spec.sentences = total / n + (g < total % n ? 1 : 0);
    spec.len_min = cfg.len_min;
    spec.len_max = cfg.len_max;
    spec.vocab = cfg.vocab;
    spec.cipher_offset = cfg.cipher_offset;
    spec.distortion = cfg.distortions[g];
    spec.block = cfg.blocks[g];
    if (g < static_cast<int>(cfg.group_content_min.size()))
      spec.content_min = cfg.group_content_min[g];
    if (g < static_cast<int>(cfg.group_content_max.size()))
      spec.content_max = cfg.group_content_max[g];
    spec.seed = seed ^ (0xD15717ULL * static_cast<std::uint64_t>(g + 1));
    auto sub = generate_corpus(spec);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

// ---- evaluation ----

struct PolicyEval {
  double al = 0.0;
  double bleu = 0.0;
  double rh = 0.0;
  std::vector<ReadWriteTrace> traces;
};

template <class Policy>
PolicyEval evaluate_policy(const std::vector<SentencePair>& test, const Vocab& vocab,
                           Policy&& run_one) {
  PolicyEval ev;
  std::vector<ContentTrace> content;
  std::vector<std::vector<int>> hyps, refs;
  double al_sum = 0.0;
  for (const auto& pair : test) {
    ReadWriteTrace trace = run_one(pair);
    ContentTrace ct = content_view(trace);
    if (ct.tokens.empty()) {  // degenerate empty hypothesis still participates in BLEU
      ct.tokens.clear();
      ct.delays.clear();
      al_sum += static_cast<double>(pair.source.size());
    } else {
      al_sum += average_lagging(ct, static_cast<int>(pair.source.size()));
    }
    hyps.push_back(ct.tokens);
    refs.push_back(pair.target);
    content.push_back(std::move(ct));
    ev.traces.push_back(std::move(trace));
  }
  ev.al = al_sum / static_cast<double>(test.size());
  ev.bleu = corpus_bleu(hyps, refs);
  AlignmentOracle oracle = [&](std::size_t s, const ContentTrace& t) {
    return oracle_align_hypothesis(test[s].source, t.tokens, vocab);
  };
  ev.rh = hallucination_ratio(content, oracle);
  return ev;
}

// ---- model training orchestration (with checkpoint reuse) ----

template <class Real>
Model<Real> train_or_load(const ExperimentConfig& cfg, const std::vector<SentencePair>& train,
                          const std::string& ckpt_path, TrainPhase phase,
                          const std::string& pretrain_ckpt = "",
                          bool beta_off = false, bool diag_off = false) {
  if (std::filesystem::exists(ckpt_path)) return load_model<Real>(ckpt_path);
  Model<Real> model(cfg.model_config());
  AdamState<Real> opt;
  if (phase == TrainPhase::finetune_cbsimt) {
    if (pretrain_ckpt.empty()) throw std::invalid_argument("finetune requires a pretrain checkpoint");
    auto ck = load_checkpoint(pretrain_ckpt);
    restore_model(model, ck);
  }
  TrainPlan plan;
  plan.phase = phase;
  plan.seed = cfg.seed;
  plan.batch_size = cfg.batch_size;
  plan.prefix_cap = cfg.prefix_cap;
  plan.k = cfg.k_train;
  plan.weights = cfg.weights;
  plan.beta_off = beta_off;
  plan.diag_off = diag_off;
  switch (phase) {
    case TrainPhase::pretrain_offline:
      plan.steps = cfg.pretrain_steps;
      plan.learning_rate = cfg.pretrain_lr;
      break;
    case TrainPhase::finetune_cbsimt:
      plan.steps = cfg.finetune_steps;
      plan.learning_rate = cfg.finetune_lr;
      break;
    case TrainPhase::train_waitk:
      plan.steps = cfg.waitk_steps;
      plan.learning_rate = cfg.pretrain_lr;
      break;
  }
  plan.log_path = ckpt_path + ".log.tsv";
  run_training(model, opt, train, plan);
  save_checkpoint(ckpt_path, header_for(model.config()), model.params(), &opt);
  return model;
}

// ---- reports ----

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checksum: cannot open " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[65536];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i)
      h = (h ^ static_cast<unsigned char>(buf[i])) * 1099511628211ULL;
    if (!is) break;
  }
  return h;
}

struct ExperimentReport {
  std::vector<LatencyQualityPoint> points;
  std::map<std::string, std::string> config_echo;
  std::vector<std::string> artifacts;
  double wall_seconds = 0.0;

  void save(const std::string& path) const {
    nlohmann::json j;
    for (const auto& p : points)
      j["points"].push_back({{"policy", p.policy},
                             {"setting", p.setting},
                             {"al", p.al},
                             {"bleu", p.bleu},
                             {"hallucination", p.hallucination},
                             {"trace", p.trace_path}});
    j["config"] = config_echo;
    j["wall_seconds"] = wall_seconds;
    for (const auto& a : artifacts) {
      char h[32];
      std::snprintf(h, sizeof h, "%016llx",
                    static_cast<unsigned long long>(fnv1a_file(a)));
      j["checksums"][a] = h;
    }
    std::ofstream os(path, std::ios::trunc);
    os << j.dump(2) << "\n";
  }
};

// ---- subcommand implementations ----

// Latency-quality sweep (threshold-policy grid vs wait-k grid) on a shared
// test set; one point per setting, trace files persisted per point.
inline ExperimentReport cmd_latency_sweep(const ExperimentConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(cfg.out_dir);
  auto train = mixed_corpus(cfg, cfg.sentences, cfg.seed);
  auto test = mixed_corpus(cfg, cfg.test_sentences, cfg.seed ^ 0x7e57ULL);
  Vocab vocab = cfg.vocab_table();

  auto pretrain_path = cfg.out_dir + "/pretrain.ckpt";
  auto cbsimt_path = cfg.out_dir + "/cbsimt.ckpt";
  auto waitk_path = cfg.out_dir + "/waitk.ckpt";
  train_or_load<real_t>(cfg, train, pretrain_path, TrainPhase::pretrain_offline);
  Model<real_t> cbsimt =
      train_or_load<real_t>(cfg, train, cbsimt_path, TrainPhase::finetune_cbsimt, pretrain_path);
  Model<real_t> waitk = train_or_load<real_t>(cfg, train, waitk_path, TrainPhase::train_waitk);

  ExperimentReport report;
  auto add_point = [&](const std::string& policy, const std::string& setting, const PolicyEval& ev,
                       const std::string& trace_path) {
    write_traces(trace_path, ev.traces);
    report.points.push_back({policy, setting, ev.al, ev.bleu, ev.rh, trace_path});
    report.artifacts.push_back(trace_path);
  };

  auto cb_pred = model_predictor(cbsimt);
  for (std::size_t g = 0; g < cfg.threshold_grid.size(); ++g) {
    auto [lmax, delta] = cfg.threshold_grid[g];
    InferenceConfig ic;
    ic.policy = PolicyKind::threshold;
    ic.th_max = cfg.th_max;
    ic.l_max = lmax;
    ic.delta = delta;
    auto ev = evaluate_policy(test, vocab, [&](const SentencePair& pair) {
      return translate_threshold(cb_pred, Model<real_t>::with_eos(pair.source), ic);
    });
    std::ostringstream set;
    set << "lmax=" << lmax << ",delta=" << fmt(delta);
    add_point("threshold", set.str(), ev,
              cfg.out_dir + "/traces_threshold_" + std::to_string(g) + ".jsonl");
  }
  auto wk_pred = model_predictor(waitk);
  for (int k : cfg.k_grid) {
    auto ev = evaluate_policy(test, vocab, [&](const SentencePair& pair) {
      return translate_waitk(wk_pred, Model<real_t>::with_eos(pair.source), k);
    });
    add_point("waitk", "k=" + std::to_string(k), ev,
              cfg.out_dir + "/traces_waitk_" + std::to_string(k) + ".jsonl");
  }

  std::ofstream tsv(cfg.out_dir + "/sweep.tsv", std::ios::trunc);
  tsv << "policy\tsetting\tal\tbleu\thallucination\ttrace\n";
  for (const auto& p : report.points)
    tsv << p.policy << '\t' << p.setting << '\t' << fmt(p.al) << '\t' << fmt(p.bleu) << '\t'
        << fmt(p.hallucination) << '\t' << p.trace_path << '\n';
  tsv.close();
  report.artifacts.push_back(cfg.out_dir + "/sweep.tsv");
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report.save(cfg.out_dir + "/report.json");
  return report;
}

struct BinStudyRow {
  int bin = 0;
  std::string policy;
  double bleu = 0.0;
  double decrease_rate = 0.0;
  double rh = 0.0;
};

// Fig.-1-style study: train offline and wait-k models per AA bin, evaluate on
// one shared test set; decrease rate is (BLEU_bin0 - BLEU_bin)/BLEU_bin0.
inline std::vector<BinStudyRow> cmd_monotonicity_study(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  auto corpus = mixed_corpus(cfg, cfg.sentences, cfg.seed);
  auto test = mixed_corpus(cfg, cfg.test_sentences, cfg.seed ^ 0x7e57ULL);
  Vocab vocab = cfg.vocab_table();
  auto bins = bin_by_aa(corpus, cfg.bins);
  for (const auto& b : bins.bins)
    if (b.size() < static_cast<std::size_t>(cfg.batch_size))
      throw std::runtime_error("bin-study: bin too small to train");

  std::vector<BinStudyRow> rows;
  for (int b = 0; b < cfg.bins; ++b) {
    std::vector<SentencePair> sub;
    for (int idx : bins.bins[b]) sub.push_back(corpus[idx]);
    auto off_path = cfg.out_dir + "/bin" + std::to_string(b) + "_offline.ckpt";
    auto wk_path = cfg.out_dir + "/bin" + std::to_string(b) + "_waitk.ckpt";
    ExperimentConfig bcfg = cfg;
    bcfg.k_train = cfg.bin_k;
    bcfg.waitk_steps = cfg.waitk_steps;
    Model<real_t> offline = train_or_load<real_t>(bcfg, sub, off_path, TrainPhase::pretrain_offline);
    Model<real_t> waitk = train_or_load<real_t>(bcfg, sub, wk_path, TrainPhase::train_waitk);

    auto off_pred = model_predictor(offline);
    auto off_ev = evaluate_policy(test, vocab, [&](const SentencePair& pair) {
      return translate_offline(off_pred, Model<real_t>::with_eos(pair.source));
    });
    auto wk_pred = model_predictor(waitk);
    auto wk_ev = evaluate_policy(test, vocab, [&](const SentencePair& pair) {
      return translate_waitk(wk_pred, Model<real_t>::with_eos(pair.source), cfg.bin_k);
    });
    write_traces(cfg.out_dir + "/bin" + std::to_string(b) + "_offline.jsonl", off_ev.traces);
    write_traces(cfg.out_dir + "/bin" + std::to_string(b) + "_waitk.jsonl", wk_ev.traces);
    rows.push_back({b, "offline", off_ev.bleu, 0.0, off_ev.rh});
    rows.push_back({b, "waitk", wk_ev.bleu, 0.0, wk_ev.rh});
  }
  double off0 = rows[0].bleu, wk0 = rows[1].bleu;
  for (auto& r : rows) {
    double base = r.policy == "offline" ? off0 : wk0;
    r.decrease_rate = base > 0 ? (base - r.bleu) / base : 0.0;
  }
  std::ofstream tsv(cfg.out_dir + "/bin_study.tsv", std::ios::trunc);
  tsv << "bin\tpolicy\tbleu\tdecrease_rate\thallucination\n";
  for (const auto& r : rows)
    tsv << r.bin << '\t' << r.policy << '\t' << fmt(r.bleu) << '\t' << fmt(r.decrease_rate) << '\t'
        << fmt(r.rh) << '\n';
  return rows;
}

struct AblationRow {
  std::string variant;
  double bleu = 0.0, al = 0.0;
  double delta_bleu = 0.0, delta_al = 0.0;
  double mean_beta = 1.0;
};

// Four fine-tunes from one shared pretrain: full, w/o beta, w/o D, w/o both;
// BLEU and AL averaged over the fixed inference settings.
inline std::vector<AblationRow> cmd_ablation(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  auto train = mixed_corpus(cfg, cfg.sentences, cfg.seed);
  auto test = mixed_corpus(cfg, cfg.test_sentences, cfg.seed ^ 0x7e57ULL);
  Vocab vocab = cfg.vocab_table();
  auto pretrain_path = cfg.out_dir + "/pretrain.ckpt";
  train_or_load<real_t>(cfg, train, pretrain_path, TrainPhase::pretrain_offline);

  struct Variant {
    const char* name;
    bool beta_off, diag_off;
  };
  const Variant variants[] = {{"full", false, false},
                              {"wo_beta", true, false},
                              {"wo_diag", false, true},
                              {"wo_both", true, true}};
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    auto path = cfg.out_dir + "/cbsimt_" + v.name + ".ckpt";
    Model<real_t> model = train_or_load<real_t>(cfg, train, path, TrainPhase::finetune_cbsimt,
                                                pretrain_path, v.beta_off, v.diag_off);
    auto pred = model_predictor(model);
    double bleu_sum = 0.0, al_sum = 0.0;
    for (double delta : cfg.ablation_deltas) {
      InferenceConfig ic;
      ic.policy = PolicyKind::threshold;
      ic.th_max = cfg.th_max;
      ic.l_max = cfg.ablation_lmax;
      ic.delta = delta;
      auto ev = evaluate_policy(test, vocab, [&](const SentencePair& pair) {
        return translate_threshold(pred, Model<real_t>::with_eos(pair.source), ic);
      });
      bleu_sum += ev.bleu;
      al_sum += ev.al;
    }
    AblationRow row;
    row.variant = v.name;
    row.bleu = bleu_sum / cfg.ablation_deltas.size();
    row.al = al_sum / cfg.ablation_deltas.size();
    rows.push_back(row);
  }
  for (auto& r : rows) {
    r.delta_bleu = r.bleu - rows[0].bleu;
    r.delta_al = r.al - rows[0].al;
  }
  std::ofstream tsv(cfg.out_dir + "/ablation.tsv", std::ios::trunc);
  tsv << "variant\tbleu\tdelta_bleu\tal\tdelta_al\n";
  for (const auto& r : rows)
    tsv << r.variant << '\t' << fmt(r.bleu) << '\t' << fmt(r.delta_bleu) << '\t' << fmt(r.al)
        << '\t' << fmt(r.delta_al) << '\n';
  return rows;
}

// gen -> pretrain -> finetune -> sweep, stage-resumable: a stage is skipped
// when its artifacts already exist, so a rerun reproduces the same bytes.
inline ExperimentReport cmd_end_to_end(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  auto corpus_dir = cfg.out_dir + "/corpus";
  try {
    if (!std::filesystem::exists(corpus_dir + "/corpus.src")) {
      auto train = mixed_corpus(cfg, cfg.sentences, cfg.seed);
      write_corpus(corpus_dir, train);
      auto test = mixed_corpus(cfg, cfg.test_sentences, cfg.seed ^ 0x7e57ULL);
      write_corpus(cfg.out_dir + "/corpus_test", test);
    }
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("e2e stage gen-data failed: ") + e.what());
  }
  try {
    return cmd_latency_sweep(cfg);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("e2e stage sweep failed: ") + e.what());
  }
}

}  // namespace simtlab
