// simtlab command-line driver.

#include <iostream>

#include "CLI11.hpp"

#include "simtlab/harness.hpp"

namespace {

using namespace simtlab;

ExperimentConfig make_config(const std::string& config_path,
                             const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  if (!config_path.empty()) cfg = load_experiment_config(config_path);
  for (const auto& kv : overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + kv);
    apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

int cmd_gen_data(const ExperimentConfig& cfg) {
  auto train = mixed_corpus(cfg, cfg.sentences, cfg.seed);
  write_corpus(cfg.out_dir + "/corpus", train);
  auto test = mixed_corpus(cfg, cfg.test_sentences, cfg.seed ^ 0x7e57ULL);
  write_corpus(cfg.out_dir + "/corpus_test", test);
  std::cout << "wrote " << train.size() << " train / " << test.size() << " test pairs under "
            << cfg.out_dir << "\n";
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& phase, const std::string& corpus_dir) {
  auto train = corpus_dir.empty() ? mixed_corpus(cfg, cfg.sentences, cfg.seed)
                                  : read_corpus(corpus_dir);
  std::filesystem::create_directories(cfg.out_dir);
  if (phase == "pretrain" || phase == "all") {
    train_or_load<real_t>(cfg, train, cfg.out_dir + "/pretrain.ckpt", TrainPhase::pretrain_offline);
    std::cout << "pretrain checkpoint: " << cfg.out_dir << "/pretrain.ckpt\n";
  }
  if (phase == "finetune" || phase == "all") {
    train_or_load<real_t>(cfg, train, cfg.out_dir + "/cbsimt.ckpt", TrainPhase::finetune_cbsimt,
                          cfg.out_dir + "/pretrain.ckpt");
    std::cout << "cbsimt checkpoint: " << cfg.out_dir << "/cbsimt.ckpt\n";
  }
  if (phase == "waitk") {
    train_or_load<real_t>(cfg, train, cfg.out_dir + "/waitk.ckpt", TrainPhase::train_waitk);
    std::cout << "waitk checkpoint: " << cfg.out_dir << "/waitk.ckpt\n";
  }
  return 0;
}

int cmd_translate(const ExperimentConfig& cfg, const std::string& checkpoint,
                  const std::string& corpus_dir, const std::string& policy,
                  const std::string& out_path) {
  Model<real_t> model = load_model<real_t>(checkpoint);
  auto test = read_corpus(corpus_dir);
  auto pred = model_predictor(model);
  std::vector<ReadWriteTrace> traces;
  for (const auto& pair : test) {
    auto src = Model<real_t>::with_eos(pair.source);
    if (policy == "offline") {
      traces.push_back(translate_offline(pred, src));
    } else if (policy == "waitk") {
      traces.push_back(translate_waitk(pred, src, cfg.k_grid.empty() ? 5 : cfg.k_grid.front()));
    } else {
      InferenceConfig ic;
      ic.th_max = cfg.th_max;
      ic.l_max = cfg.threshold_grid.empty() ? 9 : cfg.threshold_grid.front().first;
      ic.delta = cfg.threshold_grid.empty() ? 1.0 : cfg.threshold_grid.front().second;
      traces.push_back(translate_threshold(pred, src, ic));
    }
  }
  write_traces(out_path, traces);
  std::cout << "wrote " << traces.size() << " traces to " << out_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& traces_path, const std::string& corpus_dir) {
  auto traces = read_traces(traces_path);
  auto refs = read_corpus(corpus_dir);
  auto spec = read_corpus_spec(corpus_dir);
  if (!spec) throw std::runtime_error("evaluate: corpus.spec required for the alignment oracle");
  Vocab vocab = build_vocab(*spec);
  if (traces.size() != refs.size()) throw std::runtime_error("evaluate: trace/corpus count mismatch");
  std::vector<ContentTrace> content;
  std::vector<std::vector<int>> hyps, rr;
  double al = 0.0;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    auto ct = content_view(traces[i]);
    al += ct.tokens.empty() ? static_cast<double>(refs[i].source.size())
                            : average_lagging(ct, static_cast<int>(refs[i].source.size()));
    hyps.push_back(ct.tokens);
    rr.push_back(refs[i].target);
    content.push_back(std::move(ct));
  }
  al /= static_cast<double>(traces.size());
  double bleu = corpus_bleu(hyps, rr);
  double rh = hallucination_ratio(content, [&](std::size_t s, const ContentTrace& t) {
    return oracle_align_hypothesis(refs[s].source, t.tokens, vocab);
  });
  std::cout << "al\tbleu\thallucination\n"
            << fmt(al) << '\t' << fmt(bleu) << '\t' << fmt(rh) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simtlab: confidence-based simultaneous translation laboratory"};
  app.require_subcommand(1);

  std::string config_path, corpus_dir, checkpoint, traces_path, policy = "threshold";
  std::string phase = "all", out_path = "traces.jsonl";
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "experiment config file (key=value lines)");
  app.add_option("--set", overrides, "override config entries, key=value")->take_all();

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--phase", phase, "pretrain | finetune | waitk | all");
  train->add_option("--corpus", corpus_dir, "corpus directory (default: generate from config)");
  auto* translate = app.add_subcommand("translate", "decode a corpus with a policy");
  translate->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  translate->add_option("--corpus", corpus_dir, "corpus directory")->required();
  translate->add_option("--policy", policy, "offline | waitk | threshold");
  translate->add_option("--out", out_path, "output trace file (JSON lines)");
  auto* evaluate = app.add_subcommand("evaluate", "compute metrics for a trace file");
  evaluate->add_option("--traces", traces_path, "trace file")->required();
  evaluate->add_option("--corpus", corpus_dir, "reference corpus directory")->required();
  auto* sweep = app.add_subcommand("sweep", "latency-quality sweep");
  auto* bin_study = app.add_subcommand("bin-study", "monotonicity bin study");
  auto* ablate = app.add_subcommand("ablate", "weighting ablations");
  auto* e2e = app.add_subcommand("e2e", "full pipeline: gen, train, sweep");

  CLI11_PARSE(app, argc, argv);

  try {
    simtlab::ExperimentConfig cfg = make_config(config_path, overrides);
    if (gen->parsed()) return cmd_gen_data(cfg);
    if (train->parsed()) return cmd_train(cfg, phase, corpus_dir);
    if (translate->parsed()) return cmd_translate(cfg, checkpoint, corpus_dir, policy, out_path);
    if (evaluate->parsed()) return cmd_evaluate(traces_path, corpus_dir);
    if (sweep->parsed()) {
      simtlab::cmd_latency_sweep(cfg);
      std::cout << "sweep written to " << cfg.out_dir << "/sweep.tsv\n";
      return 0;
    }
    if (bin_study->parsed()) {
      simtlab::cmd_monotonicity_study(cfg);
      std::cout << "bin study written to " << cfg.out_dir << "/bin_study.tsv\n";
      return 0;
    }
    if (ablate->parsed()) {
      simtlab::cmd_ablation(cfg);
      std::cout << "ablation written to " << cfg.out_dir << "/ablation.tsv\n";
      return 0;
    }
    if (e2e->parsed()) {
      simtlab::cmd_end_to_end(cfg);
      std::cout << "pipeline artifacts under " << cfg.out_dir << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
