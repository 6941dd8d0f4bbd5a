#include "doctest.h"

#include <filesystem>

#include "simtlab/trainer.hpp"

using namespace simtlab;

namespace {

ModelConfig train_config(std::uint64_t seed = 9) {
  ModelConfig cfg;
  cfg.src_vocab = 10;
  cfg.tgt_vocab = 10;
  cfg.dim = 16;
  cfg.ffn_dim = 32;
  cfg.heads = 2;
  cfg.enc_layers = 1;
  cfg.dec_layers = 1;
  cfg.max_len = 16;
  cfg.seed = seed;
  return cfg;
}

std::vector<SentencePair> tiny_corpus(int n = 32) {
  CorpusSpec spec;
  spec.sentences = n;
  spec.len_min = 4;
  spec.len_max = 6;
  spec.vocab = 10;
  spec.seed = 3;
  return generate_corpus(spec);
}

}  // namespace

TEST_CASE("zero steps leave the model untouched") {
  Model<float> model(train_config());
  auto before = model.params().at("src_embed").values();
  AdamState<float> opt;
  TrainPlan plan;
  plan.steps = 0;
  auto result = run_training(model, opt, tiny_corpus(8), plan);
  CHECK(result.loss_curve.empty());
  CHECK(model.params().at("src_embed").values() == before);
  CHECK(opt.step == 0);
}

TEST_CASE("training is deterministic under a fixed plan and seed") {
  auto corpus = tiny_corpus();
  auto run = [&] {
    Model<float> model(train_config());
    AdamState<float> opt;
    TrainPlan plan;
    plan.phase = TrainPhase::pretrain_offline;
    plan.steps = 6;
    plan.batch_size = 8;
    plan.learning_rate = 1e-3;
    plan.seed = 4;
    auto result = run_training(model, opt, corpus, plan);
    return std::make_pair(result.loss_curve, model.params().at("out/weight").values());
  };
  auto a = run();
  auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("offline pretraining reduces the loss") {
  auto corpus = tiny_corpus();
  Model<float> model(train_config());
  AdamState<float> opt;
  TrainPlan plan;
  plan.phase = TrainPhase::pretrain_offline;
  plan.steps = 40;
  plan.batch_size = 8;
  plan.learning_rate = 2e-3;
  plan.seed = 4;
  auto result = run_training(model, opt, corpus, plan);
  REQUIRE(result.loss_curve.size() == 40);
  double head = 0, tail = 0;
  for (int i = 0; i < 5; ++i) {
    head += result.loss_curve[i];
    tail += result.loss_curve[35 + i];
  }
  CHECK(tail < head);
  double acc = teacher_forced_accuracy(model, corpus);
  CHECK(acc > 0.2);  // far above the 1/10 chance level
}

TEST_CASE("cbsimt phase runs and reports weight statistics") {
  auto corpus = tiny_corpus(16);
  Model<float> model(train_config());
  AdamState<float> opt;
  TrainPlan plan;
  plan.phase = TrainPhase::finetune_cbsimt;
  plan.steps = 4;
  plan.batch_size = 4;
  plan.learning_rate = 1e-4;
  auto result = run_training(model, opt, corpus, plan);
  CHECK(result.loss_curve.size() == 4);
  CHECK(result.mean_beta >= 0.0);
  CHECK(result.mean_alpha > 0.0);
  CHECK(result.mean_alpha <= 1.0);

  // the beta toggle forces the sentence weight to exactly 1
  Model<float> model2(train_config());
  AdamState<float> opt2;
  plan.beta_off = true;
  auto r2 = run_training(model2, opt2, corpus, plan);
  CHECK(r2.mean_beta == 1.0);
}

TEST_CASE("wait-k phase trains and differs from offline") {
  auto corpus = tiny_corpus(16);
  auto run_phase = [&](TrainPhase phase) {
    Model<float> model(train_config());
    AdamState<float> opt;
    TrainPlan plan;
    plan.phase = phase;
    plan.steps = 3;
    plan.batch_size = 4;
    plan.k = 1;
    plan.seed = 4;
    auto result = run_training(model, opt, corpus, plan);
    return result.loss_curve;
  };
  auto wk = run_phase(TrainPhase::train_waitk);
  auto off = run_phase(TrainPhase::pretrain_offline);
  CHECK(wk.size() == off.size());
  CHECK(wk != off);  // wait-1 prefixes restrict the decoder's source view
}

TEST_CASE("training log is tab-separated with the expected header") {
  auto dir = std::filesystem::temp_directory_path() / "simtlab_trainer_log";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  auto log_path = (dir / "train.tsv").string();
  Model<float> model(train_config());
  AdamState<float> opt;
  TrainPlan plan;
  plan.phase = TrainPhase::pretrain_offline;
  plan.steps = 4;
  plan.batch_size = 8;
  plan.log_every = 2;
  plan.log_path = log_path;
  plan.checkpoint_dir = (dir / "ckpt").string();
  run_training(model, opt, tiny_corpus(16), plan);

  std::ifstream is(log_path);
  REQUIRE(static_cast<bool>(is));
  std::string header;
  std::getline(is, header);
  CHECK(header == "step\tphase\tloss\tmean_beta\tmean_alpha\twall_time_s");
  int rows = 0;
  std::string line;
  while (std::getline(is, line)) {
    ++rows;
    CHECK(line.find("pretrain-offline") != std::string::npos);
  }
  CHECK(rows == 2);  // steps 2 and 4

  auto final_ck = plan.checkpoint_dir + "/final.ckpt";
  REQUIRE(std::filesystem::exists(final_ck));
  auto loaded = load_model<float>(final_ck);
  for (auto& [p, t] : model.params()) CHECK(loaded.params().at(p).values() == t.values());
  std::filesystem::remove_all(dir);
}

TEST_CASE("plan validation and empty corpus are rejected") {
  Model<float> model(train_config());
  AdamState<float> opt;
  TrainPlan plan;
  plan.learning_rate = 0.0;
  CHECK_THROWS_AS(run_training(model, opt, tiny_corpus(4), plan), std::invalid_argument);
  plan = TrainPlan{};
  CHECK_THROWS_AS(run_training(model, opt, {}, plan), std::invalid_argument);
}
