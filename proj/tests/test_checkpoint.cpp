#include "doctest.h"

#include <filesystem>

#include "simtlab/checkpoint.hpp"

using namespace simtlab;

namespace {

ModelConfig ck_config() {
  ModelConfig cfg;
  cfg.src_vocab = 12;
  cfg.tgt_vocab = 12;
  cfg.dim = 8;
  cfg.ffn_dim = 16;
  cfg.heads = 2;
  cfg.enc_layers = 1;
  cfg.dec_layers = 1;
  cfg.max_len = 16;
  cfg.seed = 42;
  return cfg;
}

std::string tmp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("header round-trips the model configuration") {
  auto cfg = ck_config();
  auto h = header_for(cfg);
  auto parsed = CheckpointHeader::parse(h.serialize());
  auto back = config_from(parsed);
  CHECK(back.src_vocab == cfg.src_vocab);
  CHECK(back.dim == cfg.dim);
  CHECK(back.ffn_dim == cfg.ffn_dim);
  CHECK(back.heads == cfg.heads);
  CHECK(back.enc_layers == cfg.enc_layers);
  CHECK(back.dec_layers == cfg.dec_layers);
  CHECK(back.max_len == cfg.max_len);
  CHECK(back.seed == cfg.seed);
}

TEST_CASE("float checkpoints round-trip bit-exactly") {
  Model<float> model(ck_config());
  auto path = tmp_path("simtlab_ck_rt.ckpt");
  save_checkpoint(path, header_for(model.config()), model.params());
  auto loaded = load_model<float>(path);
  REQUIRE(loaded.params().size() == model.params().size());
  for (auto& [p, t] : model.params()) {
    auto& lt = loaded.params().at(p);
    REQUIRE(lt.shape() == t.shape());
    CHECK(lt.values() == t.values());
  }
  std::filesystem::remove(path);
}

TEST_CASE("optimizer state round-trips") {
  Model<float> model(ck_config());
  AdamState<float> opt;
  opt.lr = 3e-4;
  // a loss through the full encode/decode path so every parameter has a grad
  auto full_loss = [](Model<float>& m) {
    auto enc = m.encode(Model<float>::with_eos({4, 5}));
    std::vector<int> limits(2, enc.rows());
    auto logits = m.decode_logits({0, 6}, enc, limits);
    return sum_all(mul(logits, logits));
  };
  // a couple of steps so moments are nonzero
  for (int s = 0; s < 3; ++s) {
    auto loss = full_loss(model);
    loss.backward();
    adam_step(model.params(), opt);
  }
  auto path = tmp_path("simtlab_ck_opt.ckpt");
  save_checkpoint(path, header_for(model.config()), model.params(), &opt);
  AdamState<float> opt2;
  auto loaded = load_model<float>(path, &opt2);
  CHECK(opt2.step == opt.step);
  CHECK(opt2.lr == doctest::Approx(opt.lr).epsilon(1e-12));
  for (auto& [p, m] : opt.m) {
    REQUIRE(opt2.m.count(p) == 1);
    CHECK(opt2.m.at(p) == m);
    CHECK(opt2.v.at(p) == opt.v.at(p));
  }
  // continuing training from the restored state matches exactly
  for (int s = 0; s < 2; ++s) {
    auto la = full_loss(model);
    la.backward();
    adam_step(model.params(), opt);
    auto lb = full_loss(loaded);
    lb.backward();
    adam_step(loaded.params(), opt2);
  }
  for (auto& [p, t] : model.params()) CHECK(loaded.params().at(p).values() == t.values());
  std::filesystem::remove(path);
}

TEST_CASE("bad magic is rejected") {
  auto path = tmp_path("simtlab_ck_bad.ckpt");
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOTMYFMT garbage bytes";
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("bad magic"), std::runtime_error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(tmp_path("simtlab_ck_missing.ckpt")), std::runtime_error);
}

TEST_CASE("restoring into a model flags missing parameters") {
  Model<float> model(ck_config());
  auto path = tmp_path("simtlab_ck_partial.ckpt");
  ParameterSet<float> partial;
  add_param_const(partial, "src_embed", {12, 8}, 0.5f);
  save_checkpoint(path, header_for(model.config()), partial);
  auto ck = load_checkpoint(path);
  CHECK_THROWS_WITH_AS(restore_model(model, ck), doctest::Contains("missing"), std::runtime_error);
  std::filesystem::remove(path);
}
