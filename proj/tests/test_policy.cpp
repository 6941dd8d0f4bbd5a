#include "doctest.h"

#include <filesystem>

#include "simtlab/policy.hpp"

using namespace simtlab;

TEST_CASE("threshold_schedule hand values") {
  InferenceConfig cfg;
  cfg.th_max = 0.9;
  cfg.l_max = 9;
  cfg.delta = 1.0;
  CHECK(threshold_schedule(0, cfg) == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(threshold_schedule(3, cfg) == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(threshold_schedule(9, cfg) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(threshold_schedule(15, cfg) == 0.0);   // beyond l_max stays clamped
  CHECK(threshold_schedule(-2, cfg) == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("threshold_schedule is nonincreasing in l and rises with delta") {
  InferenceConfig cfg;
  cfg.th_max = 0.9;
  cfg.l_max = 9;
  for (double delta : {0.5, 1.0, 2.0, 7.0}) {
    cfg.delta = delta;
    double prev = 1.0;
    for (int l = 0; l <= 12; ++l) {
      double th = threshold_schedule(l, cfg);
      CHECK(th <= prev + 1e-12);
      prev = th;
    }
  }
  for (int l = 1; l < 9; ++l) {
    InferenceConfig lo = cfg, hi = cfg;
    lo.delta = 1.0;
    hi.delta = 3.0;
    CHECK(threshold_schedule(l, hi) >= threshold_schedule(l, lo));
  }
}

TEST_CASE("scripted threshold run alternates R,W,R,W and records delays [2,3,3]") {
  // confidence is high only once the matching source token has been read
  ScriptedModel script;
  script.script = {
      {{7, 0.5}},                              // j=1: unsure -> READ
      {{7, 0.9}, {8, 0.1}},                    // j=2: confident about token 7
      {{7, 0.0}, {8, 0.9}, {kEos, 0.0}},       // j=3
  };
  InferenceConfig cfg;
  cfg.th_max = 0.9;
  cfg.l_max = 9;
  cfg.delta = 1.0;
  auto trace = translate_threshold(script, {5, 6, kEos}, cfg);
  CHECK(trace.emitted == std::vector<int>{7, 8, kEos});
  CHECK(trace.delays == std::vector<int>{2, 3, 3});
  std::string actions;
  for (const auto& s : trace.steps) actions.push_back(s.action);
  CHECK(actions == "RWRWW");
  CHECK_FALSE(trace.truncated);
}

TEST_CASE("vanishing threshold degenerates to the eager write policy") {
  ScriptedModel script;
  script.script = {{{6, 0.5}, {7, 0.5}, {kEos, 0.5}}};
  InferenceConfig cfg;
  cfg.th_max = 1e-12;  // every confidence clears the schedule
  auto trace = translate_threshold(script, {5, 9, kEos}, cfg);
  CHECK(trace.emitted == std::vector<int>{6, 7, kEos});
  CHECK(trace.delays == std::vector<int>{1, 1, 1});
}

TEST_CASE("zero confidence forces reading the whole source first") {
  ScriptedModel script;
  script.script = {
      {{6, 0.0}},
      {{6, 0.0}},
      {{7, 0.0}, {kEos, 0.0}},
  };
  InferenceConfig cfg;
  cfg.th_max = 0.9;
  cfg.l_max = 9;
  auto trace = translate_threshold(script, {5, 6, kEos}, cfg);
  CHECK(trace.emitted == std::vector<int>{7, kEos});
  CHECK(trace.delays == std::vector<int>{3, 3});
  std::string actions;
  for (const auto& s : trace.steps) actions.push_back(s.action);
  CHECK(actions == "RRWW");
}

TEST_CASE("output cap truncates with a forced EOS") {
  ScriptedModel script;
  std::vector<StepPrediction> row;
  for (int i = 0; i < 32; ++i) row.push_back({7, 1.0});  // never emits EOS
  script.script = {row, row, row};
  InferenceConfig cfg;
  cfg.max_output = 4;
  auto trace = translate_threshold(script, {5, 6, kEos}, cfg);
  CHECK(trace.truncated);
  CHECK(trace.emitted.size() == 5);  // 4 content writes + forced EOS
  CHECK(trace.emitted.back() == kEos);
  CHECK(trace.delays.size() == trace.emitted.size());
  CHECK_NOTHROW(trace.check());

  auto wk = translate_waitk(script, {5, 6, kEos}, 1, 4);
  CHECK(wk.truncated);
  CHECK(wk.emitted.back() == kEos);
}

TEST_CASE("wait-k delays follow the closed-form schedule") {
  ScriptedModel script;
  script.script.resize(5);
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i < 8; ++i) script.script[j].push_back({i < 4 ? 6 + i : kEos, 1.0});
  auto trace = translate_waitk(script, {5, 6, 7, 8, kEos}, 2);
  REQUIRE(trace.emitted.size() == 5);
  for (std::size_t i = 0; i < trace.delays.size(); ++i)
    CHECK(trace.delays[i] == wait_k_prefix(static_cast<int>(i) + 1, 2, 5));

  auto offline = translate_offline(script, {5, 6, 7, 8, kEos});
  for (int d : offline.delays) CHECK(d == 5);
  auto wk_big = translate_waitk(script, {5, 6, 7, 8, kEos}, 5);
  CHECK(offline.emitted == wk_big.emitted);
  CHECK(offline.delays == wk_big.delays);
}

TEST_CASE("larger delta never decreases total delay on a fixed script") {
  // raising delta raises every th_l for l in (0, l_max), so writes get harder
  ScriptedModel script;
  Rng rng(31);
  script.script.resize(6);
  for (int j = 0; j < 6; ++j) {
    for (int i = 0; i < 10; ++i)
      script.script[j].push_back({i < 5 ? 6 : kEos, rng.next_double()});
  }
  std::vector<int> source{5, 6, 7, 8, 9, kEos};
  InferenceConfig cfg;
  cfg.th_max = 0.9;
  cfg.l_max = 5;
  long prev_delay = -1;
  for (double delta : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    cfg.delta = delta;
    auto trace = translate_threshold(script, source, cfg);
    long total = 0;
    for (int d : trace.delays) total += d;
    CHECK(total >= prev_delay);
    prev_delay = total;
  }
}

TEST_CASE("policy input validation") {
  ScriptedModel script;
  script.script = {{{kEos, 1.0}}};
  InferenceConfig cfg;
  CHECK_THROWS_AS(translate_threshold(script, {5, 6}, cfg), std::invalid_argument);  // no EOS
  CHECK_THROWS_AS(translate_threshold(script, {}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(translate_waitk(script, {kEos}, 0), std::invalid_argument);
  InferenceConfig bad;
  bad.th_max = 1.5;
  CHECK_THROWS_AS(translate_threshold(script, {kEos}, bad), std::invalid_argument);
}

TEST_CASE("traces round-trip through JSONL") {
  ScriptedModel script;
  script.script = {
      {{6, 0.0}},
      {{7, 0.95}, {kEos, 0.99}},
  };
  InferenceConfig cfg;
  cfg.th_max = 0.9;
  cfg.l_max = 9;
  auto t1 = translate_threshold(script, {5, kEos}, cfg);
  auto t2 = translate_waitk(script, {5, kEos}, 1);
  auto path = (std::filesystem::temp_directory_path() / "simtlab_traces_rt.jsonl").string();
  write_traces(path, {t1, t2});
  auto loaded = read_traces(path);
  REQUIRE(loaded.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& orig = i == 0 ? t1 : t2;
    CHECK(loaded[i].source == orig.source);
    CHECK(loaded[i].emitted == orig.emitted);
    CHECK(loaded[i].delays == orig.delays);
    CHECK(loaded[i].truncated == orig.truncated);
    CHECK(loaded[i].steps.size() == orig.steps.size());
  }
  std::filesystem::remove(path);
}

TEST_CASE("content_view strips specials and caps delays at the content length") {
  ReadWriteTrace trace;
  trace.source = {5, 6, kEos};
  trace.emitted = {7, 8, kEos};
  trace.delays = {2, 3, 3};
  auto ct = content_view(trace);
  CHECK(ct.tokens == std::vector<int>{7, 8});
  CHECK(ct.delays == std::vector<int>{2, 2});  // reading EOS adds no content
}
