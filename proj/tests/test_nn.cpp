#include "doctest.h"

#include "simtlab/nn.hpp"

using namespace simtlab;

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  ParameterSet<float> ps;
  Rng rng(1);
  add_param(ps, "w", {2, 2}, 2, 2, rng);
  auto before = ps.at("w").values();
  for (auto& [p, t] : ps) t.grad().assign(t.size(), 0.f);
  AdamState<float> st;
  adam_step(ps, st);
  CHECK(st.step == 1);
  CHECK(ps.at("w").values() == before);
}

TEST_CASE("adam: first step on a unit gradient moves by about lr") {
  ParameterSet<double> ps;
  add_param_const(ps, "x", {1}, 1.0);
  ps.at("x").grad().assign(1, 1.0);
  AdamState<double> st;
  st.lr = 0.01;
  adam_step(ps, st);
  // bias-corrected mhat = 1, vhat = 1 -> update = lr / (1 + eps)
  CHECK(ps.at("x").values()[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
}

TEST_CASE("adam: missing gradient names the parameter") {
  ParameterSet<float> ps;
  Rng rng(2);
  add_param(ps, "layer/weight", {2, 2}, 2, 2, rng);
  AdamState<float> st;
  CHECK_THROWS_WITH_AS(adam_step(ps, st), doctest::Contains("layer/weight"), std::runtime_error);
}

TEST_CASE("adam: determinism across identical runs") {
  auto run = [] {
    ParameterSet<float> ps;
    Rng rng(42);
    add_param(ps, "w", {3, 3}, 3, 3, rng);
    AdamState<float> st;
    st.lr = 0.05;
    for (int step = 0; step < 10; ++step) {
      auto loss = sum_all(mul(ps.at("w"), ps.at("w")));
      loss.backward();
      adam_step(ps, st);
    }
    return ps.at("w").values();
  };
  CHECK(run() == run());
}

TEST_CASE("parameter iteration order is lexicographic") {
  ParameterSet<float> ps;
  Rng rng(3);
  add_param(ps, "b/x", {1}, 1, 1, rng);
  add_param(ps, "a/y", {1}, 1, 1, rng);
  add_param(ps, "a/b", {1}, 1, 1, rng);
  std::vector<std::string> paths;
  for (auto& [p, t] : ps) paths.push_back(p);
  CHECK(paths == std::vector<std::string>{"a/b", "a/y", "b/x"});
}

TEST_CASE("finite_difference_check on analytic cases") {
  // loss = sum x^2 at x = 1: both routes give 2
  ParameterSet<double> ps;
  add_param_const(ps, "x", {4}, 1.0);
  auto quad = [](ParameterSet<double>& p) { return sum_all(mul(p.at("x"), p.at("x"))); };
  auto rep = finite_difference_check(quad, ps, 8, 1e-6, 1e-6, 1);
  CHECK(rep.pass);

  // constant loss: zero gradients both ways
  auto constant = [](ParameterSet<double>& p) { return scale(sum_all(mul(p.at("x"), p.at("x"))), 0.0); };
  auto rep2 = finite_difference_check(constant, ps, 8, 1e-6, 1e-6, 2);
  CHECK(rep2.pass);
  CHECK(rep2.max_rel_err == 0.0);
}
