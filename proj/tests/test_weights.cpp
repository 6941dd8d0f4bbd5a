#include "doctest.h"

#include "simtlab/weights.hpp"

using namespace simtlab;

static constexpr double kTol = 1e-9;

TEST_CASE("diagonal_distance hand values") {
  CHECK(diagonal_distance(1, 4, 1, 4) == doctest::Approx(0.0).epsilon(kTol));
  CHECK(diagonal_distance(2, 4, 2, 4) == doctest::Approx(0.0).epsilon(kTol));
  CHECK(diagonal_distance(100, 100, 1, 100) == doctest::Approx(1.0 - 1.0 / 100).epsilon(kTol));
  CHECK(diagonal_distance(1, 4, 3, 4) == doctest::Approx(0.5).epsilon(kTol));
}

TEST_CASE("diagonal_regularizer hand values") {
  for (double lambda : {0.5, 1.0, 2.0}) {
    CHECK(diagonal_regularizer(0.0, lambda) == doctest::Approx(1.0).epsilon(kTol));
    CHECK(diagonal_regularizer(1.0, lambda) == doctest::Approx(0.0).epsilon(kTol));
  }
  CHECK(diagonal_regularizer(0.5, 2.0) == doctest::Approx(0.75).epsilon(kTol));
}

TEST_CASE("diagonal_regularizer monotonicity in d and lambda") {
  for (int step = 0; step < 20; ++step) {
    double d = step / 20.0;
    double d2 = (step + 1) / 20.0;
    CHECK(diagonal_regularizer(d2, 1.3) <= diagonal_regularizer(d, 1.3));
    if (d > 0.0 && d < 1.0) {
      // larger lambda widens the plateau
      CHECK(diagonal_regularizer(d, 2.0) >= diagonal_regularizer(d, 1.0));
      CHECK(diagonal_regularizer(d, 1.0) >= diagonal_regularizer(d, 0.5));
    }
    CHECK(diagonal_regularizer(d, 0.7) >= 0.0);
    CHECK(diagonal_regularizer(d, 0.7) <= 1.0);
  }
}

TEST_CASE("token_weight hand values") {
  CHECK(token_weight(1.0, 1.0, 0.25) == doctest::Approx(1.0).epsilon(kTol));
  CHECK(token_weight(0.8, 0.0, 0.25) == doctest::Approx(0.0).epsilon(kTol));
  CHECK(token_weight(0.0625, 1.0, 0.25) == doctest::Approx(0.5).epsilon(kTol));
}

TEST_CASE("token_weight is increasing in p and stays in [0,1]") {
  double prev = -1.0;
  for (int s = 0; s <= 10; ++s) {
    double p = s / 10.0;
    double a = token_weight(p, 0.9, 0.25);
    CHECK(a >= prev);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    prev = a;
  }
}

TEST_CASE("reorder_cost hand values") {
  CHECK(reorder_cost(1, 4, 2, 4) == doctest::Approx(0.0).epsilon(kTol));  // below diagonal
  CHECK(reorder_cost(2, 4, 2, 4) == doctest::Approx(0.0).epsilon(kTol));  // on diagonal
  CHECK(reorder_cost(4, 4, 1, 4) == doctest::Approx(0.75).epsilon(kTol));
  // strictly positive only above the diagonal
  for (int i = 1; i <= 4; ++i)
    for (int j = 1; j <= 4; ++j) {
      double c = reorder_cost(i, 4, j, 4);
      if (i > j) CHECK(c > 0.0);
      else CHECK(c == doctest::Approx(0.0).epsilon(kTol));
      CHECK(c < 1.0);
    }
}

TEST_CASE("sentence_reorder_score hand values") {
  std::vector<int> prefixes{1, 2};
  std::vector<std::vector<double>> zero{{0, 0}, {0, 0}};
  CHECK(sentence_reorder_score(prefixes, zero, 2, 2) == doctest::Approx(0.0).epsilon(kTol));

  // mass only on/below the diagonal
  std::vector<std::vector<double>> lower{{1.0, 0.0}, {1.0, 1.0}};
  CHECK(sentence_reorder_score(prefixes, lower, 2, 2) == doctest::Approx(0.0).epsilon(kTol));

  std::vector<std::vector<double>> half{{0.5, 0.5}, {0.5, 0.5}};
  CHECK(sentence_reorder_score(prefixes, half, 2, 2) == doctest::Approx(0.25).epsilon(kTol));

  CHECK_THROWS_AS(sentence_reorder_score({}, {}, 2, 2), std::invalid_argument);
}

TEST_CASE("sentence_weight hand values") {
  std::vector<double> batch{0.0, 2.0};  // mu = 1, sigma = 1
  CHECK(sentence_weight(1.0, batch) == doctest::Approx(1.0).epsilon(kTol));
  CHECK(sentence_weight(2.0, batch) == doctest::Approx(0.0).epsilon(kTol));
  CHECK(sentence_weight(1.5, batch) == doctest::Approx(0.5).epsilon(kTol));
  CHECK(sentence_weight(5.0, batch) == doctest::Approx(0.0).epsilon(kTol));  // clamp
  CHECK(sentence_weight(3.0, {3.0}) == doctest::Approx(1.0).epsilon(kTol));  // singleton
  CHECK_THROWS_AS(sentence_weight(1.0, {}), std::invalid_argument);
}

TEST_CASE("sentence_weight is affine-invariant in the batch scores") {
  std::vector<double> batch{0.3, 1.2, 0.7, 2.5};
  for (double c : batch) {
    double base = sentence_weight(c, batch);
    std::vector<double> shifted, scaled;
    for (double v : batch) shifted.push_back(v + 17.0);
    for (double v : batch) scaled.push_back(v * 3.5);
    CHECK(sentence_weight(c + 17.0, shifted) == doctest::Approx(base).epsilon(1e-12));
    CHECK(sentence_weight(c * 3.5, scaled) == doctest::Approx(base).epsilon(1e-12));
    CHECK(base >= 0.0);
  }
}

TEST_CASE("wait_k_prefix schedule") {
  CHECK(wait_k_prefix(1, 3, 5) == 3);
  std::vector<int> expect{3, 4, 5, 5, 5, 5};
  for (int i = 1; i <= 6; ++i) CHECK(wait_k_prefix(i, 3, 5) == expect[i - 1]);
  CHECK(wait_k_prefix(1, 9, 5) == 5);  // k > J
  for (int i = 1; i <= 4; ++i) CHECK(wait_k_prefix(i, 7, 7) == 7);  // k >= J -> offline
  CHECK_THROWS_AS(wait_k_prefix(0, 1, 1), std::invalid_argument);
}

TEST_CASE("WaitKSchedule coverage and offline") {
  WaitKSchedule s{2, 4, 5};
  CHECK(s.coverage() == std::vector<int>{2, 3, 4, 4, 4});
  auto off = WaitKSchedule::offline(4, 5);
  CHECK(off.coverage() == std::vector<int>{4, 4, 4, 4, 4});
}

TEST_CASE("sample_prefixes contracts") {
  CHECK(sample_prefixes(5, 10, 7) == std::vector<int>{1, 2, 3, 4, 5});
  auto big = sample_prefixes(50, 10, 7);
  CHECK(big.size() == 10);
  CHECK(big.back() == 50);
  for (std::size_t i = 1; i < big.size(); ++i) {
    CHECK(big[i] > big[i - 1]);
    CHECK(big[i - 1] >= 1);
  }
  CHECK(sample_prefixes(50, 10, 7) == big);       // determinism
  CHECK(sample_prefixes(50, 10, 8) != big);       // seed sensitivity
  CHECK_THROWS_AS(sample_prefixes(5, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_prefixes(0, 5, 1), std::invalid_argument);
}

TEST_CASE("WeightConfig validation") {
  WeightConfig w;
  CHECK_NOTHROW(w.validate());
  w.lambda = 0.0;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
  w = WeightConfig{};
  w.gamma = -0.1;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
}
