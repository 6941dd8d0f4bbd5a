#include "doctest.h"

#include "simtlab/metrics.hpp"

using namespace simtlab;

TEST_CASE("average lagging: wait-k delays on equal-length pairs give exactly k") {
  for (int k = 1; k <= 9; ++k) {
    int len = 10;
    std::vector<int> delays(len);
    for (int i = 1; i <= len; ++i) delays[i - 1] = wait_k_prefix(i, k, len);
    CHECK(average_lagging(delays, len, len) == doctest::Approx(static_cast<double>(k)).epsilon(1e-12));
  }
}

TEST_CASE("average lagging: offline delays give J") {
  std::vector<int> delays(6, 6);
  CHECK(average_lagging(delays, 6, 6) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("average lagging hand case with unequal lengths") {
  // J=4, I=2, delays [2,4]: r=0.5, tau=2 (second delay reaches J)
  // AL = ((2-0) + (4-2)) / 2 = 2
  CHECK(average_lagging({2, 4}, 4, 2) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(average_lagging({}, 3, 3), std::invalid_argument);
}

TEST_CASE("average anticipation brute force") {
  CHECK(average_anticipation({{1, 1}, {2, 2}, {3, 3}}) == doctest::Approx(0.0));
  CHECK(average_anticipation({{2, 1}, {1, 2}}) == doctest::Approx(0.5));
  // full reversal of 4: pairs (4,1),(3,2),(2,3),(1,4) -> (3+1+0+0)/4 = 1
  CHECK(average_anticipation({{4, 1}, {3, 2}, {2, 3}, {1, 4}}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(average_anticipation({}), std::invalid_argument);
}

TEST_CASE("hallucination ratio counts unsupported tokens once at emission time") {
  ContentTrace trace;
  trace.tokens = {10, 11};
  trace.delays = {1, 2};
  AlignmentOracle ahead = [](std::size_t, const ContentTrace&) {
    return std::vector<std::optional<int>>{2, std::nullopt};
  };
  CHECK(hallucination_ratio({trace}, ahead) == doctest::Approx(1.0));

  AlignmentOracle supported = [](std::size_t, const ContentTrace&) {
    return std::vector<std::optional<int>>{1, 2};
  };
  CHECK(hallucination_ratio({trace}, supported) == doctest::Approx(0.0));

  ContentTrace early;
  early.tokens = {10, 11};
  early.delays = {1, 1};
  AlignmentOracle swap = [](std::size_t, const ContentTrace&) {
    return std::vector<std::optional<int>>{2, 1};
  };
  CHECK(hallucination_ratio({early}, swap) == doctest::Approx(0.5));
  // reading more before emitting can only help
  ContentTrace late = early;
  late.delays = {2, 2};
  CHECK(hallucination_ratio({late}, swap) <= hallucination_ratio({early}, swap));

  CHECK(hallucination_ratio({}, swap) == 0.0);
  CHECK_THROWS_AS(hallucination_ratio({trace}, AlignmentOracle{}), std::invalid_argument);
}

TEST_CASE("corpus BLEU hand values") {
  // identity
  std::vector<std::vector<int>> ref{{3, 4, 5, 6, 7}};
  CHECK(corpus_bleu(ref, ref) == doctest::Approx(100.0).epsilon(1e-9));

  // all n-gram precisions 1, brevity penalty exp(1 - 5/4)
  std::vector<std::vector<int>> hyp{{3, 4, 5, 6}};
  CHECK(corpus_bleu(hyp, ref) == doctest::Approx(100.0 * std::exp(-0.25)).epsilon(1e-6));
  CHECK(corpus_bleu(hyp, ref) == doctest::Approx(77.88).epsilon(1e-4));

  // disjoint tokens -> 0
  std::vector<std::vector<int>> miss{{8, 9, 10, 11, 12}};
  CHECK(corpus_bleu(miss, ref) == 0.0);

  // one-token perfect match: zero without smoothing, full score with it
  std::vector<std::vector<int>> one{{3}};
  std::vector<std::vector<int>> one_ref{{3}};
  CHECK(corpus_bleu(one, one_ref) == 0.0);
  CHECK(corpus_bleu(one, one_ref, true) == doctest::Approx(100.0).epsilon(1e-9));

  CHECK_THROWS_AS(corpus_bleu({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(corpus_bleu(hyp, {}), std::invalid_argument);
}

TEST_CASE("corpus BLEU is invariant under reordering sentence pairs") {
  std::vector<std::vector<int>> hyps{{3, 4, 5, 6}, {7, 8, 9, 5, 4}, {5, 5, 6, 7}};
  std::vector<std::vector<int>> refs{{3, 4, 5, 7}, {7, 8, 9, 5, 5}, {5, 5, 6, 7, 8}};
  double base = corpus_bleu(hyps, refs);
  std::vector<std::vector<int>> hyps2{hyps[2], hyps[0], hyps[1]};
  std::vector<std::vector<int>> refs2{refs[2], refs[0], refs[1]};
  CHECK(corpus_bleu(hyps2, refs2) == doctest::Approx(base).epsilon(1e-12));
  CHECK(base > 0.0);
  CHECK(base < 100.0);
}

TEST_CASE("longer hypotheses get no brevity penalty") {
  std::vector<std::vector<int>> ref{{3, 4, 5, 6}};
  std::vector<std::vector<int>> hyp{{3, 4, 5, 6, 9}};
  // precisions: 4/5, 3/4, 2/3, 1/2; BP = 1
  double expect = 100.0 * std::exp((std::log(0.8) + std::log(0.75) + std::log(2.0 / 3) +
                                    std::log(0.5)) / 4.0);
  CHECK(corpus_bleu(hyp, ref) == doctest::Approx(expect).epsilon(1e-9));
}
