#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bleu_oracle.hpp"
#include "rlst/metrics.hpp"
#include "rlst/rng.hpp"

using namespace rlst;

TEST_CASE("bleu: perfect match scores 1") {
  std::vector<TokenSeq> c = {{5, 6, 7, 8, 9}, {10, 11, 12, 13}};
  CHECK(corpus_bleu(c, c) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bleu: zero matching bigrams gives 0 with smoothing off") {
  // "the the the the" vs "the cat is here"
  std::vector<TokenSeq> cand = {{4, 4, 4, 4}};
  std::vector<TokenSeq> ref = {{4, 5, 6, 7}};
  CHECK(corpus_bleu(cand, ref) == 0.0);
  CHECK(corpus_bleu(cand, ref, 4, BleuSmoothing::kAddOne) > 0.0);
}

TEST_CASE("bleu: hand-counted two-sentence corpus") {
  std::vector<TokenSeq> cand = {{1, 2, 3, 4, 9}, {7, 8}};
  std::vector<TokenSeq> ref = {{1, 2, 3, 4, 5}, {7, 8}};
  // by hand: p1 = 6/7, p2 = 4/5, p3 = 2/3, p4 = 1/2, c = r = 7, BP = 1
  double want = std::pow((6.0 / 7.0) * (4.0 / 5.0) * (2.0 / 3.0) * (1.0 / 2.0), 0.25);
  CHECK(std::abs(corpus_bleu(cand, ref) - want) < 1e-9);

  // shorten the second candidate: BP kicks in, bigram totals change
  std::vector<TokenSeq> cand2 = {{1, 2, 3, 4, 9}, {7}};
  double want2 = std::exp(1.0 - 7.0 / 6.0) *
                 std::pow((5.0 / 6.0) * (3.0 / 4.0) * (2.0 / 3.0) * (1.0 / 2.0), 0.25);
  CHECK(std::abs(corpus_bleu(cand2, ref) - want2) < 1e-9);
}

TEST_CASE("bleu: matches brute-force reference on random corpora") {
  Rng rng(17);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<TokenSeq> cand, ref;
    int sentences = 1 + int(rng.index(5));
    for (int s = 0; s < sentences; ++s) {
      size_t rl = 4 + size_t(rng.index(10));
      size_t cl = 4 + size_t(rng.index(10));
      TokenSeq r(rl), c(cl);
      for (auto& t : r) t = int32_t(4 + rng.index(4));  // tiny alphabet: overlaps happen
      for (auto& t : c) t = int32_t(4 + rng.index(4));
      ref.push_back(r);
      cand.push_back(c);
    }
    double got = corpus_bleu(cand, ref);
    double want = testutil::bleu_reference(cand, ref);
    CHECK(std::abs(got - want) < 1e-9);
    double got1 = corpus_bleu(cand, ref, 4, BleuSmoothing::kAddOne);
    double want1 = testutil::bleu_reference(cand, ref, 4, true);
    CHECK(std::abs(got1 - want1) < 1e-9);
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("bleu: truncation never increases the brevity penalty") {
  std::vector<TokenSeq> ref = {{1, 2, 3, 4, 5, 6, 7, 8}};
  std::vector<TokenSeq> cand = {{1, 2, 3, 4, 5, 6, 7, 8}};
  double prev = corpus_bleu(cand, ref);
  while (cand[0].size() > 1) {
    cand[0].pop_back();
    double cur = corpus_bleu(cand, ref);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("bleu: input validation") {
  std::vector<TokenSeq> cand = {{1, 2}};
  std::vector<TokenSeq> empty_ref = {{}};
  CHECK_THROWS_AS(corpus_bleu(cand, empty_ref), std::invalid_argument);
  std::vector<TokenSeq> short_refs = {};
  CHECK_THROWS_AS(corpus_bleu(cand, short_refs), std::invalid_argument);
  // empty candidate contributes zero counts but is accepted
  std::vector<TokenSeq> c2 = {{}, {1, 2, 3, 4}};
  std::vector<TokenSeq> r2 = {{5, 6}, {1, 2, 3, 4}};
  CHECK(corpus_bleu(c2, r2) >= 0.0);
}

TEST_CASE("token accuracy") {
  std::vector<TokenSeq> a = {{4, 5, 2}};
  CHECK(token_accuracy(a, a) == doctest::Approx(1.0));
  std::vector<TokenSeq> b = {{6, 7, 8}};
  CHECK(token_accuracy(a, b) == doctest::Approx(0.0));
  std::vector<TokenSeq> cand = {{4, 5, 2}};
  std::vector<TokenSeq> ref = {{4, 6, 2}};
  CHECK(token_accuracy(cand, ref) == doctest::Approx(2.0 / 3.0));
  // length mismatch: matches counted up to min length, denominator is ref
  std::vector<TokenSeq> cand2 = {{4, 5}};
  std::vector<TokenSeq> ref2 = {{4, 5, 2, 9}};
  CHECK(token_accuracy(cand2, ref2) == doctest::Approx(0.5));
}

TEST_CASE("trace_actions aggregates per step") {
  ActionTrace r;
  r.src_len = 2;
  r.actions = {0, 0, 1, 1};  // R R W W
  auto rows = trace_actions({r}, std::nullopt);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].reads == 1);
  CHECK(rows[1].reads == 1);
  CHECK(rows[2].writes == 1);
  CHECK(rows[3].writes == 1);
  for (const auto& row : rows) CHECK(row.reads + row.writes == row.active);

  // filter selects nothing -> empty trace
  CHECK(trace_actions({r}, 15).empty());

  // randomized conservation check
  Rng rng(8);
  std::vector<ActionTrace> traces;
  for (int i = 0; i < 20; ++i) {
    ActionTrace t;
    t.src_len = 3 + int(rng.index(3));
    int steps = 1 + int(rng.index(10));
    for (int s = 0; s < steps; ++s) t.actions.push_back(uint8_t(rng.index(2)));
    traces.push_back(t);
  }
  auto all = trace_actions(traces, std::nullopt);
  for (const auto& row : all) CHECK(row.reads + row.writes == row.active);
  int64_t total_writes = 0;
  for (const auto& row : all) total_writes += row.writes;
  int64_t want_writes = 0;
  for (const auto& t : traces)
    for (auto a : t.actions) want_writes += a;
  CHECK(total_writes == want_writes);
}
