#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "mona/decoding.hpp"
#include "mona/errors.hpp"
#include "mona/metrics.hpp"
#include "test_util.hpp"

using namespace mona;
using mona::testing::random_int;

namespace {

std::vector<std::string> random_words(std::mt19937_64& rng, int max_len) {
  static const char* vocab[] = {"a", "b", "c", "d"};
  std::vector<std::string> out(static_cast<std::size_t>(random_int(rng, 0, max_len)));
  for (auto& w : out) w = vocab[random_int(rng, 0, 3)];
  return out;
}

// Rank by counting: (#smaller) + (#equal + 1) / 2.
std::vector<double> counting_ranks(const std::vector<double>& v) {
  std::vector<double> r;
  for (double x : v) {
    double less = 0, equal = 0;
    for (double y : v) less += y < x, equal += y == x;
    r.push_back(less + (equal + 1.0) / 2.0);
  }
  return r;
}

double oracle_rho(const std::vector<double>& x, const std::vector<double>& y) {
  const auto a = counting_ranks(x), b = counting_ranks(y);
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sa += a[i], sb += b[i];
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - sa / n) * (b[i] - sb / n);
    saa += (a[i] - sa / n) * (a[i] - sa / n);
    sbb += (b[i] - sb / n) * (b[i] - sb / n);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("wer: basic cases") {
  CHECK(wer("the cat sat", "the cat sat") == 0.0);
  CHECK(wer("", "one two three") == 1.0);
  CHECK(wer("a b c d", "a b") == 1.0);
  CHECK_THROWS_AS(wer("a", ""), PreconditionError);
  CHECK_THROWS_AS(wer("a", "   "), PreconditionError);
}

TEST_CASE("wer: the four-error example") {
  const auto hyp = split_words("after breakfast instead forking at aside to walk down towards the common");
  const auto ref = split_words("after breakfast instead of working i decided to walk down towards the common");
  const EditStats st = word_edit_stats(hyp, ref);
  CHECK(st.reference_length == 13);
  CHECK(st.deletions == 1);
  CHECK(st.substitutions == 3);
  CHECK(st.insertions == 0);
  CHECK(wer(hyp, ref) == doctest::Approx(4.0 / 13.0));
}

TEST_CASE("wer: edit distance is a metric") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = random_words(rng, 6), b = random_words(rng, 6), c = random_words(rng, 6);
    CHECK(word_edit_distance(a, b) == word_edit_distance(b, a));
    CHECK(word_edit_distance(a, c) <= word_edit_distance(a, b) + word_edit_distance(b, c));
    CHECK((word_edit_distance(a, b) == 0) == (a == b));
    const auto st = word_edit_stats(a, b);
    // insertions minus deletions accounts for the length difference
    CHECK(static_cast<long>(st.insertions) - static_cast<long>(st.deletions) ==
          static_cast<long>(a.size()) - static_cast<long>(b.size()));
  }
}

TEST_CASE("wer accumulator pools edits over references") {
  WerAccumulator acc;
  acc.add("a b", "a b c");
  acc.add("x", "y");
  CHECK(acc.total.reference_length == 4);
  CHECK(acc.rate() == doctest::Approx(2.0 / 4.0));
}

TEST_CASE("spearman: perfect and reversed orderings") {
  const std::vector<double> xs = {1.0, 2.5, 3.0, 7.0, 9.0};
  std::vector<double> rev(xs.rbegin(), xs.rend());
  const auto same = spearman_rho(xs, xs);
  CHECK(same.rho == doctest::Approx(1.0));
  CHECK(same.exact);
  // only the identity and its reverse reach |rho| = 1 among 5! pairings
  CHECK(same.p_value == doctest::Approx(2.0 / 120.0));
  CHECK(spearman_rho(xs, rev).rho == doctest::Approx(-1.0));
  CHECK_THROWS_AS(spearman_rho(xs, std::vector<double>{1, 2}), DimensionError);
  CHECK_THROWS_AS(spearman_rho(std::vector<double>{1, 2}, std::vector<double>{2, 1}), PreconditionError);
  CHECK_THROWS_AS(spearman_rho(xs, std::vector<double>(5, 1.0)), NumericError);
}

TEST_CASE("spearman: matches a counting-rank oracle with ties") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = static_cast<std::size_t>(random_int(rng, 3, 14));
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = random_int(rng, 0, 4);
    for (auto& v : y) v = random_int(rng, 0, 4);
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) x[0] += 1;
    if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) y[0] += 1;
    const auto r = spearman_rho(x, y);
    CHECK(r.rho == doctest::Approx(oracle_rho(x, y)).epsilon(1e-12));
    CHECK(r.exact == (n <= kSpearmanExactLimit));
    CHECK(r.p_value >= 0.0);
    CHECK(r.p_value <= 1.0);
  }
}

TEST_CASE("spearman: exact p-value for a small sample") {
  // n = 4, ranks (1,2,3,4) vs (2,1,4,3): rho = 0.6; |rho| >= 0.6 for 10 of 24 pairings
  const auto r = spearman_rho(std::vector<double>{1, 2, 3, 4}, std::vector<double>{2, 1, 4, 3});
  CHECK(r.rho == doctest::Approx(0.6));
  CHECK(r.p_value == doctest::Approx(10.0 / 24.0));
}

TEST_CASE("spearman: t approximation above the exact limit") {
  // scipy.stats.spearmanr on these 14 pairs
  const std::vector<double> x = {3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 8, 9, 7};
  const std::vector<double> y = {2, 7, 1, 8, 2, 8, 1, 8, 2, 8, 4, 5, 9, 0};
  const auto r = spearman_rho(x, y);
  CHECK_FALSE(r.exact);
  CHECK(r.rho == doctest::Approx(oracle_rho(x, y)).epsilon(1e-12));
  CHECK(r.rho == doctest::Approx(0.19032303899443684).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.5145760571054939).epsilon(1e-9));
}

TEST_CASE("spearman: ten-run WER table") {
  const std::vector<double> val = {20.63, 20.79, 21.26, 21.32, 21.45, 21.45, 21.63, 21.69, 21.82, 22.27};
  const std::vector<double> test = {22.17, 21.69, 21.75, 21.87, 20.72, 20.90, 20.96, 22.54, 22.11, 21.87};
  const auto r = spearman_rho(val, test);
  CHECK(r.exact);
  // scipy.stats.spearmanr gives 0.12195121951219515 with its t-based p of 0.737
  CHECK(r.rho == doctest::Approx(0.12195121951219515).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.737).epsilon(0.01));
}
