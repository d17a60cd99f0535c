#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mona/errors.hpp"
#include "mona/report.hpp"

using namespace mona;

namespace {

MetricsRecord rec(const std::string& variant, std::uint64_t seed, std::size_t epoch, std::optional<double> silent,
                  std::optional<double> ctc = std::nullopt) {
  MetricsRecord r;
  r.variant = variant;
  r.seed = seed;
  r.run = variant + "/seed" + std::to_string(seed);
  r.epoch = epoch;
  r.train_total = 1.0 / static_cast<double>(epoch);
  r.wer_silent = silent;
  r.val_silent_ctc = ctc;
  if (silent) r.wer_vocal = *silent / 2.0;
  return r;
}

}  // namespace

TEST_CASE("report: single record gives a one row table") {
  const auto s = summarize({rec("emg", 0, 1, 0.5)});
  REQUIRE(s.size() == 1);
  CHECK(s[0].variant == "emg");
  CHECK(s[0].runs == 1);
  CHECK(s[0].mean_wer_silent == 0.5);
  CHECK(s[0].min_wer_silent == 0.5);
  CHECK(s[0].mean_wer_vocal == 0.25);
  CHECK_FALSE(s[0].mean_wer_audio.has_value());
  CHECK(s[0].best_run == "emg/seed0");
  std::ostringstream out;
  write_summary_csv(out, s);
  CHECK(out.str() ==
        "variant,runs,mean_wer_silent,min_wer_silent,mean_wer_vocal,mean_wer_audio,best_run\n"
        "emg,1,0.5,0.5,0.25,,emg/seed0\n");
}

TEST_CASE("report: summary uses each run's last evaluation") {
  const std::vector<MetricsRecord> records = {
      rec("b", 0, 1, 0.9), rec("b", 0, 2, 0.4),     rec("b", 1, 1, 0.8), rec("b", 1, 2, 0.6),
      rec("b", 1, 3, std::nullopt), rec("a", 7, 1, 0.3), rec("c", 0, 1, std::nullopt)};
  const auto s = summarize(records);
  REQUIRE(s.size() == 2);
  CHECK(s[0].variant == "b");
  CHECK(s[0].runs == 2);
  CHECK(s[0].mean_wer_silent == doctest::Approx(0.5));
  CHECK(s[0].min_wer_silent == 0.4);
  CHECK(s[0].best_run == "b/seed0");
  CHECK(s[1].variant == "a");
  CHECK_THROWS_AS(summarize({rec("c", 0, 1, std::nullopt)}), PreconditionError);
}

TEST_CASE("report: curve minima can disagree") {
  const std::vector<MetricsRecord> records = {rec("x", 0, 1, 0.9, 3.0), rec("x", 0, 2, 0.7, 1.0),
                                              rec("x", 0, 3, 0.5, 1.5), rec("x", 0, 4, 0.6, 2.0)};
  const auto m = curve_minima(records);
  REQUIRE(m.size() == 1);
  CHECK(m[0].best_ctc_epoch == 2);
  CHECK(m[0].best_wer_epoch == 3);
}

TEST_CASE("report: series are long format") {
  std::ostringstream out;
  write_series_csv(out, {rec("x", 0, 2, 0.5, 1.25)});
  CHECK(out.str() ==
        "run,variant,seed,epoch,metric,value\n"
        "x/seed0,x,0,2,train_total,0.5\n"
        "x/seed0,x,0,2,val_silent_ctc,1.25\n"
        "x/seed0,x,0,2,wer_silent,0.5\n"
        "x/seed0,x,0,2,wer_vocal,0.25\n");
}

TEST_CASE("report: table access") {
  std::istringstream in("a,b,name\n1,2,x\n,3.5,y\n");
  const Table t = read_table_csv(in);
  CHECK(t.rows.size() == 2);
  const auto a = t.column("a");
  CHECK(a[0] == 1.0);
  CHECK_FALSE(a[1].has_value());
  CHECK_THROWS_AS(t.column("name"), ParseError);
  CHECK_THROWS_AS(t.column("zz"), ConfigError);
  std::istringstream ragged("a,b\n1\n");
  CHECK_THROWS_AS(read_table_csv(ragged), ParseError);

  const auto rt = records_table({rec("x", 0, 1, 0.5)});
  CHECK(rt.column("wer_silent")[0] == 0.5);
}

TEST_CASE("report: spearman on the validation and test fixture") {
  std::ifstream in(std::string(MONA_FIXTURE_DIR) + "/val_test_wer.csv");
  REQUIRE(in);
  const Table t = read_table_csv(in);
  REQUIRE(t.rows.size() == 10);
  const SpearmanResult r = spearman_columns(t, "validation", "test");
  // Ranks written out by hand; tied values share the mean rank.
  const double rv[] = {1, 2, 3, 4, 5.5, 5.5, 7, 8, 9, 10};
  const double rt[] = {9, 4, 5, 6.5, 1, 2, 3, 10, 8, 6.5};
  double mv = 0, mt = 0, cov = 0, vv = 0, vt = 0;
  for (int i = 0; i < 10; ++i) mv += rv[i] / 10, mt += rt[i] / 10;
  for (int i = 0; i < 10; ++i) {
    cov += (rv[i] - mv) * (rt[i] - mt);
    vv += (rv[i] - mv) * (rv[i] - mv);
    vt += (rt[i] - mt) * (rt[i] - mt);
  }
  CHECK(r.rho == doctest::Approx(cov / std::sqrt(vv * vt)).epsilon(1e-12));
  CHECK(r.rho == doctest::Approx(0.12195121951219515).epsilon(1e-12));
  CHECK(r.exact);
}
