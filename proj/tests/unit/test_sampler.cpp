#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "mona/errors.hpp"
#include "mona/sampler.hpp"
#include "test_util.hpp"

using namespace mona;

namespace {

std::vector<PackingItem> mixed_items(std::uint64_t seed, std::size_t n, const ClassProportions& p,
                                     std::size_t max_item_len) {
  std::mt19937_64 rng(seed);
  std::vector<PackingItem> items;
  const std::size_t silent = static_cast<std::size_t>(p[0] * n + 0.5);
  const std::size_t vocal = static_cast<std::size_t>(p[1] * n + 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    DatasetClass c = i < silent ? DatasetClass::GaddySilent
                                : (i < silent + vocal ? DatasetClass::GaddyVocal : DatasetClass::LibriSpeech);
    items.push_back({i, static_cast<std::size_t>(testing::random_int(rng, 1, static_cast<int>(max_item_len))), c});
  }
  return items;
}

void check_invariants(const std::vector<PackingItem>& items, const PackingConfig& cfg, const PackingResult& r) {
  std::map<std::size_t, PackingItem> by_index;
  for (const auto& it : items) by_index[it.index] = it;
  std::set<std::size_t> seen;
  for (const Bin& b : r.bins) {
    std::size_t len = 0;
    std::set<DatasetClass> classes;
    for (std::size_t idx : b.items) {
      CHECK(seen.insert(idx).second);
      len += by_index.at(idx).length;
      classes.insert(by_index.at(idx).tag);
    }
    CHECK(len == b.length);
    CHECK(len <= cfg.max_len);
    for (DatasetClass req : cfg.required) CHECK(classes.count(req) == 1);
  }
  std::set<std::size_t> expected_left;
  for (const auto& it : items)
    if (!seen.count(it.index) && it.length <= cfg.max_len) expected_left.insert(it.index);
  CHECK(std::set<std::size_t>(r.discarded.begin(), r.discarded.end()) == expected_left);
  CHECK(r.discarded.size() == expected_left.size());
}

}  // namespace

TEST_CASE("proportion presets") {
  const ClassProportions d = default_proportions();
  CHECK(d[0] + d[1] + d[2] == doctest::Approx(1.0).epsilon(1e-12));
  const ClassProportions b = balanced_proportions();
  const double s = b[0] + b[1] + b[2];
  CHECK(s >= 0.999);
  CHECK(s <= 1.001);
  PackingConfig cfg;
  cfg.proportions = b;
  const ClassProportions n = cfg.normalized_proportions();
  CHECK(n[0] + n[1] + n[2] == doctest::Approx(1.0).epsilon(1e-12));
  PackingConfig base;
  PackingConfig bal = base;
  bal.proportions = balanced_proportions();
  CHECK(bal.max_len == base.max_len);
  CHECK(bal.required == base.required);
}

TEST_CASE("one class of full-length items packs one per bin") {
  std::vector<PackingItem> items;
  for (std::size_t i = 0; i < 7; ++i) items.push_back({i, 10, DatasetClass::GaddySilent});
  PackingConfig cfg;
  cfg.max_len = 10;
  cfg.proportions = {1, 0, 0};
  PackingResult r = pack(items, cfg);
  CHECK(r.bins.size() == 7);
  CHECK(r.discarded.empty());
  check_invariants(items, cfg, r);
}

TEST_CASE("every bin holds a required-class item") {
  std::vector<PackingItem> items;
  for (std::size_t i = 0; i < 60; ++i)
    items.push_back({i, 1, i % 4 == 0 ? DatasetClass::GaddySilent : DatasetClass::GaddyVocal});
  PackingConfig cfg;
  cfg.max_len = 10;
  cfg.proportions = {0.3, 0.7, 0.0};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.seed = seed;
    check_invariants(items, cfg, pack(items, cfg));
  }
}

TEST_CASE("configuration errors") {
  std::vector<PackingItem> items = {{0, 3, DatasetClass::GaddyVocal}};
  PackingConfig cfg;
  cfg.max_len = 10;
  CHECK_THROWS_AS(pack(items, cfg), ConfigError);  // no GaddySilent item
  cfg.required.clear();
  cfg.proportions = {0.5, 0.2, 0.2};
  CHECK_THROWS_AS(pack(items, cfg), ConfigError);
  cfg.proportions = {0, 1, 0};
  cfg.max_len = 0;
  CHECK_THROWS_AS(pack(items, cfg), ConfigError);
}

TEST_CASE("overlong items are rejected at ingestion") {
  std::vector<PackingItem> items = {{0, 5, DatasetClass::GaddySilent}, {1, 50, DatasetClass::GaddySilent},
                                    {2, 4, DatasetClass::GaddySilent}};
  PackingConfig cfg;
  cfg.max_len = 10;
  cfg.proportions = {1, 0, 0};
  PackingResult r = pack(items, cfg);
  CHECK(r.rejected == std::vector<std::size_t>{1});
  check_invariants(items, cfg, r);
}

TEST_CASE("realized class proportions track the targets") {
  // Pooled over 20 seeds; a single 1000-item epoch has ~1.6 points of
  // binomial noise per class.
  const ClassProportions p = default_proportions();
  std::array<double, 3> counts{};
  double total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto items = mixed_items(seed, 1000, p, 40);
    PackingConfig cfg;
    cfg.max_len = 400;
    cfg.seed = seed;
    PackingResult r = pack(items, cfg);
    check_invariants(items, cfg, r);
    for (const Bin& b : r.bins)
      for (std::size_t idx : b.items) {
        counts[static_cast<std::size_t>(items[idx].tag)] += 1;
        total += 1;
      }
  }
  for (std::size_t c = 0; c < 3; ++c) {
    CAPTURE(c);
    CHECK(std::abs(counts[c] / total - p[c]) <= 0.03);
  }
}

TEST_CASE("epoch stream determinism") {
  auto items = mixed_items(1, 300, default_proportions(), 30);
  PackingConfig cfg;
  cfg.max_len = 200;
  cfg.seed = 42;
  EpochStream a(items, cfg), b(items, cfg);
  for (int e = 0; e < 3; ++e) {
    PackingResult ra = a.next(), rb = b.next();
    REQUIRE(ra.bins.size() == rb.bins.size());
    for (std::size_t k = 0; k < ra.bins.size(); ++k) CHECK(ra.bins[k].items == rb.bins[k].items);
    CHECK(ra.discarded == rb.discarded);
  }
  CHECK(a.epoch(0).bins.front().items != a.epoch(1).bins.front().items);

  std::set<std::vector<std::size_t>> firsts;
  for (std::uint64_t s = 0; s < 10; ++s) {
    cfg.seed = s;
    firsts.insert(EpochStream(items, cfg).epoch(0).bins.front().items);
  }
  CHECK(firsts.size() >= 9);
}

TEST_CASE("epoch ends when the scarcest class runs out") {
  // Silent is scarce; phase one stops once the silent pool is empty, so every
  // silent item is packed while vocalized items are left over.
  std::vector<PackingItem> items;
  for (std::size_t i = 0; i < 200; ++i)
    items.push_back({i, 5, i < 10 ? DatasetClass::GaddySilent : DatasetClass::GaddyVocal});
  PackingConfig cfg;
  cfg.max_len = 20;
  cfg.proportions = {0.5, 0.5, 0.0};
  cfg.required.clear();
  PackingResult r = pack(items, cfg);
  std::size_t silent_packed = 0;
  for (const Bin& b : r.bins)
    for (std::size_t idx : b.items) silent_packed += idx < 10;
  CHECK(silent_packed == 10);
  CHECK_FALSE(r.discarded.empty());
  check_invariants(items, cfg, r);
}
