#include "mona/sampler.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>
#include <string>

#include "mona/errors.hpp"

namespace mona {

std::string_view to_string(DatasetClass c) {
  switch (c) {
    case DatasetClass::GaddySilent:
      return "gaddy_silent";
    case DatasetClass::GaddyVocal:
      return "gaddy_vocal";
    case DatasetClass::LibriSpeech:
      return "librispeech";
  }
  return "unknown";
}

DatasetClass dataset_class_from_string(std::string_view name) {
  for (DatasetClass c : {DatasetClass::GaddySilent, DatasetClass::GaddyVocal, DatasetClass::LibriSpeech})
    if (to_string(c) == name) return c;
  throw ConfigError("unknown dataset class '" + std::string(name) + "'");
}

ClassProportions default_proportions() { return {0.112, 0.388, 0.5}; }

ClassProportions balanced_proportions() { return {0.183, 0.633, 0.183}; }

void PackingConfig::validate() const {
  if (max_len == 0) throw ConfigError("max_len must be positive");
  if (failure_threshold == 0) throw ConfigError("failure_threshold must be positive");
  double total = 0.0;
  for (double p : proportions) {
    if (!std::isfinite(p) || p < 0.0) throw ConfigError("class proportions must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-3) {
    throw ConfigError("class proportions sum to " + std::to_string(total) + ", expected 1");
  }
}

ClassProportions PackingConfig::normalized_proportions() const {
  validate();
  const double total = std::accumulate(proportions.begin(), proportions.end(), 0.0);
  ClassProportions p = proportions;
  for (double& v : p) v /= total;
  return p;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over the pair
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

class Packer {
 public:
  Packer(const std::vector<PackingItem>& items, const PackingConfig& config)
      : config_(config), rng_(config.seed) {
    config_.validate();
    for (const PackingItem& it : items) {
      if (it.length == 0) throw PreconditionError("item " + std::to_string(it.index) + " has zero length");
      if (it.length > config_.max_len) {
        result_.rejected.push_back(it.index);
        continue;
      }
      pools_[static_cast<std::size_t>(it.tag)].push_back(it);
    }
    for (DatasetClass c : config_.required)
      if (pools_[static_cast<std::size_t>(c)].empty()) {
        throw ConfigError("required class " + std::string(to_string(c)) + " has no items");
      }
    for (auto& pool : pools_) std::shuffle(pool.begin(), pool.end(), rng_);
  }

  PackingResult run() {
    phase_one();
    phase_two();
    for (auto& pool : pools_)
      for (const PackingItem& it : pool) result_.discarded.push_back(it.index);
    for (const PackingItem& it : set_aside_) result_.discarded.push_back(it.index);
    std::sort(result_.discarded.begin(), result_.discarded.end());
    return std::move(result_);
  }

 private:
  bool all_classes_have_items() const {
    for (std::size_t c = 0; c < kNumDatasetClasses; ++c)
      if (present_[c] && pools_[c].empty()) return false;
    return true;
  }

  std::size_t sample_class(const ClassProportions& p) {
    std::discrete_distribution<std::size_t> dist(p.begin(), p.end());
    return dist(rng_);
  }

  std::optional<std::size_t> first_fit(std::size_t length) const {
    for (std::size_t b = 0; b < result_.bins.size(); ++b)
      if (result_.bins[b].length + length <= config_.max_len) return b;
    return std::nullopt;
  }

  void phase_one() {
    for (std::size_t c = 0; c < kNumDatasetClasses; ++c) present_[c] = !pools_[c].empty();
    // Classes absent from the input are never sampled.
    ClassProportions p = config_.normalized_proportions();
    double mass = 0.0;
    for (std::size_t c = 0; c < kNumDatasetClasses; ++c) {
      if (!present_[c]) p[c] = 0.0;
      mass += p[c];
    }
    if (mass == 0.0) throw ConfigError("no class with items has a positive proportion");
    std::array<std::size_t, kNumDatasetClasses> debt{};
    while (all_classes_have_items()) {
      const std::size_t c = sample_class(p);
      if (debt[c] > 0) {
        --debt[c];
        continue;
      }
      assert(!pools_[c].empty());
      PackingItem item = pools_[c].back();
      pools_[c].pop_back();

      if (auto b = first_fit(item.length)) {
        add_to_bin(*b, item);
        continue;
      }
      // New bin, completed with one item per missing required class.
      std::vector<PackingItem> members = {item};
      std::size_t length = item.length;
      bool complete = true;
      for (DatasetClass r : config_.required) {
        const auto rc = static_cast<std::size_t>(r);
        const bool has = std::any_of(members.begin(), members.end(), [r](const PackingItem& m) { return m.tag == r; });
        if (has) continue;
        auto& pool = pools_[rc];
        auto fit = std::find_if(pool.rbegin(), pool.rend(),
                                [&](const PackingItem& m) { return length + m.length <= config_.max_len; });
        if (fit == pool.rend()) {
          complete = false;
          break;
        }
        members.push_back(*fit);
        length += fit->length;
        pool.erase(std::next(fit).base());
        ++debt[rc];
      }
      if (!complete) {
        // Undo: return borrowed required items, set the triggering item aside.
        for (std::size_t k = 1; k < members.size(); ++k) {
          const auto rc = static_cast<std::size_t>(members[k].tag);
          pools_[rc].push_back(members[k]);
          --debt[rc];
        }
        set_aside_.push_back(item);
        continue;
      }
      result_.bins.emplace_back();
      for (const PackingItem& m : members) add_to_bin(result_.bins.size() - 1, m);
    }
  }

  void phase_two() {
    std::size_t failures = 0;
    auto remaining = [this] {
      return std::any_of(pools_.begin(), pools_.end(), [](const auto& pool) { return !pool.empty(); });
    };
    if (result_.bins.empty()) return;
    while (failures < config_.failure_threshold && remaining()) {
      ClassProportions p = config_.normalized_proportions();
      double total = 0.0;
      for (std::size_t c = 0; c < kNumDatasetClasses; ++c) {
        if (pools_[c].empty()) p[c] = 0.0;
        total += p[c];
      }
      if (total == 0.0) {
        // Items remain only in classes with zero proportion.
        for (std::size_t c = 0; c < kNumDatasetClasses; ++c) p[c] = pools_[c].empty() ? 0.0 : 1.0;
      }
      const std::size_t c = sample_class(p);
      auto& pool = pools_[c];
      PackingItem item = pool.back();
      pool.pop_back();
      if (auto b = first_fit(item.length)) {
        add_to_bin(*b, item);
        failures = 0;
      } else {
        pool.push_front(item);  // retry later with a different item of this class
        ++failures;
      }
    }
  }

  void add_to_bin(std::size_t b, const PackingItem& item) {
    result_.bins[b].items.push_back(item.index);
    result_.bins[b].length += item.length;
  }

  PackingConfig config_;
  std::mt19937_64 rng_;
  std::array<std::deque<PackingItem>, kNumDatasetClasses> pools_;
  std::array<bool, kNumDatasetClasses> present_{};
  std::vector<PackingItem> set_aside_;
  PackingResult result_;
};

}  // namespace

PackingResult pack(const std::vector<PackingItem>& items, const PackingConfig& config) {
  return Packer(items, config).run();
}

EpochStream::EpochStream(std::vector<PackingItem> items, PackingConfig config)
    : items_(std::move(items)), config_(std::move(config)) {
  config_.validate();
}

PackingResult EpochStream::epoch(std::size_t index) const {
  PackingConfig cfg = config_;
  cfg.seed = derive_seed(config_.seed, index);
  return pack(items_, cfg);
}

}  // namespace mona
