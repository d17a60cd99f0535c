#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace mona {

enum class DatasetClass { GaddySilent = 0, GaddyVocal = 1, LibriSpeech = 2 };

inline constexpr std::size_t kNumDatasetClasses = 3;

std::string_view to_string(DatasetClass c);
DatasetClass dataset_class_from_string(std::string_view name);

/// Class sampling proportions indexed by DatasetClass.
using ClassProportions = std::array<double, kNumDatasetClasses>;

/// Proportions used for most runs: 11.2% silent, 38.8% vocalized, 50% LibriSpeech.
ClassProportions default_proportions();
/// Balanced EMG/audio variant: 18.3% silent, 63.3% vocalized, 18.3% LibriSpeech.
ClassProportions balanced_proportions();

struct PackingItem {
  std::size_t index = 0;
  std::size_t length = 0;  // timesteps
  DatasetClass tag = DatasetClass::GaddyVocal;
};

struct PackingConfig {
  std::size_t max_len = 128000;
  ClassProportions proportions = default_proportions();
  std::vector<DatasetClass> required = {DatasetClass::GaddySilent};
  std::size_t failure_threshold = 50;
  std::uint64_t seed = 0;

  /// Throws ConfigError; proportions are renormalized when they sum to
  /// within 1e-3 of one.
  void validate() const;
  ClassProportions normalized_proportions() const;
};

struct Bin {
  std::vector<std::size_t> items;  // PackingItem::index values
  std::size_t length = 0;
};

struct PackingResult {
  std::vector<Bin> bins;
  std::vector<std::size_t> discarded;  // valid items left over after packing
  std::vector<std::size_t> rejected;   // items longer than max_len
};

/// Greedy class-weighted bin packing.
///
/// Phase one samples a class by proportion (skipping it while it owes
/// debt), pops a shuffled item of that class and places it first-fit; when
/// a new bin is opened it is immediately completed with one item of each
/// missing required class, which puts those classes into debt. The phase
/// ends as soon as any class runs out of items. Phase two samples only
/// among classes that still have items and first-fits into existing bins
/// until `failure_threshold` consecutive placements fail.
PackingResult pack(const std::vector<PackingItem>& items, const PackingConfig& config);

/// Deterministic per-epoch packing: epoch e reshuffles with a seed derived
/// from (config.seed, e).
class EpochStream {
 public:
  EpochStream(std::vector<PackingItem> items, PackingConfig config);

  PackingResult epoch(std::size_t index) const;
  PackingResult next() { return epoch(next_epoch_++); }
  std::size_t epochs_emitted() const { return next_epoch_; }

 private:
  std::vector<PackingItem> items_;
  PackingConfig config_;
  std::size_t next_epoch_ = 0;
};

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace mona
