#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mona/experiment.hpp"
#include "mona/metrics.hpp"

namespace mona {

/// Comma-separated table with a header row. Cells are kept as text; numeric
/// access goes through column().
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t index(const std::string& name) const;  // ConfigError if absent
  /// Empty cells are nullopt; other non-numeric cells raise ParseError.
  std::vector<std::optional<double>> column(const std::string& name) const;
};

Table read_table_csv(std::istream& in);
Table records_table(const std::vector<MetricsRecord>& records);

/// Rank correlation over rows where both columns are present.
SpearmanResult spearman_columns(const Table& table, const std::string& x, const std::string& y);

/// Per variant, over each run's last evaluated record.
struct VariantSummary {
  std::string variant;
  std::size_t runs = 0;
  double mean_wer_silent = 0.0;
  double min_wer_silent = 0.0;
  std::optional<double> mean_wer_vocal, mean_wer_audio;
  std::string best_run;  // lowest silent WER, ties to the first run seen
};

/// Variants in order of first appearance. Runs that never evaluated are
/// skipped; PreconditionError if nothing was evaluated at all.
std::vector<VariantSummary> summarize(const std::vector<MetricsRecord>& records);
void write_summary_csv(std::ostream& out, const std::vector<VariantSummary>& summary);

/// Epochs at which a run's validation curves bottom out; the WER minimum
/// often arrives later than the CTC minimum.
struct RunMinima {
  std::string run;
  std::optional<std::size_t> best_wer_epoch, best_ctc_epoch;
};
std::vector<RunMinima> curve_minima(const std::vector<MetricsRecord>& records);

/// Long format: run,variant,seed,epoch,metric,value for the training total,
/// validation CTC and the three WER columns.
void write_series_csv(std::ostream& out, const std::vector<MetricsRecord>& records);

}  // namespace mona
