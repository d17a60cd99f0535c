#include "mona/report.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

#include "mona/errors.hpp"

namespace mona {

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(std::move(cell));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : ""; }

std::optional<double> mean(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::size_t Table::index(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ConfigError("no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

std::vector<std::optional<double>> Table::column(const std::string& name) const {
  const std::size_t c = index(name);
  std::vector<std::optional<double>> out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::string& s = rows[r][c];
    if (s.empty()) {
      out.emplace_back();
      continue;
    }
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw ParseError("column '" + name + "': '" + s + "' is not a number", r + 2);
    }
    out.emplace_back(v);
  }
  return out;
}

Table read_table_csv(std::istream& in) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty table", 1);
  t.columns = split_row(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto row = split_row(line);
    if (row.size() != t.columns.size()) {
      throw ParseError("expected " + std::to_string(t.columns.size()) + " fields", line_no);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table records_table(const std::vector<MetricsRecord>& records) {
  std::stringstream s;
  write_metrics_csv(s, records);
  return read_table_csv(s);
}

SpearmanResult spearman_columns(const Table& table, const std::string& x, const std::string& y) {
  const auto a = table.column(x);
  const auto b = table.column(y);
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && b[i]) xs.push_back(*a[i]), ys.push_back(*b[i]);
  return spearman_rho(xs, ys);
}

namespace {

// Last record carrying a silent WER, per run, in first-appearance order.
std::vector<const MetricsRecord*> final_records(const std::vector<MetricsRecord>& records) {
  std::vector<std::string> order;
  std::map<std::string, const MetricsRecord*> last;
  for (const auto& r : records) {
    if (!last.count(r.run)) order.push_back(r.run), last[r.run] = nullptr;
    if (r.wer_silent && (!last[r.run] || r.epoch >= last[r.run]->epoch)) last[r.run] = &r;
  }
  std::vector<const MetricsRecord*> out;
  for (const auto& run : order)
    if (last[run]) out.push_back(last[run]);
  return out;
}

}  // namespace

std::vector<VariantSummary> summarize(const std::vector<MetricsRecord>& records) {
  const auto finals = final_records(records);
  if (finals.empty()) throw PreconditionError("no evaluated records to summarize");
  std::vector<std::string> order;
  std::map<std::string, std::vector<const MetricsRecord*>> by_variant;
  for (const MetricsRecord* r : finals) {
    if (!by_variant.count(r->variant)) order.push_back(r->variant);
    by_variant[r->variant].push_back(r);
  }
  std::vector<VariantSummary> out;
  for (const auto& name : order) {
    VariantSummary s;
    s.variant = name;
    std::vector<double> silent, vocal, audio;
    const MetricsRecord* best = nullptr;
    for (const MetricsRecord* r : by_variant[name]) {
      silent.push_back(*r->wer_silent);
      if (r->wer_vocal) vocal.push_back(*r->wer_vocal);
      if (r->wer_audio) audio.push_back(*r->wer_audio);
      if (!best || *r->wer_silent < *best->wer_silent) best = r;
    }
    s.runs = silent.size();
    s.mean_wer_silent = *mean(silent);
    s.min_wer_silent = *std::min_element(silent.begin(), silent.end());
    s.mean_wer_vocal = mean(vocal);
    s.mean_wer_audio = mean(audio);
    s.best_run = best->run;
    out.push_back(std::move(s));
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<VariantSummary>& summary) {
  out << "variant,runs,mean_wer_silent,min_wer_silent,mean_wer_vocal,mean_wer_audio,best_run\n";
  for (const auto& s : summary) {
    out << s.variant << ',' << s.runs << ',' << num(s.mean_wer_silent) << ',' << num(s.min_wer_silent) << ','
        << opt(s.mean_wer_vocal) << ',' << opt(s.mean_wer_audio) << ',' << s.best_run << '\n';
  }
}

std::vector<RunMinima> curve_minima(const std::vector<MetricsRecord>& records) {
  std::vector<RunMinima> out;
  std::map<std::string, std::size_t> slot;
  std::map<std::string, std::pair<double, double>> best;
  for (const auto& r : records) {
    if (!slot.count(r.run)) {
      slot[r.run] = out.size();
      out.push_back({r.run, std::nullopt, std::nullopt});
      best[r.run] = {0.0, 0.0};
    }
    RunMinima& m = out[slot[r.run]];
    auto& [wer, ctc] = best[r.run];
    if (r.wer_silent && (!m.best_wer_epoch || *r.wer_silent < wer)) wer = *r.wer_silent, m.best_wer_epoch = r.epoch;
    if (r.val_silent_ctc && (!m.best_ctc_epoch || *r.val_silent_ctc < ctc)) {
      ctc = *r.val_silent_ctc;
      m.best_ctc_epoch = r.epoch;
    }
  }
  return out;
}

void write_series_csv(std::ostream& out, const std::vector<MetricsRecord>& records) {
  out << "run,variant,seed,epoch,metric,value\n";
  for (const auto& r : records) {
    const std::pair<const char*, std::optional<double>> cells[] = {
        {"train_total", r.train_total}, {"val_silent_ctc", r.val_silent_ctc}, {"wer_silent", r.wer_silent},
        {"wer_vocal", r.wer_vocal},     {"wer_audio", r.wer_audio}};
    for (const auto& [name, v] : cells)
      if (v) out << r.run << ',' << r.variant << ',' << r.seed << ',' << r.epoch << ',' << name << ',' << num(*v) << '\n';
  }
}

}  // namespace mona
