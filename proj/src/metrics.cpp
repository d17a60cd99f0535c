#include "mona/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "mona/decoding.hpp"
#include "mona/errors.hpp"

namespace mona {

double EditStats::rate() const {
  if (reference_length == 0) throw PreconditionError("WER is undefined for an empty reference");
  return static_cast<double>(distance()) / static_cast<double>(reference_length);
}

EditStats word_edit_stats(std::span<const std::string> hyp, std::span<const std::string> ref) {
  const std::size_t n = ref.size(), m = hyp.size();
  // d[i][j]: cost of aligning ref[:i] with hyp[:j]
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({sub, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }

  EditStats st;
  st.reference_length = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++st.substitutions;
      --i, --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++st.deletions;
      --i;
    } else {
      ++st.insertions;
      --j;
    }
  }
  return st;
}

std::size_t word_edit_distance(std::span<const std::string> a, std::span<const std::string> b) {
  return word_edit_stats(a, b).distance();
}

double wer(std::span<const std::string> hypothesis, std::span<const std::string> reference) {
  return word_edit_stats(hypothesis, reference).rate();
}

double wer(std::string_view hypothesis, std::string_view reference) {
  const auto h = split_words(hypothesis), r = split_words(reference);
  return wer(h, r);
}

void WerAccumulator::add(std::string_view hypothesis, std::string_view reference) {
  const auto h = split_words(hypothesis), r = split_words(reference);
  if (r.empty()) throw PreconditionError("WER is undefined for an empty reference");
  const EditStats s = word_edit_stats(h, r);
  total.substitutions += s.substitutions;
  total.deletions += s.deletions;
  total.insertions += s.insertions;
  total.reference_length += s.reference_length;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw NumericError("rank correlation undefined for a constant sample");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

SpearmanResult spearman_rho(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DimensionError("spearman_rho needs samples of equal length");
  if (xs.size() < 3) throw PreconditionError("spearman_rho needs at least 3 pairs");
  const auto rx = average_ranks(xs), ry = average_ranks(ys);
  SpearmanResult out;
  out.rho = pearson(rx, ry);
  const std::size_t n = xs.size();

  if (n <= kSpearmanExactLimit) {
    // Every pairing of the y ranks against fixed x ranks is equally likely under H0.
    const double observed = std::abs(out.rho) - 1e-12;
    std::size_t extreme = 0, total = 0;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> shuffled(n);
    do {
      for (std::size_t i = 0; i < n; ++i) shuffled[i] = ry[order[i]];
      if (std::abs(pearson(rx, shuffled)) >= observed) ++extreme;
      ++total;
    } while (std::next_permutation(order.begin(), order.end()));
    out.p_value = static_cast<double>(extreme) / static_cast<double>(total);
    out.exact = true;
    return out;
  }

  if (std::abs(out.rho) >= 1.0) {
    out.p_value = 0.0;
    return out;
  }
  const double df = static_cast<double>(n - 2);
  const double t = out.rho * std::sqrt(df / (1.0 - out.rho * out.rho));
  boost::math::students_t dist(df);
  out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return out;
}

}  // namespace mona
