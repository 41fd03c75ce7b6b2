#include "embedreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "embedreg/error.hpp"

namespace embedreg::metrics {
namespace {

void check_pair(std::span<const double> y, std::span<const double> yhat, std::size_t min_n) {
  if (y.size() != yhat.size()) {
    throw DimensionMismatchError("metric inputs differ in length: " + std::to_string(y.size()) +
                                 " vs " + std::to_string(yhat.size()));
  }
  if (y.size() < min_n) {
    throw DimensionMismatchError("metric needs at least " + std::to_string(min_n) + " values");
  }
}

// Number of pairs tied within runs of equal values in an already-sorted range.
template <typename It, typename Eq>
std::int64_t tied_pairs(It first, It last, Eq eq) {
  std::int64_t total = 0;
  while (first != last) {
    It run_end = first + 1;
    while (run_end != last && eq(*first, *run_end)) ++run_end;
    const auto k = static_cast<std::int64_t>(run_end - first);
    total += k * (k - 1) / 2;
    first = run_end;
  }
  return total;
}

// Merge sort on values, returning the number of inversions (swaps).
std::int64_t sort_count_swaps(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                              std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = sort_count_swaps(v, buf, lo, mid) + sort_count_swaps(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

double pearson_impl(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) throw UndefinedMetricError("correlation of a zero-variance series");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

double kendall_tau(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat, 2);
  const std::size_t n = y.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return y[a] < y[b] || (y[a] == y[b] && yhat[a] < yhat[b]);
  });

  auto same_y = [&](std::size_t a, std::size_t b) { return y[a] == y[b]; };
  auto same_both = [&](std::size_t a, std::size_t b) { return y[a] == y[b] && yhat[a] == yhat[b]; };
  const std::int64_t ties_y = tied_pairs(order.begin(), order.end(), same_y);
  const std::int64_t ties_both = tied_pairs(order.begin(), order.end(), same_both);

  std::vector<double> second(n);
  for (std::size_t i = 0; i < n; ++i) second[i] = yhat[order[i]];
  std::vector<double> buf(n);
  const std::int64_t swaps = sort_count_swaps(second, buf, 0, n);
  const std::int64_t ties_yhat =
      tied_pairs(second.begin(), second.end(), [](double a, double b) { return a == b; });

  const auto total = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  // total = C + D + (tied in y only) + (tied in yhat only) + (tied in both)
  const std::int64_t concordant_minus_discordant =
      total - ties_y - ties_yhat + ties_both - 2 * swaps;
  const std::int64_t untied_y = total - ties_y;        // C + D + tied in yhat only
  const std::int64_t untied_yhat = total - ties_yhat;  // C + D + tied in y only
  if (untied_y == 0 || untied_yhat == 0) {
    throw UndefinedMetricError("kendall_tau: a series is entirely tied");
  }
  return static_cast<double>(concordant_minus_discordant) /
         std::sqrt(static_cast<double>(untied_y) * static_cast<double>(untied_yhat));
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat, 2);
  const auto ry = average_ranks(y);
  const auto rh = average_ranks(yhat);
  return pearson_impl(ry, rh);
}

double pearson(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat, 2);
  return pearson_impl(y, yhat);
}

double mse(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat, 1);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

double mae(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat, 1);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

MetricBundle compute_all(std::span<const double> y, std::span<const double> yhat) {
  return {kendall_tau(y, yhat), spearman(y, yhat), pearson(y, yhat), mse(y, yhat), mae(y, yhat)};
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"kendall_tau", "spearman", "pearson", "mse", "mae"};
  return names;
}

double metric_value(const MetricBundle& m, const std::string& name) {
  if (name == "kendall_tau") return m.kendall_tau;
  if (name == "spearman") return m.spearman;
  if (name == "pearson") return m.pearson;
  if (name == "mse") return m.mse;
  if (name == "mae") return m.mae;
  throw ValidationError("unknown metric '" + name + "'");
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw EmptyInputError("percentile of an empty list");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("percentile p must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Distribution summarize(const std::vector<double>& values) {
  if (values.empty()) throw EmptyInputError("summarize: no values");
  Distribution d;
  d.count = values.size();
  d.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  d.median = percentile(values, 0.5);
  d.p40 = percentile(values, 0.4);
  d.p60 = percentile(values, 0.6);
  return d;
}

AggregateSummary aggregate(const std::vector<std::pair<std::string, MetricBundle>>& tasks) {
  if (tasks.empty()) throw EmptyInputError("aggregate: no tasks");
  AggregateSummary out;
  for (const auto& name : metric_names()) {
    std::vector<double> values;
    values.reserve(tasks.size());
    for (const auto& [id, m] : tasks) values.push_back(metric_value(m, name));
    out[name] = summarize(values);
  }
  return out;
}

double outperformance_percentage(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b, 1);
  std::size_t wins = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) ++wins;
  }
  return 100.0 * static_cast<double>(wins) / static_cast<double>(a.size());
}

}  // namespace embedreg::metrics
