#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace embedreg::metrics {

/// Tie-corrected Kendall tau-b in O(n log n). Throws UndefinedMetricError when
/// either series is entirely tied; DimensionMismatchError on length mismatch or n < 2.
double kendall_tau(std::span<const double> y, std::span<const double> yhat);

/// Pearson correlation of average ranks.
double spearman(std::span<const double> y, std::span<const double> yhat);
double pearson(std::span<const double> y, std::span<const double> yhat);
double mse(std::span<const double> y, std::span<const double> yhat);
double mae(std::span<const double> y, std::span<const double> yhat);

/// Average ranks (1-based); tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

struct MetricBundle {
  double kendall_tau = 0.0;
  double spearman = 0.0;
  double pearson = 0.0;
  double mse = 0.0;
  double mae = 0.0;
};

MetricBundle compute_all(std::span<const double> y, std::span<const double> yhat);

/// Stable metric names, in reporting order.
const std::vector<std::string>& metric_names();
double metric_value(const MetricBundle& m, const std::string& name);

/// Linear interpolation between order statistics at position p * (n - 1); p in [0, 1].
double percentile(std::vector<double> values, double p);

struct Distribution {
  double mean = 0.0;
  double median = 0.0;
  double p40 = 0.0;
  double p60 = 0.0;
  std::size_t count = 0;
};

Distribution summarize(const std::vector<double>& values);

/// Per-metric distribution across tasks, keyed by metric name.
using AggregateSummary = std::map<std::string, Distribution>;

AggregateSummary aggregate(const std::vector<std::pair<std::string, MetricBundle>>& tasks);

/// Percentage (0-100) of positions where a[i] > b[i] strictly.
double outperformance_percentage(std::span<const double> a, std::span<const double> b);

}  // namespace embedreg::metrics
