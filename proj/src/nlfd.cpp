#include "embedreg/nlfd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "embedreg/bbob.hpp"
#include "embedreg/error.hpp"
#include "embedreg/random.hpp"

namespace embedreg {
namespace {

using Index = Eigen::Index;

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  return out;
}

// Correctly rounded sum (Shewchuk partials, as in Python's math.fsum). Makes the squared
// distance of column-duplicated embeddings exactly a power-of-two multiple of the original.
double exact_sum(const double* v, std::size_t n) {
  std::vector<double> partials;
  for (std::size_t k = 0; k < n; ++k) {
    double x = v[k];
    std::size_t i = 0;
    for (double y : partials) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials[i++] = lo;
      x = hi;
    }
    partials.resize(i);
    partials.push_back(x);
  }
  if (partials.empty()) return 0.0;
  std::size_t m = partials.size();
  double hi = partials[--m];
  double lo = 0.0;
  while (m > 0) {
    const double x = hi;
    const double y = partials[--m];
    hi = x + y;
    lo = y - (hi - x);
    if (lo != 0.0) break;
  }
  if (m > 0 && ((lo < 0.0 && partials[m - 1] < 0.0) || (lo > 0.0 && partials[m - 1] > 0.0))) {
    const double y = lo * 2.0;
    const double x = hi + y;
    if (y == x - hi) hi = x;
  }
  return hi;
}

double exact_squared_distance(const RowMatrix& x, std::size_t i, std::size_t j, std::vector<double>& buf) {
  buf.resize(static_cast<std::size_t>(x.cols()));
  for (Index c = 0; c < x.cols(); ++c) {
    const double d = x(static_cast<Index>(i), c) - x(static_cast<Index>(j), c);
    buf[static_cast<std::size_t>(c)] = d * d;
  }
  return exact_sum(buf.data(), buf.size());
}

}  // namespace

EmbeddingMatrix normalize_embeddings(const EmbeddingMatrix& m) {
  if (m.rows() < 2) throw ValidationError("normalize_embeddings: need at least 2 rows");
  RowMatrix out = m.values();
  const double n = static_cast<double>(out.rows());
  for (Index c = 0; c < out.cols(); ++c) {
    const double mean = out.col(c).sum() / n;
    out.col(c).array() -= mean;
    const double var = out.col(c).squaredNorm() / n;
    if (var >= 1e-12) out.col(c) /= std::sqrt(var);
  }
  return EmbeddingMatrix(std::move(out), m.provenance());
}

NlfdSample lipschitz_factors(const EmbeddingMatrix& normalized, std::span<const double> y) {
  const std::size_t n = normalized.rows();
  if (n < 2) throw ValidationError("lipschitz_factors: need at least 2 rows");
  if (y.size() != n) {
    throw DimensionMismatchError("lipschitz_factors: " + std::to_string(n) + " rows but " +
                                 std::to_string(y.size()) + " targets");
  }
  if (normalized.dim() == 0) throw ValidationError("lipschitz_factors: zero-width embeddings");
  const RowMatrix& x = normalized.values();

  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> nn(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d2 = (x.row(static_cast<Index>(i)) - x.row(static_cast<Index>(j))).squaredNorm();
      if (d2 < best[i]) {
        best[i] = d2;
        nn[i] = j;
      }
      if (d2 < best[j]) {
        best[j] = d2;
        nn[j] = i;
      }
    }
  }

  NlfdSample s;
  s.d = normalized.dim();
  const double scale = std::sqrt(static_cast<double>(s.d));
  s.factors.reserve(n);
  std::vector<double> buf;
  for (std::size_t i = 0; i < n; ++i) {
    const double dist = std::sqrt(exact_squared_distance(x, i, nn[i], buf));
    if (dist < kDegenerateDistance) {
      ++s.excluded_pairs;
      continue;
    }
    s.factors.push_back(std::abs(y[i] - y[nn[i]]) / dist * scale);
  }
  if (s.factors.empty()) {
    throw EmptyInputError("lipschitz_factors: every nearest-neighbour pair is degenerate");
  }
  const double m = static_cast<double>(s.factors.size());
  s.mu = std::accumulate(s.factors.begin(), s.factors.end(), 0.0) / m;
  double ss = 0.0;
  for (double f : s.factors) ss += (f - s.mu) * (f - s.mu);
  s.sigma = std::sqrt(ss / m);
  return s;
}

NlfdSample compute_nlfd(const EmbeddingMatrix& raw, std::span<const double> y) {
  return lipschitz_factors(normalize_embeddings(raw), y);
}

NlfdComparison nlfd_zscore(const NlfdSummary& a, const NlfdSummary& b) {
  if (a.n == 0 || b.n == 0) throw EmptyInputError("nlfd_zscore: empty sample");
  const double denom = std::sqrt(a.sigma * a.sigma + b.sigma * b.sigma);
  if (denom == 0.0) throw UndefinedMetricError("nlfd_zscore: both standard deviations are zero");
  return {(a.mu - b.mu) / denom, a, b};
}

NlfdComparison nlfd_zscore(const NlfdSample& a, const NlfdSample& b) {
  return nlfd_zscore(NlfdSummary{a.mu, a.sigma, a.size()}, NlfdSummary{b.mu, b.sigma, b.size()});
}

std::vector<HistogramBin> histogram(const NlfdSample& sample, std::size_t bins) {
  if (bins == 0) throw ValidationError("histogram: bins must be positive");
  if (sample.factors.empty()) throw EmptyInputError("histogram: empty sample");
  const double top = *std::max_element(sample.factors.begin(), sample.factors.end());
  const double width = top / static_cast<double>(bins);
  std::vector<HistogramBin> out(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lo = width * static_cast<double>(b);
    out[b].hi = b + 1 == bins ? top : width * static_cast<double>(b + 1);
  }
  for (double f : sample.factors) {
    std::size_t b = width > 0.0 ? static_cast<std::size_t>(f / width) : 0;
    ++out[std::min(b, bins - 1)].count;
  }
  return out;
}

std::vector<ProbeSet> ball_probe_sample(const RegressionTask& task, const Assignment& reference,
                                        std::span<const double> radii, std::size_t per_radius,
                                        std::uint64_t seed) {
  if (!task.is_continuous_only()) {
    throw ValidationError("ball_probe_sample: task '" + task.id() + "' has categorical parameters");
  }
  validate_assignment(task, reference);
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (!(radii[k] > 0.0)) throw ValidationError("ball_probe_sample: radii must be positive");
    if (k > 0 && radii[k] < radii[k - 1]) throw ValidationError("ball_probe_sample: radii must be ascending");
  }
  const std::size_t dof = task.dof();
  std::vector<double> ref(dof);
  for (std::size_t i = 0; i < dof; ++i) ref[i] = std::get<double>(reference[i]);

  constexpr std::size_t kMaxRejections = 1000;
  Rng rng(derive_seed(seed, "ball_probe"));
  std::vector<ProbeSet> out;
  std::vector<double> dir(dof);
  for (double r : radii) {
    ProbeSet set{r, {}};
    set.second.reserve(per_radius);
    for (std::size_t p = 0; p < per_radius; ++p) {
      std::size_t rejections = 0;
      for (;;) {
        double norm2 = 0.0;
        for (auto& v : dir) {
          v = rng.normal();
          norm2 += v * v;
        }
        const double norm = std::sqrt(norm2);
        if (norm == 0.0) continue;
        Assignment point(dof);
        bool inside = true;
        for (std::size_t i = 0; i < dof && inside; ++i) {
          const double v = ref[i] + r * dir[i] / norm;
          const auto& range = task.params()[i].range();
          inside = v >= range.lo && v <= range.hi;
          point[i] = v;
        }
        if (inside) {
          set.second.push_back(std::move(point));
          break;
        }
        if (++rejections >= kMaxRejections) {
          throw InfeasibleRadiusError("ball_probe_sample: radius " + std::to_string(r) +
                                      " is infeasible around the reference");
        }
      }
    }
    out.push_back(std::move(set));
  }
  return out;
}

std::vector<DistanceRecord> pairwise_distance_export(const EmbeddingMatrix& m,
                                                     std::span<const double> labels) {
  const std::size_t n = m.rows();
  if (labels.size() != n) {
    throw DimensionMismatchError("pairwise_distance_export: " + std::to_string(n) + " rows but " +
                                 std::to_string(labels.size()) + " labels");
  }
  const RowMatrix& x = m.values();
  std::vector<DistanceRecord> out;
  out.reserve(n * (n > 0 ? n - 1 : 0) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = (x.row(static_cast<Index>(i)) - x.row(static_cast<Index>(j))).norm();
      out.push_back({i, j, d, labels[i], labels[j]});
    }
  }
  return out;
}

void write_histogram_csv(const std::filesystem::path& path, const std::vector<HistogramBin>& bins) {
  auto out = open_out(path);
  out << "bin_lo,bin_hi,count\n";
  for (const auto& b : bins) out << b.lo << ',' << b.hi << ',' << b.count << '\n';
}

void write_factors_csv(const std::filesystem::path& path, const NlfdSample& sample) {
  auto out = open_out(path);
  out << "factor\n";
  for (double f : sample.factors) out << f << '\n';
}

void write_distances_csv(const std::filesystem::path& path, const std::vector<DistanceRecord>& rows) {
  auto out = open_out(path);
  out << "i,j,distance,label_i,label_j\n";
  for (const auto& r : rows) {
    out << r.i << ',' << r.j << ',' << r.distance << ',' << r.label_i << ',' << r.label_j << '\n';
  }
}

}  // namespace embedreg
