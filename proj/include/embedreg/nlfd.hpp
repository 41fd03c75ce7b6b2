#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "embedreg/embedding.hpp"
#include "embedreg/task.hpp"

namespace embedreg {

/// Degenerate-pair threshold on normalized embedding distance.
inline constexpr double kDegenerateDistance = 1e-10;

struct NlfdSample {
  std::vector<double> factors;  // one per usable point
  std::size_t d = 0;
  std::size_t excluded_pairs = 0;
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation

  std::size_t size() const { return factors.size(); }
};

struct NlfdSummary {
  double mu = 0.0;
  double sigma = 0.0;
  std::size_t n = 0;
};

struct NlfdComparison {
  double z = 0.0;
  NlfdSummary a;
  NlfdSummary b;
};

/// Full-batch zero mean / unit variance per column. Near-constant columns
/// (variance < 1e-12) are centered only.
EmbeddingMatrix normalize_embeddings(const EmbeddingMatrix& m);

/// Nearest-neighbour Lipschitz factors on already-normalized embeddings, rescaled
/// by sqrt(d) so that the result does not depend on the embedding width.
/// Exact O(n^2) search; ties go to the lowest index.
NlfdSample lipschitz_factors(const EmbeddingMatrix& normalized, std::span<const double> y);

/// normalize_embeddings followed by lipschitz_factors.
NlfdSample compute_nlfd(const EmbeddingMatrix& raw, std::span<const double> y);

/// z = (mu_a - mu_b) / sqrt(sigma_a^2 + sigma_b^2). With a = traditional, positive z
/// means b has the smoother landscape.
NlfdComparison nlfd_zscore(const NlfdSample& a, const NlfdSample& b);
NlfdComparison nlfd_zscore(const NlfdSummary& a, const NlfdSummary& b);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

/// Equal-width bins over [0, max factor]; the last bin is closed on the right.
std::vector<HistogramBin> histogram(const NlfdSample& sample, std::size_t bins);

using ProbeSet = std::pair<double, std::vector<Assignment>>;

/// Points on l2 spheres of each radius around the reference, resampled until they
/// land inside the box. Throws InfeasibleRadiusError after 1000 rejections for a point.
std::vector<ProbeSet> ball_probe_sample(const RegressionTask& task, const Assignment& reference,
                                        std::span<const double> radii, std::size_t per_radius,
                                        std::uint64_t seed);

struct DistanceRecord {
  std::size_t i = 0;
  std::size_t j = 0;
  double distance = 0.0;
  double label_i = 0.0;
  double label_j = 0.0;
};

/// All i < j pairs, row-major order.
std::vector<DistanceRecord> pairwise_distance_export(const EmbeddingMatrix& m,
                                                     std::span<const double> labels);

void write_histogram_csv(const std::filesystem::path& path, const std::vector<HistogramBin>& bins);
void write_factors_csv(const std::filesystem::path& path, const NlfdSample& sample);
void write_distances_csv(const std::filesystem::path& path, const std::vector<DistanceRecord>& rows);

}  // namespace embedreg
