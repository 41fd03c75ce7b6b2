#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace embedreg::bbob {

inline constexpr double kLowerBound = -5.0;
inline constexpr double kUpperBound = 5.0;

using Objective = std::function<double(std::span<const double>)>;

/// A closed-form objective bound to a dimensionality.
struct BbobFunction {
  std::string id;
  std::size_t dof = 0;
};

/// Maps stable lowercase ids to objectives. Pre-populated with the unshifted,
/// unrotated catalog; more functions can be registered at startup.
class Registry {
 public:
  static Registry& instance();

  void add(const std::string& id, Objective fn);
  bool contains(const std::string& id) const;
  const Objective& get(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  Registry();
  mutable std::mutex mu_;
  std::map<std::string, Objective> functions_;
};

/// The eight functions every run supports, in canonical order.
const std::vector<std::string>& catalog_ids();

/// Throws DimensionMismatchError or DomainError; otherwise f(x).
double evaluate(const BbobFunction& fn, std::span<const double> x);

// Individual objectives, exposed for direct use and testing.
double sphere(std::span<const double> x);
double ellipsoidal(std::span<const double> x);
double rastrigin(std::span<const double> x);
double rosenbrock(std::span<const double> x);
double discus(std::span<const double> x);
double bent_cigar(std::span<const double> x);
double different_powers(std::span<const double> x);
double sharp_ridge(std::span<const double> x);

}  // namespace embedreg::bbob
