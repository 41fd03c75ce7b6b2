#include "embedreg/bbob.hpp"

#include <cmath>
#include <numbers>

#include "embedreg/error.hpp"

namespace embedreg::bbob {
namespace {

// Exponent ramp (i-1)/(d-1) used by the conditioned functions; zero when d == 1.
double ramp(std::size_t i, std::size_t d) {
  return d > 1 ? static_cast<double>(i) / static_cast<double>(d - 1) : 0.0;
}

}  // namespace

double sphere(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double ellipsoidal(std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += std::pow(10.0, 6.0 * ramp(i, x.size())) * x[i] * x[i];
  }
  return s;
}

double rastrigin(std::span<const double> x) {
  double cos_sum = 0.0;
  double sq_sum = 0.0;
  for (double v : x) {
    cos_sum += std::cos(2.0 * std::numbers::pi * v);
    sq_sum += v * v;
  }
  return 10.0 * (static_cast<double>(x.size()) - cos_sum) + sq_sum;
}

double rosenbrock(std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double a = x[i] * x[i] - x[i + 1];
    const double b = x[i] - 1.0;
    s += 100.0 * a * a + b * b;
  }
  return s;
}

double discus(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 1e6 * x[0] * x[0];
  for (std::size_t i = 1; i < x.size(); ++i) s += x[i] * x[i];
  return s;
}

double bent_cigar(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double tail = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) tail += x[i] * x[i];
  return x[0] * x[0] + 1e6 * tail;
}

double different_powers(std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += std::pow(std::abs(x[i]), 2.0 + 4.0 * ramp(i, x.size()));
  }
  return s;
}

double sharp_ridge(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double tail = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) tail += x[i] * x[i];
  return x[0] * x[0] + 100.0 * std::sqrt(tail);
}

Registry::Registry() {
  functions_["sphere"] = sphere;
  functions_["ellipsoidal"] = ellipsoidal;
  functions_["rastrigin"] = rastrigin;
  functions_["rosenbrock"] = rosenbrock;
  functions_["discus"] = discus;
  functions_["bent_cigar"] = bent_cigar;
  functions_["different_powers"] = different_powers;
  functions_["sharp_ridge"] = sharp_ridge;
}

Registry& Registry::instance() {
  static Registry registry;
  return registry;
}

void Registry::add(const std::string& id, Objective fn) {
  if (id.empty() || !fn) throw ValidationError("bbob: registry entries need an id and a function");
  std::lock_guard lock(mu_);
  functions_[id] = std::move(fn);
}

bool Registry::contains(const std::string& id) const {
  std::lock_guard lock(mu_);
  return functions_.count(id) > 0;
}

const Objective& Registry::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = functions_.find(id);
  if (it == functions_.end()) throw ValidationError("bbob: unknown function id '" + id + "'");
  // std::map nodes are stable, so the reference outlives the lock.
  return it->second;
}

std::vector<std::string> Registry::ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, fn] : functions_) out.push_back(id);
  return out;
}

const std::vector<std::string>& catalog_ids() {
  static const std::vector<std::string> ids{"sphere",  "ellipsoidal", "rastrigin",
                                            "rosenbrock", "discus",   "bent_cigar",
                                            "different_powers", "sharp_ridge"};
  return ids;
}

double evaluate(const BbobFunction& fn, std::span<const double> x) {
  if (x.size() != fn.dof) {
    throw DimensionMismatchError("bbob: expected " + std::to_string(fn.dof) +
                                 " coordinates, got " + std::to_string(x.size()));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= kLowerBound && x[i] <= kUpperBound)) {
      throw DomainError("bbob: coordinate " + std::to_string(i) + " outside [-5, 5]");
    }
  }
  return Registry::instance().get(fn.id)(x);
}

}  // namespace embedreg::bbob
