#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "embedreg/task.hpp"

namespace embedreg {

/// Where each parameter lands in the traditional feature vector.
/// Continuous params take one min-max scaled coordinate; categorical params a one-hot block.
struct TraditionalFeatureLayout {
  std::vector<std::size_t> offsets;  // per param, in declaration order
  std::vector<std::size_t> widths;
  std::size_t width = 0;

  static TraditionalFeatureLayout of(const RegressionTask& task);
};

std::vector<double> featurize_traditional(const RegressionTask& task, const Assignment& x);

struct StringFormat {
  enum class Variant { full_dict, values_only };

  Variant variant = Variant::full_dict;
  int float_precision = 4;  // significant digits
  bool space_after_comma = false;

  static Variant parse_variant(const std::string& name);  // "full" | "values"
  static const char* variant_name(Variant v);
};

/// `{name1:val1,name2:val2}` or `[val1,val2]`, in declared parameter order.
std::string serialize(const RegressionTask& task, const Assignment& x, const StringFormat& fmt);

/// Renders one real at `significant_digits`. Integral results keep a trailing ".0"
/// unless `integer` is set, so real and integer params stay distinguishable.
std::string format_number(double v, int significant_digits, bool integer = false);

/// Inverse of the full_dict serialization, up to the rendered precision.
Assignment parse_full_dict(const RegressionTask& task, const std::string& text);

}  // namespace embedreg
