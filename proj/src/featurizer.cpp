#include "embedreg/featurizer.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "embedreg/error.hpp"

namespace embedreg {

TraditionalFeatureLayout TraditionalFeatureLayout::of(const RegressionTask& task) {
  TraditionalFeatureLayout layout;
  for (const auto& p : task.params()) {
    const std::size_t w = p.is_continuous() ? 1 : p.categories().choices.size();
    layout.offsets.push_back(layout.width);
    layout.widths.push_back(w);
    layout.width += w;
  }
  return layout;
}

std::vector<double> featurize_traditional(const RegressionTask& task, const Assignment& x) {
  validate_assignment(task, x);
  const auto layout = TraditionalFeatureLayout::of(task);
  std::vector<double> out(layout.width, 0.0);
  for (std::size_t i = 0; i < task.dof(); ++i) {
    const auto& p = task.params()[i];
    if (p.is_continuous()) {
      const auto& r = p.range();
      out[layout.offsets[i]] = (std::get<double>(x[i]) - r.lo) / (r.hi - r.lo);
    } else {
      const auto& choices = p.categories().choices;
      const auto& v = std::get<std::string>(x[i]);
      for (std::size_t c = 0; c < choices.size(); ++c) {
        if (choices[c] == v) out[layout.offsets[i] + c] = 1.0;
      }
    }
  }
  return out;
}

StringFormat::Variant StringFormat::parse_variant(const std::string& name) {
  if (name == "full" || name == "full_dict") return Variant::full_dict;
  if (name == "values" || name == "values_only") return Variant::values_only;
  throw ValidationError("unknown string format '" + name + "' (expected full or values)");
}

const char* StringFormat::variant_name(Variant v) {
  return v == Variant::full_dict ? "full" : "values";
}

std::string format_number(double v, int significant_digits, bool integer) {
  if (significant_digits < 1) throw ValidationError("float precision must be positive");
  char buf[64];
  if (integer) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  std::snprintf(buf, sizeof buf, "%.*g", significant_digits, v);
  std::string s = buf;
  if (s == "-0") s = "0";
  if (s.find_first_of(".eEin") == std::string::npos) s += ".0";
  return s;
}

std::string serialize(const RegressionTask& task, const Assignment& x, const StringFormat& fmt) {
  validate_assignment(task, x);
  const bool full = fmt.variant == StringFormat::Variant::full_dict;
  const char* sep = fmt.space_after_comma ? ", " : ",";
  std::string out = full ? "{" : "[";
  for (std::size_t i = 0; i < task.dof(); ++i) {
    const auto& p = task.params()[i];
    if (i) out += sep;
    if (full) {
      out += p.name;
      out += ':';
    }
    if (p.is_continuous()) {
      out += format_number(std::get<double>(x[i]), fmt.float_precision, p.range().integer);
    } else {
      out += '\'';
      out += std::get<std::string>(x[i]);
      out += '\'';
    }
  }
  out += full ? "}" : "]";
  return out;
}

Assignment parse_full_dict(const RegressionTask& task, const std::string& text) {
  if (text.size() < 2 || text.front() != '{' || text.back() != '}') {
    throw ValidationError("full_dict string must be enclosed in braces");
  }
  std::vector<std::string> items;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 1; i + 1 < text.size(); ++i) {
    const char c = text[i];
    if (c == '\'') quoted = !quoted;
    if (c == ',' && !quoted) {
      items.push_back(current);
      current.clear();
      while (i + 2 < text.size() && text[i + 1] == ' ') ++i;
    } else {
      current.push_back(c);
    }
  }
  items.push_back(current);
  if (items.size() != task.dof()) {
    throw ValidationError("full_dict string has " + std::to_string(items.size()) +
                          " entries, task has " + std::to_string(task.dof()));
  }
  Assignment x;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto colon = items[i].find(':');
    if (colon == std::string::npos) throw ValidationError("entry without ':' in full_dict string");
    const std::string name = items[i].substr(0, colon);
    const std::string value = items[i].substr(colon + 1);
    const auto& p = task.params()[i];
    if (name != p.name) {
      throw ValidationError("expected key '" + p.name + "', found '" + name + "'");
    }
    if (p.is_continuous()) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ValidationError("bad number '" + value + "' for key '" + name + "'");
      }
      x.emplace_back(v);
    } else {
      if (value.size() < 2 || value.front() != '\'' || value.back() != '\'') {
        throw ValidationError("categorical value for '" + name + "' must be single-quoted");
      }
      x.emplace_back(value.substr(1, value.size() - 2));
    }
  }
  return x;
}

}  // namespace embedreg
