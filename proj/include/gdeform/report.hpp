#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gdeform/field_io.hpp"
#include "gdeform/grid.hpp"

namespace gdeform {

using ordered_json = nlohmann::ordered_json;

/// One named verdict. Residual checks pass when value <= tol; margin checks pass when value > tol.
struct Check {
  std::string name;
  double value = 0;
  std::optional<Node> node;
  double tol = 0;
  bool margin = false;
  bool pass = false;
};

struct VerificationReport {
  std::string title;
  std::vector<Check> checks;
  ordered_json info = ordered_json::object();

  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  const Check* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }

  void residual(std::string name, double value, double tol, std::optional<Node> node = std::nullopt) {
    checks.push_back({std::move(name), value, node, tol, false, std::isfinite(value) && value <= tol});
  }
  void residual(std::string name, const FieldMax& m, double tol) { residual(std::move(name), m.value, tol, m.node); }
  void margin(std::string name, double value, double tol, std::optional<Node> node = std::nullopt) {
    checks.push_back({std::move(name), value, node, tol, true, std::isfinite(value) && value > tol});
  }
  void append(const VerificationReport& other, const std::string& prefix = "") {
    for (auto c : other.checks) {
      c.name = prefix + c.name;
      checks.push_back(std::move(c));
    }
  }
};

inline ordered_json to_json(const Node& n) { return ordered_json::array({n.i, n.j, n.k}); }

inline ordered_json to_json(const VerificationReport& r) {
  ordered_json out = ordered_json::object();
  out["title"] = r.title;
  out["pass"] = r.pass();
  ordered_json checks = ordered_json::object();
  for (const auto& c : r.checks) {
    ordered_json e = ordered_json::object();
    e[c.margin ? "margin" : "max_residual"] = c.value;
    e["node"] = c.node ? to_json(*c.node) : ordered_json(nullptr);
    e["tol"] = c.tol;
    e["pass"] = c.pass;
    checks[c.name] = std::move(e);
  }
  out["checks"] = std::move(checks);
  if (!r.info.empty()) out["info"] = r.info;
  return out;
}

namespace detail {
inline void write_json_string(std::string& out, const std::string& s) {
  out += ordered_json(s).dump();
}

inline void write_json(std::string& out, const ordered_json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case ordered_json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        write_json_string(out, it.key());
        out += ": ";
        write_json(out, it.value(), indent, depth + 1);
      }
      out += "\n" + close + "}";
      return;
    }
    case ordered_json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      bool scalars = true;
      for (const auto& e : j)
        if (e.is_structured()) scalars = false;
      if (scalars) {
        out += "[";
        for (std::size_t k = 0; k < j.size(); ++k) {
          if (k) out += ", ";
          write_json(out, j[k], indent, depth + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t k = 0; k < j.size(); ++k) {
        if (k) out += ",\n";
        out += pad;
        write_json(out, j[k], indent, depth + 1);
      }
      out += "\n" + close + "]";
      return;
    }
    case ordered_json::value_t::number_float: {
      const double x = j.get<double>();
      out += std::isfinite(x) ? format_double(x) : "null";
      return;
    }
    default: out += j.dump();
  }
}
}  // namespace detail

/// JSON text with floats at 17 significant digits and insertion-ordered keys.
inline std::string dump_json(const ordered_json& j) {
  std::string out;
  detail::write_json(out, j, 2, 0);
  out += "\n";
  return out;
}

}  // namespace gdeform
