#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdeform/catalog.hpp"
#include "gdeform/defdata.hpp"
#include "gdeform/gaussmap.hpp"
#include "gdeform/reconstruct.hpp"
#include "gdeform/report.hpp"
#include "gdeform/triplefield.hpp"

namespace gdeform {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct SupportConfig {
  std::string kind = "nu_exp_lambda";  // nu_exp_lambda | cauchy | goursat | csv
  FunctionSpec nu = FunctionSpec::constant(1.0);
  FunctionSpec a = FunctionSpec::constant(1.0), b = FunctionSpec::constant(1.0);
  fs::path csv;
};

struct PipelineConfig {
  std::string catalog;
  fs::path chart_csv;
  Grid2 grid{0, 1, 0, 1, 64, 64};
  Params params;
  DatumKind kind = DatumKind::hyperbolic;
  Normalization normalization = Normalization::initial;
  FunctionSpec U = FunctionSpec::constant(0.5), V = FunctionSpec::constant(0.5);
  FunctionSpec zeta = FunctionSpec::constant(-1.0);
  SupportConfig support;
  double membership_tol = 0;  // 0 selects the grid-scaled default
  double triple_tol = 0;
  double genuine_tol = 1e-8;
  Grid1 tgrid;
  fs::path out = "gdeform_out";
  ordered_json echo = ordered_json::object();  // normalized config, as reported
};

namespace detail {

inline const nlohmann::json& member(const nlohmann::json& j, const char* key) {
  static const nlohmann::json null;
  auto it = j.find(key);
  return it == j.end() ? null : *it;
}

inline double number(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

inline fs::path existing_file(const nlohmann::json& j, const fs::path& base, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + ": expected a file path");
  fs::path p = j.get<std::string>();
  if (p.is_relative()) p = base / p;
  if (!fs::is_regular_file(p)) throw ConfigError(where + ": file not found: " + j.get<std::string>());
  return p;
}

inline std::vector<double> numbers(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> v;
  for (const auto& e : j) v.push_back(number(e, where));
  return v;
}

}  // namespace detail

/// A bare number is a constant; otherwise {"type": ..., parameters}.
inline FunctionSpec parse_function(const nlohmann::json& j, const fs::path& base, const std::string& where) {
  using detail::member;
  using detail::number;
  if (j.is_number()) return FunctionSpec::constant(j.get<double>());
  if (!j.is_object() || !member(j, "type").is_string()) throw ConfigError(where + ": expected a number or {\"type\": ...}");
  const std::string type = j["type"].get<std::string>();
  auto num = [&](const char* key, std::optional<double> def = std::nullopt) {
    const auto& v = member(j, key);
    if (v.is_null()) {
      if (def) return *def;
      throw ConfigError(where + ": missing '" + key + "'");
    }
    return number(v, where + "." + key);
  };
  if (type == "constant") return FunctionSpec::constant(num("value"));
  if (type == "affine") return FunctionSpec::affine(num("a"), num("b"));
  if (type == "poly") return FunctionSpec::poly(detail::numbers(member(j, "coeffs"), where + ".coeffs"));
  if (type == "sine") return FunctionSpec::sine(num("a"), num("b"), num("k"));
  if (type == "c_minus_exp_m2lambda") return FunctionSpec::c_minus_exp_m2lambda(num("c"));
  if (type == "half_c_minus_exp_m2lambda") return FunctionSpec::half_c_minus_exp_m2lambda(num("c"));
  if (type == "complex_constant") return FunctionSpec::complex_constant(Complex(num("re"), num("im", 0.0)));
  if (type == "table") {
    if (!member(j, "csv").is_null()) return FunctionSpec::table_csv(detail::existing_file(j["csv"], base, where + ".csv"));
    std::vector<double> im;
    if (!member(j, "imag").is_null()) im = detail::numbers(j["imag"], where + ".imag");
    return FunctionSpec::table(detail::numbers(member(j, "t"), where + ".t"),
                               detail::numbers(member(j, "value"), where + ".value"), im);
  }
  throw ConfigError(where + ": unknown function type '" + type + "'");
}

/// Parses "NUxNV" or "NUxNVxNT".
inline std::vector<int> parse_grid_flag(const std::string& s) {
  std::vector<int> out;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, 'x')) {
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("--grid expects NUxNV or NUxNVxNT, got '" + s + "'");
    out.push_back(std::stoi(part));
  }
  if (out.size() != 2 && out.size() != 3) throw ConfigError("--grid expects NUxNV or NUxNVxNT, got '" + s + "'");
  return out;
}

inline void validate_sizes(const PipelineConfig& c) {
  for (int n : {c.grid.nu, c.grid.nv})
    if (n < 8 || n > 512) throw ConfigError("grid sizes must lie in [8, 512], got " + std::to_string(n));
  if (c.tgrid.nt < 1 || c.tgrid.nt > 512) throw ConfigError("t-grid size must lie in [1, 512]");
  if (!(c.tgrid.t1 >= c.tgrid.t0)) throw ConfigError("t_range needs t0 <= t1");
  if (c.tgrid.nt == 1 && c.tgrid.t0 != c.tgrid.t1) throw ConfigError("a single t node needs t0 = t1");
  for (double t : {c.membership_tol, c.triple_tol})
    if (t < 0) throw ConfigError("tolerances must be positive");
  if (!(c.genuine_tol > 0)) throw ConfigError("tolerances must be positive");
  if (!(c.grid.u1 > c.grid.u0) || !(c.grid.v1 > c.grid.v0)) throw ConfigError("chart bounds must be increasing");
}

inline PipelineConfig parse_config(const nlohmann::json& j, const fs::path& base) {
  using detail::member;
  using detail::number;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c;

  const auto& chart = member(j, "chart");
  if (!chart.is_object()) throw ConfigError("config needs a 'chart' object");
  const auto& cat = member(chart, "catalog");
  if (!cat.is_string()) throw ConfigError("chart.catalog must name a catalog surface");
  c.catalog = cat.get<std::string>();
  if (c.catalog != "clifford_torus" && c.catalog != "rotational_isothermic" && c.catalog != "sampled")
    throw ConfigError("unknown catalog surface '" + c.catalog + "'");
  ordered_json echo_chart = ordered_json::object();
  echo_chart["catalog"] = c.catalog;
  if (c.catalog == "sampled") {
    c.chart_csv = detail::existing_file(member(chart, "csv"), base, "chart.csv");
    echo_chart["csv"] = chart["csv"].get<std::string>();
  }
  if (const auto& g = member(chart, "grid"); !g.is_null()) {
    const auto v = detail::numbers(g, "chart.grid");
    if (v.size() != 2) throw ConfigError("chart.grid must be [nu, nv]");
    for (double x : v)
      if (x != std::floor(x)) throw ConfigError("chart.grid entries must be integers");
    c.grid.nu = static_cast<int>(v[0]);
    c.grid.nv = static_cast<int>(v[1]);
  }
  if (const auto& b = member(chart, "bounds"); !b.is_null()) {
    const auto v = detail::numbers(b, "chart.bounds");
    if (v.size() != 4) throw ConfigError("chart.bounds must be [u0, u1, v0, v1]");
    c.grid.u0 = v[0], c.grid.u1 = v[1], c.grid.v0 = v[2], c.grid.v1 = v[3];
  }
  if (const auto& p = member(chart, "params"); !p.is_null()) {
    if (!p.is_object()) throw ConfigError("chart.params must be an object");
    for (auto it = p.begin(); it != p.end(); ++it) c.params[it.key()] = number(it.value(), "chart.params." + it.key());
  }

  const auto& datum = member(j, "datum");
  ordered_json echo_datum = ordered_json::object();
  if (!datum.is_null()) {
    if (!datum.is_object()) throw ConfigError("datum must be an object");
    if (const auto& k = member(datum, "kind"); !k.is_null()) {
      const std::string s = k.is_string() ? k.get<std::string>() : "";
      if (s == "hyperbolic") c.kind = DatumKind::hyperbolic;
      else if (s == "elliptic") c.kind = DatumKind::elliptic;
      else throw ConfigError("datum.kind must be 'hyperbolic' or 'elliptic'");
    }
    if (const auto& n = member(datum, "normalization"); !n.is_null()) {
      const std::string s = n.is_string() ? n.get<std::string>() : "";
      if (s == "initial") c.normalization = Normalization::initial;
      else if (s == "metric") c.normalization = Normalization::metric;
      else throw ConfigError("datum.normalization must be 'initial' or 'metric'");
    }
    if (const auto& u = member(datum, "U"); !u.is_null()) c.U = parse_function(u, base, "datum.U");
    if (const auto& v = member(datum, "V"); !v.is_null()) c.V = parse_function(v, base, "datum.V");
    if (const auto& z = member(datum, "zeta"); !z.is_null()) c.zeta = parse_function(z, base, "datum.zeta");
  }
  echo_datum["kind"] = c.kind == DatumKind::hyperbolic ? "hyperbolic" : "elliptic";
  if (c.kind == DatumKind::hyperbolic) {
    echo_datum["normalization"] = c.normalization == Normalization::initial ? "initial" : "metric";
    echo_datum["U"] = c.U.describe();
    echo_datum["V"] = c.V.describe();
  } else {
    echo_datum["zeta"] = c.zeta.describe();
  }

  const auto& sup = member(j, "support");
  ordered_json echo_support = ordered_json::object();
  if (!sup.is_null()) {
    if (!sup.is_object()) throw ConfigError("support must be an object");
    if (const auto& k = member(sup, "kind"); !k.is_null()) {
      if (!k.is_string()) throw ConfigError("support.kind must be a string");
      c.support.kind = k.get<std::string>();
    }
    if (c.support.kind != "nu_exp_lambda" && c.support.kind != "cauchy" && c.support.kind != "goursat" &&
        c.support.kind != "csv")
      throw ConfigError("support.kind must be nu_exp_lambda, cauchy, goursat or csv");
    if (const auto& n = member(sup, "nu"); !n.is_null()) c.support.nu = parse_function(n, base, "support.nu");
    if (const auto& a = member(sup, "a"); !a.is_null()) c.support.a = parse_function(a, base, "support.a");
    if (const auto& b = member(sup, "b"); !b.is_null()) c.support.b = parse_function(b, base, "support.b");
    if (c.support.kind == "csv") {
      c.support.csv = detail::existing_file(member(sup, "csv"), base, "support.csv");
      echo_support["csv"] = sup["csv"].get<std::string>();
    }
  }
  echo_support["kind"] = c.support.kind;
  if (c.support.kind == "nu_exp_lambda" || c.support.kind == "cauchy") echo_support["nu"] = c.support.nu.describe();
  if (c.support.kind == "goursat") {
    echo_support["a"] = c.support.a.describe();
    echo_support["b"] = c.support.b.describe();
  }

  if (const auto& t = member(j, "tolerances"); !t.is_null()) {
    if (!t.is_object()) throw ConfigError("tolerances must be an object");
    if (const auto& x = member(t, "membership"); !x.is_null()) c.membership_tol = number(x, "tolerances.membership");
    if (const auto& x = member(t, "triple"); !x.is_null()) c.triple_tol = number(x, "tolerances.triple");
    if (const auto& x = member(t, "genuine"); !x.is_null()) c.genuine_tol = number(x, "tolerances.genuine");
    for (double x : {c.membership_tol, c.triple_tol})
      if (!(x > 0) && x != 0) throw ConfigError("tolerances must be positive");
  }
  if (const auto& t = member(j, "t_range"); !t.is_null()) {
    const auto v = detail::numbers(t, "t_range");
    if (v.size() != 3 || v[2] != std::floor(v[2])) throw ConfigError("t_range must be [t0, t1, nt]");
    c.tgrid = Grid1{v[0], v[1], static_cast<int>(v[2])};
  }
  if (const auto& o = member(j, "output"); !o.is_null()) {
    if (!o.is_string()) throw ConfigError("output must be a directory path");
    c.out = o.get<std::string>();
    if (c.out.is_relative()) c.out = base / c.out;
  }
  c.echo["chart"] = echo_chart;
  c.echo["datum"] = echo_datum;
  c.echo["support"] = echo_support;
  return c;
}

inline PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

/// Records grid, tolerances and t-range in the echo once overrides are applied.
inline void finalize_config(PipelineConfig& c) {
  validate_sizes(c);
  c.echo["chart"]["grid"] = ordered_json::array({c.grid.nu, c.grid.nv});
  c.echo["chart"]["bounds"] = ordered_json::array({c.grid.u0, c.grid.u1, c.grid.v0, c.grid.v1});
  ordered_json params = ordered_json::object();
  for (const auto& [k, v] : c.params) params[k] = v;
  c.echo["chart"]["params"] = params;
  c.echo["t_range"] = ordered_json::array({c.tgrid.t0, c.tgrid.t1, c.tgrid.nt});
  ordered_json tol = ordered_json::object();
  // null marks the grid-scaled default
  tol["membership"] = c.membership_tol > 0 ? ordered_json(c.membership_tol) : ordered_json(nullptr);
  tol["triple"] = c.triple_tol > 0 ? c.triple_tol : default_triple_tol(c.grid);
  tol["genuine"] = c.genuine_tol;
  c.echo["tolerances"] = tol;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

using LogFn = std::function<void(int level, const std::string&)>;  // 0 info, 1 debug

struct StageResult {
  std::string name;
  bool pass = false;
  ordered_json report = ordered_json::object();
  std::vector<std::string> summary;
};

struct Pipeline {
  PipelineConfig cfg;
  LogFn log = [](int, const std::string&) {};

  std::optional<SurfacePatch> patch;
  std::optional<ChartGeometry> geo;
  std::optional<DeformationDatum> datum;
  std::optional<MembershipReport> membership;
  std::optional<TripleField> triple;
  std::optional<SupportFunction> support;
  std::optional<FSample> fsample;
  std::optional<GSample> gsample;
  bool verified = false;

  double scale2() const { return cfg.grid.hu() * cfg.grid.hu() + cfg.grid.hv() * cfg.grid.hv(); }
  double triple_tol() const { return cfg.triple_tol > 0 ? cfg.triple_tol : default_triple_tol(cfg.grid); }

  void ensure_geometry() {
    if (geo) return;
    log(0, "building chart " + cfg.catalog);
    patch = catalog(cfg.catalog, cfg.grid, cfg.params, cfg.chart_csv);
    if (cfg.catalog == "sampled") {
      cfg.grid = patch->grid();
      finalize_config(cfg);
    }
    geo = build_geometry(*patch);
    log(1, "geometry: " + std::to_string(geo->normal_count()) + " normal direction(s)");
  }

  static ordered_json error_json(const DomainError& e) {
    ordered_json j = ordered_json::object();
    j["message"] = e.what();
    j["node"] = e.node() ? to_json(*e.node()) : ordered_json(nullptr);
    return j;
  }

  StageResult classify_stage() {
    StageResult r{"classify"};
    r.report["config"] = cfg.echo;
    try {
      ensure_geometry();
      const auto cs = classify(*geo);
      ordered_json c = ordered_json::object();
      c["kind"] = to_string(cs.kind);
      c["epsilon"] = cs.epsilon;
      const Eigen::Matrix2d J = cs.J(cfg.grid.nu / 2, cfg.grid.nv / 2);
      c["J"] = ordered_json::array({ordered_json::array({J(0, 0), J(0, 1)}), ordered_json::array({J(1, 0), J(1, 1)})});
      std::map<std::string, int> counts;
      int dmax = 0;
      for (std::size_t n = 0; n < cfg.grid.size(); ++n) {
        ++counts[to_string(cs.node_kind.data()[n])];
        dmax = std::max(dmax, cs.normal_dim.data()[n]);
      }
      ordered_json nk = ordered_json::object();
      for (const char* k : {"hyperbolic", "elliptic", "parabolic", "undetermined"}) nk[k] = counts[k];
      c["node_kinds"] = nk;
      c["first_normal_dim_max"] = dmax;
      c["conjugacy_residual"] = cs.conjugacy_residual;
      c["square_residual"] = cs.square_residual;
      if (!cs.note.empty()) c["note"] = cs.note;
      r.report["classification"] = c;

      VerificationReport v;
      v.title = "height functions";
      const double qtol = geo->analytic ? 1e-8 : 100 * scale2();
      const double ctol = geo->analytic ? 1e-7 : 100 * scale2();
      for (int a = 0; a < geo->ambient; ++a)
        v.residual("q_h" + std::to_string(a + 1), max_abs(height_q_analytic(*geo, a), 2), qtol);
      const bool determined = cs.kind == ConjugacyKind::hyperbolic || cs.kind == ConjugacyKind::elliptic;
      if (determined)
        for (int a = 0; a < geo->ambient; ++a)
          v.residual("hessian_commutation_h" + std::to_string(a + 1), hessian_commutation(*geo, cs.J, a), ctol);
      r.report["verification"] = to_json(v);
      r.pass = determined && v.pass();
      r.summary.push_back(std::string("kind ") + to_string(cs.kind));
      double worst = 0;
      for (const auto& ch : v.checks) worst = std::max(worst, ch.value);
      r.summary.push_back("max height/commutation residual " + format_double(worst));
    } catch (const DomainError& e) {
      r.report["error"] = error_json(e);
      r.summary.push_back(std::string("error: ") + e.what());
    }
    r.report["pass"] = r.pass;
    return r;
  }

  StageResult membership_stage() {
    StageResult r{"membership"};
    r.report["config"] = cfg.echo;
    try {
      ensure_geometry();
      if (cfg.kind == DatumKind::hyperbolic)
        datum = build_pair(*geo, cfg.U, cfg.V, cfg.normalization);
      else
        datum = build_zeta(*geo, cfg.zeta);
      membership = ch_membership(*datum, cfg.membership_tol);
      const auto& m = *membership;
      ordered_json j = ordered_json::object();
      j["pass"] = m.pass;
      j["max_residual"] = m.max_residual;
      j["node"] = to_json(m.node);
      j["tol"] = m.tol;
      j["band"] = m.band;
      if (cfg.kind == DatumKind::hyperbolic) j["branch_at_node"] = to_string(datum->branch(m.node.i, m.node.j));
      ordered_json br = ordered_json::object();
      br["both_positive"] = m.count_both_positive;
      br["phi_small"] = m.count_phi_small;
      br["psi_small"] = m.count_psi_small;
      if (cfg.kind == DatumKind::hyperbolic) j["branches"] = br;
      j["transport_residual"] = datum->transport_residual;
      j["admissibility_margin"] = datum->margin;
      if (cfg.kind == DatumKind::elliptic) j["cauchy_riemann_residual"] = datum->cr_residual;
      j["residual_profile"] = m.residual_profile;
      ordered_json w = ordered_json::array();
      for (const auto& s : datum->warnings) w.push_back(s);
      j["warnings"] = w;
      r.report["membership"] = j;
      r.pass = m.pass;
      r.summary.push_back("max |Q(rho)| " + format_double(m.max_residual) + " (tol " + format_double(m.tol) + ")");
    } catch (const DomainError& e) {
      datum.reset();
      r.report["error"] = error_json(e);
      r.summary.push_back(std::string("error: ") + e.what());
    }
    r.report["pass"] = r.pass;
    return r;
  }

  SupportFunction make_support_function() {
    const auto& s = cfg.support;
    if (s.kind == "nu_exp_lambda") return make_support(*geo, nu_exp_lambda(*geo, s.nu));
    if (s.kind == "cauchy") return support_from_nu_cauchy(*geo, s.nu);
    if (s.kind == "goursat") {
      const auto a = real_parts(sample_axis(s.a, *geo, Axis::u));
      const auto b = real_parts(sample_axis(s.b, *geo, Axis::v));
      return support_solve(*geo, a, b);
    }
    std::vector<std::string> names;
    auto fields = read_fields_csv(s.csv, &names);
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == "gamma" || names[k] == "value") {
        if (!(fields[k].grid() == geo->grid)) throw ConfigError("support.csv is not on the chart grid");
        return make_support(*geo, fields[k]);
      }
    throw ConfigError("support.csv needs a 'gamma' or 'value' column");
  }

  StageResult build_stage() {
    StageResult r{"build"};
    r.report["config"] = cfg.echo;
    if (!datum) membership_stage();
    if (!datum) {
      r.report["error"] = ordered_json{{"message", "no admissible deformation datum"}, {"node", nullptr}};
      r.summary.push_back("skipped: no admissible datum");
      r.report["pass"] = false;
      return r;
    }
    try {
      triple = cfg.kind == DatumKind::hyperbolic ? triple_from_pair(*geo, *datum) : triple_from_zeta(*geo, *datum);
      support = make_support_function();
      const double tol = triple_tol();
      auto v = verify_triple(*geo, *triple, *support, tol);
      const auto sc = support_check(*support, tol);
      v.residual("support_q", sc.max_residual, tol, sc.node);
      if (cfg.kind == DatumKind::hyperbolic) {
        v.residual("transport_conservation", transport_conservation(*geo, *triple), tol);
        const auto [phi, psi] = pair_from_triple(*triple);
        double dual = 0;
        for (std::size_t n = 0; n < cfg.grid.size(); ++n)
          dual = std::max({dual, std::abs(phi.data()[n] - datum->phi.data()[n]) / std::max(1.0, std::abs(datum->phi.data()[n])),
                           std::abs(psi.data()[n] - datum->psi.data()[n]) / std::max(1.0, std::abs(datum->psi.data()[n]))});
        v.residual("duality_round_trip", dual, 1e-10);
      }
      r.report["verification"] = to_json(v);
      const auto gen = genuineness(*triple, cfg.genuine_tol);
      r.report["genuineness"] = to_json(gen);
      if (cfg.kind == DatumKind::hyperbolic) {
        ordered_json cf = ordered_json::object();
        try {
          const auto f = composition_frame(*triple);
          cf["identity_residual"] = f.identity_residual;
          cf["locus_nodes"] = f.locus_nodes;
          cf["unit_residual"] = f.locus_nodes ? ordered_json(f.unit_residual) : ordered_json(nullptr);
          cf["a1_center"] = f.a1(cfg.grid.nu / 2, cfg.grid.nv / 2);
          cf["a2_center"] = f.a2(cfg.grid.nu / 2, cfg.grid.nv / 2);
        } catch (const DomainError& e) {
          cf["error"] = e.what();
        }
        r.report["composition_frame"] = cf;
        ordered_json c = ordered_json::object();
        const int ic = cfg.grid.nu / 2, jc = cfg.grid.nv / 2;
        c["alpha"] = triple->alpha(ic, jc);
        c["beta"] = triple->beta(ic, jc);
        c["tau1"] = triple->tau1(ic, jc);
        c["tau2"] = triple->tau2(ic, jc);
        r.report["center"] = c;
      }
      verified = v.pass() && gen.genuine && (!membership || membership->pass);
      r.pass = verified;
      double worst = 0;
      for (const auto& ch : v.checks)
        if (!ch.margin) worst = std::max(worst, ch.value);
      r.summary.push_back("max structure residual " + format_double(worst) + " (tol " + format_double(tol) + ")");
      r.summary.push_back(std::string("genuine ") + (gen.genuine ? "yes" : "no") + ", margin " + format_double(gen.min_margin));
    } catch (const DomainError& e) {
      triple.reset();
      r.report["error"] = error_json(e);
      r.summary.push_back(std::string("error: ") + e.what());
    }
    r.report["pass"] = r.pass;
    return r;
  }

  StageResult reconstruct_stage() {
    StageResult r{"reconstruct"};
    r.report["config"] = cfg.echo;
    if (!triple) build_stage();
    if (!triple || !support) {
      r.report["error"] = ordered_json{{"message", "no triple to reconstruct from"}, {"node", nullptr}};
      r.summary.push_back("skipped: no triple");
      r.report["pass"] = false;
      return r;
    }
    try {
      const double tol = triple_tol();
      log(0, "reconstructing f and g");
      fsample = gauss_param_f(*geo, *support, cfg.tgrid, triple->Jbar);
      const auto gd = second_form_g(*triple, *fsample, tol);
      gsample = frame_integrate_g(*fsample, gd);
      const auto transposed = frame_integrate_g(*fsample, gd, PathOrder::v_then_u);
      const auto iso = isometry_check(fsample->f, gsample->g);

      VerificationReport v;
      v.title = "reconstruction";
      v.append(fsample->report, "f.");
      v.append(gsample->g.check(), "g.");
      v.residual("gauss_equation", gd.gauss_residual, 1e-9, gd.gauss_node);
      v.residual("alpha_g_symmetry", gd.symmetry_residual, tol, gd.symmetry_node);
      v.residual("plaquette_holonomy", gsample->holonomy, tol);
      v.residual("isometry", iso.max_relative_deviation, tol, iso.node);
      v.margin("normal_rank_margin", iso.normal_rank_margin, 1e-3, iso.rank_node);
      r.report["verification"] = to_json(v);
      ordered_json info = ordered_json::object();
      info["isometry"] = to_json(iso);
      info["path_transposition"] = max_position_difference(gsample->g, transposed.g);
      info["path_order"] = to_json(gsample->order);
      info["t_range"] = ordered_json::array({fsample->f.tgrid.t0, fsample->f.tgrid.t1, fsample->f.tgrid.nt});
      info["ruling"] = "unit normal of h in S^3";
      r.report["info"] = info;
      r.pass = v.pass() && verified;
      r.summary.push_back("isometry deviation " + format_double(iso.max_relative_deviation) + ", normal rank " +
                          std::to_string(iso.normal_rank));
      r.summary.push_back("plaquette holonomy " + format_double(gsample->holonomy.value));
    } catch (const DomainError& e) {
      fsample.reset();
      gsample.reset();
      r.report["error"] = error_json(e);
      r.summary.push_back(std::string("error: ") + e.what());
    }
    r.report["pass"] = r.pass;
    return r;
  }
};

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_triple_gdf(const fs::path& path, const TripleField& t) {
  std::vector<ScalarField> comps;
  for (const Matrix2Field* D : {&t.D1, &t.D2})
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) comps.push_back(D->map([r, c](const Eigen::Matrix2d& m) { return m(r, c); }));
  comps.push_back(t.phi_u);
  comps.push_back(t.phi_v);
  std::vector<const ScalarField*> ptrs;
  for (const auto& f : comps) ptrs.push_back(&f);
  write_gdf(path, ptrs);
}

/// Runs a subcommand, writes its artifacts into cfg.out and returns true iff every verdict passed.
inline bool run_subcommand(Pipeline& p, const std::string& sub) {
  std::vector<StageResult> stages;
  if (sub == "classify" || sub == "all") stages.push_back(p.classify_stage());
  if (sub == "membership" || sub == "all") stages.push_back(p.membership_stage());
  if (sub == "build" || sub == "all") stages.push_back(p.build_stage());
  if (sub == "reconstruct" || sub == "all") stages.push_back(p.reconstruct_stage());
  if (stages.empty()) throw ConfigError("unknown subcommand '" + sub + "'");

  std::error_code ec;
  fs::create_directories(p.cfg.out, ec);
  if (ec) throw IoError("cannot create output directory " + p.cfg.out.string());
  const std::map<std::string, std::string> file{
      {"classify", "classify.json"}, {"membership", "membership.json"}, {"build", "triple.json"}, {"reconstruct", "reconstruct.json"}};
  bool pass = true;
  std::string summary = "gdeform " + sub + "\n";
  for (const auto& s : stages) {
    write_text(p.cfg.out / file.at(s.name), dump_json(s.report));
    pass = pass && s.pass;
    summary += s.name + ": " + (s.pass ? "PASS" : "FAIL") + "\n";
    for (const auto& line : s.summary) summary += "  " + line + "\n";
  }
  if ((sub == "build" || sub == "all") && p.triple) write_triple_gdf(p.cfg.out / "triple.gdf", *p.triple);
  if ((sub == "reconstruct" || sub == "all") && p.fsample && p.gsample) {
    write_immersion_csv(p.cfg.out / "f.csv", p.fsample->f);
    write_immersion_csv(p.cfg.out / "g.csv", p.gsample->g);
    const int k0 = p.fsample->f.tgrid.origin_index();
    write_obj(p.cfg.out / "f.obj", p.fsample->f, k0);
    write_obj(p.cfg.out / "g.obj", p.gsample->g, k0);
  }
  summary += std::string("overall: ") + (pass ? "PASS" : "FAIL") + "\n";
  write_text(p.cfg.out / "summary.txt", summary);
  return pass;
}

}  // namespace gdeform
