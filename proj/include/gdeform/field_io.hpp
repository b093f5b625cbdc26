#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gdeform/grid.hpp"

namespace gdeform {

/// Shortest decimal form that round-trips a double ("%.17g").
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// CSV: header "u,v,<name>..." then one row per node, u varying fastest.
// ---------------------------------------------------------------------------

inline void write_fields_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                             const std::vector<const ScalarField*>& fields) {
  if (names.size() != fields.size() || fields.empty()) throw DomainError("CSV export needs one name per field");
  const Grid2& g = fields.front()->grid();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "u,v";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i) {
      out << format_double(g.u(i)) << ',' << format_double(g.v(j));
      for (const auto* f : fields) out << ',' << format_double((*f)(i, j));
      out << '\n';
    }
  if (!out) throw IoError("write failed for " + path.string());
}

inline void write_field_csv(const std::filesystem::path& path, const ScalarField& f) {
  write_fields_csv(path, {"value"}, {&f});
}

/// Raw CSV table: header names and numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell.erase(std::remove_if(cell.begin(), cell.end(), [](unsigned char c) { return std::isspace(c); }),
                 cell.end());
      t.header.push_back(cell);
    }
  }
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double x = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw IoError(path.string() + ":" + std::to_string(lineno) + ": not a number");
      row.push_back(x);
    }
    if (row.size() != t.header.size())
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                    " columns");
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Recovers the uniform Grid2 spanned by the (u,v) columns of a node table and the
/// per-row node index. Throws unless every node appears exactly once.
inline Grid2 grid_from_table(const CsvTable& t, int ucol, int vcol, std::vector<std::size_t>& node_of_row) {
  std::vector<double> us, vs;
  for (const auto& r : t.rows) {
    us.push_back(r[ucol]);
    vs.push_back(r[vcol]);
  }
  auto uniq = [](std::vector<double> x) {
    std::sort(x.begin(), x.end());
    x.erase(std::unique(x.begin(), x.end()), x.end());
    return x;
  };
  const auto uu = uniq(us), vv = uniq(vs);
  if (uu.size() < 2 || vv.size() < 2 || uu.size() * vv.size() != t.rows.size())
    throw IoError("CSV rows do not form a complete tensor grid");
  Grid2 g(uu.front(), uu.back(), vv.front(), vv.back(), static_cast<int>(uu.size()), static_cast<int>(vv.size()));
  for (std::size_t k = 0; k < uu.size(); ++k)
    if (std::abs(uu[k] - g.u(static_cast<int>(k))) > 1e-9 * std::max(1.0, std::abs(uu[k])))
      throw IoError("CSV u values are not uniformly spaced");
  for (std::size_t k = 0; k < vv.size(); ++k)
    if (std::abs(vv[k] - g.v(static_cast<int>(k))) > 1e-9 * std::max(1.0, std::abs(vv[k])))
      throw IoError("CSV v values are not uniformly spaced");
  node_of_row.resize(t.rows.size());
  std::vector<char> seen(g.size(), 0);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const int i = static_cast<int>(std::lower_bound(uu.begin(), uu.end(), us[r]) - uu.begin());
    const int j = static_cast<int>(std::lower_bound(vv.begin(), vv.end(), vs[r]) - vv.begin());
    const std::size_t n = g.index(i, j);
    if (seen[n]++) throw IoError("CSV repeats a grid node");
    node_of_row[r] = n;
  }
  return g;
}

/// Reads a "u,v,<names>" CSV back into fields (one per non-coordinate column).
inline std::vector<ScalarField> read_fields_csv(const std::filesystem::path& path,
                                                std::vector<std::string>* names = nullptr) {
  const CsvTable t = read_csv(path);
  const int uc = t.column("u"), vc = t.column("v");
  if (uc < 0 || vc < 0) throw IoError(path.string() + ": header needs u and v columns");
  std::vector<std::size_t> node;
  const Grid2 g = grid_from_table(t, uc, vc, node);
  std::vector<ScalarField> out;
  for (int c = 0; c < static_cast<int>(t.header.size()); ++c) {
    if (c == uc || c == vc) continue;
    ScalarField f(g);
    for (std::size_t r = 0; r < t.rows.size(); ++r) f.data()[node[r]] = t.rows[r][c];
    out.push_back(std::move(f));
    if (names) names->push_back(t.header[c]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// GDF1 binary block. 32-byte little-endian header:
//   bytes  0..3   magic "GDF1"
//   bytes  4..7   uint32 nu
//   bytes  8..11  uint32 nv
//   bytes 12..15  uint32 component count
//   bytes 16..31  reserved, zero
// followed by nu*nv*components float64 values, node-major (u fastest, then v),
// the components of one node stored contiguously.
// ---------------------------------------------------------------------------

struct FieldBlock {
  int nu = 0, nv = 0, components = 0;
  std::vector<double> values;

  double at(int i, int j, int c) const {
    return values[(static_cast<std::size_t>(j) * nu + i) * components + c];
  }
};

namespace detail {
inline void put_u32(std::ostream& out, std::uint32_t x) {
  const unsigned char b[4] = {static_cast<unsigned char>(x), static_cast<unsigned char>(x >> 8),
                              static_cast<unsigned char>(x >> 16), static_cast<unsigned char>(x >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t get_u32(const unsigned char* b) {
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}
inline void put_f64(std::ostream& out, double x) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), 8);
}
inline double get_f64(const unsigned char* b) {
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= std::uint64_t(b[k]) << (8 * k);
  return std::bit_cast<double>(bits);
}
}  // namespace detail

inline void write_gdf(const std::filesystem::path& path, const std::vector<const ScalarField*>& components) {
  if (components.empty()) throw DomainError("GDF export needs at least one component");
  const Grid2& g = components.front()->grid();
  for (const auto* c : components)
    if (!(c->grid() == g)) throw DomainError("GDF components on different grids");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("GDF1", 4);
  detail::put_u32(out, static_cast<std::uint32_t>(g.nu));
  detail::put_u32(out, static_cast<std::uint32_t>(g.nv));
  detail::put_u32(out, static_cast<std::uint32_t>(components.size()));
  const char zeros[16] = {};
  out.write(zeros, 16);
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i)
      for (const auto* c : components) detail::put_f64(out, (*c)(i, j));
  if (!out) throw IoError("write failed for " + path.string());
}

inline FieldBlock read_gdf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 32 || std::memcmp(bytes.data(), "GDF1", 4) != 0) throw IoError(path.string() + ": not a GDF1 file");
  FieldBlock b;
  b.nu = static_cast<int>(detail::get_u32(bytes.data() + 4));
  b.nv = static_cast<int>(detail::get_u32(bytes.data() + 8));
  b.components = static_cast<int>(detail::get_u32(bytes.data() + 12));
  const std::size_t count = static_cast<std::size_t>(b.nu) * b.nv * b.components;
  if (bytes.size() != 32 + 8 * count) throw IoError(path.string() + ": size does not match header");
  b.values.resize(count);
  for (std::size_t n = 0; n < count; ++n) b.values[n] = detail::get_f64(bytes.data() + 32 + 8 * n);
  return b;
}

}  // namespace gdeform
