#pragma once

#include <cmath>
#include <string>

#include "gdeform/grid.hpp"

namespace gdeform {

enum class Axis { u, v };

namespace detail {

// Generic second-order first derivative along one axis. Interior: central;
// edges: one-sided three-point.
template <typename T>
Field<T> diff_axis(const Field<T>& f, Axis axis) {
  const Grid2& g = f.grid();
  const int n = axis == Axis::u ? g.nu : g.nv;
  if (n < 3) throw DomainError("grid smaller than the 3-point stencil");
  const double h = axis == Axis::u ? g.hu() : g.hv();
  const double inv2h = 1.0 / (2.0 * h);
  Field<T> out(g);
  auto at = [&](int line, int s) -> const T& { return axis == Axis::u ? f(s, line) : f(line, s); };
  auto put = [&](int line, int s) -> T& { return axis == Axis::u ? out(s, line) : out(line, s); };
  const int lines = axis == Axis::u ? g.nv : g.nu;
  for (int l = 0; l < lines; ++l) {
    put(l, 0) = T((-3.0 * at(l, 0) + 4.0 * at(l, 1) - at(l, 2)) * inv2h);
    for (int s = 1; s < n - 1; ++s) put(l, s) = T((at(l, s + 1) - at(l, s - 1)) * inv2h);
    put(l, n - 1) = T((3.0 * at(l, n - 1) - 4.0 * at(l, n - 2) + at(l, n - 3)) * inv2h);
  }
  return out;
}

template <typename T>
Field<T> diff2_axis(const Field<T>& f, Axis axis) {
  const Grid2& g = f.grid();
  const int n = axis == Axis::u ? g.nu : g.nv;
  if (n < 4) throw DomainError("grid smaller than the 4-point one-sided stencil");
  const double h = axis == Axis::u ? g.hu() : g.hv();
  const double invh2 = 1.0 / (h * h);
  Field<T> out(g);
  auto at = [&](int line, int s) -> const T& { return axis == Axis::u ? f(s, line) : f(line, s); };
  auto put = [&](int line, int s) -> T& { return axis == Axis::u ? out(s, line) : out(line, s); };
  const int lines = axis == Axis::u ? g.nv : g.nu;
  for (int l = 0; l < lines; ++l) {
    put(l, 0) = T((2.0 * at(l, 0) - 5.0 * at(l, 1) + 4.0 * at(l, 2) - at(l, 3)) * invh2);
    for (int s = 1; s < n - 1; ++s) put(l, s) = T((at(l, s + 1) - 2.0 * at(l, s) + at(l, s - 1)) * invh2);
    put(l, n - 1) =
        T((2.0 * at(l, n - 1) - 5.0 * at(l, n - 2) + 4.0 * at(l, n - 3) - at(l, n - 4)) * invh2);
  }
  return out;
}

// Fourth-order variants: five-point central in the interior, shifted one-sided
// stencils on the two outer nodes at each edge.
template <typename T>
Field<T> diff4_axis(const Field<T>& f, Axis axis) {
  const Grid2& g = f.grid();
  const int n = axis == Axis::u ? g.nu : g.nv;
  if (n < 6) throw DomainError("grid smaller than the fourth-order stencil");
  const double h = axis == Axis::u ? g.hu() : g.hv();
  const double c = 1.0 / (12.0 * h);
  Field<T> out(g);
  auto at = [&](int line, int s) -> const T& { return axis == Axis::u ? f(s, line) : f(line, s); };
  auto put = [&](int line, int s) -> T& { return axis == Axis::u ? out(s, line) : out(line, s); };
  const int lines = axis == Axis::u ? g.nv : g.nu;
  for (int l = 0; l < lines; ++l) {
    auto a = [&](int s) -> const T& { return at(l, s); };
    auto b = [&](int s) -> const T& { return at(l, n - 1 - s); };
    put(l, 0) = T((-25.0 * a(0) + 48.0 * a(1) - 36.0 * a(2) + 16.0 * a(3) - 3.0 * a(4)) * c);
    put(l, 1) = T((-3.0 * a(0) - 10.0 * a(1) + 18.0 * a(2) - 6.0 * a(3) + a(4)) * c);
    for (int s = 2; s < n - 2; ++s) put(l, s) = T((a(s - 2) - 8.0 * a(s - 1) + 8.0 * a(s + 1) - a(s + 2)) * c);
    put(l, n - 2) = T((3.0 * b(0) + 10.0 * b(1) - 18.0 * b(2) + 6.0 * b(3) - b(4)) * c);
    put(l, n - 1) = T((25.0 * b(0) - 48.0 * b(1) + 36.0 * b(2) - 16.0 * b(3) + 3.0 * b(4)) * c);
  }
  return out;
}

template <typename T>
Field<T> diff4_2_axis(const Field<T>& f, Axis axis) {
  const Grid2& g = f.grid();
  const int n = axis == Axis::u ? g.nu : g.nv;
  if (n < 6) throw DomainError("grid smaller than the fourth-order stencil");
  const double h = axis == Axis::u ? g.hu() : g.hv();
  const double c = 1.0 / (12.0 * h * h);
  Field<T> out(g);
  auto at = [&](int line, int s) -> const T& { return axis == Axis::u ? f(s, line) : f(line, s); };
  auto put = [&](int line, int s) -> T& { return axis == Axis::u ? out(s, line) : out(line, s); };
  const int lines = axis == Axis::u ? g.nv : g.nu;
  for (int l = 0; l < lines; ++l) {
    auto a = [&](int s) -> const T& { return at(l, s); };
    auto b = [&](int s) -> const T& { return at(l, n - 1 - s); };
    put(l, 0) = T((45.0 * a(0) - 154.0 * a(1) + 214.0 * a(2) - 156.0 * a(3) + 61.0 * a(4) - 10.0 * a(5)) * c);
    put(l, 1) = T((10.0 * a(0) - 15.0 * a(1) - 4.0 * a(2) + 14.0 * a(3) - 6.0 * a(4) + a(5)) * c);
    for (int s = 2; s < n - 2; ++s)
      put(l, s) = T((-a(s - 2) + 16.0 * a(s - 1) - 30.0 * a(s) + 16.0 * a(s + 1) - a(s + 2)) * c);
    put(l, n - 2) = T((10.0 * b(0) - 15.0 * b(1) - 4.0 * b(2) + 14.0 * b(3) - 6.0 * b(4) + b(5)) * c);
    put(l, n - 1) = T((45.0 * b(0) - 154.0 * b(1) + 214.0 * b(2) - 156.0 * b(3) + 61.0 * b(4) - 10.0 * b(5)) * c);
  }
  return out;
}

}  // namespace detail

template <typename T>
Field<T> diff_u(const Field<T>& f) {
  return detail::diff_axis(f, Axis::u);
}

template <typename T>
Field<T> diff_v(const Field<T>& f) {
  return detail::diff_axis(f, Axis::v);
}

/// Mixed derivative, always composed as diff_u(diff_v f). The two factors act on
/// different indices, so swapping the order changes only the rounding.
template <typename T>
Field<T> diff_uv(const Field<T>& f) {
  return diff_u(diff_v(f));
}

template <typename T>
Field<T> diff_uu(const Field<T>& f) {
  return detail::diff2_axis(f, Axis::u);
}

template <typename T>
Field<T> diff_vv(const Field<T>& f) {
  return detail::diff2_axis(f, Axis::v);
}

template <typename T>
Field<T> diff4_u(const Field<T>& f) {
  return detail::diff4_axis(f, Axis::u);
}

template <typename T>
Field<T> diff4_v(const Field<T>& f) {
  return detail::diff4_axis(f, Axis::v);
}

template <typename T>
Field<T> diff4_uv(const Field<T>& f) {
  return diff4_u(diff4_v(f));
}

template <typename T>
Field<T> diff4_uu(const Field<T>& f) {
  return detail::diff4_2_axis(f, Axis::u);
}

template <typename T>
Field<T> diff4_vv(const Field<T>& f) {
  return detail::diff4_2_axis(f, Axis::v);
}

/// Index of the grid line carrying coordinate `s` on the given axis; throws if `s` is not a node.
inline int grid_line_index(const Grid2& g, Axis axis, double s) {
  const double s0 = axis == Axis::u ? g.u0 : g.v0;
  const double h = axis == Axis::u ? g.hu() : g.hv();
  const int n = axis == Axis::u ? g.nu : g.nv;
  const double k = std::round((s - s0) / h);
  const double scale = std::max({std::abs(s0), std::abs(s0 + (n - 1) * h), h});
  if (k < 0 || k > n - 1 || std::abs(s0 + k * h - s) > 1e-9 * scale)
    throw DomainError(std::string("integration origin ") + std::to_string(s) + " is not a grid line of the " +
                      (axis == Axis::u ? "u" : "v") + " axis");
  return static_cast<int>(k);
}

/// Cumulative composite-trapezoid integral along `axis`, zero on the line s = origin.
/// Exact for integrands affine in the integration variable.
template <typename T>
Field<T> cumint(const Field<T>& f, Axis axis, double origin = 0.0) {
  const Grid2& g = f.grid();
  const int k0 = grid_line_index(g, axis, origin);
  const int n = axis == Axis::u ? g.nu : g.nv;
  const double half_h = 0.5 * (axis == Axis::u ? g.hu() : g.hv());
  Field<T> out(g);
  auto at = [&](int line, int s) -> const T& { return axis == Axis::u ? f(s, line) : f(line, s); };
  auto put = [&](int line, int s) -> T& { return axis == Axis::u ? out(s, line) : out(line, s); };
  const int lines = axis == Axis::u ? g.nv : g.nu;
  for (int l = 0; l < lines; ++l) {
    put(l, k0) = T(at(l, k0) * 0.0);
    for (int s = k0 + 1; s < n; ++s) put(l, s) = T(put(l, s - 1) + half_h * (at(l, s - 1) + at(l, s)));
    for (int s = k0 - 1; s >= 0; --s) put(l, s) = T(put(l, s + 1) - half_h * (at(l, s + 1) + at(l, s)));
  }
  return out;
}

}  // namespace gdeform
