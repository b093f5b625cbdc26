#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gdeform/error.hpp"

namespace gdeform {

using Complex = std::complex<double>;

/// Uniform tensor grid on the chart rectangle [u0,u1] x [v0,v1].
struct Grid2 {
  double u0 = 0.0, u1 = 1.0, v0 = 0.0, v1 = 1.0;
  int nu = 8, nv = 8;

  static constexpr int kMinNodes = 8;

  Grid2() = default;
  Grid2(double u0_, double u1_, double v0_, double v1_, int nu_, int nv_)
      : u0(u0_), u1(u1_), v0(v0_), v1(v1_), nu(nu_), nv(nv_) {
    validate();
  }

  void validate() const {
    if (nu < kMinNodes || nv < kMinNodes)
      throw DomainError("grid needs at least 8 nodes per axis, got " + std::to_string(nu) + "x" +
                        std::to_string(nv));
    if (!(u1 > u0) || !(v1 > v0)) throw DomainError("grid bounds must satisfy u1>u0 and v1>v0");
  }

  double hu() const { return (u1 - u0) / (nu - 1); }
  double hv() const { return (v1 - v0) / (nv - 1); }
  double u(int i) const { return u0 + i * hu(); }
  double v(int j) const { return v0 + j * hv(); }
  std::size_t size() const { return static_cast<std::size_t>(nu) * static_cast<std::size_t>(nv); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nu + i; }

  /// Grid with the node counts doubled minus one, so every old node is a new node.
  Grid2 refined() const { return Grid2(u0, u1, v0, v1, 2 * nu - 1, 2 * nv - 1); }

  friend bool operator==(const Grid2&, const Grid2&) = default;
};

/// Uniform grid along the nullity ruling parameter t. A single node is allowed.
struct Grid1 {
  double t0 = -0.1, t1 = 0.1;
  int nt = 5;

  double ht() const { return nt > 1 ? (t1 - t0) / (nt - 1) : 0.0; }
  double t(int k) const { return nt > 1 ? t0 + k * ht() : t0; }

  /// Index of the node closest to t = 0.
  int origin_index() const {
    int best = 0;
    for (int k = 1; k < nt; ++k)
      if (std::abs(t(k)) < std::abs(t(best))) best = k;
    return best;
  }
};

/// One value per node of a Grid2, stored with u varying fastest.
template <typename T>
class Field {
 public:
  using value_type = T;

  Field() = default;
  explicit Field(const Grid2& g, const T& init = T{}) : grid_(g), data_(g.size(), init) {}

  template <typename Fn>
  static Field generate(const Grid2& g, Fn&& fn) {
    Field out(g);
    for (int j = 0; j < g.nv; ++j)
      for (int i = 0; i < g.nu; ++i) out(i, j) = fn(g.u(i), g.v(j));
    return out;
  }

  const Grid2& grid() const { return grid_; }
  T& operator()(int i, int j) { return data_[grid_.index(i, j)]; }
  const T& operator()(int i, int j) const { return data_[grid_.index(i, j)]; }
  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  template <typename Fn>
  auto map(Fn&& fn) const {
    using R = std::decay_t<decltype(fn(std::declval<const T&>()))>;
    Field<R> out(grid_);
    for (std::size_t n = 0; n < data_.size(); ++n) out.data()[n] = fn(data_[n]);
    return out;
  }

 private:
  Grid2 grid_;
  std::vector<T> data_;
};

using ScalarField = Field<double>;
using ComplexField = Field<Complex>;
using Matrix2Field = Field<Eigen::Matrix2d>;
using ComplexMatrix2Field = Field<Eigen::Matrix2cd>;

template <typename T, typename U, typename Fn>
auto zip(const Field<T>& a, const Field<U>& b, Fn&& fn) {
  using R = std::decay_t<decltype(fn(std::declval<const T&>(), std::declval<const U&>()))>;
  if (!(a.grid() == b.grid())) throw DomainError("fields live on different grids");
  Field<R> out(a.grid());
  for (std::size_t n = 0; n < a.data().size(); ++n) out.data()[n] = fn(a.data()[n], b.data()[n]);
  return out;
}

namespace detail {
inline bool finite_value(double x) { return std::isfinite(x); }
inline bool finite_value(const Complex& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }
template <typename Derived>
bool finite_value(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}
}  // namespace detail

/// Throws DomainError naming the first node holding a NaN or Inf.
template <typename T>
void require_finite(const Field<T>& f, const std::string& what) {
  const Grid2& g = f.grid();
  for (int j = 0; j < g.nv; ++j)
    for (int i = 0; i < g.nu; ++i)
      if (!detail::finite_value(f(i, j))) throw DomainError(what + " is not finite", Node{i, j, 0});
}

/// Location and size of the largest |value| over nodes at least `band` nodes away from the edges.
struct FieldMax {
  double value = 0.0;
  Node node{};
};

template <typename T, typename Norm>
FieldMax max_norm(const Field<T>& f, Norm&& norm, int band = 0) {
  const Grid2& g = f.grid();
  FieldMax out;
  bool first = true;
  for (int j = band; j < g.nv - band; ++j)
    for (int i = band; i < g.nu - band; ++i) {
      double x = norm(f(i, j));
      if (first || x > out.value || std::isnan(x)) {
        out = {x, Node{i, j, 0}};
        first = false;
        if (std::isnan(x)) return out;
      }
    }
  return out;
}

inline FieldMax max_abs(const ScalarField& f, int band = 0) {
  return max_norm(f, [](double x) { return std::abs(x); }, band);
}

inline FieldMax max_abs(const ComplexField& f, int band = 0) {
  return max_norm(f, [](const Complex& z) { return std::abs(z); }, band);
}

}  // namespace gdeform
