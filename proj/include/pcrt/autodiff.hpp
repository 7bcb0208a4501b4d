// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>

namespace pcrt::ad {

/// Forward-mode scalar carrying value plus partials w.r.t. the registered
/// parameters. The parameter space is tiny (3 scalars per material), so a
/// dense fixed-capacity gradient beats a tape: no allocation, deterministic,
/// trivially thread-safe.
inline constexpr int kMaxParams = 32;

namespace detail {
inline int& active_count_ref() {
  static int count = 0;
  return count;
}
} // namespace detail

inline void set_active_parameter_count(int n) {
  if (n < 0 || n > kMaxParams)
    throw std::invalid_argument("parameter count exceeds autodiff capacity");
  detail::active_count_ref() = n;
}
inline int active_parameter_count() { return detail::active_count_ref(); }

struct DiffScalar {
  double v = 0.0;
  std::array<double, kMaxParams> g{};

  DiffScalar() = default;
  explicit DiffScalar(double value) : v(value) {}

  static DiffScalar constant(double value) { return DiffScalar(value); }
  static DiffScalar parameter(double value, int id) {
    if (id < 0 || id >= active_parameter_count())
      throw std::out_of_range("parameter id outside active parameter space");
    DiffScalar s(value);
    s.g[static_cast<std::size_t>(id)] = 1.0;
    return s;
  }

  double value() const { return v; }
  double partial(int id) const { return g[static_cast<std::size_t>(id)]; }
};

inline DiffScalar operator+(const DiffScalar& a, const DiffScalar& b) {
  DiffScalar r(a.v + b.v);
  const int n = active_parameter_count();
  for (int i = 0; i < n; ++i) r.g[i] = a.g[i] + b.g[i];
  return r;
}

inline DiffScalar operator-(const DiffScalar& a, const DiffScalar& b) {
  DiffScalar r(a.v - b.v);
  const int n = active_parameter_count();
  for (int i = 0; i < n; ++i) r.g[i] = a.g[i] - b.g[i];
  return r;
}

inline DiffScalar operator-(const DiffScalar& a) {
  DiffScalar r(-a.v);
  const int n = active_parameter_count();
  for (int i = 0; i < n; ++i) r.g[i] = -a.g[i];
  return r;
}

inline DiffScalar operator*(const DiffScalar& a, const DiffScalar& b) {
  DiffScalar r(a.v * b.v);
  const int n = active_parameter_count();
  for (int i = 0; i < n; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
  return r;
}

inline DiffScalar operator/(const DiffScalar& a, const DiffScalar& b) {
  DiffScalar r(a.v / b.v);
  const double inv_sq = 1.0 / (b.v * b.v);
  const int n = active_parameter_count();
  for (int i = 0; i < n; ++i) r.g[i] = (a.g[i] * b.v - a.v * b.g[i]) * inv_sq;
  return r;
}

inline DiffScalar operator+(const DiffScalar& a, double c) { return a + DiffScalar(c); }
inline DiffScalar operator+(double c, const DiffScalar& a) { return DiffScalar(c) + a; }
inline DiffScalar operator-(const DiffScalar& a, double c) { return a - DiffScalar(c); }
inline DiffScalar operator-(double c, const DiffScalar& a) { return DiffScalar(c) - a; }

inline DiffScalar operator*(const DiffScalar& a, double c) {
  DiffScalar r(a.v * c);
  const int n = active_parameter_count();
  for (int i = 0; i < n; ++i) r.g[i] = a.g[i] * c;
  return r;
}
inline DiffScalar operator*(double c, const DiffScalar& a) { return a * c; }
inline DiffScalar operator/(const DiffScalar& a, double c) { return a * (1.0 / c); }
inline DiffScalar operator/(double c, const DiffScalar& a) { return DiffScalar(c) / a; }

inline DiffScalar& operator+=(DiffScalar& a, const DiffScalar& b) { return a = a + b; }
inline DiffScalar& operator-=(DiffScalar& a, const DiffScalar& b) { return a = a - b; }
inline DiffScalar& operator*=(DiffScalar& a, const DiffScalar& b) { return a = a * b; }

inline bool operator<(const DiffScalar& a, const DiffScalar& b) { return a.v < b.v; }
inline bool operator>(const DiffScalar& a, const DiffScalar& b) { return a.v > b.v; }

inline DiffScalar chain(double value, double dvalue, const DiffScalar& x) {
  DiffScalar r(value);
  const int n = active_parameter_count();
  for (int i = 0; i < n; ++i) r.g[i] = dvalue * x.g[i];
  return r;
}

inline DiffScalar sqrt(const DiffScalar& x) {
  const double s = std::sqrt(x.v);
  return chain(s, 0.5 / (s > 0.0 ? s : 1e-300), x);
}
inline DiffScalar exp(const DiffScalar& x) {
  const double e = std::exp(x.v);
  return chain(e, e, x);
}
inline DiffScalar log(const DiffScalar& x) { return chain(std::log(x.v), 1.0 / x.v, x); }
inline DiffScalar sin(const DiffScalar& x) { return chain(std::sin(x.v), std::cos(x.v), x); }
inline DiffScalar cos(const DiffScalar& x) { return chain(std::cos(x.v), -std::sin(x.v), x); }
inline DiffScalar abs(const DiffScalar& x) {
  return chain(std::abs(x.v), x.v >= 0.0 ? 1.0 : -1.0, x);
}

/// log(1 + e^x), overflow-safe.
inline DiffScalar softplus(const DiffScalar& x) {
  const double value = x.v > 30.0 ? x.v : std::log1p(std::exp(x.v));
  const double dvalue = 1.0 / (1.0 + std::exp(-x.v));
  return chain(value, dvalue, x);
}
inline double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

inline DiffScalar sigmoid(const DiffScalar& x) {
  const double s = 1.0 / (1.0 + std::exp(-x.v));
  return chain(s, s * (1.0 - s), x);
}
inline double sigmoid_inverse(double y) { return std::log(y / (1.0 - y)); }

/// Complex value over DiffScalar components.
struct DiffComplex {
  DiffScalar re, im;

  DiffComplex() = default;
  DiffComplex(DiffScalar r, DiffScalar i) : re(std::move(r)), im(std::move(i)) {}
  explicit DiffComplex(double r, double i = 0.0) : re(r), im(i) {}
  explicit DiffComplex(std::complex<double> z) : re(z.real()), im(z.imag()) {}

  std::complex<double> value() const { return {re.v, im.v}; }
};

inline DiffComplex operator+(const DiffComplex& a, const DiffComplex& b) {
  return {a.re + b.re, a.im + b.im};
}
inline DiffComplex operator-(const DiffComplex& a, const DiffComplex& b) {
  return {a.re - b.re, a.im - b.im};
}
inline DiffComplex operator*(const DiffComplex& a, const DiffComplex& b) {
  return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}
inline DiffComplex operator*(const DiffComplex& a, const DiffScalar& s) {
  return {a.re * s, a.im * s};
}
inline DiffComplex operator*(const DiffScalar& s, const DiffComplex& a) { return a * s; }
inline DiffComplex operator*(const DiffComplex& a, double c) { return {a.re * c, a.im * c}; }
inline DiffComplex operator*(double c, const DiffComplex& a) { return a * c; }
inline DiffComplex operator*(const DiffComplex& a, std::complex<double> z) {
  return a * DiffComplex(z);
}
inline DiffComplex& operator+=(DiffComplex& a, const DiffComplex& b) { return a = a + b; }

inline DiffComplex operator/(const DiffComplex& a, const DiffComplex& b) {
  const DiffScalar den = b.re * b.re + b.im * b.im;
  return {(a.re * b.re + a.im * b.im) / den, (a.im * b.re - a.re * b.im) / den};
}

inline DiffComplex conj(const DiffComplex& a) { return {a.re, -a.im}; }

/// |z|^2 (real).
inline DiffScalar norm(const DiffComplex& a) { return a.re * a.re + a.im * a.im; }
inline DiffScalar abs(const DiffComplex& a) { return sqrt(norm(a)); }

/// Principal square root (non-negative real part).
inline DiffComplex sqrt(const DiffComplex& z) {
  if (z.im.v == 0.0 && z.re.v >= 0.0) {
    // Real non-negative radicand: the half-angle form divides 0/0 in the
    // imaginary partials, so linearize directly.
    const DiffScalar re = sqrt(z.re);
    const DiffScalar im = chain(0.0, 0.5 / (re.v > 0.0 ? re.v : 1e-300), z.im);
    return {re, im};
  }
  const DiffScalar mag = abs(z);
  DiffScalar re = sqrt(0.5 * (mag + z.re));
  DiffScalar im = sqrt(0.5 * (mag - z.re));
  if (z.im.v < 0.0) im = -im;
  return {re, im};
}

} // namespace pcrt::ad
