#pragma once

// Elementary functions on real and complex scalars used by the activation
// kernels. The complex versions avoid libm's csin/ccos special-case handling
// and compute sin and cos together from one real sin/cos pair plus exp and expm1.

#include <cmath>

#include "cosmo/common.hpp"

namespace cosmo {

template <class Scalar>
struct SinCos {
    Scalar sin;
    Scalar cos;
};

/// Value and first derivative of a scalar function at one point.
template <class Scalar>
struct ValueAndSlope {
    Scalar value;
    Scalar slope;
};

inline SinCos<double> sincos(double x) noexcept { return {std::sin(x), std::cos(x)}; }

inline SinCos<Complex> sincos(Complex z) noexcept {
    const double s = std::sin(z.real());
    const double c = std::cos(z.real());
    // sinh = (em + em / e) / 2 and cosh = 1 + em^2 / (2 e) with em = expm1(y),
    // e = exp(y): accurate for small |y| and free of cancellation for y << 0.
    const double em = std::expm1(z.imag());
    const double r = em / std::exp(z.imag());
    const double sh = 0.5 * (em + r);
    const double ch = 1.0 + 0.5 * em * r;
    return {Complex(s * ch, c * sh), Complex(c * ch, -s * sh)};
}

inline Complex exp_fast(Complex z) noexcept {
    const double r = std::exp(z.real());
    return {r * std::cos(z.imag()), r * std::sin(z.imag())};
}

/// Complex product without the NaN-recovery branch of operator*.
inline Complex mul(Complex a, Complex b) noexcept {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

/// Complex quotient a / b by conjugate multiplication. Callers guarantee
/// |b| is neither tiny nor huge.
inline Complex div(Complex a, Complex b) noexcept {
    const double d = b.real() * b.real() + b.imag() * b.imag();
    return {(a.real() * b.real() + a.imag() * b.imag()) / d,
            (a.imag() * b.real() - a.real() * b.imag()) / d};
}

inline Complex reciprocal(Complex b) noexcept {
    const double inv = 1.0 / (b.real() * b.real() + b.imag() * b.imag());
    return {b.real() * inv, -b.imag() * inv};
}

namespace detail {

// |pi*u| below this uses the Taylor series of sin(x)/x.
inline constexpr double kSincSeriesRadius = 0.1;

template <class Scalar>
Scalar sinc_series(Scalar x) {
    const Scalar x2 = x * x;
    return 1.0 + x2 * (-1.0 / 6 + x2 * (1.0 / 120 + x2 * (-1.0 / 5040 + x2 * (1.0 / 362880 + x2 * (-1.0 / 39916800)))));
}

// d/dx [sin(x)/x]
template <class Scalar>
Scalar sinc_slope_series(Scalar x) {
    const Scalar x2 = x * x;
    return x * (-1.0 / 3 + x2 * (1.0 / 30 + x2 * (-1.0 / 840 + x2 * (1.0 / 45360 + x2 * (-1.0 / 3991680)))));
}

}  // namespace detail

/// Normalized sinc, sin(pi u) / (pi u), with sinc(0) = 1.
inline double sinc(double u) {
    const double x = kPi * u;
    if (std::abs(x) < detail::kSincSeriesRadius) return detail::sinc_series(x);
    return std::sin(x) / x;
}

inline Complex sinc(Complex u) {
    const Complex x = kPi * u;
    if (std::norm(x) < detail::kSincSeriesRadius * detail::kSincSeriesRadius) return detail::sinc_series(x);
    return std::sin(x) / x;
}

inline ValueAndSlope<double> sinc_with_slope(double u) {
    const double x = kPi * u;
    if (std::abs(x) < detail::kSincSeriesRadius)
        return {detail::sinc_series(x), kPi * detail::sinc_slope_series(x)};
    const auto [s, c] = sincos(x);
    const double value = s / x;
    return {value, (c - value) / u};
}

inline ValueAndSlope<Complex> sinc_with_slope(Complex u) {
    const Complex x = kPi * u;
    if (std::norm(x) < detail::kSincSeriesRadius * detail::kSincSeriesRadius)
        return {detail::sinc_series(x), kPi * detail::sinc_slope_series(x)};
    const auto [s, c] = sincos(x);
    const Complex rx = reciprocal(x);
    const Complex value = mul(s, rx);
    return {value, kPi * mul(c - value, rx)};
}

inline double real_part(double x) noexcept { return x; }
inline double real_part(Complex z) noexcept { return z.real(); }

}  // namespace cosmo
