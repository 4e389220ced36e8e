#pragma once

#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cosmo {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;

/// Raised for violated preconditions: bad shapes, out-of-range parameters,
/// malformed input files.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces a non-finite value.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// splitmix64 finalizer. Used to derive independent sub-seeds and
/// counter-based random streams.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Sub-seed for a labelled random consumer, e.g. derive_seed(seed, "mask").
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept {
    return mix64(seed ^ mix64(fnv1a(label)));
}

/// Uniform double in [0, 1) from a 64-bit word.
constexpr double unit_double(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace cosmo

#include <cstdio>

namespace cosmo {

/// Decimal form with 17 significant digits, enough to round-trip a double.
inline std::string format17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace cosmo
