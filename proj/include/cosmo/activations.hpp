#pragma once

// Activation dictionary: ReLU, sine, Gaussian, sinc, raised cosine, and the
// complex-sinusoid modulation wrapper
//
//     cosmo(phi, zeta)(z) = phi(z) * exp(2*pi*j*zeta*z).
//
// Every formula is extended analytically to complex arguments. The raised
// cosine is evaluated in a form whose singular points are removable by
// construction:
//
//     cos(pi v / 2) / (1 - v^2) = (pi/2) sinc((v - 1)/2) / (1 + v)
//                               = (pi/2) sinc((v + 1)/2) / (1 - v)
//
// with the first form used for Re v >= 0 and the second otherwise, so the only
// remaining special point is sinc at the origin (handled by series).

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

#include <Eigen/Core>

#include "cosmo/common.hpp"
#include "cosmo/complex_math.hpp"

namespace cosmo {

enum class ActivationKind { ReLU, Sine, Gaussian, Sinc, RaisedCosine, Cosmo };

std::string_view kind_name(ActivationKind kind);

class ActivationSpec {
public:
    static ActivationSpec relu();
    static ActivationSpec sine(double omega0);
    /// exp(-(s x)^2)
    static ActivationSpec gaussian(double s);
    /// sinc(s x), normalized sinc
    static ActivationSpec sinc(double s);
    static ActivationSpec raised_cosine(double bandwidth, double rolloff = 0.05);
    static ActivationSpec cosmo(const ActivationSpec& base, double zeta);

    ActivationKind kind() const noexcept { return kind_; }
    double omega0() const noexcept { return omega0_; }
    double scale() const noexcept { return scale_; }
    double bandwidth() const noexcept { return bandwidth_; }
    double rolloff() const noexcept { return rolloff_; }
    double zeta() const noexcept { return zeta_; }
    bool modulated() const noexcept { return kind_ == ActivationKind::Cosmo; }
    /// Base of a Cosmo spec; the spec itself otherwise.
    const ActivationSpec& base() const;

    /// Copy with the raised-cosine bandwidth replaced (applied to the base of a
    /// Cosmo spec).
    ActivationSpec with_bandwidth(double bandwidth) const;
    ActivationSpec with_zeta(double zeta) const;

    /// Expression form accepted by parse_activation, e.g.
    /// "cosmo(raised_cosine(T=1,beta=0.05),zeta=1)".
    std::string expression() const;

    /// Throws InvalidArgument if a parameter is out of range.
    void validate() const;

    friend bool operator==(const ActivationSpec& a, const ActivationSpec& b);

private:
    ActivationSpec() = default;

    ActivationKind kind_ = ActivationKind::ReLU;
    double omega0_ = 30.0;
    double scale_ = 1.0;
    double bandwidth_ = 1.0;
    double rolloff_ = 0.05;
    double zeta_ = 0.0;
    std::shared_ptr<const ActivationSpec> base_;
};

/// Raised-cosine pulse (1/T) sinc(z/T) cos(pi beta z/T) / (1 - (2 beta z/T)^2)
/// for real, complex, or tape scalars.
template <class C>
C raised_cosine(const C& z, double bandwidth, double rolloff) {
    const C u = z / bandwidth;
    const C v = u * (2.0 * rolloff);
    const C h = real_part(v) >= 0.0 ? (kPi / 2) * sinc((v - 1.0) * 0.5) / (1.0 + v)
                                    : (kPi / 2) * sinc((v + 1.0) * 0.5) / (1.0 - v);
    return sinc(u) * h / bandwidth;
}

/// Generic evaluation of a non-modulated spec on any scalar type with sin,
/// exp, and sinc overloads. ReLU is only defined for double.
template <class C>
C evaluate_base(const ActivationSpec& spec, const C& z) {
    using std::exp;
    using std::sin;
    switch (spec.kind()) {
        case ActivationKind::ReLU:
            if constexpr (std::is_same_v<C, double>) {
                return z > 0.0 ? z : 0.0;
            } else {
                throw InvalidArgument("relu: only defined for real input");
            }
        case ActivationKind::Sine:
            return sin(z * spec.omega0());
        case ActivationKind::Gaussian: {
            const C sz = z * spec.scale();
            return exp(-(sz * sz));
        }
        case ActivationKind::Sinc:
            return sinc(z * spec.scale());
        case ActivationKind::RaisedCosine:
            return raised_cosine(z, spec.bandwidth(), spec.rolloff());
        case ActivationKind::Cosmo:
            break;
    }
    throw InvalidArgument("evaluate_base: modulated spec has no real-valued scalar form");
}

/// Activation value at z. Real-axis input (imag exactly 0) is evaluated by the
/// pure-real formula. ReLU rejects non-real input; a non-finite result throws
/// NumericalError naming the spec and the point.
Complex eval(const ActivationSpec& spec, Complex z);

/// Activation value at real x, including the modulation factor for Cosmo.
Complex eval_on_real(const ActivationSpec& spec, double x);

/// Real-valued activations only (throws for Cosmo).
double eval_real(const ActivationSpec& spec, double x);

/// Complex derivative d phi / dz. ReLU uses subgradient 0 at the origin.
Complex eval_derivative(const ActivationSpec& spec, Complex z);

/// max over points of ||g(x)| - |phi(x)||; every point must be real.
double modulus_preservation_check(const ActivationSpec& spec, std::span<const Complex> points);

/// Value and partial derivatives of one activation evaluation with respect to
/// its input and its trainable parameters.
struct ActivationPartials {
    Complex value;
    Complex d_input;
    Complex d_bandwidth;  // zero unless the base is a raised cosine
    Complex d_zeta;       // zero unless modulated
};

/// Flattened, allocation-free form of a spec used in the network's hot loop.
class ActivationKernel {
public:
    explicit ActivationKernel(const ActivationSpec& spec);

    Complex value(Complex z) const;
    ActivationPartials partials(Complex z) const;

    /// Batched forms over n contiguous inputs. `value` may alias `z`. Results
    /// agree with the scalar forms to a few ulp of the libm calls.
    void values(const Complex* z, Eigen::Index n, Complex* value) const;
    void partials(const Complex* z, Eigen::Index n, Complex* value, Complex* d_input, Complex* d_bandwidth,
                  Complex* d_zeta) const;

    ActivationKind base_kind() const noexcept { return base_kind_; }
    bool modulated() const noexcept { return modulated_; }

private:
    ActivationKind base_kind_;
    bool modulated_;
    double omega0_;
    double scale_;
    double bandwidth_;
    double rolloff_;
    double zeta_;
};

}  // namespace cosmo
