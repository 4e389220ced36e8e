#include "cosmo/activations.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace cosmo {

namespace {

std::string format_number(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

void require_finite(const ActivationSpec& spec, Complex z, Complex value) {
    if (!std::isfinite(value.real()) || !std::isfinite(value.imag()))
        throw NumericalError("activation " + spec.expression() + " is not finite at z = (" +
                             format_number(z.real()) + ", " + format_number(z.imag()) + ")");
}

Complex modulation(double zeta, Complex z) { return exp_fast(mul(Complex(0.0, 2.0 * kPi * zeta), z)); }

}  // namespace

std::string_view kind_name(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::ReLU: return "relu";
        case ActivationKind::Sine: return "sine";
        case ActivationKind::Gaussian: return "gaussian";
        case ActivationKind::Sinc: return "sinc";
        case ActivationKind::RaisedCosine: return "raised_cosine";
        case ActivationKind::Cosmo: return "cosmo";
    }
    return "unknown";
}

ActivationSpec ActivationSpec::relu() { return ActivationSpec(); }

ActivationSpec ActivationSpec::sine(double omega0) {
    ActivationSpec s;
    s.kind_ = ActivationKind::Sine;
    s.omega0_ = omega0;
    s.validate();
    return s;
}

ActivationSpec ActivationSpec::gaussian(double scale) {
    ActivationSpec s;
    s.kind_ = ActivationKind::Gaussian;
    s.scale_ = scale;
    s.validate();
    return s;
}

ActivationSpec ActivationSpec::sinc(double scale) {
    ActivationSpec s;
    s.kind_ = ActivationKind::Sinc;
    s.scale_ = scale;
    s.validate();
    return s;
}

ActivationSpec ActivationSpec::raised_cosine(double bandwidth, double rolloff) {
    ActivationSpec s;
    s.kind_ = ActivationKind::RaisedCosine;
    s.bandwidth_ = bandwidth;
    s.rolloff_ = rolloff;
    s.validate();
    return s;
}

ActivationSpec ActivationSpec::cosmo(const ActivationSpec& base, double zeta) {
    if (base.modulated()) throw InvalidArgument("cosmo: base activation must not itself be modulated");
    ActivationSpec s;
    s.kind_ = ActivationKind::Cosmo;
    s.zeta_ = zeta;
    s.base_ = std::make_shared<const ActivationSpec>(base);
    s.validate();
    return s;
}

const ActivationSpec& ActivationSpec::base() const { return modulated() ? *base_ : *this; }

ActivationSpec ActivationSpec::with_bandwidth(double bandwidth) const {
    if (modulated()) return cosmo(base_->with_bandwidth(bandwidth), zeta_);
    ActivationSpec s = *this;
    s.bandwidth_ = bandwidth;
    s.validate();
    return s;
}

ActivationSpec ActivationSpec::with_zeta(double zeta) const {
    if (!modulated()) throw InvalidArgument("with_zeta: spec is not modulated");
    return cosmo(*base_, zeta);
}

void ActivationSpec::validate() const {
    switch (kind_) {
        case ActivationKind::ReLU:
            break;
        case ActivationKind::Sine:
            if (!std::isfinite(omega0_)) throw InvalidArgument("sine: omega0 must be finite");
            break;
        case ActivationKind::Gaussian:
        case ActivationKind::Sinc:
            if (!(scale_ > 0.0) || !std::isfinite(scale_))
                throw InvalidArgument(std::string(kind_name(kind_)) + ": scale s must be positive");
            break;
        case ActivationKind::RaisedCosine:
            if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_))
                throw InvalidArgument("raised_cosine: T must be positive");
            if (!(rolloff_ > 0.0 && rolloff_ <= 1.0)) throw InvalidArgument("raised_cosine: beta must lie in (0, 1]");
            break;
        case ActivationKind::Cosmo:
            if (!base_ || base_->modulated()) throw InvalidArgument("cosmo: needs exactly one non-modulated base");
            if (!(zeta_ >= 0.0) || !std::isfinite(zeta_)) throw InvalidArgument("cosmo: zeta must be >= 0");
            base_->validate();
            break;
    }
}

std::string ActivationSpec::expression() const {
    switch (kind_) {
        case ActivationKind::ReLU: return "relu";
        case ActivationKind::Sine: return "sine(omega0=" + format_number(omega0_) + ")";
        case ActivationKind::Gaussian: return "gaussian(s=" + format_number(scale_) + ")";
        case ActivationKind::Sinc: return "sinc(s=" + format_number(scale_) + ")";
        case ActivationKind::RaisedCosine:
            return "raised_cosine(T=" + format_number(bandwidth_) + ",beta=" + format_number(rolloff_) + ")";
        case ActivationKind::Cosmo: return "cosmo(" + base_->expression() + ",zeta=" + format_number(zeta_) + ")";
    }
    return {};
}

bool operator==(const ActivationSpec& a, const ActivationSpec& b) { return a.expression() == b.expression(); }

Complex eval_on_real(const ActivationSpec& spec, double x) {
    Complex value;
    if (spec.modulated()) {
        const double phase = 2.0 * kPi * spec.zeta() * x;
        const double base = evaluate_base(spec.base(), x);
        value = Complex(base * std::cos(phase), base * std::sin(phase));
    } else {
        value = Complex(evaluate_base(spec, x), 0.0);
    }
    require_finite(spec, Complex(x, 0.0), value);
    return value;
}

double eval_real(const ActivationSpec& spec, double x) {
    if (spec.modulated()) throw InvalidArgument("eval_real: " + spec.expression() + " is complex-valued");
    return eval_on_real(spec, x).real();
}

Complex eval(const ActivationSpec& spec, Complex z) {
    if (z.imag() == 0.0) return eval_on_real(spec, z.real());
    if (spec.base().kind() == ActivationKind::ReLU) throw InvalidArgument("relu: only defined for real input");
    Complex value = evaluate_base(spec.base(), z);
    if (spec.modulated()) value *= std::exp(Complex(0.0, 2.0 * kPi * spec.zeta()) * z);
    require_finite(spec, z, value);
    return value;
}

Complex eval_derivative(const ActivationSpec& spec, Complex z) {
    const ActivationPartials p = ActivationKernel(spec).partials(z);
    require_finite(spec, z, p.d_input);
    return p.d_input;
}

double modulus_preservation_check(const ActivationSpec& spec, std::span<const Complex> points) {
    if (!spec.modulated()) throw InvalidArgument("modulus_preservation_check: spec must be modulated");
    double worst = 0.0;
    for (const Complex& z : points) {
        if (z.imag() != 0.0)
            throw InvalidArgument("modulus_preservation_check: modulus is only preserved on the real axis");
        const double g = std::abs(eval(spec, z));
        const double phi = std::abs(eval(spec.base(), z));
        worst = std::max(worst, std::abs(g - phi));
    }
    return worst;
}

ActivationKernel::ActivationKernel(const ActivationSpec& spec)
    : base_kind_(spec.base().kind()),
      modulated_(spec.modulated()),
      omega0_(spec.base().omega0()),
      scale_(spec.base().scale()),
      bandwidth_(spec.base().bandwidth()),
      rolloff_(spec.base().rolloff()),
      zeta_(spec.zeta()) {}

Complex ActivationKernel::value(Complex z) const { return partials(z).value; }

ActivationPartials ActivationKernel::partials(Complex z) const {
    ActivationPartials p{};
    switch (base_kind_) {
        case ActivationKind::ReLU:
            if (z.imag() != 0.0) throw InvalidArgument("relu: only defined for real input");
            p.value = z.real() > 0.0 ? z : Complex(0.0);
            p.d_input = z.real() > 0.0 ? 1.0 : 0.0;
            break;
        case ActivationKind::Sine: {
            const auto [s, c] = sincos(omega0_ * z);
            p.value = s;
            p.d_input = omega0_ * c;
            break;
        }
        case ActivationKind::Gaussian: {
            const Complex sz = scale_ * z;
            p.value = exp_fast(-mul(sz, sz));
            p.d_input = mul(-2.0 * scale_ * sz, p.value);
            break;
        }
        case ActivationKind::Sinc: {
            const auto vs = sinc_with_slope(scale_ * z);
            p.value = vs.value;
            p.d_input = scale_ * vs.slope;
            break;
        }
        case ActivationKind::RaisedCosine: {
            const double inv_t = 1.0 / bandwidth_;
            const Complex u = z * inv_t;
            const Complex v = u * (2.0 * rolloff_);
            const double side = v.real() >= 0.0 ? 1.0 : -1.0;
            const Complex denom = 1.0 + side * v;
            const auto sw = sinc_with_slope((v - side) * 0.5);
            const Complex rd = reciprocal(denom);
            const Complex h = (kPi / 2) * mul(sw.value, rd);
            const Complex dh = (kPi / 2) * mul(0.5 * sw.slope - side * mul(sw.value, rd), rd);
            const auto su = sinc_with_slope(u);
            const Complex g = mul(su.value, h);
            const Complex dg = mul(su.slope, h) + (2.0 * rolloff_) * mul(su.value, dh);
            p.value = g * inv_t;
            p.d_input = dg * (inv_t * inv_t);
            p.d_bandwidth = -(g + mul(u, dg)) * (inv_t * inv_t);
            break;
        }
        case ActivationKind::Cosmo:
            throw InvalidArgument("ActivationKernel: nested modulation");
    }
    if (modulated_) {
        const Complex m = modulation(zeta_, z);
        const Complex jw(0.0, 2.0 * kPi);
        const Complex pm = mul(p.value, m);
        p.d_input = mul(p.d_input, m) + mul(pm, zeta_ * jw);
        p.d_bandwidth = mul(p.d_bandwidth, m);
        p.d_zeta = mul(pm, mul(jw, z));
        p.value = pm;
    }
    return p;
}

}  // namespace cosmo
