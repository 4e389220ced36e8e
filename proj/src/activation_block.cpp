// Batched activation kernel. Each activation family gets one flat loop over
// split real arithmetic so the compiler can vectorize it; with glibc's libmvec
// the transcendental calls become SIMD calls (see src/CMakeLists.txt).

#include <cmath>

// SIMD-clone declarations for libmvec. They must precede every use of these
// functions, and `const` is needed because -fno-builtin-sin/cos (which stops
// GCC fusing sin and cos into a scalar cexpi call) drops the builtin purity.
#ifdef COSMO_HAVE_LIBMVEC
extern "C" {
__attribute__((simd("notinbranch"), const)) double sin(double) noexcept;
__attribute__((simd("notinbranch"), const)) double cos(double) noexcept;
__attribute__((simd("notinbranch"), const)) double exp(double) noexcept;
__attribute__((simd("notinbranch"), const)) double expm1(double) noexcept;
}
#endif

#include "cosmo/activations.hpp"
#include "cosmo/complex_math.hpp"

// The loop bodies must be fully inlined for the vectorizer to see them.
#define COSMO_INLINE inline __attribute__((always_inline))

namespace cosmo {
namespace {

struct C {
    double re;
    double im;
};

COSMO_INLINE C operator+(C a, C b) { return {a.re + b.re, a.im + b.im}; }
COSMO_INLINE C operator-(C a, C b) { return {a.re - b.re, a.im - b.im}; }
COSMO_INLINE C operator*(double s, C a) { return {s * a.re, s * a.im}; }
COSMO_INLINE C operator*(C a, C b) { return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re}; }
COSMO_INLINE C add(C a, double s) { return {a.re + s, a.im}; }

COSMO_INLINE C recip(C b) {
    const double inv = 1.0 / (b.re * b.re + b.im * b.im);
    return {b.re * inv, -b.im * inv};
}

COSMO_INLINE C load(const Complex* p, Eigen::Index i) {
    const double* d = reinterpret_cast<const double*>(p);
    return {d[2 * i], d[2 * i + 1]};
}

COSMO_INLINE void store(Complex* p, Eigen::Index i, C v) {
    double* d = reinterpret_cast<double*>(p);
    d[2 * i] = v.re;
    d[2 * i + 1] = v.im;
}

struct CSinCos {
    C sin;
    C cos;
};

COSMO_INLINE CSinCos csincos(C x) {
    const double s = ::sin(x.re);
    const double c = ::cos(x.re);
    const double em = ::expm1(x.im);
    const double r = em / ::exp(x.im);
    const double sh = 0.5 * (em + r);
    const double ch = 1.0 + 0.5 * em * r;
    return {{s * ch, c * sh}, {c * ch, -s * sh}};
}

COSMO_INLINE C cexp(C x) {
    const double r = ::exp(x.re);
    return {r * ::cos(x.im), r * ::sin(x.im)};
}

struct Sinc {
    C value;
    C slope;
};

// Both the series and the direct quotient are evaluated on sanitized inputs
// and blended with a 0/1 weight. A select on the call results would be
// if-converted by the compiler into a branch and block vectorization.
COSMO_INLINE Sinc csinc(C u) {
    const C x = kPi * u;
    const bool near = x.re * x.re + x.im * x.im < detail::kSincSeriesRadius * detail::kSincSeriesRadius;
    const double wt = near ? 1.0 : 0.0;
    const C xn = {near ? x.re : 0.0, near ? x.im : 0.0};
    const C xf = {near ? 1.0 : x.re, near ? 0.0 : x.im};
    const C x2 = xn * xn;
    C series = add(x2 * add((-1.0 / 39916800) * x2, 1.0 / 362880), -1.0 / 5040);
    series = add(x2 * add(x2 * series, 1.0 / 120), -1.0 / 6);
    series = add(x2 * series, 1.0);
    C series_slope = add(x2 * add((-1.0 / 3991680) * x2, 1.0 / 45360), -1.0 / 840);
    series_slope = add(x2 * add(x2 * series_slope, 1.0 / 30), -1.0 / 3);
    series_slope = kPi * (xn * series_slope);
    const CSinCos sc = csincos(xf);
    const C rx = recip(xf);
    const C value = sc.sin * rx;
    const C slope = kPi * ((sc.cos - value) * rx);
    return {value + wt * (series - value), slope + wt * (series_slope - slope)};
}

struct Params {
    double omega0;
    double scale;
    double bandwidth;
    double rolloff;
    double zeta;
};

struct Out {
    C value;
    C d_input;
    C d_bandwidth;
};

COSMO_INLINE Out base_sine(const Params& p, C z) {
    const CSinCos sc = csincos(p.omega0 * z);
    return {sc.sin, p.omega0 * sc.cos, {0.0, 0.0}};
}

COSMO_INLINE Out base_gaussian(const Params& p, C z) {
    const C sz = p.scale * z;
    const C v = cexp(-1.0 * (sz * sz));
    return {v, (-2.0 * p.scale) * (sz * v), {0.0, 0.0}};
}

COSMO_INLINE Out base_sinc(const Params& p, C z) {
    const Sinc s = csinc(p.scale * z);
    return {s.value, p.scale * s.slope, {0.0, 0.0}};
}

COSMO_INLINE Out base_raised_cosine(const Params& p, C z) {
    const double inv_t = 1.0 / p.bandwidth;
    const C u = inv_t * z;
    const C v = (2.0 * p.rolloff) * u;
    const double side = std::copysign(1.0, v.re);
    const C denom = add(side * v, 1.0);
    const Sinc sw = csinc(0.5 * add(v, -side));
    const C rd = recip(denom);
    const C h = (kPi / 2) * (sw.value * rd);
    const C dh = (kPi / 2) * ((0.5 * sw.slope - side * (sw.value * rd)) * rd);
    const Sinc su = csinc(u);
    const C g = su.value * h;
    const C dg = su.slope * h + (2.0 * p.rolloff) * (su.value * dh);
    return {inv_t * g, (inv_t * inv_t) * dg, (-inv_t * inv_t) * (g + u * dg)};
}

COSMO_INLINE C modulation_factor(double zeta, C z) {
    const double w = 2.0 * kPi * zeta;
    return cexp({-w * z.im, w * z.re});
}

template <Out (*Base)(const Params&, C)>
void run_values(const Params& p, bool modulated, const Complex* z, Eigen::Index n, Complex* value) {
    if (modulated) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const C x = load(z, i);
            store(value, i, Base(p, x).value * modulation_factor(p.zeta, x));
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) store(value, i, Base(p, load(z, i)).value);
    }
}

template <Out (*Base)(const Params&, C)>
void run_partials(const Params& p, bool modulated, const Complex* z, Eigen::Index n, Complex* value, Complex* d_input,
                  Complex* d_bandwidth, Complex* d_zeta) {
    if (modulated) {
        const double w = 2.0 * kPi;
        for (Eigen::Index i = 0; i < n; ++i) {
            const C x = load(z, i);
            const Out o = Base(p, x);
            const C m = modulation_factor(p.zeta, x);
            const C pm = o.value * m;
            // d/dz [phi m] = phi' m + phi m (j w zeta); d/dzeta = phi m (j w z)
            const C jpm = {-w * pm.im, w * pm.re};
            store(d_input, i, o.d_input * m + p.zeta * jpm);
            store(d_bandwidth, i, o.d_bandwidth * m);
            store(d_zeta, i, jpm * x);
            store(value, i, pm);
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            const Out o = Base(p, load(z, i));
            store(d_input, i, o.d_input);
            store(d_bandwidth, i, o.d_bandwidth);
            store(d_zeta, i, {0.0, 0.0});
            store(value, i, o.value);
        }
    }
}

}  // namespace

void ActivationKernel::values(const Complex* z, Eigen::Index n, Complex* value) const {
    const Params p{omega0_, scale_, bandwidth_, rolloff_, zeta_};
    switch (base_kind_) {
        case ActivationKind::ReLU:
            for (Eigen::Index i = 0; i < n; ++i) value[i] = this->value(z[i]);
            return;
        case ActivationKind::Sine: return run_values<base_sine>(p, modulated_, z, n, value);
        case ActivationKind::Gaussian: return run_values<base_gaussian>(p, modulated_, z, n, value);
        case ActivationKind::Sinc: return run_values<base_sinc>(p, modulated_, z, n, value);
        case ActivationKind::RaisedCosine: return run_values<base_raised_cosine>(p, modulated_, z, n, value);
        case ActivationKind::Cosmo: break;
    }
    throw InvalidArgument("ActivationKernel: nested modulation");
}

void ActivationKernel::partials(const Complex* z, Eigen::Index n, Complex* value, Complex* d_input,
                                Complex* d_bandwidth, Complex* d_zeta) const {
    const Params p{omega0_, scale_, bandwidth_, rolloff_, zeta_};
    switch (base_kind_) {
        case ActivationKind::ReLU:
            for (Eigen::Index i = 0; i < n; ++i) {
                const ActivationPartials r = partials(z[i]);
                value[i] = r.value;
                d_input[i] = r.d_input;
                d_bandwidth[i] = r.d_bandwidth;
                d_zeta[i] = r.d_zeta;
            }
            return;
        case ActivationKind::Sine:
            return run_partials<base_sine>(p, modulated_, z, n, value, d_input, d_bandwidth, d_zeta);
        case ActivationKind::Gaussian:
            return run_partials<base_gaussian>(p, modulated_, z, n, value, d_input, d_bandwidth, d_zeta);
        case ActivationKind::Sinc:
            return run_partials<base_sinc>(p, modulated_, z, n, value, d_input, d_bandwidth, d_zeta);
        case ActivationKind::RaisedCosine:
            return run_partials<base_raised_cosine>(p, modulated_, z, n, value, d_input, d_bandwidth, d_zeta);
        case ActivationKind::Cosmo: break;
    }
    throw InvalidArgument("ActivationKernel: nested modulation");
}

}  // namespace cosmo
