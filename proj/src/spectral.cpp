#include "cosmo/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace cosmo {

namespace {

void check_sizes(int node_count, int n_max) {
    if (node_count < 1) throw InvalidArgument("chebyshev: node count must be at least 1");
    if (n_max < 0) throw InvalidArgument("chebyshev: n_max must be non-negative");
    if (n_max >= node_count)
        throw InvalidArgument("chebyshev: n_max (" + std::to_string(n_max) + ") must be below the node count (" +
                              std::to_string(node_count) + ")");
}

double node_angle(int k, int node_count) {
    return kPi * (2.0 * k + 1.0) / (2.0 * node_count);
}

// cos(n pi / 2) without rounding residue.
double cos_half_pi_multiple(int n) {
    switch (n % 4) {
        case 0: return 1.0;
        case 2: return -1.0;
        default: return 0.0;
    }
}

bool vanishes_by_parity(Parity p, int n) {
    return (p == Parity::Even && n % 2 == 1) || (p == Parity::Odd && n % 2 == 0);
}

}  // namespace

Eigen::VectorXd chebyshev_nodes(int node_count) {
    if (node_count < 1) throw InvalidArgument("chebyshev_nodes: N must be at least 1");
    Eigen::VectorXd x(node_count);
    for (int k = 0; k < node_count; ++k) x(k) = std::cos(node_angle(k, node_count));
    return x;
}

ChebyshevExpansion chebyshev_coeffs(const ScalarFunction& f, int node_count, int n_max, std::string label) {
    check_sizes(node_count, n_max);
    Eigen::VectorXcd fx(node_count);
    Eigen::VectorXd theta(node_count);
    for (int k = 0; k < node_count; ++k) {
        theta(k) = node_angle(k, node_count);
        const Complex v = f(std::cos(theta(k)));
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw NumericalError("chebyshev_coeffs: function is not finite at node k = " + std::to_string(k));
        fx(k) = v;
    }
    ChebyshevExpansion out;
    out.node_count = node_count;
    out.label = std::move(label);
    out.coeffs.resize(n_max + 1);
    for (int n = 0; n <= n_max; ++n) {
        Complex acc = 0.0;
        for (int k = 0; k < node_count; ++k) acc += std::cos(n * theta(k)) * fx(k);
        out.coeffs(n) = acc * ((n == 0 ? 1.0 : 2.0) / node_count);
    }
    return out;
}

ChebyshevExpansion chebyshev_coeffs(const ActivationSpec& spec, int node_count, int n_max) {
    return chebyshev_coeffs([&spec](double x) { return eval_on_real(spec, x); }, node_count, n_max,
                            spec.expression());
}

ChebyshevExpansion chebyshev_coeffs_folded(const ScalarFunction& f, int node_count, int n_max) {
    check_sizes(node_count, n_max);
    const int half = node_count / 2;
    const bool odd_count = node_count % 2 == 1;
    ChebyshevExpansion out;
    out.node_count = node_count;
    out.coeffs.resize(n_max + 1);
    std::vector<Complex> f_pos(half), f_neg(half);
    std::vector<double> theta(half);
    for (int i = 0; i < half; ++i) {
        theta[i] = node_angle(i, node_count);
        const double x = std::cos(theta[i]);
        f_pos[i] = f(x);
        f_neg[i] = f(-x);
    }
    const Complex f0 = odd_count ? f(0.0) : Complex(0.0);
    for (int n = 0; n <= n_max; ++n) {
        const double sign = n % 2 == 0 ? 1.0 : -1.0;
        Complex acc = 0.0;
        for (int i = 0; i < half; ++i) acc += std::cos(n * theta[i]) * (f_pos[i] + sign * f_neg[i]);
        if (odd_count) acc += cos_half_pi_multiple(n) * f0;
        out.coeffs(n) = acc * ((n == 0 ? 1.0 : 2.0) / node_count);
    }
    return out;
}

ModulatedCoefficients modulated_coefficients(const std::function<double(double)>& f, double angular,
                                             int node_count, int n_max) {
    check_sizes(node_count, n_max);
    const int half = node_count / 2;
    const bool odd_count = node_count % 2 == 1;
    std::vector<double> f_pos(half), f_neg(half), c(half), s(half), theta(half);
    for (int i = 0; i < half; ++i) {
        theta[i] = node_angle(i, node_count);
        const double x = std::cos(theta[i]);
        f_pos[i] = f(x);
        f_neg[i] = f(-x);
        c[i] = std::cos(angular * x);
        s[i] = std::sin(angular * x);
    }
    const double f0 = odd_count ? f(0.0) : 0.0;
    ModulatedCoefficients out{Eigen::VectorXd(n_max + 1), Eigen::VectorXd(n_max + 1)};
    for (int n = 0; n <= n_max; ++n) {
        const double sign = n % 2 == 0 ? 1.0 : -1.0;
        double a = 0.0;
        double b = 0.0;
        for (int i = 0; i < half; ++i) {
            const double t = std::cos(n * theta[i]);
            a += t * (f_pos[i] + sign * f_neg[i]) * c[i];
            b += t * (f_pos[i] - sign * f_neg[i]) * s[i];
        }
        if (odd_count) a += cos_half_pi_multiple(n) * f0;
        const double scale = (n == 0 ? 1.0 : 2.0) / node_count;
        out.a(n) = a * scale;
        out.b(n) = b * scale;
    }
    return out;
}

Complex chebyshev_eval(const ChebyshevExpansion& expansion, double x) {
    if (!(std::abs(x) <= 1.0)) throw InvalidArgument("chebyshev_eval: x must lie in [-1, 1]");
    const auto& c = expansion.coeffs;
    if (c.size() == 0) return 0.0;
    Complex b1 = 0.0;
    Complex b2 = 0.0;
    for (Eigen::Index k = c.size() - 1; k >= 1; --k) {
        const Complex b0 = c(k) + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    return c(0) + x * b1 - b2;
}

Eigen::VectorXd chebyshev_to_monomial(const Eigen::VectorXd& cheb) {
    const Eigen::Index n = cheb.size();
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(std::max<Eigen::Index>(n, 1));
    if (n == 0) return alpha;
    Eigen::VectorXd prev = Eigen::VectorXd::Zero(n);  // T_{k-1}
    Eigen::VectorXd cur = Eigen::VectorXd::Zero(n);   // T_k
    prev(0) = 1.0;
    alpha += cheb(0) * prev;
    if (n == 1) return alpha;
    cur(1) = 1.0;
    alpha += cheb(1) * cur;
    for (Eigen::Index k = 2; k < n; ++k) {
        Eigen::VectorXd next = -prev;
        for (Eigen::Index i = 0; i + 1 < n; ++i) next(i + 1) += 2.0 * cur(i);
        alpha += cheb(k) * next;
        prev = std::move(cur);
        cur = std::move(next);
    }
    return alpha;
}

std::string_view parity_name(Parity p) {
    switch (p) {
        case Parity::Even: return "even";
        case Parity::Odd: return "odd";
        case Parity::Neither: return "neither";
    }
    return "neither";
}

Parity classify_parity(const std::function<double(double)>& f) {
    constexpr int kSamples = 1000;
    double scale = 0.0;
    double even_dev = 0.0;
    double odd_dev = 0.0;
    for (int i = 0; i < kSamples; ++i) {
        const double x = static_cast<double>(i + 1) / kSamples;
        const double p = f(x);
        const double m = f(-x);
        scale = std::max({scale, std::abs(p), std::abs(m)});
        even_dev = std::max(even_dev, std::abs(p - m));
        odd_dev = std::max(odd_dev, std::abs(p + m));
    }
    const double tol = 1e-12 * std::max(scale, 1e-300);
    if (even_dev <= tol) return Parity::Even;
    if (odd_dev <= tol && std::abs(f(0.0)) <= tol) return Parity::Odd;
    return Parity::Neither;
}

ParityReport parity_vanishing_report(const ActivationSpec& spec, int node_count, int n_max, double tol) {
    if (spec.modulated()) throw InvalidArgument("parity_vanishing_report: spec must be real-valued");
    ParityReport r;
    r.activation = spec.expression();
    r.parity = classify_parity([&spec](double x) { return eval_real(spec, x); });
    r.applicable = r.parity != Parity::Neither;
    r.expansion = chebyshev_coeffs(spec, node_count, n_max);
    if (!r.applicable) return r;
    for (int n = 0; n <= n_max; ++n) {
        if (!vanishes_by_parity(r.parity, n)) continue;
        const double mag = std::abs(r.expansion.coeffs(n));
        r.max_vanishing = std::max(r.max_vanishing, mag);
        if (mag > tol) r.violations.push_back(n);
    }
    return r;
}

CoverageReport modulation_coverage_report(const ActivationSpec& base, double zeta, int node_count, int n_max,
                                          double tol) {
    if (zeta == 0.0) throw InvalidArgument("modulation_coverage_report: zeta = 0, modulation disabled, coverage claim vacuous");
    if (base.modulated()) throw InvalidArgument("modulation_coverage_report: base must not be modulated");
    CoverageReport r;
    r.base = base.expression();
    r.zeta = zeta;
    r.base_parity = classify_parity([&base](double x) { return eval_real(base, x); });
    if (r.base_parity == Parity::Neither)
        throw InvalidArgument("modulation_coverage_report: base " + r.base + " has no exact parity");

    const ChebyshevExpansion plain = chebyshev_coeffs(base, node_count, n_max);
    const ChebyshevExpansion modulated = chebyshev_coeffs(ActivationSpec::cosmo(base, zeta), node_count, n_max);
    for (int n = 0; n <= n_max; ++n) {
        if (!vanishes_by_parity(r.base_parity, n)) continue;
        CoverageEntry e;
        e.n = n;
        e.unmodulated = std::abs(plain.coeffs(n));
        e.a = std::abs(modulated.coeffs(n).real());
        e.b = std::abs(modulated.coeffs(n).imag());
        e.flagged = std::max(e.a, e.b) <= tol;
        r.max_predicted_zero = std::max(r.max_predicted_zero, e.a);
        if (e.flagged) r.flagged.push_back(n);
        r.entries.push_back(e);
    }
    return r;
}

DecayTable decay_profile(std::span<const ActivationSpec> specs, int node_count, int n_max) {
    check_sizes(node_count, n_max);
    DecayTable t;
    t.magnitudes.resize(n_max + 1, static_cast<Eigen::Index>(specs.size()));
    for (std::size_t j = 0; j < specs.size(); ++j) {
        const ChebyshevExpansion e = chebyshev_coeffs(specs[j], node_count, n_max);
        t.names.push_back(e.label);
        t.magnitudes.col(static_cast<Eigen::Index>(j)) = e.coeffs.cwiseAbs();
    }
    return t;
}

void write_decay_csv(std::ostream& out, const DecayTable& table) {
    out << "n";
    for (const auto& name : table.names) {
        // Expressions contain commas; quote them.
        out << ",\"" << name << '"';
    }
    out << '\n';
    for (Eigen::Index n = 0; n < table.magnitudes.rows(); ++n) {
        out << n;
        for (Eigen::Index j = 0; j < table.magnitudes.cols(); ++j) out << ',' << format17(table.magnitudes(n, j));
        out << '\n';
    }
}

void write_coeffs_csv(std::ostream& out, const ChebyshevExpansion& expansion) {
    out << "n,a_re,a_im\n";
    for (Eigen::Index n = 0; n < expansion.coeffs.size(); ++n)
        out << n << ',' << format17(expansion.coeffs(n).real()) << ',' << format17(expansion.coeffs(n).imag())
            << '\n';
}

Complex CenteredSpectrum::at(int k) const {
    const int m = half_width();
    if (k < -m || k > m) return 0.0;
    return values(k + m);
}

CenteredSpectrum CenteredSpectrum::zeros(int half_width) {
    return {Eigen::VectorXcd::Zero(2 * half_width + 1)};
}

namespace {

CenteredSpectrum convolve(const CenteredSpectrum& a, const CenteredSpectrum& b) {
    CenteredSpectrum out = CenteredSpectrum::zeros(a.half_width() + b.half_width());
    for (Eigen::Index i = 0; i < a.values.size(); ++i)
        for (Eigen::Index j = 0; j < b.values.size(); ++j) out.values(i + j) += a.values(i) * b.values(j);
    return out;
}

}  // namespace

CenteredSpectrum post_activation_spectrum(const PolySpectrum& ps) {
    if (ps.input.values.size() % 2 == 0) throw InvalidArgument("post_activation_spectrum: input must be centered");
    const int order = static_cast<int>(ps.alpha.size()) - 1;
    const int m = ps.input.half_width();
    CenteredSpectrum out = CenteredSpectrum::zeros(std::max(order, 0) * m);
    if (order < 0) return out;
    const int center = out.half_width();
    out.values(center) += ps.alpha(0);
    CenteredSpectrum power = ps.input;
    for (int i = 1; i <= order; ++i) {
        if (i > 1) power = convolve(power, ps.input);
        const int hw = power.half_width();
        out.values.segment(center - hw, 2 * hw + 1) += ps.alpha(i) * power.values;
    }
    return out;
}

namespace {

Eigen::MatrixXcd dft_matrix(Eigen::Index n) {
    Eigen::MatrixXcd d(n, n);
    for (Eigen::Index u = 0; u < n; ++u)
        for (Eigen::Index y = 0; y < n; ++y) {
            const double angle = -2.0 * kPi * static_cast<double>((u * y) % n) / static_cast<double>(n);
            d(u, y) = Complex(std::cos(angle), std::sin(angle));
        }
    return d;
}

}  // namespace

Eigen::MatrixXcd dft2(const Eigen::MatrixXcd& field) {
    const Eigen::MatrixXcd rows = dft_matrix(field.rows());
    const Eigen::MatrixXcd cols = dft_matrix(field.cols());
    return rows * field * cols;
}

Eigen::VectorXd horizontal_profile(const Eigen::MatrixXcd& spectrum) {
    const Eigen::Index w = spectrum.cols();
    Eigen::VectorXd p(w / 2 + 1);
    for (Eigen::Index k = 0; k <= w / 2; ++k) {
        const Eigen::Index mirror = (w - k) % w;
        p(k) = 0.5 * (std::abs(spectrum(0, k)) + std::abs(spectrum(0, mirror)));
    }
    return p;
}

}  // namespace cosmo
