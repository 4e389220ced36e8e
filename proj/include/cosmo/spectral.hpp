#pragma once

// Chebyshev analysis of activations on [-1, 1], the polynomial blueshift model
// of a post-activation spectrum, and 2-D DFT helpers.

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cosmo/activations.hpp"
#include "cosmo/common.hpp"

namespace cosmo {

/// Zeros of T_N: x_k = cos(pi (2k + 1) / (2N)), k = 0..N-1, strictly decreasing.
Eigen::VectorXd chebyshev_nodes(int node_count);

/// c_0..c_nmax of f on N nodes; c_n = a_n + j b_n for complex-valued f.
struct ChebyshevExpansion {
    Eigen::VectorXcd coeffs;
    int node_count = 0;
    std::string label;

    int n_max() const noexcept { return static_cast<int>(coeffs.size()) - 1; }
};

using ScalarFunction = std::function<Complex(double)>;

/// c_n = ((2 - delta(n)) / N) * sum_k T_n(x_k) f(x_k), with T_n(x_k) = cos(n theta_k).
ChebyshevExpansion chebyshev_coeffs(const ScalarFunction& f, int node_count, int n_max, std::string label = {});
ChebyshevExpansion chebyshev_coeffs(const ActivationSpec& spec, int node_count, int n_max);

/// Same coefficients computed from the half-range sum
///     a_n = (2/N) [ sum_{i < N/2} cos(n theta_i) (f(x_i) + (-1)^n f(-x_i)) + [N odd] cos(n pi/2) f(0) ]
/// (halved for n = 0).
ChebyshevExpansion chebyshev_coeffs_folded(const ScalarFunction& f, int node_count, int n_max);

/// Real (a_n) and imaginary (b_n) coefficient families of f(x) exp(j w x) for
/// real f, from the folded sums with the cos(w x) / sin(w x) factors pulled out.
/// `angular` is w; the activation convention uses w = 2 pi zeta.
struct ModulatedCoefficients {
    Eigen::VectorXd a;
    Eigen::VectorXd b;
};
ModulatedCoefficients modulated_coefficients(const std::function<double(double)>& f, double angular,
                                             int node_count, int n_max);

/// Clenshaw recurrence. |x| > 1 throws.
Complex chebyshev_eval(const ChebyshevExpansion& expansion, double x);

/// Power-basis coefficients alpha_0..alpha_n of sum c_n T_n (real parts).
Eigen::VectorXd chebyshev_to_monomial(const Eigen::VectorXd& cheb);

enum class Parity { Even, Odd, Neither };

std::string_view parity_name(Parity p);

/// Classifies f on [-1, 1] from 1000 mirrored sample pairs.
Parity classify_parity(const std::function<double(double)>& f);

struct ParityReport {
    std::string activation;
    Parity parity = Parity::Neither;
    bool applicable = false;         // false when the function has no parity
    std::vector<int> violations;     // indices that should vanish but exceed tol
    double max_vanishing = 0.0;      // largest |c_n| over the indices that should vanish
    ChebyshevExpansion expansion;
};

ParityReport parity_vanishing_report(const ActivationSpec& spec, int node_count = 512, int n_max = 50,
                                     double tol = 1e-10);

struct CoverageEntry {
    int n = 0;
    double unmodulated = 0.0;  // |c_n| of the base, vanishing by parity
    double a = 0.0;            // |a_n| of the modulated activation
    double b = 0.0;            // |b_n|
    bool flagged = false;      // max(a, b) <= tol
};

struct CoverageReport {
    std::string base;
    double zeta = 0.0;
    Parity base_parity = Parity::Neither;
    std::vector<CoverageEntry> entries;
    std::vector<int> flagged;
    /// Largest |a_n| over the parity-vanishing indices; a_n carries the factor
    /// f(x) + (-1)^n f(-x) cos-weighted, which is exactly zero there.
    double max_predicted_zero = 0.0;
};

CoverageReport modulation_coverage_report(const ActivationSpec& base, double zeta, int node_count = 512,
                                          int n_max = 50, double tol = 1e-10);

/// |c_n| per spec, rows n = 0..n_max, one column per spec.
struct DecayTable {
    std::vector<std::string> names;
    Eigen::MatrixXd magnitudes;
};

DecayTable decay_profile(std::span<const ActivationSpec> specs, int node_count = 512, int n_max = 50);

/// Header "n,<name>,..." then one row per n, 17 significant digits.
void write_decay_csv(std::ostream& out, const DecayTable& table);
/// Header "n,a_re,a_im".
void write_coeffs_csv(std::ostream& out, const ChebyshevExpansion& expansion);

/// Fourier coefficients indexed -half_width..half_width.
struct CenteredSpectrum {
    Eigen::VectorXcd values;

    int half_width() const noexcept { return static_cast<int>(values.size() - 1) / 2; }
    Complex at(int k) const;
    static CenteredSpectrum zeros(int half_width);
};

/// Polynomial activation sum_i alpha_i x^i applied to a signal with Fourier
/// coefficients z_{-M..M}.
struct PolySpectrum {
    Eigen::VectorXd alpha;
    CenteredSpectrum input;
};

/// z' = sum_i alpha_i (z convolved with itself i times); support K*M.
CenteredSpectrum post_activation_spectrum(const PolySpectrum& ps);

/// Direct row-column 2-D DFT, F(u, v) = sum f(y, x) exp(-2 pi j (u y / H + v x / W)).
Eigen::MatrixXcd dft2(const Eigen::MatrixXcd& field);

/// Magnitudes along the horizontal frequency axis (vertical frequency 0),
/// bins 0..W/2, averaging the +k and -k bins.
Eigen::VectorXd horizontal_profile(const Eigen::MatrixXcd& spectrum);

}  // namespace cosmo
