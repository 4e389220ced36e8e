#pragma once

// Reverse-mode differentiation over real scalars.
//
// A Tape records every primitive applied to Var handles. Complex quantities
// are carried as (re, im) pairs of Vars (CVar); the loss is real, so the
// real-pair reverse sweep is exact and no Wirtinger calculus is needed.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cosmo/common.hpp"

namespace cosmo {

class Tape;

class Var {
public:
    Var() = default;

    double value() const;
    std::int32_t index() const noexcept { return index_; }
    Tape* tape() const noexcept { return tape_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::int32_t index) : tape_(tape), index_(index) {}

    Tape* tape_ = nullptr;
    std::int32_t index_ = -1;
};

class Tape {
public:
    enum class Op : std::uint8_t {
        Leaf,
        Constant,
        Add,
        Sub,
        Mul,
        Div,
        Neg,
        Sin,
        Cos,
        Exp,
        Sqrt,
        Sinc,
        Reciprocal,
        Sum,
        Max,
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Trainable input.
    Var variable(double value);
    /// Input that never receives a gradient.
    Var constant(double value);

    Var unary(Op op, Var a);
    Var binary(Op op, Var a, Var b);
    /// n-ary Sum or Max. Max routes the adjoint to the first maximal operand.
    Var nary(Op op, std::span<const Var> operands);

    double value(Var v) const { return nodes_[static_cast<std::size_t>(v.index())].value; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t leaf_count() const noexcept { return leaves_.size(); }

    /// d output / d v for every v in wrt. Nodes are visited in exact reverse
    /// recording order.
    Eigen::VectorXd gradient(Var output, std::span<const Var> wrt) const;

    /// Re-evaluates the recorded graph with new leaf values (in leaf creation
    /// order). Branch decisions made while recording are not revisited.
    void replay(std::span<const double> leaf_values);

    std::vector<double> leaf_values() const;

private:
    struct Node {
        Op op = Op::Leaf;
        std::int32_t a = -1;
        std::int32_t b = -1;
        std::uint32_t first = 0;  // n-ary operand range in operands_
        std::uint32_t count = 0;
        double value = 0.0;
        double da = 0.0;  // local partials saved from the forward pass
        double db = 0.0;
    };

    Var push(Node node);
    void evaluate(Node& node) const;
    void check_owner(Var v) const;

    std::vector<Node> nodes_;
    std::vector<std::int32_t> operands_;
    std::vector<std::int32_t> leaves_;
};

inline double Var::value() const { return tape_->value(*this); }

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double c);
Var operator+(double c, Var a);
Var operator-(Var a, double c);
Var operator-(double c, Var a);
Var operator*(Var a, double c);
Var operator*(double c, Var a);
Var operator/(Var a, double c);
Var operator/(double c, Var a);

Var sin(Var a);
Var cos(Var a);
Var exp(Var a);
Var sqrt(Var a);
/// Normalized sinc sin(pi x)/(pi x), evaluated by series near 0.
Var sinc(Var a);
Var reciprocal(Var a);
Var sum(std::span<const Var> terms);
Var max(std::span<const Var> terms);

/// Complex value carried as two real tape variables.
struct CVar {
    Var re;
    Var im;

    Complex value() const { return {re.value(), im.value()}; }
    Tape* tape() const { return re.tape(); }
};

CVar make_cvar(Tape& tape, Complex value);          // two trainable leaves
CVar make_cconstant(Tape& tape, Complex value);     // constant pair
CVar lift(Var real);                                // real -> (real, 0)

CVar operator+(const CVar& a, const CVar& b);
CVar operator-(const CVar& a, const CVar& b);
CVar operator*(const CVar& a, const CVar& b);
CVar operator/(const CVar& a, const CVar& b);
CVar operator-(const CVar& a);
CVar operator+(const CVar& a, double c);
CVar operator+(double c, const CVar& a);
CVar operator-(const CVar& a, double c);
CVar operator-(double c, const CVar& a);
CVar operator*(const CVar& a, double c);
CVar operator*(double c, const CVar& a);
CVar operator/(const CVar& a, double c);
CVar operator*(const CVar& a, Complex c);
CVar operator*(Complex c, const CVar& a);
CVar operator*(const CVar& a, Var r);

CVar conj(const CVar& a);
CVar exp(const CVar& a);
CVar sin(const CVar& a);
CVar cos(const CVar& a);
CVar sinc(const CVar& a);
Var modulus(const CVar& a);
Var norm(const CVar& a);
/// Largest modulus over the operands.
Var max_modulus(std::span<const CVar> values);

inline double real_part(const CVar& z) { return z.re.value(); }
inline double real_part(Var v) { return v.value(); }

/// d loss / d p for every p in params. The loss must be real: a recorded
/// imaginary part other than exactly zero is rejected.
Eigen::VectorXd grad(const Tape& tape, const CVar& loss, std::span<const Var> params);
Eigen::VectorXd grad(const Tape& tape, Var loss, std::span<const Var> params);

/// Builds a scalar function on a fresh tape from leaf variables.
using TapeFunction = std::function<Var(Tape&, std::span<const Var>)>;

/// Central-difference gradient of a plain function.
Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& point, double h);

/// max_i |analytic_i - numeric_i| / max(|analytic_i|, 1e-8)
double max_relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric);

/// Tape gradient of f at point compared against central differences.
/// Throws NumericalError naming the component whose perturbed evaluation is
/// not finite.
double grad_check(const TapeFunction& f, const Eigen::VectorXd& point, double h);

}  // namespace cosmo
