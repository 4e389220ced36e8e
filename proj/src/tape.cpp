#include "cosmo/tape.hpp"

#include <cmath>
#include <string>

#include "cosmo/complex_math.hpp"

namespace cosmo {

Var Tape::push(Node node) {
    evaluate(node);
    nodes_.push_back(node);
    return Var(this, static_cast<std::int32_t>(nodes_.size() - 1));
}

void Tape::check_owner(Var v) const {
    if (v.tape() != this) throw InvalidArgument("tape: variable belongs to a different tape");
}

Var Tape::variable(double value) {
    Node node;
    node.op = Op::Leaf;
    node.value = value;
    Var v = push(node);
    leaves_.push_back(v.index());
    return v;
}

Var Tape::constant(double value) {
    Node node;
    node.op = Op::Constant;
    node.value = value;
    return push(node);
}

Var Tape::unary(Op op, Var a) {
    check_owner(a);
    Node node;
    node.op = op;
    node.a = a.index();
    return push(node);
}

Var Tape::binary(Op op, Var a, Var b) {
    check_owner(a);
    check_owner(b);
    Node node;
    node.op = op;
    node.a = a.index();
    node.b = b.index();
    return push(node);
}

Var Tape::nary(Op op, std::span<const Var> operands) {
    if (operands.empty()) throw InvalidArgument("tape: n-ary operation needs at least one operand");
    Node node;
    node.op = op;
    node.first = static_cast<std::uint32_t>(operands_.size());
    node.count = static_cast<std::uint32_t>(operands.size());
    for (const Var& v : operands) {
        check_owner(v);
        operands_.push_back(v.index());
    }
    return push(node);
}

// Single source of truth for forward values and local partials, shared by
// recording and replay so both produce identical bits.
void Tape::evaluate(Node& n) const {
    const auto val = [this](std::int32_t i) { return nodes_[static_cast<std::size_t>(i)].value; };
    switch (n.op) {
        case Op::Leaf:
        case Op::Constant:
            break;
        case Op::Add:
            n.value = val(n.a) + val(n.b);
            n.da = 1.0;
            n.db = 1.0;
            break;
        case Op::Sub:
            n.value = val(n.a) - val(n.b);
            n.da = 1.0;
            n.db = -1.0;
            break;
        case Op::Mul:
            n.value = val(n.a) * val(n.b);
            n.da = val(n.b);
            n.db = val(n.a);
            break;
        case Op::Div: {
            const double y = val(n.b);
            n.value = val(n.a) / y;
            n.da = 1.0 / y;
            n.db = -n.value / y;
            break;
        }
        case Op::Neg:
            n.value = -val(n.a);
            n.da = -1.0;
            break;
        case Op::Sin:
            n.value = std::sin(val(n.a));
            n.da = std::cos(val(n.a));
            break;
        case Op::Cos:
            n.value = std::cos(val(n.a));
            n.da = -std::sin(val(n.a));
            break;
        case Op::Exp:
            n.value = std::exp(val(n.a));
            n.da = n.value;
            break;
        case Op::Sqrt:
            n.value = std::sqrt(val(n.a));
            n.da = 0.5 / n.value;
            break;
        case Op::Sinc: {
            const auto vs = sinc_with_slope(val(n.a));
            n.value = sinc(val(n.a));
            n.da = vs.slope;
            break;
        }
        case Op::Reciprocal:
            n.value = 1.0 / val(n.a);
            n.da = -n.value * n.value;
            break;
        case Op::Sum: {
            double s = 0.0;
            for (std::uint32_t k = 0; k < n.count; ++k) s += val(operands_[n.first + k]);
            n.value = s;
            break;
        }
        case Op::Max: {
            std::uint32_t best = 0;
            double m = val(operands_[n.first]);
            for (std::uint32_t k = 1; k < n.count; ++k) {
                const double x = val(operands_[n.first + k]);
                if (x > m) {
                    m = x;
                    best = k;
                }
            }
            n.value = m;
            n.a = operands_[n.first + best];
            n.da = 1.0;
            break;
        }
    }
}

Eigen::VectorXd Tape::gradient(Var output, std::span<const Var> wrt) const {
    check_owner(output);
    std::vector<double> adjoint(nodes_.size(), 0.0);
    adjoint[static_cast<std::size_t>(output.index())] = 1.0;
    for (std::int32_t i = output.index(); i >= 0; --i) {
        const double g = adjoint[static_cast<std::size_t>(i)];
        if (g == 0.0) continue;
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        switch (n.op) {
            case Op::Leaf:
            case Op::Constant:
                break;
            case Op::Sum:
                for (std::uint32_t k = 0; k < n.count; ++k)
                    adjoint[static_cast<std::size_t>(operands_[n.first + k])] += g;
                break;
            case Op::Max:
                adjoint[static_cast<std::size_t>(n.a)] += g * n.da;
                break;
            default:
                adjoint[static_cast<std::size_t>(n.a)] += g * n.da;
                if (n.b >= 0) adjoint[static_cast<std::size_t>(n.b)] += g * n.db;
                break;
        }
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(wrt.size()));
    for (std::size_t k = 0; k < wrt.size(); ++k) {
        check_owner(wrt[k]);
        out(static_cast<Eigen::Index>(k)) = adjoint[static_cast<std::size_t>(wrt[k].index())];
    }
    return out;
}

void Tape::replay(std::span<const double> leaf_values) {
    if (leaf_values.size() != leaves_.size())
        throw InvalidArgument("tape: replay expects " + std::to_string(leaves_.size()) + " leaf values, got " +
                              std::to_string(leaf_values.size()));
    for (std::size_t k = 0; k < leaves_.size(); ++k) nodes_[static_cast<std::size_t>(leaves_[k])].value = leaf_values[k];
    for (Node& n : nodes_) evaluate(n);
}

std::vector<double> Tape::leaf_values() const {
    std::vector<double> out;
    out.reserve(leaves_.size());
    for (std::int32_t i : leaves_) out.push_back(nodes_[static_cast<std::size_t>(i)].value);
    return out;
}

// Real scalar operators.

namespace {

Tape& tape_of(Var a) {
    if (!a.valid()) throw InvalidArgument("tape: uninitialized variable");
    return *a.tape();
}

}  // namespace

Var operator+(Var a, Var b) { return tape_of(a).binary(Tape::Op::Add, a, b); }
Var operator-(Var a, Var b) { return tape_of(a).binary(Tape::Op::Sub, a, b); }
Var operator*(Var a, Var b) { return tape_of(a).binary(Tape::Op::Mul, a, b); }
Var operator/(Var a, Var b) { return tape_of(a).binary(Tape::Op::Div, a, b); }
Var operator-(Var a) { return tape_of(a).unary(Tape::Op::Neg, a); }
Var operator+(Var a, double c) { return a + tape_of(a).constant(c); }
Var operator+(double c, Var a) { return tape_of(a).constant(c) + a; }
Var operator-(Var a, double c) { return a - tape_of(a).constant(c); }
Var operator-(double c, Var a) { return tape_of(a).constant(c) - a; }
Var operator*(Var a, double c) { return a * tape_of(a).constant(c); }
Var operator*(double c, Var a) { return tape_of(a).constant(c) * a; }
Var operator/(Var a, double c) { return a / tape_of(a).constant(c); }
Var operator/(double c, Var a) { return tape_of(a).constant(c) / a; }

Var sin(Var a) { return tape_of(a).unary(Tape::Op::Sin, a); }
Var cos(Var a) { return tape_of(a).unary(Tape::Op::Cos, a); }
Var exp(Var a) { return tape_of(a).unary(Tape::Op::Exp, a); }
Var sqrt(Var a) { return tape_of(a).unary(Tape::Op::Sqrt, a); }
Var sinc(Var a) { return tape_of(a).unary(Tape::Op::Sinc, a); }
Var reciprocal(Var a) { return tape_of(a).unary(Tape::Op::Reciprocal, a); }

Var sum(std::span<const Var> terms) {
    if (terms.empty()) throw InvalidArgument("tape: sum of no terms");
    return tape_of(terms.front()).nary(Tape::Op::Sum, terms);
}

Var max(std::span<const Var> terms) {
    if (terms.empty()) throw InvalidArgument("tape: max of no terms");
    return tape_of(terms.front()).nary(Tape::Op::Max, terms);
}

// Complex pairs.

CVar make_cvar(Tape& tape, Complex value) { return {tape.variable(value.real()), tape.variable(value.imag())}; }

CVar make_cconstant(Tape& tape, Complex value) {
    return {tape.constant(value.real()), tape.constant(value.imag())};
}

CVar lift(Var real) { return {real, tape_of(real).constant(0.0)}; }

CVar operator+(const CVar& a, const CVar& b) { return {a.re + b.re, a.im + b.im}; }
CVar operator-(const CVar& a, const CVar& b) { return {a.re - b.re, a.im - b.im}; }

CVar operator*(const CVar& a, const CVar& b) {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}

CVar operator/(const CVar& a, const CVar& b) {
    const Var d = reciprocal(b.re * b.re + b.im * b.im);
    return {(a.re * b.re + a.im * b.im) * d, (a.im * b.re - a.re * b.im) * d};
}

CVar operator-(const CVar& a) { return {-a.re, -a.im}; }
CVar operator+(const CVar& a, double c) { return {a.re + c, a.im}; }
CVar operator+(double c, const CVar& a) { return {c + a.re, a.im}; }
CVar operator-(const CVar& a, double c) { return {a.re - c, a.im}; }
CVar operator-(double c, const CVar& a) { return {c - a.re, -a.im}; }
CVar operator*(const CVar& a, double c) { return {a.re * c, a.im * c}; }
CVar operator*(double c, const CVar& a) { return {c * a.re, c * a.im}; }
CVar operator/(const CVar& a, double c) { return {a.re / c, a.im / c}; }

CVar operator*(const CVar& a, Complex c) {
    return {a.re * c.real() - a.im * c.imag(), a.re * c.imag() + a.im * c.real()};
}

CVar operator*(Complex c, const CVar& a) { return a * c; }
CVar operator*(const CVar& a, Var r) { return {a.re * r, a.im * r}; }

CVar conj(const CVar& a) { return {a.re, -a.im}; }

CVar exp(const CVar& a) {
    const Var r = exp(a.re);
    return {r * cos(a.im), r * sin(a.im)};
}

// sin(x+iy) = sin x cosh y + i cos x sinh y
CVar sin(const CVar& a) {
    const Var ep = exp(a.im);
    const Var em = exp(-a.im);
    const Var ch = (ep + em) * 0.5;
    const Var sh = (ep - em) * 0.5;
    return {sin(a.re) * ch, cos(a.re) * sh};
}

// cos(x+iy) = cos x cosh y - i sin x sinh y
CVar cos(const CVar& a) {
    const Var ep = exp(a.im);
    const Var em = exp(-a.im);
    const Var ch = (ep + em) * 0.5;
    const Var sh = (ep - em) * 0.5;
    return {cos(a.re) * ch, -(sin(a.re) * sh)};
}

CVar sinc(const CVar& a) {
    const CVar x = a * kPi;
    if (std::abs(x.value()) < detail::kSincSeriesRadius) return detail::sinc_series(x);
    return sin(x) / x;
}

Var norm(const CVar& a) { return a.re * a.re + a.im * a.im; }
Var modulus(const CVar& a) { return sqrt(norm(a)); }

Var max_modulus(std::span<const CVar> values) {
    std::vector<Var> mods;
    mods.reserve(values.size());
    for (const CVar& v : values) mods.push_back(modulus(v));
    return max(mods);
}

Eigen::VectorXd grad(const Tape& tape, Var loss, std::span<const Var> params) {
    return tape.gradient(loss, params);
}

Eigen::VectorXd grad(const Tape& tape, const CVar& loss, std::span<const Var> params) {
    const double im = loss.im.value();
    if (im != 0.0)
        throw InvalidArgument("grad: loss must be real, recorded imaginary part is " + std::to_string(im));
    return tape.gradient(loss.re, params);
}

Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& point, double h) {
    if (!(h > 0.0)) throw InvalidArgument("central_difference: step must be positive");
    Eigen::VectorXd out(point.size());
    Eigen::VectorXd probe = point;
    for (Eigen::Index i = 0; i < point.size(); ++i) {
        probe(i) = point(i) + h;
        const double up = f(probe);
        probe(i) = point(i) - h;
        const double down = f(probe);
        probe(i) = point(i);
        if (!std::isfinite(up) || !std::isfinite(down))
            throw NumericalError("central_difference: non-finite value when perturbing component " +
                                 std::to_string(i));
        out(i) = (up - down) / (2.0 * h);
    }
    return out;
}

double max_relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
    if (analytic.size() != numeric.size()) throw InvalidArgument("max_relative_error: size mismatch");
    double worst = 0.0;
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        const double err = std::abs(analytic(i) - numeric(i)) / std::max(std::abs(analytic(i)), 1e-8);
        worst = std::max(worst, err);
    }
    return worst;
}

double grad_check(const TapeFunction& f, const Eigen::VectorXd& point, double h) {
    const auto record = [&f](Tape& tape, const Eigen::VectorXd& x, std::vector<Var>& leaves) {
        leaves.clear();
        for (Eigen::Index i = 0; i < x.size(); ++i) leaves.push_back(tape.variable(x(i)));
        return f(tape, leaves);
    };

    Tape tape;
    std::vector<Var> leaves;
    const Var out = record(tape, point, leaves);
    if (!std::isfinite(out.value())) throw NumericalError("grad_check: function is not finite at the point");
    const Eigen::VectorXd analytic = tape.gradient(out, leaves);

    const auto plain = [&record](const Eigen::VectorXd& x) {
        Tape scratch;
        std::vector<Var> vs;
        return record(scratch, x, vs).value();
    };
    return max_relative_error(analytic, central_difference(plain, point, h));
}

}  // namespace cosmo
