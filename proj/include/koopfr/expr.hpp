#pragma once

// Scalar expression language over complex state variables x1..xd, the input
// channel u, the imaginary unit i, and named real parameters.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | ident | ident '(' expr ')' | '(' expr ')'
//
// Exponents must fold to a rational constant. Non-integer (and negative)
// exponents are accepted only on the bare variable u; they are evaluated on the
// tracked continuous phase of u, so u^(1/n) stays single-valued along a
// trajectory.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "koopfr/errors.hpp"

namespace koopfr {

using cplx = std::complex<double>;
using Params = std::map<std::string, double>;

/// Exact rational exponent p/q with q > 0 and gcd(p, q) = 1.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    constexpr Rational() = default;
    constexpr Rational(std::int64_t n) : num(n), den(1) {}  // NOLINT(google-explicit-constructor)
    Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
        if (den == 0) throw BadExponent("zero denominator in exponent");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const auto g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    bool is_integer() const noexcept { return den == 1; }
    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
    friend bool operator==(const Rational&, const Rational&) = default;
};

/// Value of the input channel together with its continuous phase.
///
/// Trajectories carry u(t) = |u0| exp(i (arg u0 + omega t)); keeping the phase
/// unwrapped is what makes fractional powers of u continuous in time.
struct Input {
    cplx value{};
    double magnitude = 0.0;
    double phase = 0.0;

    static Input polar(double magnitude, double phase) {
        return Input{std::polar(magnitude, phase), magnitude, phase};
    }
    /// Principal-branch phase in (-pi, pi].
    static Input from_complex(cplx u) { return Input{u, std::abs(u), std::arg(u)}; }
};

enum class NodeKind { Literal, Imag, Param, State, Input, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class Function { Sin, Cos, Exp, Sqrt };

struct Node {
    NodeKind kind = NodeKind::Literal;
    double literal = 0.0;
    std::string name;  // Param
    int index = 0;     // State, 1-based
    Rational exponent;
    Function function = Function::Sin;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
};

namespace detail {

inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), end);
}

inline const char* function_name(Function f) {
    switch (f) {
        case Function::Sin: return "sin";
        case Function::Cos: return "cos";
        case Function::Exp: return "exp";
        case Function::Sqrt: return "sqrt";
    }
    return "?";
}

inline int precedence(NodeKind k) {
    switch (k) {
        case NodeKind::Add:
        case NodeKind::Sub: return 1;
        case NodeKind::Mul:
        case NodeKind::Div: return 2;
        case NodeKind::Neg: return 3;
        case NodeKind::Pow: return 4;
        default: return 5;
    }
}

inline bool is_reserved(std::string_view name) {
    if (name == "u" || name == "i" || name == "sin" || name == "cos" || name == "exp" ||
        name == "sqrt")
        return true;
    return name.size() >= 2 && name[0] == 'x' &&
           std::all_of(name.begin() + 1, name.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

}  // namespace detail

/// Immutable expression tree. Copies share structure.
class Expr {
   public:
    Expr() = default;

    static Expr literal(double v) { return make({.kind = NodeKind::Literal, .literal = v}); }
    static Expr imag() { return make({.kind = NodeKind::Imag}); }
    static Expr param(std::string name) { return make({.kind = NodeKind::Param, .name = std::move(name)}); }
    static Expr state(int index) { return make({.kind = NodeKind::State, .index = index}); }
    static Expr input() { return make({.kind = NodeKind::Input}); }
    static Expr neg(const Expr& a) { return make({.kind = NodeKind::Neg, .lhs = a.node_}); }
    static Expr add(const Expr& a, const Expr& b) { return binary(NodeKind::Add, a, b); }
    static Expr sub(const Expr& a, const Expr& b) { return binary(NodeKind::Sub, a, b); }
    static Expr mul(const Expr& a, const Expr& b) { return binary(NodeKind::Mul, a, b); }
    static Expr div(const Expr& a, const Expr& b) { return binary(NodeKind::Div, a, b); }
    static Expr call(Function f, const Expr& a) {
        return make({.kind = NodeKind::Call, .function = f, .lhs = a.node_});
    }
    /// Throws BadExponent unless the exponent is legal for this base.
    static Expr pow(const Expr& base, Rational e) {
        const bool on_input = base.node_ && base.node_->kind == NodeKind::Input;
        if (!on_input && (!e.is_integer() || e.num < 0))
            throw BadExponent("only the input u may carry a negative or fractional exponent");
        return make({.kind = NodeKind::Pow, .exponent = e, .lhs = base.node_});
    }

    bool empty() const noexcept { return node_ == nullptr; }
    const Node& root() const { return *node_; }
    const std::shared_ptr<const Node>& node() const noexcept { return node_; }

    friend bool operator==(const Expr& a, const Expr& b) { return equal(a.node_.get(), b.node_.get()); }

    /// Infix text that parses back to the same tree.
    std::string str() const {
        std::string out;
        if (node_) print(*node_, out);
        return out;
    }

    /// Constructor-style dump, e.g. Add(Mul(a1, x1), Pow(x2, 2)).
    std::string sexpr() const {
        std::string out;
        if (node_) dump(*node_, out);
        return out;
    }

    int max_state_index() const { return node_ ? max_index(*node_) : 0; }

    std::set<std::string> param_names() const {
        std::set<std::string> out;
        if (node_) collect_params(*node_, out);
        return out;
    }

   private:
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

    static Expr make(Node n) { return Expr(std::make_shared<const Node>(std::move(n))); }
    static Expr binary(NodeKind k, const Expr& a, const Expr& b) {
        return make({.kind = k, .lhs = a.node_, .rhs = b.node_});
    }

    static bool equal(const Node* a, const Node* b) {
        if (a == b) return true;
        if (!a || !b || a->kind != b->kind) return false;
        switch (a->kind) {
            case NodeKind::Literal: return a->literal == b->literal;
            case NodeKind::Imag:
            case NodeKind::Input: return true;
            case NodeKind::Param: return a->name == b->name;
            case NodeKind::State: return a->index == b->index;
            case NodeKind::Neg: return equal(a->lhs.get(), b->lhs.get());
            case NodeKind::Pow: return a->exponent == b->exponent && equal(a->lhs.get(), b->lhs.get());
            case NodeKind::Call: return a->function == b->function && equal(a->lhs.get(), b->lhs.get());
            default: return equal(a->lhs.get(), b->lhs.get()) && equal(a->rhs.get(), b->rhs.get());
        }
    }

    static void print_child(const Node& child, bool parens, std::string& out) {
        if (parens) out += '(';
        print(child, out);
        if (parens) out += ')';
    }

    static void print(const Node& n, std::string& out) {
        using detail::precedence;
        switch (n.kind) {
            case NodeKind::Literal: out += detail::format_double(n.literal); return;
            case NodeKind::Imag: out += 'i'; return;
            case NodeKind::Param: out += n.name; return;
            case NodeKind::State: out += 'x' + std::to_string(n.index); return;
            case NodeKind::Input: out += 'u'; return;
            case NodeKind::Neg:
                out += '-';
                print_child(*n.lhs, precedence(n.lhs->kind) < 3, out);
                return;
            case NodeKind::Pow:
                print_child(*n.lhs, precedence(n.lhs->kind) < 5, out);
                out += '^';
                if (n.exponent.is_integer() && n.exponent.num >= 0) {
                    out += std::to_string(n.exponent.num);
                } else {
                    out += '(' + std::to_string(n.exponent.num);
                    if (!n.exponent.is_integer()) out += '/' + std::to_string(n.exponent.den);
                    out += ')';
                }
                return;
            case NodeKind::Call:
                out += detail::function_name(n.function);
                print_child(*n.lhs, true, out);
                return;
            default: {
                const int p = precedence(n.kind);
                const char* op = n.kind == NodeKind::Add   ? " + "
                                 : n.kind == NodeKind::Sub ? " - "
                                 : n.kind == NodeKind::Mul ? "*"
                                                           : "/";
                print_child(*n.lhs, precedence(n.lhs->kind) < p, out);
                out += op;
                print_child(*n.rhs, precedence(n.rhs->kind) <= p, out);
                return;
            }
        }
    }

    static void dump(const Node& n, std::string& out) {
        auto wrap = [&](const char* head, std::initializer_list<const Node*> kids) {
            out += head;
            out += '(';
            bool first = true;
            for (const Node* k : kids) {
                if (!first) out += ", ";
                first = false;
                dump(*k, out);
            }
        };
        switch (n.kind) {
            case NodeKind::Literal: out += detail::format_double(n.literal); return;
            case NodeKind::Imag: out += 'i'; return;
            case NodeKind::Param: out += n.name; return;
            case NodeKind::State: out += 'x' + std::to_string(n.index); return;
            case NodeKind::Input: out += 'u'; return;
            case NodeKind::Neg: wrap("Neg", {n.lhs.get()}); break;
            case NodeKind::Add: wrap("Add", {n.lhs.get(), n.rhs.get()}); break;
            case NodeKind::Sub: wrap("Sub", {n.lhs.get(), n.rhs.get()}); break;
            case NodeKind::Mul: wrap("Mul", {n.lhs.get(), n.rhs.get()}); break;
            case NodeKind::Div: wrap("Div", {n.lhs.get(), n.rhs.get()}); break;
            case NodeKind::Call: wrap(detail::function_name(n.function), {n.lhs.get()}); break;
            case NodeKind::Pow:
                wrap("Pow", {n.lhs.get()});
                out += ", " + std::to_string(n.exponent.num);
                if (!n.exponent.is_integer()) out += '/' + std::to_string(n.exponent.den);
                break;
        }
        out += ')';
    }

    static int max_index(const Node& n) {
        int m = n.kind == NodeKind::State ? n.index : 0;
        if (n.lhs) m = std::max(m, max_index(*n.lhs));
        if (n.rhs) m = std::max(m, max_index(*n.rhs));
        return m;
    }

    static void collect_params(const Node& n, std::set<std::string>& out) {
        if (n.kind == NodeKind::Param) out.insert(n.name);
        if (n.lhs) collect_params(*n.lhs, out);
        if (n.rhs) collect_params(*n.rhs, out);
    }

    std::shared_ptr<const Node> node_;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class Parser {
   public:
    Parser(std::string_view src, int dim, const std::set<std::string>& params)
        : src_(src), dim_(dim), params_(params) {}

    Expr run() {
        skip_ws();
        if (pos_ >= src_.size()) throw SyntaxError(pos_, "empty expression");
        Expr e = expr();
        skip_ws();
        if (pos_ < src_.size()) throw SyntaxError(pos_, std::string("unexpected '") + src_[pos_] + "'");
        return e;
    }

   private:
    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    Expr expr() {
        Expr lhs = term();
        for (;;) {
            if (accept('+'))
                lhs = Expr::add(lhs, term());
            else if (accept('-'))
                lhs = Expr::sub(lhs, term());
            else
                return lhs;
        }
    }

    Expr term() {
        Expr lhs = unary();
        for (;;) {
            if (accept('*'))
                lhs = Expr::mul(lhs, unary());
            else if (accept('/'))
                lhs = Expr::div(lhs, unary());
            else
                return lhs;
        }
    }

    Expr unary() {
        if (accept('-')) return Expr::neg(unary());
        return power();
    }

    Expr power() {
        Expr base = primary();
        if (!accept('^')) return base;
        skip_ws();
        const std::size_t at = pos_;
        Expr exponent = unary();
        std::optional<Rational> r;
        try {
            r = fold(exponent.root());
        } catch (const BadExponent& e) {
            throw BadExponent(std::string(e.what()) + " (offset " + std::to_string(at) + ")");
        }
        return Expr::pow(base, *r);
    }

    Expr primary() {
        skip_ws();
        if (pos_ >= src_.size()) throw SyntaxError(pos_, "unexpected end of input");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = expr();
            if (!accept(')')) throw SyntaxError(pos_, "expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        throw SyntaxError(pos_, std::string("unexpected '") + c + "'");
    }

    Expr number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        };
        digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            digits();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t save = pos_++;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                digits();
            else
                pos_ = save;
        }
        double v = 0.0;
        auto [end, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, v);
        if (ec != std::errc() || end != src_.data() + pos_) throw SyntaxError(start, "malformed number");
        return Expr::literal(v);
    }

    Expr identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string name(src_.substr(start, pos_ - start));
        if (accept('(')) {
            std::optional<Function> f;
            if (name == "sin") f = Function::Sin;
            if (name == "cos") f = Function::Cos;
            if (name == "exp") f = Function::Exp;
            if (name == "sqrt") f = Function::Sqrt;
            if (!f) throw UnknownIdentifier(name);
            Expr arg = expr();
            if (!accept(')')) throw SyntaxError(pos_, "expected ')' after function argument");
            return Expr::call(*f, arg);
        }
        if (name == "u") return Expr::input();
        if (name == "i") return Expr::imag();
        if (is_reserved(name) && name[0] == 'x') {
            std::int64_t idx = 0;
            auto [end, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
            if (ec != std::errc() || idx < 1 || idx > dim_) throw UnknownIdentifier(name);
            return Expr::state(static_cast<int>(idx));
        }
        if (is_reserved(name)) throw SyntaxError(start, "function '" + name + "' needs an argument");
        if (!params_.count(name)) throw UnknownIdentifier(name);
        return Expr::param(name);
    }

    // Constant-fold an exponent subtree into an exact rational.
    static Rational fold(const Node& n) {
        constexpr std::int64_t kLimit = 1'000'000;
        auto check = [](Rational r) {
            if (std::abs(r.num) > kLimit || r.den > kLimit) throw BadExponent("exponent out of range");
            return r;
        };
        switch (n.kind) {
            case NodeKind::Literal: {
                if (n.literal != std::floor(n.literal) || std::abs(n.literal) > kLimit)
                    throw BadExponent("exponent literals must be integers");
                return Rational(static_cast<std::int64_t>(n.literal));
            }
            case NodeKind::Neg: {
                Rational a = fold(*n.lhs);
                return Rational(-a.num, a.den);
            }
            case NodeKind::Add:
            case NodeKind::Sub: {
                Rational a = fold(*n.lhs), b = fold(*n.rhs);
                const std::int64_t sign = n.kind == NodeKind::Add ? 1 : -1;
                return check(Rational(a.num * b.den + sign * b.num * a.den, a.den * b.den));
            }
            case NodeKind::Mul: {
                Rational a = fold(*n.lhs), b = fold(*n.rhs);
                return check(Rational(a.num * b.num, a.den * b.den));
            }
            case NodeKind::Div: {
                Rational a = fold(*n.lhs), b = fold(*n.rhs);
                if (b.num == 0) throw BadExponent("division by zero in exponent");
                return check(Rational(a.num * b.den, a.den * b.num));
            }
            case NodeKind::Pow: {
                Rational a = fold(*n.lhs);
                if (!n.exponent.is_integer() || n.exponent.num < 0 || n.exponent.num > 64)
                    throw BadExponent("nested exponent must be a small non-negative integer");
                Rational r(1);
                for (std::int64_t k = 0; k < n.exponent.num; ++k) r = check(Rational(r.num * a.num, r.den * a.den));
                return r;
            }
            default: throw BadExponent("exponent must be a rational constant");
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int dim_;
    const std::set<std::string>& params_;
};

}  // namespace detail

/// Parse expression text for a plant of dimension @p dim with the given parameter names.
inline Expr parse(std::string_view source, int dim, const std::set<std::string>& params = {}) {
    if (dim < 1) throw InvalidPlant("dimension must be >= 1");
    return detail::Parser(source, dim, params).run();
}

// ---------------------------------------------------------------------------
// Evaluation

namespace detail {

inline cplx ipow(cplx b, std::int64_t n) {
    if (n < 0) {
        if (b == cplx{}) throw DivisionByZero();
        return cplx{1.0} / ipow(b, -n);
    }
    cplx r{1.0};
    while (n > 0) {
        if (n & 1) r *= b;
        b *= b;
        n >>= 1;
    }
    return r;
}

inline cplx input_pow(const Input& u, Rational e) {
    if (e.is_integer()) return ipow(u.value, e.num);
    const double r = e.value();
    return std::polar(std::pow(u.magnitude, r), u.phase * r);
}

inline cplx checked_div(cplx a, cplx b) {
    if (b == cplx{}) throw DivisionByZero();
    return a / b;
}

inline cplx apply(Function f, cplx a) {
    switch (f) {
        case Function::Sin: return std::sin(a);
        case Function::Cos: return std::cos(a);
        case Function::Exp: return std::exp(a);
        case Function::Sqrt: return std::sqrt(a);
    }
    return {};
}

}  // namespace detail

/// Flattened postfix form of an expression with parameters resolved.
///
/// This is the evaluator used in integration loops; parameters are looked up
/// once, at compile time.
class Program {
   public:
    Program() = default;

    Program(const Expr& e, const Params& params) {
        if (e.empty()) throw InvalidPlant("cannot compile an empty expression");
        int depth = 0;
        emit(e.root(), params, depth);
    }

    cplx operator()(std::span<const cplx> x, const Input& u) const {
        constexpr std::size_t kInline = 32;
        std::array<cplx, kInline> small{};
        std::vector<cplx> big;
        cplx* stack = small.data();
        if (max_depth_ > static_cast<int>(kInline)) {
            big.resize(static_cast<std::size_t>(max_depth_));
            stack = big.data();
        }
        int top = 0;
        for (const Instr& in : code_) {
            switch (in.op) {
                case Op::Push: stack[top++] = in.constant; break;
                case Op::State: stack[top++] = x[static_cast<std::size_t>(in.index)]; break;
                case Op::Input: stack[top++] = u.value; break;
                case Op::InputPow: stack[top++] = detail::input_pow(u, in.exponent); break;
                case Op::Neg: stack[top - 1] = -stack[top - 1]; break;
                case Op::Add: --top; stack[top - 1] += stack[top]; break;
                case Op::Sub: --top; stack[top - 1] -= stack[top]; break;
                case Op::Mul: --top; stack[top - 1] *= stack[top]; break;
                case Op::Div: --top; stack[top - 1] = detail::checked_div(stack[top - 1], stack[top]); break;
                case Op::IntPow: stack[top - 1] = detail::ipow(stack[top - 1], in.exponent.num); break;
                case Op::Call: stack[top - 1] = detail::apply(in.function, stack[top - 1]); break;
            }
        }
        return stack[0];
    }

    bool empty() const noexcept { return code_.empty(); }

   private:
    enum class Op { Push, State, Input, InputPow, Neg, Add, Sub, Mul, Div, IntPow, Call };
    struct Instr {
        Op op = Op::Push;
        cplx constant{};
        int index = 0;
        Rational exponent;
        Function function = Function::Sin;
    };

    void push(Instr in, int& depth, int delta) {
        code_.push_back(in);
        depth += delta;
        max_depth_ = std::max(max_depth_, depth);
    }

    void emit(const Node& n, const Params& params, int& depth) {
        switch (n.kind) {
            case NodeKind::Literal: push({.op = Op::Push, .constant = n.literal}, depth, 1); return;
            case NodeKind::Imag: push({.op = Op::Push, .constant = cplx{0.0, 1.0}}, depth, 1); return;
            case NodeKind::Param: {
                auto it = params.find(n.name);
                if (it == params.end()) throw UnboundParameter(n.name);
                push({.op = Op::Push, .constant = it->second}, depth, 1);
                return;
            }
            case NodeKind::State: push({.op = Op::State, .index = n.index - 1}, depth, 1); return;
            case NodeKind::Input: push({.op = Op::Input}, depth, 1); return;
            case NodeKind::Neg: emit(*n.lhs, params, depth); push({.op = Op::Neg}, depth, 0); return;
            case NodeKind::Call:
                emit(*n.lhs, params, depth);
                push({.op = Op::Call, .function = n.function}, depth, 0);
                return;
            case NodeKind::Pow:
                if (n.lhs->kind == NodeKind::Input) {
                    push({.op = Op::InputPow, .exponent = n.exponent}, depth, 1);
                } else {
                    emit(*n.lhs, params, depth);
                    push({.op = Op::IntPow, .exponent = n.exponent}, depth, 0);
                }
                return;
            default: {
                emit(*n.lhs, params, depth);
                emit(*n.rhs, params, depth);
                const Op op = n.kind == NodeKind::Add   ? Op::Add
                              : n.kind == NodeKind::Sub ? Op::Sub
                              : n.kind == NodeKind::Mul ? Op::Mul
                                                        : Op::Div;
                push({.op = op}, depth, -1);
                return;
            }
        }
    }

    std::vector<Instr> code_;
    int max_depth_ = 0;
};

inline cplx eval(const Expr& e, std::span<const cplx> x, const Input& u, const Params& params) {
    return Program(e, params)(x, u);
}

inline cplx eval(const Expr& e, std::span<const cplx> x, cplx u, const Params& params) {
    return eval(e, x, Input::from_complex(u), params);
}

/// Value with its gradient in x and its derivative in u.
struct Gradient {
    cplx value{};
    std::vector<cplx> dx;
    cplx du{};
};

namespace detail {

inline Gradient grad(const Node& n, std::span<const cplx> x, const Input& u, const Params& params) {
    Gradient g;
    g.dx.assign(x.size(), cplx{});
    auto scale_into = [](Gradient& dst, const Gradient& src, cplx k) {
        for (std::size_t j = 0; j < dst.dx.size(); ++j) dst.dx[j] += k * src.dx[j];
        dst.du += k * src.du;
    };
    switch (n.kind) {
        case NodeKind::Literal: g.value = n.literal; return g;
        case NodeKind::Imag: g.value = cplx{0.0, 1.0}; return g;
        case NodeKind::Param: {
            auto it = params.find(n.name);
            if (it == params.end()) throw UnboundParameter(n.name);
            g.value = it->second;
            return g;
        }
        case NodeKind::State:
            g.value = x[static_cast<std::size_t>(n.index - 1)];
            g.dx[static_cast<std::size_t>(n.index - 1)] = 1.0;
            return g;
        case NodeKind::Input:
            g.value = u.value;
            g.du = 1.0;
            return g;
        case NodeKind::Neg: {
            Gradient a = grad(*n.lhs, x, u, params);
            g.value = -a.value;
            scale_into(g, a, -1.0);
            return g;
        }
        case NodeKind::Add:
        case NodeKind::Sub: {
            Gradient a = grad(*n.lhs, x, u, params), b = grad(*n.rhs, x, u, params);
            const double s = n.kind == NodeKind::Add ? 1.0 : -1.0;
            g.value = a.value + s * b.value;
            scale_into(g, a, 1.0);
            scale_into(g, b, s);
            return g;
        }
        case NodeKind::Mul: {
            Gradient a = grad(*n.lhs, x, u, params), b = grad(*n.rhs, x, u, params);
            g.value = a.value * b.value;
            scale_into(g, a, b.value);
            scale_into(g, b, a.value);
            return g;
        }
        case NodeKind::Div: {
            Gradient a = grad(*n.lhs, x, u, params), b = grad(*n.rhs, x, u, params);
            g.value = checked_div(a.value, b.value);
            scale_into(g, a, 1.0 / b.value);
            scale_into(g, b, -a.value / (b.value * b.value));
            return g;
        }
        case NodeKind::Pow: {
            if (n.lhs->kind == NodeKind::Input) {
                g.value = input_pow(u, n.exponent);
                if (n.exponent.num != 0) {
                    const Rational lower(n.exponent.num - n.exponent.den, n.exponent.den);
                    g.du = n.exponent.value() * input_pow(u, lower);
                }
                return g;
            }
            Gradient a = grad(*n.lhs, x, u, params);
            g.value = ipow(a.value, n.exponent.num);
            if (n.exponent.num != 0)
                scale_into(g, a, static_cast<double>(n.exponent.num) * ipow(a.value, n.exponent.num - 1));
            return g;
        }
        case NodeKind::Call: {
            Gradient a = grad(*n.lhs, x, u, params);
            g.value = apply(n.function, a.value);
            cplx d{};
            switch (n.function) {
                case Function::Sin: d = std::cos(a.value); break;
                case Function::Cos: d = -std::sin(a.value); break;
                case Function::Exp: d = g.value; break;
                case Function::Sqrt: d = checked_div(0.5, g.value); break;
            }
            scale_into(g, a, d);
            return g;
        }
    }
    return g;
}

}  // namespace detail

/// Forward-mode derivatives of @p e: returns value, gradient in x, and d/du.
inline Gradient eval_grad(const Expr& e, std::span<const cplx> x, const Input& u, const Params& params) {
    if (e.empty()) throw InvalidPlant("cannot differentiate an empty expression");
    return detail::grad(e.root(), x, u, params);
}

inline Gradient eval_grad(const Expr& e, std::span<const cplx> x, cplx u, const Params& params) {
    return eval_grad(e, x, Input::from_complex(u), params);
}

}  // namespace koopfr
