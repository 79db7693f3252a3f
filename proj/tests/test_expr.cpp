#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "koopfr/expr.hpp"

using namespace koopfr;

namespace {

constexpr double kPi = std::numbers::pi;

TEST(ExprParse, ParamTimesStatePlusSquare) {
    const Expr e = parse("a1*x1 + x2^2", 2, {"a1"});
    EXPECT_EQ(e.sexpr(), "Add(Mul(a1, x1), Pow(x2, 2))");
}

TEST(ExprParse, RationalExponentOnInput) {
    const Expr e = parse("u^(1/2)", 1);
    EXPECT_EQ(e.sexpr(), "Pow(u, 1/2)");
    EXPECT_EQ(e.root().exponent, Rational(1, 2));
}

TEST(ExprParse, OutOfRangeStateIsUnknownIdentifier) {
    try {
        parse("x3 + 1", 2);
        FAIL() << "expected UnknownIdentifier";
    } catch (const UnknownIdentifier& e) {
        EXPECT_EQ(e.name(), "x3");
    }
    EXPECT_THROW(parse("x0", 2), UnknownIdentifier);
    EXPECT_THROW(parse("k*x1", 2), UnknownIdentifier);
    EXPECT_THROW(parse("tan(x1)", 2), UnknownIdentifier);
}

TEST(ExprParse, SyntaxErrorReportsOffset) {
    try {
        parse("x1 + * 2", 1);
        FAIL() << "expected SyntaxError";
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.offset(), 5u);
    }
    EXPECT_THROW(parse("", 1), SyntaxError);
    EXPECT_THROW(parse("   ", 1), SyntaxError);
    EXPECT_THROW(parse("(x1 + 1", 1), SyntaxError);
    EXPECT_THROW(parse("x1 x1", 1), SyntaxError);
    EXPECT_THROW(parse("sin x1", 1), SyntaxError);
}

TEST(ExprParse, ExponentRules) {
    EXPECT_THROW(parse("x1^(1/2)", 1), BadExponent);
    EXPECT_THROW(parse("x1^-1", 1), BadExponent);
    EXPECT_THROW(parse("x1^2.5", 1), BadExponent);
    EXPECT_THROW(parse("(2*u)^(1/2)", 1), BadExponent);
    EXPECT_THROW(parse("x1^a", 1, {"a"}), BadExponent);
    EXPECT_EQ(parse("u^-1", 1).sexpr(), "Pow(u, -1)");
    EXPECT_EQ(parse("u^(2/4)", 1).sexpr(), "Pow(u, 1/2)");
    EXPECT_EQ(parse("x1^2^3", 1).sexpr(), "Pow(x1, 8)");
    EXPECT_EQ(parse("(u)^(1/3)", 1).sexpr(), "Pow(u, 1/3)");
}

TEST(ExprParse, Precedence) {
    EXPECT_EQ(parse("-x1^2", 1).sexpr(), "Neg(Pow(x1, 2))");
    EXPECT_EQ(parse("-x1*x1", 1).sexpr(), "Mul(Neg(x1), x1)");
    EXPECT_EQ(parse("x1 - x1 - 1", 1).sexpr(), "Sub(Sub(x1, x1), 1)");
    EXPECT_EQ(parse("x1 / 2 / 3", 1).sexpr(), "Div(Div(x1, 2), 3)");
    EXPECT_EQ(parse(" 2 *( x1+u ) ", 1).sexpr(), "Mul(2, Add(x1, u))");
    EXPECT_EQ(parse("exp(i*u) + 1.5e-3", 1).sexpr(), "Add(exp(Mul(i, u)), 0.0015)");
}

TEST(ExprEval, Arithmetic) {
    const Expr e = parse("x1 + x2^2", 2);
    const std::vector<cplx> x{1.0, 2.0};
    EXPECT_EQ(eval(e, x, cplx{}, {}), cplx(5.0, 0.0));
}

TEST(ExprEval, IdentityObservable) {
    const std::vector<cplx> x{0.0};
    const cplx v = eval(parse("u", 1), x, std::polar(1.0, kPi / 2), {});
    EXPECT_NEAR(v.real(), 0.0, 1e-15);
    EXPECT_NEAR(v.imag(), 1.0, 1e-15);
}

// Oracle: continue sqrt along u = e^{i theta}, theta in [0, 2 pi], picking at
// each small step the root closest to the previous one.
cplx continued_sqrt(double theta_end, int steps) {
    cplx root{1.0};
    for (int k = 1; k <= steps; ++k) {
        const cplx u = std::polar(1.0, theta_end * k / steps);
        const cplx r = std::sqrt(u);
        root = std::abs(r - root) < std::abs(-r - root) ? r : -r;
    }
    return root;
}

TEST(ExprEval, FractionalPowerFollowsTrackedPhase) {
    const Expr e = parse("u^(1/2)", 1);
    const std::vector<cplx> x{0.0};
    const cplx oracle = continued_sqrt(2.0 * kPi, 1000);
    const cplx v = eval(e, x, Input::polar(1.0, 2.0 * kPi), {});
    EXPECT_NEAR(oracle.real(), -1.0, 1e-12);
    EXPECT_NEAR(std::abs(v - oracle), 0.0, 1e-12);
    // The principal branch would give +1.
    EXPECT_NEAR(std::abs(eval(e, x, cplx{1.0}, {}) - 1.0), 0.0, 1e-15);
}

TEST(ExprEval, Errors) {
    const std::vector<cplx> x{0.0};
    EXPECT_THROW(eval(parse("1/x1", 1), x, cplx{1.0}, {}), DivisionByZero);
    EXPECT_THROW(eval(parse("a*x1", 1, {"a"}), x, cplx{1.0}, {}), UnboundParameter);
    EXPECT_THROW(eval(parse("x1^(0-0)/x1", 1), x, cplx{1.0}, {}), DivisionByZero);
}

TEST(ExprGrad, Polynomial) {
    const Expr e = parse("a1*x1 + x2^2", 2, {"a1"});
    const std::vector<cplx> x{3.0, 2.0};
    const Gradient g = eval_grad(e, x, cplx{}, {{"a1", -1.0}});
    EXPECT_EQ(g.value, cplx(1.0));
    EXPECT_EQ(g.dx[0], cplx(-1.0));
    EXPECT_EQ(g.dx[1], cplx(4.0));
    EXPECT_EQ(g.du, cplx(0.0));
}

TEST(ExprGrad, InputSquare) {
    const std::vector<cplx> x{0.0};
    const Gradient g = eval_grad(parse("u^2", 1), x, cplx{1.0, 1.0}, {});
    EXPECT_NEAR(std::abs(g.du - cplx(2.0, 2.0)), 0.0, 1e-15);
}

TEST(ExprGrad, StateTimesInput) {
    const std::vector<cplx> x{0.0, 5.0};
    const Gradient g = eval_grad(parse("x2*u", 2), x, cplx{0.0, 2.0}, {});
    EXPECT_EQ(g.dx[0], cplx(0.0));
    EXPECT_EQ(g.dx[1], cplx(0.0, 2.0));
    EXPECT_EQ(g.du, cplx(5.0));
}

TEST(ExprGrad, FractionalInputPower) {
    // d/du u^(1/3) = (1/3) u^(-2/3) on the tracked branch.
    const std::vector<cplx> x{0.0};
    const Input u = Input::polar(2.0, 5.0);
    const Gradient g = eval_grad(parse("u^(1/3)", 1), x, u, {});
    const cplx expected = (1.0 / 3.0) * std::polar(std::pow(2.0, -2.0 / 3.0), -2.0 / 3.0 * 5.0);
    EXPECT_NEAR(std::abs(g.du - expected), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(g.value - std::polar(std::pow(2.0, 1.0 / 3.0), 5.0 / 3.0)), 0.0, 1e-14);
}

// ---------------------------------------------------------------------------
// Random expression generators

struct Gen {
    std::mt19937_64 rng;
    int dim;
    bool polynomial;  // restrict to +, -, *, integer powers

    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }
    int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

    Expr leaf() {
        switch (pick(polynomial ? 4 : 5)) {
            case 0: return Expr::literal(std::round(uniform(0.0, 5.0) * 1000.0) / 1000.0);
            case 1: return Expr::state(1 + pick(dim));
            case 2: return Expr::input();
            case 3: return Expr::param(pick(2) ? "p" : "q");
            default: return Expr::imag();
        }
    }

    Expr tree(int depth) {
        if (depth == 0) return leaf();
        const int kinds = polynomial ? 5 : 8;
        switch (pick(kinds)) {
            case 0: return Expr::add(tree(depth - 1), tree(depth - 1));
            case 1: return Expr::sub(tree(depth - 1), tree(depth - 1));
            case 2: return Expr::mul(tree(depth - 1), tree(depth - 1));
            case 3: return Expr::pow(tree(depth - 1), Rational(pick(4)));
            case 4: return polynomial ? Expr::neg(tree(depth - 1)) : Expr::pow(Expr::input(), Rational(pick(7) - 3, 1 + pick(4)));
            case 5: return Expr::div(tree(depth - 1), tree(depth - 1));
            case 6: return Expr::neg(tree(depth - 1));
            default: return Expr::call(static_cast<Function>(pick(4)), tree(depth - 1));
        }
    }
};

TEST(ExprProperty, PrintParseRoundTrip) {
    Gen gen{std::mt19937_64(1234), 3, false};
    for (int k = 0; k < 1000; ++k) {
        const Expr e = gen.tree(1 + k % 5);
        const std::string text = e.str();
        const Expr back = parse(text, 3, {"p", "q"});
        ASSERT_TRUE(back == e) << text << "\n  " << e.sexpr() << "\n  " << back.sexpr();
        ASSERT_EQ(back.str(), text);
    }
}

TEST(ExprProperty, GradientMatchesCentralDifferences) {
    Gen gen{std::mt19937_64(99), 3, true};
    const Params params{{"p", 0.7}, {"q", -1.3}};
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const double h = 1e-5;
    for (int k = 0; k < 300; ++k) {
        const Expr e = gen.tree(1 + k % 4);
        std::vector<cplx> x{{U(gen.rng), U(gen.rng)}, {U(gen.rng), U(gen.rng)}, {U(gen.rng), U(gen.rng)}};
        const cplx u{U(gen.rng), U(gen.rng)};
        const Gradient g = eval_grad(e, x, u, params);
        ASSERT_NEAR(std::abs(g.value - eval(e, x, u, params)), 0.0, 1e-12);
        for (std::size_t j = 0; j < x.size(); ++j) {
            auto xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const cplx fd = (eval(e, xp, u, params) - eval(e, xm, u, params)) / (2.0 * h);
            ASSERT_LE(std::abs(fd - g.dx[j]), 1e-6 * std::max(1.0, std::abs(g.dx[j]))) << e.str();
        }
        const cplx fd_u = (eval(e, x, u + h, params) - eval(e, x, u - h, params)) / (2.0 * h);
        ASSERT_LE(std::abs(fd_u - g.du), 1e-6 * std::max(1.0, std::abs(g.du))) << e.str();
    }
}

TEST(ExprProperty, EvaluationIsDeterministic) {
    Gen gen{std::mt19937_64(7), 2, false};
    const Params params{{"p", 0.3}, {"q", 2.0}};
    const std::vector<cplx> x{{0.3, 0.1}, {-0.2, 0.5}};
    const Input u = Input::polar(1.0, 0.4);
    for (int k = 0; k < 200; ++k) {
        const Expr e = gen.tree(3);
        cplx a, b;
        try {
            a = eval(e, x, u, params);
            b = eval(e, x, u, params);
        } catch (const DivisionByZero&) {
            continue;
        }
        if (std::isnan(a.real()) || std::isnan(a.imag())) continue;
        ASSERT_EQ(a, b);
    }
}

}  // namespace
