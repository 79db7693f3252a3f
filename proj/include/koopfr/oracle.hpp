#pragma once

// Closed forms for the forced two-state plant
//
//   x1' = a1 x1 + x2^2,   x2' = a2 x2 + u,   u = u0 e^{i omega t},
//
// with a1, a2 < 0, a1 != a2, a1 != 2 a2: principal Koopman eigenfunctions of the
// skew-product system, harmonic responses, the six-state lifted linear system
// over (x1, x2, u, x2^2, x2 u, u^2), and the Koopman mode expansion of x(t).

#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "koopfr/errors.hpp"
#include "koopfr/expr.hpp"
#include "koopfr/response.hpp"
#include "koopfr/system.hpp"

namespace koopfr::oracle {

struct TwoDExample {
    double a1 = -1.0;
    double a2 = -2.0;
    double omega = 1.0;

    void validate() const {
        if (!(a1 < 0.0) || !(a2 < 0.0)) throw DegenerateParameters("a1 and a2 must be negative");
        if (!(omega > 0.0)) throw DegenerateParameters("omega must be positive");
        if (std::abs(a1 - a2) <= 1e-12) throw DegenerateParameters("a1 must differ from a2");
        if (std::abs(a1 - 2.0 * a2) <= 1e-12) throw DegenerateParameters("a1 = 2 a2: phi_a1 is undefined");
    }
};

enum class Observable { X1, X2 };

/// The plant with parameters a1, a2 observed through x1 or x2.
inline PlantSpec twod_plant(const TwoDExample& ex, Observable obs = Observable::X1) {
    return PlantSpec::from_text("twod", 2, {{"a1", ex.a1}, {"a2", ex.a2}}, {"a1*x1 + x2^2", "a2*x2 + u"},
                                obs == Observable::X1 ? "x1" : "x2");
}

struct Eigenfunctions {
    Expr phi_a1;  // eigenvalue a1
    Expr phi_a2;  // eigenvalue a2
    Expr phi_iw;  // eigenvalue i omega
};

inline Eigenfunctions eigenfunctions(const TwoDExample& ex) {
    ex.validate();
    auto num = [](double v) { return "(" + detail::format_double(v) + ")"; };
    const std::string a1 = num(ex.a1), a2 = num(ex.a2), w = num(ex.omega);
    const std::string d12 = "(" + a1 + " - 2*" + a2 + ")";
    const std::string dw = "(" + a1 + " - " + a2 + " - i*" + w + ")";
    const std::string d2w = "(" + a1 + " - i*2*" + w + ")";
    Eigenfunctions ef;
    ef.phi_a1 = parse("x1 + x2^2/" + d12 + " + 2*x2*u/(" + d12 + "*" + dw + ") + 2*u^2/(" + d12 + "*" + dw + "*" +
                          d2w + ")",
                      2);
    ef.phi_a2 = parse("x2 + u/(" + a2 + " - i*" + w + ")", 2);
    ef.phi_iw = parse("u", 2);
    return ef;
}

/// Harmonic responses of x1 and x2. Only H2(x1) and H1(x2) are non-zero.
inline cplx closed_form_H(const TwoDExample& ex, Observable obs, const OrderTag& order) {
    ex.validate();
    const cplx iw{0.0, ex.omega};
    if (order.kind != OrderTag::Kind::Harmonic) {
        if (order.n != 1) return {};
        return closed_form_H(ex, obs, OrderTag::harmonic(1));
    }
    if (obs == Observable::X1 && order.n == 2) return 1.0 / ((2.0 * iw - ex.a1) * (iw - ex.a2) * (iw - ex.a2));
    if (obs == Observable::X2 && order.n == 1) return 1.0 / (iw - ex.a2);
    return {};
}

inline FreqResponse closed_form_response(const TwoDExample& ex, Observable obs, const OrderTag& order, cplx u0 = 1.0) {
    FreqResponse r;
    r.omega = ex.omega;
    r.order = order;
    r.value = closed_form_H(ex, obs, order);
    r.method = Method::ClosedForm;
    r.u0 = u0;
    return r;
}

/// Linear system over z = (x1, x2, u, x2^2, x2 u, u^2).
struct LiftedSystem {
    TwoDExample ex;
    Eigen::Matrix<cplx, 6, 6> matrix;

    /// 2 / ((s - a1)(s - 2 a2)(s - (a2 + i omega))).
    cplx transfer_u2_to_y(cplx s) const {
        const cplx iw{0.0, ex.omega};
        return 2.0 / ((s - ex.a1) * (s - 2.0 * ex.a2) * (s - (ex.a2 + iw)));
    }

    /// Transfer from z6 = u^2 to z1 = y computed from the matrix: e1^T (sI - A)^{-1} m.
    cplx transfer_u2_to_y_from_matrix(cplx s) const { return transfer_from(5, s); }

    /// Transfer from z3 = u to z1 = y with z6 held at zero.
    cplx transfer_u_to_y_from_matrix(cplx s) const { return transfer_from(2, s); }

   private:
    // z3 = u and z6 = u^2 are both treated as external signals, so the
    // realization is the 4x4 block over (x1, x2, x2^2, x2 u).
    cplx transfer_from(int input, cplx s) const {
        static const std::vector<int> keep = {0, 1, 3, 4};
        const auto n = static_cast<Eigen::Index>(keep.size());
        Eigen::MatrixXcd A(n, n);
        Eigen::VectorXcd m(n);
        for (Eigen::Index r = 0; r < n; ++r) {
            m[r] = matrix(keep[static_cast<std::size_t>(r)], input);
            for (Eigen::Index c = 0; c < n; ++c)
                A(r, c) = matrix(keep[static_cast<std::size_t>(r)], keep[static_cast<std::size_t>(c)]);
        }
        const Eigen::MatrixXcd R = s * Eigen::MatrixXcd::Identity(n, n) - A;
        return R.partialPivLu().solve(m)[0];
    }
};

inline LiftedSystem lifted_system(const TwoDExample& ex) {
    ex.validate();
    const cplx iw{0.0, ex.omega};
    LiftedSystem L{ex, Eigen::Matrix<cplx, 6, 6>::Zero()};
    auto& M = L.matrix;
    M(0, 0) = ex.a1;
    M(0, 3) = 1.0;
    M(1, 1) = ex.a2;
    M(1, 2) = 1.0;
    M(2, 2) = iw;
    M(3, 3) = 2.0 * ex.a2;
    M(3, 4) = 2.0;
    M(4, 4) = ex.a2 + iw;
    M(4, 5) = 1.0;
    M(5, 5) = 2.0 * iw;
    return L;
}

/// Koopman mode expansion of (x1(t), x2(t)) from (x0, u0), term by term.
inline std::pair<cplx, cplx> kmd_reconstruct(const TwoDExample& ex, const CVector& x0, cplx u0, double t) {
    const Eigenfunctions ef = eigenfunctions(ex);
    const auto xs = as_span(x0);
    const Input u = Input::from_complex(u0);
    const cplx pa1 = eval(ef.phi_a1, xs, u, {});
    const cplx pa2 = eval(ef.phi_a2, xs, u, {});
    const cplx piw = eval(ef.phi_iw, xs, u, {});

    const double a1 = ex.a1, a2 = ex.a2;
    const cplx iw{0.0, ex.omega};
    const cplx x1 = std::exp(a1 * t) * pa1                                              //
                    + std::exp(2.0 * a2 * t) * pa2 * pa2 * (-1.0 / (a1 - 2.0 * a2))     //
                    + std::exp((a2 + iw) * t) * pa2 * piw * (2.0 / ((iw - a1 + a2) * (iw - a2)))  //
                    + std::exp(2.0 * iw * t) * piw * piw * closed_form_H(ex, Observable::X1, OrderTag::harmonic(2));
    const cplx x2 = std::exp(a2 * t) * pa2  //
                    + std::exp(iw * t) * piw * closed_form_H(ex, Observable::X2, OrderTag::harmonic(1));
    return {x1, x2};
}

}  // namespace koopfr::oracle
