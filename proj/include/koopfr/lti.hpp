#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "koopfr/errors.hpp"
#include "koopfr/system.hpp"

namespace koopfr {

/// x' = A x + b u, y = c^T x.
struct LtiPlant {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::VectorXd c;

    int dim() const { return static_cast<int>(A.rows()); }
};

inline constexpr int kMaxLtiDim = 16;

/// Outcome of the stability / distinct-eigenvalue check. When either fails the
/// closed-form response is still computed but should be treated as advisory.
struct LtiValidity {
    Eigen::VectorXcd eigenvalues;
    double min_gap = std::numeric_limits<double>::infinity();
    double max_real = -std::numeric_limits<double>::infinity();
    bool distinct = true;
    bool stable = true;

    bool advisory() const { return !(distinct && stable); }
    double slowest_decay() const { return -max_real; }
};

inline void check_shape(const LtiPlant& p) {
    const auto d = p.A.rows();
    if (d < 1 || d > kMaxLtiDim || p.A.cols() != d || p.b.size() != d || p.c.size() != d)
        throw InvalidPlant("LTI plant needs square A (1..16) with matching b and c");
}

inline LtiValidity check_lti(const LtiPlant& p) {
    check_shape(p);
    LtiValidity v;
    v.eigenvalues = p.A.eigenvalues();
    for (Eigen::Index i = 0; i < v.eigenvalues.size(); ++i) {
        v.max_real = std::max(v.max_real, v.eigenvalues[i].real());
        for (Eigen::Index j = i + 1; j < v.eigenvalues.size(); ++j)
            v.min_gap = std::min(v.min_gap, std::abs(v.eigenvalues[i] - v.eigenvalues[j]));
    }
    v.distinct = v.min_gap > 1e-9;
    v.stable = v.max_real < 0.0;
    return v;
}

/// c^T (i omega I - A)^{-1} b.
inline cplx lti_response(const LtiPlant& p, double omega) {
    check_shape(p);
    const cplx s{0.0, omega};
    const Eigen::VectorXcd eig = p.A.eigenvalues();
    for (Eigen::Index i = 0; i < eig.size(); ++i)
        if (std::abs(s - eig[i]) < 1e-9) throw SingularAtOmega("i*omega coincides with an eigenvalue of A");
    const Eigen::MatrixXcd M = s * Eigen::MatrixXcd::Identity(p.dim(), p.dim()) - p.A.cast<cplx>();
    const Eigen::VectorXcd r = M.partialPivLu().solve(p.b.cast<cplx>());
    return p.c.cast<cplx>().dot(r);  // dot() conjugates its first argument; c is real
}

struct SkewEigencheck {
    Eigen::MatrixXcd block;        // [A b; 0 i omega]
    Eigen::VectorXcd right;        // (r, 1), r = (i omega I - A)^{-1} b
    double left_residual = 0.0;    // |e^T M - i omega e^T|, e = (0, ..., 0, 1)
    double right_residual = 0.0;   // |M v - i omega v|
};

inline SkewEigencheck skew_eigencheck(const LtiPlant& p, double omega) {
    check_shape(p);
    const int d = p.dim();
    const cplx s{0.0, omega};
    SkewEigencheck out;
    out.block = Eigen::MatrixXcd::Zero(d + 1, d + 1);
    out.block.topLeftCorner(d, d) = p.A.cast<cplx>();
    out.block.topRightCorner(d, 1) = p.b.cast<cplx>();
    out.block(d, d) = s;

    const Eigen::MatrixXcd M = s * Eigen::MatrixXcd::Identity(d, d) - p.A.cast<cplx>();
    out.right.resize(d + 1);
    out.right.head(d) = M.partialPivLu().solve(p.b.cast<cplx>());
    out.right[d] = 1.0;

    Eigen::RowVectorXcd e = Eigen::RowVectorXcd::Zero(d + 1);
    e[d] = 1.0;
    out.left_residual = (e * out.block - s * e).norm();
    out.right_residual = (out.block * out.right - s * out.right).norm();
    return out;
}

/// Expression form of the LTI plant: parameters A<i>_<j>, b<i>, c<i> hold the entries.
inline PlantSpec to_plant_spec(const LtiPlant& p, std::string name = "lti") {
    check_shape(p);
    const int d = p.dim();
    Params params;
    std::vector<std::string> dyn;
    std::string g;
    for (int i = 1; i <= d; ++i) {
        std::string row;
        for (int j = 1; j <= d; ++j) {
            const std::string a = "A" + std::to_string(i) + "_" + std::to_string(j);
            params[a] = p.A(i - 1, j - 1);
            row += a + "*x" + std::to_string(j) + " + ";
        }
        const std::string bi = "b" + std::to_string(i), ci = "c" + std::to_string(i);
        params[bi] = p.b[i - 1];
        params[ci] = p.c[i - 1];
        dyn.push_back(row + bi + "*u");
        g += (i > 1 ? " + " : "") + ci + "*x" + std::to_string(i);
    }
    return PlantSpec::from_text(std::move(name), d, std::move(params), dyn, g);
}

}  // namespace koopfr
