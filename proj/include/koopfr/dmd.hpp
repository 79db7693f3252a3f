#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "koopfr/errors.hpp"
#include "koopfr/response.hpp"
#include "koopfr/sim.hpp"

namespace koopfr {

struct DmdResult {
    std::vector<cplx> discrete_eigs;  // eigenvalues mu of the fitted one-step map
    std::vector<cplx> cont_eigs;      // log(mu) / dt, principal branch
    std::vector<cplx> amplitudes;     // y_k ~ sum_j amplitudes[j] mu_j^k, k = 0 at time t0
    int rank = 0;
    double residual = 0.0;  // |y - fit| / |y|
    double dt = 0.0;
    double t0 = 0.0;
    double vandermonde_condition = 0.0;
    bool ill_conditioned = false;  // condition number above 1e12
};

/// Delay-embedded (Hankel) DMD on a scalar sequence.
///
/// Snapshot pairs come from a Hankel matrix with @p delay rows; the one-step
/// map is fitted by SVD-truncated least squares, discarding singular values
/// below rank_tol * sigma_max. Amplitudes solve the Vandermonde least-squares
/// problem against the raw sequence.
inline DmdResult hankel_dmd(std::span<const cplx> y, double dt, int delay, double rank_tol = 1e-10, double t0 = 0.0) {
    if (delay < 1) throw ConfigError("delay must be >= 1");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    const auto n = static_cast<Eigen::Index>(y.size());
    if (n < 2 * delay + 2) throw ConfigError("sequence shorter than 2*delay + 2");

    const Eigen::Index cols = n - delay + 1;
    Eigen::MatrixXcd H(delay, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < delay; ++i) H(i, j) = y[static_cast<std::size_t>(i + j)];
    const Eigen::MatrixXcd X = H.leftCols(cols - 1);
    const Eigen::MatrixXcd Y = H.rightCols(cols - 1);

    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sigma = svd.singularValues();
    if (sigma.size() == 0 || !(sigma[0] > 0.0)) throw RankDeficient();
    Eigen::Index r = 0;
    while (r < sigma.size() && sigma[r] > rank_tol * sigma[0]) ++r;
    if (r == 0) throw RankDeficient();

    const Eigen::MatrixXcd U = svd.matrixU().leftCols(r);
    const Eigen::MatrixXcd V = svd.matrixV().leftCols(r);
    const Eigen::VectorXd inv_sigma = sigma.head(r).cwiseInverse();
    const Eigen::MatrixXcd Atilde = U.adjoint() * Y * V * inv_sigma.asDiagonal();
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(Atilde, false);
    const Eigen::VectorXcd mu = es.eigenvalues();

    DmdResult out;
    out.rank = static_cast<int>(r);
    out.dt = dt;
    out.t0 = t0;
    for (Eigen::Index j = 0; j < r; ++j) {
        out.discrete_eigs.push_back(mu[j]);
        out.cont_eigs.push_back(std::log(mu[j]) / dt);
    }

    Eigen::MatrixXcd vander(n, r);
    for (Eigen::Index j = 0; j < r; ++j) {
        cplx p{1.0};
        for (Eigen::Index k = 0; k < n; ++k) {
            vander(k, j) = p;
            p *= mu[j];
        }
    }
    Eigen::VectorXcd rhs(n);
    for (Eigen::Index k = 0; k < n; ++k) rhs[k] = y[static_cast<std::size_t>(k)];

    Eigen::BDCSVD<Eigen::MatrixXcd> vsvd(vander, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& vs = vsvd.singularValues();
    out.vandermonde_condition =
        vs[vs.size() - 1] > 0.0 ? vs[0] / vs[vs.size() - 1] : std::numeric_limits<double>::infinity();
    out.ill_conditioned = !(out.vandermonde_condition <= 1e12);

    const Eigen::VectorXcd alpha = vsvd.solve(rhs);
    for (Eigen::Index j = 0; j < r; ++j) out.amplitudes.push_back(alpha[j]);
    const double ynorm = rhs.norm();
    out.residual = ynorm > 0.0 ? (vander * alpha - rhs).norm() / ynorm : 0.0;
    return out;
}

/// DMD over samples [first, first + count) of a trajectory's output, taking every stride-th sample.
inline DmdResult hankel_dmd(const Trajectory& tr, std::size_t first, std::size_t count, int delay,
                            double rank_tol = 1e-10, std::size_t stride = 1) {
    if (stride < 1 || first + (count - 1) * stride >= tr.size())
        throw ConfigError("DMD window exceeds the trajectory");
    std::vector<cplx> y(count);
    for (std::size_t k = 0; k < count; ++k) y[k] = tr.outputs[first + k * stride];
    return hankel_dmd(y, tr.dt * static_cast<double>(stride), delay, rank_tol, tr.time(first));
}

/// Koopman mode at i*Omega read off as a frequency response.
///
/// The amplitude is referred back to t = 0 along e^{i Omega t} and divided by
/// u0^n (or u0^{1/n}).
inline FreqResponse mode_to_response(const DmdResult& r, double omega, const OrderTag& order, cplx u0) {
    const double W = order.frequency(omega);
    const cplx target{0.0, W};
    if (r.cont_eigs.empty()) throw EigenvalueNotFound(W, cplx{std::numeric_limits<double>::quiet_NaN()});
    std::size_t best = 0;
    for (std::size_t j = 1; j < r.cont_eigs.size(); ++j)
        if (std::abs(r.cont_eigs[j] - target) < std::abs(r.cont_eigs[best] - target)) best = j;
    if (std::abs(r.cont_eigs[best] - target) > 1e-3 * omega) throw EigenvalueNotFound(W, r.cont_eigs[best]);

    FreqResponse out;
    out.omega = omega;
    out.order = order;
    out.value = r.amplitudes[best] * std::polar(1.0, -W * r.t0) / input_power(u0, order);
    out.method = Method::Dmd;
    out.err_estimate = r.residual * (1.0 + std::abs(out.value));
    out.u0 = u0;
    return out;
}

}  // namespace koopfr
