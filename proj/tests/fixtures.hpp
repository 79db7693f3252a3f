#pragma once

// Shared plant fixtures and closed-form Bode tables for the test programs.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "koopfr/bode.hpp"
#include "koopfr/lti.hpp"
#include "koopfr/oracle.hpp"

namespace koopfr::fixtures {

// A = V diag(lambda) V^{-1} with real eigenvalues spread over [-3, -0.5].
inline LtiPlant random_stable(std::uint64_t seed, int d = 3) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Eigen::MatrixXd V(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) V(i, j) = (i == j ? 1.0 : 0.0) + 0.4 * U(rng);
    Eigen::VectorXd lambda(d);
    for (int i = 0; i < d; ++i) lambda[i] = -0.5 - 2.5 * (i + 0.5 + 0.3 * U(rng)) / d;
    LtiPlant p;
    p.A = V * lambda.asDiagonal() * V.inverse();
    p.b = Eigen::VectorXd::NullaryExpr(d, [&] { return U(rng); });
    p.c = Eigen::VectorXd::NullaryExpr(d, [&] { return U(rng); });
    return p;
}

inline PlantSpec linear1d(double a = -1.0, double b = 1.0) {
    return PlantSpec::from_text("linear1d", 1, {{"a", a}, {"b", b}}, {"a*x1 + b*u"}, "x1");
}

/// Bode table of an oracle response over a grid; method label "closed_form".
inline BodeTable closed_form_table(const oracle::TwoDExample& ex, oracle::Observable obs, OrderTag order,
                                   const Grid& grid) {
    BodeTable t;
    t.plant_name = "twod";
    t.observable_label = obs == oracle::Observable::X1 ? "x1" : "x2";
    t.order = order;
    t.grid = grid;
    for (double w : grid.values()) {
        oracle::TwoDExample at = ex;
        at.omega = w;
        BodeRow r;
        r.omega = w;
        r.H = oracle::closed_form_H(at, obs, order);
        r.method = method_name(Method::ClosedForm);
        t.rows.push_back(r);
    }
    finalize_rows(t.rows);
    return t;
}

/// The two-trace figure used as the SVG golden file: H1(w; x2) in blue, H2(w; x1) in orange.
inline std::vector<BodeTable> twod_reference_tables() {
    const Grid grid{0.1, 10.0, 25};
    const oracle::TwoDExample ex{-1.0, -2.0, 1.0};
    return {closed_form_table(ex, oracle::Observable::X2, OrderTag::harmonic(1), grid),
            closed_form_table(ex, oracle::Observable::X1, OrderTag::harmonic(2), grid)};
}

}  // namespace koopfr::fixtures
