#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

#include "fixtures.hpp"
#include "koopfr/lti.hpp"
#include "koopfr/response.hpp"

using namespace koopfr;

namespace {

LtiPlant scalar_plant() {
    LtiPlant p;
    p.A = Eigen::MatrixXd::Constant(1, 1, -1.0);
    p.b = Eigen::VectorXd::Ones(1);
    p.c = Eigen::VectorXd::Ones(1);
    return p;
}

using fixtures::random_stable;

TEST(LtiResponse, ScalarPlant) {
    EXPECT_LT(std::abs(lti_response(scalar_plant(), 1.0) - cplx(0.5, -0.5)), 1e-15);
}

TEST(LtiResponse, DiagonalPlantSecondState) {
    LtiPlant p;
    p.A = Eigen::Vector2d(-1.0, -2.0).asDiagonal();
    p.b = Eigen::Vector2d(0.0, 1.0);
    p.c = Eigen::Vector2d(0.0, 1.0);
    EXPECT_LT(std::abs(lti_response(p, 1.0) - cplx(0.4, -0.2)), 1e-15);
}

TEST(LtiResponse, ZeroReadout) {
    LtiPlant p = random_stable(3);
    p.c.setZero();
    EXPECT_EQ(lti_response(p, 2.0), cplx(0.0));
}

TEST(LtiResponse, SingularAtOmega) {
    LtiPlant p;
    p.A.resize(2, 2);
    p.A << 0.0, 1.0, -1.0, 0.0;  // eigenvalues +-i
    p.b = Eigen::Vector2d(0.0, 1.0);
    p.c = Eigen::Vector2d(1.0, 0.0);
    EXPECT_THROW(lti_response(p, 1.0), SingularAtOmega);
    EXPECT_NO_THROW(lti_response(p, 2.0));
}

TEST(LtiResponse, ShapeIsChecked) {
    LtiPlant p = scalar_plant();
    p.b = Eigen::VectorXd::Ones(2);
    EXPECT_THROW(lti_response(p, 1.0), InvalidPlant);
}

TEST(LtiValidity, FlagsRepeatedAndUnstableSpectra) {
    EXPECT_FALSE(check_lti(random_stable(1)).advisory());
    LtiPlant rep;
    rep.A = Eigen::Matrix2d::Identity() * -1.0;
    rep.b = rep.c = Eigen::Vector2d(1.0, 1.0);
    EXPECT_FALSE(check_lti(rep).distinct);
    EXPECT_TRUE(check_lti(rep).advisory());
    LtiPlant unstable = scalar_plant();
    unstable.A(0, 0) = 0.5;
    EXPECT_FALSE(check_lti(unstable).stable);
    EXPECT_DOUBLE_EQ(check_lti(scalar_plant()).slowest_decay(), 1.0);
}

TEST(SkewEigencheck, ScalarPlant) {
    const auto r = skew_eigencheck(scalar_plant(), 1.0);
    EXPECT_LT(std::abs(r.right[0] - 1.0 / cplx(1.0, 1.0)), 1e-15);
    EXPECT_EQ(r.right[1], cplx(1.0));
    EXPECT_LT(r.right_residual, 1e-12);
    EXPECT_EQ(r.left_residual, 0.0);
}

TEST(SkewEigencheck, RandomStablePlants) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto r = skew_eigencheck(random_stable(seed), 0.3 + seed);
        EXPECT_LT(r.right_residual, 1e-10);
        EXPECT_LT(r.left_residual, 1e-10);
    }
}

TEST(ToPlantSpec, MatchesTheMatrixForm) {
    const LtiPlant p = random_stable(11);
    const PlantSpec spec = to_plant_spec(p);
    const SkewSystem sys(spec, 1.0, 1.0);
    CVector x(3);
    x << cplx(0.1, 0.2), cplx(-0.4, 0.0), cplx(0.3, -0.7);
    const cplx u{0.6, -0.8};
    CVector f;
    sys.field(x, Input::from_complex(u), f);
    const Eigen::VectorXcd expected = p.A.cast<cplx>() * x + p.b.cast<cplx>() * u;
    EXPECT_LT((f - expected).norm(), 1e-14);
    EXPECT_LT(std::abs(sys.observe(x, Input::from_complex(u)) - (p.c.cast<cplx>().transpose() * x)(0)), 1e-14);
}

// The simulated pipeline against the closed form across a log grid.
void check_pipeline(const LtiPlant& p) {
    const PlantSpec spec = to_plant_spec(p);
    const double decay = check_lti(p).slowest_decay();
    for (int k = 0; k < 20; ++k) {
        const double w = 0.1 * std::pow(100.0, k / 19.0);
        const SkewSystem sys(spec, w, 1.0);
        SimSettings s;
        s.slowest_decay = decay;
        const double T = std::max(default_horizon(w, s), 40.0 / decay);
        const auto tr = integrate(sys, CVector::Zero(p.dim()), T, default_dt(w));
        const auto rep = find_steady_state(tr, 1e-7);
        ASSERT_TRUE(rep.periodic) << w;
        const auto h = harmonic_average(tr, OrderTag::harmonic(1), 16, rep);
        EXPECT_LT(std::abs(h.value - lti_response(p, w)), 1e-5) << "omega = " << w;
        EXPECT_LT(std::abs(harmonic_average(tr, OrderTag::harmonic(2), 16, rep).value), 1e-6) << w;
    }
}

TEST(LtiPipeline, ScalarPlantAcrossGrid) { check_pipeline(scalar_plant()); }
TEST(LtiPipeline, RandomThreeStatePlantAcrossGrid) { check_pipeline(random_stable(42)); }

}  // namespace
