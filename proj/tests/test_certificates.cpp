#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "koopcert/certificates.hpp"

using namespace koopcert;

TEST(Hoeffding, ReferenceValue) {
    const long double expected = std::sqrt(8.0L * std::log(20.0L) / 800.0L);
    const HoeffdingBound h = hoeffding_epsilon(800, 0.1);
    EXPECT_NEAR(h.epsilon, static_cast<double>(expected), 1e-15);
    EXPECT_NEAR(h.epsilon, 0.173082, 1e-6);
    EXPECT_NEAR(h.failure_probability(), 0.1, 1e-14);
}

TEST(Hoeffding, QuadruplingHalves) {
    for (std::int64_t m : {1, 7, 800, 123456}) {
        const double a = hoeffding_epsilon(m, 0.05).epsilon;
        const double b = hoeffding_epsilon(4 * m, 0.05).epsilon;
        EXPECT_NEAR(b, 0.5 * a, 1e-15 * a);
    }
}

TEST(Hoeffding, RoundTripRandom) {
    std::mt19937_64 gen(1);
    std::uniform_int_distribution<std::int64_t> m(1, 10000000);
    std::uniform_real_distribution<double> d(1e-6, 0.999);
    for (int i = 0; i < 200; ++i) {
        const HoeffdingBound h = hoeffding_epsilon(m(gen), d(gen));
        EXPECT_NEAR(h.failure_probability() / h.delta, 1.0, 1e-12);
    }
}

TEST(Hoeffding, SupNormScales) {
    EXPECT_NEAR(hoeffding_epsilon(100, 0.1, 2.5).epsilon, 2.5 * hoeffding_epsilon(100, 0.1).epsilon, 1e-15);
}

TEST(Hoeffding, RejectsImpossibleConfidence) {
    EXPECT_THROW((void)hoeffding_epsilon(100, 2.0), InputError);
    EXPECT_THROW((void)hoeffding_epsilon(100, 0.0), InputError);
    EXPECT_THROW((void)hoeffding_epsilon(0, 0.1), InputError);
}

TEST(RequiredSamples, ReferenceValue) {
    const long double raw = 8.0L * std::log(40.0L) / 0.0025L;
    EXPECT_EQ(required_samples(0.05, 0.1, 10), static_cast<std::int64_t>(std::ceil(raw)));
    EXPECT_EQ(required_samples(0.05, 0.1, 10), 11805);
}

TEST(RequiredSamples, RankFloor) { EXPECT_EQ(required_samples(100.0, 0.1, 17), 17); }

TEST(RequiredSamples, ControlsIncreaseSamples) {
    EXPECT_GT(required_samples(0.05, 0.1, 10, 1.0, 1), required_samples(0.05, 0.1, 10, 1.0, 0));
    EXPECT_GT(required_samples(0.05, 0.1, 10, 1.0, 3), required_samples(0.05, 0.1, 10, 1.0, 1));
}

TEST(RequiredSamples, InvertsHoeffdingAtDoubledFailureProbability) {
    for (std::int64_t m : {50, 800, 12345, 1000000})
        for (double delta : {0.01, 0.1, 0.2}) {
            const double eps = hoeffding_epsilon(m, delta).epsilon;
            const std::int64_t back = required_samples(eps, 2.0 * delta, 1);
            EXPECT_GE(back, m);
            EXPECT_LE(back, m + 1);
        }
}

TEST(GapConstants, ThreeEigenvalues) {
    const SpectralGapConstants g = gap_constants({1.0, 0.5, 0.25}, 2);
    EXPECT_NEAR(g.delta_r, 0.125, 1e-15);
    const double expected = 1.0 / std::sqrt(0.5) + (3.0 / (0.125 * 0.5)) * 2.0 * 1.0;
    EXPECT_NEAR(g.c_r, expected, 1e-12);
    EXPECT_NEAR(g.c_r, 97.4142, 1e-4);
}

TEST(GapConstants, RankOne) {
    const SpectralGapConstants g = gap_constants({1.0, 0.5}, 1);
    EXPECT_NEAR(g.delta_r, 0.25, 1e-15);
    EXPECT_NEAR(g.c_r, 17.0, 1e-12);
}

TEST(GapConstants, Traces) {
    const SpectralGapConstants g = gap_constants({1.0, 0.5}, 1, 3.0, 4.0);
    EXPECT_NEAR(g.c_r, 1.0 + (2.0 / 0.25) * 4.0 * 2.0, 1e-12);
}

TEST(GapConstants, EqualEigenvaluesRejected) {
    EXPECT_THROW((void)gap_constants({1.0, 1.0, 0.5}, 2), GapError);
    EXPECT_THROW((void)gap_constants({1.0, 0.5, 0.5}, 2), GapError);
    EXPECT_THROW((void)gap_constants({1.0}, 1), InputError);
}

TEST(ControlFactor, ZeroControl) {
    const ControlCertificate c = control_factor(Eigen::VectorXd::Zero(1), ControlBox{Eigen::VectorXd::Constant(1, -1),
                                                                                    Eigen::VectorXd::Constant(1, 1)});
    EXPECT_EQ(c.factor, 1.0);
}

TEST(ControlFactor, UnitBox) {
    const ControlCertificate c = control_factor(Eigen::VectorXd::Constant(1, 1.0),
                                                ControlBox{Eigen::VectorXd::Constant(1, -1), Eigen::VectorXd::Constant(1, 1)});
    EXPECT_EQ(c.gamma(0), 1.0);
    EXPECT_EQ(c.factor, 3.0);
}

TEST(ControlFactor, Ball) {
    const ControlCertificate c = control_factor(Eigen::Vector2d(1.0, 1.0), ControlBall{2.0, 2});
    EXPECT_EQ(c.gamma, Eigen::Vector2d(2.0, 2.0));
    EXPECT_DOUBLE_EQ(c.factor, 3.0);
}

TEST(ControlFactor, RejectsOutsideOrDegenerateSets) {
    const ControlBox box{Eigen::VectorXd::Constant(1, -1), Eigen::VectorXd::Constant(1, 1)};
    EXPECT_THROW((void)control_factor(Eigen::VectorXd::Constant(1, 1.5), box), InputError);
    const ControlBox shifted{Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 1)};
    EXPECT_THROW((void)control_factor(Eigen::VectorXd::Constant(1, 0.5), shifted), InputError);
    EXPECT_THROW((void)control_factor(Eigen::Vector2d(2.0, 2.0), ControlBall{2.0, 2}), InputError);
}

TEST(Certify, ProductOfConstants) {
    const SpectralGapConstants g = gap_constants({1.0, 0.5, 0.25}, 2);
    HoeffdingBound h;
    h.epsilon = 0.1;
    EXPECT_NEAR(certify_bound(h, g), 9.74142, 1e-5);
    EXPECT_NEAR(certify_bound(h, g), 0.1 * g.c_r, 1e-15);
}

TEST(Certify, InvarianceTail) {
    const SpectralGapConstants g = gap_constants({1.0, 0.5, 0.25}, 2);
    HoeffdingBound h;
    h.epsilon = 0.1;
    const double m = std::exp(1.0 * 0.05 / 2.0);
    const double with_tail = certify_bound(h, g, std::nullopt, InvarianceTerm{0.25, m});
    EXPECT_NEAR(with_tail - certify_bound(h, g), 0.5 * 1.025315, 1e-6);
    EXPECT_NEAR(with_tail - certify_bound(h, g), 0.512658, 1e-6);
}

TEST(Certify, ControlFactorTriplesEstimationTerm) {
    const SpectralGapConstants g = gap_constants({1.0, 0.5, 0.25}, 2);
    HoeffdingBound h;
    h.epsilon = 0.1;
    const ControlCertificate c = control_factor(Eigen::VectorXd::Constant(1, 1.0),
                                                ControlBox{Eigen::VectorXd::Constant(1, -1), Eigen::VectorXd::Constant(1, 1)});
    EXPECT_NEAR(certify_bound(h, g, c), 3.0 * certify_bound(h, g), 1e-14);
    ControlCertificate q = c;
    q.quadratic_coefficient = 2.0;
    q.lag = 0.1;
    EXPECT_NEAR(certify_bound(h, g, q), 3.0 * certify_bound(h, g) + 2.0 * 0.01, 1e-14);
}

TEST(Certify, RejectsEpsilonAtOrAboveGap) {
    const SpectralGapConstants g = gap_constants({1.0, 0.5, 0.25}, 2);
    HoeffdingBound h;
    h.epsilon = 0.125;
    EXPECT_THROW((void)certify_bound(h, g), CertificateError);
    h.epsilon = 0.3;
    EXPECT_THROW((void)certify_bound(h, g), CertificateError);
}
