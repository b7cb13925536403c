#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "koopcert/kernel.hpp"
#include "koopcert/mercer.hpp"
#include "koopcert/ou_analytic.hpp"

using namespace koopcert;

namespace {

double gaussian_density(double x, double mean, double var) {
    return std::exp(-(x - mean) * (x - mean) / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

/// Integral of f against N(mean, var) by adaptive Gauss-Kronrod on +-12 standard deviations.
template <typename F>
double gaussian_integral(F f, double mean, double var) {
    const double half = 12.0 * std::sqrt(var);
    auto g = [&](double x) { return f(x) * gaussian_density(x, mean, var); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, mean - half, mean + half, 20, 1e-14);
}

}  // namespace

TEST(Kernel, DiagonalIsOne) { EXPECT_EQ(eval_kernel(KernelSpec(1.0), 0.0, 0.0), 1.0); }

TEST(Kernel, UnitDistance) { EXPECT_NEAR(eval_kernel(KernelSpec(1.0), 0.0, 1.0), 0.36787944117144233, 1e-16); }

TEST(Kernel, HighPrecisionValue) {
    const long double expected = std::exp(-0.16L);
    EXPECT_NEAR(eval_kernel(KernelSpec(0.5), 0.3, 0.1), static_cast<double>(expected), 1e-15);
}

TEST(Kernel, RejectsNonPositiveBandwidth) {
    EXPECT_THROW(KernelSpec(0.0), InputError);
    EXPECT_THROW(KernelSpec(-1.0), InputError);
    EXPECT_THROW(KernelSpec(std::nan("")), InputError);
}

TEST(Kernel, DimensionMismatch) {
    const KernelSpec k(1.0);
    EXPECT_THROW((void)k(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)), InputError);
}

TEST(Kernel, SupNormIsOne) { EXPECT_EQ(KernelSpec(0.3).sup_norm(), 1.0); }

TEST(Gram, SinglePoint) {
    PointSet x(1, 1);
    x << 0.0;
    const GramMatrix g = gram(KernelSpec(1.0), x);
    EXPECT_EQ(g.entries.rows(), 1);
    EXPECT_EQ(g.entries(0, 0), 1.0);
}

TEST(Gram, DuplicatePointsRankOne) {
    PointSet x(2, 1);
    x << 0.4, 0.4;
    const GramMatrix g = gram(KernelSpec(0.7), x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.entries);
    EXPECT_NEAR(es.eigenvalues()(0), 0.0, 1e-15);
    EXPECT_NEAR(es.eigenvalues()(1), 2.0, 1e-15);
}

TEST(Gram, RandomSetPositiveSemidefinite) {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> n;
    PointSet x(5, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(gen);
    const GramMatrix g = gram(KernelSpec(0.8), x);
    EXPECT_TRUE(g.symmetric);
    EXPECT_EQ(g.entries, g.entries.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.entries);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
}

TEST(Gram, EntriesMatchPairwiseEvaluation) {
    PointSet x(3, 1), y(4, 1);
    x << -1, 0.2, 0.9;
    y << 0.1, -0.3, 2.0, 0.5;
    const KernelSpec k(0.6);
    const GramMatrix g = gram(k, x, y);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) EXPECT_EQ(g.entries(i, j), eval_kernel(k, x(i, 0), y(j, 0)));
}

TEST(MercerGaussian, PartialTracesBelowOneAndConverge) {
    const MercerExpansion e = mercer_gaussian(KernelSpec(0.5), 0.0, 0.5, 200);
    double prev = 0.0;
    for (int n = 1; n <= 200; ++n) {
        const double s = e.partial_trace(n);
        EXPECT_GE(s, prev);
        EXPECT_LE(s, 1.0 + 1e-12);
        prev = s;
    }
    EXPECT_NEAR(prev, 1.0, 1e-12);
    EXPECT_NEAR(e.tail_bound(), 0.0, 1e-12);
}

TEST(MercerGaussian, OrthonormalUnderMeasure) {
    const double var = 0.5;
    const MercerExpansion e = mercer_gaussian(KernelSpec(0.5), 0.0, var, 10);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j <= i; ++j) {
            const double v = gaussian_integral(
                [&](double x) {
                    const Eigen::VectorXd f = e.evaluate(x);
                    return f(i) * f(j);
                },
                0.0, var);
            EXPECT_NEAR(v, i == j ? 1.0 : 0.0, 1e-8) << "i=" << i << " j=" << j;
        }
}

TEST(MercerGaussian, EigenRelationOnGrid) {
    const double var = 0.5;
    const KernelSpec k(0.5);
    const MercerExpansion e = mercer_gaussian(k, 0.0, var, 5);
    for (double x = -1.5; x <= 1.5; x += 0.25) {
        const Eigen::VectorXd ex = e.evaluate(x);
        for (int n = 0; n < 5; ++n) {
            const double lhs = gaussian_integral([&](double y) { return k(x, y) * e.evaluate(y)(n); }, 0.0, var);
            EXPECT_NEAR(lhs, e.eigenvalues()(n) * ex(n), 1e-6) << "x=" << x << " n=" << n;
        }
    }
}

TEST(MercerGaussian, ReproducesKernelPointwise) {
    const KernelSpec k(0.5);
    const MercerExpansion e = mercer_gaussian(k, 0.2, 0.5, 80);
    for (double x : {-1.0, 0.0, 0.7})
        for (double y : {-0.4, 0.3, 1.2}) {
            const Eigen::VectorXd a = e.evaluate(x), b = e.evaluate(y);
            EXPECT_NEAR((e.eigenvalues().array() * a.array() * b.array()).sum(), k(x, y), 1e-10);
        }
}

TEST(MercerGaussian, SignConventionPositiveAtMean) {
    const MercerExpansion e = mercer_gaussian(KernelSpec(0.4), 0.3, 0.5, 6);
    const Eigen::VectorXd at_mean = e.evaluate(0.3);
    EXPECT_GT(at_mean(0), 0.0);
    EXPECT_GT(at_mean(2), 0.0);
    const double h = 1e-5;
    EXPECT_GT(e.evaluate(0.3 + h)(1) - e.evaluate(0.3 - h)(1), 0.0);
}

TEST(MercerGaussian, RejectsBadInput) {
    EXPECT_THROW((void)mercer_gaussian(KernelSpec(0.5), 0.0, 0.0, 5), InputError);
    EXPECT_THROW((void)mercer_gaussian(KernelSpec(0.5), 0.0, 1.0, 0), InputError);
}

TEST(Nystrom, LeadingEigenvalueMonteCarlo) {
    const KernelSpec k(0.5);
    const GaussianMeasure mu{0.0, 0.5};
    std::mt19937_64 gen(11);
    std::normal_distribution<double> n(0.0, std::sqrt(mu.variance));
    const QuadratureRule rule = monte_carlo_rule([&] { return n(gen); }, 5000);
    const MercerExpansion ny = nystrom_mercer(k, mu, rule, 3);
    const MercerExpansion exact = mercer_gaussian(k, 0.0, 0.5, 3);
    EXPECT_LE(std::abs(ny.eigenvalues()(0) / exact.eigenvalues()(0) - 1.0), 0.02);
}

TEST(Nystrom, GaussHermiteRuleMatchesFirstTenEigenvalues) {
    const KernelSpec k(0.5);
    const GaussianMeasure mu{0.0, 0.5};
    const MercerExpansion ny = nystrom_mercer(k, mu, gaussian_measure_rule(0.0, 0.5, 120), 10);
    const MercerExpansion exact = mercer_gaussian(k, 0.0, 0.5, 10);
    for (int i = 0; i < 10; ++i)
        EXPECT_LE(std::abs(ny.eigenvalues()(i) / exact.eigenvalues()(i) - 1.0), 0.02) << "i=" << i;
}

TEST(Nystrom, SignAndOrdering) {
    const KernelSpec k(0.5);
    const GaussianMeasure mu{0.2, 0.5};
    const MercerExpansion one = nystrom_mercer(k, mu, gaussian_measure_rule(0.2, 0.5, 60), 1);
    EXPECT_GT(one.evaluate(0.2)(0), 0.0);
    const MercerExpansion many = nystrom_mercer(k, mu, gaussian_measure_rule(0.2, 0.5, 60), 8);
    for (int i = 1; i < 8; ++i) EXPECT_LE(many.eigenvalues()(i), many.eigenvalues()(i - 1));
}

TEST(Nystrom, ExtensionAgreesWithClosedFormEigenfunction) {
    const KernelSpec k(0.5);
    const GaussianMeasure mu{0.0, 0.5};
    const MercerExpansion ny = nystrom_mercer(k, mu, gaussian_measure_rule(0.0, 0.5, 120), 4);
    const MercerExpansion exact = mercer_gaussian(k, 0.0, 0.5, 4);
    for (double x : {-1.0, -0.3, 0.0, 0.45, 1.1}) {
        const Eigen::VectorXd a = ny.evaluate(x), b = exact.evaluate(x);
        for (int i = 0; i < 4; ++i) EXPECT_NEAR(a(i), b(i), 1e-6) << "x=" << x << " i=" << i;
    }
}

TEST(OUAnalytic, ReferenceValues) {
    const AnalyticKoopmanImage img = ou_koopman_rbf(1.0, 2.0, 0.05, 0.3, 0.1);
    // c_t = alpha beta / (2 (1 - e^{-2 alpha t}))
    const double c = 2.0 / (2.0 * (1.0 - std::exp(-0.1)));
    EXPECT_NEAR(img.concentration, c, 1e-12);
    EXPECT_NEAR(img.concentration, 10.5083, 1e-4);
    EXPECT_NEAR(img.amplitude, 0.308368, 1e-6);
    EXPECT_NEAR(img.width, 0.340914, 1e-6);
    EXPECT_NEAR(img.center, 0.315381, 1e-6);
    EXPECT_NEAR(img.operator_norm_bound, std::exp(0.025), 1e-15);
}

TEST(OUAnalytic, MatchesTransitionIntegral) {
    const double alpha = 1.0, beta = 2.0, t = 0.05, sigma = 0.1, z = 0.3;
    const AnalyticKoopmanImage img = ou_koopman_rbf(alpha, beta, t, z, sigma);
    const KernelSpec k(sigma);
    const double mean_factor = std::exp(-alpha * t);
    const double var = (1.0 - std::exp(-2.0 * alpha * t)) / (alpha * beta);
    boost::math::quadrature::tanh_sinh<double> integrator;
    for (double x = -1.5; x <= 1.5; x += 0.125) {
        auto f = [&](double y) { return k(y, z) * gaussian_density(y, mean_factor * x, var); };
        const double v = integrator.integrate(f, -std::numeric_limits<double>::infinity(),
                                              std::numeric_limits<double>::infinity());
        EXPECT_NEAR(v, img(x), 1e-6) << "x=" << x;
    }
}

TEST(OUAnalytic, SmallLagLimit) {
    const AnalyticKoopmanImage img = ou_koopman_rbf(1.0, 2.0, 1e-12, -0.4, 0.2);
    EXPECT_NEAR(img.amplitude, 1.0, 1e-5);
    EXPECT_NEAR(img.width, 0.2, 1e-6);
    EXPECT_NEAR(img.center, -0.4, 1e-9);
    const AnalyticKoopmanImage zero = ou_koopman_rbf(1.0, 2.0, 0.0, -0.4, 0.2);
    EXPECT_EQ(zero.amplitude, 1.0);
    EXPECT_EQ(zero.width, 0.2);
    EXPECT_EQ(zero.center, -0.4);
}

TEST(OUAnalytic, WidthExceedsBandwidth) {
    for (double t : {1e-6, 0.01, 0.05, 1.0, 10.0})
        for (double sigma : {0.05, 0.5, 2.0}) {
            const AnalyticKoopmanImage img = ou_koopman_rbf(1.0, 2.0, t, 0.1, sigma);
            EXPECT_GT(img.width, sigma);
            EXPECT_LT(img.amplitude, 1.0);
        }
}

TEST(OUAnalytic, RejectsBadInput) {
    EXPECT_THROW((void)ou_koopman_rbf(0.0, 2.0, 0.05, 0.0, 0.1), InputError);
    EXPECT_THROW((void)ou_koopman_rbf(1.0, 2.0, -0.1, 0.0, 0.1), InputError);
    EXPECT_THROW((void)ou_koopman_rbf(1.0, 2.0, 0.05, 0.0, 0.0), InputError);
}
