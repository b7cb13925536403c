#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "koopcert/control.hpp"
#include "koopcert/dynamics.hpp"
#include "koopcert/linalg.hpp"

using namespace koopcert;

namespace {

DataPairs duffing_pairs(Eigen::Index m, double u, std::uint64_t seed) {
    const UniformBoxLaw box{Eigen::Vector2d(-1.5, -1.5), Eigen::Vector2d(1.5, 1.5)};
    return generate_pairs(DuffingSystem{DuffingParams{}, u, 0.005}, 0.025, m, box, seed);
}

BilinearModel small_model(std::uint64_t seed) {
    BilinearModel model;
    model.basis = draw_rff(1.0, 40, 2, seed);
    const DataPairs p0 = duffing_pairs(800, 0.0, seed + 1);
    DataPairs p1 = duffing_pairs(800, 1.0, seed + 1);
    model.drift = fit_rff_koopman(model.basis, p0, 1e-3, 0.0);
    model.inputs.push_back({fit_rff_koopman(model.basis, p1, 1e-3, 1.0), 1.0});
    model.readout = fit_readout(model.basis, p0.x, 1e-3);
    model.lag = 0.025;
    return model;
}

}  // namespace

TEST(RFF, FrequencyStandardDeviation) {
    const RFFBasis b = draw_rff(0.5, 100000, 1, 1);
    const Eigen::ArrayXd w = b.frequencies.col(0).array();
    const double sd = std::sqrt((w - w.mean()).square().sum() / (w.size() - 1));
    EXPECT_NEAR(sd * 0.5, 1.0, 0.01);
    const RFFBasis m = draw_rff(0.5, 100000, 1, 1, SpectralConvention::match_kernel);
    EXPECT_NEAR(m.spectral_std, std::sqrt(2.0) / 0.5, 1e-15);
}

TEST(RFF, SeedRepeatability) {
    EXPECT_EQ(draw_rff(1.0, 50, 2, 9).frequencies, draw_rff(1.0, 50, 2, 9).frequencies);
    EXPECT_NE(draw_rff(1.0, 50, 2, 9).frequencies, draw_rff(1.0, 50, 2, 10).frequencies);
}

TEST(RFF, BochnerKernelConsistency) {
    const double sigma = 0.8;
    const Eigen::Vector2d x(0.3, -0.2), y(-0.1, 0.4);
    const double d2 = (x - y).squaredNorm();
    double prev_err = 1.0;
    for (Eigen::Index p : {100, 10000, 1000000}) {
        const RFFBasis b = draw_rff(sigma, p, 2, 21);
        const Eigen::VectorXcd a = lift(b, x).w, c = lift(b, y).w;
        const std::complex<double> k = (a.array() * c.array().conjugate()).mean();
        const double err = std::abs(k.real() - std::exp(-d2 / (2.0 * sigma * sigma)));
        EXPECT_LE(err, 5.0 / std::sqrt(static_cast<double>(p)));
        prev_err = err;
    }
    EXPECT_LE(prev_err, 0.01);
    const RFFBasis m = draw_rff(sigma, 1000000, 2, 22, SpectralConvention::match_kernel);
    const std::complex<double> km = (lift(m, x).w.array() * lift(m, y).w.array().conjugate()).mean();
    EXPECT_NEAR(km.real(), std::exp(-d2 / (sigma * sigma)), 0.01);
}

TEST(RFF, InvalidArguments) {
    EXPECT_THROW((void)draw_rff(0.0, 10, 1, 1), InputError);
    EXPECT_THROW((void)draw_rff(1.0, 0, 1, 1), InputError);
}

TEST(Lift, OriginAndConjugation) {
    const RFFBasis b = draw_rff(1.0, 64, 2, 3);
    const Eigen::VectorXcd w0 = lift(b, Eigen::Vector2d::Zero()).w;
    EXPECT_EQ(w0, Eigen::VectorXcd::Ones(64));
    const Eigen::Vector2d x(0.7, -1.3);
    const Eigen::VectorXcd a = lift(b, x).w, c = lift(b, Eigen::Vector2d(-x)).w;
    EXPECT_LE((a - c.conjugate()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((a.cwiseAbs().array() - 1.0).abs().maxCoeff(), 1e-14);
    EXPECT_THROW((void)lift(b, Eigen::Vector3d::Zero()), InputError);
}

TEST(Koopman, IdentityDataNearIdentity) {
    const RFFBasis b = draw_rff(1.0, 30, 2, 4);
    DataPairs d;
    RngStream rng(4, 1);
    d.x = sample_initials(UniformBoxLaw{Eigen::Vector2d(-3, -3), Eigen::Vector2d(3, 3)}, 2000, rng);
    d.y = d.x;
    const Eigen::MatrixXcd m = feature_matrix(b, d.x);
    const Eigen::MatrixXcd g = m * m.adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g, Eigen::EigenvaluesOnly);
    ASSERT_GT(es.eigenvalues().minCoeff(), 1e-3);
    const RFFKoopman k = fit_rff_koopman(b, d, 1e-8);
    EXPECT_LE((k.matrix - Eigen::MatrixXcd::Identity(30, 30)).norm(), 1e-4);
}

TEST(Koopman, LargeRegularisationLimit) {
    const RFFBasis b = draw_rff(1.0, 20, 2, 5);
    const DataPairs d = duffing_pairs(300, 0.0, 5);
    const double gamma = 1e12;
    const RFFKoopman k = fit_rff_koopman(b, d, gamma);
    const Eigen::MatrixXcd approx = feature_matrix(b, d.x) * feature_matrix(b, d.y).adjoint() / gamma;
    EXPECT_LE((k.matrix - approx).norm(), 1e-6 * approx.norm());
    EXPECT_LE(k.matrix.norm(), 1e-6);
}

TEST(Koopman, OneStepResidualDecreasesWithRegularisation) {
    const RFFBasis b = draw_rff(1.0, 200, 2, 6);
    const DataPairs d = duffing_pairs(5000, 0.0, 6);
    const RffNormalEquations eq = normal_equations(b, d);
    const Eigen::MatrixXcd m = feature_matrix(b, d.x), mt = feature_matrix(b, d.y);
    double prev = INFINITY;
    for (double gamma : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
        const RFFKoopman k = fit_rff_koopman(eq, gamma);
        const double r = (k.matrix.adjoint() * m - mt).colwise().norm().mean() / std::sqrt(200.0);
        EXPECT_LE(r, prev * (1.0 + 1e-9)) << "gamma=" << gamma;
        prev = r;
    }
}

TEST(Koopman, RejectsNonPositiveGamma) {
    const RFFBasis b = draw_rff(1.0, 5, 2, 7);
    EXPECT_THROW((void)fit_rff_koopman(b, duffing_pairs(10, 0.0, 7), 0.0), InputError);
}

TEST(Readout, TrainingReconstruction) {
    const RFFBasis b = draw_rff(1.0, 500, 2, 8);
    const DataPairs d = duffing_pairs(10000, 0.0, 8);
    const Eigen::MatrixXcd c = fit_readout(b, d.x, 1e-5);
    const Eigen::MatrixXd recon = (c * feature_matrix(b, d.x)).real().transpose();
    EXPECT_LE((recon - d.x).squaredNorm() / d.x.squaredNorm(), 1e-3);
}

TEST(Readout, ConstantTargetWithZeroFrequency) {
    RFFBasis b = draw_rff(1.0, 10, 2, 9);
    b.frequencies.row(0).setZero();
    RngStream rng(9, 1);
    const PointSet x = sample_initials(UniformBoxLaw{Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1)}, 500, rng);
    const Eigen::MatrixXcd m = feature_matrix(b, x);
    Eigen::MatrixXcd g = m * m.adjoint();
    g.diagonal().array() += 1e-8;
    const Eigen::MatrixXcd rhs = m * Eigen::VectorXcd::Constant(500, 2.5);
    const Eigen::VectorXcd coef = g.llt().solve(rhs);
    const Eigen::VectorXd fit = (coef.adjoint() * m).real().transpose();
    EXPECT_LE((fit.array() - 2.5).abs().maxCoeff(), 1e-6);
}

TEST(Readout, ZeroTarget) {
    const RFFBasis b = draw_rff(1.0, 10, 2, 10);
    const PointSet zero = PointSet::Zero(20, 2);
    EXPECT_EQ(fit_readout(b, zero, 1e-3).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Bilinear, EndpointsAndAffinity) {
    const BilinearModel model = small_model(11);
    const LiftedState w = lift(model.basis, Eigen::Vector2d(0.3, -0.6));
    const Eigen::VectorXcd s0 = bilinear_step(model, w, 0.0).w;
    const Eigen::VectorXcd s1 = bilinear_step(model, w, 1.0).w;
    EXPECT_EQ(s0, Eigen::VectorXcd(model.drift.matrix.adjoint() * w.w));
    EXPECT_LE((s1 - model.inputs[0].koopman.matrix.adjoint() * w.w).cwiseAbs().maxCoeff(), 1e-14);
    const Eigen::VectorXcd half = bilinear_step(model, w, 0.5).w;
    EXPECT_LE((half - (0.5 * s0 + 0.5 * s1)).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_EQ(bilinear_step(model, w, 0.0).step, 1u);
}

TEST(Predict, ZeroStepsReturnsInitialState) {
    const BilinearModel model = small_model(12);
    const Trajectory tr = predict_trajectory(model, Eigen::Vector2d(0.2, 0.1), [](double) { return 0.0; }, 0);
    ASSERT_EQ(tr.size(), 1u);
    EXPECT_EQ(tr.states[0], Eigen::Vector2d(0.2, 0.1));
}

TEST(Predict, OriginStaysNearOrigin) {
    BilinearModel model;
    model.basis = draw_rff(1.0, 200, 2, 13);
    const DataPairs p0 = duffing_pairs(5000, 0.0, 14), p1 = duffing_pairs(5000, 1.0, 14);
    model.drift = fit_rff_koopman(model.basis, p0, 1e-5);
    model.inputs.push_back({fit_rff_koopman(model.basis, p1, 1e-5, 1.0), 1.0});
    model.readout = fit_readout(model.basis, p0.x, 1e-5);
    model.lag = 0.025;
    const Trajectory pred = predict_trajectory(model, Eigen::Vector2d::Zero(), [](double) { return 0.0; }, 100);
    const Trajectory truth =
        integrate_duffing_zoh(DuffingParams{}, Eigen::Vector2d::Zero(), [](double) { return 0.0; }, 0.025, 100, 0.005);
    for (std::size_t k = 0; k <= 100; ++k) EXPECT_LE((pred.states[k] - truth.states[k]).norm(), 1e-2) << k;
}

TEST(Predict, EnsembleMatchesSingleRollouts) {
    const BilinearModel model = small_model(15);
    PointSet z0(3, 2);
    z0 << 0.1, 0.2, -0.5, 0.9, 1.2, -1.0;
    auto u = [](double t) { return std::cos(t); };
    const auto ens = predict_ensemble(model, z0, u, 60);
    for (int k = 0; k < 3; ++k) {
        const Trajectory one = predict_trajectory(model, z0.row(k).transpose(), u, 60);
        for (std::size_t s = 0; s <= 60; ++s) EXPECT_LE((one.states[s] - ens[k].states[s]).norm(), 1e-12);
    }
}

TEST(Predict, ProjectAndLiftResynchronises) {
    BilinearModel model = small_model(16);
    model.project_every = 5;
    const Trajectory tr = predict_trajectory(model, Eigen::Vector2d(0.3, 0.3), [](double) { return 0.0; }, 5);
    BilinearModel copy = model;
    copy.project_every = 0;
    const Trajectory free = predict_trajectory(copy, Eigen::Vector2d(0.3, 0.3), [](double) { return 0.0; }, 10);
    const Trajectory restarted = predict_trajectory(copy, tr.states[5], [](double) { return 0.0; }, 5);
    const Trajectory projected = predict_trajectory(model, Eigen::Vector2d(0.3, 0.3), [](double) { return 0.0; }, 10);
    EXPECT_LE((projected.states[10] - restarted.states[5]).norm(), 1e-12);
    EXPECT_GT((free.states[10] - projected.states[10]).norm(), 0.0);
}

TEST(Predict, DivergenceIsReported) {
    BilinearModel model = small_model(17);
    model.drift.matrix *= 50.0;
    model.project_every = 0;
    EXPECT_THROW((void)predict_trajectory(model, Eigen::Vector2d(0.3, 0.3), [](double) { return 0.0; }, 50),
                 DivergenceError);
}

TEST(Persistence, BilinearRoundTripIsExact) {
    const BilinearModel model = small_model(18);
    const BilinearModel back = bilinear_from_json(nlohmann::json::parse(to_json(model).dump()));
    EXPECT_EQ(back.basis.frequencies, model.basis.frequencies);
    EXPECT_EQ(back.basis.bandwidth, model.basis.bandwidth);
    EXPECT_EQ(back.basis.spectral_std, model.basis.spectral_std);
    EXPECT_EQ(back.drift.matrix, model.drift.matrix);
    EXPECT_EQ(back.inputs[0].koopman.matrix, model.inputs[0].koopman.matrix);
    EXPECT_EQ(back.inputs[0].scale, model.inputs[0].scale);
    EXPECT_EQ(back.readout, model.readout);
    EXPECT_EQ(back.lag, model.lag);
    EXPECT_EQ(back.project_every, model.project_every);
}

namespace {

/// x' = A x + u c with A = [[0, 1], [-1, 0]], c = (1, 0): closed-form flow.
ControlAffineSystem rotation_system() {
    ControlAffineSystem sys;
    sys.gamma = Eigen::VectorXd::Constant(1, 1.0);
    sys.flow = [](const Eigen::VectorXd& x0, const Eigen::VectorXd& u, double t) {
        Eigen::Matrix2d e;
        e << std::cos(t), std::sin(t), -std::sin(t), std::cos(t);
        const Eigen::Vector2d forced(std::sin(t), std::cos(t) - 1.0);
        return Eigen::VectorXd(e * x0 + u(0) * forced);
    };
    return sys;
}

struct QuadratureRule2D {
    PointSet points;
    Eigen::VectorXd weights;
};

/// Midpoint rule for the uniform law on [-half, half]^2.
QuadratureRule2D box_rule(int n, double half) {
    QuadratureRule2D r;
    r.points.resize(n * n, 2);
    r.weights = Eigen::VectorXd::Constant(n * n, 1.0 / (n * n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            r.points(i * n + j, 0) = -half + 2.0 * half * (i + 0.5) / n;
            r.points(i * n + j, 1) = -half + 2.0 * half * (j + 0.5) / n;
        }
    return r;
}

}  // namespace

TEST(Affinity, LinearSystemClosedFormDefect) {
    const auto rule = box_rule(9, 1.5);
    auto psi = [](const Eigen::VectorXd& x) { return x(0) * x(0); };
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.5);
    const std::vector<double> lags{0.0125, 0.025, 0.05, 0.1};
    const auto d = affinity_defect(rotation_system(), psi, u, lags, rule.points, rule.weights);
    std::vector<double> t, v;
    for (const auto& s : d) {
        // (u^2 - u gamma) sin^2 t, independent of the initial state.
        EXPECT_NEAR(s.defect, 0.25 * std::sin(s.lag) * std::sin(s.lag), 1e-14);
        t.push_back(s.lag);
        v.push_back(s.defect);
    }
    EXPECT_NEAR(loglog_slope(t, v), 2.0, 0.05);
}

TEST(Affinity, ZeroControlHasNoDefect) {
    const auto rule = box_rule(5, 1.0);
    auto psi = [](const Eigen::VectorXd& x) { return std::sin(x(0)) * x(1); };
    const auto d = affinity_defect(rotation_system(), psi, Eigen::VectorXd::Zero(1), {0.1, 0.2}, rule.points,
                                   rule.weights);
    for (const auto& s : d) EXPECT_EQ(s.defect, 0.0);
}

TEST(Affinity, DuffingQuadraticObservableIsSecondOrder) {
    const DuffingParams p;
    const ControlAffineSystem sys =
        rk4_system([p](const Eigen::VectorXd& z) { return Eigen::VectorXd(p.drift(z)); },
                   {[p](const Eigen::VectorXd& z) { return Eigen::VectorXd(p.input_field(z)); }},
                   Eigen::VectorXd::Constant(1, 1.0), 64);
    const auto rule = box_rule(11, 1.5);
    auto psi = [](const Eigen::VectorXd& z) { return z(1) * z(1); };
    const std::vector<double> lags{0.0125, 0.025, 0.05, 0.1};
    const auto d = affinity_defect(sys, psi, Eigen::VectorXd::Constant(1, 0.5), lags, rule.points, rule.weights);
    std::vector<double> t, v;
    for (const auto& s : d) {
        t.push_back(s.lag);
        v.push_back(s.defect);
    }
    EXPECT_NEAR(loglog_slope(t, v), 2.0, 0.1);
}

TEST(Affinity, RejectsBadInput) {
    const auto rule = box_rule(3, 1.0);
    auto psi = [](const Eigen::VectorXd& x) { return x(0); };
    EXPECT_THROW((void)affinity_defect(rotation_system(), psi, Eigen::VectorXd::Zero(2), {0.1}, rule.points,
                                       rule.weights),
                 InputError);
    EXPECT_THROW((void)affinity_defect(rotation_system(), psi, Eigen::VectorXd::Zero(1), {0.0}, rule.points,
                                       rule.weights),
                 InputError);
}
