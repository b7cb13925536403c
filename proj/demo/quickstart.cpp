// Fits kernel EDMD to Ornstein-Uhlenbeck samples, predicts the image of a
// Gaussian bump under the Koopman operator, compares with the closed form and
// prints the associated probabilistic error certificate.
#include <cmath>
#include <cstdio>
#include <vector>

#include "koopcert/koopcert.hpp"

int main() {
    using namespace koopcert;

    const OUParams ou{1.0, 2.0};
    const double lag = 0.05;
    const KernelSpec spec(0.5);
    const TruncatedGaussianLaw law{0.0, ou.invariant_variance(), -1.5, 1.5};

    const DataPairs pairs = generate_pairs(OUSystem{ou}, lag, 2000, law, /*seed=*/7);
    const TruncatedEstimator est = fit_truncated(build_operators(pairs, spec));
    std::printf("samples %ld, retained rank %ld\n", static_cast<long>(est.samples()), static_cast<long>(est.rank()));

    const double z = 0.3;
    Eigen::VectorXd psi(pairs.size());
    for (Eigen::Index j = 0; j < pairs.size(); ++j) psi(j) = spec(pairs.y(j, 0), z);
    const Eigen::VectorXd coeffs = predict_observable(est, psi);

    PointSet grid(5, 1);
    grid << -1.0, -0.5, 0.0, 0.5, 1.0;
    const Eigen::VectorXd pred = evaluate_prediction(est, coeffs, grid);
    const AnalyticKoopmanImage exact = ou_koopman_rbf(ou.alpha, ou.beta, lag, z, spec.bandwidth());
    std::printf("%8s %12s %12s\n", "x", "predicted", "exact");
    for (Eigen::Index i = 0; i < grid.rows(); ++i)
        std::printf("%8.3f %12.6f %12.6f\n", grid(i, 0), pred(i), exact(grid(i, 0)));

    const MercerExpansion mercer = mercer_gaussian(spec, 0.0, ou.invariant_variance(), 10);
    const std::vector<double> lambda(mercer.eigenvalues().data(), mercer.eigenvalues().data() + 10);
    const HoeffdingBound h = hoeffding_epsilon(pairs.size(), 0.1);
    const SpectralGapConstants gaps = gap_constants(lambda, 1);
    std::printf("epsilon(m=%ld, delta=0.1) = %.6f, delta_1 = %.6f\n", static_cast<long>(pairs.size()), h.epsilon,
                gaps.delta_r);
    try {
        std::printf("certified bound: %.6f\n", certify_bound(h, gaps));
    } catch (const CertificateError& e) {
        std::printf("no certificate: %s\n", e.what());
    }
    return 0;
}
