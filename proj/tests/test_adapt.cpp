#include <doctest.h>

#include <cmath>

#include "emgsa/adapt.hpp"
#include "emgsa/model_io.hpp"
#include "emgsa/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace emgsa;

namespace {

FeatureMatrix gaussian_features(int n, int p, std::uint64_t seed, double shift = 0.0) {
    Rng rng(seed);
    FeatureMatrix m;
    m.values.resize(n, p);
    for (Eigen::Index i = 0; i < m.values.size(); ++i) m.values.data()[i] = rng.normal();
    m.values.array() += shift;
    for (int i = 0; i < n; ++i) {
        m.labels.push_back(i % 4);
        m.subjects.push_back(i % 2);
    }
    return m;
}

}  // namespace

TEST_SUITE_BEGIN("adapt");

TEST_CASE("sa is a no-op when source equals target") {
    FeatureMatrix x = gaussian_features(80, 8, 1);
    SAModel m = fit_sa(x, x, 5, false);
    CHECK((m.alignment - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
    FeatureMatrix aligned = transform_sa(m, x, Domain::source);
    FeatureMatrix target_repr = transform_sa(m, x, Domain::target);
    CHECK((aligned.values - target_repr.values).cwiseAbs().maxCoeff() < 1e-8);
    // Aligned source equals the plain PCA projection.
    Projection pca = fit_pca(x, 5);
    CHECK((aligned.values - project(pca, x).values).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("sa alignment matrix is minus identity for sign-flipped bases") {
    FeatureMatrix x = gaussian_features(50, 6, 2);
    SAModel m = fit_sa(x, x, 4, false);
    m.target_basis = -m.target_basis;  // flip every target axis convention
    m.alignment = m.source_basis.transpose() * m.target_basis;
    CHECK((m.alignment + Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
    FeatureMatrix aligned = transform_sa(m, x, Domain::source);
    FeatureMatrix target_repr = transform_sa(m, x, Domain::target);
    CHECK((aligned.values - target_repr.values).cwiseAbs().maxCoeff() < 1e-8);
    Projection pca = fit_pca(x, 4);
    CHECK((aligned.values + project(pca, x).values).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("sa invariants: M = Xs^T Xt and spectral norm at most one") {
    FeatureMatrix s = gaussian_features(100, 8, 3);
    FeatureMatrix t = gaussian_features(90, 8, 4, 0.5);
    SAModel m = fit_sa(s, t, 6, false);
    Matrix recomputed = m.source_basis.transpose() * m.target_basis;
    CHECK((m.alignment - recomputed).cwiseAbs().maxCoeff() < 1e-10);
    Eigen::JacobiSVD<Matrix> svd(m.alignment);
    CHECK(svd.singularValues()(0) <= 1.0 + 1e-8);
    CHECK((m.source_basis.transpose() * m.source_basis - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("sa aligned source matches the explicit matrix chain oracle") {
    FeatureMatrix s = gaussian_features(100, 8, 5);
    FeatureMatrix t = gaussian_features(100, 8, 6, 1.0);
    SAModel m = fit_sa(s, t, 4, false);
    FeatureMatrix aligned = transform_sa(m, s, Domain::source);

    Matrix centered = s.values;
    for (Eigen::Index i = 0; i < centered.rows(); ++i) centered.row(i) -= m.source_center.transpose();
    const Matrix chain =
        oracle::naive_matmul(oracle::naive_matmul(centered, m.source_basis),
                             oracle::naive_matmul(m.source_basis.transpose(), m.target_basis));
    CHECK((aligned.values - chain).cwiseAbs().maxCoeff() < 1e-10);

    // Single row through the per-row oracle.
    FeatureMatrix one;
    one.values = s.values.row(7);
    one.labels = {s.labels[7]};
    one.subjects = {s.subjects[7]};
    const Matrix row_chain = oracle::naive_matmul(
        Matrix((s.values.row(7) - m.source_center.transpose())),
        Matrix(m.source_basis * m.alignment));
    CHECK((transform_sa(m, one, Domain::source).values - row_chain).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("sa l2 mode equals plain sa on pre-normalized inputs, bitwise") {
    FeatureMatrix s = gaussian_features(60, 7, 7);
    FeatureMatrix t = gaussian_features(55, 7, 8, 0.3);
    SAModel a = fit_sa(s, t, 5, true);
    SAModel b = fit_sa(l2_normalize_rows(s), l2_normalize_rows(t), 5, false);
    CHECK(a.source_basis == b.source_basis);
    CHECK(a.target_basis == b.target_basis);
    CHECK(a.alignment == b.alignment);
    FeatureMatrix probe = gaussian_features(9, 7, 9);
    CHECK(transform_sa(a, probe, Domain::source).values ==
          transform_sa(b, l2_normalize_rows(probe), Domain::source).values);
}

TEST_CASE("sa self-consistency and rank validation") {
    FeatureMatrix s = gaussian_features(40, 6, 10);
    FeatureMatrix t = gaussian_features(40, 6, 11);
    SAModel m = fit_sa(s, t, 3, false);
    FeatureMatrix once = transform_sa(m, s, Domain::source);
    FeatureMatrix twice = transform_sa(m, s, Domain::source);
    CHECK(once.values == twice.values);

    FeatureMatrix flat = s;
    flat.values.rightCols(4).setZero();  // rank 2
    CHECK_THROWS_WITH_AS(fit_sa(flat, t, 5, false), doctest::Contains("effective rank"), NumericError);
    CHECK_THROWS_AS(transform_sa(m, gaussian_features(5, 9, 12), Domain::source), ArgumentError);
}

TEST_CASE("coral is the identity when the domains share second-order statistics") {
    FeatureMatrix s = gaussian_features(120, 5, 13);
    FeatureMatrix t = s;
    std::reverse(t.labels.begin(), t.labels.end());  // row permutation leaves covariance unchanged
    t.values = s.values.colwise().reverse();
    CoralModel m = fit_coral(s, t, 0.0);
    CHECK((m.map - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("coral scalar analytic case: variance 4 to variance 1 gives map 0.5") {
    FeatureMatrix s, t;
    s.values.resize(3, 1);
    s.values << -2.0, 0.0, 2.0;  // sample variance 4
    s.labels = {0, 1, 0};
    s.subjects = {0, 0, 0};
    t.values.resize(3, 1);
    t.values << -1.0, 0.0, 1.0;  // sample variance 1
    t.labels = s.labels;
    t.subjects = s.subjects;
    CoralModel m = fit_coral(s, t, 0.0);
    CHECK(m.map(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("coral transformed source covariance matches the target covariance") {
    Rng rng(14);
    FeatureMatrix s = gaussian_features(400, 6, 15);
    // Correlate and scale the target differently.
    FeatureMatrix t = gaussian_features(350, 6, 16);
    Matrix mix(6, 6);
    for (Eigen::Index i = 0; i < mix.size(); ++i) mix.data()[i] = rng.normal() * 0.4;
    mix += Matrix::Identity(6, 6) * 1.5;
    t.values = t.values * mix;
    CoralModel m = fit_coral(s, t, 0.0);
    FeatureMatrix mapped = transform_coral(m, s);
    const Matrix got = oracle::naive_covariance(mapped.values);
    const Matrix want = oracle::naive_covariance(t.values);
    CHECK((got - want).norm() / want.norm() < 1e-6);
    // Centers map onto the target mean.
    CHECK((mapped.values.colwise().mean().transpose() - m.target_center).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("coral rejects non positive definite covariance and suggests more ridge") {
    FeatureMatrix s = gaussian_features(30, 4, 17);
    s.values.col(3).setZero();  // singular covariance
    FeatureMatrix t = gaussian_features(30, 4, 18);
    CHECK_THROWS_WITH_AS(fit_coral(s, t, 0.0), doctest::Contains("lambda"), NumericError);
    CoralModel ridged = fit_coral(s, t);  // default scale-aware ridge succeeds
    CHECK(ridged.lambda > 0.0);
    CHECK(ridged.map.allFinite());
}

TEST_CASE("kliep on identical distributions keeps weights near one") {
    FeatureMatrix s = gaussian_features(200, 8, 19);
    FeatureMatrix t = s;
    KliepModel m = fit_kliep(s, t, default_sigma_grid(t), 100, 3);

    CHECK(std::abs(m.weights.mean() - 1.0) < 1e-6);
    CHECK((m.alpha.array() >= 0.0).all());
    CHECK((m.weights.array() - 1.0).abs().maxCoeff() < 0.2);

    // The found optimum is at least as good as a grid perturbation around the
    // uniform-weight solution.
    const Matrix k_target = detail::gaussian_kernel(t.values, m.basis_centers, m.sigma);
    const Matrix k_source = detail::gaussian_kernel(s.values, m.basis_centers, m.sigma);
    const Vector b = k_source.colwise().mean();
    auto objective = [&](const Vector& alpha) {
        const Vector v = k_target * alpha;
        return (v.array() > 0.0).all() ? v.array().log().sum() : -1e300;
    };
    const double found = objective(m.alpha);
    Rng rng(20);
    Vector uniform = Vector::Constant(m.alpha.size(), 1.0 / b.sum());
    double best_grid = objective(uniform);
    for (int trial = 0; trial < 60; ++trial) {
        Vector candidate = uniform;
        for (Eigen::Index i = 0; i < candidate.size(); ++i)
            candidate(i) = std::max(candidate(i) * (1.0 + 0.2 * rng.normal()), 0.0);
        const double scale = b.dot(candidate);
        if (scale <= 0.0) continue;
        candidate /= scale;
        best_grid = std::max(best_grid, objective(candidate));
    }
    CHECK(found >= best_grid - 1e-3);
}

TEST_CASE("kliep constraint holds and the objective trace is nondecreasing") {
    FeatureMatrix s = gaussian_features(150, 6, 21);
    FeatureMatrix t = gaussian_features(120, 6, 22, 0.4);
    KliepModel m = fit_kliep(s, t, default_sigma_grid(t), 60, 5);
    const Matrix k_source = detail::gaussian_kernel(s.values, m.basis_centers, m.sigma);
    const Vector b = k_source.colwise().mean();
    CHECK(std::abs(b.dot(m.alpha) - 1.0) < 1e-6);  // (1/n_s) sum_s w(x_s) = 1
    CHECK(std::abs(m.weights.mean() - 1.0) < 1e-6);
    for (std::size_t i = 1; i < m.objective_trace.size(); ++i) {
        CHECK(m.objective_trace[i] >= m.objective_trace[i - 1]);
    }

    KliepModel again = fit_kliep(s, t, default_sigma_grid(t), 60, 5);
    CHECK(m.weights == again.weights);  // deterministic in seed
}

TEST_CASE("kliep upweights the source cluster that matches the target") {
    // Source: two clusters. Target: only cluster B.
    Rng rng(23);
    const int n = 160;
    FeatureMatrix s;
    s.values.resize(n, 4);
    for (int i = 0; i < n; ++i) {
        const bool cluster_b = i % 2 == 1;
        for (int j = 0; j < 4; ++j) s.values(i, j) = rng.normal() + (cluster_b ? 4.0 : 0.0);
        s.labels.push_back(cluster_b ? 1 : 0);
        s.subjects.push_back(0);
    }
    FeatureMatrix t;
    t.values.resize(100, 4);
    for (int i = 0; i < 100; ++i) {
        for (int j = 0; j < 4; ++j) t.values(i, j) = rng.normal() + 4.0;
        t.labels.push_back(1);
        t.subjects.push_back(1);
    }
    KliepModel m = fit_kliep(s, t, default_sigma_grid(t), 50, 7);
    double mean_a = 0.0, mean_b = 0.0;
    for (int i = 0; i < n; ++i) (i % 2 == 1 ? mean_b : mean_a) += m.weights(i);
    mean_a /= n / 2;
    mean_b /= n / 2;
    CHECK(mean_b > mean_a);
    CHECK(source_weights(m).size() == n);
    CHECK((source_weights(m).array() >= 0.0).all());
}

TEST_CASE("kliep rejects hopeless kernel widths by naming sigma") {
    FeatureMatrix s = gaussian_features(40, 3, 24);
    FeatureMatrix t = gaussian_features(40, 3, 25, 50.0);  // far from any center? no: centers are target rows
    // Tiny sigma makes every off-center response underflow to zero.
    CHECK_THROWS_WITH_AS(fit_kliep(s, t, {1e-9}, 5, 1), doctest::Contains("sigma"), NumericError);
    CHECK_THROWS_AS(fit_kliep(s, t, {}, 5, 1), ArgumentError);
    CHECK_THROWS_AS(fit_kliep(s, t, {-1.0}, 5, 1), ArgumentError);
}

TEST_CASE("model blobs round trip through disk") {
    TempDir dir;
    FeatureMatrix s = gaussian_features(60, 5, 26);
    FeatureMatrix t = gaussian_features(60, 5, 27, 0.2);

    SAModel sa = fit_sa(s, t, 3, true);
    save_model(sa, dir.file("sa.emgm"));
    SAModel sa2 = load_sa_model(dir.file("sa.emgm"));
    CHECK(sa2.alignment == sa.alignment);
    CHECK(sa2.source_basis == sa.source_basis);
    CHECK(sa2.l2_mode == sa.l2_mode);
    FeatureMatrix probe = gaussian_features(5, 5, 28);
    CHECK(transform_sa(sa2, probe, Domain::source).values == transform_sa(sa, probe, Domain::source).values);

    CoralModel coral = fit_coral(s, t);
    save_model(coral, dir.file("coral.emgm"));
    CoralModel coral2 = load_coral_model(dir.file("coral.emgm"));
    CHECK(coral2.map == coral.map);
    CHECK(coral2.lambda == coral.lambda);

    KliepModel kliep = fit_kliep(s, t, default_sigma_grid(t), 20, 2);
    save_model(kliep, dir.file("kliep.emgm"));
    KliepModel kliep2 = load_kliep_model(dir.file("kliep.emgm"));
    CHECK(kliep2.weights == kliep.weights);
    CHECK(kliep2.sigma == kliep.sigma);

    CHECK_THROWS_AS(load_coral_model(dir.file("sa.emgm")), FormatError);  // kind mismatch
}

TEST_SUITE_END();
