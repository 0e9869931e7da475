#include <doctest.h>

#include <cmath>

#include "emgsa/eval.hpp"
#include "emgsa/rng.hpp"
#include "emgsa/synth.hpp"
#include "oracles.hpp"

using namespace emgsa;

namespace {

/// Features that encode the label directly; any sane pipeline scores 1.0.
FeatureMatrix one_hot_features(int n_subjects, int per_class, std::uint64_t seed) {
    Rng rng(seed);
    FeatureMatrix m;
    const int n = n_subjects * 4 * per_class;
    m.values = Matrix::Zero(n, 6);
    int row = 0;
    for (int s = 0; s < n_subjects; ++s) {
        for (int g = 0; g < 4; ++g) {
            for (int i = 0; i < per_class; ++i) {
                m.values(row, g) = 1.0;
                m.values(row, 4) = 0.05 * rng.normal();
                m.values(row, 5) = 0.05 * rng.normal();
                m.labels.push_back(g);
                m.subjects.push_back(s);
                ++row;
            }
        }
    }
    return m;
}

CohortConfig small_cohort(int subjects, int wpg, std::uint64_t seed, double gain = 0.4, double shift = 0.25,
                          double jitter = 0.3) {
    CohortConfig cfg;
    cfg.n_subjects = subjects;
    cfg.windows_per_gesture = wpg;
    cfg.gain_spread = gain;
    cfg.shift_strength = shift;
    cfg.activation_jitter = jitter;
    cfg.seed = seed;
    return cfg;
}

MlpConfig quick_mlp(int hidden) {
    MlpConfig cfg;
    cfg.hidden_units = hidden;
    cfg.max_epochs = 150;
    return cfg;
}

ExperimentResult make_result(const std::string& method, const std::vector<double>& accs) {
    ExperimentResult r;
    r.method = method;
    for (std::size_t i = 0; i < accs.size(); ++i) r.per_unit_accuracy[{static_cast<int>(i), -1}] = accs[i];
    r.per_unit_macro_f1 = r.per_unit_accuracy;
    r.finalize();
    return r;
}

}  // namespace

TEST_SUITE_BEGIN("eval");

TEST_CASE("perfectly informative features give intra accuracy 1.0 with S x 10 units") {
    FeatureMatrix x = one_hot_features(2, 10, 1);
    PipelineSpec spec = make_pipeline_spec(PipelineMode::intra_baseline);
    spec.mlp = quick_mlp(16);
    spec.seed = 3;
    ExperimentResult r = run_intra(x, spec);
    CHECK(r.per_unit_accuracy.size() == 20);  // 2 subjects x 10 folds
    CHECK(r.mean_accuracy == 1.0);
    CHECK(r.mean_macro_f1 == 1.0);
}

TEST_CASE("cross harness argument checks") {
    FeatureMatrix x = one_hot_features(1, 10, 2);
    PipelineSpec spec = make_pipeline_spec(PipelineMode::cross_baseline);
    CHECK_THROWS_AS(run_cross(x, spec), ArgumentError);
    CHECK_THROWS_AS(run_intra(x, make_pipeline_spec(PipelineMode::cross_baseline)), ArgumentError);
    CHECK_THROWS_AS(run_cross(x, make_pipeline_spec(PipelineMode::intra_baseline)), ArgumentError);
    PipelineSpec no_reduction = make_pipeline_spec(PipelineMode::common_subspace_cross);
    no_reduction.reduction.reset();
    FeatureMatrix two = one_hot_features(2, 10, 3);
    CHECK_THROWS_AS(run_cross(two, no_reduction), ArgumentError);
}

TEST_CASE("zero-shift cohort closes the intra/cross gap") {
    CohortConfig cfg = small_cohort(4, 15, 11, 0.0, 0.0, 0.0);
    FeatureMatrix x = synth_feature_matrix(cfg);

    PipelineSpec intra = make_pipeline_spec(PipelineMode::intra_baseline);
    intra.mlp = quick_mlp(24);
    intra.seed = 5;
    ExperimentResult ri = run_intra(x, intra);

    PipelineSpec cross = make_pipeline_spec(PipelineMode::cross_baseline);
    cross.mlp = quick_mlp(10);
    cross.seed = 5;
    ExperimentResult rc = run_cross(x, cross);

    CHECK(ri.mean_accuracy > 0.9);
    CHECK(rc.mean_accuracy > ri.mean_accuracy - 0.03);  // identical subjects, no domain gap
}

TEST_CASE("sa on a target that copies the source matches the common-subspace pipeline") {
    // Subject 1 is an exact copy of subject 0's rows: M = I and SA is a no-op.
    FeatureMatrix base = synth_feature_matrix(small_cohort(1, 20, 21));
    FeatureMatrix x;
    x.values.resize(base.rows() * 2, base.cols());
    x.values << base.values, base.values;
    x.labels = base.labels;
    x.subjects = base.subjects;
    for (int label : base.labels) x.labels.push_back(label);
    for (std::size_t i = 0; i < base.subjects.size(); ++i) x.subjects.push_back(1);

    PipelineSpec sa = make_pipeline_spec(PipelineMode::sa_kpca, 5);
    sa.mlp = quick_mlp(10);
    sa.seed = 9;
    PipelineSpec common = make_pipeline_spec(PipelineMode::common_subspace_cross, 5);
    common.mlp = quick_mlp(10);
    common.seed = 9;

    // Only score the copy-target unit (subject 1): accuracy should coincide.
    auto [source, target] = split_loso(x, 1);
    const std::uint64_t seed1 = derive_seed(sa.seed, {detail::kTagUnit, 1ULL});
    CrossUnitModel m_sa = fit_cross_unit(source, target.without_labels(), sa, seed1);
    CrossUnitModel m_common = fit_cross_unit(source, target.without_labels(), common, seed1);
    CHECK((m_sa.sa->alignment - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);
    const double acc_sa = accuracy(predict(m_sa.mlp, m_sa.transform_target(target)).labels, target.labels);
    const double acc_common =
        accuracy(predict(m_common.mlp, m_common.transform_target(target)).labels, target.labels);
    CHECK(std::abs(acc_sa - acc_common) <= 0.02);
}

TEST_CASE("dimension sweep preserves order and saturates on easy data") {
    FeatureMatrix x = synth_feature_matrix(small_cohort(3, 10, 31, 0.0, 0.0, 0.0));
    PipelineSpec spec = make_pipeline_spec(PipelineMode::common_subspace_intra);
    spec.mlp = quick_mlp(16);
    spec.seed = 4;
    auto curve = dimension_sweep(x, spec, {10, 2, 5});
    REQUIRE(curve.size() == 3);
    CHECK(curve[0].dims == 10);
    CHECK(curve[1].dims == 2);
    CHECK(curve[2].dims == 5);
    double best = 0.0;
    for (const auto& r : curve) best = std::max(best, r.mean_accuracy);
    CHECK(best >= curve[1].mean_accuracy);  // max over d at least the d=2 point

    PipelineSpec no_red = make_pipeline_spec(PipelineMode::cross_baseline);
    CHECK_THROWS_AS(dimension_sweep(x, no_red, {2}), ArgumentError);
    CHECK_THROWS_AS(dimension_sweep(x, spec, {}), ArgumentError);
}

TEST_CASE("full-rank pca projection matches the raw-feature baseline") {
    // The rotation-invariance claim presumes numerically full-rank features.
    FeatureMatrix x = one_hot_features(3, 12, 41);
    PipelineSpec base = make_pipeline_spec(PipelineMode::cross_baseline);
    base.mlp = quick_mlp(10);
    base.seed = 6;
    ExperimentResult rb = run_cross(x, base);

    PipelineSpec full = make_pipeline_spec(PipelineMode::common_subspace_cross, 6);
    full.reduction->method = ReductionMethod::pca;
    full.standardize = true;
    full.mlp = quick_mlp(10);
    full.seed = 6;
    ExperimentResult rf = run_cross(x, full);
    CHECK(std::abs(rf.mean_accuracy - rb.mean_accuracy) <= 0.01);
}

TEST_CASE("friedman statistic matches the closed form") {
    // k=3 methods, N=4 blocks, ranks (1,2,3) in every block -> chi2 = 8.
    ExperimentResult a = make_result("a", {0.9, 0.9, 0.9, 0.9});
    ExperimentResult b = make_result("b", {0.8, 0.8, 0.8, 0.8});
    ExperimentResult c = make_result("c", {0.7, 0.7, 0.7, 0.7});
    RankTable table = rank_methods({a, b, c});
    auto [chi2, df] = friedman_test(table);
    CHECK(chi2 == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(df == 2);

    // All methods tie in every block -> statistic 0.
    RankTable tied = rank_methods({a, a, a});
    CHECK(friedman_test(tied).first == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

    // Relabeling methods leaves the statistic unchanged.
    RankTable swapped = rank_methods({c, a, b});
    CHECK(friedman_test(swapped).first == doctest::Approx(chi2).epsilon(1e-12));
}

TEST_CASE("nemenyi critical difference against published q values") {
    CHECK(nemenyi_cd(2, 14, 0.05) == doctest::Approx(0.5238).epsilon(1e-4));
    CHECK(nemenyi_cd(7, 14, 0.05) == doctest::Approx(2.408).epsilon(1e-4));
    CHECK(nemenyi_cd(2, 14, 0.05) == doctest::Approx(1.960 * std::sqrt(6.0 / 84.0)).epsilon(1e-12));
    // CD strictly decreases as N grows.
    double prev = nemenyi_cd(5, 5, 0.05);
    for (int n = 6; n < 30; ++n) {
        const double cd = nemenyi_cd(5, n, 0.05);
        CHECK(cd < prev);
        prev = cd;
    }
    CHECK(nemenyi_cd(4, 10, 0.10) < nemenyi_cd(4, 10, 0.05));
    CHECK_THROWS_AS(nemenyi_cd(11, 10, 0.05), ArgumentError);
    CHECK_THROWS_AS(nemenyi_cd(1, 10, 0.05), ArgumentError);
    CHECK_THROWS_AS(nemenyi_cd(4, 10, 0.01), ArgumentError);
}

TEST_CASE("rank table: strict order, ties, and the sort oracle") {
    ExperimentResult better = make_result("better", {0.9, 0.8, 0.95});
    ExperimentResult worse = make_result("worse", {0.5, 0.6, 0.55});
    RankTable t = rank_methods({better, worse});
    CHECK(t.mean_ranks()(0) == 1.0);
    CHECK(t.mean_ranks()(1) == 2.0);

    ExperimentResult tie_a = make_result("ta", {0.5, 0.9});
    ExperimentResult tie_b = make_result("tb", {0.5, 0.7});
    RankTable tt = rank_methods({tie_a, tie_b});
    CHECK(tt.ranks(0, 0) == 1.5);
    CHECK(tt.ranks(0, 1) == 1.5);

    // Random accuracies against a brute-force sort-and-rank oracle.
    Rng rng(77);
    std::vector<ExperimentResult> results;
    const int k = 5, blocks = 9;
    for (int j = 0; j < k; ++j) {
        std::vector<double> accs;
        for (int b = 0; b < blocks; ++b) accs.push_back(std::round(rng.uniform() * 10.0) / 10.0);
        results.push_back(make_result("m" + std::to_string(j), accs));
    }
    RankTable table = rank_methods(results);
    for (int b = 0; b < blocks; ++b) {
        CHECK(table.ranks.row(b).sum() == doctest::Approx(k * (k + 1) / 2.0).epsilon(1e-12));
        for (int i = 0; i < k; ++i) {
            // Oracle: rank = 1 + #{better} + #{ties}/2 with average tie ranks.
            const double acc_i = results[static_cast<std::size_t>(i)].per_unit_accuracy.at({b, -1});
            int n_better = 0, n_tied = 0;
            for (int j = 0; j < k; ++j) {
                const double acc_j = results[static_cast<std::size_t>(j)].per_unit_accuracy.at({b, -1});
                if (acc_j > acc_i) ++n_better;
                if (j != i && acc_j == acc_i) ++n_tied;
            }
            const double oracle_rank = 1.0 + n_better + n_tied / 2.0;
            CHECK(table.ranks(b, i) == doctest::Approx(oracle_rank).epsilon(1e-12));
        }
    }

    ExperimentResult mismatched = make_result("bad", {0.5});
    CHECK_THROWS_AS(rank_methods({better, mismatched}), ArgumentError);
    CHECK_THROWS_AS(rank_methods({better}), ArgumentError);
}

TEST_CASE("target labels never reach the fitting path") {
    FeatureMatrix x = synth_feature_matrix(small_cohort(3, 10, 51));
    auto [source, target] = split_loso(x, 0);
    FeatureMatrix poisoned = target;
    Rng rng(1);
    for (auto& label : poisoned.labels) label = static_cast<int>(rng.index(4));

    for (PipelineMode mode : {PipelineMode::sa_kpca, PipelineMode::coral, PipelineMode::kliep,
                              PipelineMode::common_subspace_cross}) {
        PipelineSpec spec = make_pipeline_spec(mode, 5);
        spec.mlp = quick_mlp(8);
        spec.kliep_n_basis = 20;
        spec.seed = 13;
        CrossUnitModel clean = fit_cross_unit(source, target, spec, 99);
        CrossUnitModel dirty = fit_cross_unit(source, poisoned, spec, 99);
        CHECK(clean.mlp.w1 == dirty.mlp.w1);
        CHECK(clean.mlp.w2 == dirty.mlp.w2);
        CHECK(clean.mlp.b1 == dirty.mlp.b1);
        CHECK(clean.mlp.b2 == dirty.mlp.b2);
    }
}

TEST_CASE("experiment results are reproducible for identical specs") {
    FeatureMatrix x = synth_feature_matrix(small_cohort(3, 8, 61));
    PipelineSpec spec = make_pipeline_spec(PipelineMode::sa_kpca, 5);
    spec.mlp = quick_mlp(8);
    spec.seed = 17;
    ExperimentResult a = run_cross(x, spec);
    ExperimentResult b = run_cross(x, spec);
    CHECK(a.per_unit_accuracy == b.per_unit_accuracy);
    CHECK(a.mean_accuracy == b.mean_accuracy);

    PipelineSpec intra = make_pipeline_spec(PipelineMode::intra_baseline);
    intra.mlp = quick_mlp(12);
    intra.seed = 17;
    ExperimentResult c = run_intra(x, intra);
    ExperimentResult d = run_intra(x, intra);
    CHECK(c.per_unit_accuracy == d.per_unit_accuracy);
}

TEST_CASE("parallel unit execution does not change results") {
    FeatureMatrix x = synth_feature_matrix(small_cohort(4, 8, 71));
    PipelineSpec spec = make_pipeline_spec(PipelineMode::cross_baseline);
    spec.mlp = quick_mlp(8);
    spec.seed = 23;
    ExperimentResult serial = run_cross(x, spec);
    spec.jobs = 4;
    ExperimentResult parallel = run_cross(x, spec);
    CHECK(serial.per_unit_accuracy == parallel.per_unit_accuracy);
}

TEST_CASE("raising the electrode shift does not make naive cross-subject transfer easier") {
    const std::vector<double> shifts = {0.0, 0.3, 0.6};
    std::vector<double> mean_acc;
    for (double shift : shifts) {
        double sum = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            CohortConfig cfg = small_cohort(5, 8, seed, 0.2, shift, 0.1);
            FeatureMatrix x = synth_feature_matrix(cfg);
            PipelineSpec spec = make_pipeline_spec(PipelineMode::cross_baseline);
            spec.mlp = quick_mlp(10);
            spec.mlp.max_epochs = 80;
            spec.seed = seed;
            sum += run_cross(x, spec).mean_accuracy;
        }
        mean_acc.push_back(sum / 5.0);
    }
    CHECK(mean_acc[1] <= mean_acc[0] + 0.05);
    CHECK(mean_acc[2] <= mean_acc[1] + 0.05);
}

TEST_SUITE_END();
