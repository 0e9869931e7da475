/*
 * Copyright 2026 The emgsa Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "emgsa/adapt.hpp"
#include "emgsa/common.hpp"
#include "emgsa/dataset.hpp"
#include "emgsa/decomp.hpp"
#include "emgsa/features.hpp"
#include "emgsa/mlp.hpp"

namespace emgsa {

/// Experiment pipelines. `intra_*` modes run stratified k-fold CV per
/// subject; the others run leave-one-subject-out over pooled sources.
enum class PipelineMode {
    intra_baseline,
    cross_baseline,
    common_subspace_intra,
    common_subspace_cross,
    sa_kpca,
    sa_pca,
    coral,
    coral_kpca,
    kliep,
    kliep_kpca,
};

inline std::string to_string(PipelineMode m) {
    switch (m) {
        case PipelineMode::intra_baseline: return "intra_baseline";
        case PipelineMode::cross_baseline: return "cross_baseline";
        case PipelineMode::common_subspace_intra: return "common_subspace_intra";
        case PipelineMode::common_subspace_cross: return "common_subspace_cross";
        case PipelineMode::sa_kpca: return "sa_kpca";
        case PipelineMode::sa_pca: return "sa_pca";
        case PipelineMode::coral: return "coral";
        case PipelineMode::coral_kpca: return "coral_kpca";
        case PipelineMode::kliep: return "kliep";
        case PipelineMode::kliep_kpca: return "kliep_kpca";
    }
    return "?";
}

inline PipelineMode pipeline_mode_from_string(const std::string& s) {
    for (PipelineMode m : {PipelineMode::intra_baseline, PipelineMode::cross_baseline,
                           PipelineMode::common_subspace_intra, PipelineMode::common_subspace_cross,
                           PipelineMode::sa_kpca, PipelineMode::sa_pca, PipelineMode::coral,
                           PipelineMode::coral_kpca, PipelineMode::kliep, PipelineMode::kliep_kpca}) {
        if (to_string(m) == s) return m;
    }
    throw ArgumentError("unknown pipeline mode '" + s + "'");
}

inline bool is_intra_mode(PipelineMode m) {
    return m == PipelineMode::intra_baseline || m == PipelineMode::common_subspace_intra;
}

struct ReductionSpec {
    ReductionMethod method = ReductionMethod::kpca;
    KernelSpec kernel;  // used by kpca only
    int dims = 10;
};

/// Full description of one experiment. make_pipeline_spec fills the defaults
/// each mode calls for (hidden units, reduction, standardization, L2).
struct PipelineSpec {
    PipelineMode mode = PipelineMode::cross_baseline;
    std::optional<ReductionSpec> reduction;
    FeatureConfig features;
    MlpConfig mlp;
    bool standardize = false;   // z-score (fit on the training side) before the reduction
    bool l2_preprocess = true;  // SA l2_mode / L2 normalization for original-space coral and kliep
    double coral_lambda = -1.0; // negative selects the scale-aware default
    int kliep_n_basis = 100;
    std::vector<double> kliep_sigma_grid;  // empty selects the median heuristic
    int kfolds = 10;
    bool stratified_folds = true;
    bool kpca_exact_primal = true;  // use the exact finite-dimensional route for linear/cosine
    int kpca_max_train_refs = 2000;
    int jobs = 1;
    std::uint64_t seed = 0;

    std::string name() const { return to_string(mode); }
};

/// Mode defaults: hidden units 100 intra / 10 cross; kpca-cosine 10-dim
/// reduction for subspace modes; standardization on for pca/ica/tsvd inputs
/// and off on the L2/cosine paths.
inline PipelineSpec make_pipeline_spec(PipelineMode mode, int dims = 10) {
    PipelineSpec spec;
    spec.mode = mode;
    spec.mlp.hidden_units = is_intra_mode(mode) ? 100 : 10;
    switch (mode) {
        case PipelineMode::intra_baseline:
        case PipelineMode::cross_baseline:
        case PipelineMode::coral:
        case PipelineMode::kliep:
            break;  // no reduction
        case PipelineMode::common_subspace_intra:
        case PipelineMode::common_subspace_cross:
        case PipelineMode::coral_kpca:
        case PipelineMode::kliep_kpca:
        case PipelineMode::sa_kpca: {
            ReductionSpec r;
            r.method = ReductionMethod::kpca;
            r.kernel.kind = KernelSpec::Kind::cosine;
            r.dims = dims;
            spec.reduction = r;
            break;
        }
        case PipelineMode::sa_pca: {
            ReductionSpec r;
            r.method = ReductionMethod::pca;
            r.kernel.kind = KernelSpec::Kind::linear;
            r.dims = dims;
            spec.reduction = r;
            spec.standardize = true;
            spec.l2_preprocess = false;
            break;
        }
    }
    return spec;
}

using UnitKey = std::pair<int, int>;  // (subject, fold); fold -1 for LOSO units

inline std::string unit_to_string(const UnitKey& k) {
    return k.second < 0 ? std::to_string(k.first) : std::to_string(k.first) + "." + std::to_string(k.second);
}

struct ExperimentResult {
    std::string method;
    int dims = 0;  // 0 when the pipeline has no reduction
    std::map<UnitKey, double> per_unit_accuracy;
    std::map<UnitKey, double> per_unit_macro_f1;
    double mean_accuracy = 0.0;
    double mean_macro_f1 = 0.0;
    double accuracy_std = 0.0;  // sample std over units
    double runtime_seconds = 0.0;

    void finalize() {
        double sum = 0.0, f1 = 0.0;
        for (const auto& [k, v] : per_unit_accuracy) sum += v;
        for (const auto& [k, v] : per_unit_macro_f1) f1 += v;
        const double n = static_cast<double>(per_unit_accuracy.size());
        mean_accuracy = sum / n;
        mean_macro_f1 = f1 / n;
        double ss = 0.0;
        for (const auto& [k, v] : per_unit_accuracy) ss += (v - mean_accuracy) * (v - mean_accuracy);
        accuracy_std = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
};

namespace detail {

inline constexpr std::uint64_t kTagIntraFolds = 0x666f6c64ULL;  // "fold"
inline constexpr std::uint64_t kTagUnit = 0x756e6974ULL;        // "unit"
inline constexpr std::uint64_t kTagMlp = 0x6d6c7030ULL;         // "mlp0"
inline constexpr std::uint64_t kTagReduction = 0x72656475ULL;   // "redu"
inline constexpr std::uint64_t kTagKliep = 0x6b6c7031ULL;       // "klp1"

struct FittedReduction {
    std::optional<Standardizer> standardizer;
    Projection projection;
};

inline FittedReduction fit_reduction(const FeatureMatrix& train, const ReductionSpec& r, bool standardize,
                                     const PipelineSpec& spec, std::uint64_t seed) {
    FittedReduction out;
    FeatureMatrix input = train;
    if (standardize) {
        out.standardizer = Standardizer::fit(train.values);
        input = out.standardizer->apply(train);
    }
    switch (r.method) {
        case ReductionMethod::pca:
            out.projection = fit_pca(input, r.dims);
            break;
        case ReductionMethod::tsvd:
            out.projection = fit_tsvd(input, r.dims);
            break;
        case ReductionMethod::ica:
            out.projection = fit_ica(input, r.dims, derive_seed(seed, {kTagReduction}));
            break;
        case ReductionMethod::kpca: {
            if (spec.kpca_exact_primal && r.kernel.kind != KernelSpec::Kind::polynomial) {
                out.projection = fit_kpca_primal(input, r.kernel, r.dims);
            } else {
                KpcaOptions opts;
                opts.max_train_refs = spec.kpca_max_train_refs;
                opts.seed = derive_seed(seed, {kTagReduction});
                out.projection = fit_kpca(input, r.kernel, r.dims, opts);
            }
            break;
        }
    }
    return out;
}

inline FeatureMatrix apply_reduction(const FittedReduction& fr, const FeatureMatrix& x) {
    return project(fr.projection, fr.standardizer ? fr.standardizer->apply(x) : x);
}

/// Runs fn(i) for i in [0, n), optionally across threads. Each call writes
/// only its own output slot, so scheduling order cannot change results.
template <typename Fn>
void parallel_units(int n, int jobs, Fn&& fn) {
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < jobs; ++t) {
        pool.emplace_back([&]() {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

inline std::vector<int> sorted_subjects(const FeatureMatrix& x) {
    std::set<int> s(x.subjects.begin(), x.subjects.end());
    return std::vector<int>(s.begin(), s.end());
}

}  // namespace detail

/// A fitted cross-subject unit: everything learned from labeled source rows
/// and unlabeled target rows. Target labels are never consulted here; they
/// enter only when the caller scores predictions.
struct CrossUnitModel {
    PipelineMode mode = PipelineMode::cross_baseline;
    bool l2_preprocess = false;
    std::optional<detail::FittedReduction> reduction;
    std::optional<SAModel> sa;
    std::optional<CoralModel> coral;  // applied to source rows at train time only
    std::optional<KliepModel> kliep;
    MlpModel mlp;

    /// The target-side transform matching what the classifier was trained on.
    FeatureMatrix transform_target(const FeatureMatrix& x) const {
        switch (mode) {
            case PipelineMode::cross_baseline:
                return reduction ? detail::apply_reduction(*reduction, x) : x;
            case PipelineMode::common_subspace_cross:
            case PipelineMode::coral_kpca:
            case PipelineMode::kliep_kpca:
                return detail::apply_reduction(*reduction, x);
            case PipelineMode::sa_kpca:
            case PipelineMode::sa_pca: {
                const FeatureMatrix pre = reduction && reduction->standardizer
                                              ? reduction->standardizer->apply(x)
                                              : x;
                return transform_sa(*sa, pre, Domain::target);
            }
            case PipelineMode::coral:
            case PipelineMode::kliep:
                return l2_preprocess ? l2_normalize_rows(x) : x;
            default:
                throw ArgumentError("transform_target: not a cross mode");
        }
    }
};

/// Fits one LOSO unit. `target` carries unlabeled rows: every fitting path is
/// label-blind on the target side by construction.
inline CrossUnitModel fit_cross_unit(const FeatureMatrix& source, const FeatureMatrix& target,
                                     const PipelineSpec& spec, std::uint64_t unit_seed) {
    CrossUnitModel unit;
    unit.mode = spec.mode;
    unit.l2_preprocess = spec.l2_preprocess;
    MlpConfig mlp_cfg = spec.mlp;
    mlp_cfg.seed = derive_seed(unit_seed, {detail::kTagMlp});

    FeatureMatrix train_rows;
    std::optional<Vector> train_weights;

    switch (spec.mode) {
        case PipelineMode::cross_baseline:
            // A baseline given a reduction runs in the pooled-source subspace,
            // which makes dimension sweeps of the baseline meaningful.
            if (spec.reduction) {
                unit.reduction = detail::fit_reduction(source, *spec.reduction, spec.standardize, spec, unit_seed);
                train_rows = detail::apply_reduction(*unit.reduction, source);
            } else {
                train_rows = source;
            }
            break;
        case PipelineMode::common_subspace_cross: {
            if (!spec.reduction) throw ArgumentError("common_subspace_cross requires a reduction");
            unit.reduction = detail::fit_reduction(source, *spec.reduction, spec.standardize, spec, unit_seed);
            train_rows = detail::apply_reduction(*unit.reduction, source);
            break;
        }
        case PipelineMode::sa_kpca:
        case PipelineMode::sa_pca: {
            if (!spec.reduction) throw ArgumentError("sa modes require a reduction for the dimension");
            const bool l2 = spec.mode == PipelineMode::sa_kpca ? spec.l2_preprocess : false;
            FeatureMatrix s = source, t = target;
            if (spec.standardize) {
                detail::FittedReduction std_only;
                std_only.standardizer = Standardizer::fit(source.values);
                s = std_only.standardizer->apply(source);
                t = std_only.standardizer->apply(target);
                unit.reduction = std::move(std_only);
            }
            unit.sa = fit_sa(s, t, spec.reduction->dims, l2);
            train_rows = transform_sa(*unit.sa, s, Domain::source);
            break;
        }
        case PipelineMode::coral: {
            const FeatureMatrix s = spec.l2_preprocess ? l2_normalize_rows(source) : source;
            const FeatureMatrix t = spec.l2_preprocess ? l2_normalize_rows(target) : target;
            unit.coral = fit_coral(s, t, spec.coral_lambda);
            train_rows = transform_coral(*unit.coral, s);
            break;
        }
        case PipelineMode::coral_kpca: {
            if (!spec.reduction) throw ArgumentError("coral_kpca requires a reduction");
            unit.reduction = detail::fit_reduction(source, *spec.reduction, spec.standardize, spec, unit_seed);
            const FeatureMatrix s = detail::apply_reduction(*unit.reduction, source);
            const FeatureMatrix t = detail::apply_reduction(*unit.reduction, target);
            unit.coral = fit_coral(s, t, spec.coral_lambda);
            train_rows = transform_coral(*unit.coral, s);
            break;
        }
        case PipelineMode::kliep: {
            const FeatureMatrix s = spec.l2_preprocess ? l2_normalize_rows(source) : source;
            const FeatureMatrix t = spec.l2_preprocess ? l2_normalize_rows(target) : target;
            const auto grid = spec.kliep_sigma_grid.empty() ? default_sigma_grid(t) : spec.kliep_sigma_grid;
            unit.kliep = fit_kliep(s, t, grid, spec.kliep_n_basis, derive_seed(unit_seed, {detail::kTagKliep}));
            train_rows = s;
            train_weights = source_weights(*unit.kliep);
            break;
        }
        case PipelineMode::kliep_kpca: {
            if (!spec.reduction) throw ArgumentError("kliep_kpca requires a reduction");
            unit.reduction = detail::fit_reduction(source, *spec.reduction, spec.standardize, spec, unit_seed);
            const FeatureMatrix s = detail::apply_reduction(*unit.reduction, source);
            const FeatureMatrix t = detail::apply_reduction(*unit.reduction, target);
            const auto grid = spec.kliep_sigma_grid.empty() ? default_sigma_grid(t) : spec.kliep_sigma_grid;
            unit.kliep = fit_kliep(s, t, grid, spec.kliep_n_basis, derive_seed(unit_seed, {detail::kTagKliep}));
            train_rows = s;
            train_weights = source_weights(*unit.kliep);
            break;
        }
        default:
            throw ArgumentError("fit_cross_unit: " + to_string(spec.mode) + " is not a cross mode");
    }

    unit.mlp = train_mlp(train_rows, mlp_cfg, train_weights);
    return unit;
}

/// Leave-one-subject-out evaluation: one accuracy per held-out subject.
/// Target labels are read only by the final scoring step.
inline ExperimentResult run_cross(const FeatureMatrix& x, const PipelineSpec& spec) {
    if (is_intra_mode(spec.mode)) throw ArgumentError("run_cross: " + spec.name() + " is an intra mode");
    x.check_consistent();
    const auto subjects = detail::sorted_subjects(x);
    if (subjects.size() < 2) throw ArgumentError("run_cross: need at least 2 subjects");

    const auto start = std::chrono::steady_clock::now();
    ExperimentResult result;
    result.method = spec.name();
    result.dims = spec.reduction ? spec.reduction->dims : 0;

    std::vector<std::pair<double, double>> scores(subjects.size());
    detail::parallel_units(static_cast<int>(subjects.size()), spec.jobs, [&](int i) {
        const int target_subject = subjects[static_cast<std::size_t>(i)];
        auto [source, target] = split_loso(x, target_subject);
        const std::uint64_t unit_seed = derive_seed(spec.seed, {detail::kTagUnit,
                                                                static_cast<std::uint64_t>(target_subject)});
        const CrossUnitModel unit = fit_cross_unit(source, target.without_labels(), spec, unit_seed);
        const FeatureMatrix transformed = unit.transform_target(target);
        const Prediction pred = predict(unit.mlp, transformed);
        scores[static_cast<std::size_t>(i)] = {accuracy(pred.labels, target.labels),
                                               macro_f1(pred.labels, target.labels, unit.mlp.n_classes)};
    });
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        result.per_unit_accuracy[{subjects[i], -1}] = scores[i].first;
        result.per_unit_macro_f1[{subjects[i], -1}] = scores[i].second;
    }
    result.finalize();
    result.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

/// Per-subject stratified k-fold CV. For intra_baseline any reduction is fit
/// inside each fold on that fold's training rows (the subject-specific
/// subspace protocol). For common_subspace_intra the reduction is fit once
/// per subject on all OTHER subjects pooled, and the CV runs in that fixed
/// subspace.
inline ExperimentResult run_intra(const FeatureMatrix& x, const PipelineSpec& spec) {
    if (!is_intra_mode(spec.mode)) throw ArgumentError("run_intra: " + spec.name() + " is a cross mode");
    x.check_consistent();
    const auto subjects = detail::sorted_subjects(x);
    if (spec.mode == PipelineMode::common_subspace_intra) {
        if (!spec.reduction) throw ArgumentError("common_subspace_intra requires a reduction");
        if (subjects.size() < 2) throw ArgumentError("common_subspace_intra: need at least 2 subjects");
    }

    const auto start = std::chrono::steady_clock::now();
    ExperimentResult result;
    result.method = spec.name();
    result.dims = spec.reduction ? spec.reduction->dims : 0;

    std::vector<std::map<UnitKey, std::pair<double, double>>> partial(subjects.size());
    detail::parallel_units(static_cast<int>(subjects.size()), spec.jobs, [&](int i) {
        const int subject = subjects[static_cast<std::size_t>(i)];
        std::vector<int> rows;
        for (std::size_t r = 0; r < x.subjects.size(); ++r)
            if (x.subjects[r] == subject) rows.push_back(static_cast<int>(r));
        const FeatureMatrix sub = x.take_rows(rows);

        std::optional<detail::FittedReduction> shared_reduction;
        if (spec.mode == PipelineMode::common_subspace_intra) {
            std::vector<int> other_rows;
            for (std::size_t r = 0; r < x.subjects.size(); ++r)
                if (x.subjects[r] != subject) other_rows.push_back(static_cast<int>(r));
            const std::uint64_t fit_seed = derive_seed(spec.seed, {detail::kTagUnit,
                                                                   static_cast<std::uint64_t>(subject)});
            shared_reduction =
                detail::fit_reduction(x.take_rows(other_rows), *spec.reduction, spec.standardize, spec, fit_seed);
        }

        const auto folds = kfold_indices(sub.labels, spec.kfolds,
                                         derive_seed(spec.seed, {detail::kTagIntraFolds,
                                                                 static_cast<std::uint64_t>(subject)}),
                                         spec.stratified_folds);
        for (std::size_t f = 0; f < folds.size(); ++f) {
            FeatureMatrix train = sub.take_rows(folds[f].train);
            FeatureMatrix test = sub.take_rows(folds[f].test);
            if (spec.mode == PipelineMode::common_subspace_intra) {
                train = detail::apply_reduction(*shared_reduction, train);
                test = detail::apply_reduction(*shared_reduction, test);
            } else if (spec.reduction) {
                const std::uint64_t fit_seed = derive_seed(
                    spec.seed, {detail::kTagUnit, static_cast<std::uint64_t>(subject), static_cast<std::uint64_t>(f)});
                const auto fr = detail::fit_reduction(train, *spec.reduction, spec.standardize, spec, fit_seed);
                train = detail::apply_reduction(fr, train);
                test = detail::apply_reduction(fr, test);
            }
            MlpConfig mlp_cfg = spec.mlp;
            mlp_cfg.seed = derive_seed(spec.seed, {detail::kTagMlp, static_cast<std::uint64_t>(subject),
                                                   static_cast<std::uint64_t>(f)});
            const MlpModel model = train_mlp(train, mlp_cfg);
            const Prediction pred = predict(model, test);
            partial[static_cast<std::size_t>(i)][{subject, static_cast<int>(f)}] = {
                accuracy(pred.labels, test.labels), macro_f1(pred.labels, test.labels, model.n_classes)};
        }
    });
    for (const auto& m : partial) {
        for (const auto& [key, value] : m) {
            result.per_unit_accuracy[key] = value.first;
            result.per_unit_macro_f1[key] = value.second;
        }
    }
    result.finalize();
    result.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

inline ExperimentResult run_pipeline(const FeatureMatrix& x, const PipelineSpec& spec) {
    return is_intra_mode(spec.mode) ? run_intra(x, spec) : run_cross(x, spec);
}

/// Runs the spec at each dimension with the same master seed.
inline std::vector<ExperimentResult> dimension_sweep(const FeatureMatrix& x, const PipelineSpec& spec,
                                                     const std::vector<int>& dims) {
    if (dims.empty()) throw ArgumentError("dimension_sweep: dims is empty");
    std::vector<ExperimentResult> out;
    for (int d : dims) {
        PipelineSpec at_d = spec;
        if (at_d.reduction) {
            at_d.reduction->dims = d;
        } else {
            throw ArgumentError("dimension_sweep: " + spec.name() + " has no reduction to sweep");
        }
        out.push_back(run_pipeline(x, at_d));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Friedman / Nemenyi statistics
// ---------------------------------------------------------------------------

struct RankTable {
    std::vector<std::string> methods;
    std::vector<UnitKey> blocks;
    Matrix ranks;  // blocks x methods, average ranks on ties

    Vector mean_ranks() const { return ranks.colwise().mean(); }
};

/// Ranks methods within each shared unit (rank 1 = highest accuracy, ties get
/// average ranks). All results must cover exactly the same units.
inline RankTable rank_methods(const std::vector<ExperimentResult>& results) {
    if (results.size() < 2) throw ArgumentError("rank_methods: need at least 2 methods");
    const auto& reference = results.front().per_unit_accuracy;
    for (const auto& r : results) {
        if (r.per_unit_accuracy.size() != reference.size()) {
            throw ArgumentError("rank_methods: results disagree on unit count");
        }
        for (const auto& [key, value] : reference) {
            if (r.per_unit_accuracy.find(key) == r.per_unit_accuracy.end()) {
                throw ArgumentError("rank_methods: method " + r.method + " is missing unit " + unit_to_string(key));
            }
        }
    }

    RankTable table;
    for (const auto& r : results) table.methods.push_back(r.method);
    for (const auto& [key, value] : reference) table.blocks.push_back(key);
    const int k = static_cast<int>(results.size());
    const int n = static_cast<int>(table.blocks.size());
    table.ranks.resize(n, k);

    for (int b = 0; b < n; ++b) {
        const UnitKey& key = table.blocks[static_cast<std::size_t>(b)];
        std::vector<std::pair<double, int>> acc(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j)
            acc[static_cast<std::size_t>(j)] = {results[static_cast<std::size_t>(j)].per_unit_accuracy.at(key), j};
        std::sort(acc.begin(), acc.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        int i = 0;
        while (i < k) {
            int j = i;
            while (j + 1 < k && acc[static_cast<std::size_t>(j + 1)].first == acc[static_cast<std::size_t>(i)].first) ++j;
            const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
            for (int t = i; t <= j; ++t) table.ranks(b, acc[static_cast<std::size_t>(t)].second) = avg_rank;
            i = j + 1;
        }
    }
    return table;
}

/// Friedman chi-square over the rank table:
/// chi2 = 12N / (k(k+1)) * [sum_j mean_rank_j^2 - k(k+1)^2 / 4], df = k - 1.
inline std::pair<double, int> friedman_test(const RankTable& table) {
    const int n = static_cast<int>(table.blocks.size());
    const int k = static_cast<int>(table.methods.size());
    if (n < 2 || k < 2) throw ArgumentError("friedman_test: need at least 2 blocks and 2 methods");
    const Vector mean = table.mean_ranks();
    const double sum_sq = mean.squaredNorm();
    const double chi2 = 12.0 * n / (k * (k + 1.0)) * (sum_sq - k * (k + 1.0) * (k + 1.0) / 4.0);
    return {chi2, k - 1};
}

/// Critical difference CD = q_alpha(k) * sqrt(k(k+1) / (6N)). q values follow
/// the studentized-range-based table for the Nemenyi test at alpha 0.05/0.10,
/// k = 2..10. Two methods are indistinguishable iff their mean ranks differ
/// by less than CD.
inline double nemenyi_cd(int k, int n_blocks, double alpha) {
    static const double q05[] = {1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164};
    static const double q10[] = {1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920};
    if (k < 2 || k > 10) {
        throw ArgumentError("nemenyi_cd: k=" + std::to_string(k) + " outside the tabulated range [2, 10]");
    }
    if (n_blocks < 1) throw ArgumentError("nemenyi_cd: need at least one block");
    const double* q = nullptr;
    if (alpha == 0.05) {
        q = q05;
    } else if (alpha == 0.10) {
        q = q10;
    } else {
        throw ArgumentError("nemenyi_cd: alpha must be 0.05 or 0.10");
    }
    return q[k - 2] * std::sqrt(k * (k + 1.0) / (6.0 * n_blocks));
}

// ---------------------------------------------------------------------------
// CSV exports
// ---------------------------------------------------------------------------

/// `method,unit,accuracy` rows; LOSO units print as the subject id, intra
/// units as subject.fold.
inline void write_results_csv(const std::vector<ExperimentResult>& results, const std::string& path,
                              bool append_mean = false) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "method,unit,accuracy\n";
    for (const auto& r : results) {
        for (const auto& [key, acc] : r.per_unit_accuracy) {
            out << r.method << ',' << unit_to_string(key) << ',' << detail::format_double(acc) << "\n";
        }
        if (append_mean) out << r.method << ",mean," << detail::format_double(r.mean_accuracy) << "\n";
    }
    if (!out) throw FormatError("write to '" + path + "' failed");
}

/// Reads a results CSV back (mean rows are skipped); used by the stats
/// command to combine runs.
inline std::vector<ExperimentResult> load_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line) || line != "method,unit,accuracy") {
        throw FormatError("'" + path + "': line 1: expected header method,unit,accuracy");
    }
    std::vector<ExperimentResult> results;
    std::map<std::string, std::size_t> index;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = "'" + path + "': line " + std::to_string(line_no);
        const auto fields = detail::split_line(line);
        if (fields.size() != 3) throw FormatError(where + ": expected 3 fields");
        if (fields[1] == "mean") continue;
        UnitKey key{0, -1};
        const auto dot = fields[1].find('.');
        key.first = static_cast<int>(detail::parse_int(fields[1].substr(0, dot), where));
        if (dot != std::string::npos)
            key.second = static_cast<int>(detail::parse_int(fields[1].substr(dot + 1), where));
        if (index.find(fields[0]) == index.end()) {
            index[fields[0]] = results.size();
            results.push_back({});
            results.back().method = fields[0];
        }
        results[index[fields[0]]].per_unit_accuracy[key] = detail::parse_double(fields[2], where);
    }
    for (auto& r : results) {
        r.per_unit_macro_f1 = r.per_unit_accuracy;  // placeholder so finalize() has equal keys
        r.finalize();
        r.per_unit_macro_f1.clear();
        r.mean_macro_f1 = 0.0;
    }
    return results;
}

/// Sweep curve: `method,dims,mean_accuracy,std`.
inline void write_summary_csv(const std::vector<ExperimentResult>& results, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "method,dims,mean_accuracy,std\n";
    for (const auto& r : results) {
        out << r.method << ',' << r.dims << ',' << detail::format_double(r.mean_accuracy) << ','
            << detail::format_double(r.accuracy_std) << "\n";
    }
    if (!out) throw FormatError("write to '" + path + "' failed");
}

/// `method,mean_rank` rows sorted best first.
inline void write_rank_csv(const RankTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "method,mean_rank\n";
    const Vector mean = table.mean_ranks();
    std::vector<int> order(table.methods.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return mean(a) < mean(b); });
    for (int j : order) {
        out << table.methods[static_cast<std::size_t>(j)] << ',' << detail::format_double(mean(j)) << "\n";
    }
    if (!out) throw FormatError("write to '" + path + "' failed");
}

inline void write_nemenyi_csv(const RankTable& table, double alpha, const std::string& path) {
    const auto [chi2, df] = friedman_test(table);
    const double cd = nemenyi_cd(static_cast<int>(table.methods.size()), static_cast<int>(table.blocks.size()), alpha);
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "alpha,k,n_blocks,critical_difference,friedman_chi2,friedman_df\n";
    out << detail::format_double(alpha) << ',' << table.methods.size() << ',' << table.blocks.size() << ','
        << detail::format_double(cd) << ',' << detail::format_double(chi2) << ',' << df << "\n";
    if (!out) throw FormatError("write to '" + path + "' failed");
}

}  // namespace emgsa
