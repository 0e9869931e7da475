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
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "emgsa/common.hpp"
#include "emgsa/dataset.hpp"
#include "emgsa/decomp.hpp"
#include "emgsa/eigensolver.hpp"
#include "emgsa/rng.hpp"

namespace emgsa {

enum class Domain { source, target };

// ---------------------------------------------------------------------------
// Subspace alignment
// ---------------------------------------------------------------------------

/// Subspace alignment model: source rows map through Xs * M, target rows
/// through Xt, where M = Xs^T Xt. With l2_mode the inputs are L2-row-
/// normalized first, which makes the PCA bases equal to cosine-kernel KPCA
/// bases.
struct SAModel {
    Matrix source_basis;  // p x d, orthonormal columns
    Matrix target_basis;  // p x d, orthonormal columns
    Matrix alignment;     // d x d, Xs^T Xt
    Vector source_center;
    Vector target_center;
    bool l2_mode = false;
    int dims = 0;
};

namespace detail {

inline void check_domain_rank(const Projection& pca, int d, const char* which) {
    const int rank = count_positive(pca.eigenvalues);
    if (rank < d) {
        throw NumericError(std::string("fit_sa: ") + which + " domain has effective rank " + std::to_string(rank) +
                           " < requested d=" + std::to_string(d));
    }
}

}  // namespace detail

/// Fits PCA bases of both domains (unsupervised; labels unread) and the
/// alignment matrix between them.
inline SAModel fit_sa(const FeatureMatrix& source, const FeatureMatrix& target, int d, bool l2_mode) {
    if (source.cols() != target.cols()) throw ArgumentError("fit_sa: domains disagree on feature count");
    const FeatureMatrix s = l2_mode ? l2_normalize_rows(source) : source;
    const FeatureMatrix t = l2_mode ? l2_normalize_rows(target) : target;
    Projection ps = fit_pca(s, d);
    Projection pt = fit_pca(t, d);
    detail::check_domain_rank(ps, d, "source");
    detail::check_domain_rank(pt, d, "target");

    SAModel m;
    m.source_basis = ps.basis;
    m.target_basis = pt.basis;
    m.alignment = ps.basis.transpose() * pt.basis;
    m.source_center = ps.center;
    m.target_center = pt.center;
    m.l2_mode = l2_mode;
    m.dims = d;
    return m;
}

/// Maps rows into the aligned subspace: source rows via Xs * M, target rows
/// via Xt, each after subtracting the fit-time domain center.
inline FeatureMatrix transform_sa(const SAModel& m, const FeatureMatrix& x, Domain domain) {
    if (x.cols() != m.source_basis.rows()) {
        throw ArgumentError("transform_sa: input has " + std::to_string(x.cols()) + " features, model expects " +
                            std::to_string(m.source_basis.rows()));
    }
    const FeatureMatrix xn = m.l2_mode ? l2_normalize_rows(x) : x;
    FeatureMatrix out;
    out.labels = x.labels;
    out.subjects = x.subjects;
    if (domain == Domain::source) {
        out.values = (xn.values.rowwise() - m.source_center.transpose()) * (m.source_basis * m.alignment);
    } else {
        out.values = (xn.values.rowwise() - m.target_center.transpose()) * m.target_basis;
    }
    return out;
}

// ---------------------------------------------------------------------------
// CORAL
// ---------------------------------------------------------------------------

/// Correlation alignment: a linear map A = Cs^{-1/2} Ct^{1/2} that recolors
/// source rows so their covariance matches the target's.
struct CoralModel {
    Matrix map;  // p x p
    double lambda = 0.0;
    Vector source_center;
    Vector target_center;
};

namespace detail {

/// Symmetric matrix power through the shared eigensolver. Eigenvalues at or
/// below `floor` make the matrix non-PD for negative powers.
inline Matrix spd_power(const Matrix& a, double power, const std::string& context) {
    EigenDecomposition e = jacobi_eigh(a);
    const double biggest = std::max(e.values(0), 0.0);
    Vector powered(e.values.size());
    for (Eigen::Index i = 0; i < e.values.size(); ++i) {
        if (e.values(i) <= biggest * 1e-12 || e.values(i) <= 0.0) {
            throw NumericError(context);
        }
        powered(i) = std::pow(e.values(i), power);
    }
    return e.vectors * powered.asDiagonal() * e.vectors.transpose();
}

inline Matrix sample_covariance(const Matrix& x) {
    const Matrix centered = x.rowwise() - x.colwise().mean();
    return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

}  // namespace detail

/// lambda < 0 selects the scale-aware default 1e-3 * trace(Cs) / n_features.
inline CoralModel fit_coral(const FeatureMatrix& source, const FeatureMatrix& target, double lambda = -1.0) {
    if (source.cols() != target.cols()) throw ArgumentError("fit_coral: domains disagree on feature count");
    if (source.rows() < 2 || target.rows() < 2) throw ArgumentError("fit_coral: both domains need >= 2 rows");
    const Eigen::Index p = source.cols();

    Matrix cs = detail::sample_covariance(source.values);
    Matrix ct = detail::sample_covariance(target.values);
    if (lambda < 0.0) lambda = 1e-3 * cs.trace() / static_cast<double>(p);
    cs.diagonal().array() += lambda;
    ct.diagonal().array() += lambda;

    CoralModel m;
    m.lambda = lambda;
    m.source_center = source.values.colwise().mean();
    m.target_center = target.values.colwise().mean();
    const std::string hint = "fit_coral: covariance not positive definite; increase lambda";
    m.map = detail::spd_power(cs, -0.5, hint) * detail::spd_power(ct, 0.5, hint);
    return m;
}

/// Recolors source-domain rows into the target domain:
/// (x - source_center) * A + target_center.
inline FeatureMatrix transform_coral(const CoralModel& m, const FeatureMatrix& x) {
    if (x.cols() != m.map.rows()) {
        throw ArgumentError("transform_coral: input has " + std::to_string(x.cols()) + " features, model expects " +
                            std::to_string(m.map.rows()));
    }
    FeatureMatrix out;
    out.labels = x.labels;
    out.subjects = x.subjects;
    out.values = ((x.values.rowwise() - m.source_center.transpose()) * m.map).rowwise() + m.target_center.transpose();
    return out;
}

// ---------------------------------------------------------------------------
// KLIEP
// ---------------------------------------------------------------------------

/// Importance weights w(x) = sum_b alpha_b k_sigma(x, c_b) fitted so the
/// weighted source density matches the target density in KL divergence.
/// The weights average to one over the source rows.
struct KliepModel {
    Matrix basis_centers;  // n_b x p rows drawn from the target
    double sigma = 0.0;
    Vector alpha;    // n_b, nonnegative
    Vector weights;  // n_source, positive, mean 1
    std::vector<double> objective_trace;  // accepted ascent values, nondecreasing
};

namespace detail {

inline Matrix gaussian_kernel(const Matrix& a, const Matrix& b, double sigma) {
    const Vector a_sq = a.rowwise().squaredNorm();
    const Vector b_sq = b.rowwise().squaredNorm();
    Matrix d2 = (-2.0 * (a * b.transpose())).colwise() + a_sq;
    d2 = d2.rowwise() + b_sq.transpose();
    Matrix k = (-d2.cwiseMax(0.0) / (2.0 * sigma * sigma)).array().exp().matrix();
    // Eigen's vectorized exp clamps large negative arguments to a denormal
    // instead of underflowing; flush those to an honest zero.
    return (k.array() < 1e-300).select(0.0, k);
}

struct KliepFit {
    Vector alpha;
    double objective = 0.0;
    std::vector<double> trace;
};

/// Maximizes sum_t log(A_t . alpha) s.t. alpha >= 0 and b . alpha = 1 by
/// projected gradient ascent with backtracking (initial step 1, shrink 0.5,
/// max 200 iterations, relative improvement tolerance 1e-7).
inline KliepFit kliep_optimize(const Matrix& a, const Vector& b) {
    const auto objective = [&](const Vector& alpha) {
        const Vector v = a * alpha;
        if ((v.array() <= 0.0).any()) return -std::numeric_limits<double>::infinity();
        return v.array().log().sum();
    };
    const auto project = [&](Vector alpha) -> Vector {
        alpha = alpha.cwiseMax(0.0);
        const double scale = b.dot(alpha);
        if (scale <= 0.0) return Vector::Zero(alpha.size());
        return alpha / scale;
    };

    KliepFit fit;
    const double b_sum = b.sum();
    if (b_sum <= 0.0) throw NumericError("kliep: degenerate constraint vector");
    fit.alpha = Vector::Constant(b.size(), 1.0 / b_sum);
    fit.objective = objective(fit.alpha);
    fit.trace.push_back(fit.objective);

    for (int iter = 0; iter < 200; ++iter) {
        const Vector scores = a * fit.alpha;
        const Vector grad = a.transpose() * scores.cwiseInverse();
        double step = 1.0;
        bool accepted = false;
        while (step > 1e-14) {
            const Vector candidate = project(fit.alpha + step * grad);
            if (candidate.size() > 0 && candidate.cwiseAbs().sum() > 0.0) {
                const double cand_obj = objective(candidate);
                if (cand_obj > fit.objective) {
                    const double improvement = (cand_obj - fit.objective) /
                                               std::max(std::abs(fit.objective), 1.0);
                    fit.alpha = candidate;
                    fit.objective = cand_obj;
                    fit.trace.push_back(cand_obj);
                    accepted = true;
                    if (improvement < 1e-7) return fit;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    return fit;
}

}  // namespace detail

/// Median pairwise target distance scaled by {1/4, 1/2, 1, 2, 4}; the usual
/// bandwidth grid when nothing better is known.
inline std::vector<double> default_sigma_grid(const FeatureMatrix& target) {
    const Eigen::Index n = std::min<Eigen::Index>(target.rows(), 500);
    std::vector<double> dists;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            dists.push_back((target.values.row(i) - target.values.row(j)).norm());
    if (dists.empty()) throw ArgumentError("default_sigma_grid: need at least 2 target rows");
    std::nth_element(dists.begin(), dists.begin() + static_cast<long>(dists.size() / 2), dists.end());
    const double median = std::max(dists[dists.size() / 2], 1e-12);
    return {0.25 * median, 0.5 * median, median, 2.0 * median, 4.0 * median};
}

/// Fits KLIEP weights: Gaussian basis centers are a seeded subsample of the
/// target, sigma is chosen by 5-fold likelihood cross-validation on target
/// rows, and the final alpha is refit on the full target.
inline KliepModel fit_kliep(const FeatureMatrix& source, const FeatureMatrix& target,
                            const std::vector<double>& sigma_grid, int n_basis, std::uint64_t seed) {
    if (source.cols() != target.cols()) throw ArgumentError("fit_kliep: domains disagree on feature count");
    if (sigma_grid.empty()) throw ArgumentError("fit_kliep: sigma grid is empty");
    for (double s : sigma_grid)
        if (!(s > 0.0)) throw ArgumentError("fit_kliep: sigma values must be positive");
    const Eigen::Index n_target = target.rows();
    const Eigen::Index n_source = source.rows();
    if (n_basis < 1) throw ArgumentError("fit_kliep: n_basis must be >= 1");
    if (n_target < 2 || n_source < 1) throw ArgumentError("fit_kliep: not enough rows");

    const Eigen::Index n_b = std::min<Eigen::Index>(n_basis, n_target);
    Rng rng(derive_seed(seed, {0x6b6c6965ULL}));  // "klie"
    auto chosen = rng.sample_without_replacement(static_cast<std::size_t>(n_target), static_cast<std::size_t>(n_b));
    std::sort(chosen.begin(), chosen.end());
    Matrix centers(n_b, target.cols());
    for (Eigen::Index i = 0; i < n_b; ++i) centers.row(i) = target.values.row(static_cast<Eigen::Index>(chosen[static_cast<std::size_t>(i)]));

    const auto check_responses = [&](const Matrix& k, double sigma) {
        for (Eigen::Index i = 0; i < k.rows(); ++i) {
            if (k.row(i).maxCoeff() <= 0.0) {
                throw NumericError("fit_kliep: all-zero kernel responses at sigma=" + detail::format_double(sigma));
            }
        }
    };

    // 5-fold cross-validated mean held-out log likelihood per sigma.
    const int cv_folds = n_target >= 10 ? 5 : 2;
    std::vector<int> dummy_labels(static_cast<std::size_t>(n_target), 0);
    const auto folds = kfold_indices(dummy_labels, cv_folds, derive_seed(seed, {0x6376ULL}), false);

    double best_sigma = sigma_grid.front();
    double best_score = -std::numeric_limits<double>::infinity();
    for (double sigma : sigma_grid) {
        const Matrix k_target = detail::gaussian_kernel(target.values, centers, sigma);
        check_responses(k_target, sigma);
        const Matrix k_source = detail::gaussian_kernel(source.values, centers, sigma);
        const Vector b = k_source.colwise().mean();
        double score = 0.0;
        for (const auto& fold : folds) {
            Matrix a_train(fold.train.size(), n_b);
            for (std::size_t i = 0; i < fold.train.size(); ++i) a_train.row(static_cast<Eigen::Index>(i)) = k_target.row(fold.train[i]);
            const auto fit = detail::kliep_optimize(a_train, b);
            double held_out = 0.0;
            for (int idx : fold.test) {
                const double v = k_target.row(idx).dot(fit.alpha);
                held_out += v > 0.0 ? std::log(v) : -1e30;
            }
            score += held_out / static_cast<double>(fold.test.size());
        }
        score /= static_cast<double>(folds.size());
        if (score > best_score) {
            best_score = score;
            best_sigma = sigma;
        }
    }

    const Matrix k_target = detail::gaussian_kernel(target.values, centers, best_sigma);
    const Matrix k_source = detail::gaussian_kernel(source.values, centers, best_sigma);
    check_responses(k_target, best_sigma);
    const Vector b = k_source.colwise().mean();
    auto fit = detail::kliep_optimize(k_target, b);

    KliepModel m;
    m.basis_centers = centers;
    m.sigma = best_sigma;
    m.alpha = fit.alpha;
    m.objective_trace = fit.trace;
    m.weights = k_source * fit.alpha;
    const double mean_w = m.weights.mean();
    if (!(mean_w > 0.0)) throw NumericError("fit_kliep: degenerate weights");
    m.weights /= mean_w;
    return m;
}

/// The per-source-row loss multipliers consumed by the classifier.
inline const Vector& source_weights(const KliepModel& m) { return m.weights; }

}  // namespace emgsa
