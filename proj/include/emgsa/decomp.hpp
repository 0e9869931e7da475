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
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "emgsa/common.hpp"
#include "emgsa/dataset.hpp"
#include "emgsa/eigensolver.hpp"
#include "emgsa/rng.hpp"

namespace emgsa {

enum class ReductionMethod { pca, kpca, ica, tsvd };

inline std::string to_string(ReductionMethod m) {
    switch (m) {
        case ReductionMethod::pca: return "pca";
        case ReductionMethod::kpca: return "kpca";
        case ReductionMethod::ica: return "ica";
        case ReductionMethod::tsvd: return "tsvd";
    }
    return "?";
}

struct KernelSpec {
    enum class Kind { linear, cosine, polynomial };
    Kind kind = Kind::cosine;
    int poly_degree = 3;
    double poly_gamma = -1.0;  // <= 0 means 1 / n_features, resolved at fit time
    double poly_coef0 = 1.0;

    void validate() const {
        if (poly_degree < 1) throw ArgumentError("kernel: poly_degree must be >= 1");
    }
};

inline std::string to_string(KernelSpec::Kind k) {
    switch (k) {
        case KernelSpec::Kind::linear: return "linear";
        case KernelSpec::Kind::cosine: return "cosine";
        case KernelSpec::Kind::polynomial: return "polynomial";
    }
    return "?";
}

/// Per-column z-scoring fit on training rows; zero-variance columns get
/// standard deviation 1 so they pass through centered.
struct Standardizer {
    Vector mean;
    Vector std;

    static Standardizer fit(const Matrix& x) {
        if (x.rows() < 1) throw ArgumentError("standardizer: empty input");
        Standardizer s;
        s.mean = x.colwise().mean();
        s.std.resize(x.cols());
        const double denom = x.rows() > 1 ? static_cast<double>(x.rows() - 1) : 1.0;
        Vector sd(x.cols());
        double scale = 0.0;
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double var = (x.col(j).array() - s.mean(j)).square().sum() / denom;
            sd(j) = std::sqrt(var);
            scale = std::max(scale, std::abs(s.mean(j)) + sd(j));
        }
        // Columns whose spread sits at the numerical noise floor of the data
        // (e.g. trailing full-rank PCA scores) count as constant; scaling
        // them up would turn rounding noise into O(1) features.
        const double floor = 1e-12 * scale;
        for (Eigen::Index j = 0; j < x.cols(); ++j) s.std(j) = sd(j) > floor ? sd(j) : 1.0;
        return s;
    }

    Matrix apply(const Matrix& x) const {
        if (x.cols() != mean.size()) throw ArgumentError("standardizer: column count mismatch");
        return (x.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
    }

    FeatureMatrix apply(const FeatureMatrix& x) const {
        FeatureMatrix out = x;
        out.values = apply(x.values);
        return out;
    }
};

/// A fitted dimensionality-reduction transform. Which fields are populated
/// depends on `method` (and, for kpca, on whether the exact primal shortcut
/// was used instead of the Gram-matrix route).
struct Projection {
    ReductionMethod method = ReductionMethod::pca;
    int dims = 0;
    Matrix basis;        // pca/tsvd/kpca-primal: p x d map; ica: p x d whitening
    Vector center;       // pca/ica/kpca-primal: training mean (post L2 for cosine)
    Vector eigenvalues;  // d, nonincreasing, >= 0; kpca values are on the
                         // covariance scale (kernel eigenvalue / (n-1))

    // kpca Gram route
    Matrix train_refs;   // m x p retained training rows (L2-normalized for cosine)
    Matrix alphas;       // m x d dual coefficients, scaled to unit train variance
    Matrix train_scores; // m x d scores of the retained rows
    Vector kernel_row_means;
    double kernel_grand_mean = 0.0;
    KernelSpec kernel;
    bool kpca_primal = false;

    // ica
    Matrix unmixing;  // d x d orthonormal rotation applied after whitening
    bool converged = true;

    Eigen::Index input_features() const {
        if (method == ReductionMethod::kpca && !kpca_primal) return train_refs.cols();
        return basis.rows();
    }
};

namespace detail {

inline void check_fit_dims(Eigen::Index n, Eigen::Index p, int d, Eigen::Index d_max, const char* op) {
    if (n < 2) throw ArgumentError(std::string(op) + ": need at least 2 rows");
    if (d < 1 || d > d_max) {
        throw ArgumentError(std::string(op) + ": d=" + std::to_string(d) + " out of range [1, " +
                            std::to_string(d_max) + "] for " + std::to_string(n) + "x" + std::to_string(p) +
                            " input");
    }
}

inline int count_positive(const Vector& values, double cutoff_scale = 1e-10) {
    if (values.size() == 0) return 0;
    const double cutoff = std::max(values(0), 0.0) * cutoff_scale;
    int r = 0;
    for (Eigen::Index i = 0; i < values.size(); ++i)
        if (values(i) > cutoff && values(i) > 0.0) ++r;
    return r;
}

/// Gram matrix between row sets. Cosine inputs must already be L2-normalized
/// (the kernel is then evaluated as linear).
inline Matrix kernel_gram(const Matrix& a, const Matrix& b, const KernelSpec& k) {
    Matrix dots = a * b.transpose();
    if (k.kind == KernelSpec::Kind::polynomial) {
        const double gamma = k.poly_gamma > 0.0 ? k.poly_gamma : 1.0 / static_cast<double>(a.cols());
        return ((gamma * dots).array() + k.poly_coef0).pow(k.poly_degree).matrix();
    }
    return dots;
}

/// Stratified-by-(subject, label) seeded subsample of at most m rows, used to
/// cap the Gram matrix size. Returns sorted row indices.
inline std::vector<int> stratified_subsample(const FeatureMatrix& x, int m, std::uint64_t seed) {
    const int n = static_cast<int>(x.rows());
    std::vector<int> all(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    if (n <= m) return all;

    std::map<std::pair<int, int>, std::vector<int>> groups;
    for (int i = 0; i < n; ++i)
        groups[{x.subjects[static_cast<std::size_t>(i)], x.labels[static_cast<std::size_t>(i)]}].push_back(i);

    // Largest-remainder allocation of m across groups.
    std::vector<std::pair<double, std::pair<int, int>>> remainders;
    std::map<std::pair<int, int>, int> take;
    int assigned = 0;
    for (const auto& [key, idx] : groups) {
        const double exact = static_cast<double>(m) * static_cast<double>(idx.size()) / static_cast<double>(n);
        const int base = static_cast<int>(exact);
        take[key] = std::min(base, static_cast<int>(idx.size()));
        assigned += take[key];
        remainders.push_back({exact - base, key});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (const auto& [rem, key] : remainders) {
        if (assigned >= m) break;
        if (take[key] < static_cast<int>(groups[key].size())) {
            ++take[key];
            ++assigned;
        }
    }

    Rng rng(derive_seed(seed, {0x6b706361ULL}));  // "kpca"
    std::vector<int> picked;
    picked.reserve(static_cast<std::size_t>(m));
    for (auto& [key, idx] : groups) {
        auto chosen = rng.sample_without_replacement(idx.size(), static_cast<std::size_t>(take[key]));
        for (auto c : chosen) picked.push_back(idx[c]);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

}  // namespace detail

/// PCA on the sample covariance (divisor n-1). Basis columns follow the
/// largest-magnitude-entry-positive sign convention.
inline Projection fit_pca(const FeatureMatrix& x, int d) {
    const Eigen::Index n = x.rows(), p = x.cols();
    detail::check_fit_dims(n, p, d, std::min(n, p), "fit_pca");
    Projection proj;
    proj.method = ReductionMethod::pca;
    proj.dims = d;
    proj.center = x.values.colwise().mean();
    const Matrix xc = x.values.rowwise() - proj.center.transpose();
    const Matrix cov = (xc.transpose() * xc) / static_cast<double>(n - 1);
    EigenDecomposition eig = jacobi_eigh(cov);
    proj.basis = eig.vectors.leftCols(d);
    apply_sign_convention(proj.basis);
    proj.eigenvalues = eig.values.head(d).cwiseMax(0.0);
    return proj;
}

/// Truncated SVD: top right singular vectors of the uncentered data.
/// eigenvalues(i) holds (singular value)^2 / (n-1).
inline Projection fit_tsvd(const FeatureMatrix& x, int d) {
    const Eigen::Index n = x.rows(), p = x.cols();
    detail::check_fit_dims(n, p, d, std::min(n, p), "fit_tsvd");
    Projection proj;
    proj.method = ReductionMethod::tsvd;
    proj.dims = d;
    const Matrix gram = x.values.transpose() * x.values;
    EigenDecomposition eig = jacobi_eigh(gram);
    proj.basis = eig.vectors.leftCols(d);
    apply_sign_convention(proj.basis);
    proj.eigenvalues = (eig.values.head(d) / static_cast<double>(n - 1)).cwiseMax(0.0);
    return proj;
}

struct KpcaOptions {
    int max_train_refs = 2000;  // Gram matrix row cap; excess rows subsampled
    std::uint64_t seed = 0;     // drives the subsample only
};

/// Kernel PCA via the double-centered Gram matrix. Dual coefficients are
/// scaled so the retained training rows project with unit variance per
/// component. When the input exceeds max_train_refs rows, a seeded subsample
/// stratified by (subject, label) is retained.
inline Projection fit_kpca(const FeatureMatrix& x, const KernelSpec& kernel, int d, const KpcaOptions& opts = {}) {
    kernel.validate();
    const Eigen::Index n_full = x.rows();
    detail::check_fit_dims(n_full, x.cols(), d, n_full, "fit_kpca");

    FeatureMatrix train = x;
    if (n_full > opts.max_train_refs && opts.max_train_refs >= 2) {
        train = x.take_rows(detail::stratified_subsample(x, opts.max_train_refs, opts.seed));
    }
    if (kernel.kind == KernelSpec::Kind::cosine) train = l2_normalize_rows(train);
    const Eigen::Index n = train.rows();
    if (d > n) throw ArgumentError("fit_kpca: d exceeds retained training rows");

    Projection proj;
    proj.method = ReductionMethod::kpca;
    proj.dims = d;
    proj.kernel = kernel;
    if (kernel.kind == KernelSpec::Kind::polynomial && kernel.poly_gamma <= 0.0) {
        proj.kernel.poly_gamma = 1.0 / static_cast<double>(x.cols());
    }
    proj.train_refs = train.values;

    Matrix k = detail::kernel_gram(train.values, train.values, proj.kernel);
    proj.kernel_row_means = k.rowwise().mean();
    proj.kernel_grand_mean = k.mean();
    Matrix kc = k;
    kc.colwise() -= proj.kernel_row_means;
    kc.rowwise() -= proj.kernel_row_means.transpose();
    kc.array() += proj.kernel_grand_mean;

    EigenDecomposition eig = jacobi_eigh(kc);
    const int rank = detail::count_positive(eig.values);
    if (rank < d) {
        throw NumericError("fit_kpca: only " + std::to_string(rank) + " positive eigenvalues (effective rank " +
                           std::to_string(rank) + "), requested d=" + std::to_string(d));
    }
    proj.alphas.resize(n, d);
    proj.eigenvalues.resize(d);
    for (int i = 0; i < d; ++i) {
        const double lambda = eig.values(i);
        proj.alphas.col(i) = eig.vectors.col(i) * (std::sqrt(static_cast<double>(n - 1)) / lambda);
        proj.eigenvalues(i) = lambda / static_cast<double>(n - 1);
    }
    apply_sign_convention(proj.alphas);
    proj.train_scores = kc * proj.alphas;
    return proj;
}

/// Exact finite-dimensional route for the linear and cosine kernels: kernel
/// PCA on these kernels equals PCA of the (L2-normalized, for cosine) rows, so
/// the scores can be produced by a p x d primal map with no Gram matrix and no
/// subsampling. Matches fit_kpca output up to per-column sign.
inline Projection fit_kpca_primal(const FeatureMatrix& x, const KernelSpec& kernel, int d) {
    kernel.validate();
    if (kernel.kind == KernelSpec::Kind::polynomial) {
        throw ArgumentError("fit_kpca_primal: polynomial kernel has no finite primal form");
    }
    const Eigen::Index n = x.rows(), p = x.cols();
    detail::check_fit_dims(n, p, d, n, "fit_kpca");

    FeatureMatrix train = kernel.kind == KernelSpec::Kind::cosine ? l2_normalize_rows(x) : x;
    Projection proj;
    proj.method = ReductionMethod::kpca;
    proj.kpca_primal = true;
    proj.dims = d;
    proj.kernel = kernel;
    proj.center = train.values.colwise().mean();
    const Matrix xc = train.values.rowwise() - proj.center.transpose();
    EigenDecomposition eig = jacobi_eigh(xc.transpose() * xc);
    const int rank = detail::count_positive(eig.values);
    if (rank < d) {
        throw NumericError("fit_kpca: only " + std::to_string(rank) + " positive eigenvalues (effective rank " +
                           std::to_string(rank) + "), requested d=" + std::to_string(d));
    }
    proj.basis.resize(p, d);
    proj.eigenvalues.resize(d);
    for (int i = 0; i < d; ++i) {
        const double lambda = eig.values(i);  // kernel-matrix eigenvalue
        proj.basis.col(i) = eig.vectors.col(i) * std::sqrt(static_cast<double>(n - 1) / lambda);
        proj.eigenvalues(i) = lambda / static_cast<double>(n - 1);
    }
    apply_sign_convention(proj.basis);
    return proj;
}

/// FastICA with the log-cosh contrast and symmetric decorrelation, on a PCA
/// whitening of the input. Non-convergence within max_iters is recorded in
/// Projection::converged rather than thrown.
inline Projection fit_ica(const FeatureMatrix& x, int d, std::uint64_t seed, int max_iters = 500) {
    const Eigen::Index n = x.rows(), p = x.cols();
    detail::check_fit_dims(n, p, d, std::min(n, p), "fit_ica");

    Projection pca = fit_pca(x, d);
    const int rank = detail::count_positive(pca.eigenvalues);
    if (rank < d) {
        throw NumericError("fit_ica: data rank " + std::to_string(rank) + " below requested d=" + std::to_string(d));
    }
    Projection proj;
    proj.method = ReductionMethod::ica;
    proj.dims = d;
    proj.center = pca.center;
    proj.eigenvalues = pca.eigenvalues;
    proj.basis = pca.basis * pca.eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal();

    const Matrix z = (x.values.rowwise() - proj.center.transpose()) * proj.basis;  // n x d, white

    auto decorrelate = [](const Matrix& w) {
        EigenDecomposition e = jacobi_eigh(w * w.transpose());
        Matrix inv_sqrt = e.vectors * e.values.cwiseMax(1e-300).cwiseSqrt().cwiseInverse().asDiagonal() *
                          e.vectors.transpose();
        return Matrix(inv_sqrt * w);
    };

    Rng rng(derive_seed(seed, {0x69636131ULL}));  // "ica1"
    Matrix w(d, d);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
    w = decorrelate(w);

    proj.converged = false;
    const double n_inv = 1.0 / static_cast<double>(n);
    for (int iter = 0; iter < max_iters; ++iter) {
        const Matrix g = (z * w.transpose()).array().tanh();        // n x d
        const Vector g_prime_mean = (1.0 - g.array().square()).colwise().mean();
        Matrix w_new = (g.transpose() * z) * n_inv - g_prime_mean.asDiagonal() * w;
        w_new = decorrelate(w_new);
        double delta = 0.0;
        for (int i = 0; i < d; ++i) {
            delta = std::max(delta, std::abs(1.0 - std::abs(w_new.row(i).dot(w.row(i)))));
        }
        w = w_new;
        if (delta < 1e-6) {
            proj.converged = true;
            break;
        }
    }
    proj.unmixing = w;

    // Deterministic component signs via the composed input-space loadings.
    Matrix composed = proj.basis * proj.unmixing.transpose();
    for (Eigen::Index j = 0; j < composed.cols(); ++j) {
        Eigen::Index arg = 0;
        composed.col(j).cwiseAbs().maxCoeff(&arg);
        if (composed(arg, j) < 0.0) proj.unmixing.row(j) *= -1.0;
    }
    return proj;
}

/// Plot-data export for projected coordinates: `subject,gesture,c0,c1[,...]`.
inline void save_scores_csv(const FeatureMatrix& scores, const std::string& path) {
    scores.check_consistent();
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "subject,gesture";
    for (Eigen::Index j = 0; j < scores.cols(); ++j) out << ",c" << j;
    out << "\n";
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        out << scores.subjects[static_cast<std::size_t>(i)] << ',' << scores.labels[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < scores.cols(); ++j) out << ',' << detail::format_double(scores.values(i, j));
        out << "\n";
    }
    if (!out) throw FormatError("write to '" + path + "' failed");
}

/// Applies a fitted projection to new rows; labels and subjects pass through.
inline FeatureMatrix project(const Projection& p, const FeatureMatrix& x) {
    if (x.cols() != p.input_features()) {
        throw ArgumentError("project: input has " + std::to_string(x.cols()) + " features, projection expects " +
                            std::to_string(p.input_features()));
    }
    FeatureMatrix out;
    out.labels = x.labels;
    out.subjects = x.subjects;
    switch (p.method) {
        case ReductionMethod::pca:
            out.values = (x.values.rowwise() - p.center.transpose()) * p.basis;
            break;
        case ReductionMethod::tsvd:
            out.values = x.values * p.basis;
            break;
        case ReductionMethod::ica:
            out.values = (x.values.rowwise() - p.center.transpose()) * p.basis * p.unmixing.transpose();
            break;
        case ReductionMethod::kpca: {
            const bool cosine = p.kernel.kind == KernelSpec::Kind::cosine;
            const FeatureMatrix xn = cosine ? l2_normalize_rows(x) : x;
            if (p.kpca_primal) {
                out.values = (xn.values.rowwise() - p.center.transpose()) * p.basis;
            } else {
                Matrix kx = detail::kernel_gram(xn.values, p.train_refs, p.kernel);
                const Vector row_mean = kx.rowwise().mean();
                kx.colwise() -= row_mean;
                kx.rowwise() -= p.kernel_row_means.transpose();
                kx.array() += p.kernel_grand_mean;
                out.values = kx * p.alphas;
            }
            break;
        }
    }
    return out;
}

}  // namespace emgsa
