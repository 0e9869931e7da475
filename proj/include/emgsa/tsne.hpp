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

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "emgsa/common.hpp"
#include "emgsa/dataset.hpp"
#include "emgsa/rng.hpp"

namespace emgsa {

/// Exact t-SNE hyperparameters. Early exaggeration applies to the first 250
/// iterations; momentum switches from 0.5 to 0.8 at iteration 250.
struct TsneConfig {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    std::uint64_t seed = 0;
};

struct TsneResult {
    Matrix embedding;                            // n x 2
    std::vector<std::pair<int, double>> kl_trace;  // (iteration, KL against the true P)
    bool size_warning = false;                   // n < 3 * perplexity
    std::vector<int> labels;                     // passed through from the input
    std::vector<int> subjects;

    double kl_at(int iteration) const {
        double value = 0.0;
        for (const auto& [it, kl] : kl_trace)
            if (it <= iteration) value = kl;
        return value;
    }
};

namespace detail {

/// Row-conditional Gaussian affinities with per-row bandwidths found by
/// binary search so every row's entropy hits log(perplexity).
inline Matrix gaussian_affinities(const Matrix& sq_dist, double perplexity) {
    const Eigen::Index n = sq_dist.rows();
    Matrix p = Matrix::Zero(n, n);
    const double target_entropy = std::log(perplexity);
    for (Eigen::Index i = 0; i < n; ++i) {
        double beta = 1.0, beta_min = -1.0, beta_max = -1.0;
        Vector row(n);
        for (int iter = 0; iter < 200; ++iter) {
            double sum = 0.0, weighted = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) {
                    row(j) = 0.0;
                    continue;
                }
                row(j) = std::exp(-beta * sq_dist(i, j));
                sum += row(j);
                weighted += row(j) * sq_dist(i, j);
            }
            if (sum <= 0.0) sum = 1e-300;
            const double entropy = std::log(sum) + beta * weighted / sum;
            const double diff = entropy - target_entropy;
            if (std::abs(diff) < 1e-9) break;
            if (diff > 0.0) {  // entropy too high: narrow the kernel
                beta_min = beta;
                beta = beta_max < 0.0 ? beta * 2.0 : (beta + beta_max) / 2.0;
            } else {
                beta_max = beta;
                beta = beta_min < 0.0 ? beta / 2.0 : (beta + beta_min) / 2.0;
            }
        }
        double sum = row.sum();
        if (sum <= 0.0) sum = 1e-300;
        p.row(i) = row.transpose() / sum;
    }
    return p;
}

}  // namespace detail

/// Exact (quadratic) t-SNE to 2 dimensions with the standard schedule:
/// symmetrized affinities, early exaggeration, momentum switch, plain
/// momentum gradient descent. Deterministic in cfg.seed. The KL trace is
/// recorded against the unexaggerated P (every iteration for n <= 600,
/// every 25 plus the schedule boundaries otherwise).
inline TsneResult tsne_embed(const FeatureMatrix& z, const TsneConfig& cfg = {}) {
    const Eigen::Index n = z.rows();
    if (cfg.iterations < 1) throw ArgumentError("tsne: iterations must be >= 1");
    if (!(cfg.perplexity >= 2.0) || cfg.perplexity >= static_cast<double>(n)) {
        throw ArgumentError("tsne: perplexity must be in [2, n_samples); got " + std::to_string(cfg.perplexity) +
                            " for n=" + std::to_string(n));
    }

    TsneResult result;
    result.labels = z.labels;
    result.subjects = z.subjects;
    result.size_warning = static_cast<double>(n) < 3.0 * cfg.perplexity;

    // Pairwise squared distances.
    Matrix sq_dist(n, n);
    {
        const Vector sq = z.values.rowwise().squaredNorm();
        sq_dist = (-2.0 * (z.values * z.values.transpose())).colwise() + sq;
        sq_dist = sq_dist.rowwise() + sq.transpose();
        sq_dist = sq_dist.cwiseMax(0.0);
        sq_dist.diagonal().setZero();
    }

    Matrix p = detail::gaussian_affinities(sq_dist, cfg.perplexity);
    p = ((p + p.transpose()) / (2.0 * static_cast<double>(n))).cwiseMax(1e-12).eval();

    Rng rng(derive_seed(cfg.seed, {0x74736e65ULL}));  // "tsne"
    Matrix y(n, 2);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = 1e-4 * rng.normal();
    Matrix velocity = Matrix::Zero(n, 2);

    const int exaggeration_until = std::min(250, cfg.iterations);
    const int trace_stride = n <= 600 ? 1 : 25;

    Matrix w(n, n), q_dist(n, n);
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        const bool exaggerated = iter < exaggeration_until;
        const double momentum = iter < 250 ? 0.5 : 0.8;

        // Student-t numerators w_ij = 1 / (1 + ||y_i - y_j||^2).
        const Vector ysq = y.rowwise().squaredNorm();
        q_dist = (-2.0 * (y * y.transpose())).colwise() + ysq;
        q_dist = q_dist.rowwise() + ysq.transpose();
        w = (1.0 + q_dist.array().cwiseMax(0.0)).inverse().matrix();
        w.diagonal().setZero();
        const double z_sum = std::max(w.sum(), 1e-300);

        Matrix grad = Matrix::Zero(n, 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            double gx = 0.0, gy = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                const double pij = exaggerated ? cfg.early_exaggeration * p(i, j) : p(i, j);
                const double mult = (pij - w(i, j) / z_sum) * w(i, j);
                gx += mult * (y(i, 0) - y(j, 0));
                gy += mult * (y(i, 1) - y(j, 1));
            }
            grad(i, 0) = 4.0 * gx;
            grad(i, 1) = 4.0 * gy;
        }

        velocity = momentum * velocity - cfg.learning_rate * grad;
        y += velocity;
        y.rowwise() -= y.colwise().mean();

        const bool record = (iter % trace_stride == 0) || iter == cfg.iterations - 1 || iter == 249 || iter == 250;
        if (record) {
            double kl = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (j == i) continue;
                    const double qij = std::max(w(i, j) / z_sum, 1e-300);
                    kl += p(i, j) * std::log(p(i, j) / qij);
                }
            }
            result.kl_trace.push_back({iter, kl});
        }
    }
    result.embedding = y;
    return result;
}

}  // namespace emgsa
