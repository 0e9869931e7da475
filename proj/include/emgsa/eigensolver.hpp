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
#include <numeric>
#include <vector>

#include "emgsa/common.hpp"

namespace emgsa {

struct EigenDecomposition {
    Vector values;   // nonincreasing
    Matrix vectors;  // column i pairs with values(i)
};

/// Dense symmetric eigendecomposition by cyclic Jacobi sweeps. This is the one
/// eigensolver shared by PCA, kernel PCA, ICA whitening and CORAL. Converges
/// when the off-diagonal Frobenius norm falls below tol * ||A||_F.
inline EigenDecomposition jacobi_eigh(const Matrix& a_in, double tol = 1e-12, int max_sweeps = 100) {
    if (a_in.rows() != a_in.cols()) throw ArgumentError("jacobi_eigh: matrix must be square");
    const Eigen::Index n = a_in.rows();
    Matrix a = (a_in + a_in.transpose()) / 2.0;  // enforce exact symmetry
    Matrix v = Matrix::Identity(n, n);

    const double norm_a = std::max(a.norm(), 1e-300);
    auto off_norm = [&]() {
        double s = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) s += a(p, q) * a(p, q);
        return std::sqrt(2.0 * s);
    };

    bool converged = n < 2;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        if (off_norm() <= tol * norm_a) {
            converged = true;
            break;
        }
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                const double app = a(p, p), aqq = a(q, q);
                a(p, p) = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                a(q, q) = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (Eigen::Index r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    const double arp = a(r, p), arq = a(r, q);
                    a(r, p) = c * arp - s * arq;
                    a(p, r) = a(r, p);
                    a(r, q) = s * arp + c * arq;
                    a(q, r) = a(r, q);
                }
                for (Eigen::Index r = 0; r < n; ++r) {
                    const double vrp = v(r, p), vrq = v(r, q);
                    v(r, p) = c * vrp - s * vrq;
                    v(r, q) = s * vrp + c * vrq;
                }
            }
        }
        if (off_norm() <= tol * norm_a) converged = true;
    }
    if (!converged) throw NumericError("jacobi_eigh: no convergence after max sweeps");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

    EigenDecomposition out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
        out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
    }
    return out;
}

/// Fixes the sign ambiguity of spectral bases: each column's largest-magnitude
/// entry is made positive, ties broken by lowest row index.
inline void apply_sign_convention(Matrix& basis) {
    for (Eigen::Index j = 0; j < basis.cols(); ++j) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < basis.rows(); ++i) {
            const double mag = std::abs(basis(i, j));
            if (mag > best) {
                best = mag;
                arg = i;
            }
        }
        if (basis(arg, j) < 0.0) basis.col(j) *= -1.0;
    }
}

}  // namespace emgsa
