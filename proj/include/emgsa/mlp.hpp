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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emgsa/common.hpp"
#include "emgsa/dataset.hpp"
#include "emgsa/decomp.hpp"
#include "emgsa/rng.hpp"

namespace emgsa {

/// One-hidden-layer logistic MLP trained with Adam-style adaptive moments and
/// early stopping on a stratified validation split.
struct MlpConfig {
    int hidden_units = 100;
    int max_epochs = 1000;
    double validation_fraction = 0.1;
    int patience = 20;
    // With the logistic hidden layer, 1e-3 needs a few hundred Adam steps to
    // leave the initial plateau, which the patience window cuts short on
    // small training sets; 1e-2 clears it within a couple of epochs.
    double learning_rate = 1e-2;
    int batch_size = 32;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const {
        if (hidden_units < 1) throw ArgumentError("mlp: hidden_units must be >= 1");
        if (max_epochs < 1) throw ArgumentError("mlp: max_epochs must be >= 1");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
            throw ArgumentError("mlp: validation_fraction must be in (0, 1)");
        if (patience < 1) throw ArgumentError("mlp: patience must be >= 1");
        if (batch_size < 1) throw ArgumentError("mlp: batch_size must be >= 1");
        if (!(learning_rate > 0.0)) throw ArgumentError("mlp: learning_rate must be > 0");
    }
};

struct MlpModel {
    Matrix w1;  // input x hidden
    Vector b1;
    Matrix w2;  // hidden x classes
    Vector b2;
    Vector input_mean;
    Vector input_std;                   // zero-variance features carry std 1
    std::vector<double> training_trace;  // per-epoch validation accuracy
    int best_epoch = -1;
    int n_classes = 0;
};

namespace detail {

struct MlpParams {
    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;
};

inline Matrix mlp_forward_probabilities(const MlpParams& p, const Matrix& x) {
    const Matrix a1 = (1.0 + ((-((x * p.w1).rowwise() + p.b1.transpose())).array().exp())).inverse().matrix();
    Matrix logits = (a1 * p.w2).rowwise() + p.b2.transpose();
    const Vector row_max = logits.rowwise().maxCoeff();
    logits.colwise() -= row_max;
    Matrix probs = logits.array().exp().matrix();
    const Vector sums = probs.rowwise().sum();
    probs.array().colwise() /= sums.array();
    return probs;
}

/// Weighted cross-entropy over one batch, with analytic gradients when
/// `grads` is non-null. Mean over rows; weights multiply per-row losses.
inline double mlp_loss_and_grad(const MlpParams& p, const Matrix& x, const std::vector<int>& y, const Vector& w,
                                MlpParams* grads) {
    const Eigen::Index batch = x.rows();
    const Matrix a1 = (1.0 + ((-((x * p.w1).rowwise() + p.b1.transpose())).array().exp())).inverse().matrix();
    Matrix logits = (a1 * p.w2).rowwise() + p.b2.transpose();
    const Vector row_max = logits.rowwise().maxCoeff();
    logits.colwise() -= row_max;
    const Matrix exp_logits = logits.array().exp().matrix();
    const Vector sums = exp_logits.rowwise().sum();

    double loss = 0.0;
    for (Eigen::Index i = 0; i < batch; ++i) {
        const int label = y[static_cast<std::size_t>(i)];
        loss -= w(i) * (logits(i, label) - std::log(sums(i)));
    }
    loss /= static_cast<double>(batch);

    if (grads != nullptr) {
        Matrix dz2 = exp_logits.array().colwise() / sums.array();
        for (Eigen::Index i = 0; i < batch; ++i) {
            dz2(i, y[static_cast<std::size_t>(i)]) -= 1.0;
            dz2.row(i) *= w(i) / static_cast<double>(batch);
        }
        grads->w2 = a1.transpose() * dz2;
        grads->b2 = dz2.colwise().sum();
        const Matrix da1 = dz2 * p.w2.transpose();
        const Matrix dz1 = (da1.array() * a1.array() * (1.0 - a1.array())).matrix();
        grads->w1 = x.transpose() * dz1;
        grads->b1 = dz1.colwise().sum();
    }
    return loss;
}

struct AdamState {
    MlpParams m;
    MlpParams v;
    long t = 0;

    static AdamState zeros_like(const MlpParams& p) {
        AdamState s;
        s.m = {Matrix::Zero(p.w1.rows(), p.w1.cols()), Vector::Zero(p.b1.size()),
               Matrix::Zero(p.w2.rows(), p.w2.cols()), Vector::Zero(p.b2.size())};
        s.v = s.m;
        return s;
    }
};

template <typename T>
void adam_update(T& param, T& m, T& v, const T& g, const MlpConfig& cfg, double bc1, double bc2) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = (cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.array().square()).matrix();
    param.array() -= cfg.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.epsilon);
}

/// Stratified validation split: ~validation_fraction of each class, at least
/// one row per class kept in training. Classes with a single row stay in
/// training.
inline std::pair<std::vector<int>, std::vector<int>> validation_split(const std::vector<int>& labels,
                                                                      double fraction, std::uint64_t seed) {
    std::map<int, std::vector<int>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<int>(i));
    Rng rng(seed);
    std::vector<int> train, val;
    for (auto& [cls, idx] : by_class) {
        rng.shuffle(idx);
        const int n = static_cast<int>(idx.size());
        int n_val = static_cast<int>(std::floor(fraction * n + 0.5));
        n_val = std::clamp(n_val, n >= 2 ? 1 : 0, n - 1);
        for (int i = 0; i < n; ++i) (i < n_val ? val : train).push_back(idx[static_cast<std::size_t>(i)]);
    }
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    return {train, val};
}

}  // namespace detail

/// Trains on x.values with x.labels; optional per-row positive weights act as
/// loss multipliers (normalized to mean 1 over the training split, so any
/// positive rescaling of the weights leaves training unchanged). Returns the
/// parameters of the best-validation-accuracy epoch (first best on ties).
inline MlpModel train_mlp(const FeatureMatrix& x, const MlpConfig& cfg,
                          const std::optional<Vector>& sample_weights = std::nullopt) {
    cfg.validate();
    x.check_consistent();
    const Eigen::Index n = x.rows(), p = x.cols();
    if (n < 10) throw ArgumentError("train_mlp: need at least 10 rows");
    int max_label = 0, min_label = 0;
    for (int label : x.labels) {
        max_label = std::max(max_label, label);
        min_label = std::min(min_label, label);
    }
    if (min_label < 0) throw ArgumentError("train_mlp: negative label");
    std::vector<int> distinct(x.labels.begin(), x.labels.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) throw ArgumentError("train_mlp: need at least 2 classes");
    const int n_classes = max_label + 1;
    if (sample_weights) {
        if (sample_weights->size() != n) throw ArgumentError("train_mlp: sample_weights length mismatch");
        if ((sample_weights->array() <= 0.0).any()) throw ArgumentError("train_mlp: sample_weights must be positive");
    }

    const auto [train_idx, val_idx] =
        detail::validation_split(x.labels, cfg.validation_fraction, derive_seed(cfg.seed, {0x73706c74ULL}));
    if (val_idx.empty()) throw ArgumentError("train_mlp: validation split is empty");

    const FeatureMatrix train = x.take_rows(train_idx);
    const FeatureMatrix val = x.take_rows(val_idx);
    const Standardizer stats = Standardizer::fit(train.values);
    const Matrix x_train = stats.apply(train.values);
    const Matrix x_val = stats.apply(val.values);

    Vector w_train = Vector::Ones(x_train.rows());
    if (sample_weights) {
        for (std::size_t i = 0; i < train_idx.size(); ++i)
            w_train(static_cast<Eigen::Index>(i)) = (*sample_weights)(train_idx[i]);
        w_train /= w_train.mean();
    }

    // Uniform +-sqrt(6 / (fan_in + fan_out)) init, biases zero.
    Rng init_rng(derive_seed(cfg.seed, {0x696e6974ULL}));
    detail::MlpParams params;
    params.w1.resize(p, cfg.hidden_units);
    const double r1 = std::sqrt(6.0 / static_cast<double>(p + cfg.hidden_units));
    for (Eigen::Index i = 0; i < params.w1.size(); ++i) params.w1.data()[i] = init_rng.uniform(-r1, r1);
    params.b1 = Vector::Zero(cfg.hidden_units);
    params.w2.resize(cfg.hidden_units, n_classes);
    const double r2 = std::sqrt(6.0 / static_cast<double>(cfg.hidden_units + n_classes));
    for (Eigen::Index i = 0; i < params.w2.size(); ++i) params.w2.data()[i] = init_rng.uniform(-r2, r2);
    params.b2 = Vector::Zero(n_classes);

    detail::AdamState adam = detail::AdamState::zeros_like(params);
    Rng shuffle_rng(derive_seed(cfg.seed, {0x73687566ULL}));
    std::vector<int> order(static_cast<std::size_t>(x_train.rows()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    detail::MlpParams best = params;
    double best_acc = -1.0;
    double best_loss = std::numeric_limits<double>::infinity();
    int best_epoch = -1, stall = 0;
    std::vector<double> trace;
    detail::MlpParams grads;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t count = std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
            Matrix xb(count, p);
            std::vector<int> yb(count);
            Vector wb(count);
            for (std::size_t i = 0; i < count; ++i) {
                const int row = order[start + i];
                xb.row(static_cast<Eigen::Index>(i)) = x_train.row(row);
                yb[i] = train.labels[static_cast<std::size_t>(row)];
                wb(static_cast<Eigen::Index>(i)) = w_train(row);
            }
            const double loss = detail::mlp_loss_and_grad(params, xb, yb, wb, &grads);
            if (!std::isfinite(loss)) {
                throw NumericError("train_mlp: diverged at epoch " + std::to_string(epoch) + " (non-finite loss)");
            }
            ++adam.t;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.t));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.t));
            detail::adam_update(params.w1, adam.m.w1, adam.v.w1, grads.w1, cfg, bc1, bc2);
            detail::adam_update(params.b1, adam.m.b1, adam.v.b1, grads.b1, cfg, bc1, bc2);
            detail::adam_update(params.w2, adam.m.w2, adam.v.w2, grads.w2, cfg, bc1, bc2);
            detail::adam_update(params.b2, adam.m.b2, adam.v.b2, grads.b2, cfg, bc1, bc2);
        }

        const Matrix val_probs = detail::mlp_forward_probabilities(params, x_val);
        long correct = 0;
        double val_loss = 0.0;
        for (Eigen::Index i = 0; i < val_probs.rows(); ++i) {
            Eigen::Index arg = 0;
            val_probs.row(i).maxCoeff(&arg);
            const int label = val.labels[static_cast<std::size_t>(i)];
            if (static_cast<int>(arg) == label) ++correct;
            val_loss -= std::log(std::max(val_probs(i, label), 1e-300));
        }
        const double acc = static_cast<double>(correct) / static_cast<double>(val_probs.rows());
        val_loss /= static_cast<double>(val_probs.rows());
        trace.push_back(acc);
        // Accuracy ties break toward lower validation loss; with small
        // validation splits the accuracy saturates within a few epochs and
        // would otherwise freeze a barely trained snapshot. Only a meaningful
        // loss drop (1% relative) resets the patience counter, so slowly
        // creeping plateaus still stop within the patience window.
        const bool better_acc = acc > best_acc;
        const bool better_loss = acc == best_acc && val_loss < best_loss;
        if (better_acc || better_loss) {
            const bool meaningful = better_acc || val_loss < best_loss * (1.0 - 1e-2);
            best_acc = acc;
            best_loss = val_loss;
            best = params;
            best_epoch = epoch;
            if (meaningful) {
                stall = 0;
            } else if (++stall >= cfg.patience) {
                break;
            }
        } else if (++stall >= cfg.patience) {
            break;
        }
    }

    MlpModel model;
    model.w1 = best.w1;
    model.b1 = best.b1;
    model.w2 = best.w2;
    model.b2 = best.b2;
    model.input_mean = stats.mean;
    model.input_std = stats.std;
    model.training_trace = trace;
    model.best_epoch = best_epoch;
    model.n_classes = n_classes;
    return model;
}

struct Prediction {
    std::vector<int> labels;
    Matrix probabilities;  // rows sum to 1
};

/// Applies the stored standardization and network; argmax with lowest-index
/// tie break.
inline Prediction predict(const MlpModel& m, const FeatureMatrix& x) {
    if (x.cols() != m.w1.rows()) {
        throw ArgumentError("predict: input has " + std::to_string(x.cols()) + " features, model expects " +
                            std::to_string(m.w1.rows()));
    }
    Matrix z = (x.values.rowwise() - m.input_mean.transpose()).array().rowwise() / m.input_std.transpose().array();
    detail::MlpParams params{m.w1, m.b1, m.w2, m.b2};
    Prediction out;
    out.probabilities = detail::mlp_forward_probabilities(params, z);
    out.labels.reserve(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index i = 0; i < out.probabilities.rows(); ++i) {
        int arg = 0;
        double best = out.probabilities(i, 0);
        for (int c = 1; c < m.n_classes; ++c) {
            if (out.probabilities(i, c) > best) {
                best = out.probabilities(i, c);
                arg = c;
            }
        }
        out.labels.push_back(arg);
    }
    return out;
}

inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size() || predicted.empty()) {
        throw ArgumentError("accuracy: label vectors must have equal nonzero length");
    }
    long hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (predicted[i] == truth[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Macro-averaged F1 over the classes present in `truth` (reported alongside
/// accuracy; never used for ranking).
inline double macro_f1(const std::vector<int>& predicted, const std::vector<int>& truth, int n_classes) {
    if (predicted.size() != truth.size() || predicted.empty()) {
        throw ArgumentError("macro_f1: label vectors must have equal nonzero length");
    }
    double sum = 0.0;
    int counted = 0;
    for (int c = 0; c < n_classes; ++c) {
        long tp = 0, fp = 0, fn = 0;
        bool present = false;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] == c) present = true;
            if (predicted[i] == c && truth[i] == c) ++tp;
            if (predicted[i] == c && truth[i] != c) ++fp;
            if (predicted[i] != c && truth[i] == c) ++fn;
        }
        if (!present) continue;
        sum += (2 * tp + fp + fn) > 0 ? 2.0 * tp / static_cast<double>(2 * tp + fp + fn) : 0.0;
        ++counted;
    }
    return counted > 0 ? sum / counted : 0.0;
}

}  // namespace emgsa
