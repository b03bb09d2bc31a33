// Copyright 2026 The qtraj Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QTRAJ_SVM_H
#define QTRAJ_SVM_H

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qtraj/features.h"

namespace qtraj::svm {

using features::Matrix;
using features::Vector;

enum class KernelKind { linear, rbf };

/// k(x, z) = x.z (linear) or exp(-gamma |x - z|^2) (rbf).
struct KernelSpec {
    KernelKind kind = KernelKind::linear;
    double gamma = 0.0;

    void validate() const;
    double operator()(const Eigen::Ref<const Vector> &a, const Eigen::Ref<const Vector> &b) const;
};

struct SvmOptions {
    double tol = 1e-3;
    std::int64_t max_iterations = 0;  // 0: max(10^7, 100 n)
    double cache_mb = 512.0;
};

class SvmModel {
   public:
    Matrix support_vectors;
    Vector coefficients;  // alpha_i y_i
    std::vector<Eigen::Index> support_indices;  // rows of the training matrix
    Vector alpha;  // alpha_i of the support vectors
    double bias = 0.0;
    KernelSpec kernel;
    double c = 1.0;
    std::int64_t iterations = 0;
    double dual_objective = 0.0;  // sum alpha - 1/2 alpha^T Q alpha

    Eigen::Index dim() const { return support_vectors.cols(); }
    /// sum_i alpha_i y_i k(x_i, x) + b.
    double decision(const Eigen::Ref<const Vector> &x) const;
    Vector decisions(const Matrix &x) const;
    /// Sign of the decision with ties going to +1.
    int classify(const Eigen::Ref<const Vector> &x) const { return decision(x) >= 0.0 ? 1 : -1; }

    nlohmann::json to_json() const;
    static SvmModel from_json(const nlohmann::json &j);
};

/// Soft-margin SVM dual solved by SMO with second-order working-set selection.
/// Labels must be -1 or +1. Working-set ties go to the lowest index, so the
/// result is deterministic.
SvmModel fit_svm(const Matrix &x, std::span<const int> y, double c, const KernelSpec &kernel,
                 const SvmOptions &options = {});

/// Largest violation of the KKT conditions of `model` over the training set
/// (0 when all hold exactly), measured on y_i f(x_i).
double max_kkt_violation(const SvmModel &model, const Matrix &x, std::span<const int> y);

/// 1 / median squared pairwise distance over a seeded subsample of at most `subsample` rows.
double median_gamma(const Matrix &x, std::uint64_t seed, Eigen::Index subsample = 1000);

struct CvResult {
    double c = 0.0;
    double gamma = 0.0;
    double cv_error = 0.0;
    std::vector<std::tuple<double, double, double>> grid;  // (C, gamma, error)
};

/// Stratified k-fold search. Ties in mean held-out error go to the smaller C, then
/// the smaller gamma. For linear kernels `gammas` is ignored.
CvResult cross_validate(const Matrix &x, std::span<const int> y, std::vector<double> cs, std::vector<double> gammas,
                        KernelKind kind, int folds, std::uint64_t seed, const SvmOptions &options = {});

/// Stratified fold index per row. Throws StratificationError when a class has fewer rows than folds.
std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed);

}  // namespace qtraj::svm

#endif
