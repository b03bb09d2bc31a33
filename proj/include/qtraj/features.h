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

#ifndef QTRAJ_FEATURES_H
#define QTRAJ_FEATURES_H

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "json.hpp"
#include "qtraj/sim.h"

namespace qtraj::features {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// One row per shot: [Re(samples) | Im(samples)].
struct FeatureMatrix {
    Matrix x;
    std::vector<int> labels;

    Eigen::Index rows() const { return x.rows(); }
    Eigen::Index cols() const { return x.cols(); }
    void validate() const;
};

FeatureMatrix vectorize(const sim::Dataset &dataset);
Vector vectorize(std::span<const sim::cplx> samples);
std::vector<sim::cplx> unvectorize(const Eigen::Ref<const Vector> &row);

/// Rows with the given indices (in order).
FeatureMatrix select_rows(const FeatureMatrix &fm, std::span<const Eigen::Index> rows);

/// Positional split: the first half of each class trains, the second half tests.
struct Split {
    std::vector<Eigen::Index> train, test;
};
Split first_half_split(std::span<const int> labels);
/// As above, but each class is shuffled with `seed` before it is halved.
Split shuffled_half_split(std::span<const int> labels, std::uint64_t seed);

struct PcaModel {
    Vector mean;
    Matrix components;  // M x d, orthonormal columns
    Vector eigenvalues;  // length d, descending
    Vector all_eigenvalues;  // length M, descending
    double variance_fraction_captured = 0.0;

    Eigen::Index dim() const { return components.cols(); }
};

/// Pooled PCA on the rows of `train`; keeps the smallest d reaching `variance_fraction`.
PcaModel fit_pca(const Matrix &train, double variance_fraction);
Vector project(const PcaModel &model, const Eigen::Ref<const Vector> &x);
Matrix project_rows(const PcaModel &model, const Matrix &x);
FeatureMatrix project(const PcaModel &model, const FeatureMatrix &fm);
Vector reconstruct(const PcaModel &model, const Eigen::Ref<const Vector> &z);

nlohmann::json to_json(const PcaModel &model);
PcaModel pca_from_json(const nlohmann::json &j);

/// Matched-filter weights w_j = conj(beta_j) / var(I_j) and quadrature phases phi_j = arg(beta_j).
struct FilterKernel {
    std::vector<sim::cplx> weights;
    std::vector<double> phases;
    std::vector<double> info_variance;  // var(I_j)
    std::vector<sim::cplx> beta;         // class-0 mean minus class-1 mean
    double dt = 1.0;

    std::size_t size() const { return weights.size(); }
};

/// Estimates the kernel from labelled feature rows. Bin variances come from the
/// pooled within-class residuals of the information quadrature.
FilterKernel optimal_kernel(const FeatureMatrix &train, double dt);
FilterKernel optimal_kernel(const sim::Dataset &train);

/// S = sum_j |w_j| Re[exp(-i phi_j) c_j] dt.
double matched_filter_statistic(std::span<const sim::cplx> samples, const FilterKernel &kernel);
double matched_filter_statistic(const Eigen::Ref<const Vector> &row, const FilterKernel &kernel);
Vector matched_filter_statistics(const Matrix &x, const FilterKernel &kernel);

}  // namespace qtraj::features

#endif
