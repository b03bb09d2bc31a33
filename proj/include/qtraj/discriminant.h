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

#ifndef QTRAJ_DISCRIMINANT_H
#define QTRAJ_DISCRIMINANT_H

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "json.hpp"
#include "qtraj/features.h"

namespace qtraj::discriminant {

using features::Matrix;
using features::Vector;

enum class Variant { ldad, lda, qdad, qda };

std::string variant_name(Variant v);
Variant parse_variant(const std::string &name);
bool is_linear(Variant v);
bool is_diagonal(Variant v);

struct FitOptions {
    /// Convex shrinkage toward the diagonal: S <- (1 - lambda) S + lambda diag(S).
    double shrinkage = 0.0;
    /// Covariances whose reciprocal condition estimate falls below this are singular.
    double rcond_tol = 1e-10;
    /// When the covariance is singular at `shrinkage`, raise it along a
    /// geometric ladder until the factorization is well conditioned.
    bool escalate_shrinkage = false;
    /// Use pi_0 = pi_1 = 1/2 instead of the class frequencies.
    bool equal_priors = false;
};

/// Two-class Gaussian discriminant. Class 0 is predicted iff score(x) >= threshold.
class GaussianDiscriminantModel {
   public:
    /// Builds a model from explicit parameters. For linear variants cov1 is ignored.
    static GaussianDiscriminantModel build(Variant variant, Vector mu0, Vector mu1, Eigen::MatrixXd cov0,
                                           Eigen::MatrixXd cov1, double prior0 = 0.5, double prior1 = 0.5,
                                           double shrinkage = 0.0, double rcond_tol = 1e-10);

    Variant variant() const { return variant_; }
    Eigen::Index dim() const { return mu0_.size(); }
    const Vector &mean(int c) const { return c == 0 ? mu0_ : mu1_; }
    const Eigen::MatrixXd &covariance(int c) const { return c == 0 || is_linear(variant_) ? cov0_ : cov1_; }
    double threshold() const { return threshold_; }
    double prior(int c) const { return c == 0 ? prior0_ : prior1_; }
    double shrinkage() const { return shrinkage_; }
    /// Linear variants: Sigma^-1 (mu_0 - mu_1). Quadratic: Sigma_0^-1 mu_0 - Sigma_1^-1 mu_1.
    const Vector &linear_term() const { return linear_; }

    double score(const Eigen::Ref<const Vector> &x) const;
    Vector scores(const Matrix &x) const;
    int classify(const Eigen::Ref<const Vector> &x) const { return score(x) >= threshold_ ? 0 : 1; }
    std::vector<int> predict(const Matrix &x) const;

    nlohmann::json to_json() const;
    static GaussianDiscriminantModel from_json(const nlohmann::json &j);

   private:
    Variant variant_ = Variant::lda;
    Vector mu0_, mu1_;
    Eigen::MatrixXd cov0_, cov1_;
    Eigen::LLT<Eigen::MatrixXd> chol0_, chol1_;
    Vector linear_;
    double threshold_ = 0.0;
    double prior0_ = 0.5, prior1_ = 0.5;
    double shrinkage_ = 0.0;
};

/// Fits the given variant on binary-labelled rows. Throws SingularCovariance
/// when a required covariance is not positive definite at the requested shrinkage
/// (unless escalation is enabled).
GaussianDiscriminantModel fit_gaussian(const features::FeatureMatrix &train, Variant variant,
                                       const FitOptions &options = {});

/// Unbiased sample covariance of `rows` about `mean`, and the shrinkage map.
Eigen::MatrixXd sample_covariance(const Matrix &rows, const Vector &mean);
Eigen::MatrixXd shrink_to_diagonal(const Eigen::MatrixXd &cov, double lambda);

}  // namespace qtraj::discriminant

#endif
