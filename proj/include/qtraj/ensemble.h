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

#ifndef QTRAJ_ENSEMBLE_H
#define QTRAJ_ENSEMBLE_H

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qtraj/discriminant.h"
#include "qtraj/features.h"
#include "qtraj/svm.h"

namespace qtraj::ensemble {

using features::Matrix;
using features::Vector;

enum class Kind { multi_lda, multi_svm, rusboost };

std::string kind_name(Kind k);

/// Depth-1 tree: rows with x[feature] <= threshold vote `left`, others vote `right`.
struct Stump {
    Eigen::Index feature = 0;
    double threshold = 0.0;
    int left = 0;
    int right = 0;
    double weight = 1.0;

    int vote(const Eigen::Ref<const Eigen::RowVectorXd> &x) const { return x[feature] <= threshold ? left : right; }
};

struct MultiClassOptions {
    int rounds = 50;  // rusboost
    svm::KernelSpec kernel{svm::KernelKind::linear, 0.0};
    double c = 1.0;
    svm::SvmOptions svm;
    discriminant::FitOptions lda{.escalate_shrinkage = true};
};

class MultiClassModel {
   public:
    Kind kind = Kind::multi_lda;
    int n_classes = 0;

    // multi_lda: score_c(x) = x.W_c + b_c
    Matrix lda_weights;  // d x K
    Vector lda_offsets;
    double lda_shrinkage = 0.0;
    // multi_svm: one-vs-rest (a single machine for two classes, +1 meaning class 1)
    std::vector<svm::SvmModel> machines;
    // rusboost
    std::vector<Stump> stumps;

    /// Per-class scores (rows x K); the prediction is the first argmax.
    Matrix class_scores(const Matrix &x) const;
    std::vector<int> predict(const Matrix &x) const;
    int classify(const Eigen::Ref<const Vector> &x) const;

    nlohmann::json to_json() const;
};

/// Labels must be 0..K-1 with every class present at least twice.
MultiClassModel fit_multiclass(const features::FeatureMatrix &train, Kind kind, std::uint64_t seed,
                               const MultiClassOptions &options = {});

/// Depth-1 stump minimising weighted Gini impurity over all features. Leaves vote the
/// weighted majority of their side.
Stump fit_stump(const Matrix &x, std::span<const int> y, std::span<const double> w, int n_classes);

/// Maps class indices to binary outcomes through `map`; throws on an unknown label.
std::vector<int> collapse_to_binary(std::span<const int> predictions, std::span<const int> map);

}  // namespace qtraj::ensemble

#endif
