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

#ifndef QTRAJ_PIPELINE_H
#define QTRAJ_PIPELINE_H

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qtraj/cluster.h"
#include "qtraj/features.h"
#include "qtraj/metrics.h"
#include "qtraj/sim.h"

namespace qtraj::pipeline {

enum class Method { ldad, lda, qdad, qda, svm_linear, svm_rbf, multi_lda, multi_svm, rusboost, matched_filter };

std::string method_name(Method m);
Method parse_method(const std::string &name);
std::vector<Method> parse_methods(const std::string &comma_list);
const std::vector<Method> &all_methods();
bool is_multiclass(Method m);

struct EvalConfig {
    double pca_fraction = 0.999;
    /// Shrinkage ladder for the linear discriminants when the pooled covariance is singular.
    bool escalate_linear_shrinkage = true;
    double linear_c = 1.0;
    double rbf_c = 1.0;
    /// rbf gamma = gamma_scale / median squared distance, unless `rbf_gamma` > 0.
    double rbf_gamma_scale = 4.0;
    double rbf_gamma = 0.0;
    double svm_tol = 1e-3;
    double svm_cache_mb = 512.0;
    int rusboost_rounds = 50;
    int k = 3;
    int realizations = 10;
    double late_window = 0.2;
    /// Shuffle each class before halving instead of the positional split.
    bool shuffle_split = false;
    std::uint64_t seed = 1;

    nlohmann::json to_json() const;
    static EvalConfig from_json(const nlohmann::json &j);
};

struct Cell {
    Method method;
    bool pca = false;
    bool ok = false;
    std::string error;
    metrics::FidelityReport report;
    nlohmann::json details = nlohmann::json::object();

    nlohmann::json to_json() const;
};

/// Holds the positional split and shared fitted state (PCA, lifted labels) so
/// several methods can be evaluated on the same data.
class Evaluator {
   public:
    Evaluator(features::FeatureMatrix data, double dt, EvalConfig config);

    Cell evaluate(Method method, bool pca);
    std::vector<Cell> evaluate_all(const std::vector<Method> &methods, bool pca);

    /// Trains `method` on `train` and predicts binary outcomes for `test`.
    /// Multi-class methods need `lifted` labels for the training rows.
    std::vector<int> train_and_predict(Method method, const features::FeatureMatrix &train,
                                       const features::Matrix &test, const std::vector<int> *lifted,
                                       nlohmann::json &details) const;

    const features::Split &split() const { return split_; }
    const EvalConfig &config() const { return config_; }

   private:
    const features::FeatureMatrix &train_view(bool pca);
    const features::Matrix &test_view(bool pca);
    const std::vector<int> &lifted_train_labels();

    features::FeatureMatrix data_;
    double dt_;
    EvalConfig config_;
    features::Split split_;
    features::FeatureMatrix train_, train_pca_;
    features::Matrix test_, test_pca_;
    std::vector<int> test_labels_;
    std::optional<features::PcaModel> pca_;
    std::optional<std::vector<int>> lifted_;
    nlohmann::json lift_details_;
};

/// rbf gamma for the given training rows under `config`.
double rbf_gamma_for(const features::Matrix &train, const EvalConfig &config);

/// Recipe for the time sweep; gamma is fixed in absolute units.
metrics::Recipe make_recipe(Method method, const EvalConfig &config, double dt);

/// The train/test split `config` asks for.
features::Split split_for(std::span<const int> labels, const EvalConfig &config);

struct Diagnosis {
    cluster::Clustering excited;
    cluster::SubclassReport excited_report;
    std::optional<cluster::Clustering> ground;
    std::optional<cluster::SubclassReport> ground_report;
    std::vector<Eigen::Index> flagged_rows;  // dataset rows in flagged excited clusters
    std::vector<Eigen::Index> excited_rows;
    double flagged_fraction = 0.0;

    nlohmann::json to_json() const;
};

/// Clusters every excited-class shot (and the ground class with `ground_k` > 0)
/// and flags T1 / heating subclasses against the class-mean paths.
Diagnosis diagnose(const features::FeatureMatrix &data, int k, const EvalConfig &config, int ground_k = 0);

}  // namespace qtraj::pipeline

#endif
