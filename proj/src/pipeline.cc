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

#include "qtraj/pipeline.h"

#include <algorithm>
#include <sstream>

#include "qtraj/discriminant.h"
#include "qtraj/ensemble.h"
#include "qtraj/errors.h"
#include "qtraj/svm.h"

namespace qtraj::pipeline {

namespace {

const std::vector<std::pair<Method, const char *>> kNames = {
    {Method::ldad, "ldad"},           {Method::lda, "lda"},
    {Method::qdad, "qdad"},           {Method::qda, "qda"},
    {Method::svm_linear, "svm-linear"}, {Method::svm_rbf, "svm-rbf"},
    {Method::multi_lda, "multi-lda"}, {Method::multi_svm, "multi-svm"},
    {Method::rusboost, "rusboost"},   {Method::matched_filter, "matched-filter"},
};

std::vector<int> signed_labels(std::span<const int> labels) {
    std::vector<int> y(labels.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = labels[i] == 1 ? 1 : -1;
    return y;
}

std::vector<int> svm_outcomes(const features::Vector &d) {
    std::vector<int> out(d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) out[i] = d[i] >= 0.0 ? 1 : 0;
    return out;
}

std::vector<sim::cplx> class_mean_path(const features::FeatureMatrix &fm, int cls) {
    features::Vector sum = features::Vector::Zero(fm.cols());
    double n = 0.0;
    for (Eigen::Index i = 0; i < fm.rows(); ++i) {
        if (fm.labels[i] == cls) {
            sum += fm.x.row(i).transpose();
            n += 1.0;
        }
    }
    if (n == 0.0) {
        throw DataError("class " + std::to_string(cls) + " is absent");
    }
    return features::unvectorize(sum / n);
}

/// Clusters the excited rows of `train` and returns labels with flagged shots moved to class 2.
std::vector<int> lift_labels(const features::FeatureMatrix &train, const EvalConfig &config, nlohmann::json &details) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < train.rows(); ++i) {
        if (train.labels[i] == 1) rows.push_back(i);
    }
    features::Matrix excited = train.x(rows, Eigen::all);
    cluster::KmeansOptions opts;
    opts.realizations = config.realizations;
    cluster::Clustering c = cluster::kmeans(excited, config.k, cluster::Init::stabilized, config.seed, opts);
    c.source_class = 1;
    auto report = cluster::identify_special_clusters(c, class_mean_path(train, 0), class_mean_path(train, 1),
                                                     config.late_window);
    auto flagged = report.flagged();
    details["lift_cluster_sizes"] = c.sizes();
    details["lift_flagged_clusters"] = flagged;
    return cluster::lift_to_multiclass(train.labels, rows, c, flagged).labels;
}

std::vector<int> run_method(Method method, const features::FeatureMatrix &train, const features::Matrix &test,
                            const std::vector<int> *lifted, const EvalConfig &config, double dt,
                            nlohmann::json &details) {
    using discriminant::Variant;
    switch (method) {
        case Method::ldad:
        case Method::lda:
        case Method::qdad:
        case Method::qda: {
            const Variant v = method == Method::ldad  ? Variant::ldad
                              : method == Method::lda ? Variant::lda
                              : method == Method::qdad ? Variant::qdad
                                                       : Variant::qda;
            discriminant::FitOptions opts;
            opts.escalate_shrinkage = config.escalate_linear_shrinkage && discriminant::is_linear(v);
            auto model = discriminant::fit_gaussian(train, v, opts);
            details["shrinkage"] = model.shrinkage();
            return model.predict(test);
        }
        case Method::svm_linear:
        case Method::svm_rbf: {
            svm::KernelSpec kernel{svm::KernelKind::linear, 0.0};
            double c = config.linear_c;
            if (method == Method::svm_rbf) {
                kernel = {svm::KernelKind::rbf, rbf_gamma_for(train.x, config)};
                c = config.rbf_c;
            }
            svm::SvmOptions opts{config.svm_tol, 0, config.svm_cache_mb};
            auto y = signed_labels(train.labels);
            auto model = svm::fit_svm(train.x, y, c, kernel, opts);
            details["c"] = c;
            details["gamma"] = kernel.gamma;
            details["support_vectors"] = model.support_vectors.rows();
            details["iterations"] = model.iterations;
            return svm_outcomes(model.decisions(test));
        }
        case Method::multi_lda:
        case Method::multi_svm:
        case Method::rusboost: {
            std::vector<int> own;
            if (!lifted) {
                own = lift_labels(train, config, details);
                lifted = &own;
            }
            features::FeatureMatrix multi{train.x, *lifted};
            ensemble::MultiClassOptions opts;
            opts.rounds = config.rusboost_rounds;
            opts.c = config.linear_c;
            opts.svm = svm::SvmOptions{config.svm_tol, 0, config.svm_cache_mb};
            const ensemble::Kind kind = method == Method::multi_lda   ? ensemble::Kind::multi_lda
                                        : method == Method::multi_svm ? ensemble::Kind::multi_svm
                                                                      : ensemble::Kind::rusboost;
            auto model = ensemble::fit_multiclass(multi, kind, config.seed, opts);
            auto pred = model.predict(test);
            std::vector<int> counts(model.n_classes, 0);
            for (int p : pred) ++counts[p];
            details["classes"] = model.n_classes;
            if (kind == ensemble::Kind::rusboost) details["stumps"] = model.stumps.size();
            details["predicted_class_counts"] = counts;
            std::vector<int> map{0, 1, 1};
            return ensemble::collapse_to_binary(pred, map);
        }
        case Method::matched_filter: {
            auto kernel = features::optimal_kernel(train, dt);
            features::Vector s_train = features::matched_filter_statistics(train.x, kernel);
            double m[2] = {0.0, 0.0}, n[2] = {0.0, 0.0};
            for (Eigen::Index i = 0; i < s_train.size(); ++i) {
                m[train.labels[i]] += s_train[i];
                n[train.labels[i]] += 1.0;
            }
            const double threshold = 0.5 * (m[0] / n[0] + m[1] / n[1]);
            details["threshold"] = threshold;
            features::Vector s = features::matched_filter_statistics(test, kernel);
            std::vector<int> out(s.size());
            for (Eigen::Index i = 0; i < s.size(); ++i) out[i] = s[i] >= threshold ? 0 : 1;
            return out;
        }
    }
    throw InvalidArgument("unhandled method");
}

}  // namespace

std::string method_name(Method m) {
    for (auto &[k, v] : kNames) {
        if (k == m) return v;
    }
    return "?";
}

Method parse_method(const std::string &name) {
    for (auto &[k, v] : kNames) {
        if (name == v) return k;
    }
    std::string valid;
    for (auto &[k, v] : kNames) valid += std::string(valid.empty() ? "" : ", ") + v;
    throw InvalidArgument("unknown method '" + name + "'; valid methods: " + valid);
}

std::vector<Method> parse_methods(const std::string &comma_list) {
    std::vector<Method> out;
    std::stringstream ss(comma_list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(parse_method(item));
    }
    if (out.empty()) {
        throw InvalidArgument("method list is empty");
    }
    return out;
}

const std::vector<Method> &all_methods() {
    static const std::vector<Method> methods = [] {
        std::vector<Method> v;
        for (auto &[k, name] : kNames) v.push_back(k);
        return v;
    }();
    return methods;
}

bool is_multiclass(Method m) { return m == Method::multi_lda || m == Method::multi_svm || m == Method::rusboost; }

nlohmann::json EvalConfig::to_json() const {
    return {{"pca_fraction", pca_fraction},
            {"escalate_linear_shrinkage", escalate_linear_shrinkage},
            {"linear_c", linear_c},
            {"rbf_c", rbf_c},
            {"rbf_gamma_scale", rbf_gamma_scale},
            {"rbf_gamma", rbf_gamma},
            {"svm_tol", svm_tol},
            {"svm_cache_mb", svm_cache_mb},
            {"rusboost_rounds", rusboost_rounds},
            {"k", k},
            {"realizations", realizations},
            {"late_window", late_window},
            {"shuffle_split", shuffle_split},
            {"seed", seed}};
}

EvalConfig EvalConfig::from_json(const nlohmann::json &j) {
    EvalConfig c;
    try {
        c.pca_fraction = j.value("pca_fraction", c.pca_fraction);
        c.escalate_linear_shrinkage = j.value("escalate_linear_shrinkage", c.escalate_linear_shrinkage);
        c.linear_c = j.value("linear_c", c.linear_c);
        c.rbf_c = j.value("rbf_c", c.rbf_c);
        c.rbf_gamma_scale = j.value("rbf_gamma_scale", c.rbf_gamma_scale);
        c.rbf_gamma = j.value("rbf_gamma", c.rbf_gamma);
        c.svm_tol = j.value("svm_tol", c.svm_tol);
        c.svm_cache_mb = j.value("svm_cache_mb", c.svm_cache_mb);
        c.rusboost_rounds = j.value("rusboost_rounds", c.rusboost_rounds);
        c.k = j.value("k", c.k);
        c.realizations = j.value("realizations", c.realizations);
        c.late_window = j.value("late_window", c.late_window);
        c.shuffle_split = j.value("shuffle_split", c.shuffle_split);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception &e) {
        throw InvalidArgument(std::string("malformed evaluation config: ") + e.what());
    }
    return c;
}

nlohmann::json Cell::to_json() const {
    nlohmann::json j = {{"method", method_name(method)}, {"pca", pca}, {"ok", ok}, {"details", details}};
    if (ok) {
        j["report"] = report.to_json();
    } else {
        j["error"] = error;
    }
    return j;
}

double rbf_gamma_for(const features::Matrix &train, const EvalConfig &config) {
    if (config.rbf_gamma > 0.0) return config.rbf_gamma;
    return config.rbf_gamma_scale * svm::median_gamma(train, config.seed);
}

Evaluator::Evaluator(features::FeatureMatrix data, double dt, EvalConfig config)
    : data_(std::move(data)), dt_(dt), config_(config) {
    data_.validate();
    split_ = split_for(data_.labels, config_);
    train_ = features::select_rows(data_, split_.train);
    auto test = features::select_rows(data_, split_.test);
    test_ = std::move(test.x);
    test_labels_ = std::move(test.labels);
}

const features::FeatureMatrix &Evaluator::train_view(bool pca) {
    if (!pca) return train_;
    if (!pca_) {
        pca_ = features::fit_pca(train_.x, config_.pca_fraction);
        train_pca_ = features::project(*pca_, train_);
        test_pca_ = features::project_rows(*pca_, test_);
    }
    return train_pca_;
}

const features::Matrix &Evaluator::test_view(bool pca) {
    train_view(pca);
    return pca ? test_pca_ : test_;
}

const std::vector<int> &Evaluator::lifted_train_labels() {
    if (!lifted_) {
        lifted_ = lift_labels(train_, config_, lift_details_);
    }
    return *lifted_;
}

std::vector<int> Evaluator::train_and_predict(Method method, const features::FeatureMatrix &train,
                                              const features::Matrix &test, const std::vector<int> *lifted,
                                              nlohmann::json &details) const {
    return run_method(method, train, test, lifted, config_, dt_, details);
}

Cell Evaluator::evaluate(Method method, bool pca) {
    Cell cell;
    cell.method = method;
    cell.pca = pca;
    try {
        if (pca && method == Method::matched_filter) {
            throw InvalidArgument("matched filter operates on raw trajectories, not PCA features");
        }
        const auto &train = train_view(pca);
        const auto &test = test_view(pca);
        const std::vector<int> *lifted = nullptr;
        if (is_multiclass(method)) {
            lifted = &lifted_train_labels();
            cell.details.update(lift_details_);
        }
        if (pca) {
            cell.details["pca_dim"] = pca_->dim();
        }
        auto pred = run_method(method, train, test, lifted, config_, dt_, cell.details);
        cell.report = metrics::assignment_fidelity(pred, test_labels_);
        cell.ok = true;
    } catch (const SingularCovariance &e) {
        cell.error = std::string("singular covariance: ") + e.what();
        cell.details["condition_number"] = e.condition_number();
    } catch (const std::exception &e) {
        cell.error = e.what();
    }
    return cell;
}

std::vector<Cell> Evaluator::evaluate_all(const std::vector<Method> &methods, bool pca) {
    std::vector<Cell> out;
    for (Method m : methods) out.push_back(evaluate(m, pca));
    return out;
}

features::Split split_for(std::span<const int> labels, const EvalConfig &config) {
    return config.shuffle_split ? features::shuffled_half_split(labels, config.seed)
                                : features::first_half_split(labels);
}

metrics::Recipe make_recipe(Method method, const EvalConfig &config, double dt) {
    return [method, config, dt](const features::FeatureMatrix &train, const features::Matrix &test) {
        nlohmann::json details;
        return run_method(method, train, test, nullptr, config, dt, details);
    };
}

nlohmann::json Diagnosis::to_json() const {
    nlohmann::json j = {{"excited", excited_report.to_json()},
                        {"excited_clustering", {{"k", excited.k}, {"objective", excited.objective},
                                                {"iterations", excited.iterations}, {"sizes", excited.sizes()}}},
                        {"flagged_shots", flagged_rows.size()},
                        {"flagged_fraction_of_excited", flagged_fraction}};
    if (ground) {
        j["ground"] = ground_report->to_json();
        j["ground_clustering"] = {{"k", ground->k}, {"objective", ground->objective}, {"sizes", ground->sizes()}};
    }
    return j;
}

Diagnosis diagnose(const features::FeatureMatrix &data, int k, const EvalConfig &config, int ground_k) {
    data.validate();
    const auto ref0 = class_mean_path(data, 0);
    const auto ref1 = class_mean_path(data, 1);
    cluster::KmeansOptions opts;
    opts.realizations = config.realizations;
    Diagnosis d;
    std::vector<Eigen::Index> ground_rows;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        (data.labels[i] == 1 ? d.excited_rows : ground_rows).push_back(i);
    }
    features::Matrix excited = data.x(d.excited_rows, Eigen::all);
    d.excited = cluster::kmeans(excited, k, cluster::Init::stabilized, config.seed, opts);
    d.excited.source_class = 1;
    d.excited_report = cluster::identify_special_clusters(d.excited, ref0, ref1, config.late_window);
    auto flagged = d.excited_report.flagged();
    for (std::size_t r = 0; r < d.excited_rows.size(); ++r) {
        if (std::find(flagged.begin(), flagged.end(), d.excited.assignments[r]) != flagged.end()) {
            d.flagged_rows.push_back(d.excited_rows[r]);
        }
    }
    d.flagged_fraction = static_cast<double>(d.flagged_rows.size()) / static_cast<double>(d.excited_rows.size());
    if (ground_k > 0) {
        features::Matrix ground = data.x(ground_rows, Eigen::all);
        d.ground = cluster::kmeans(ground, ground_k, cluster::Init::stabilized, config.seed, opts);
        d.ground->source_class = 0;
        d.ground_report = cluster::identify_special_clusters(*d.ground, ref0, ref1, config.late_window);
    }
    return d;
}

}  // namespace qtraj::pipeline
