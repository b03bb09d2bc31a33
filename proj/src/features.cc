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

#include "qtraj/features.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "qtraj/errors.h"

namespace qtraj::features {

using sim::cplx;

void FeatureMatrix::validate() const {
    if (static_cast<std::size_t>(x.rows()) != labels.size()) {
        throw DimensionError("feature matrix has " + std::to_string(x.rows()) + " rows but " +
                             std::to_string(labels.size()) + " labels");
    }
    if (!x.allFinite()) {
        throw DataError("feature matrix contains non-finite entries");
    }
}

Vector vectorize(std::span<const cplx> samples) {
    const Eigen::Index m = static_cast<Eigen::Index>(samples.size());
    Vector row(2 * m);
    for (Eigen::Index j = 0; j < m; ++j) {
        row[j] = samples[j].real();
        row[m + j] = samples[j].imag();
    }
    return row;
}

FeatureMatrix vectorize(const sim::Dataset &dataset) {
    if (dataset.size() == 0) {
        throw InvalidArgument("cannot vectorize an empty dataset");
    }
    dataset.validate();
    const Eigen::Index n = static_cast<Eigen::Index>(dataset.size());
    const Eigen::Index m = dataset.grid.n_points;
    FeatureMatrix fm;
    fm.x.resize(n, 2 * m);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto &s = dataset.trajectories[i].samples;
        for (Eigen::Index j = 0; j < m; ++j) {
            fm.x(i, j) = s[j].real();
            fm.x(i, m + j) = s[j].imag();
        }
    }
    fm.labels = dataset.labels;
    return fm;
}

std::vector<cplx> unvectorize(const Eigen::Ref<const Vector> &row) {
    if (row.size() % 2 != 0) {
        throw DimensionError("feature row length must be even");
    }
    const Eigen::Index m = row.size() / 2;
    std::vector<cplx> out(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        out[j] = cplx(row[j], row[m + j]);
    }
    return out;
}

FeatureMatrix select_rows(const FeatureMatrix &fm, std::span<const Eigen::Index> rows) {
    FeatureMatrix out;
    out.x.resize(static_cast<Eigen::Index>(rows.size()), fm.cols());
    out.labels.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        out.x.row(static_cast<Eigen::Index>(k)) = fm.x.row(rows[k]);
        out.labels.push_back(fm.labels.at(rows[k]));
    }
    return out;
}

namespace {

Split half_split(std::span<const int> labels, const std::uint64_t *seed) {
    std::vector<Eigen::Index> by_class[2];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw InvalidArgument("binary split requires labels in {0, 1}");
        }
        by_class[labels[i]].push_back(static_cast<Eigen::Index>(i));
    }
    Split split;
    for (auto &rows : by_class) {
        if (seed) {
            std::mt19937_64 rng(*seed);
            std::shuffle(rows.begin(), rows.end(), rng);
        }
        const std::size_t half = rows.size() / 2;
        split.train.insert(split.train.end(), rows.begin(), rows.begin() + half);
        split.test.insert(split.test.end(), rows.begin() + half, rows.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

}  // namespace

Split first_half_split(std::span<const int> labels) { return half_split(labels, nullptr); }

Split shuffled_half_split(std::span<const int> labels, std::uint64_t seed) { return half_split(labels, &seed); }

PcaModel fit_pca(const Matrix &train, double variance_fraction) {
    if (!(variance_fraction > 0.0 && variance_fraction <= 1.0)) {
        throw InvalidArgument("variance fraction must lie in (0, 1]");
    }
    if (train.rows() < 2) {
        throw InvalidArgument("PCA needs at least 2 rows");
    }
    PcaModel model;
    model.mean = train.colwise().mean().transpose();
    Matrix centered = train.rowwise() - model.mean.transpose();
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(train.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("covariance eigendecomposition failed");
    }
    const Eigen::Index m = cov.rows();
    Vector values = eig.eigenvalues().reverse().cwiseMax(0.0);
    Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
    const double total = values.sum();
    Eigen::Index d = m;
    if (total > 0.0) {
        double acc = 0.0;
        for (Eigen::Index k = 0; k < m; ++k) {
            acc += values[k];
            if (acc >= variance_fraction * total) {
                d = k + 1;
                break;
            }
        }
    } else {
        d = 1;
    }
    // Fix the sign so the largest-magnitude entry of each component is positive.
    for (Eigen::Index k = 0; k < d; ++k) {
        Eigen::Index idx;
        vectors.col(k).cwiseAbs().maxCoeff(&idx);
        if (vectors(idx, k) < 0.0) {
            vectors.col(k) *= -1.0;
        }
    }
    model.components = vectors.leftCols(d);
    model.eigenvalues = values.head(d);
    model.all_eigenvalues = values;
    model.variance_fraction_captured = total > 0.0 ? model.eigenvalues.sum() / total : 1.0;
    return model;
}

Vector project(const PcaModel &model, const Eigen::Ref<const Vector> &x) {
    if (x.size() != model.mean.size()) {
        throw DimensionError("projection input has length " + std::to_string(x.size()) + ", model expects " +
                             std::to_string(model.mean.size()));
    }
    return model.components.transpose() * (x - model.mean);
}

Matrix project_rows(const PcaModel &model, const Matrix &x) {
    if (x.cols() != model.mean.size()) {
        throw DimensionError("projection input has " + std::to_string(x.cols()) + " columns, model expects " +
                             std::to_string(model.mean.size()));
    }
    return (x.rowwise() - model.mean.transpose()) * model.components;
}

FeatureMatrix project(const PcaModel &model, const FeatureMatrix &fm) {
    return FeatureMatrix{project_rows(model, fm.x), fm.labels};
}

Vector reconstruct(const PcaModel &model, const Eigen::Ref<const Vector> &z) {
    if (z.size() != model.dim()) {
        throw DimensionError("reconstruction input length does not match PCA dimension");
    }
    return model.mean + model.components * z;
}

nlohmann::json to_json(const PcaModel &model) {
    nlohmann::json comps = nlohmann::json::array();
    for (Eigen::Index k = 0; k < model.dim(); ++k) {
        comps.push_back(std::vector<double>(model.components.col(k).begin(), model.components.col(k).end()));
    }
    return {{"mean", std::vector<double>(model.mean.begin(), model.mean.end())},
            {"components", comps},
            {"eigenvalues", std::vector<double>(model.eigenvalues.begin(), model.eigenvalues.end())},
            {"variance_fraction_captured", model.variance_fraction_captured}};
}

PcaModel pca_from_json(const nlohmann::json &j) {
    PcaModel model;
    auto mean = j.at("mean").get<std::vector<double>>();
    auto eig = j.at("eigenvalues").get<std::vector<double>>();
    model.mean = Eigen::Map<Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    model.eigenvalues = Eigen::Map<Vector>(eig.data(), static_cast<Eigen::Index>(eig.size()));
    model.all_eigenvalues = model.eigenvalues;
    const auto &comps = j.at("components");
    model.components.resize(model.mean.size(), static_cast<Eigen::Index>(comps.size()));
    for (std::size_t k = 0; k < comps.size(); ++k) {
        auto col = comps[k].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(col.size()) != model.mean.size()) {
            throw DimensionError("PCA component length does not match mean length");
        }
        model.components.col(static_cast<Eigen::Index>(k)) = Eigen::Map<Vector>(col.data(), model.mean.size());
    }
    model.variance_fraction_captured = j.at("variance_fraction_captured").get<double>();
    return model;
}

FilterKernel optimal_kernel(const FeatureMatrix &train, double dt) {
    train.validate();
    if (train.cols() % 2 != 0) {
        throw DimensionError("feature rows must hold Re and Im blocks");
    }
    const Eigen::Index m = train.cols() / 2;
    Vector sum[2] = {Vector::Zero(2 * m), Vector::Zero(2 * m)};
    double count[2] = {0.0, 0.0};
    for (Eigen::Index i = 0; i < train.rows(); ++i) {
        int c = train.labels[i];
        if (c != 0 && c != 1) {
            throw InvalidArgument("optimal kernel requires binary labels");
        }
        sum[c] += train.x.row(i).transpose();
        count[c] += 1.0;
    }
    if (count[0] < 2.0 || count[1] < 2.0) {
        throw DataError("optimal kernel needs at least 2 shots of each class");
    }
    Vector mean0 = sum[0] / count[0];
    Vector mean1 = sum[1] / count[1];

    FilterKernel kernel;
    kernel.dt = dt;
    kernel.beta.resize(m);
    kernel.phases.resize(m);
    kernel.weights.resize(m);
    kernel.info_variance.assign(m, 0.0);
    std::vector<cplx> rot(m);
    bool any_signal = false;
    for (Eigen::Index j = 0; j < m; ++j) {
        kernel.beta[j] = cplx(mean0[j] - mean1[j], mean0[m + j] - mean1[m + j]);
        kernel.phases[j] = std::arg(kernel.beta[j]);
        rot[j] = std::polar(1.0, -kernel.phases[j]);
        any_signal = any_signal || kernel.beta[j] != cplx(0.0, 0.0);
    }
    if (!any_signal) {
        throw DegenerateKernel("class means are identical; matched-filter kernel is zero");
    }
    for (Eigen::Index i = 0; i < train.rows(); ++i) {
        const Vector &mu = train.labels[i] == 0 ? mean0 : mean1;
        for (Eigen::Index j = 0; j < m; ++j) {
            cplx r(train.x(i, j) - mu[j], train.x(i, m + j) - mu[m + j]);
            double info = (rot[j] * r).real();
            kernel.info_variance[j] += info * info;
        }
    }
    const double dof = count[0] + count[1] - 2.0;
    for (Eigen::Index j = 0; j < m; ++j) {
        kernel.info_variance[j] /= dof;
        if (!(kernel.info_variance[j] > 0.0)) {
            throw DegenerateKernel("information quadrature has zero variance in bin " + std::to_string(j));
        }
        kernel.weights[j] = std::conj(kernel.beta[j]) / kernel.info_variance[j];
    }
    return kernel;
}

FilterKernel optimal_kernel(const sim::Dataset &train) { return optimal_kernel(vectorize(train), train.grid.dt()); }

double matched_filter_statistic(std::span<const cplx> samples, const FilterKernel &kernel) {
    if (samples.size() != kernel.size()) {
        throw DimensionError("trajectory length does not match kernel length");
    }
    double s = 0.0;
    for (std::size_t j = 0; j < samples.size(); ++j) {
        s += std::abs(kernel.weights[j]) * (std::polar(1.0, -kernel.phases[j]) * samples[j]).real();
    }
    return s * kernel.dt;
}

double matched_filter_statistic(const Eigen::Ref<const Vector> &row, const FilterKernel &kernel) {
    if (row.size() != 2 * static_cast<Eigen::Index>(kernel.size())) {
        throw DimensionError("feature row length does not match kernel length");
    }
    auto samples = unvectorize(row);
    return matched_filter_statistic(samples, kernel);
}

Vector matched_filter_statistics(const Matrix &x, const FilterKernel &kernel) {
    const Eigen::Index m = static_cast<Eigen::Index>(kernel.size());
    if (x.cols() != 2 * m) {
        throw DimensionError("feature rows do not match kernel length");
    }
    // Re[e^{-i phi} c] = cos(phi) Re c + sin(phi) Im c.
    Vector coeff(2 * m);
    for (Eigen::Index j = 0; j < m; ++j) {
        double mag = std::abs(kernel.weights[j]) * kernel.dt;
        coeff[j] = mag * std::cos(kernel.phases[j]);
        coeff[m + j] = mag * std::sin(kernel.phases[j]);
    }
    return x * coeff;
}

}  // namespace qtraj::features
