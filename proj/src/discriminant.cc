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

#include "qtraj/discriminant.h"

#include <cmath>
#include <limits>

#include "qtraj/errors.h"

namespace qtraj::discriminant {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::ldad:
            return "ldad";
        case Variant::lda:
            return "lda";
        case Variant::qdad:
            return "qdad";
        case Variant::qda:
            return "qda";
    }
    return "?";
}

Variant parse_variant(const std::string &name) {
    for (Variant v : {Variant::ldad, Variant::lda, Variant::qdad, Variant::qda}) {
        if (variant_name(v) == name) {
            return v;
        }
    }
    throw InvalidArgument("unknown discriminant variant '" + name + "'");
}

bool is_linear(Variant v) { return v == Variant::ldad || v == Variant::lda; }
bool is_diagonal(Variant v) { return v == Variant::ldad || v == Variant::qdad; }

Eigen::MatrixXd sample_covariance(const Matrix &rows, const Vector &mean) {
    if (rows.rows() < 2) {
        throw DataError("covariance needs at least 2 rows");
    }
    Matrix centered = rows.rowwise() - mean.transpose();
    return (centered.transpose() * centered) / static_cast<double>(rows.rows() - 1);
}

Eigen::MatrixXd shrink_to_diagonal(const Eigen::MatrixXd &cov, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw InvalidArgument("shrinkage must lie in [0, 1]");
    }
    Eigen::MatrixXd out = (1.0 - lambda) * cov;
    out.diagonal() = cov.diagonal();
    return out;
}

namespace {

Eigen::LLT<Eigen::MatrixXd> factor(const Eigen::MatrixXd &cov, double rcond_tol, const char *which) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    double rc = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
    if (llt.info() != Eigen::Success || !(rc >= rcond_tol)) {
        double cond = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
        throw SingularCovariance(std::string("singular covariance (") + which + "), condition number ~ " +
                                     std::to_string(cond),
                                 cond);
    }
    return llt;
}

double log_det(const Eigen::LLT<Eigen::MatrixXd> &llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

GaussianDiscriminantModel GaussianDiscriminantModel::build(Variant variant, Vector mu0, Vector mu1,
                                                           Eigen::MatrixXd cov0, Eigen::MatrixXd cov1, double prior0,
                                                           double prior1, double shrinkage, double rcond_tol) {
    if (mu0.size() != mu1.size() || cov0.rows() != mu0.size() || cov0.cols() != mu0.size()) {
        throw DimensionError("discriminant parameters have inconsistent dimensions");
    }
    if (!is_linear(variant) && (cov1.rows() != mu1.size() || cov1.cols() != mu1.size())) {
        throw DimensionError("discriminant parameters have inconsistent dimensions");
    }
    if (!(prior0 > 0.0 && prior1 > 0.0)) {
        throw InvalidArgument("class priors must be positive");
    }
    GaussianDiscriminantModel m;
    m.variant_ = variant;
    m.mu0_ = std::move(mu0);
    m.mu1_ = std::move(mu1);
    m.cov0_ = std::move(cov0);
    m.prior0_ = prior0;
    m.prior1_ = prior1;
    m.shrinkage_ = shrinkage;
    const double prior_term = std::log(prior1 / prior0);
    if (is_linear(variant)) {
        m.chol0_ = factor(m.cov0_, rcond_tol, "pooled");
        m.linear_ = m.chol0_.solve(m.mu0_ - m.mu1_);
        m.threshold_ = 0.5 * (m.mu0_ + m.mu1_).dot(m.linear_) + prior_term;
    } else {
        m.cov1_ = std::move(cov1);
        m.chol0_ = factor(m.cov0_, rcond_tol, "class 0");
        m.chol1_ = factor(m.cov1_, rcond_tol, "class 1");
        Vector a0 = m.chol0_.solve(m.mu0_);
        Vector a1 = m.chol1_.solve(m.mu1_);
        m.linear_ = a0 - a1;
        m.threshold_ = 0.5 * (m.mu0_.dot(a0) - m.mu1_.dot(a1)) + 0.5 * (log_det(m.chol0_) - log_det(m.chol1_)) +
                       prior_term;
    }
    return m;
}

double GaussianDiscriminantModel::score(const Eigen::Ref<const Vector> &x) const {
    if (x.size() != dim()) {
        throw DimensionError("input has length " + std::to_string(x.size()) + ", model expects " +
                             std::to_string(dim()));
    }
    double s = x.dot(linear_);
    if (!is_linear(variant_)) {
        Vector z0 = chol0_.matrixL().solve(x);
        Vector z1 = chol1_.matrixL().solve(x);
        s += -0.5 * (z0.squaredNorm() - z1.squaredNorm());
    }
    return s;
}

Vector GaussianDiscriminantModel::scores(const Matrix &x) const {
    if (x.cols() != dim()) {
        throw DimensionError("input has " + std::to_string(x.cols()) + " columns, model expects " +
                             std::to_string(dim()));
    }
    Vector out = x * linear_;
    if (!is_linear(variant_)) {
        constexpr Eigen::Index kChunk = 4096;
        for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
            Eigen::Index len = std::min(kChunk, x.rows() - start);
            Eigen::MatrixXd xt = x.middleRows(start, len).transpose();
            Eigen::MatrixXd z0 = chol0_.matrixL().solve(xt);
            Eigen::MatrixXd z1 = chol1_.matrixL().solve(xt);
            out.segment(start, len) +=
                -0.5 * (z0.colwise().squaredNorm() - z1.colwise().squaredNorm()).transpose();
        }
    }
    return out;
}

std::vector<int> GaussianDiscriminantModel::predict(const Matrix &x) const {
    Vector s = scores(x);
    std::vector<int> out(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        out[i] = s[i] >= threshold_ ? 0 : 1;
    }
    return out;
}

namespace {

nlohmann::json vec_json(const Vector &v) { return std::vector<double>(v.begin(), v.end()); }

nlohmann::json mat_json(const Eigen::MatrixXd &m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Vector r = m.row(i).transpose();
        rows.push_back(vec_json(r));
    }
    return rows;
}

Vector json_vec(const nlohmann::json &j) {
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd json_mat(const nlohmann::json &j) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), j.empty() ? 0 : static_cast<Eigen::Index>(j[0].size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        m.row(static_cast<Eigen::Index>(i)) = json_vec(j[i]).transpose();
    }
    return m;
}

}  // namespace

nlohmann::json GaussianDiscriminantModel::to_json() const {
    nlohmann::json j = {{"variant", variant_name(variant_)},
                        {"mean_0", vec_json(mu0_)},
                        {"mean_1", vec_json(mu1_)},
                        {"covariance_0", mat_json(cov0_)},
                        {"prior_0", prior0_},
                        {"prior_1", prior1_},
                        {"shrinkage", shrinkage_},
                        {"threshold", threshold_}};
    if (!is_linear(variant_)) {
        j["covariance_1"] = mat_json(cov1_);
    }
    return j;
}

GaussianDiscriminantModel GaussianDiscriminantModel::from_json(const nlohmann::json &j) {
    Variant v = parse_variant(j.at("variant").get<std::string>());
    Eigen::MatrixXd cov1 = is_linear(v) ? Eigen::MatrixXd() : json_mat(j.at("covariance_1"));
    return build(v, json_vec(j.at("mean_0")), json_vec(j.at("mean_1")), json_mat(j.at("covariance_0")), cov1,
                 j.at("prior_0").get<double>(), j.at("prior_1").get<double>(), j.value("shrinkage", 0.0), 0.0);
}

GaussianDiscriminantModel fit_gaussian(const features::FeatureMatrix &train, Variant variant,
                                       const FitOptions &options) {
    train.validate();
    if (!(options.shrinkage >= 0.0 && options.shrinkage <= 1.0)) {
        throw InvalidArgument("shrinkage must lie in [0, 1]");
    }
    std::vector<Eigen::Index> rows[2];
    for (std::size_t i = 0; i < train.labels.size(); ++i) {
        int c = train.labels[i];
        if (c != 0 && c != 1) {
            throw InvalidArgument("binary discriminant requires labels in {0, 1}");
        }
        rows[c].push_back(static_cast<Eigen::Index>(i));
    }
    if (rows[0].size() < 2 || rows[1].size() < 2) {
        throw DataError("each class needs at least 2 training rows");
    }
    Matrix x0 = train.x(rows[0], Eigen::all);
    Matrix x1 = train.x(rows[1], Eigen::all);
    Vector mu0 = x0.colwise().mean().transpose();
    Vector mu1 = x1.colwise().mean().transpose();
    Eigen::MatrixXd s0 = sample_covariance(x0, mu0);
    Eigen::MatrixXd s1 = sample_covariance(x1, mu1);
    const double n0 = static_cast<double>(rows[0].size());
    const double n1 = static_cast<double>(rows[1].size());
    if (is_linear(variant)) {
        s0 = ((n0 - 1.0) * s0 + (n1 - 1.0) * s1) / (n0 + n1 - 2.0);
        s1.resize(0, 0);
    }
    if (is_diagonal(variant)) {
        s0 = Eigen::MatrixXd(s0.diagonal().asDiagonal());
        if (!is_linear(variant)) {
            s1 = Eigen::MatrixXd(s1.diagonal().asDiagonal());
        }
    }
    const double p0 = options.equal_priors ? 0.5 : n0 / (n0 + n1);
    const double p1 = options.equal_priors ? 0.5 : n1 / (n0 + n1);

    auto attempt = [&](double lambda) {
        Eigen::MatrixXd c0 = lambda > 0.0 ? shrink_to_diagonal(s0, lambda) : s0;
        Eigen::MatrixXd c1 = !is_linear(variant) && lambda > 0.0 ? shrink_to_diagonal(s1, lambda) : s1;
        return GaussianDiscriminantModel::build(variant, mu0, mu1, std::move(c0), std::move(c1), p0, p1, lambda,
                                                options.rcond_tol);
    };
    try {
        return attempt(options.shrinkage);
    } catch (const SingularCovariance &) {
        if (!options.escalate_shrinkage || is_diagonal(variant)) {
            throw;
        }
    }
    for (double lambda = 1e-12; lambda <= 1.0; lambda *= 10.0) {
        if (lambda <= options.shrinkage) {
            continue;
        }
        try {
            return attempt(lambda);
        } catch (const SingularCovariance &) {
        }
    }
    return attempt(1.0);
}

}  // namespace qtraj::discriminant
