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
#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "oracles.h"
#include "qtraj/discriminant.h"
#include "qtraj/errors.h"
#include "qtraj/features.h"
#include "qtraj/sim.h"

using namespace qtraj;
using namespace qtraj::discriminant;
using Catch::Approx;
using features::FeatureMatrix;

namespace {

// Rows drawn from N(mean, L L^T).
Matrix draw(Eigen::Index n, const Vector &mean, const Eigen::MatrixXd &l, std::mt19937_64 &rng) {
    std::normal_distribution<double> n01;
    Matrix x(n, mean.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        Vector z(mean.size());
        for (auto &v : z) v = n01(rng);
        x.row(i) = (mean + l * z).transpose();
    }
    return x;
}

FeatureMatrix two_classes(const Matrix &a, const Matrix &b) {
    FeatureMatrix fm;
    fm.x.resize(a.rows() + b.rows(), a.cols());
    fm.x << a, b;
    fm.labels.assign(a.rows(), 0);
    fm.labels.resize(a.rows() + b.rows(), 1);
    return fm;
}

Eigen::MatrixXd random_factor(Eigen::Index d, std::mt19937_64 &rng) {
    std::normal_distribution<double> n01;
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) l(i, j) = 0.5 * n01(rng);
        l(i, i) = 0.5 + std::abs(n01(rng));
    }
    return l;
}

std::vector<double> as_std(const Eigen::Ref<const Vector> &v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST_CASE("one-dimensional LDA puts the boundary at the midpoint") {
    std::mt19937_64 rng(1);
    Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    auto fm = two_classes(draw(20000, Vector::Constant(1, 0.0), one, rng), draw(20000, Vector::Constant(1, 2.0), one, rng));
    auto model = fit_gaussian(fm, Variant::lda);
    CHECK(model.threshold() / model.linear_term()[0] == Approx(1.0).margin(0.05));
}

TEST_CASE("scores carry no constant term") {
    std::mt19937_64 rng(2);
    auto fm = two_classes(draw(200, Vector::Constant(3, 1.0), random_factor(3, rng), rng),
                          draw(300, Vector::Constant(3, -1.0), random_factor(3, rng), rng));
    for (Variant v : {Variant::ldad, Variant::lda, Variant::qdad, Variant::qda}) {
        auto model = fit_gaussian(fm, v);
        CHECK(model.score(Vector::Zero(3)) == 0.0);
    }
}

TEST_CASE("identity covariance gives twice the first coordinate") {
    Vector mu0 = Vector::Unit(3, 0), mu1 = -Vector::Unit(3, 0);
    auto model = GaussianDiscriminantModel::build(Variant::lda, mu0, mu1, Eigen::MatrixXd::Identity(3, 3),
                                                  Eigen::MatrixXd::Identity(3, 3));
    Vector x(3);
    x << 0.7, -3.0, 11.0;
    CHECK(model.score(x) == Approx(1.4));
    CHECK(model.threshold() == Approx(0.0).margin(1e-15));
}

TEST_CASE("threshold ties go to class 0") {
    auto model = GaussianDiscriminantModel::build(Variant::lda, Vector::Constant(1, 1.0), Vector::Constant(1, -1.0),
                                                  Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(1, 1));
    REQUIRE(model.score(Vector::Zero(1)) == model.threshold());
    CHECK(model.classify(Vector::Zero(1)) == 0);
    CHECK(model.classify(Vector::Constant(1, 1.0)) == 0);
    CHECK(model.classify(Vector::Constant(1, -1.0)) == 1);
}

TEST_CASE("QDA matches the Gaussian log-density ratio") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(100 + seed);
        std::normal_distribution<double> n01;
        Vector m0(3), m1(3);
        for (auto &v : m0) v = n01(rng);
        for (auto &v : m1) v = n01(rng);
        Matrix a = draw(150 + 40 * seed, m0, random_factor(3, rng), rng);
        Matrix b = draw(400, m1, random_factor(3, rng), rng);
        auto model = fit_gaussian(two_classes(a, b), Variant::qda);

        // Independent estimates of the class parameters.
        oracle::Dense ra, rb;
        for (Eigen::Index i = 0; i < a.rows(); ++i) ra.push_back(as_std(a.row(i).transpose()));
        for (Eigen::Index i = 0; i < b.rows(); ++i) rb.push_back(as_std(b.row(i).transpose()));
        auto mean_of = [](const oracle::Dense &rows) {
            std::vector<double> m(rows.front().size(), 0.0);
            for (const auto &r : rows)
                for (std::size_t j = 0; j < m.size(); ++j) m[j] += r[j] / rows.size();
            return m;
        };
        auto ma = mean_of(ra), mb = mean_of(rb);
        auto ca = oracle::covariance(ra), cb = oracle::covariance(rb);
        const double na = static_cast<double>(a.rows()), nb = static_cast<double>(b.rows());
        const double log_prior = std::log(na / (na + nb)) - std::log(nb / (na + nb));

        for (int t = 0; t < 200; ++t) {
            Vector x(3);
            for (auto &v : x) v = 2.0 * n01(rng);
            auto xs = as_std(x);
            double ratio =
                oracle::gaussian_log_density(xs, ma, ca) - oracle::gaussian_log_density(xs, mb, cb) + log_prior;
            double margin = model.score(x) - model.threshold();
            CHECK(margin == Approx(ratio).margin(1e-9).epsilon(1e-9));
            if (std::abs(ratio) > 1e-9) CHECK(model.classify(x) == (ratio > 0.0 ? 0 : 1));
        }
    }
}

TEST_CASE("QDA with equal covariances reduces to LDA") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n01;
    Eigen::MatrixXd l = random_factor(4, rng);
    Eigen::MatrixXd cov = l * l.transpose();
    Vector m0(4), m1(4);
    for (auto &v : m0) v = n01(rng);
    for (auto &v : m1) v = n01(rng);
    auto qda = GaussianDiscriminantModel::build(Variant::qda, m0, m1, cov, cov, 0.3, 0.7);
    auto lda = GaussianDiscriminantModel::build(Variant::lda, m0, m1, cov, cov, 0.3, 0.7);
    Matrix x = draw(2000, Vector::Zero(4), 2.0 * Eigen::MatrixXd::Identity(4, 4), rng);
    CHECK(qda.predict(x) == lda.predict(x));
    Vector dq = qda.scores(x).array() - qda.threshold();
    Vector dl = lda.scores(x).array() - lda.threshold();
    CHECK((dq - dl).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("QDA on full-dimension data is singular until PCA") {
    std::mt19937_64 rng(8);
    const Eigen::Index dim = 326, rank = 20, per_class = 150;
    Eigen::MatrixXd loading(dim, rank);
    std::normal_distribution<double> n01;
    for (auto &v : loading.reshaped()) v = n01(rng);
    auto sample = [&](double shift) {
        Matrix x = draw(per_class, Vector::Zero(rank), Eigen::MatrixXd::Identity(rank, rank), rng) *
                   loading.transpose();
        x.array() += shift;
        x += 1e-3 * draw(per_class, Vector::Zero(dim), Eigen::MatrixXd::Identity(dim, dim), rng);
        return x;
    };
    auto fm = two_classes(sample(0.0), sample(0.5));
    CHECK_THROWS_AS(fit_gaussian(fm, Variant::qda), SingularCovariance);
    try {
        fit_gaussian(fm, Variant::qda);
    } catch (const SingularCovariance &e) {
        CHECK(std::string(e.what()).find("singular covariance") != std::string::npos);
    }

    auto pca = features::fit_pca(fm.x, 0.999);
    CHECK(pca.dim() <= rank + 1);
    auto model = fit_gaussian(features::project(pca, fm), Variant::qda);
    auto predicted = model.predict(features::project_rows(pca, fm.x));
    CHECK(predicted.size() == fm.labels.size());
}

TEST_CASE("linear variants escalate shrinkage on request") {
    std::mt19937_64 rng(9);
    Matrix a = draw(100, Vector::Constant(2, 0.0), Eigen::MatrixXd::Identity(2, 2), rng);
    Matrix b = draw(100, Vector::Constant(2, 3.0), Eigen::MatrixXd::Identity(2, 2), rng);
    auto fm = two_classes(a, b);
    Matrix dup(fm.rows(), 3);
    dup << fm.x, fm.x.col(0);  // exact collinearity
    FeatureMatrix collinear{dup, fm.labels};
    CHECK_THROWS_AS(fit_gaussian(collinear, Variant::lda), SingularCovariance);
    auto model = fit_gaussian(collinear, Variant::lda, FitOptions{.escalate_shrinkage = true});
    CHECK(model.shrinkage() > 0.0);
    CHECK(model.predict(dup) == fit_gaussian(fm, Variant::lda).predict(fm.x));
}

TEST_CASE("covariance estimates are positive semidefinite") {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 5; ++trial) {
        Matrix x = draw(30, Vector::Zero(8), random_factor(8, rng), rng);
        Vector mean = x.colwise().mean().transpose();
        Eigen::MatrixXd cov = sample_covariance(x, mean);
        CHECK((cov - cov.transpose()).norm() < 1e-14);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        CHECK(eig.eigenvalues().minCoeff() > -1e-12);
        for (double lambda : {0.0, 0.25, 1.0}) {
            Eigen::MatrixXd s = shrink_to_diagonal(cov, lambda);
            CHECK(s.diagonal().isApprox(cov.diagonal()));
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
            CHECK(es.eigenvalues().minCoeff() > -1e-12);
        }
        CHECK(shrink_to_diagonal(cov, 1.0).isDiagonal());
    }
}

TEST_CASE("LDAd with the information variance is the matched filter") {
    auto spec = sim::SimulationSpec::ideal_noise();
    spec.shots = 8000;
    auto fm = features::vectorize(sim::generate_dataset(spec, 4));
    auto split = features::first_half_split(fm.labels);
    auto train = features::select_rows(fm, split.train), test = features::select_rows(fm, split.test);
    auto kernel = features::optimal_kernel(train, spec.grid.dt());

    const Eigen::Index m = static_cast<Eigen::Index>(kernel.size());
    Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(2 * m, 2 * m);
    for (Eigen::Index j = 0; j < m; ++j) diag(j, j) = diag(m + j, m + j) = kernel.info_variance[j];
    Vector mu[2] = {Vector::Zero(2 * m), Vector::Zero(2 * m)};
    double count[2] = {0, 0};
    for (Eigen::Index i = 0; i < train.rows(); ++i) {
        mu[train.labels[i]] += train.x.row(i).transpose();
        count[train.labels[i]] += 1;
    }
    mu[0] /= count[0];
    mu[1] /= count[1];
    auto ldad = GaussianDiscriminantModel::build(Variant::ldad, mu[0], mu[1], diag, diag);

    Vector s_train = features::matched_filter_statistics(train.x, kernel);
    double mean_s[2] = {0, 0};
    for (Eigen::Index i = 0; i < train.rows(); ++i) mean_s[train.labels[i]] += s_train[i] / count[train.labels[i]];
    const double midpoint = 0.5 * (mean_s[0] + mean_s[1]);

    Vector s_test = features::matched_filter_statistics(test.x, kernel);
    auto by_ldad = ldad.predict(test.x);
    int disagreements = 0;
    for (Eigen::Index i = 0; i < test.rows(); ++i) disagreements += by_ldad[i] != (s_test[i] >= midpoint ? 0 : 1);
    CHECK(disagreements == 0);

    // The fitted per-feature diagonal is close to the information variance on white noise.
    auto fitted = fit_gaussian(train, Variant::ldad).predict(test.x);
    int close = 0;
    for (Eigen::Index i = 0; i < test.rows(); ++i) close += fitted[i] == by_ldad[i];
    CHECK(close >= 0.99 * test.rows());
}

TEST_CASE("models survive a JSON round trip") {
    std::mt19937_64 rng(11);
    auto fm = two_classes(draw(80, Vector::Constant(3, 0.0), random_factor(3, rng), rng),
                          draw(90, Vector::Constant(3, 1.0), random_factor(3, rng), rng));
    for (Variant v : {Variant::ldad, Variant::lda, Variant::qdad, Variant::qda}) {
        auto model = fit_gaussian(fm, v);
        auto back = GaussianDiscriminantModel::from_json(model.to_json());
        CHECK(back.variant() == v);
        CHECK((back.scores(fm.x) - model.scores(fm.x)).norm() < 1e-9);
        CHECK(back.threshold() == Approx(model.threshold()));
    }
}

TEST_CASE("bad training sets are rejected") {
    Matrix x = Matrix::Random(6, 2);
    CHECK_THROWS_AS(fit_gaussian(FeatureMatrix{x, {0, 0, 0, 0, 0, 1}}, Variant::lda), DataError);
    CHECK_THROWS_AS(fit_gaussian(FeatureMatrix{x, {0, 0, 0, 2, 1, 1}}, Variant::lda), InvalidArgument);
    CHECK_THROWS_AS(fit_gaussian(FeatureMatrix{x, {0, 0, 0, 1, 1, 1}}, Variant::lda, FitOptions{.shrinkage = 2.0}),
                    InvalidArgument);
    CHECK_THROWS_AS(parse_variant("pda"), InvalidArgument);
    auto model = fit_gaussian(FeatureMatrix{x, {0, 0, 0, 1, 1, 1}}, Variant::ldad);
    CHECK_THROWS_AS(model.score(Vector::Zero(5)), DimensionError);
}
