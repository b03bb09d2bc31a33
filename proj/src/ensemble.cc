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

#include "qtraj/ensemble.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "qtraj/errors.h"

namespace qtraj::ensemble {

std::string kind_name(Kind k) {
    switch (k) {
        case Kind::multi_lda:
            return "multi-lda";
        case Kind::multi_svm:
            return "multi-svm";
        case Kind::rusboost:
            return "rusboost";
    }
    return "?";
}

namespace {

int count_classes(std::span<const int> y) {
    int k = 0;
    for (int v : y) {
        if (v < 0) {
            throw InvalidArgument("class labels must be non-negative");
        }
        k = std::max(k, v + 1);
    }
    std::vector<int> counts(k, 0);
    for (int v : y) ++counts[v];
    for (int c = 0; c < k; ++c) {
        if (counts[c] < 2) {
            throw InvalidArgument("class " + std::to_string(c) + " has " + std::to_string(counts[c]) +
                                  " training rows; at least 2 are required");
        }
    }
    if (k < 2) {
        throw InvalidArgument("multi-class training needs at least two classes");
    }
    return k;
}

int first_argmax(const Eigen::Ref<const Eigen::RowVectorXd> &row) {
    int best = 0;
    for (Eigen::Index c = 1; c < row.size(); ++c) {
        if (row[c] > row[best]) best = static_cast<int>(c);
    }
    return best;
}

void fit_multi_lda(MultiClassModel &m, const features::FeatureMatrix &train, const MultiClassOptions &options) {
    const int k = m.n_classes;
    const Eigen::Index d = train.cols();
    Matrix means = Matrix::Zero(k, d);
    std::vector<double> counts(k, 0.0);
    for (Eigen::Index i = 0; i < train.rows(); ++i) {
        means.row(train.labels[i]) += train.x.row(i);
        counts[train.labels[i]] += 1.0;
    }
    for (int c = 0; c < k; ++c) means.row(c) /= counts[c];
    Matrix centered = train.x;
    for (Eigen::Index i = 0; i < train.rows(); ++i) centered.row(i) -= means.row(train.labels[i]);
    const double n = static_cast<double>(train.rows());
    Eigen::MatrixXd pooled = (centered.transpose() * centered) / (n - k);

    auto try_factor = [&](double lambda, Eigen::LLT<Eigen::MatrixXd> &llt) {
        llt.compute(lambda > 0.0 ? discriminant::shrink_to_diagonal(pooled, lambda) : pooled);
        return llt.info() == Eigen::Success && llt.rcond() >= options.lda.rcond_tol;
    };
    Eigen::LLT<Eigen::MatrixXd> llt;
    double lambda = options.lda.shrinkage;
    if (!try_factor(lambda, llt)) {
        if (!options.lda.escalate_shrinkage) {
            double rc = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
            throw SingularCovariance("singular pooled covariance in multi-class LDA",
                                     rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity());
        }
        bool ok = false;
        for (double l = 1e-12; l <= 1.0; l *= 10.0) {
            if (l > lambda && try_factor(l, llt)) {
                lambda = l;
                ok = true;
                break;
            }
        }
        if (!ok) {
            lambda = 1.0;
            if (!try_factor(1.0, llt)) {
                throw SingularCovariance("pooled covariance has zero variance features",
                                         std::numeric_limits<double>::infinity());
            }
        }
    }
    m.lda_shrinkage = lambda;
    m.lda_weights = llt.solve(means.transpose());  // d x K
    m.lda_offsets.resize(k);
    for (int c = 0; c < k; ++c) {
        m.lda_offsets[c] = -0.5 * means.row(c).dot(m.lda_weights.col(c)) + std::log(counts[c] / n);
    }
}

void fit_multi_svm(MultiClassModel &m, const features::FeatureMatrix &train, const MultiClassOptions &options) {
    const int k = m.n_classes;
    const int machines = k == 2 ? 1 : k;
    for (int c = 0; c < machines; ++c) {
        const int positive = k == 2 ? 1 : c;
        std::vector<int> y(train.labels.size());
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = train.labels[i] == positive ? 1 : -1;
        m.machines.push_back(svm::fit_svm(train.x, y, options.c, options.kernel, options.svm));
    }
}

void fit_rusboost(MultiClassModel &m, const features::FeatureMatrix &train, std::uint64_t seed,
                  const MultiClassOptions &options) {
    if (options.rounds < 1) {
        throw InvalidArgument("boosting needs at least one round");
    }
    const int k = m.n_classes;
    const Eigen::Index n = train.rows();
    std::vector<std::vector<Eigen::Index>> by_class(k);
    for (Eigen::Index i = 0; i < n; ++i) by_class[train.labels[i]].push_back(i);
    std::size_t minority = n;
    for (const auto &rows : by_class) minority = std::min(minority, rows.size());

    std::mt19937_64 rng(seed);
    std::vector<double> weight(n, 1.0 / static_cast<double>(n));
    for (int round = 0; round < options.rounds; ++round) {
        std::vector<Eigen::Index> sample;
        for (auto rows : by_class) {
            // Partial Fisher-Yates: the first `minority` entries are a uniform subset.
            for (std::size_t a = 0; a < minority; ++a) {
                std::uniform_int_distribution<std::size_t> pick(a, rows.size() - 1);
                std::swap(rows[a], rows[pick(rng)]);
            }
            sample.insert(sample.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(minority));
        }
        std::sort(sample.begin(), sample.end());
        Matrix xs = train.x(sample, Eigen::all);
        std::vector<int> ys(sample.size());
        std::vector<double> ws(sample.size());
        double wsum = 0.0;
        for (std::size_t s = 0; s < sample.size(); ++s) {
            ys[s] = train.labels[sample[s]];
            ws[s] = weight[sample[s]];
            wsum += ws[s];
        }
        for (double &w : ws) w /= wsum;
        Stump stump = fit_stump(xs, ys, ws, k);

        double err = 0.0;
        std::vector<bool> wrong(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            wrong[i] = stump.vote(train.x.row(i)) != train.labels[i];
            if (wrong[i]) err += weight[i];
        }
        err = std::clamp(err, 1e-10, 1.0);
        double alpha = std::log((1.0 - err) / err) + std::log(static_cast<double>(k - 1));
        if (!(alpha > 0.0)) {
            if (m.stumps.empty()) {
                stump.weight = 1.0;
                m.stumps.push_back(stump);
            }
            break;
        }
        stump.weight = alpha;
        m.stumps.push_back(stump);
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (wrong[i]) weight[i] *= std::exp(alpha);
            total += weight[i];
        }
        for (double &w : weight) w /= total;
    }
}

}  // namespace

Stump fit_stump(const Matrix &x, std::span<const int> y, std::span<const double> w, int n_classes) {
    const Eigen::Index n = x.rows();
    if (n == 0 || static_cast<Eigen::Index>(y.size()) != n || static_cast<Eigen::Index>(w.size()) != n) {
        throw DimensionError("stump inputs have inconsistent sizes");
    }
    std::vector<double> total(n_classes, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) total[y[i]] += w[i];
    const double wall = std::accumulate(total.begin(), total.end(), 0.0);

    // Split by weighted Gini impurity; leaves vote the weighted majority.
    auto impurity = [&](const std::vector<double> &side, double mass) {
        if (mass <= 0.0) return 0.0;
        double sq = 0.0;
        for (double v : side) sq += v * v;
        return mass - sq / mass;
    };
    auto majority = [](const std::vector<double> &side) {
        return static_cast<int>(std::max_element(side.begin(), side.end()) - side.begin());
    };

    const int c0 = majority(total);
    Stump best{0, std::numeric_limits<double>::infinity(), c0, c0, 1.0};
    double best_score = impurity(total, wall);
    const double slack = 1e-12 * wall;
    std::vector<Eigen::Index> order(n);
    std::vector<double> left(n_classes), right(n_classes);
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return x(a, f) < x(b, f); });
        std::fill(left.begin(), left.end(), 0.0);
        double lmass = 0.0;
        for (Eigen::Index p = 0; p + 1 < n; ++p) {
            left[y[order[p]]] += w[order[p]];
            lmass += w[order[p]];
            const double v = x(order[p], f), next = x(order[p + 1], f);
            if (!(next > v)) continue;
            for (int c = 0; c < n_classes; ++c) right[c] = total[c] - left[c];
            const double score = impurity(left, lmass) + impurity(right, wall - lmass);
            if (score < best_score - slack) {
                best_score = score;
                best = Stump{f, 0.5 * (v + next), majority(left), majority(right), 1.0};
            }
        }
    }
    return best;
}

MultiClassModel fit_multiclass(const features::FeatureMatrix &train, Kind kind, std::uint64_t seed,
                               const MultiClassOptions &options) {
    train.validate();
    MultiClassModel m;
    m.kind = kind;
    m.n_classes = count_classes(train.labels);
    switch (kind) {
        case Kind::multi_lda:
            fit_multi_lda(m, train, options);
            break;
        case Kind::multi_svm:
            fit_multi_svm(m, train, options);
            break;
        case Kind::rusboost:
            fit_rusboost(m, train, seed, options);
            break;
    }
    return m;
}

Matrix MultiClassModel::class_scores(const Matrix &x) const {
    Matrix s = Matrix::Zero(x.rows(), n_classes);
    switch (kind) {
        case Kind::multi_lda:
            if (x.cols() != lda_weights.rows()) {
                throw DimensionError("input dimension does not match the model");
            }
            s = x * lda_weights;
            s.rowwise() += lda_offsets.transpose();
            break;
        case Kind::multi_svm:
            if (machines.size() == 1) {
                Vector d = machines[0].decisions(x);
                // Ties (d = 0) go to class 1, matching the binary SVM rule.
                s.col(1) = d;
                s.col(0) = -d.array() - std::numeric_limits<double>::min();
            } else {
                for (int c = 0; c < n_classes; ++c) s.col(c) = machines[c].decisions(x);
            }
            break;
        case Kind::rusboost:
            if (!stumps.empty() && x.cols() <= stumps.front().feature) {
                throw DimensionError("input dimension does not match the model");
            }
            for (Eigen::Index i = 0; i < x.rows(); ++i) {
                for (const auto &st : stumps) s(i, st.vote(x.row(i))) += st.weight;
            }
            break;
    }
    return s;
}

std::vector<int> MultiClassModel::predict(const Matrix &x) const {
    Matrix s = class_scores(x);
    std::vector<int> out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = first_argmax(s.row(i));
    return out;
}

int MultiClassModel::classify(const Eigen::Ref<const Vector> &x) const {
    Matrix row = x.transpose();
    return predict(row).front();
}

nlohmann::json MultiClassModel::to_json() const {
    nlohmann::json j = {{"kind", kind_name(kind)}, {"n_classes", n_classes}};
    if (kind == Kind::multi_lda) {
        nlohmann::json cols = nlohmann::json::array();
        for (Eigen::Index c = 0; c < lda_weights.cols(); ++c) {
            Vector col = lda_weights.col(c);
            cols.push_back(std::vector<double>(col.begin(), col.end()));
        }
        j["weights"] = cols;
        j["offsets"] = std::vector<double>(lda_offsets.begin(), lda_offsets.end());
        j["shrinkage"] = lda_shrinkage;
    } else if (kind == Kind::multi_svm) {
        j["machines"] = nlohmann::json::array();
        for (const auto &mc : machines) j["machines"].push_back(mc.to_json());
    } else {
        j["stumps"] = nlohmann::json::array();
        for (const auto &st : stumps) {
            j["stumps"].push_back({{"feature", st.feature},
                                   {"threshold", st.threshold},
                                   {"left", st.left},
                                   {"right", st.right},
                                   {"weight", st.weight}});
        }
    }
    return j;
}

std::vector<int> collapse_to_binary(std::span<const int> predictions, std::span<const int> map) {
    std::vector<int> out(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        int p = predictions[i];
        if (p < 0 || p >= static_cast<int>(map.size())) {
            throw InvalidArgument("unknown class label " + std::to_string(p));
        }
        out[i] = map[p];
    }
    return out;
}

}  // namespace qtraj::ensemble
