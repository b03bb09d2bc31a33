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

#include "qtraj/svm.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <memory>
#include <numeric>
#include <random>
#include <set>

#include "qtraj/errors.h"

namespace qtraj::svm {

namespace {

constexpr double kTau = 1e-12;

}  // namespace

void KernelSpec::validate() const {
    if (kind == KernelKind::rbf && !(gamma > 0.0 && std::isfinite(gamma))) {
        throw InvalidArgument("rbf kernel needs a finite positive gamma");
    }
}

double KernelSpec::operator()(const Eigen::Ref<const Vector> &a, const Eigen::Ref<const Vector> &b) const {
    if (kind == KernelKind::linear) {
        return a.dot(b);
    }
    return std::exp(-gamma * (a - b).squaredNorm());
}

namespace {

/// Rows of Q_ij = y_i y_j k(x_i, x_j) in single precision, with an LRU bound.
class QCache {
   public:
    QCache(const Matrix &x, std::span<const int> y, const KernelSpec &kernel, double cache_mb)
        : x_(x), y_(y), kernel_(kernel), n_(x.rows()) {
        sqnorm_ = x.rowwise().squaredNorm();
        const double row_bytes = static_cast<double>(n_) * sizeof(float);
        capacity_ = std::max<std::size_t>(2, static_cast<std::size_t>(cache_mb * 1024.0 * 1024.0 / row_bytes));
        rows_.resize(n_);
        where_.resize(n_);
        diag_.resize(n_);
        for (Eigen::Index i = 0; i < n_; ++i) {
            diag_[i] = kernel_.kind == KernelKind::linear ? sqnorm_[i] : 1.0;
        }
    }

    double diag(Eigen::Index i) const { return diag_[i]; }

    const float *row(Eigen::Index i) {
        if (rows_[i]) {
            lru_.splice(lru_.begin(), lru_, where_[i]);
            return rows_[i].get();
        }
        std::unique_ptr<float[]> buf;
        if (lru_.size() >= capacity_) {
            Eigen::Index victim = lru_.back();
            lru_.pop_back();
            buf = std::move(rows_[victim]);
        } else {
            buf = std::make_unique<float[]>(n_);
        }
        Vector dots = x_ * x_.row(i).transpose();
        const double yi = y_[i];
        for (Eigen::Index t = 0; t < n_; ++t) {
            double k = dots[t];
            if (kernel_.kind == KernelKind::rbf) {
                k = std::exp(-kernel_.gamma * std::max(0.0, sqnorm_[i] + sqnorm_[t] - 2.0 * dots[t]));
            }
            buf[t] = static_cast<float>(yi * y_[t] * k);
        }
        rows_[i] = std::move(buf);
        lru_.push_front(i);
        where_[i] = lru_.begin();
        return rows_[i].get();
    }

   private:
    const Matrix &x_;
    std::span<const int> y_;
    KernelSpec kernel_;
    Eigen::Index n_;
    Vector sqnorm_;
    std::vector<double> diag_;
    std::size_t capacity_;
    std::vector<std::unique_ptr<float[]>> rows_;
    std::list<Eigen::Index> lru_;
    std::vector<std::list<Eigen::Index>::iterator> where_;
};

void check_labels(std::span<const int> y, Eigen::Index n) {
    if (static_cast<Eigen::Index>(y.size()) != n) {
        throw DimensionError("label count does not match row count");
    }
    bool pos = false, neg = false;
    for (int v : y) {
        if (v == 1) {
            pos = true;
        } else if (v == -1) {
            neg = true;
        } else {
            throw InvalidArgument("SVM labels must be -1 or +1");
        }
    }
    if (!pos || !neg) {
        throw DataError("SVM training needs both labels present");
    }
}

}  // namespace

SvmModel fit_svm(const Matrix &x, std::span<const int> y, double c, const KernelSpec &kernel,
                 const SvmOptions &options) {
    kernel.validate();
    check_labels(y, x.rows());
    if (!(c > 0.0) || !std::isfinite(c)) {
        throw InvalidArgument("box constraint C must be positive");
    }
    if (!x.allFinite()) {
        throw DataError("SVM input contains non-finite values");
    }
    const Eigen::Index n = x.rows();
    const std::int64_t max_iter =
        options.max_iterations > 0 ? options.max_iterations : std::max<std::int64_t>(10000000, 100 * n);
    QCache q(x, y, kernel, options.cache_mb);
    std::vector<double> alpha(n, 0.0), grad(n, -1.0);
    auto is_upper = [&](Eigen::Index t) { return alpha[t] >= c; };
    auto is_lower = [&](Eigen::Index t) { return alpha[t] <= 0.0; };

    std::int64_t iter = 0;
    double gap = 0.0;
    while (true) {
        // Second-order working-set selection.
        double gmax = -std::numeric_limits<double>::infinity();
        Eigen::Index i = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (y[t] == 1) {
                if (!is_upper(t) && -grad[t] > gmax) {
                    gmax = -grad[t];
                    i = t;
                }
            } else if (!is_lower(t) && grad[t] > gmax) {
                gmax = grad[t];
                i = t;
            }
        }
        double gmax2 = -std::numeric_limits<double>::infinity();
        Eigen::Index j = -1;
        double obj_min = std::numeric_limits<double>::infinity();
        const float *qi = i >= 0 ? q.row(i) : nullptr;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (y[t] == 1) {
                if (!is_lower(t)) {
                    double gd = gmax + grad[t];
                    gmax2 = std::max(gmax2, grad[t]);
                    if (gd > 0.0) {
                        double quad = q.diag(i) + q.diag(t) - 2.0 * y[i] * qi[t];
                        double obj = -(gd * gd) / (quad > 0.0 ? quad : kTau);
                        if (obj < obj_min) {
                            obj_min = obj;
                            j = t;
                        }
                    }
                }
            } else if (!is_upper(t)) {
                double gd = gmax - grad[t];
                gmax2 = std::max(gmax2, -grad[t]);
                if (gd > 0.0) {
                    double quad = q.diag(i) + q.diag(t) + 2.0 * y[i] * qi[t];
                    double obj = -(gd * gd) / (quad > 0.0 ? quad : kTau);
                    if (obj < obj_min) {
                        obj_min = obj;
                        j = t;
                    }
                }
            }
        }
        gap = gmax + gmax2;
        if (gap < options.tol || j < 0) {
            break;
        }
        if (++iter > max_iter) {
            throw ConvergenceError("SMO did not converge within " + std::to_string(max_iter) +
                                       " iterations; max KKT violation " + std::to_string(gap),
                                   gap);
        }

        qi = q.row(i);
        const float *qj = q.row(j);
        const double old_i = alpha[i], old_j = alpha[j];
        double ai = old_i, aj = old_j;
        if (y[i] != y[j]) {
            double quad = q.diag(i) + q.diag(j) + 2.0 * qi[j];
            if (quad <= 0.0) quad = kTau;
            double delta = (-grad[i] - grad[j]) / quad;
            double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0.0) {
                if (aj < 0.0) {
                    aj = 0.0;
                    ai = diff;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = -diff;
            }
            if (diff > 0.0) {
                if (ai > c) {
                    ai = c;
                    aj = c - diff;
                }
            } else if (aj > c) {
                aj = c;
                ai = c + diff;
            }
        } else {
            double quad = q.diag(i) + q.diag(j) - 2.0 * qi[j];
            if (quad <= 0.0) quad = kTau;
            double delta = (grad[i] - grad[j]) / quad;
            double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > c) {
                if (ai > c) {
                    ai = c;
                    aj = sum - c;
                }
            } else if (aj < 0.0) {
                aj = 0.0;
                ai = sum;
            }
            if (sum > c) {
                if (aj > c) {
                    aj = c;
                    ai = sum - c;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        const double di = ai - old_i, dj = aj - old_j;
        for (Eigen::Index t = 0; t < n; ++t) {
            grad[t] += qi[t] * di + qj[t] * dj;
        }
    }

    // Bias from free vectors, or the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
    int n_free = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
        double yg = y[t] * grad[t];
        if (is_upper(t)) {
            if (y[t] == -1) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (is_lower(t)) {
            if (y[t] == 1) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    const double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);

    SvmModel model;
    model.kernel = kernel;
    model.c = c;
    model.bias = -rho;
    model.iterations = iter;
    for (Eigen::Index t = 0; t < n; ++t) {
        if (alpha[t] > 0.0) {
            model.support_indices.push_back(t);
        }
    }
    const Eigen::Index s = static_cast<Eigen::Index>(model.support_indices.size());
    model.support_vectors.resize(s, x.cols());
    model.coefficients.resize(s);
    model.alpha.resize(s);
    for (Eigen::Index k = 0; k < s; ++k) {
        Eigen::Index t = model.support_indices[k];
        model.support_vectors.row(k) = x.row(t);
        model.alpha[k] = alpha[t];
        model.coefficients[k] = alpha[t] * y[t];
    }
    // The cached kernel rows are single precision, so the objective is recomputed
    // in double from the support vectors rather than read off the gradient.
    if (s > 0) {
        Vector f = model.decisions(model.support_vectors).array() - model.bias;
        model.dual_objective = model.alpha.sum() - 0.5 * model.coefficients.dot(f);
    }
    return model;
}

double SvmModel::decision(const Eigen::Ref<const Vector> &x) const {
    if (x.size() != dim()) {
        throw DimensionError("input has length " + std::to_string(x.size()) + ", model expects " +
                             std::to_string(dim()));
    }
    double f = bias;
    for (Eigen::Index k = 0; k < support_vectors.rows(); ++k) {
        f += coefficients[k] * kernel(support_vectors.row(k).transpose(), x);
    }
    return f;
}

Vector SvmModel::decisions(const Matrix &x) const {
    if (x.cols() != dim()) {
        throw DimensionError("input has " + std::to_string(x.cols()) + " columns, model expects " +
                             std::to_string(dim()));
    }
    if (kernel.kind == KernelKind::linear) {
        Vector w = support_vectors.transpose() * coefficients;
        return (x * w).array() + bias;
    }
    Vector out(x.rows());
    const Vector sv_sq = support_vectors.rowwise().squaredNorm();
    constexpr Eigen::Index kChunk = 1024;
    for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
        const Eigen::Index len = std::min(kChunk, x.rows() - start);
        auto block = x.middleRows(start, len);
        Eigen::MatrixXd d = block * support_vectors.transpose();
        Vector x_sq = block.rowwise().squaredNorm();
        for (Eigen::Index r = 0; r < len; ++r) {
            double f = bias;
            for (Eigen::Index k = 0; k < d.cols(); ++k) {
                f += coefficients[k] * std::exp(-kernel.gamma * std::max(0.0, x_sq[r] + sv_sq[k] - 2.0 * d(r, k)));
            }
            out[start + r] = f;
        }
    }
    return out;
}

nlohmann::json SvmModel::to_json() const {
    nlohmann::json sv = nlohmann::json::array();
    for (Eigen::Index k = 0; k < support_vectors.rows(); ++k) {
        Vector r = support_vectors.row(k).transpose();
        sv.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return {{"kernel", kernel.kind == KernelKind::linear ? "linear" : "rbf"},
            {"gamma", kernel.gamma},
            {"c", c},
            {"bias", bias},
            {"coefficients", std::vector<double>(coefficients.begin(), coefficients.end())},
            {"alpha", std::vector<double>(alpha.begin(), alpha.end())},
            {"support_indices", support_indices},
            {"support_vectors", sv},
            {"iterations", iterations},
            {"dual_objective", dual_objective}};
}

SvmModel SvmModel::from_json(const nlohmann::json &j) {
    SvmModel m;
    std::string kind = j.at("kernel").get<std::string>();
    if (kind != "linear" && kind != "rbf") {
        throw InvalidArgument("unknown kernel '" + kind + "'");
    }
    m.kernel.kind = kind == "linear" ? KernelKind::linear : KernelKind::rbf;
    m.kernel.gamma = j.at("gamma").get<double>();
    m.c = j.at("c").get<double>();
    m.bias = j.at("bias").get<double>();
    auto coef = j.at("coefficients").get<std::vector<double>>();
    auto alpha = j.at("alpha").get<std::vector<double>>();
    m.coefficients = Eigen::Map<Vector>(coef.data(), static_cast<Eigen::Index>(coef.size()));
    m.alpha = Eigen::Map<Vector>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
    m.support_indices = j.at("support_indices").get<std::vector<Eigen::Index>>();
    const auto &sv = j.at("support_vectors");
    const Eigen::Index d = sv.empty() ? 0 : static_cast<Eigen::Index>(sv[0].size());
    m.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), d);
    for (std::size_t k = 0; k < sv.size(); ++k) {
        auto r = sv[k].get<std::vector<double>>();
        m.support_vectors.row(static_cast<Eigen::Index>(k)) = Eigen::Map<Vector>(r.data(), d).transpose();
    }
    m.iterations = j.value("iterations", std::int64_t{0});
    m.dual_objective = j.value("dual_objective", 0.0);
    return m;
}

double max_kkt_violation(const SvmModel &model, const Matrix &x, std::span<const int> y) {
    check_labels(y, x.rows());
    std::vector<double> alpha(x.rows(), 0.0);
    for (std::size_t k = 0; k < model.support_indices.size(); ++k) {
        alpha.at(model.support_indices[k]) = model.alpha[static_cast<Eigen::Index>(k)];
    }
    Vector f = model.decisions(x);
    double worst = 0.0;
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
        double m = y[t] * f[t];
        double v;
        if (alpha[t] <= 0.0) {
            v = std::max(0.0, 1.0 - m);
        } else if (alpha[t] >= model.c) {
            v = std::max(0.0, m - 1.0);
        } else {
            v = std::abs(m - 1.0);
        }
        worst = std::max(worst, v);
    }
    return worst;
}

double median_gamma(const Matrix &x, std::uint64_t seed, Eigen::Index subsample) {
    if (x.rows() < 2) {
        throw InvalidArgument("median heuristic needs at least 2 rows");
    }
    std::vector<Eigen::Index> idx(x.rows());
    std::iota(idx.begin(), idx.end(), 0);
    if (x.rows() > subsample) {
        std::mt19937_64 rng(seed);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(subsample);
        std::sort(idx.begin(), idx.end());
    }
    std::vector<double> d2;
    d2.reserve(idx.size() * (idx.size() - 1) / 2);
    for (std::size_t a = 0; a < idx.size(); ++a) {
        for (std::size_t b = a + 1; b < idx.size(); ++b) {
            d2.push_back((x.row(idx[a]) - x.row(idx[b])).squaredNorm());
        }
    }
    auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
    std::nth_element(d2.begin(), mid, d2.end());
    if (!(*mid > 0.0)) {
        throw DegenerateKernel("median pairwise distance is zero");
    }
    return 1.0 / *mid;
}

std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed) {
    if (folds < 2) {
        throw InvalidArgument("cross-validation needs at least 2 folds");
    }
    std::vector<int> fold(y.size(), -1);
    std::set<int> classes(y.begin(), y.end());
    std::mt19937_64 rng(seed);
    for (int cls : classes) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i] == cls) rows.push_back(i);
        }
        if (static_cast<int>(rows.size()) < folds) {
            throw StratificationError("class " + std::to_string(cls) + " has " + std::to_string(rows.size()) +
                                      " rows, fewer than " + std::to_string(folds) + " folds");
        }
        std::shuffle(rows.begin(), rows.end(), rng);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            fold[rows[k]] = static_cast<int>(k % folds);
        }
    }
    return fold;
}

CvResult cross_validate(const Matrix &x, std::span<const int> y, std::vector<double> cs, std::vector<double> gammas,
                        KernelKind kind, int folds, std::uint64_t seed, const SvmOptions &options) {
    check_labels(y, x.rows());
    if (cs.empty() || (kind == KernelKind::rbf && gammas.empty())) {
        throw InvalidArgument("cross-validation grids must be nonempty");
    }
    if (kind == KernelKind::linear) {
        gammas = {0.0};
    }
    std::sort(cs.begin(), cs.end());
    cs.erase(std::unique(cs.begin(), cs.end()), cs.end());
    std::sort(gammas.begin(), gammas.end());
    gammas.erase(std::unique(gammas.begin(), gammas.end()), gammas.end());
    const std::vector<int> fold = stratified_folds(y, folds, seed);

    CvResult best;
    best.cv_error = std::numeric_limits<double>::infinity();
    for (double c : cs) {
        for (double g : gammas) {
            double err_sum = 0.0;
            for (int f = 0; f < folds; ++f) {
                std::vector<Eigen::Index> tr, te;
                for (std::size_t i = 0; i < fold.size(); ++i) {
                    (fold[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
                }
                Matrix xtr = x(tr, Eigen::all);
                std::vector<int> ytr(tr.size());
                for (std::size_t k = 0; k < tr.size(); ++k) ytr[k] = y[tr[k]];
                SvmModel m = fit_svm(xtr, ytr, c, KernelSpec{kind, g}, options);
                Matrix xte = x(te, Eigen::all);
                Vector d = m.decisions(xte);
                int wrong = 0;
                for (std::size_t k = 0; k < te.size(); ++k) {
                    int pred = d[static_cast<Eigen::Index>(k)] >= 0.0 ? 1 : -1;
                    wrong += pred != y[te[k]];
                }
                err_sum += static_cast<double>(wrong) / static_cast<double>(te.size());
            }
            double err = err_sum / folds;
            best.grid.emplace_back(c, g, err);
            if (err < best.cv_error) {
                best.cv_error = err;
                best.c = c;
                best.gamma = g;
            }
        }
    }
    return best;
}

}  // namespace qtraj::svm
