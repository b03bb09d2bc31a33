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

// Brute-force reference implementations used only by the tests. Nothing here
// calls into the library, so agreement with it is a real cross-check.
#ifndef QTRAJ_TESTS_ORACLES_H
#define QTRAJ_TESTS_ORACLES_H

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using Dense = std::vector<std::vector<double>>;

struct EigenPairs {
    std::vector<double> values;   // descending
    Dense vectors;                // vectors[k] is the k-th eigenvector
};

/// Cyclic Jacobi rotations on a symmetric matrix until the off-diagonal mass vanishes.
inline EigenPairs jacobi_eigen(Dense a, double tol = 1e-15, int max_sweeps = 100) {
    const std::size_t n = a.size();
    Dense v(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0, diag = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            diag += a[i][i] * a[i][i];
            for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
        }
        if (off <= tol * tol * diag) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a[p][q] == 0.0) continue;
                double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
    EigenPairs out;
    for (std::size_t k : order) {
        out.values.push_back(a[k][k]);
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = v[i][k];
        out.vectors.push_back(std::move(col));
    }
    return out;
}

/// Sample covariance with the n - 1 denominator.
inline Dense covariance(const Dense &rows) {
    const std::size_t n = rows.size(), d = rows.front().size();
    std::vector<double> mean(d, 0.0);
    for (const auto &r : rows)
        for (std::size_t j = 0; j < d; ++j) mean[j] += r[j] / static_cast<double>(n);
    Dense cov(d, std::vector<double>(d, 0.0));
    for (const auto &r : rows)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
    for (auto &row : cov)
        for (double &x : row) x /= static_cast<double>(n - 1);
    return cov;
}

/// Maximizes sum(a) - a^T Q a / 2 over 0 <= a <= c, y^T a = 0 by accelerated
/// projected gradient ascent (FISTA with adaptive restart). The projection
/// bisects on the multiplier of the equality.
inline double svm_dual(const Dense &q, const std::vector<int> &y, double c, std::vector<double> *alpha_out = nullptr,
                       int max_iter = 2000000, double tol = 1e-14) {
    const std::size_t n = y.size();
    // Step 1/L with L bounded by the Frobenius norm.
    double lip = 0.0;
    for (const auto &row : q)
        for (double x : row) lip += x * x;
    lip = std::sqrt(lip);
    const double step = 1.0 / lip;
    auto project = [&](const std::vector<double> &v) {
        auto at = [&](double mu) {
            std::vector<double> a(n);
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                a[i] = std::clamp(v[i] - mu * y[i], 0.0, c);
                s += y[i] * a[i];
            }
            return std::make_pair(a, s);
        };
        double lo = -1e6, hi = 1e6;  // s(mu) is non-increasing
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            if (at(mid).second > 0.0)
                lo = mid;
            else
                hi = mid;
        }
        return at(0.5 * (lo + hi)).first;
    };
    auto objective = [&](const std::vector<double> &a) {
        double lin = 0.0, quad = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            lin += a[i];
            for (std::size_t j = 0; j < n; ++j) quad += a[i] * q[i][j] * a[j];
        }
        return lin - 0.5 * quad;
    };
    std::vector<double> a(n, 0.0), z = a;
    double t = 1.0, last = objective(a);
    for (int it = 0; it < max_iter; ++it) {
        std::vector<double> g(n, 1.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) g[i] -= q[i][j] * z[j];
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = z[i] + step * g[i];
        auto next = project(v);
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(next[i] - a[i]));
        const double value = objective(next);
        if (value < last && t > 1.0) {
            // Momentum overshot; restart from the last iterate.
            t = 1.0;
            z = a;
            continue;
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        for (std::size_t i = 0; i < n; ++i) z[i] = next[i] + (t - 1.0) / t_next * (next[i] - a[i]);
        t = t_next;
        a = std::move(next);
        last = value;
        if (change < tol) break;
    }
    if (alpha_out) *alpha_out = a;
    return objective(a);
}

struct Partition {
    std::vector<int> labels;
    double objective = std::numeric_limits<double>::infinity();
};

/// Minimum within-cluster sum of squares over every assignment with k non-empty groups.
inline Partition best_partition(const Dense &pts, int k) {
    const std::size_t n = pts.size(), d = pts.front().size();
    std::vector<int> lab(n, 0);
    Partition best;
    while (true) {
        std::vector<int> count(k, 0);
        for (int l : lab) ++count[l];
        if (std::all_of(count.begin(), count.end(), [](int c) { return c > 0; })) {
            Dense mean(k, std::vector<double>(d, 0.0));
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) mean[lab[i]][j] += pts[i][j] / count[lab[i]];
            double obj = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) obj += std::pow(pts[i][j] - mean[lab[i]][j], 2);
            if (obj < best.objective) best = {lab, obj};
        }
        std::size_t pos = 0;
        while (pos < n && lab[pos] == k - 1) lab[pos++] = 0;
        if (pos == n) break;
        ++lab[pos];
    }
    return best;
}

/// log N(x; mu, cov) through an explicit Cholesky factor.
inline double gaussian_log_density(const std::vector<double> &x, const std::vector<double> &mu, const Dense &cov) {
    const std::size_t d = x.size();
    Dense l(d, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = cov[i][j];
            for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
            l[i][j] = i == j ? std::sqrt(s) : s / l[j][j];
        }
    }
    std::vector<double> z(d);
    double logdet = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double s = x[i] - mu[i];
        for (std::size_t k = 0; k < i; ++k) s -= l[i][k] * z[k];
        z[i] = s / l[i][i];
        quad += z[i] * z[i];
        logdet += 2.0 * std::log(l[i][i]);
    }
    return -0.5 * (quad + logdet + static_cast<double>(d) * std::log(2.0 * std::numbers::pi));
}

}  // namespace oracle

#endif
