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

#include "qtraj/cluster.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "qtraj/errors.h"

namespace qtraj::cluster {

std::vector<Eigen::Index> Clustering::sizes() const {
    std::vector<Eigen::Index> out(k, 0);
    for (int a : assignments) {
        ++out[a];
    }
    return out;
}

nlohmann::json Clustering::to_json() const {
    nlohmann::json means_json = nlohmann::json::array();
    for (Eigen::Index c = 0; c < means.rows(); ++c) {
        Vector r = means.row(c).transpose();
        means_json.push_back(std::vector<double>(r.begin(), r.end()));
    }
    auto s = sizes();
    return {{"k", k},
            {"source_class", source_class},
            {"objective", objective},
            {"iterations", iterations},
            {"sizes", s},
            {"assignments", assignments},
            {"means", means_json}};
}

double kmeans_objective(const Matrix &data, std::span<const int> assignments, const Matrix &means) {
    if (static_cast<Eigen::Index>(assignments.size()) != data.rows()) {
        throw DimensionError("assignment count does not match row count");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        total += (data.row(i) - means.row(assignments[i])).squaredNorm();
    }
    return total;
}

namespace {

void check_input(const Matrix &data, int k) {
    if (k < 1) {
        throw InvalidArgument("k must be >= 1");
    }
    if (data.rows() < k) {
        throw InvalidArgument("k-means needs at least k = " + std::to_string(k) + " rows, got " +
                              std::to_string(data.rows()));
    }
}

int nearest(const Matrix &means, const Eigen::Ref<const Eigen::RowVectorXd> &x, double *dist) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < means.rows(); ++c) {
        double d = (x - means.row(c)).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    if (dist) *dist = best_d;
    return best;
}

}  // namespace

Matrix seeded_init(const Matrix &data, int k, std::uint64_t seed) {
    check_input(data, k);
    std::mt19937_64 rng(seed);
    const Eigen::Index n = data.rows();
    Matrix means(k, data.cols());
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    means.row(0) = data.row(pick(rng));
    std::vector<double> d2(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d2[i] = (data.row(i) - means.row(0)).squaredNorm();
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : d2) total += v;
        Eigen::Index chosen = n - 1;
        if (total > 0.0) {
            double target = unit(rng) * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > target) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        means.row(c) = data.row(chosen);
        for (Eigen::Index i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], (data.row(i) - means.row(c)).squaredNorm());
        }
    }
    return means;
}

Clustering kmeans_from(const Matrix &data, Matrix initial_means, int max_iter) {
    const int k = static_cast<int>(initial_means.rows());
    check_input(data, k);
    if (initial_means.cols() != data.cols()) {
        throw DimensionError("initial means have the wrong dimension");
    }
    const Eigen::Index n = data.rows();
    Clustering out;
    out.k = k;
    out.means = std::move(initial_means);
    out.assignments.assign(n, -1);
    std::vector<double> dist(n);
    for (int iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int a = nearest(out.means, data.row(i), &dist[i]);
            if (a != out.assignments[i]) {
                out.assignments[i] = a;
                changed = true;
            }
        }
        // Update step; an empty cluster takes the row farthest from its mean.
        std::vector<Eigen::Index> counts(k, 0);
        Matrix sums = Matrix::Zero(k, data.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(out.assignments[i]) += data.row(i);
            ++counts[out.assignments[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                continue;
            }
            Eigen::Index far = -1;
            double far_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (counts[out.assignments[i]] > 1 && dist[i] > far_d) {
                    far_d = dist[i];
                    far = i;
                }
            }
            int old = out.assignments[far];
            sums.row(old) -= data.row(far);
            --counts[old];
            out.assignments[far] = c;
            sums.row(c) = data.row(far);
            counts[c] = 1;
            dist[far] = 0.0;
            changed = true;
        }
        for (int c = 0; c < k; ++c) {
            out.means.row(c) = sums.row(c) / static_cast<double>(counts[c]);
        }
        out.iterations = iter + 1;
        out.objective_history.push_back(kmeans_objective(data, out.assignments, out.means));
        if (!changed) {
            break;
        }
    }
    out.objective = kmeans_objective(data, out.assignments, out.means);
    return out;
}

Matrix stabilized_init(const Matrix &data, int k, int realizations, std::uint64_t seed, int max_iter) {
    if (realizations < 1) {
        throw InvalidArgument("stabilized initialization needs at least one realization");
    }
    check_input(data, k);
    Matrix reference;
    Matrix total;
    for (int r = 0; r < realizations; ++r) {
        Clustering run = kmeans_from(data, seeded_init(data, k, seed + static_cast<std::uint64_t>(r)), max_iter);
        if (r == 0) {
            reference = run.means;
            total = run.means;
            continue;
        }
        // Greedy matching: repeatedly take the closest unmatched (reference, run) pair.
        std::vector<bool> ref_used(k, false), run_used(k, false);
        for (int m = 0; m < k; ++m) {
            double best = std::numeric_limits<double>::infinity();
            int bi = -1, bj = -1;
            for (int a = 0; a < k; ++a) {
                if (ref_used[a]) continue;
                for (int b = 0; b < k; ++b) {
                    if (run_used[b]) continue;
                    double d = (reference.row(a) - run.means.row(b)).squaredNorm();
                    if (d < best) {
                        best = d;
                        bi = a;
                        bj = b;
                    }
                }
            }
            ref_used[bi] = true;
            run_used[bj] = true;
            total.row(bi) += run.means.row(bj);
        }
    }
    return total / static_cast<double>(realizations);
}

Clustering kmeans(const Matrix &data, int k, Init init, std::uint64_t seed, const KmeansOptions &options) {
    check_input(data, k);
    Matrix start = init == Init::stabilized
                       ? stabilized_init(data, k, options.realizations, seed, options.max_iter)
                       : seeded_init(data, k, seed);
    return kmeans_from(data, std::move(start), options.max_iter);
}

std::vector<int> SubclassReport::flagged() const {
    std::vector<int> out;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        if (clusters[c].t1_candidate || clusters[c].heating_candidate) {
            out.push_back(static_cast<int>(c));
        }
    }
    return out;
}

nlohmann::json SubclassReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto &c : clusters) {
        arr.push_back({{"size", c.size},
                       {"late_endpoint", {c.late_endpoint.real(), c.late_endpoint.imag()}},
                       {"late_distance_to_own_class", c.distance_to_own},
                       {"late_distance_to_other_class", c.distance_to_other},
                       {"t1_candidate", c.t1_candidate},
                       {"heating_candidate", c.heating_candidate}});
    }
    return {{"source_class", source_class}, {"clusters", arr}};
}

SubclassReport identify_special_clusters(const Clustering &clustering, const std::vector<sim::cplx> &ref0,
                                         const std::vector<sim::cplx> &ref1, double window) {
    if (clustering.source_class != 0 && clustering.source_class != 1) {
        throw InvalidArgument("clustering must record its source class (0 or 1)");
    }
    if (!(window > 0.0 && window <= 1.0)) {
        throw InvalidArgument("late window fraction must lie in (0, 1]");
    }
    const Eigen::Index m = clustering.means.cols() / 2;
    if (static_cast<Eigen::Index>(ref0.size()) != m || static_cast<Eigen::Index>(ref1.size()) != m) {
        throw DimensionError("reference paths do not match the clustered trajectory length");
    }
    const Eigen::Index start = m - std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(window * m)));
    const auto &own = clustering.source_class == 0 ? ref0 : ref1;
    const auto &other = clustering.source_class == 0 ? ref1 : ref0;
    SubclassReport report;
    report.source_class = clustering.source_class;
    auto sizes = clustering.sizes();
    for (int c = 0; c < clustering.k; ++c) {
        SubclassInfo info;
        info.size = sizes[c];
        info.mean_trajectory = features::unvectorize(clustering.means.row(c).transpose());
        sim::cplx late{};
        for (Eigen::Index j = start; j < m; ++j) {
            late += info.mean_trajectory[j];
            info.distance_to_own += std::norm(info.mean_trajectory[j] - own[j]);
            info.distance_to_other += std::norm(info.mean_trajectory[j] - other[j]);
        }
        info.late_endpoint = late / static_cast<double>(m - start);
        info.distance_to_own = std::sqrt(info.distance_to_own);
        info.distance_to_other = std::sqrt(info.distance_to_other);
        bool flip = info.distance_to_other < info.distance_to_own;
        info.t1_candidate = flip && clustering.source_class == 1;
        info.heating_candidate = flip && clustering.source_class == 0;
        report.clusters.push_back(std::move(info));
    }
    return report;
}

LiftedLabels lift_to_multiclass(std::span<const int> labels, std::span<const Eigen::Index> clustered_rows,
                                const Clustering &clustering, std::span<const int> t1_clusters) {
    if (clustered_rows.size() != clustering.assignments.size()) {
        throw DimensionError("clustered row list does not match the clustering");
    }
    std::vector<bool> is_t1(clustering.k, false);
    for (int c : t1_clusters) {
        if (c < 0 || c >= clustering.k) {
            throw InvalidArgument("cluster id " + std::to_string(c) + " out of range for k = " +
                                  std::to_string(clustering.k));
        }
        is_t1[c] = true;
    }
    LiftedLabels out;
    out.labels.assign(labels.begin(), labels.end());
    for (std::size_t k = 0; k < clustered_rows.size(); ++k) {
        Eigen::Index row = clustered_rows[k];
        if (labels[row] != 1) {
            throw InvalidArgument("lifting expects a clustering of excited-class rows");
        }
        if (is_t1[clustering.assignments[k]]) {
            out.labels[row] = 2;
        }
    }
    return out;
}

namespace {

std::vector<std::pair<Eigen::Index, Eigen::Index>> draw_donors(std::span<const int> labels,
                                                               std::span<const Eigen::Index> flagged,
                                                               std::uint64_t seed) {
    std::set<Eigen::Index> bad(flagged.begin(), flagged.end());
    for (Eigen::Index r : bad) {
        if (r < 0 || r >= static_cast<Eigen::Index>(labels.size()) || labels[r] != 1) {
            throw InvalidArgument("flagged row " + std::to_string(r) + " is not an excited-class shot");
        }
    }
    std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
    if (bad.empty()) {
        return out;
    }
    std::vector<Eigen::Index> pool;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1 && !bad.count(static_cast<Eigen::Index>(i))) {
            pool.push_back(static_cast<Eigen::Index>(i));
        }
    }
    if (pool.empty()) {
        throw EmptyPool("no unflagged excited shots are available for replacement");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (Eigen::Index r : bad) {
        out.emplace_back(r, pool[pick(rng)]);
    }
    return out;
}

}  // namespace

sim::Dataset replace_t1_events(const sim::Dataset &dataset, std::span<const Eigen::Index> flagged,
                               std::uint64_t seed) {
    sim::Dataset out = dataset;
    for (auto [row, donor] : draw_donors(dataset.labels, flagged, seed)) {
        auto &t = out.trajectories[row];
        const auto &d = dataset.trajectories[donor];
        t.samples = d.samples;
        t.initial_state = d.initial_state;
        t.jumps = d.jumps;
    }
    return out;
}

features::FeatureMatrix replace_t1_events(const features::FeatureMatrix &fm, std::span<const Eigen::Index> flagged,
                                          std::uint64_t seed) {
    features::FeatureMatrix out = fm;
    for (auto [row, donor] : draw_donors(fm.labels, flagged, seed)) {
        out.x.row(row) = fm.x.row(donor);
    }
    return out;
}

}  // namespace qtraj::cluster
