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

#ifndef QTRAJ_CLUSTER_H
#define QTRAJ_CLUSTER_H

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "qtraj/features.h"
#include "qtraj/sim.h"

namespace qtraj::cluster {

using features::Matrix;
using features::Vector;

/// `seeded_random` is k-means++ seeding from the given seed. `stabilized`
/// averages matched cluster means over several seeded runs and restarts from them.
enum class Init { stabilized, seeded_random };

struct KmeansOptions {
    int max_iter = 300;
    int realizations = 10;  // used by Init::stabilized
};

struct Clustering {
    int k = 0;
    std::vector<int> assignments;
    Matrix means;  // k x M
    double objective = 0.0;
    std::vector<double> objective_history;  // after each Lloyd iteration
    int iterations = 0;
    int source_class = -1;

    std::vector<Eigen::Index> sizes() const;
    nlohmann::json to_json() const;
};

/// Sum of squared distances of each row to its assigned mean.
double kmeans_objective(const Matrix &data, std::span<const int> assignments, const Matrix &means);

Clustering kmeans(const Matrix &data, int k, Init init, std::uint64_t seed, const KmeansOptions &options = {});

/// Lloyd iterations from explicit starting means. Empty clusters are reseeded
/// at the row farthest from its assigned mean.
Clustering kmeans_from(const Matrix &data, Matrix initial_means, int max_iter = 300);

/// k-means++ seeding.
Matrix seeded_init(const Matrix &data, int k, std::uint64_t seed);

/// Runs `realizations` seeded clusterings, matches each run's means greedily to
/// the first run's, and returns the per-slot averages.
Matrix stabilized_init(const Matrix &data, int k, int realizations, std::uint64_t seed, int max_iter = 300);

struct SubclassInfo {
    Eigen::Index size = 0;
    std::vector<sim::cplx> mean_trajectory;
    sim::cplx late_endpoint;  // mean over the late window
    double distance_to_own = 0.0;
    double distance_to_other = 0.0;
    bool t1_candidate = false;
    bool heating_candidate = false;
};

struct SubclassReport {
    int source_class = -1;
    std::vector<SubclassInfo> clusters;

    std::vector<int> flagged() const;
    nlohmann::json to_json() const;
};

/// Flags clusters whose late-window mean trajectory is closer to the other
/// class's reference path than to the own class's. `ref0`/`ref1` are the mean
/// complex paths of the two preparation classes; `window` is the trailing
/// fraction of bins compared.
SubclassReport identify_special_clusters(const Clustering &clustering, const std::vector<sim::cplx> &ref0,
                                         const std::vector<sim::cplx> &ref1, double window = 0.2);

/// Multi-class labels: 0 for ground, 1 for excited outside the flagged clusters, 2 for flagged.
struct LiftedLabels {
    std::vector<int> labels;
    std::vector<int> collapse_map{0, 1, 1};
};

/// `clustered_rows[k]` is the row of `labels` that received `clustering.assignments[k]`.
LiftedLabels lift_to_multiclass(std::span<const int> labels, std::span<const Eigen::Index> clustered_rows,
                                const Clustering &clustering, std::span<const int> t1_clusters);

/// Replaces each flagged excited shot with a uniformly drawn non-flagged excited shot.
sim::Dataset replace_t1_events(const sim::Dataset &dataset, std::span<const Eigen::Index> flagged, std::uint64_t seed);
features::FeatureMatrix replace_t1_events(const features::FeatureMatrix &fm, std::span<const Eigen::Index> flagged,
                                          std::uint64_t seed);

}  // namespace qtraj::cluster

#endif
