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

#ifndef QTRAJ_METRICS_H
#define QTRAJ_METRICS_H

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"
#include "qtraj/features.h"
#include "qtraj/sim.h"

namespace qtraj::metrics {

struct FidelityReport {
    double fidelity = 0.0;
    double p01 = 0.0;  // P(outcome 0 | prepared 1)
    double p10 = 0.0;  // P(outcome 1 | prepared 0)
    std::int64_t n0 = 0, n1 = 0, n01 = 0, n10 = 0;
    double stderr_p01 = 0.0, stderr_p10 = 0.0, stderr_fidelity = 0.0;

    nlohmann::json to_json() const;
};

/// F = 1 - (P(0|1) + P(1|0)) / 2 with binomial standard errors.
FidelityReport assignment_fidelity(std::span<const int> predicted, std::span<const int> truth);

/// Error function accurate to ~1e-15 absolute: a positive-term series below 2.5
/// and a continued fraction for erfc above.
double erf(double x);
double erfc(double x);

/// 1/2 + erf(sqrt(R / 8)) / 2.
double achievable_fidelity(double r);
/// dF/dR, for propagating uncertainty in R.
double achievable_fidelity_slope(double r);

struct GaussianComponent {
    double mean = 0.0;
    double weight = 0.0;
};

struct DoubleGaussianFit {
    GaussianComponent components[2][2];  // [class][component], component 0 dominant
    double sigma = 0.0;
    double mean_stderr[2] = {0.0, 0.0};
    double sigma_stderr = 0.0;
    double log_likelihood = 0.0;
    std::vector<double> log_likelihood_history;  // best restart
    double chi_square = 0.0;
    int chi_square_bins = 0;
    int restarts_used = 0;

    double dominant_mean(int c) const { return components[c][0].mean; }
    nlohmann::json to_json() const;
};

/// Two-component Gaussian mixture per class with a single sigma shared by all
/// four components, fitted by EM with `restarts` starts.
DoubleGaussianFit fit_double_gaussian(std::span<const double> s0, std::span<const double> s1, int bins = 100,
                                      int restarts = 10, std::uint64_t seed = 0);

struct SeparationResult {
    double r = 0.0;
    double r_stderr = 0.0;
    double achievable = 0.5;
    double achievable_stderr = 0.0;

    nlohmann::json to_json() const;
};

/// R = (m0 - m1)^2 / sigma^2 with first-order error propagation.
SeparationResult separation_r(double m0, double m1, double sigma, double m0_err = 0.0, double m1_err = 0.0,
                              double sigma_err = 0.0);
SeparationResult separation_r(const DoubleGaussianFit &fit);

/// Trains on `train` and predicts binary outcomes for `test` rows.
using Recipe = std::function<std::vector<int>(const features::FeatureMatrix &train, const features::Matrix &test)>;

struct SweepPoint {
    double time = 0.0;  // seconds, after rounding to a bin boundary
    int n_points = 0;
    FidelityReport report;
};

/// For each truncation time, cut every trajectory to the nearest bin boundary,
/// retrain `recipe` on the first-half split and score the second half.
/// `split` defaults to the positional first-half split.
std::vector<SweepPoint> time_sweep(const sim::Dataset &dataset, const Recipe &recipe, std::span<const double> times,
                                   const features::Split *split = nullptr);
int bins_for_time(const sim::TimeGrid &grid, double time);

}  // namespace qtraj::metrics

#endif
