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

#include "qtraj/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <numbers>
#include <random>

#include "qtraj/errors.h"

namespace qtraj::metrics {

namespace {

constexpr double kInvSqrtPi = 0.56418958354775628694807945156077;

double binomial_stderr(double p, std::int64_t n) { return n > 0 ? std::sqrt(p * (1.0 - p) / n) : 0.0; }

}  // namespace

nlohmann::json FidelityReport::to_json() const {
    return {{"fidelity", fidelity},   {"stderr_fidelity", stderr_fidelity}, {"p01", p01}, {"p10", p10},
            {"stderr_p01", stderr_p01}, {"stderr_p10", stderr_p10},       {"n0", n0},   {"n1", n1},
            {"n01", n01},             {"n10", n10}};
}

FidelityReport assignment_fidelity(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) {
        throw DimensionError("prediction and truth lengths differ");
    }
    FidelityReport r;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if ((truth[i] != 0 && truth[i] != 1) || (predicted[i] != 0 && predicted[i] != 1)) {
            throw InvalidArgument("assignment fidelity needs binary outcomes");
        }
        if (truth[i] == 0) {
            ++r.n0;
            r.n10 += predicted[i] == 1;
        } else {
            ++r.n1;
            r.n01 += predicted[i] == 0;
        }
    }
    if (r.n0 == 0 || r.n1 == 0) {
        throw UndefinedFidelity("assignment fidelity needs both prepared classes present");
    }
    r.p01 = static_cast<double>(r.n01) / static_cast<double>(r.n1);
    r.p10 = static_cast<double>(r.n10) / static_cast<double>(r.n0);
    r.fidelity = 1.0 - 0.5 * (r.p01 + r.p10);
    r.stderr_p01 = binomial_stderr(r.p01, r.n1);
    r.stderr_p10 = binomial_stderr(r.p10, r.n0);
    r.stderr_fidelity = 0.5 * std::hypot(r.stderr_p01, r.stderr_p10);
    return r;
}

double erfc(double x) {
    if (std::isnan(x)) return x;
    if (x < 2.5) {
        return 1.0 - erf(x);
    }
    // Lentz evaluation of erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
    const double tiny = 1e-300;
    double f = x, c = x, d = 0.0;
    for (int k = 1; k < 500; ++k) {
        const double a = 0.5 * k;
        d = x + a * d;
        d = d == 0.0 ? tiny : d;
        c = x + a / c;
        c = c == 0.0 ? tiny : c;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x * x) * kInvSqrtPi / f;
}

double erf(double x) {
    if (std::isnan(x)) return x;
    if (x < 0.0) return -erf(-x);
    if (x >= 2.5) return 1.0 - erfc(x);
    // erf(x) = 2/sqrt(pi) exp(-x^2) sum_n 2^n x^(2n+1) / (1*3*...*(2n+1)); all terms positive.
    double term = x, sum = x;
    const double x2 = x * x;
    for (int n = 1; n < 200; ++n) {
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return 2.0 * kInvSqrtPi * std::exp(-x2) * sum;
}

double achievable_fidelity(double r) {
    if (!(r >= 0.0)) {
        throw InvalidArgument("separation R must be non-negative");
    }
    if (std::isinf(r)) return 1.0;
    return 0.5 + 0.5 * erf(std::sqrt(r / 8.0));
}

double achievable_fidelity_slope(double r) {
    if (!(r > 0.0)) {
        return r == 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    const double u = std::sqrt(r / 8.0);
    return kInvSqrtPi * std::exp(-u * u) / (16.0 * u);
}

nlohmann::json SeparationResult::to_json() const {
    return {{"R", r}, {"R_stderr", r_stderr}, {"achievable_fidelity", achievable},
            {"achievable_fidelity_stderr", achievable_stderr}};
}

SeparationResult separation_r(double m0, double m1, double sigma, double m0_err, double m1_err, double sigma_err) {
    if (!(sigma > 0.0)) {
        throw InvalidArgument("sigma must be positive");
    }
    SeparationResult s;
    const double d = m0 - m1;
    s.r = d * d / (sigma * sigma);
    const double dr_dm = 2.0 * d / (sigma * sigma);
    const double dr_ds = -2.0 * s.r / sigma;
    s.r_stderr = std::sqrt(dr_dm * dr_dm * (m0_err * m0_err + m1_err * m1_err) + dr_ds * dr_ds * sigma_err * sigma_err);
    s.achievable = achievable_fidelity(s.r);
    s.achievable_stderr = achievable_fidelity_slope(s.r) * s.r_stderr;
    if (!std::isfinite(s.achievable_stderr)) s.achievable_stderr = 0.0;
    return s;
}

SeparationResult separation_r(const DoubleGaussianFit &fit) {
    return separation_r(fit.dominant_mean(0), fit.dominant_mean(1), fit.sigma, fit.mean_stderr[0], fit.mean_stderr[1],
                        fit.sigma_stderr);
}

nlohmann::json DoubleGaussianFit::to_json() const {
    nlohmann::json classes = nlohmann::json::array();
    for (int c = 0; c < 2; ++c) {
        classes.push_back({{"dominant_mean", components[c][0].mean},
                           {"dominant_weight", components[c][0].weight},
                           {"minor_mean", components[c][1].mean},
                           {"minor_weight", components[c][1].weight},
                           {"dominant_mean_stderr", mean_stderr[c]}});
    }
    return {{"classes", classes},         {"sigma", sigma},
            {"sigma_stderr", sigma_stderr}, {"log_likelihood", log_likelihood},
            {"chi_square", chi_square},   {"chi_square_bins", chi_square_bins}};
}

namespace {

struct EmState {
    double mean[2][2];
    double weight[2][2];
    double sigma;
};

double median_of(std::vector<double> v) {
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

double normal_cdf(double z) { return 0.5 * erfc(-z / std::sqrt(2.0)); }

// Runs EM to convergence; returns false when the fit degenerates.
bool run_em(std::span<const double> data[2], EmState &st, std::vector<double> &history, double scale) {
    const double n_total = static_cast<double>(data[0].size() + data[1].size());
    history.clear();
    double prev = -std::numeric_limits<double>::infinity();
    std::vector<double> resp;
    for (int iter = 0; iter < 5000; ++iter) {
        double ll = 0.0;
        double sq = 0.0;
        EmState next = st;
        const double inv2s2 = 1.0 / (2.0 * st.sigma * st.sigma);
        const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * st.sigma);
        for (int c = 0; c < 2; ++c) {
            double rsum[2] = {0.0, 0.0}, rx[2] = {0.0, 0.0};
            resp.resize(data[c].size());
            for (std::size_t i = 0; i < data[c].size(); ++i) {
                const double x = data[c][i];
                double p0 = st.weight[c][0] * norm * std::exp(-(x - st.mean[c][0]) * (x - st.mean[c][0]) * inv2s2);
                double p1 = st.weight[c][1] * norm * std::exp(-(x - st.mean[c][1]) * (x - st.mean[c][1]) * inv2s2);
                double tot = p0 + p1;
                if (!(tot > 0.0)) {
                    // Far outside both components: assign to the nearer one.
                    tot = 1.0;
                    bool near0 = std::abs(x - st.mean[c][0]) <= std::abs(x - st.mean[c][1]);
                    p0 = near0 ? 1.0 : 0.0;
                    p1 = 1.0 - p0;
                    ll += std::log(1e-300);
                } else {
                    ll += std::log(tot);
                }
                resp[i] = p0 / tot;
                rsum[0] += resp[i];
                rsum[1] += 1.0 - resp[i];
                rx[0] += resp[i] * x;
                rx[1] += (1.0 - resp[i]) * x;
            }
            const double nc = static_cast<double>(data[c].size());
            for (int a = 0; a < 2; ++a) {
                next.weight[c][a] = rsum[a] / nc;
                next.mean[c][a] = rsum[a] > 0.0 ? rx[a] / rsum[a] : st.mean[c][a];
            }
            for (std::size_t i = 0; i < data[c].size(); ++i) {
                const double x = data[c][i];
                sq += resp[i] * (x - next.mean[c][0]) * (x - next.mean[c][0]) +
                      (1.0 - resp[i]) * (x - next.mean[c][1]) * (x - next.mean[c][1]);
            }
        }
        history.push_back(ll);
        next.sigma = std::sqrt(sq / n_total);
        if (!std::isfinite(ll) || !(next.sigma > 1e-12 * scale)) {
            return false;
        }
        st = next;
        if (std::abs(ll - prev) <= 1e-12 * std::abs(ll)) {
            break;
        }
        prev = ll;
    }
    return std::isfinite(history.back());
}

}  // namespace

DoubleGaussianFit fit_double_gaussian(std::span<const double> s0, std::span<const double> s1, int bins, int restarts,
                                      std::uint64_t seed) {
    if (s0.size() < 100 || s1.size() < 100) {
        throw InvalidArgument("double-Gaussian fit needs at least 100 samples per class");
    }
    if (restarts < 1 || bins < 2) {
        throw InvalidArgument("restarts must be >= 1 and bins >= 2");
    }
    std::span<const double> data[2] = {s0, s1};
    for (auto d : data) {
        for (double v : d) {
            if (!std::isfinite(v)) throw DataError("non-finite sample in double-Gaussian fit");
        }
    }
    std::vector<double> v0(s0.begin(), s0.end()), v1(s1.begin(), s1.end());
    const double med[2] = {median_of(v0), median_of(v1)};
    auto robust_sd = [](std::vector<double> v, double m) {
        for (double &x : v) x = std::abs(x - m);
        return 1.4826 * median_of(std::move(v));
    };
    double sd0 = 0.5 * (robust_sd(v0, med[0]) + robust_sd(v1, med[1]));
    if (!(sd0 > 0.0)) {
        throw FitFailed("samples have zero spread");
    }
    const double scale = std::max({std::abs(med[0]), std::abs(med[1]), sd0});

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    DoubleGaussianFit best;
    best.log_likelihood = -std::numeric_limits<double>::infinity();
    bool any = false;
    EmState best_state{};
    std::vector<double> history;
    for (int r = 0; r < restarts; ++r) {
        EmState st{};
        for (int c = 0; c < 2; ++c) {
            if (r == 0) {
                // Main mode at the class median, minor mode at the other class's median.
                st.mean[c][0] = med[c];
                st.mean[c][1] = med[1 - c];
                st.weight[c][0] = 0.9;
            } else {
                std::uniform_int_distribution<std::size_t> pick(0, data[c].size() - 1);
                st.mean[c][0] = data[c][pick(rng)];
                st.mean[c][1] = data[unit(rng) < 0.5 ? c : 1 - c][pick(rng) % data[1 - c].size()];
                st.weight[c][0] = 0.5 + 0.45 * unit(rng);
            }
            st.weight[c][1] = 1.0 - st.weight[c][0];
        }
        st.sigma = r == 0 ? sd0 : sd0 * (0.5 + unit(rng));
        if (!run_em(data, st, history, scale)) {
            continue;
        }
        if (!any || history.back() > best.log_likelihood) {
            any = true;
            best.log_likelihood = history.back();
            best.log_likelihood_history = history;
            best_state = st;
        }
        best.restarts_used = r + 1;
    }
    if (!any) {
        throw FitFailed("every EM restart degenerated");
    }
    best.sigma = best_state.sigma;
    for (int c = 0; c < 2; ++c) {
        int dom = best_state.weight[c][0] >= best_state.weight[c][1] ? 0 : 1;
        best.components[c][0] = {best_state.mean[c][dom], best_state.weight[c][dom]};
        best.components[c][1] = {best_state.mean[c][1 - dom], best_state.weight[c][1 - dom]};
        best.mean_stderr[c] = best.sigma / std::sqrt(best.components[c][0].weight * data[c].size());
    }
    best.sigma_stderr = best.sigma / std::sqrt(2.0 * static_cast<double>(s0.size() + s1.size()));

    // Chi-square of binned counts against the fitted mixture (bins with expectation >= 5).
    for (int c = 0; c < 2; ++c) {
        auto [lo_it, hi_it] = std::minmax_element(data[c].begin(), data[c].end());
        const double lo = *lo_it, hi = *hi_it;
        if (!(hi > lo)) continue;
        const double width = (hi - lo) / bins;
        std::vector<double> counts(bins, 0.0);
        for (double x : data[c]) {
            int b = std::min(bins - 1, static_cast<int>((x - lo) / width));
            counts[b] += 1.0;
        }
        for (int b = 0; b < bins; ++b) {
            const double a = lo + b * width, z = a + width;
            double p = 0.0;
            for (int k = 0; k < 2; ++k) {
                const auto &comp = best.components[c][k];
                p += comp.weight * (normal_cdf((z - comp.mean) / best.sigma) - normal_cdf((a - comp.mean) / best.sigma));
            }
            const double expected = p * data[c].size();
            if (expected >= 5.0) {
                best.chi_square += (counts[b] - expected) * (counts[b] - expected) / expected;
                ++best.chi_square_bins;
            }
        }
    }
    return best;
}

int bins_for_time(const sim::TimeGrid &grid, double time) {
    const double dt = grid.dt();
    const long n = std::lround(time / dt);
    if (!(time > 0.0) || n < 1 || n > grid.n_points) {
        throw InvalidArgument("truncation time " + std::to_string(time * 1e6) + " us is outside [" +
                              std::to_string(dt * 1e6) + ", " + std::to_string(grid.total_time * 1e6) + "] us");
    }
    return static_cast<int>(n);
}

std::vector<SweepPoint> time_sweep(const sim::Dataset &dataset, const Recipe &recipe, std::span<const double> times,
                                   const features::Split *given) {
    if (times.empty()) {
        throw InvalidArgument("time sweep needs at least one truncation time");
    }
    std::vector<int> counts;
    for (double t : times) counts.push_back(bins_for_time(dataset.grid, t));
    const features::FeatureMatrix full = features::vectorize(dataset);
    const features::Split split = given ? *given : features::first_half_split(full.labels);
    const Eigen::Index m = dataset.grid.n_points;
    std::vector<SweepPoint> out;
    for (int n : counts) {
        features::FeatureMatrix cut;
        cut.labels = full.labels;
        cut.x.resize(full.rows(), 2 * n);
        cut.x.leftCols(n) = full.x.leftCols(n);
        cut.x.rightCols(n) = full.x.middleCols(m, n);
        features::FeatureMatrix train = features::select_rows(cut, split.train);
        features::FeatureMatrix test = features::select_rows(cut, split.test);
        std::vector<int> pred = recipe(train, test.x);
        SweepPoint p;
        p.n_points = n;
        p.time = n * dataset.grid.dt();
        p.report = assignment_fidelity(pred, test.labels);
        out.push_back(p);
    }
    return out;
}

}  // namespace qtraj::metrics
