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
#include <cmath>

#include "qtraj/errors.h"
#include "qtraj/sim.h"

using namespace qtraj;
using namespace qtraj::sim;
using Catch::Approx;

namespace {

CavityParams toy_cavity() {
    CavityParams p;
    p.kappa = kTwoPi * 1.0e6;
    p.chi = kTwoPi * 0.5e6;
    p.detuning = kTwoPi * 0.1e6;
    p.drive = {{0.0, cplx(kTwoPi * 1.0e6, 0.0)}};
    return p;
}

// alpha(t) for a constant drive switched on at t = 0 from the vacuum.
cplx closed_form(const CavityParams &p, int state, double t, cplx start, double t0) {
    cplx lambda(-p.kappa / 2.0, -(p.detuning + p.chi_for(state)));
    cplx ss = steady_state(p, state, p.drive.front().amplitude);
    return ss + (start - ss) * std::exp(lambda * (t - t0));
}

}  // namespace

TEST_CASE("zero drive keeps the cavity empty") {
    CavityParams p = toy_cavity();
    p.drive = {{0.0, cplx(0.0, 0.0)}};
    auto paths = evolve_pointer_states(p, TimeGrid{2e-6, 50});
    for (int s : {0, 1}) {
        for (cplx a : paths.fine(s)) CHECK(std::abs(a) == 0.0);
    }
}

TEST_CASE("pointer paths follow the closed-form linear response") {
    CavityParams p = toy_cavity();
    TimeGrid grid{20.0 / p.kappa, 100};
    auto paths = evolve_pointer_states(p, grid, 10);
    for (int s : {0, 1}) {
        for (int j = 0; j < grid.n_points; ++j) {
            cplx exact = closed_form(p, s, (j + 1) * grid.dt(), 0.0, 0.0);
            CHECK(std::abs(paths.at_bin_end(s, j) - exact) <= 1e-6 * std::abs(exact));
        }
    }
}

TEST_CASE("long constant drive settles on the fixed point") {
    CavityParams p = toy_cavity();
    auto paths = evolve_pointer_states(p, TimeGrid{40.0 / p.kappa, 100}, 10);
    for (int s : {0, 1}) {
        cplx ss = steady_state(p, s, p.drive.front().amplitude);
        cplx expected = cplx(0.0, -1.0) * p.drive.front().amplitude /
                        (cplx(0.0, p.detuning + p.chi_for(s)) + p.kappa / 2.0);
        CHECK(std::abs(ss - expected) < 1e-12 * std::abs(expected));
        CHECK(std::abs(paths.final_value(s) - ss) <= 1e-6 * std::abs(ss));
    }
}

TEST_CASE("substep refinement converges") {
    auto spec = SimulationSpec::reference_device();
    auto coarse = evolve_pointer_states(spec.cavity, spec.grid, 10);
    auto fine = evolve_pointer_states(spec.cavity, spec.grid, 40);
    for (int s : {0, 1}) {
        const double scale = std::abs(fine.final_value(s));
        for (int j = 0; j < spec.grid.n_points; ++j) {
            CHECK(std::abs(coarse.at_bin_end(s, j) - fine.at_bin_end(s, j)) < 1e-9 * scale);
        }
        // Bin averages carry the O(h^2) trapezoid error on top.
        auto a = coarse.bin_means(s), b = fine.bin_means(s);
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(std::abs(a[j] - b[j]) < 5e-5 * scale);
    }
}

TEST_CASE("jump mid-step matches the piecewise closed form") {
    CavityParams p = toy_cavity();
    TimeGrid grid{3e-6, 60};
    auto paths = evolve_pointer_states(p, grid, 10);
    const double tau = 1.2345e-6;  // falls inside a fine step
    auto jumped = integrate_with_jump(paths, 1, 0, tau);
    cplx at_jump = closed_form(p, 1, tau, 0.0, 0.0);
    cplx end = closed_form(p, 0, grid.total_time, at_jump, tau);
    CHECK(std::abs(jumped.back() - end) < 1e-8 * std::abs(end));

    const double h = paths.fine_step();
    const auto k = static_cast<std::size_t>(tau / h);
    for (std::size_t i = 0; i <= k; ++i) CHECK(jumped[i] == paths.fine(1)[i]);

    SECTION("a jump past the window leaves the path alone") {
        CHECK(integrate_with_jump(paths, 1, 0, 2 * grid.total_time) == paths.fine(1));
    }
    SECTION("a jump at zero follows the other state from the start") {
        auto from_zero = integrate_with_jump(paths, 1, 0, 0.0);
        CHECK(std::abs(from_zero.back() - paths.fine(0).back()) < 1e-12);
    }
}

TEST_CASE("boxcar bins use trapezoid weights") {
    std::vector<cplx> fine{1.0, 2.0, 3.0, 4.0, 5.0};
    auto bins = boxcar_bins(fine, 2, 2);
    REQUIRE(bins.size() == 2);
    CHECK(bins[0].real() == Approx(2.0));
    CHECK(bins[1].real() == Approx(4.0));
    CHECK_THROWS_AS(boxcar_bins(fine, 3, 2), DimensionError);
}

TEST_CASE("reference device reaches the calibrated steady states") {
    auto spec = SimulationSpec::reference_device();
    CHECK(spec.grid.n_points == 163);
    CHECK(spec.grid.total_time == Approx(2.6e-6));
    auto paths = evolve_pointer_states(spec.cavity, spec.grid, spec.substeps);
    TrajectorySampler sampler(paths, spec.rates, spec.amplifier, spec.readout);
    cplx end0 = sampler.mean_output(0).back(), end1 = sampler.mean_output(1).back();
    CHECK(std::abs(end0 - cplx(-0.07, -0.02)) < 2e-3);
    CHECK(std::abs(end1 - cplx(-0.01, -0.07)) < 2e-3);
}

TEST_CASE("white noise has the requested per-quadrature variance") {
    auto spec = SimulationSpec::ideal_noise();
    auto paths = evolve_pointer_states(spec.cavity, spec.grid, spec.substeps);
    TrajectorySampler sampler(paths, spec.rates, spec.amplifier, spec.readout);
    const double eta = spec.amplifier.efficiency();
    CHECK(sampler.white_noise_variance() ==
          Approx(1.0 / (4.0 * eta * spec.cavity.kappa * spec.grid.dt())).epsilon(1e-12));

    const int shots = 2000;
    auto mean = sampler.mean_output(1);
    double sum = 0.0, sum_sq = 0.0;
    std::int64_t count = 0;
    for (int i = 0; i < shots; ++i) {
        auto t = sampler.sample(1, i, 7);
        REQUIRE(t.jumps.empty());
        for (std::size_t j = 0; j < mean.size(); ++j) {
            cplx r = t.samples[j] - mean[j];
            sum += r.real() + r.imag();
            sum_sq += std::norm(r);
            count += 2;
        }
    }
    const double var = sum_sq / count;
    CHECK(var == Approx(sampler.noise_variance()).epsilon(0.01));
    CHECK(std::abs(sum / count) < 5.0 * std::sqrt(var / count));
}

TEST_CASE("excited shots decay at the T1 rate") {
    auto spec = SimulationSpec::reference_device();
    spec.rates.prep_error_0 = spec.rates.prep_error_1 = 0.0;
    auto paths = evolve_pointer_states(spec.cavity, spec.grid, spec.substeps);
    TrajectorySampler sampler(paths, spec.rates, spec.amplifier, spec.readout);
    const int shots = 25600;
    int jumped = 0;
    for (int i = 0; i < shots; ++i) {
        auto t = sampler.sample(1, i, 11);
        REQUIRE(t.jumps.size() <= 1);
        if (!t.jumps.empty()) {
            CHECK(t.jumps[0].from_state == 1);
            CHECK(t.jumps[0].time < spec.grid.total_time);
            ++jumped;
        }
    }
    const double expected = 1.0 - std::exp(-2.6 / 29.0);
    CHECK(std::abs(static_cast<double>(jumped) / shots - expected) < 0.005);
}

TEST_CASE("datasets are labelled in two halves and reproducible") {
    auto spec = SimulationSpec::reference_device();
    spec.shots = 4;
    auto ds = generate_dataset(spec, 3);
    CHECK(ds.labels == std::vector<int>{0, 0, 1, 1});

    spec.shots = 200;
    auto a = generate_dataset(spec, 5), b = generate_dataset(spec, 5), c = generate_dataset(spec, 6);
    bool all_same = true, any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        all_same = all_same && a.trajectories[i].samples == b.trajectories[i].samples;
        any_diff = any_diff || a.trajectories[i].samples != c.trajectories[i].samples;
        CHECK(a.trajectories[i].shot_id == static_cast<std::int64_t>(i));
    }
    CHECK(all_same);
    CHECK(any_diff);

    spec.shots = 3;
    CHECK_THROWS_AS(generate_dataset(spec, 1), InvalidArgument);
}

TEST_CASE("truncation keeps leading bins and drops later jumps") {
    auto spec = SimulationSpec::reference_device();
    spec.shots = 400;
    spec.rates.t1_time = 2e-6;
    auto ds = generate_dataset(spec, 9);
    auto cut = truncate(ds, 40);
    CHECK(cut.grid.n_points == 40);
    CHECK(cut.grid.dt() == Approx(ds.grid.dt()));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        REQUIRE(cut.trajectories[i].samples.size() == 40);
        CHECK(std::equal(cut.trajectories[i].samples.begin(), cut.trajectories[i].samples.end(),
                         ds.trajectories[i].samples.begin()));
        for (const auto &e : cut.trajectories[i].jumps) CHECK(e.time < cut.grid.total_time);
    }
    CHECK(truncate(ds, ds.grid.n_points).trajectories[5].samples == ds.trajectories[5].samples);
    CHECK_THROWS_AS(truncate(ds, 0), InvalidArgument);
    CHECK_THROWS_AS(truncate(ds, 164), InvalidArgument);
}

TEST_CASE("simulation spec survives a JSON round trip") {
    auto spec = SimulationSpec::reference_device();
    auto back = simulation_spec_from_json(to_json(spec));
    // Unit conversions may cost an ulp.
    auto flat0 = to_json(spec).flatten(), flat1 = to_json(back).flatten();
    REQUIRE(flat0.size() == flat1.size());
    for (auto it = flat0.begin(); it != flat0.end(); ++it) {
        INFO(it.key());
        if (it->is_number()) {
            CHECK(flat1.at(it.key()).get<double>() == Approx(it->get<double>()).epsilon(1e-12));
        } else {
            CHECK(flat1.at(it.key()) == *it);
        }
    }
    auto ds0 = generate_dataset([&] { auto s = spec; s.shots = 20; return s; }(), 2);
    auto ds1 = generate_dataset([&] { auto s = back; s.shots = 20; return s; }(), 2);
    for (std::size_t j = 0; j < ds0.trajectories[13].samples.size(); ++j) {
        CHECK(std::abs(ds0.trajectories[13].samples[j] - ds1.trajectories[13].samples[j]) < 1e-12);
    }
}

TEST_CASE("invalid parameters are rejected") {
    auto spec = SimulationSpec::reference_device();
    SECTION("negative decay time") {
        spec.rates.t1_time = -1.0;
        CHECK_THROWS_AS(spec.validate(), InvalidArgument);
    }
    SECTION("probability outside [0, 1]") {
        spec.rates.prep_error_1 = 1.5;
        CHECK_THROWS_AS(spec.validate(), InvalidArgument);
    }
    SECTION("empty grid") {
        spec.grid.n_points = 0;
        CHECK_THROWS_AS(spec.validate(), InvalidArgument);
    }
    SECTION("negative kappa") {
        spec.cavity.kappa = -1.0;
        CHECK_THROWS_AS(spec.validate(), InvalidArgument);
    }
}
