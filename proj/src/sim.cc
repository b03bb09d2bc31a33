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

#include "qtraj/sim.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "qtraj/errors.h"
#include "qtraj/rng.h"

namespace qtraj::sim {

namespace {

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

cplx rhs(const CavityParams &p, double chi_state, double t, cplx alpha) {
    const cplx i(0.0, 1.0);
    return -i * p.drive_at(t) - i * (p.detuning + chi_state) * alpha - 0.5 * p.kappa * alpha;
}

cplx rk4_step(const CavityParams &p, double chi_state, double t, cplx a, double h) {
    cplx k1 = rhs(p, chi_state, t, a);
    cplx k2 = rhs(p, chi_state, t + 0.5 * h, a + 0.5 * h * k1);
    cplx k3 = rhs(p, chi_state, t + 0.5 * h, a + 0.5 * h * k2);
    cplx k4 = rhs(p, chi_state, t + h, a + h * k3);
    return a + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Integrates from fine index `start` (value already in path[start]) to the end.
void integrate_from(const CavityParams &p, double chi_state, double h, std::vector<cplx> &path, std::size_t start) {
    for (std::size_t k = start; k + 1 < path.size(); ++k) {
        path[k + 1] = rk4_step(p, chi_state, k * h, path[k], h);
        if (!finite(path[k + 1])) {
            throw IntegrationDiverged("pointer-state integration produced a non-finite value at t = " +
                                      std::to_string((k + 1) * h));
        }
    }
}

std::vector<double> gaussian_taps(double sigma_bins) {
    if (sigma_bins <= 0.0) {
        return {1.0};
    }
    const int half = static_cast<int>(std::ceil(6.0 * sigma_bins));
    std::vector<double> taps(2 * half + 1);
    double total = 0.0;
    for (int k = -half; k <= half; ++k) {
        double v = std::exp(-0.5 * (k / sigma_bins) * (k / sigma_bins));
        taps[k + half] = v;
        total += v;
    }
    for (double &v : taps) {
        v /= total;
    }
    return taps;
}

}  // namespace

cplx CavityParams::drive_at(double t) const {
    cplx current{0.0, 0.0};
    for (const auto &seg : drive) {
        if (seg.start <= t) {
            current = seg.amplitude;
        } else {
            break;
        }
    }
    return current;
}

void CavityParams::validate(double total_time) const {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
        throw InvalidArgument("cavity decay rate kappa must be positive and finite");
    }
    if (!std::isfinite(chi) || !std::isfinite(detuning)) {
        throw InvalidArgument("dispersive shift and detuning must be finite");
    }
    if (drive.empty() || drive.front().start > 0.0) {
        throw InvalidArgument("drive schedule must start at or before t = 0");
    }
    for (std::size_t k = 1; k < drive.size(); ++k) {
        if (!(drive[k].start > drive[k - 1].start)) {
            throw InvalidArgument("drive segments must have strictly increasing start times");
        }
    }
    (void)total_time;
}

void TimeGrid::validate() const {
    if (n_points < 2) {
        throw InvalidArgument("time grid needs at least 2 points");
    }
    if (!(total_time > 0.0) || !std::isfinite(total_time)) {
        throw InvalidArgument("total measurement time must be positive");
    }
}

void DecoherenceRates::validate() const {
    if (!(t1_time > 0.0) || !(heating_time > 0.0)) {
        throw InvalidArgument("T1 and heating times must be positive (or infinite)");
    }
    for (double p : {prep_error_0, prep_error_1}) {
        if (!(p >= 0.0 && p < 1.0)) {
            throw InvalidArgument("preparation error probabilities must lie in [0, 1)");
        }
    }
}

void AmplifierModel::validate() const {
    if (!(gain >= 1.0) || !std::isfinite(gain)) {
        throw InvalidArgument("amplifier gain must be >= 1");
    }
    if (kind == AmplifierKind::phase_preserving) {
        // Caves bound on gain-normalized added noise.
        double bound = 0.5 * (1.0 - 1.0 / gain);
        if (added_noise < bound - 1e-15) {
            throw InvalidArgument("phase-preserving added noise A below the quantum limit 1/2 (1 - 1/G)");
        }
    } else if (added_noise < 0.0) {
        throw InvalidArgument("phase-sensitive added noise must be non-negative");
    }
    if (!std::isfinite(added_noise) || !std::isfinite(quadrature_phase)) {
        throw InvalidArgument("amplifier parameters must be finite");
    }
}

void ReadoutChain::validate() const {
    if (!(filter_sigma >= 0.0) || !std::isfinite(filter_sigma)) {
        throw InvalidArgument("readout filter width must be finite and non-negative");
    }
    if (scale == cplx(0.0, 0.0) || !finite(scale) || !finite(offset)) {
        throw InvalidArgument("digitizer scale must be non-zero and finite");
    }
}

PointerPaths::PointerPaths(CavityParams params, TimeGrid grid, int substeps, std::vector<cplx> fine0,
                           std::vector<cplx> fine1)
    : params_(std::move(params)),
      grid_(grid),
      substeps_(substeps),
      fine0_(std::move(fine0)),
      fine1_(std::move(fine1)) {}

cplx PointerPaths::at_bin_end(int state, int bin) const {
    return fine(state).at(static_cast<std::size_t>(bin + 1) * substeps_);
}

std::vector<cplx> PointerPaths::bin_means(int state) const {
    return boxcar_bins(fine(state), grid_.n_points, substeps_);
}

std::vector<cplx> PointerPaths::beta() const {
    auto a0 = bin_means(0);
    auto a1 = bin_means(1);
    for (std::size_t j = 0; j < a0.size(); ++j) {
        a0[j] -= a1[j];
    }
    return a0;
}

std::vector<cplx> PointerPaths::nu() const {
    auto a0 = bin_means(0);
    auto a1 = bin_means(1);
    for (std::size_t j = 0; j < a0.size(); ++j) {
        a0[j] += a1[j];
    }
    return a0;
}

std::vector<cplx> boxcar_bins(std::span<const cplx> fine, int n_points, int substeps) {
    if (fine.size() != static_cast<std::size_t>(n_points) * substeps + 1) {
        throw DimensionError("fine path length does not match grid");
    }
    std::vector<cplx> out(n_points);
    for (int j = 0; j < n_points; ++j) {
        const std::size_t base = static_cast<std::size_t>(j) * substeps;
        cplx acc = 0.5 * (fine[base] + fine[base + substeps]);
        for (int s = 1; s < substeps; ++s) {
            acc += fine[base + s];
        }
        out[j] = acc / static_cast<double>(substeps);
    }
    return out;
}

cplx steady_state(const CavityParams &params, int state, cplx drive) {
    const cplx i(0.0, 1.0);
    return -i * drive / (i * (params.detuning + params.chi_for(state)) + 0.5 * params.kappa);
}

PointerPaths evolve_pointer_states(const CavityParams &params, const TimeGrid &grid, int substeps) {
    grid.validate();
    if (substeps < 1) {
        throw InvalidArgument("substeps must be >= 1");
    }
    if (!std::isfinite(params.kappa) || params.drive.empty()) {
        throw InvalidArgument("cavity parameters incomplete");
    }
    const std::size_t n_fine = static_cast<std::size_t>(grid.n_points) * substeps + 1;
    const double h = grid.dt() / substeps;
    std::vector<cplx> fine0(n_fine, cplx{}), fine1(n_fine, cplx{});
    integrate_from(params, params.chi_for(0), h, fine0, 0);
    integrate_from(params, params.chi_for(1), h, fine1, 0);
    return PointerPaths(params, grid, substeps, std::move(fine0), std::move(fine1));
}

std::vector<cplx> integrate_with_jump(const PointerPaths &paths, int from_state, int to_state, double jump_time) {
    const auto &source = paths.fine(from_state);
    const double h = paths.fine_step();
    const auto &p = paths.params();
    std::vector<cplx> out(source.size());
    if (jump_time <= 0.0) {
        out[0] = source[0];
        integrate_from(p, p.chi_for(to_state), h, out, 0);
        return out;
    }
    const std::size_t last = source.size() - 1;
    std::size_t k = static_cast<std::size_t>(std::floor(jump_time / h));
    if (k >= last) {
        return source;
    }
    std::copy(source.begin(), source.begin() + k + 1, out.begin());
    const double t_k = k * h;
    const double first = jump_time - t_k;
    cplx a = source[k];
    if (first > 0.0) {
        a = rk4_step(p, p.chi_for(from_state), t_k, a, first);
    }
    const double second = h - first;
    if (second > 0.0) {
        a = rk4_step(p, p.chi_for(to_state), jump_time, a, second);
    }
    out[k + 1] = a;
    integrate_from(p, p.chi_for(to_state), h, out, k + 1);
    return out;
}

TrajectorySampler::TrajectorySampler(const PointerPaths &paths, DecoherenceRates rates, AmplifierModel amp,
                                     ReadoutChain readout)
    : paths_(paths), rates_(rates), amp_(amp), readout_(readout) {
    rates_.validate();
    amp_.validate();
    readout_.validate();
    means0_ = paths_.bin_means(0);
    means1_ = paths_.bin_means(1);
    const double dt = paths_.grid().dt();
    white_var_ = 1.0 / (4.0 * amp_.efficiency() * paths_.params().kappa * dt);
    taps_ = gaussian_taps(readout_.filter_sigma / dt);
}

double TrajectorySampler::noise_variance() const {
    double energy = 0.0;
    for (double h : taps_) {
        energy += h * h;
    }
    return std::norm(readout_.scale) * white_var_ * energy;
}

std::vector<cplx> TrajectorySampler::render(std::span<const cplx> bin_means, std::span<const cplx> noise) const {
    const int n = static_cast<int>(bin_means.size());
    const int half = static_cast<int>(taps_.size() / 2);
    const int padded = n + 2 * half;
    const cplx rot = std::polar(1.0, amp_.quadrature_phase);
    std::vector<cplx> x(padded);
    for (int idx = 0; idx < padded; ++idx) {
        int j = idx - half;
        cplx m = j < 0 ? cplx{} : bin_means[std::min(j, n - 1)];
        cplx z = noise.empty() ? m : m + noise[idx];
        if (amp_.kind == AmplifierKind::phase_sensitive) {
            // Signal in the quadrature orthogonal to theta is de-amplified by G.
            cplx r = std::conj(rot) * m;
            cplx nz = noise.empty() ? cplx{} : std::conj(rot) * noise[idx];
            z = rot * cplx(r.real() + nz.real(), r.imag() / amp_.gain + nz.imag());
        }
        x[idx] = z;
    }
    std::vector<cplx> out(n);
    for (int j = 0; j < n; ++j) {
        cplx acc{};
        for (std::size_t k = 0; k < taps_.size(); ++k) {
            acc += taps_[k] * x[j + k];
        }
        out[j] = readout_.offset + readout_.scale * acc;
    }
    return out;
}

std::vector<cplx> TrajectorySampler::mean_output(int state) const {
    return render(state == 0 ? means0_ : means1_, {});
}

Trajectory TrajectorySampler::sample(int prep, std::int64_t shot_id, std::uint64_t seed) const {
    if (prep != 0 && prep != 1) {
        throw InvalidArgument("preparation label must be 0 or 1");
    }
    std::mt19937_64 rng = shot_rng(seed, static_cast<std::uint64_t>(shot_id));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    Trajectory traj;
    traj.prep_label = prep;
    traj.shot_id = shot_id;
    const double p_flip = prep == 0 ? rates_.prep_error_0 : rates_.prep_error_1;
    int state = prep;
    if (uniform(rng) < p_flip) {
        state = 1 - state;
    }
    traj.initial_state = state;

    const double mean_wait = state == 1 ? rates_.t1_time : rates_.heating_time;
    const double total = paths_.grid().total_time;
    std::vector<cplx> means;
    bool jumped = false;
    if (std::isfinite(mean_wait)) {
        std::exponential_distribution<double> wait(1.0 / mean_wait);
        double tau = wait(rng);
        if (tau < total) {
            jumped = true;
            traj.jumps.push_back({tau, state, 1 - state});
            auto fine = integrate_with_jump(paths_, state, 1 - state, tau);
            means = boxcar_bins(fine, paths_.grid().n_points, paths_.substeps());
        }
    }
    if (!jumped) {
        means = state == 0 ? means0_ : means1_;
    }

    const int n = paths_.grid().n_points;
    const std::size_t padded = static_cast<std::size_t>(n) + taps_.size() - 1;
    const double sd = std::sqrt(white_var_);
    std::vector<cplx> noise(padded);
    for (auto &z : noise) {
        double re = normal(rng);
        double im = normal(rng);
        z = cplx(sd * re, sd * im);
    }
    traj.samples = render(means, noise);
    return traj;
}

Trajectory sample_trajectory(const PointerPaths &paths, int prep, const DecoherenceRates &rates,
                             const AmplifierModel &amp, const TimeGrid &grid, std::uint64_t seed,
                             const ReadoutChain &readout, std::int64_t shot_id) {
    if (!(grid == paths.grid())) {
        throw DimensionError("trajectory grid does not match the pointer-path grid");
    }
    TrajectorySampler sampler(paths, rates, amp, readout);
    return sampler.sample(prep, shot_id, seed);
}

ReadoutChain calibrate_output_map(const CavityParams &params, cplx target0, cplx target1, double filter_sigma) {
    cplx drive = params.drive.empty() ? cplx{} : params.drive.back().amplitude;
    cplx a0 = steady_state(params, 0, drive);
    cplx a1 = steady_state(params, 1, drive);
    if (std::abs(a0 - a1) == 0.0) {
        throw InvalidArgument("steady states coincide; cannot calibrate output map");
    }
    ReadoutChain chain;
    chain.filter_sigma = filter_sigma;
    chain.scale = (target0 - target1) / (a0 - a1);
    chain.offset = target0 - chain.scale * a0;
    return chain;
}

void SimulationSpec::validate() const {
    grid.validate();
    cavity.validate(grid.total_time);
    rates.validate();
    amplifier.validate();
    readout.validate();
    if (shots <= 0 || shots % 2 != 0) {
        throw InvalidArgument("invalid spec: shot count must be positive and even, got " + std::to_string(shots));
    }
    if (substeps < 1) {
        throw InvalidArgument("invalid spec: substeps must be >= 1");
    }
}

SimulationSpec SimulationSpec::reference_device() {
    SimulationSpec spec;
    spec.cavity.kappa = kTwoPi * 1210e3;
    spec.cavity.chi = kTwoPi * -1.4e6;
    spec.cavity.detuning = 0.0;
    spec.cavity.drive = {{0.0, cplx(kTwoPi * 1.2e6, 0.0)}};
    spec.grid = TimeGrid{2.6e-6, 163};
    spec.rates.t1_time = 29e-6;
    // Expected heating count 230 of 25600 ground shots over 2.6 us.
    spec.rates.heating_time = -2.6e-6 / std::log1p(-230.0 / 25600.0);
    spec.rates.prep_error_0 = 0.004;
    spec.rates.prep_error_1 = 0.04;
    spec.amplifier.kind = AmplifierKind::phase_preserving;
    spec.amplifier.added_noise = 1.5;
    spec.amplifier.gain = 100.0;
    spec.readout = calibrate_output_map(spec.cavity, cplx(-0.07, -0.02), cplx(-0.01, -0.07), 100e-9);
    spec.shots = 51200;
    return spec;
}

SimulationSpec SimulationSpec::ideal_noise() {
    SimulationSpec spec = reference_device();
    spec.rates = DecoherenceRates{};
    spec.readout.filter_sigma = 0.0;
    return spec;
}

void Dataset::validate() const {
    if (labels.size() != trajectories.size()) {
        throw DataError("dataset label count does not match trajectory count");
    }
    for (const auto &t : trajectories) {
        if (t.samples.size() != static_cast<std::size_t>(grid.n_points)) {
            throw DimensionError("trajectory length does not match the dataset grid");
        }
    }
}

Dataset generate_dataset(const SimulationSpec &spec, std::uint64_t seed) {
    spec.validate();
    PointerPaths paths = evolve_pointer_states(spec.cavity, spec.grid, spec.substeps);
    TrajectorySampler sampler(paths, spec.rates, spec.amplifier, spec.readout);
    Dataset ds;
    ds.grid = spec.grid;
    ds.trajectories.reserve(spec.shots);
    ds.labels.reserve(spec.shots);
    const std::int64_t half = spec.shots / 2;
    for (std::int64_t shot = 0; shot < spec.shots; ++shot) {
        int prep = shot < half ? 0 : 1;
        ds.trajectories.push_back(sampler.sample(prep, shot, seed));
        ds.labels.push_back(prep);
    }
    ds.metadata = {{"generator", "qtraj.sim"},
                   {"seed", seed},
                   {"label_layout", "first half prepared 0, second half prepared 1"},
                   {"spec", to_json(spec)},
                   {"noise_variance_per_quadrature", sampler.noise_variance()}};
    return ds;
}

Dataset truncate(const Dataset &dataset, int n_points) {
    if (n_points < 1 || n_points > dataset.grid.n_points) {
        throw InvalidArgument("truncation length must be within [1, n_points]");
    }
    Dataset out;
    out.grid = TimeGrid{dataset.grid.dt() * n_points, n_points};
    out.labels = dataset.labels;
    out.metadata = dataset.metadata;
    out.metadata["truncated_to_points"] = n_points;
    out.trajectories.reserve(dataset.size());
    for (const auto &t : dataset.trajectories) {
        Trajectory c = t;
        c.samples.resize(n_points);
        std::erase_if(c.jumps, [&](const JumpEvent &e) { return e.time >= out.grid.total_time; });
        out.trajectories.push_back(std::move(c));
    }
    return out;
}

// JSON form. Physical quantities carry their unit in the key name.

namespace {

nlohmann::json time_or_null(double seconds) {
    if (!std::isfinite(seconds)) {
        return nullptr;
    }
    return seconds * 1e6;
}

double time_from(const nlohmann::json &j, const char *key) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return kInf;
    }
    return j.at(key).get<double>() * 1e-6;
}

template <typename T>
T get_or(const nlohmann::json &j, const char *key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

nlohmann::json to_json(const SimulationSpec &spec) {
    nlohmann::json drive = nlohmann::json::array();
    for (const auto &seg : spec.cavity.drive) {
        drive.push_back({{"start_us", seg.start * 1e6},
                         {"re_over_2pi_mhz", seg.amplitude.real() / kTwoPi / 1e6},
                         {"im_over_2pi_mhz", seg.amplitude.imag() / kTwoPi / 1e6}});
    }
    return {
        {"cavity",
         {{"kappa_over_2pi_khz", spec.cavity.kappa / kTwoPi / 1e3},
          {"two_chi_over_2pi_mhz", 2.0 * spec.cavity.chi / kTwoPi / 1e6},
          {"detuning_over_2pi_mhz", spec.cavity.detuning / kTwoPi / 1e6},
          {"drive", drive}}},
        {"grid", {{"total_time_us", spec.grid.total_time * 1e6}, {"n_points", spec.grid.n_points}}},
        {"rates",
         {{"t1_us", time_or_null(spec.rates.t1_time)},
          {"heating_us", time_or_null(spec.rates.heating_time)},
          {"prep_error_0", spec.rates.prep_error_0},
          {"prep_error_1", spec.rates.prep_error_1}}},
        {"amplifier",
         {{"kind", spec.amplifier.kind == AmplifierKind::phase_preserving ? "phase_preserving" : "phase_sensitive"},
          {"added_noise", spec.amplifier.added_noise},
          {"gain", spec.amplifier.gain},
          {"quadrature_phase_rad", spec.amplifier.quadrature_phase}}},
        {"readout",
         {{"filter_sigma_ns", spec.readout.filter_sigma * 1e9},
          {"scale_re", spec.readout.scale.real()},
          {"scale_im", spec.readout.scale.imag()},
          {"offset_re", spec.readout.offset.real()},
          {"offset_im", spec.readout.offset.imag()}}},
        {"shots", spec.shots},
        {"substeps", spec.substeps},
    };
}

SimulationSpec simulation_spec_from_json(const nlohmann::json &j) {
    SimulationSpec spec = SimulationSpec::reference_device();
    try {
        if (j.contains("cavity")) {
            const auto &c = j.at("cavity");
            spec.cavity.kappa = get_or(c, "kappa_over_2pi_khz", spec.cavity.kappa / kTwoPi / 1e3) * kTwoPi * 1e3;
            spec.cavity.chi = get_or(c, "two_chi_over_2pi_mhz", 2.0 * spec.cavity.chi / kTwoPi / 1e6) * kTwoPi *
                              1e6 / 2.0;
            spec.cavity.detuning = get_or(c, "detuning_over_2pi_mhz", 0.0) * kTwoPi * 1e6;
            if (c.contains("drive")) {
                spec.cavity.drive.clear();
                for (const auto &seg : c.at("drive")) {
                    spec.cavity.drive.push_back(
                        {seg.at("start_us").get<double>() * 1e-6,
                         cplx(get_or(seg, "re_over_2pi_mhz", 0.0), get_or(seg, "im_over_2pi_mhz", 0.0)) * kTwoPi *
                             1e6});
                }
            }
        }
        if (j.contains("grid")) {
            const auto &g = j.at("grid");
            spec.grid.total_time = get_or(g, "total_time_us", spec.grid.total_time * 1e6) * 1e-6;
            spec.grid.n_points = get_or(g, "n_points", spec.grid.n_points);
        }
        if (j.contains("rates")) {
            const auto &r = j.at("rates");
            if (r.contains("t1_us")) spec.rates.t1_time = time_from(r, "t1_us");
            if (r.contains("heating_us")) spec.rates.heating_time = time_from(r, "heating_us");
            spec.rates.prep_error_0 = get_or(r, "prep_error_0", spec.rates.prep_error_0);
            spec.rates.prep_error_1 = get_or(r, "prep_error_1", spec.rates.prep_error_1);
        }
        if (j.contains("amplifier")) {
            const auto &a = j.at("amplifier");
            std::string kind = get_or<std::string>(a, "kind", "phase_preserving");
            if (kind == "phase_preserving") {
                spec.amplifier.kind = AmplifierKind::phase_preserving;
            } else if (kind == "phase_sensitive") {
                spec.amplifier.kind = AmplifierKind::phase_sensitive;
            } else {
                throw InvalidArgument("amplifier.kind must be phase_preserving or phase_sensitive, got '" + kind +
                                      "'");
            }
            spec.amplifier.added_noise = get_or(a, "added_noise", spec.amplifier.added_noise);
            spec.amplifier.gain = get_or(a, "gain", spec.amplifier.gain);
            spec.amplifier.quadrature_phase = get_or(a, "quadrature_phase_rad", spec.amplifier.quadrature_phase);
        }
        if (j.contains("readout")) {
            const auto &r = j.at("readout");
            spec.readout.filter_sigma = get_or(r, "filter_sigma_ns", spec.readout.filter_sigma * 1e9) * 1e-9;
            spec.readout.scale = cplx(get_or(r, "scale_re", spec.readout.scale.real()),
                                      get_or(r, "scale_im", spec.readout.scale.imag()));
            spec.readout.offset = cplx(get_or(r, "offset_re", spec.readout.offset.real()),
                                       get_or(r, "offset_im", spec.readout.offset.imag()));
        }
        spec.shots = get_or<std::int64_t>(j, "shots", spec.shots);
        spec.substeps = get_or(j, "substeps", spec.substeps);
    } catch (const nlohmann::json::exception &e) {
        throw InvalidArgument(std::string("malformed simulation config: ") + e.what());
    }
    return spec;
}

}  // namespace qtraj::sim
