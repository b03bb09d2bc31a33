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

#ifndef QTRAJ_SIM_H
#define QTRAJ_SIM_H

#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

namespace qtraj::sim {

using cplx = std::complex<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Drive amplitude E(t) in rad/s, held constant from `start` until the next segment.
struct DriveSegment {
    double start = 0.0;
    cplx amplitude;
};

/// Dispersive cavity in the frame rotating at the measurement drive frequency.
/// State 0 sees a frequency shift of +chi and state 1 sees -chi.
struct CavityParams {
    double detuning = 0.0;  // omega_r - omega_m, rad/s
    double chi = 0.0;       // rad/s
    double kappa = 0.0;     // rad/s
    std::vector<DriveSegment> drive;

    double chi_for(int state) const { return state == 0 ? chi : -chi; }
    cplx drive_at(double t) const;
    void validate(double total_time) const;
};

struct TimeGrid {
    double total_time = 2.6e-6;
    int n_points = 163;

    double dt() const { return total_time / n_points; }
    void validate() const;
    bool operator==(const TimeGrid &) const = default;
};

struct DecoherenceRates {
    double t1_time = kInf;
    double heating_time = kInf;
    double prep_error_0 = 0.0;
    double prep_error_1 = 0.0;

    void validate() const;
};

enum class AmplifierKind { phase_preserving, phase_sensitive };

/// Linear amplifier referred back to its input. `added_noise` is A for a phase
/// preserving amplifier and A_s for a phase sensitive one.
struct AmplifierModel {
    AmplifierKind kind = AmplifierKind::phase_preserving;
    double added_noise = 0.5;
    double gain = 100.0;
    double quadrature_phase = 0.0;

    /// Single-quadrature measurement efficiency eta.
    double efficiency() const { return 1.0 / (1.0 + 2.0 * added_noise); }
    void validate() const;
};

/// Acquisition chain after the amplifier: a Gaussian anti-aliasing filter with
/// unit DC gain followed by the digitizer's complex scale and offset. A zero
/// filter width gives white per-bin noise.
struct ReadoutChain {
    double filter_sigma = 0.0;  // seconds
    cplx scale{1.0, 0.0};
    cplx offset{0.0, 0.0};

    void validate() const;
};

/// Pointer-state paths alpha_0(t), alpha_1(t) on the fine integration grid
/// (n_points * substeps + 1 samples starting at t = 0).
class PointerPaths {
   public:
    PointerPaths(CavityParams params, TimeGrid grid, int substeps, std::vector<cplx> fine0, std::vector<cplx> fine1);

    const CavityParams &params() const { return params_; }
    const TimeGrid &grid() const { return grid_; }
    int substeps() const { return substeps_; }
    double fine_step() const { return grid_.dt() / substeps_; }
    const std::vector<cplx> &fine(int state) const { return state == 0 ? fine0_ : fine1_; }

    /// alpha_state at the end of output bin `bin`.
    cplx at_bin_end(int state, int bin) const;
    cplx final_value(int state) const { return fine(state).back(); }
    /// Boxcar average of alpha_state over each output bin.
    std::vector<cplx> bin_means(int state) const;
    /// beta = alpha_0 - alpha_1 and nu = alpha_0 + alpha_1, bin averaged.
    std::vector<cplx> beta() const;
    std::vector<cplx> nu() const;

   private:
    CavityParams params_;
    TimeGrid grid_;
    int substeps_;
    std::vector<cplx> fine0_, fine1_;
};

/// Closed-form steady state of the pointer ODE under constant drive E.
cplx steady_state(const CavityParams &params, int state, cplx drive);

/// Integrates d(alpha)/dt = -iE(t) - i(detuning + chi_state) alpha - kappa alpha / 2 from
/// alpha(0) = 0 with fixed-step RK4. Throws IntegrationDiverged on non-finite values.
PointerPaths evolve_pointer_states(const CavityParams &params, const TimeGrid &grid, int substeps = 10);

/// Fine-grid path that follows `from_state` until `jump_time`, then `to_state`,
/// with alpha continuous across the jump.
std::vector<cplx> integrate_with_jump(const PointerPaths &paths, int from_state, int to_state, double jump_time);

/// Boxcar bin averages (trapezoid rule) of a fine-grid path.
std::vector<cplx> boxcar_bins(std::span<const cplx> fine, int n_points, int substeps);

struct JumpEvent {
    double time = 0.0;
    int from_state = 0;
    int to_state = 0;
};

struct Trajectory {
    std::vector<cplx> samples;
    int prep_label = 0;
    int initial_state = 0;  // after preparation error
    std::int64_t shot_id = 0;
    std::vector<JumpEvent> jumps;
};

/// Samples single shots for fixed physics. Each shot's random stream is derived
/// from (seed, shot_id) only, so shots can be produced in any order.
class TrajectorySampler {
   public:
    TrajectorySampler(const PointerPaths &paths, DecoherenceRates rates, AmplifierModel amp, ReadoutChain readout = {});

    Trajectory sample(int prep, std::int64_t shot_id, std::uint64_t seed) const;

    /// Noise-free output for a shot that stays in `state` (filter and digitizer applied).
    std::vector<cplx> mean_output(int state) const;
    /// Per-quadrature noise variance of each output bin, in output units.
    double noise_variance() const;
    /// Per-quadrature variance of the white noise added to the bin means, in units of alpha.
    double white_noise_variance() const { return white_var_; }
    const std::vector<double> &filter_taps() const { return taps_; }
    const PointerPaths &paths() const { return paths_; }

   private:
    std::vector<cplx> render(std::span<const cplx> bin_means, std::span<const cplx> noise) const;

    const PointerPaths &paths_;
    DecoherenceRates rates_;
    AmplifierModel amp_;
    ReadoutChain readout_;
    std::vector<cplx> means0_, means1_;
    std::vector<double> taps_;
    double white_var_ = 0.0;
};

/// Convenience wrapper over TrajectorySampler for a single shot.
Trajectory sample_trajectory(const PointerPaths &paths, int prep, const DecoherenceRates &rates,
                             const AmplifierModel &amp, const TimeGrid &grid, std::uint64_t seed,
                             const ReadoutChain &readout = {}, std::int64_t shot_id = 0);

/// Full experiment description.
struct SimulationSpec {
    CavityParams cavity;
    TimeGrid grid;
    DecoherenceRates rates;
    AmplifierModel amplifier;
    ReadoutChain readout;
    std::int64_t shots = 51200;
    int substeps = 10;

    void validate() const;

    /// Reference device: kappa/2pi = 1210 kHz, 2chi/2pi = -2.8 MHz, T1 = 29 us,
    /// 2.6 us over 163 bins, band-limited readout, prep and heating errors.
    static SimulationSpec reference_device();
    /// White Gaussian noise only: no jumps, no preparation errors, no filter.
    static SimulationSpec ideal_noise();
};

/// Digitizer scale/offset that maps the two steady states onto the given I/Q points.
ReadoutChain calibrate_output_map(const CavityParams &params, cplx target0, cplx target1, double filter_sigma);

struct Dataset {
    std::vector<Trajectory> trajectories;
    TimeGrid grid;
    std::vector<int> labels;
    nlohmann::json metadata;

    std::size_t size() const { return trajectories.size(); }
    void validate() const;
};

/// First half of the shots prepared in 0, second half in 1. Throws InvalidArgument for odd N.
Dataset generate_dataset(const SimulationSpec &spec, std::uint64_t seed);

/// Returns a copy with every trajectory cut to the first `n_points` bins.
Dataset truncate(const Dataset &dataset, int n_points);

nlohmann::json to_json(const SimulationSpec &spec);
SimulationSpec simulation_spec_from_json(const nlohmann::json &j);

}  // namespace qtraj::sim

#endif
