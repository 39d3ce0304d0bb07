#pragma once

#include <complex>
#include <string>
#include <vector>

#include "pmri/core.hpp"
#include "pmri/exec.hpp"
#include "pmri/pulse.hpp"

namespace pmri {

/// One isochromat in the rotating frame. |magnetization| <= 1 and is
/// preserved by the (relaxation-free) propagator.
struct SpinState {
    Vec3 magnetization{0.0, 0.0, 1.0};
    double off_resonance = 0.0;  // Hz
    double b1_scale = 1.0;

    std::complex<double> mxy() const {
        return {magnetization.x, magnetization.y};
    }
};

/// Piecewise-constant effective-field propagation: per RF sample an exact
/// rotation about (b1_scale*Re B1, b1_scale*Im B1, df/gamma), substepped
/// whenever a single rotation would exceed `max_step_rad`. Lossless, so the
/// magnetization norm is preserved to rounding.
SpinState propagate(const SpinState& state, const PulseWaveform& pulse,
                    const PhysicsConstants& constants = PhysicsConstants(),
                    double max_step_rad = 0.1);

/// Free precession for `dt` seconds at the state's off-resonance.
SpinState precess(const SpinState& state, double dt);

/// |Mxy| (excitation) or echo-magnitude (refocusing) over a B1-scale x
/// off-resonance grid.
struct ProfileGrid {
    std::vector<double> b1_scales;
    std::vector<double> offsets_hz;
    std::vector<double> values;  // [ib1 * offsets + ioff]

    double at(std::size_t ib1, std::size_t ioff) const {
        return values[ib1 * offsets_hz.size() + ioff];
    }
};

/// Equilibrium -> pulse -> |Mxy| per cell.
ProfileGrid excitation_profile(const PulseWaveform& pulse,
                               const std::vector<double>& b1_scales,
                               const std::vector<double>& offsets_hz,
                               const PhysicsConstants& constants = PhysicsConstants(),
                               Exec exec = Exec::OpenMP);

/// Ideal 90 -> tau -> pulse -> echo |Mxy| per cell; tau >= pulse duration.
ProfileGrid refocusing_profile(const PulseWaveform& pulse,
                               const std::vector<double>& b1_scales,
                               const std::vector<double>& offsets_hz,
                               const PhysicsConstants& constants = PhysicsConstants(),
                               Exec exec = Exec::OpenMP);

struct EchoTrainOptions {
    int n_echoes = 8;
    double echo_spacing = 8e-3;      // s; must be >= 2x excitation duration
    bool phase_cycle = false;        // two acquisitions, refocusing 0/90 deg
    double b1_scale = 1.0;           // global transmit scale (flip error)
    double max_step_rad = 0.1;
};

/// Chirped RARE echo-train simulation. Odd (1-based) echoes are labeled
/// FID echoes and land on the m*esp grid when the refocusing sweep rate is
/// twice the excitation rate; even echoes are spectral echoes, sampled at
/// m*esp + T_ref. With phase cycling on, `echo_signal`/`echo_by_iso` hold
/// the pathway-separating combination (acqA + (-1)^echo * acqB)/2 of the
/// 0/90-degree pair, and the raw acquisitions are kept alongside.
struct EchoTrainResult {
    std::vector<std::complex<double>> echo_signal;  // per echo, summed over isochromats
    std::vector<std::vector<std::complex<double>>> echo_by_iso;  // [echo][iso]
    std::vector<std::string> echo_label;            // "FID" / "spectral"
    std::vector<double> echo_time;                  // nominal centers, s
    // raw pair when phase_cycle is on (index 0: 0 deg, 1: 90 deg)
    std::vector<std::vector<std::complex<double>>> acq_echo_signal;
    std::vector<std::vector<std::vector<std::complex<double>>>> acq_echo_by_iso;
};

EchoTrainResult simulate_echo_train(const PulseWaveform& excitation,
                                    const PulseWaveform& refocusing,
                                    const std::vector<double>& isochromats_hz,
                                    const EchoTrainOptions& options,
                                    const PhysicsConstants& constants = PhysicsConstants(),
                                    Exec exec = Exec::OpenMP);

/// ProfileGrid raster export (FMAP container: x axis = offset, z axis = B1
/// scale) plus a 16-bit PGM with the window recorded by the caller.
void save_profile_fmap(const ProfileGrid& grid, const std::string& path,
                       const std::string& label);

}  // namespace pmri
