#pragma once

#include <complex>
#include <string>
#include <vector>

#include "pmri/core.hpp"

namespace pmri {

enum class PulseKind { Hard, Wurst };

/// RF waveform in the rotating frame: complex B1+ samples (Tesla) on a
/// uniform time step. Samples live at bin centers t = (i + 1/2) dt; the
/// analytic envelope/phase helpers below define the continuous shape the
/// samples are drawn from.
struct PulseWaveform {
    std::vector<std::complex<double>> samples;  // Tesla
    double dt = 0.0;       // s
    double duration = 0.0; // s, = samples.size() * dt
    PulseKind kind = PulseKind::Hard;
    double sweep_bw = 0.0;       // Hz (Wurst)
    int envelope_order = 0;      // Wurst exponent n
    double peak_b1 = 0.0;        // Tesla

    /// Copy with an extra RF phase (radians) on every sample.
    PulseWaveform with_phase(double phase_rad) const;
    /// Sweep rate in Hz/s (0 for hard pulses).
    double sweep_rate() const {
        return duration > 0.0 ? sweep_bw / duration : 0.0;
    }
};

/// WURST-n envelope peak*(1 - |cos(pi t / T)|^n), zero at both ends,
/// maximum at T/2.
double wurst_envelope(double t, double duration, int order, double peak_b1);
/// Quadratic phase of the linear sweep from -bw/2 to +bw/2 across [0, T].
double wurst_phase(double t, double duration, double sweep_bw);

/// Frequency-swept WURST pulse. Throws when dt > duration or parameters
/// are non-positive.
PulseWaveform make_wurst(double duration, double sweep_bw, int order,
                         double peak_b1, double dt);

/// Constant-amplitude pulse with on-resonance flip 2*pi*gamma*B1*duration
/// equal to flip_target.
PulseWaveform make_hard(double duration, double flip_target, double dt,
                        const PhysicsConstants& constants = PhysicsConstants());

/// Default peak B1 levels calibrated so the scanner-scale WURST pulses reach
/// a ~90 degree excitation / adiabatic refocusing at nominal scale.
double wurst_excitation_peak_b1(double duration, double sweep_bw,
                                const PhysicsConstants& constants = PhysicsConstants());
double wurst_refocusing_peak_b1(double duration, double sweep_bw,
                                const PhysicsConstants& constants = PhysicsConstants());

// CSV: header then "t,b1_re,b1_im" rows
void save_pulse_csv(const PulseWaveform& pulse, const std::string& path);
PulseWaveform load_pulse_csv(const std::string& path);

}  // namespace pmri
