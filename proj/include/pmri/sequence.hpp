#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pmri/core.hpp"
#include "pmri/fieldmap.hpp"

namespace pmri {

enum class Contrast { PD, T1, T2 };

const char* contrast_name(Contrast c);
Contrast contrast_from_name(const std::string& name);

/// 3D RARE acquisition timing. One shot plays `echo_train_length` echoes
/// (the y encodes); `n_shots` repetitions step the z encode. The readout
/// axis has no table: the built-in gradient is always on.
struct AcquisitionProtocol {
    Contrast contrast = Contrast::PD;
    double tr = 3.0;                 // s
    double te_eff = 0.0;             // s, set by build_protocol
    std::optional<double> ti;        // s, inversion time (T1 only)
    int echo_train_length = 1;       // y encodes per shot
    int n_shots = 1;                 // z encodes
    double echo_spacing = 13.9e-3;   // s
    int n_readout = 256;             // samples per echo
    double dwell = 5.46875e-6;       // s
    double tau = 1.0e-3;             // s, phase-encode blip duration
    int averages = 1;

    // peak blip amplitudes (T/m) available on each phase axis
    double gy_peak = 0.575e-3 * 4.5;
    double gz_peak = 0.815e-3 * 9.0;

    double readout_window() const { return n_readout * dwell; }
    /// Echo-center-relative time of readout sample `it`, symmetric about 0.
    double sample_time(int it) const {
        return (it - 0.5 * (n_readout - 1)) * dwell;
    }

    /// Canonical text form; also the input to the SIGDAT protocol hash.
    std::string serialize() const;
    static AcquisitionProtocol deserialize(const std::string& text);
};

/// Signed encode indices per echo (y) and per shot (z), plus the l(n)
/// blip scalings index/max|index| in [-1, 1].
struct PhaseEncodeTable {
    std::vector<int> y_order;  // length echo_train_length
    std::vector<int> z_order;  // length n_shots
    int y_max_index = 0;       // max |y_order| (0 when N_y == 1)
    int z_max_index = 0;

    double l_y(int echo) const {
        return y_max_index == 0 ? 0.0
                                : y_order[echo] / static_cast<double>(y_max_index);
    }
    double l_z(int shot) const {
        return z_max_index == 0 ? 0.0
                                : z_order[shot] / static_cast<double>(z_max_index);
    }

    std::string to_csv() const;  // shot,echo,y_index,z_index,l_y,l_z
};

struct Protocol {
    AcquisitionProtocol acq;
    PhaseEncodeTable table;
};

/// Builds the protocol and encode tables for a (N_x, N_y, N_z) matrix.
/// PD: center-out y ordering (0, +1, -1, ...). T2: linear y ordering with
/// k=0 on the echo whose time matches te_eff. T1: PD ordering plus TI.
/// Throws config_error when te_eff is not attainable on the echo grid,
/// listing the attainable values.
Protocol build_protocol(Contrast contrast, int n_x, int n_y, int n_z,
                        const AcquisitionProtocol& timing);

/// Per-axis resolution from linear fits: readout 1/(gamma*g_x*T_readout);
/// phase axes max_index/(N*gamma*g_peak*tau) (the FOV/N of the blip table).
Vec3 estimate_resolution(const LinearFit& fit_x, const Protocol& protocol,
                         const LinearFit& fit_y, const LinearFit& fit_z,
                         const PhysicsConstants& constants = PhysicsConstants());

}  // namespace pmri
