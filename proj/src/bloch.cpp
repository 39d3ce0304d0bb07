#include "pmri/bloch.hpp"

#include <cmath>

#include "pmri/fieldmap.hpp"

namespace pmri {

namespace {

// Exact rotation of m about the axis of omega (rad/s) for dt seconds.
// Precession is clockwise about the field (phase e^{-i w t} for a +z
// field), hence the negative rotation angle.
Vec3 rotate_about(const Vec3& m, const Vec3& omega, double dt, double max_step_rad) {
    const double w = omega.norm();
    if (w == 0.0 || dt == 0.0) return m;
    double theta = w * dt;
    int nsub = 1;
    if (theta > max_step_rad)
        nsub = static_cast<int>(std::ceil(theta / max_step_rad));
    theta = -theta / nsub;
    const Vec3 k = omega / w;
    const double c = std::cos(theta), s = std::sin(theta);
    Vec3 v = m;
    for (int i = 0; i < nsub; ++i) {
        const Vec3 kxv{k.y * v.z - k.z * v.y, k.z * v.x - k.x * v.z,
                       k.x * v.y - k.y * v.x};
        const double kdv = k.dot(v);
        v = v * c + kxv * s + k * (kdv * (1.0 - c));
    }
    return v;
}

}  // namespace

SpinState propagate(const SpinState& state, const PulseWaveform& pulse,
                    const PhysicsConstants& constants, double max_step_rad) {
    const double two_pi_gamma = 2.0 * M_PI * constants.gamma();
    const double wz = 2.0 * M_PI * state.off_resonance;
    SpinState out = state;
    Vec3 m = state.magnetization;
    for (const auto& b1 : pulse.samples) {
        if (!std::isfinite(b1.real()) || !std::isfinite(b1.imag()))
            throw numeric_error("propagate: non-finite RF sample");
        const Vec3 omega{two_pi_gamma * state.b1_scale * b1.real(),
                         two_pi_gamma * state.b1_scale * b1.imag(), wz};
        m = rotate_about(m, omega, pulse.dt, max_step_rad);
    }
    out.magnetization = m;
    return out;
}

SpinState precess(const SpinState& state, double dt) {
    SpinState out = state;
    out.magnetization = rotate_about(state.magnetization,
                                     {0.0, 0.0, 2.0 * M_PI * state.off_resonance},
                                     dt, 1e9);
    return out;
}

ProfileGrid excitation_profile(const PulseWaveform& pulse,
                               const std::vector<double>& b1_scales,
                               const std::vector<double>& offsets_hz,
                               const PhysicsConstants& constants, Exec exec) {
    if (b1_scales.empty() || offsets_hz.empty())
        throw config_error("excitation_profile: empty axis");
    ProfileGrid grid;
    grid.b1_scales = b1_scales;
    grid.offsets_hz = offsets_hz;
    grid.values.assign(b1_scales.size() * offsets_hz.size(), 0.0);
    const int nb = static_cast<int>(b1_scales.size());
    const int no = static_cast<int>(offsets_hz.size());

    auto cell = [&](int ib, int io) {
        SpinState s;
        s.b1_scale = b1_scales[ib];
        s.off_resonance = offsets_hz[io];
        s = propagate(s, pulse, constants);
        grid.values[static_cast<std::size_t>(ib) * no + io] = std::abs(s.mxy());
    };

    if (exec == Exec::OpenMP) {
#pragma omp parallel for collapse(2) schedule(static)
        for (int ib = 0; ib < nb; ++ib)
            for (int io = 0; io < no; ++io) cell(ib, io);
    } else {
        for (int ib = 0; ib < nb; ++ib)
            for (int io = 0; io < no; ++io) cell(ib, io);
    }
    return grid;
}

ProfileGrid refocusing_profile(const PulseWaveform& pulse,
                               const std::vector<double>& b1_scales,
                               const std::vector<double>& offsets_hz,
                               const PhysicsConstants& constants, Exec exec) {
    if (b1_scales.empty() || offsets_hz.empty())
        throw config_error("refocusing_profile: empty axis");
    ProfileGrid grid;
    grid.b1_scales = b1_scales;
    grid.offsets_hz = offsets_hz;
    grid.values.assign(b1_scales.size() * offsets_hz.size(), 0.0);
    const int nb = static_cast<int>(b1_scales.size());
    const int no = static_cast<int>(offsets_hz.size());
    const double tau = 1.5 * pulse.duration;

    // Echo of an ideal-90 -- tau -- pulse -- tau experiment for a voxel
    // whose internal spread has fully fanned out over tau: a uniform phase
    // fan isolates the refocused coherence (the part that forms the echo),
    // while the non-refocused component averages out.
    constexpr int kFan = 8;

    auto cell = [&](int ib, int io) {
        std::complex<double> echo(0.0, 0.0);
        for (int f = 0; f < kFan; ++f) {
            const double phi = 2.0 * M_PI * f / kFan;
            SpinState s;
            s.b1_scale = b1_scales[ib];
            s.off_resonance = offsets_hz[io];
            s.magnetization = {std::cos(phi), std::sin(phi), 0.0};
            s = precess(s, tau);
            s = propagate(s, pulse, constants);
            s = precess(s, tau);
            // rewind the fan phase the same way the second tau rewinds the
            // voxel-internal dephasing
            echo += s.mxy() * std::complex<double>(std::cos(phi), std::sin(phi));
        }
        grid.values[static_cast<std::size_t>(ib) * no + io] = std::abs(echo) / kFan;
    };

    if (exec == Exec::OpenMP) {
#pragma omp parallel for collapse(2) schedule(static)
        for (int ib = 0; ib < nb; ++ib)
            for (int io = 0; io < no; ++io) cell(ib, io);
    } else {
        for (int ib = 0; ib < nb; ++ib)
            for (int io = 0; io < no; ++io) cell(ib, io);
    }
    return grid;
}

namespace {

struct IsoTrain {
    std::vector<std::complex<double>> echoes;  // receiver-demodulated M+
};

// One acquisition: excitation about x, refocusing train at rf phase
// `ref_phase`, echoes sampled at their nominal centers. The receiver factor
// -i makes an ideal on-resonance CPMG echo read +1.
IsoTrain run_train(const PulseWaveform& exc, const PulseWaveform& ref,
                   double ref_phase, double offset_hz,
                   const EchoTrainOptions& opt, const PhysicsConstants& cst) {
    const double esp = opt.echo_spacing;
    SpinState s;
    s.off_resonance = offset_hz;
    s.b1_scale = opt.b1_scale;

    const PulseWaveform ref_ph = ref.with_phase(ref_phase);

    IsoTrain out;
    out.echoes.reserve(opt.n_echoes);
    double cursor = exc.duration;
    s = propagate(s, exc, cst, opt.max_step_rad);
    for (int k = 1; k <= opt.n_echoes; ++k) {
        const double ref_start = k * esp - 0.5 * esp;
        s = precess(s, ref_start - cursor);
        cursor = ref_start;
        s = propagate(s, ref_ph, cst, opt.max_step_rad);
        cursor += ref_ph.duration;
        const double echo_time = (k % 2 == 1) ? k * esp : k * esp + ref.duration;
        s = precess(s, echo_time - cursor);
        cursor = echo_time;
        out.echoes.push_back(s.mxy() * std::complex<double>(0.0, -1.0));
    }
    return out;
}

}  // namespace

EchoTrainResult simulate_echo_train(const PulseWaveform& excitation,
                                    const PulseWaveform& refocusing,
                                    const std::vector<double>& isochromats_hz,
                                    const EchoTrainOptions& options,
                                    const PhysicsConstants& constants, Exec exec) {
    if (isochromats_hz.empty())
        throw config_error("simulate_echo_train: no isochromats");
    if (options.n_echoes < 1)
        throw config_error("simulate_echo_train: n_echoes must be >= 1");
    const double esp = options.echo_spacing;
    // refocusing windows are [k*esp - esp/2, k*esp - esp/2 + T_ref]; the
    // excitation must end before the first one and each echo must clear the
    // next window.
    if (0.5 * esp < excitation.duration || 0.5 * esp <= refocusing.duration)
        throw config_error("simulate_echo_train: pulses overlap (echo_spacing too short)");

    const int n_iso = static_cast<int>(isochromats_hz.size());
    const int n_acq = options.phase_cycle ? 2 : 1;
    // acquisition 0: CPMG (refocusing about y); acquisition 1: about x
    const double phases[2] = {0.5 * M_PI, 0.0};

    std::vector<std::vector<IsoTrain>> acq(n_acq,
                                           std::vector<IsoTrain>(n_iso));
    for (int a = 0; a < n_acq; ++a) {
        if (exec == Exec::OpenMP) {
#pragma omp parallel for schedule(static)
            for (int i = 0; i < n_iso; ++i)
                acq[a][i] = run_train(excitation, refocusing, phases[a],
                                      isochromats_hz[i], options, constants);
        } else {
            for (int i = 0; i < n_iso; ++i)
                acq[a][i] = run_train(excitation, refocusing, phases[a],
                                      isochromats_hz[i], options, constants);
        }
    }

    EchoTrainResult res;
    const int ne = options.n_echoes;
    res.echo_by_iso.assign(ne, std::vector<std::complex<double>>(n_iso));
    res.echo_signal.assign(ne, {0.0, 0.0});
    res.echo_label.resize(ne);
    res.echo_time.resize(ne);
    for (int k = 0; k < ne; ++k) {
        const int n1 = k + 1;
        res.echo_label[k] = (n1 % 2 == 1) ? "FID" : "spectral";
        res.echo_time[k] =
            (n1 % 2 == 1) ? n1 * esp : n1 * esp + refocusing.duration;
        for (int i = 0; i < n_iso; ++i) {
            std::complex<double> v;
            if (options.phase_cycle) {
                // keeps the pathway refocused by every pulse; pathways with
                // opposite transfer parity cancel
                const double sign = (n1 % 2 == 0) ? 1.0 : -1.0;
                v = 0.5 * (acq[0][i].echoes[k] + sign * acq[1][i].echoes[k]);
            } else {
                v = acq[0][i].echoes[k];
            }
            res.echo_by_iso[k][i] = v;
            res.echo_signal[k] += v;
        }
    }

    if (options.phase_cycle) {
        res.acq_echo_signal.assign(2, std::vector<std::complex<double>>(ne, {0, 0}));
        res.acq_echo_by_iso.assign(
            2, std::vector<std::vector<std::complex<double>>>(
                   ne, std::vector<std::complex<double>>(n_iso)));
        for (int a = 0; a < 2; ++a)
            for (int k = 0; k < ne; ++k)
                for (int i = 0; i < n_iso; ++i) {
                    res.acq_echo_by_iso[a][k][i] = acq[a][i].echoes[k];
                    res.acq_echo_signal[a][k] += acq[a][i].echoes[k];
                }
    }
    return res;
}

void save_profile_fmap(const ProfileGrid& grid, const std::string& path,
                       const std::string& label) {
    const int no = static_cast<int>(grid.offsets_hz.size());
    const int nb = static_cast<int>(grid.b1_scales.size());
    const double d_off = no > 1 ? grid.offsets_hz[1] - grid.offsets_hz[0] : 1.0;
    const double d_b1 = nb > 1 ? grid.b1_scales[1] - grid.b1_scales[0] : 1.0;
    Grid3 g(no, 1, nb, d_off > 0 ? d_off : 1.0, 1.0, d_b1 > 0 ? d_b1 : 1.0,
            {no > 0 ? grid.offsets_hz[0] : 0.0, 0.0,
             nb > 0 ? grid.b1_scales[0] : 0.0});
    FieldMap m(g, grid.values, label);
    save_fmap(m, path);
}

}  // namespace pmri
