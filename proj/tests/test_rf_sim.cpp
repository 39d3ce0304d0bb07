#include "pmri/bloch.hpp"
#include "pmri/pulse.hpp"

#include <cmath>
#include <complex>
#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"

using namespace pmri;
using namespace pmri::testing;

namespace {

double rms_dev_from_linear(const std::vector<double>& x, std::vector<double> ph) {
    for (std::size_t i = 1; i < ph.size(); ++i) {
        while (ph[i] - ph[i - 1] > M_PI) ph[i] -= 2.0 * M_PI;
        while (ph[i] - ph[i - 1] < -M_PI) ph[i] += 2.0 * M_PI;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(ph.size());
    for (std::size_t i = 0; i < ph.size(); ++i) {
        sx += x[i];
        sy += ph[i];
        sxx += x[i] * x[i];
        sxy += x[i] * ph[i];
    }
    const double det = n * sxx - sx * sx;
    const double b = (n * sxy - sx * sy) / det;
    const double a = (sy - b * sx) / n;
    double ss = 0;
    for (std::size_t i = 0; i < ph.size(); ++i) {
        const double d = ph[i] - a - b * x[i];
        ss += d * d;
    }
    return std::sqrt(ss / n);
}

}  // namespace

TEST_CASE("WURST waveform shape") {
    const double T = 3.2e-3, bw = 1e5;
    const double peak = wurst_excitation_peak_b1(T, bw);
    const PulseWaveform p = make_wurst(T, bw, 40, peak, 5e-7);

    SUBCASE("envelope endpoints and midpoint") {
        CHECK(wurst_envelope(0.0, T, 40, peak) == 0.0);
        CHECK(wurst_envelope(T, T, 40, peak) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(wurst_envelope(0.5 * T, T, 40, peak) == doctest::Approx(peak));
        // sampled ends are tiny, center is full
        CHECK(std::abs(p.samples.front()) < 0.01 * peak);
        CHECK(std::abs(p.samples.back()) < 0.01 * peak);
        double max_amp = 0;
        for (auto& s : p.samples) max_amp = std::max(max_amp, std::abs(s));
        CHECK(max_amp == doctest::Approx(peak).epsilon(1e-6));
    }

    SUBCASE("instantaneous frequency sweeps linearly over the band") {
        auto inst_freq = [&](double t) {
            const double h = 1e-9;
            return (wurst_phase(t + h, T, bw) - wurst_phase(t - h, T, bw)) /
                   (2.0 * h * 2.0 * M_PI);
        };
        CHECK(inst_freq(0.5 * T) == doctest::Approx(0.0).epsilon(1e-6));
        CHECK(inst_freq(0.999 * T) == doctest::Approx(0.5 * bw).epsilon(2e-3));
        CHECK(inst_freq(0.001 * T) == doctest::Approx(-0.5 * bw).epsilon(2e-3));
        CHECK(p.sweep_rate() == doctest::Approx(bw / T));
    }

    SUBCASE("parameter validation") {
        CHECK_THROWS_AS(make_wurst(1e-3, bw, 40, peak, 2e-3), config_error);
        CHECK_THROWS_AS(make_wurst(-1.0, bw, 40, peak, 1e-6), config_error);
        CHECK_THROWS_AS(make_wurst(T, bw, 0, peak, 1e-6), config_error);
    }

    SUBCASE("CSV round trip") {
        const auto dir = std::filesystem::temp_directory_path() / "pmri_pulse";
        std::filesystem::create_directories(dir);
        const std::string path = (dir / "wurst.csv").string();
        save_pulse_csv(p, path);
        const PulseWaveform back = load_pulse_csv(path);
        REQUIRE(back.samples.size() == p.samples.size());
        CHECK(back.dt == doctest::Approx(p.dt).epsilon(1e-12));
        for (std::size_t i = 0; i < p.samples.size(); i += 97)
            CHECK(std::abs(back.samples[i] - p.samples[i]) < 1e-15);
    }
}

TEST_CASE("hard pulses and propagation") {
    SUBCASE("80 us pi/2 excites fully on resonance") {
        const PulseWaveform p = make_hard(80e-6, M_PI / 2.0, 1e-6);
        SpinState s;
        s = propagate(s, p);
        CHECK(std::abs(s.mxy()) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::abs(s.magnetization.z) < 1e-9);
    }

    SUBCASE("zero flip is the identity") {
        const PulseWaveform p = make_hard(80e-6, 0.0, 1e-6);
        CHECK(p.peak_b1 == 0.0);
        SpinState s;
        s.off_resonance = 1234.0;
        const SpinState out = propagate(s, p);
        CHECK(out.magnetization.x == s.magnetization.x);
        CHECK(out.magnetization.z == s.magnetization.z);
    }

    SUBCASE("160 us pi inverts") {
        const PulseWaveform p = make_hard(160e-6, M_PI, 1e-6);
        SpinState s;
        s = propagate(s, p);
        CHECK(s.magnetization.z == doctest::Approx(-1.0).epsilon(1e-9));
    }

    SUBCASE("non-finite sample is an error") {
        PulseWaveform p = make_hard(10e-6, M_PI, 1e-6);
        p.samples[3] = {std::nan(""), 0.0};
        SpinState s;
        CHECK_THROWS_AS(propagate(s, p), numeric_error);
    }
}

TEST_CASE("propagation properties") {
    const PulseWaveform wurst =
        make_wurst(1.6e-3, 1e5, 40, wurst_refocusing_peak_b1(1.6e-3, 1e5), 5e-7);

    SUBCASE("norm preservation within 1e-9") {
        for (double off : {-30e3, 0.0, 17e3}) {
            SpinState s;
            s.off_resonance = off;
            s.magnetization = {0.6, -0.64, 0.48};
            const double n0 = s.magnetization.norm();
            const SpinState out = propagate(s, wurst);
            CHECK(std::abs(out.magnetization.norm() - n0) < 1e-9);
        }
    }

    SUBCASE("propagating halves equals propagating the whole pulse") {
        PulseWaveform first = wurst, second = wurst;
        const std::size_t half = wurst.samples.size() / 2;
        first.samples.assign(wurst.samples.begin(), wurst.samples.begin() + half);
        first.duration = first.samples.size() * first.dt;
        second.samples.assign(wurst.samples.begin() + half, wurst.samples.end());
        second.duration = second.samples.size() * second.dt;

        SpinState s;
        s.off_resonance = 12e3;
        const SpinState whole = propagate(s, wurst);
        const SpinState split = propagate(propagate(s, first), second);
        CHECK(std::abs(whole.magnetization.x - split.magnetization.x) < 1e-9);
        CHECK(std::abs(whole.magnetization.y - split.magnetization.y) < 1e-9);
        CHECK(std::abs(whole.magnetization.z - split.magnetization.z) < 1e-9);
    }

    SUBCASE("time-reversed negated-phase pulse undoes the pulse at resonance") {
        // reversed sample order with a pi phase shift inverts each rotation
        PulseWaveform reversed = wurst;
        std::reverse(reversed.samples.begin(), reversed.samples.end());
        for (auto& v : reversed.samples) v = -v;
        SpinState s;
        s.magnetization = {0.0, 0.8, 0.6};
        const SpinState there = propagate(s, wurst);
        const SpinState back = propagate(there, reversed);
        CHECK(std::abs(back.magnetization.x - s.magnetization.x) < 1e-7);
        CHECK(std::abs(back.magnetization.y - s.magnetization.y) < 1e-7);
        CHECK(std::abs(back.magnetization.z - s.magnetization.z) < 1e-7);
    }

    SUBCASE("matches the brute-force fine-step reference to 1e-6") {
        for (double off : {-25e3, 5e3, 40e3}) {
            SpinState s;
            s.off_resonance = off;
            s.b1_scale = 1.1;
            const SpinState fast = propagate(s, wurst);
            const Vec3 slow =
                reference_propagate({0, 0, 1}, wurst, off, 1.1, 100);
            CHECK(std::abs(fast.magnetization.x - slow.x) < 1e-6);
            CHECK(std::abs(fast.magnetization.y - slow.y) < 1e-6);
            CHECK(std::abs(fast.magnetization.z - slow.z) < 1e-6);
        }
    }

    SUBCASE("zero pulse leaves the state unchanged") {
        PulseWaveform p = make_hard(10e-6, 0.0, 1e-6);
        SpinState s;
        s.magnetization = {0.3, 0.4, 0.5};
        s.off_resonance = 0.0;
        const SpinState out = propagate(s, p);
        CHECK(out.magnetization.x == s.magnetization.x);
        CHECK(out.magnetization.y == s.magnetization.y);
        CHECK(out.magnetization.z == s.magnetization.z);
    }
}

TEST_CASE("excitation profiles") {
    SUBCASE("WURST covers the scanner ROI bandwidth at 0.9") {
        const PulseWaveform p =
            make_wurst(3.2e-3, 1e5, 40, wurst_excitation_peak_b1(3.2e-3, 1e5), 5e-7);
        std::vector<double> offs;
        for (double o = -40e3; o <= 40e3; o += 2.5e3) offs.push_back(o);
        const ProfileGrid prof = excitation_profile(p, {1.0}, offs);
        for (std::size_t io = 0; io < offs.size(); ++io)
            CHECK(prof.at(0, io) >= 0.9);
        // the band edge sits just outside +-41 kHz: the sweep-edge taper
        // rolls the profile off before +-45 kHz at any amplitude
        const ProfileGrid edge = excitation_profile(p, {1.0}, {-45e3, 45e3});
        CHECK(edge.at(0, 0) < 0.9);
        CHECK(edge.at(0, 1) < 0.9);
    }

    SUBCASE("hard 80 us pulse: 0.9 band half-width below 5 kHz") {
        const PulseWaveform p = make_hard(80e-6, M_PI / 2.0, 1e-6);
        std::vector<double> offs;
        for (double o = 0; o <= 8e3; o += 100.0) offs.push_back(o);
        const ProfileGrid prof = excitation_profile(p, {1.0}, offs);
        double half_width = 0.0;
        for (std::size_t io = 0; io < offs.size(); ++io)
            if (prof.at(0, io) >= 0.9) half_width = offs[io];
        CHECK(half_width <= 5e3);
        CHECK(half_width >= 1e3);  // the expected few-kHz order of magnitude
    }

    SUBCASE("hard-pulse profile is even in off-resonance") {
        const PulseWaveform p = make_hard(80e-6, M_PI / 2.0, 1e-6);
        std::vector<double> offs;
        for (double o = -6e3; o <= 6e3; o += 1.5e3) offs.push_back(o);
        const ProfileGrid prof = excitation_profile(p, {1.0}, offs);
        const std::size_t n = offs.size();
        for (std::size_t io = 0; io < n; ++io)
            CHECK(prof.at(0, io) == doctest::Approx(prof.at(0, n - 1 - io)).epsilon(1e-9));
    }

    SUBCASE("zero-amplitude pulse excites nothing") {
        const PulseWaveform p = make_hard(80e-6, 0.0, 1e-6);
        const ProfileGrid prof = excitation_profile(p, {0.5, 1.0}, {-1e3, 0.0, 1e3});
        for (double v : prof.values) CHECK(v == 0.0);
    }

    SUBCASE("serial equals OpenMP") {
        const PulseWaveform p = make_hard(80e-6, M_PI / 2.0, 1e-6);
        std::vector<double> offs{-2e3, 0.0, 3e3};
        const ProfileGrid a = excitation_profile(p, {0.9, 1.0}, offs, PhysicsConstants(), Exec::OpenMP);
        const ProfileGrid b = excitation_profile(p, {0.9, 1.0}, offs, PhysicsConstants(), Exec::Serial);
        CHECK(a.values == b.values);
    }
}

TEST_CASE("refocusing profiles") {
    SUBCASE("near-instantaneous pi refocuses fully at all offsets") {
        const PulseWaveform p = make_hard(1e-6, M_PI, 1e-7);
        std::vector<double> offs{-40e3, -15e3, 0.0, 22e3, 40e3};
        const ProfileGrid prof = refocusing_profile(p, {1.0}, offs);
        for (std::size_t io = 0; io < offs.size(); ++io)
            CHECK(prof.at(0, io) == doctest::Approx(1.0).epsilon(0.01));
    }

    SUBCASE("WURST refocusing is insensitive to +30% B1 across the band") {
        const PulseWaveform p =
            make_wurst(1.6e-3, 1e5, 40, wurst_refocusing_peak_b1(1.6e-3, 1e5), 5e-7);
        std::vector<double> offs;
        for (double o = -40e3; o <= 40e3; o += 4e3) offs.push_back(o);
        const ProfileGrid prof = refocusing_profile(p, {1.0, 1.3}, offs);
        for (std::size_t io = 0; io < offs.size(); ++io) {
            CHECK(prof.at(0, io) >= 0.9);
            CHECK(std::abs(prof.at(1, io) - prof.at(0, io)) <= 0.2 * prof.at(0, io));
        }
    }

    SUBCASE("hard 160 us refocusing dies beyond 4 kHz") {
        const PulseWaveform p = make_hard(160e-6, M_PI, 1e-6);
        std::vector<double> offs;
        for (double o = 4e3; o <= 12e3; o += 500.0) offs.push_back(o);
        const ProfileGrid prof = refocusing_profile(p, {1.0}, offs);
        for (std::size_t io = 0; io < offs.size(); ++io)
            CHECK(prof.at(0, io) < 0.5);
    }
}

TEST_CASE("echo train") {
    const double dt = 5e-7;
    const PulseWaveform exc =
        make_wurst(3.2e-3, 1e5, 40, wurst_excitation_peak_b1(3.2e-3, 1e5), dt);
    const PulseWaveform ref =
        make_wurst(1.6e-3, 1e5, 40, wurst_refocusing_peak_b1(1.6e-3, 1e5), dt);

    SUBCASE("on-resonance ideal pulses give unit echoes at zero phase") {
        const PulseWaveform exc_i = make_hard(2e-6, M_PI / 2.0, 2e-7);
        const PulseWaveform ref_i = make_hard(2e-6, M_PI, 2e-7);
        EchoTrainOptions opt;
        opt.n_echoes = 6;
        opt.echo_spacing = 1e-3;
        const EchoTrainResult res = simulate_echo_train(exc_i, ref_i, {0.0}, opt);
        for (int k = 0; k < 6; ++k) {
            CHECK(std::abs(res.echo_signal[k]) == doctest::Approx(1.0).epsilon(1e-6));
            CHECK(std::abs(std::arg(res.echo_signal[k])) < 1e-6);
        }
    }

    SUBCASE("labels alternate FID/spectral and times are bookkept") {
        EchoTrainOptions opt;
        opt.n_echoes = 4;
        opt.echo_spacing = 8e-3;
        const EchoTrainResult res = simulate_echo_train(exc, ref, {0.0, 5e3}, opt);
        CHECK(res.echo_label[0] == "FID");
        CHECK(res.echo_label[1] == "spectral");
        CHECK(res.echo_label[2] == "FID");
        CHECK(res.echo_time[0] == doctest::Approx(8e-3));
        CHECK(res.echo_time[1] == doctest::Approx(16e-3 + ref.duration));
        CHECK(res.echo_time[2] == doctest::Approx(24e-3));
    }

    SUBCASE("overlapping pulses are a timing error") {
        EchoTrainOptions opt;
        opt.n_echoes = 2;
        opt.echo_spacing = 5e-3;  // < 2x excitation duration
        CHECK_THROWS_AS(simulate_echo_train(exc, ref, {0.0}, opt), config_error);
    }

    SUBCASE("quadratic phase cancels on odd echoes, survives on even") {
        std::vector<double> isos;
        for (double off = -40e3; off <= 40e3; off += 2.5e3) isos.push_back(off);
        EchoTrainOptions opt;
        opt.n_echoes = 4;
        opt.echo_spacing = 8e-3;
        const EchoTrainResult res = simulate_echo_train(exc, ref, isos, opt);

        auto phase_dev = [&](int echo) {
            std::vector<double> ph(isos.size());
            for (std::size_t i = 0; i < isos.size(); ++i)
                ph[i] = std::arg(res.echo_by_iso[echo][i]);
            return rms_dev_from_linear(isos, ph);
        };
        // the 2x-rate refocusing cancels the ~160 rad sweep quadratic down
        // to the finite-power/sweep-edge residual on odd echoes; evens keep
        // a phase spread of order radians (only their wrap survives a fit)
        CHECK(phase_dev(0) < 1.5);
        CHECK(phase_dev(1) >= 1.0);
        CHECK(phase_dev(3) >= 1.0);
        CHECK(phase_dev(0) < phase_dev(1));
        // odd echoes sum coherently across the band, evens spread out in
        // time (spectral) and largely cancel at the sampling instant
        const double n_iso = static_cast<double>(isos.size());
        CHECK(std::abs(res.echo_signal[0]) > 0.5 * n_iso);
        CHECK(std::abs(res.echo_signal[2]) > 0.5 * n_iso);
        CHECK(std::abs(res.echo_signal[1]) < n_iso / 3.0);
        CHECK(std::abs(res.echo_signal[3]) < n_iso / 3.0);
        CHECK(std::abs(res.echo_signal[0]) > 3.0 * std::abs(res.echo_signal[1]));
    }

    SUBCASE("phase cycling removes the opposite-parity pathway") {
        std::vector<double> isos;
        for (double off = -40e3; off <= 40e3; off += 5e3) isos.push_back(off);
        EchoTrainOptions opt;
        opt.n_echoes = 4;
        opt.echo_spacing = 8e-3;
        opt.b1_scale = 1.1;  // 10% flip-angle error mixes the pathways
        opt.phase_cycle = true;
        const EchoTrainResult res = simulate_echo_train(exc, ref, isos, opt);
        REQUIRE(res.acq_echo_by_iso.size() == 2);

        double e_unwanted = 0.0, e_signal = 0.0, e_combined_unwanted = 0.0;
        for (int k = 0; k < opt.n_echoes; ++k) {
            const double sign = ((k + 1) % 2 == 0) ? 1.0 : -1.0;
            for (std::size_t i = 0; i < isos.size(); ++i) {
                const auto q = 0.5 * (res.acq_echo_by_iso[0][k][i] -
                                      sign * res.acq_echo_by_iso[1][k][i]);
                const auto c = 0.5 * (res.acq_echo_by_iso[0][k][i] +
                                      sign * res.acq_echo_by_iso[1][k][i]);
                e_unwanted += std::norm(q);
                e_signal += std::norm(res.acq_echo_by_iso[0][k][i]);
                // combined output must equal the kept pathway: what remains
                // beyond it is the surviving contamination
                e_combined_unwanted += std::norm(res.echo_by_iso[k][i] - c);
            }
        }
        CHECK(e_unwanted > 1e-3 * e_signal);  // mixing is real at 10% error
        CHECK(e_combined_unwanted <= 0.1 * e_unwanted);  // >= 10x suppression
    }
}
