#include "pmri/pulse.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "pmri/io_util.hpp"

namespace pmri {

PulseWaveform PulseWaveform::with_phase(double phase_rad) const {
    PulseWaveform out = *this;
    const std::complex<double> f(std::cos(phase_rad), std::sin(phase_rad));
    for (auto& s : out.samples) s *= f;
    return out;
}

double wurst_envelope(double t, double duration, int order, double peak_b1) {
    const double c = std::abs(std::cos(M_PI * t / duration));
    return peak_b1 * (1.0 - std::pow(c, order));
}

double wurst_phase(double t, double duration, double sweep_bw) {
    // instantaneous frequency f(t) = sweep_bw * (t/T - 1/2)
    return M_PI * sweep_bw * (t * t / duration - t);
}

PulseWaveform make_wurst(double duration, double sweep_bw, int order,
                         double peak_b1, double dt) {
    if (!(duration > 0.0) || !(dt > 0.0) || !(sweep_bw > 0.0))
        throw config_error("make_wurst: duration, dt and sweep_bw must be positive");
    if (order < 1) throw config_error("make_wurst: order must be >= 1");
    if (dt > duration) throw config_error("make_wurst: dt exceeds duration");

    PulseWaveform p;
    p.kind = PulseKind::Wurst;
    p.sweep_bw = sweep_bw;
    p.envelope_order = order;
    p.peak_b1 = peak_b1;
    const int n = std::max(1, static_cast<int>(std::lround(duration / dt)));
    p.dt = dt;
    p.duration = n * dt;
    p.samples.resize(n);
    for (int i = 0; i < n; ++i) {
        const double t = (i + 0.5) * dt;
        const double a = wurst_envelope(t, p.duration, order, peak_b1);
        const double ph = wurst_phase(t, p.duration, sweep_bw);
        p.samples[i] = {a * std::cos(ph), a * std::sin(ph)};
    }
    return p;
}

PulseWaveform make_hard(double duration, double flip_target, double dt,
                        const PhysicsConstants& constants) {
    if (!(duration > 0.0) || !(dt > 0.0))
        throw config_error("make_hard: duration and dt must be positive");
    if (dt > duration) throw config_error("make_hard: dt exceeds duration");
    PulseWaveform p;
    p.kind = PulseKind::Hard;
    const int n = std::max(1, static_cast<int>(std::lround(duration / dt)));
    p.dt = dt;
    p.duration = n * dt;
    const double b1 = flip_target / (2.0 * M_PI * constants.gamma() * p.duration);
    p.peak_b1 = b1;
    p.samples.assign(n, {b1, 0.0});
    return p;
}

double wurst_excitation_peak_b1(double duration, double sweep_bw,
                                const PhysicsConstants& constants) {
    // 90-degree condition for a swept passage: w1 * sqrt(2 pi / R) = pi/2
    // with R the sweep rate in rad/s^2. Empirically this sits near the
    // optimum of |Mxy| for WURST orders >= 10.
    const double rate = 2.0 * M_PI * sweep_bw / duration;
    const double w1 = 0.5 * M_PI * std::sqrt(rate / (2.0 * M_PI));
    return w1 / (2.0 * M_PI * constants.gamma());
}

double wurst_refocusing_peak_b1(double duration, double sweep_bw,
                                const PhysicsConstants& constants) {
    // adiabaticity w1^2 / R = 5 at the sweep center
    const double rate = 2.0 * M_PI * sweep_bw / duration;
    const double w1 = std::sqrt(5.0 * rate);
    return w1 / (2.0 * M_PI * constants.gamma());
}

void save_pulse_csv(const PulseWaveform& pulse, const std::string& path) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "t,b1_re,b1_im\n";
    for (std::size_t i = 0; i < pulse.samples.size(); ++i)
        ss << (i + 0.5) * pulse.dt << "," << pulse.samples[i].real() << ","
           << pulse.samples[i].imag() << "\n";
    write_text_file(path, ss.str());
}

PulseWaveform load_pulse_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("load_pulse_csv: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("t,b1_re,b1_im", 0) != 0)
        throw io_error("load_pulse_csv: missing header in " + path);
    PulseWaveform p;
    std::vector<double> times;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        double t, re, im;
        char c1, c2;
        ss >> t >> c1 >> re >> c2 >> im;
        if (ss.fail() || c1 != ',' || c2 != ',')
            throw io_error("load_pulse_csv: malformed row '" + line + "'");
        times.push_back(t);
        p.samples.push_back({re, im});
    }
    if (p.samples.size() < 1) throw io_error("load_pulse_csv: no samples in " + path);
    p.dt = times.size() > 1 ? times[1] - times[0] : 2.0 * times[0];
    if (!(p.dt > 0)) throw io_error("load_pulse_csv: non-increasing time column");
    p.duration = p.samples.size() * p.dt;
    double peak = 0.0;
    for (auto& s : p.samples) peak = std::max(peak, std::abs(s));
    p.peak_b1 = peak;
    return p;
}

}  // namespace pmri
