#include "pmri/sequence.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace pmri {

const char* contrast_name(Contrast c) {
    switch (c) {
        case Contrast::PD: return "PD";
        case Contrast::T1: return "T1";
        default: return "T2";
    }
}

Contrast contrast_from_name(const std::string& name) {
    if (name == "PD" || name == "pd") return Contrast::PD;
    if (name == "T1" || name == "t1") return Contrast::T1;
    if (name == "T2" || name == "t2") return Contrast::T2;
    throw config_error("unknown contrast '" + name + "' (expected PD, T1 or T2)");
}

std::string AcquisitionProtocol::serialize() const {
    char buf[64];
    std::ostringstream ss;
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    ss << "protocol pmri.acq.v1\n"
       << "contrast " << contrast_name(contrast) << "\n"
       << "tr " << num(tr) << "\n"
       << "te_eff " << num(te_eff) << "\n";
    if (ti) ss << "ti " << num(*ti) << "\n";
    ss << "echo_train_length " << echo_train_length << "\n"
       << "n_shots " << n_shots << "\n"
       << "echo_spacing " << num(echo_spacing) << "\n"
       << "n_readout " << n_readout << "\n"
       << "dwell " << num(dwell) << "\n"
       << "tau " << num(tau) << "\n"
       << "averages " << averages << "\n"
       << "gy_peak " << num(gy_peak) << "\n"
       << "gz_peak " << num(gz_peak) << "\n";
    return ss.str();
}

AcquisitionProtocol AcquisitionProtocol::deserialize(const std::string& text) {
    AcquisitionProtocol p;
    std::istringstream in(text);
    std::string line, key;
    bool saw_magic = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        ss >> key;
        if (key == "protocol") {
            std::string magic;
            ss >> magic;
            if (magic != "pmri.acq.v1")
                throw io_error("protocol: unsupported format '" + magic + "'");
            saw_magic = true;
        } else if (key == "contrast") {
            std::string c;
            ss >> c;
            p.contrast = contrast_from_name(c);
        } else if (key == "tr") ss >> p.tr;
        else if (key == "te_eff") ss >> p.te_eff;
        else if (key == "ti") { double v; ss >> v; p.ti = v; }
        else if (key == "echo_train_length") ss >> p.echo_train_length;
        else if (key == "n_shots") ss >> p.n_shots;
        else if (key == "echo_spacing") ss >> p.echo_spacing;
        else if (key == "n_readout") ss >> p.n_readout;
        else if (key == "dwell") ss >> p.dwell;
        else if (key == "tau") ss >> p.tau;
        else if (key == "averages") ss >> p.averages;
        else if (key == "gy_peak") ss >> p.gy_peak;
        else if (key == "gz_peak") ss >> p.gz_peak;
        else throw io_error("protocol: unknown key '" + key + "'");
        if (ss.fail()) throw io_error("protocol: malformed value for '" + key + "'");
    }
    if (!saw_magic) throw io_error("protocol: missing format line");
    return p;
}

std::string PhaseEncodeTable::to_csv() const {
    std::ostringstream ss;
    ss << "shot,echo,y_index,z_index,l_y,l_z\n";
    for (std::size_t s = 0; s < z_order.size(); ++s)
        for (std::size_t e = 0; e < y_order.size(); ++e)
            ss << s << "," << e << "," << y_order[e] << "," << z_order[s] << ","
               << l_y(static_cast<int>(e)) << "," << l_z(static_cast<int>(s)) << "\n";
    return ss.str();
}

namespace {

// 0, +1, -1, +2, -2, ... truncated to {-floor(N/2) .. ceil(N/2)-1}
std::vector<int> center_out_order(int n) {
    const int lo = -(n / 2), hi = (n + 1) / 2 - 1;
    std::vector<int> order;
    order.reserve(n);
    order.push_back(0);
    for (int step = 1; static_cast<int>(order.size()) < n; ++step) {
        if (step <= hi) order.push_back(step);
        if (-step >= lo && static_cast<int>(order.size()) < n) order.push_back(-step);
    }
    return order;
}

std::vector<int> sequential_order(int n) {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i - n / 2;
    return order;
}

}  // namespace

Protocol build_protocol(Contrast contrast, int n_x, int n_y, int n_z,
                        const AcquisitionProtocol& timing) {
    if (n_x < 1 || n_y < 1 || n_z < 1)
        throw config_error("build_protocol: matrix dimensions must be >= 1");
    if (!(timing.echo_spacing > 0.0) || !(timing.dwell > 0.0) ||
        !(timing.tau > 0.0) || !(timing.tr > 0.0))
        throw config_error("build_protocol: timing parameters must be positive");
    if (timing.n_readout < 1)
        throw config_error("build_protocol: n_readout must be >= 1");

    Protocol out;
    out.acq = timing;
    out.acq.contrast = contrast;
    out.acq.echo_train_length = n_y;
    out.acq.n_shots = n_z;
    out.acq.n_readout = n_x;

    PhaseEncodeTable& t = out.table;
    t.z_order = sequential_order(n_z);

    int k0_pos = 0;  // echo index carrying the y k-space center
    switch (contrast) {
        case Contrast::PD:
        case Contrast::T1: {
            t.y_order = center_out_order(n_y);
            k0_pos = 0;
            if (contrast == Contrast::T1 && !timing.ti)
                throw config_error("build_protocol: T1 contrast requires ti");
            break;
        }
        case Contrast::T2: {
            // k_y advances linearly down the train and crosses zero on the
            // echo matching the requested te_eff.
            const double pos_real = timing.te_eff / timing.echo_spacing - 1.0;
            k0_pos = static_cast<int>(std::lround(pos_real));
            const double attained = (k0_pos + 1) * timing.echo_spacing;
            if (k0_pos < 0 || k0_pos >= n_y ||
                std::abs(attained - timing.te_eff) > 0.5 * timing.echo_spacing + 1e-12) {
                std::ostringstream msg;
                msg << "build_protocol: te_eff " << timing.te_eff
                    << " s not attainable with echo_spacing " << timing.echo_spacing
                    << " s and " << n_y << " echoes; attainable:";
                for (int e = 0; e < n_y; ++e) msg << " " << (e + 1) * timing.echo_spacing;
                throw config_error(msg.str());
            }
            t.y_order.resize(n_y);
            const int lo = -(n_y / 2), hi = (n_y + 1) / 2 - 1;
            for (int e = 0; e < n_y; ++e) {
                int idx = e - k0_pos;
                // wrap indices that fall outside the symmetric set
                while (idx > hi) idx -= n_y;
                while (idx < lo) idx += n_y;
                t.y_order[e] = idx;
            }
            break;
        }
    }

    out.acq.te_eff = (k0_pos + 1) * out.acq.echo_spacing;

    t.y_max_index = 0;
    for (int v : t.y_order) t.y_max_index = std::max(t.y_max_index, std::abs(v));
    t.z_max_index = 0;
    for (int v : t.z_order) t.z_max_index = std::max(t.z_max_index, std::abs(v));
    return out;
}

Vec3 estimate_resolution(const LinearFit& fit_x, const Protocol& protocol,
                         const LinearFit& fit_y, const LinearFit& fit_z,
                         const PhysicsConstants& constants) {
    const double gamma = constants.gamma();
    const double gx = std::abs(fit_x.g.x);
    if (gx == 0.0)
        throw singularity_error("estimate_resolution: zero readout gradient");
    const double t_read = protocol.acq.readout_window();
    const double res_x = 1.0 / (gamma * gx * t_read);

    auto phase_res = [&](double g_peak, int n, int max_index, const char* ax) {
        if (max_index == 0)
            throw singularity_error(std::string("estimate_resolution: zero max encode index on ") + ax);
        if (g_peak == 0.0)
            throw singularity_error(std::string("estimate_resolution: zero gradient on ") + ax);
        // adjacent-index k step is gamma*g_peak*tau/max_index; resolution is FOV/N
        return max_index / (n * gamma * std::abs(g_peak) * protocol.acq.tau);
    };

    const double res_y = phase_res(fit_y.g.y, protocol.acq.echo_train_length,
                                   protocol.table.y_max_index, "y");
    const double res_z = phase_res(fit_z.g.z, protocol.acq.n_shots,
                                   protocol.table.z_max_index, "z");
    return {res_x, res_y, res_z};
}

}  // namespace pmri
