#include "pmri/encode.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pmri/io_util.hpp"
#include "pmri/rng.hpp"

namespace pmri {

EncodeOperator::EncodeOperator(const FieldMap& gx, const FieldMap& gz,
                               const PhaseEncodeTable& table,
                               const AcquisitionProtocol& acq,
                               PhysicsConstants constants,
                               std::vector<double> pixel_weights) {
    if (!gx.grid.same_layout(gz.grid))
        throw config_error("EncodeOperator: Gx and Gz grids differ");
    gx.validate_finite();
    gz.validate_finite();
    grid_ = gx.grid;
    n_pix_ = static_cast<int>(grid_.size());
    n_enc_ = static_cast<int>(table.z_order.size());
    n_t_ = acq.n_readout;
    if (n_enc_ < 1 || n_t_ < 1)
        throw config_error("EncodeOperator: empty encode table or readout");
    if (!pixel_weights.empty() &&
        pixel_weights.size() != static_cast<std::size_t>(n_pix_))
        throw config_error("EncodeOperator: pixel weight count mismatch");

    const double two_pi_gamma = 2.0 * M_PI * constants.gamma();
    ex_re_.resize(static_cast<std::size_t>(n_pix_) * n_t_);
    ex_im_.resize(ex_re_.size());
    ez_re_.resize(static_cast<std::size_t>(n_pix_) * n_enc_);
    ez_im_.resize(ez_re_.size());

#pragma omp parallel for schedule(static)
    for (int p = 0; p < n_pix_; ++p) {
        const double wx = -two_pi_gamma * gx.values[p];
        double* xr = &ex_re_[static_cast<std::size_t>(p) * n_t_];
        double* xi = &ex_im_[static_cast<std::size_t>(p) * n_t_];
        for (int it = 0; it < n_t_; ++it) {
            const double ph = wx * acq.sample_time(it);
            xr[it] = std::cos(ph);
            xi[it] = std::sin(ph);
        }
        const double w = pixel_weights.empty() ? 1.0 : pixel_weights[p];
        const double wz = -two_pi_gamma * gz.values[p] * acq.tau;
        double* zr = &ez_re_[static_cast<std::size_t>(p) * n_enc_];
        double* zi = &ez_im_[static_cast<std::size_t>(p) * n_enc_];
        for (int n = 0; n < n_enc_; ++n) {
            const double ph = wz * table.l_z(n);
            zr[n] = w * std::cos(ph);
            zi[n] = w * std::sin(ph);
        }
    }
}

std::vector<cplx> EncodeOperator::forward(std::span<const cplx> image,
                                          Exec exec) const {
    if (image.size() != static_cast<std::size_t>(n_pix_))
        throw config_error("EncodeOperator::forward: image size mismatch");
    std::vector<cplx> out(n_samples_total());

    auto encode_row = [&](int n) {
        std::vector<double> acc_re(n_t_, 0.0), acc_im(n_t_, 0.0);
        for (int p = 0; p < n_pix_; ++p) {
            const std::size_t zp = static_cast<std::size_t>(p) * n_enc_ + n;
            const double mr = image[p].real(), mi = image[p].imag();
            const double cr = ez_re_[zp] * mr - ez_im_[zp] * mi;
            const double ci = ez_re_[zp] * mi + ez_im_[zp] * mr;
            if (cr == 0.0 && ci == 0.0) continue;
            const double* xr = &ex_re_[static_cast<std::size_t>(p) * n_t_];
            const double* xi = &ex_im_[static_cast<std::size_t>(p) * n_t_];
            for (int it = 0; it < n_t_; ++it) {
                acc_re[it] += cr * xr[it] - ci * xi[it];
                acc_im[it] += cr * xi[it] + ci * xr[it];
            }
        }
        cplx* row = &out[static_cast<std::size_t>(n) * n_t_];
        for (int it = 0; it < n_t_; ++it) row[it] = {acc_re[it], acc_im[it]};
    };

    if (exec == Exec::OpenMP) {
#pragma omp parallel for schedule(static)
        for (int n = 0; n < n_enc_; ++n) encode_row(n);
    } else {
        for (int n = 0; n < n_enc_; ++n) encode_row(n);
    }
    return out;
}

std::vector<cplx> EncodeOperator::adjoint(std::span<const cplx> data,
                                          Exec exec) const {
    if (data.size() != n_samples_total())
        throw config_error("EncodeOperator::adjoint: data size mismatch");
    std::vector<cplx> out(n_pix_);

    auto pixel_sum = [&](int p) {
        const double* xr = &ex_re_[static_cast<std::size_t>(p) * n_t_];
        const double* xi = &ex_im_[static_cast<std::size_t>(p) * n_t_];
        const double* zr = &ez_re_[static_cast<std::size_t>(p) * n_enc_];
        const double* zi = &ez_im_[static_cast<std::size_t>(p) * n_enc_];
        double or_ = 0.0, oi_ = 0.0;
        for (int n = 0; n < n_enc_; ++n) {
            const cplx* row = &data[static_cast<std::size_t>(n) * n_t_];
            double dr = 0.0, di = 0.0;  // conj(Ex) . data row
            for (int it = 0; it < n_t_; ++it) {
                const double sr = row[it].real(), si = row[it].imag();
                dr += xr[it] * sr + xi[it] * si;
                di += xr[it] * si - xi[it] * sr;
            }
            or_ += zr[n] * dr + zi[n] * di;
            oi_ += zr[n] * di - zi[n] * dr;
        }
        out[p] = {or_, oi_};
    };

    if (exec == Exec::OpenMP) {
#pragma omp parallel for schedule(static)
        for (int p = 0; p < n_pix_; ++p) pixel_sum(p);
    } else {
        for (int p = 0; p < n_pix_; ++p) pixel_sum(p);
    }
    return out;
}

std::vector<double> EncodeOperator::normal_diag() const {
    std::vector<double> diag(n_pix_);
#pragma omp parallel for schedule(static)
    for (int p = 0; p < n_pix_; ++p) {
        const double* xr = &ex_re_[static_cast<std::size_t>(p) * n_t_];
        const double* xi = &ex_im_[static_cast<std::size_t>(p) * n_t_];
        double sx = 0.0;
        for (int it = 0; it < n_t_; ++it) sx += xr[it] * xr[it] + xi[it] * xi[it];
        const double* zr = &ez_re_[static_cast<std::size_t>(p) * n_enc_];
        const double* zi = &ez_im_[static_cast<std::size_t>(p) * n_enc_];
        double sz = 0.0;
        for (int n = 0; n < n_enc_; ++n) sz += zr[n] * zr[n] + zi[n] * zi[n];
        diag[p] = sx * sz;
    }
    return diag;
}

SignalData simulate_3d(const Phantom& phantom, const FieldMap& gx,
                       const FieldMap& gz, const Protocol& protocol,
                       PhysicsConstants constants, Exec exec) {
    const Grid3& pg = phantom.grid;
    const bool shared_slice = (gx.grid.ny == 1 && pg.ny >= 1);
    if (!shared_slice && gx.grid.ny != pg.ny)
        throw config_error("simulate_3d: Gx map y layout does not match phantom");
    if (!gx.grid.same_layout(gz.grid))
        throw config_error("simulate_3d: Gx and Gz grids differ");
    if (gx.grid.nx != pg.nx || gx.grid.nz != pg.nz)
        throw config_error("simulate_3d: map slice shape does not match phantom");

    const AcquisitionProtocol& acq = protocol.acq;
    const PhaseEncodeTable& table = protocol.table;
    const int n_y = acq.echo_train_length;
    if (static_cast<int>(table.y_order.size()) != n_y ||
        static_cast<int>(table.z_order.size()) != acq.n_shots)
        throw config_error("simulate_3d: encode table does not match protocol");
    if (pg.ny != n_y)
        throw config_error("simulate_3d: phantom has " + std::to_string(pg.ny) +
                           " y slabs, protocol encodes " + std::to_string(n_y));

    SignalData out;
    out.n_shots = acq.n_shots;
    out.n_echoes = n_y;
    out.n_samples = acq.n_readout;
    out.dwell = acq.dwell;
    out.protocol_hash = fnv1a_hex(acq.serialize() + table.to_csv());
    out.samples.assign(out.size(), cplx(0, 0));

    const double two_pi_gamma = 2.0 * M_PI * constants.gamma();

    // One 2D encode per y slab, then the slab's y-blip phase fans it out
    // over the echo index.
    for (int j = 0; j < pg.ny; ++j) {
        const double y_j = pg.origin.y + j * pg.dy;
        Grid3 slice_grid(pg.nx, 1, pg.nz, pg.dx, pg.dy, pg.dz,
                         {pg.origin.x, y_j, pg.origin.z});
        std::vector<cplx> slab(slice_grid.size());
        bool nonzero = false;
        for (int k = 0; k < pg.nz; ++k)
            for (int i = 0; i < pg.nx; ++i) {
                const double v = phantom.at(i, j, k);
                slab[slice_grid.index(i, 0, k)] = v;
                nonzero |= (v != 0.0);
            }
        if (!nonzero) continue;

        FieldMap gx_slice(slice_grid, gx.label), gz_slice(slice_grid, gz.label);
        const int map_j = shared_slice ? 0 : j;
        for (int k = 0; k < pg.nz; ++k)
            for (int i = 0; i < pg.nx; ++i) {
                gx_slice.at(i, 0, k) = gx.at(i, map_j, k);
                gz_slice.at(i, 0, k) = gz.at(i, map_j, k);
            }

        EncodeOperator op(gx_slice, gz_slice, table, acq, constants);
        const std::vector<cplx> s2d = op.forward(slab, exec);

        for (int e = 0; e < n_y; ++e) {
            const double ph = -two_pi_gamma * table.l_y(e) * acq.gy_peak * y_j * acq.tau;
            const cplx f(std::cos(ph), std::sin(ph));
            for (int n = 0; n < acq.n_shots; ++n) {
                const cplx* src = &s2d[static_cast<std::size_t>(n) * acq.n_readout];
                cplx* dst = &out.samples[out.index(n, e, 0)];
                for (int it = 0; it < acq.n_readout; ++it) dst[it] += f * src[it];
            }
        }
    }
    return out;
}

std::vector<SignalData> partition_y(const SignalData& data, const Protocol& protocol,
                                    PartitionNorm norm) {
    const PhaseEncodeTable& table = protocol.table;
    const int n_y = data.n_echoes;
    if (static_cast<int>(table.y_order.size()) != n_y)
        throw config_error("partition_y: y table length does not match data");

    // Complete symmetric index set check.
    std::vector<int> seen(n_y, 0);
    const int lo = -(n_y / 2);
    for (int v : table.y_order) {
        const int slot = v - lo;
        if (slot < 0 || slot >= n_y || seen[slot]++)
            throw config_error("partition_y: incomplete y encode coverage");
    }

    const double scale = norm == PartitionNorm::Slab
                             ? 1.0 / n_y
                             : 1.0 / std::sqrt(static_cast<double>(n_y));
    const int c = n_y / 2;
    std::vector<SignalData> parts(n_y);
    for (int j = 0; j < n_y; ++j) {
        SignalData& pj = parts[j];
        pj.n_shots = data.n_shots;
        pj.n_echoes = 1;
        pj.n_samples = data.n_samples;
        pj.dwell = data.dwell;
        pj.protocol_hash = data.protocol_hash;
        pj.samples.assign(pj.size(), cplx(0, 0));
        for (int e = 0; e < n_y; ++e) {
            const double ph = 2.0 * M_PI * table.y_order[e] * (j - c) / n_y;
            const cplx f = scale * cplx(std::cos(ph), std::sin(ph));
            for (int n = 0; n < data.n_shots; ++n) {
                const cplx* src = &data.samples[data.index(n, e, 0)];
                cplx* dst = &pj.samples[pj.index(n, 0, 0)];
                for (int it = 0; it < data.n_samples; ++it) dst[it] += f * src[it];
            }
        }
    }
    return parts;
}

SignalData add_noise(const SignalData& data, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw config_error("add_noise: sigma must be >= 0");
    SignalData out = data;
    if (sigma == 0.0) return out;
    Rng rng(seed);
    for (cplx& s : out.samples)
        s += cplx(sigma * rng.gaussian(), sigma * rng.gaussian());
    out.noise_sigma = sigma;
    out.noise_seed = seed;
    return out;
}

void save_sigdat(const SignalData& data, const std::string& path) {
    const std::string bin_path = path + ".bin";
    const std::string bin_name = std::filesystem::path(bin_path).filename().string();
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", data.dwell);
    std::ostringstream hdr;
    hdr << "format SIGDAT\n"
        << "version 1\n"
        << "n_shots " << data.n_shots << "\n"
        << "n_echoes " << data.n_echoes << "\n"
        << "n_samples " << data.n_samples << "\n"
        << "dwell " << buf << "\n"
        << "protocol_hash " << data.protocol_hash << "\n";
    if (data.noise_sigma > 0.0) {
        std::snprintf(buf, sizeof(buf), "%.17g", data.noise_sigma);
        hdr << "noise_sigma " << buf << "\n"
            << "noise_seed " << data.noise_seed << "\n";
    }
    hdr << "data " << bin_name << "\n";
    write_text_file(path, hdr.str());

    std::ofstream bin(bin_path, std::ios::trunc | std::ios::binary);
    if (!bin) throw io_error("save_sigdat: cannot open " + bin_path);
    std::vector<double> flat(data.samples.size() * 2);
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        flat[2 * i] = data.samples[i].real();
        flat[2 * i + 1] = data.samples[i].imag();
    }
    bin.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!bin) throw io_error("save_sigdat: write failed for " + bin_path);
}

SignalData load_sigdat(const std::string& path) {
    std::ifstream hdr(path);
    if (!hdr) throw io_error("load_sigdat: cannot open " + path);
    SignalData data;
    std::string line, key, format, data_name;
    int version = 0;
    while (std::getline(hdr, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        ss >> key;
        if (key == "format") ss >> format;
        else if (key == "version") ss >> version;
        else if (key == "n_shots") ss >> data.n_shots;
        else if (key == "n_echoes") ss >> data.n_echoes;
        else if (key == "n_samples") ss >> data.n_samples;
        else if (key == "dwell") ss >> data.dwell;
        else if (key == "protocol_hash") ss >> data.protocol_hash;
        else if (key == "noise_sigma") ss >> data.noise_sigma;
        else if (key == "noise_seed") ss >> data.noise_seed;
        else if (key == "data") ss >> data_name;
        else throw io_error("load_sigdat: unknown header key '" + key + "' in " + path);
        if (ss.fail())
            throw io_error("load_sigdat: malformed value for key '" + key + "'");
    }
    if (format != "SIGDAT" || version != 1)
        throw io_error("load_sigdat: not a SIGDAT v1 header: " + path);
    if (data.n_shots < 1 || data.n_echoes < 1 || data.n_samples < 1)
        throw io_error("load_sigdat: bad dimensions in " + path);

    const std::string bin_path =
        data_name.empty()
            ? path + ".bin"
            : (std::filesystem::path(path).parent_path() / data_name).string();
    std::ifstream bin(bin_path, std::ios::binary | std::ios::ate);
    if (!bin) throw io_error("load_sigdat: cannot open " + bin_path);
    const std::streamsize bytes = bin.tellg();
    const std::streamsize want =
        static_cast<std::streamsize>(data.size() * 2 * sizeof(double));
    if (bytes != want)
        throw io_error("load_sigdat: " + bin_path + " holds " + std::to_string(bytes) +
                       " bytes, expected " + std::to_string(want));
    bin.seekg(0);
    std::vector<double> flat(data.size() * 2);
    bin.read(reinterpret_cast<char*>(flat.data()), want);
    if (!bin) throw io_error("load_sigdat: short read from " + bin_path);
    data.samples.resize(data.size());
    for (std::size_t i = 0; i < data.samples.size(); ++i)
        data.samples[i] = {flat[2 * i], flat[2 * i + 1]};
    return data;
}

}  // namespace pmri
