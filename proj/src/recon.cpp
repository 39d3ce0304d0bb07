#include "pmri/recon.hpp"

#include <algorithm>
#include <cmath>

namespace pmri {

std::vector<double> Image::magnitude() const {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::abs(values[i]);
    return out;
}

Preconditioner build_preconditioner(const EncodeOperator& op) {
    if (op.n_samples_total() == 0)
        throw numeric_error("build_preconditioner: operator has no samples");
    Preconditioner pre;
    const std::vector<double> diag = op.normal_diag();
    pre.weights.resize(diag.size());
    for (std::size_t p = 0; p < diag.size(); ++p) {
        if (diag[p] <= 0.0) {
            pre.hole_pixels.push_back(static_cast<int>(p));
            pre.weights[p] = 1.0;
        } else {
            pre.weights[p] = diag[p] * diag[p];
        }
    }
    return pre;
}

namespace {

double dot_re(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    return acc;
}

double norm2(const std::vector<cplx>& a) { return dot_re(a, a); }

}  // namespace

Image cg_solve(const EncodeOperator& op, std::span<const cplx> data,
               const Preconditioner* precond, const CgOptions& opts) {
    if (!(opts.tol > 0.0)) throw config_error("cg_solve: tol must be positive");
    const int n = op.n_pixels();
    if (precond && precond->weights.size() != static_cast<std::size_t>(n))
        throw config_error("cg_solve: preconditioner size mismatch");

    Image img;
    img.grid = op.image_grid();
    img.values.assign(n, cplx(0, 0));
    img.provenance.method = "CG";

    auto apply_minv = [&](const std::vector<cplx>& r) {
        std::vector<cplx> z(r);
        if (precond)
            for (int p = 0; p < n; ++p) z[p] /= precond->applied_diag(p);
        return z;
    };
    auto apply_normal = [&](const std::vector<cplx>& x) {
        return op.adjoint(op.forward(x, opts.exec), opts.exec);
    };
    auto log_data_residual = [&](const std::vector<cplx>& x) {
        if (!opts.data_residual_log) return;
        std::vector<cplx> ax = op.forward(x, opts.exec);
        double acc = 0.0;
        for (std::size_t i = 0; i < ax.size(); ++i) {
            const cplx d = ax[i] - data[i];
            acc += d.real() * d.real() + d.imag() * d.imag();
        }
        opts.data_residual_log->push_back(std::sqrt(acc));
    };

    std::vector<cplx> rhs = op.adjoint(data, opts.exec);
    const double rhs_norm = std::sqrt(norm2(rhs));
    if (rhs_norm == 0.0) {
        img.provenance.iterations = 0;
        img.provenance.final_rel_residual = 0.0;
        return img;
    }

    std::vector<cplx> r = rhs;  // x0 = 0
    std::vector<cplx> z = apply_minv(r);
    std::vector<cplx> p = z;
    double rz = dot_re(r, z);
    double rel = 1.0;
    int it = 0;
    log_data_residual(img.values);
    if (opts.residual_log) opts.residual_log->push_back(rel);

    while (it < opts.max_iter) {
        rel = std::sqrt(norm2(r)) / rhs_norm;
        if (rel < opts.tol) break;
        const std::vector<cplx> q = apply_normal(p);
        const double pq = dot_re(p, q);
        if (!(pq > 0.0) || !std::isfinite(pq))
            throw numeric_error("cg_solve: breakdown at iteration " + std::to_string(it) +
                                " (p^H A^H A p = " + std::to_string(pq) + ")");
        const double alpha = rz / pq;
        for (int i = 0; i < n; ++i) img.values[i] += alpha * p[i];
        for (int i = 0; i < n; ++i) r[i] -= alpha * q[i];
        ++it;
        const double rn = std::sqrt(norm2(r));
        if (!std::isfinite(rn))
            throw numeric_error("cg_solve: non-finite residual at iteration " +
                                std::to_string(it));
        rel = rn / rhs_norm;
        if (opts.residual_log) opts.residual_log->push_back(rel);
        log_data_residual(img.values);
        if (rel < opts.tol) break;
        z = apply_minv(r);
        const double rz_new = dot_re(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }

    img.provenance.iterations = it;
    img.provenance.final_rel_residual = rel;
    return img;
}

Image fft_recon(const SignalData& partition, const LinearFit& fit_x,
                const LinearFit& fit_z, const Protocol& protocol,
                const Grid3& image_grid, PhysicsConstants constants) {
    if (partition.n_echoes != 1)
        throw config_error("fft_recon: expected a single-echo y partition");
    const PhaseEncodeTable& table = protocol.table;
    const AcquisitionProtocol& acq = protocol.acq;
    const int n_enc = partition.n_shots;
    const int n_t = partition.n_samples;
    if (static_cast<int>(table.z_order.size()) != n_enc)
        throw config_error("fft_recon: z table length does not match data");
    if (acq.n_readout != n_t)
        throw config_error("fft_recon: protocol readout does not match data");

    // complete symmetric z coverage
    std::vector<int> seen(n_enc, 0);
    const int lo = -(n_enc / 2);
    for (int v : table.z_order) {
        const int slot = v - lo;
        if (slot < 0 || slot >= n_enc || seen[slot]++)
            throw config_error("fft_recon: missing or duplicate z encodes");
    }

    const double two_pi_gamma = 2.0 * M_PI * constants.gamma();
    const int nx = image_grid.nx, nz = image_grid.nz;
    if (image_grid.ny != 1)
        throw config_error("fft_recon: image grid must be a single slice");

    // stage 1: readout axis, s(n, t) -> g(n, jx)
    std::vector<cplx> stage(static_cast<std::size_t>(n_enc) * nx);
#pragma omp parallel for schedule(static)
    for (int n = 0; n < n_enc; ++n) {
        const cplx* row = &partition.samples[partition.index(n, 0, 0)];
        for (int jx = 0; jx < nx; ++jx) {
            const double bx =
                fit_x.b0 + fit_x.g.x * (image_grid.origin.x + jx * image_grid.dx);
            cplx acc(0, 0);
            for (int it = 0; it < n_t; ++it) {
                const double ph = two_pi_gamma * bx * acq.sample_time(it);
                acc += cplx(std::cos(ph), std::sin(ph)) * row[it];
            }
            stage[static_cast<std::size_t>(n) * nx + jx] = acc;
        }
    }

    // stage 2: blip axis, g(n, jx) -> m(jx, jz)
    Image img;
    img.grid = image_grid;
    img.values.assign(image_grid.size(), cplx(0, 0));
    img.provenance.method = "FFT";
    const double scale = 1.0 / (static_cast<double>(n_enc) * n_t);
#pragma omp parallel for schedule(static)
    for (int jz = 0; jz < nz; ++jz) {
        const double bz =
            fit_z.b0 + fit_z.g.z * (image_grid.origin.z + jz * image_grid.dz);
        for (int jx = 0; jx < nx; ++jx) {
            cplx acc(0, 0);
            for (int n = 0; n < n_enc; ++n) {
                const double ph = two_pi_gamma * table.l_z(n) * bz * acq.tau;
                acc += cplx(std::cos(ph), std::sin(ph)) *
                       stage[static_cast<std::size_t>(n) * nx + jx];
            }
            img.values[image_grid.index(jx, 0, jz)] = scale * acc;
        }
    }
    return img;
}

namespace {

// mask-renormalized separable Gaussian blur of a nonnegative raster
std::vector<double> gaussian_lowpass(const std::vector<double>& img,
                                     const std::vector<double>& mask, int nx,
                                     int nz, double sigma_px) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_px)));
    std::vector<double> kernel(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i)
        kernel[i + radius] = std::exp(-0.5 * (i / sigma_px) * (i / sigma_px));

    auto blur = [&](const std::vector<double>& src, bool along_x) {
        std::vector<double> dst(src.size(), 0.0);
        for (int k = 0; k < nz; ++k)
            for (int i = 0; i < nx; ++i) {
                double acc = 0.0, wsum = 0.0;
                for (int o = -radius; o <= radius; ++o) {
                    const int ii = along_x ? i + o : i;
                    const int kk = along_x ? k : k + o;
                    if (ii < 0 || ii >= nx || kk < 0 || kk >= nz) continue;
                    acc += kernel[o + radius] * src[static_cast<std::size_t>(kk) * nx + ii];
                    wsum += kernel[o + radius];
                }
                dst[static_cast<std::size_t>(k) * nx + i] = wsum > 0 ? acc / wsum : 0.0;
            }
        return dst;
    };

    std::vector<double> weighted(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) weighted[i] = img[i] * mask[i];
    std::vector<double> num = blur(blur(weighted, true), false);
    std::vector<double> den = blur(blur(mask, true), false);
    std::vector<double> out(img.size(), 0.0);
    for (std::size_t i = 0; i < img.size(); ++i)
        out[i] = den[i] > 0 ? num[i] / den[i] : 0.0;
    return out;
}

}  // namespace

Image intensity_correct(const Image& img, const std::vector<std::uint8_t>& mask,
                        double filter_sigma) {
    const int nx = img.grid.nx, nz = img.grid.nz;
    if (img.grid.ny != 1)
        throw config_error("intensity_correct: expected a single slice");
    if (mask.size() != img.values.size())
        throw config_error("intensity_correct: mask size mismatch");
    bool any = false;
    for (auto m : mask) any |= (m != 0);
    if (!any) throw config_error("intensity_correct: mask is empty");

    Image out;
    out.grid = img.grid;
    out.values.assign(img.values.size(), cplx(0, 0));
    out.provenance.method = "intensity_correct";

    std::vector<double> mag = img.magnitude();
    std::vector<double> maskd(mask.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        maskd[i] = mask[i] ? 1.0 : 0.0;
        if (mask[i]) peak = std::max(peak, mag[i]);
    }
    if (peak == 0.0) {
        out.provenance.note = "masked image is identically zero";
        return out;
    }

    const double sigma_px = std::max(0.5, filter_sigma / img.grid.dx);
    const std::vector<double> lp = gaussian_lowpass(mag, maskd, nx, nz, sigma_px);
    double lp_max = 0.0;
    for (std::size_t i = 0; i < lp.size(); ++i)
        if (mask[i]) lp_max = std::max(lp_max, lp[i]);
    const double eps = 1e-3 * lp_max;
    for (std::size_t i = 0; i < mag.size(); ++i)
        if (mask[i]) out.values[i] = mag[i] / std::max(lp[i], eps);
    return out;
}

double compute_snr(const Image& img, const RectRoi& signal_roi,
                   const RectRoi& background_roi) {
    if (signal_roi.empty() || background_roi.empty())
        throw config_error("compute_snr: ROIs must be nonempty");
    const int nx = img.grid.nx, nz = img.grid.nz;
    auto check = [&](const RectRoi& r, const char* name) {
        if (r.x0 < 0 || r.z0 < 0 || r.x0 + r.width > nx || r.z0 + r.height > nz)
            throw config_error(std::string("compute_snr: ") + name +
                               " ROI exceeds the image");
    };
    check(signal_roi, "signal");
    check(background_roi, "background");
    const bool overlap = signal_roi.x0 < background_roi.x0 + background_roi.width &&
                         background_roi.x0 < signal_roi.x0 + signal_roi.width &&
                         signal_roi.z0 < background_roi.z0 + background_roi.height &&
                         background_roi.z0 < signal_roi.z0 + signal_roi.height;
    if (overlap) throw config_error("compute_snr: ROIs overlap");

    auto roi_mean = [&](const RectRoi& r) {
        double acc = 0.0;
        for (int k = r.z0; k < r.z0 + r.height; ++k)
            for (int i = r.x0; i < r.x0 + r.width; ++i)
                acc += std::abs(img.values[img.grid.index(i, 0, k)]);
        return acc / (static_cast<double>(r.width) * r.height);
    };
    const double sig = roi_mean(signal_roi);
    const double bg = roi_mean(background_roi);
    if (bg == 0.0) throw numeric_error("compute_snr: background ROI mean is zero");
    return sig / bg * std::sqrt(M_PI / 2.0);
}

}  // namespace pmri
