#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include "pmri/core.hpp"
#include "pmri/encode.hpp"

namespace pmri {

struct Provenance {
    std::string method;  // "CG" or "FFT"
    int iterations = 0;
    double final_rel_residual = 0.0;
    std::string note;
};

struct Image {
    Grid3 grid;                // 2D slice layout (ny == 1 in the pipeline)
    std::vector<cplx> values;  // x-fastest
    Provenance provenance;

    std::vector<double> magnitude() const;
};

/// Diagonal preconditioner data: per-pixel squares of diag(A^H A), plus the
/// pixels whose diagonal vanished ("encoding holes", reported and given unit
/// weight). For the pure-phase encoding operator the diagonal is constant,
/// so preconditioned and plain CG follow the same trajectory.
///
/// The solver applies the diagonal M_p = sqrt(weights_p) = diag(A^H A)_p,
/// the equilibrating choice that actually lowers the condition number on
/// operators with nonuniform pixel weighting.
struct Preconditioner {
    std::vector<double> weights;
    std::vector<int> hole_pixels;

    double applied_diag(std::size_t p) const { return std::sqrt(weights[p]); }
};

Preconditioner build_preconditioner(const EncodeOperator& op);

struct CgOptions {
    double tol = 1e-3;  // relative residual on the normal equations
    int max_iter = 50;
    Exec exec = Exec::OpenMP;
    // optional per-iteration logs (tests/diagnostics)
    std::vector<double>* residual_log = nullptr;       // |A^H s - A^H A x| / |A^H s|
    std::vector<double>* data_residual_log = nullptr;  // |A x - s| (costs one extra forward per iter)
};

/// Preconditioned conjugate gradient on the normal equations
/// A^H A m = A^H s. Stops at the relative normal-equation residual `tol`
/// or max_iter; provenance records both. Zero data returns a zero image in
/// zero iterations. Throws numeric_error if the residual turns non-finite.
Image cg_solve(const EncodeOperator& op, std::span<const cplx> data,
               const Preconditioner* precond, const CgOptions& opts = {});

/// Conventional reconstruction assuming ideal separable linear gradients
/// taken from the per-axis fits: an inverse DFT against the linear-phase
/// kernels, normalized by the sample count. Exact when the sampling is
/// rectilinear and critically spaced; geometric distortion appears whenever
/// the true maps are nonlinear. Requires a complete z encode set.
Image fft_recon(const SignalData& partition, const LinearFit& fit_x,
                const LinearFit& fit_z, const Protocol& protocol,
                const Grid3& image_grid,
                PhysicsConstants constants = PhysicsConstants());

/// Shading correction: masked |img| divided by a low-pass (Gaussian,
/// mask-renormalized) version of itself, floored at 1e-3 of the filter
/// peak. `filter_sigma` is in meters. Output is zero outside the mask.
Image intensity_correct(const Image& img, const std::vector<std::uint8_t>& mask,
                        double filter_sigma);

struct RectRoi {
    int x0 = 0, z0 = 0, width = 0, height = 0;
    bool empty() const { return width <= 0 || height <= 0; }
};

/// mean(|signal ROI|) / mean(|background ROI|) * sqrt(pi/2), the Rician
/// background correction for magnitude images. ROIs must be disjoint and
/// nonempty; a zero background mean is an error.
double compute_snr(const Image& img, const RectRoi& signal_roi,
                   const RectRoi& background_roi);

}  // namespace pmri
