#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pmri/core.hpp"
#include "pmri/exec.hpp"
#include "pmri/fieldmap.hpp"
#include "pmri/phantom.hpp"
#include "pmri/sequence.hpp"

namespace pmri {

using cplx = std::complex<double>;

/// Complex echo-train samples, t-fastest, then echo (y encode), then shot
/// (z encode) — the SIGDAT ordering.
struct SignalData {
    int n_shots = 0;
    int n_echoes = 0;
    int n_samples = 0;
    double dwell = 0.0;
    std::string protocol_hash;
    std::vector<cplx> samples;
    double noise_sigma = 0.0;  // 0 when no noise was injected
    std::uint64_t noise_seed = 0;

    std::size_t index(int shot, int echo, int t) const {
        return (static_cast<std::size_t>(shot) * n_echoes +
                static_cast<std::size_t>(echo)) *
                   n_samples +
               static_cast<std::size_t>(t);
    }
    std::size_t size() const {
        return static_cast<std::size_t>(n_shots) * n_echoes * n_samples;
    }
};

/// Matrix-free encoding operator for one y partition.
///
/// Sample (n, t) of pixel p carries the phase
///   exp(-i 2 pi gamma (Gx[p] * t + l_z(n) * Gz[p] * tau)),
/// optionally scaled by a per-pixel weight. The matrix is never stored;
/// per-pixel readout and blip phase tables make one operator application
/// O(pixels x samples) with a vectorizable inner loop. Forward parallelizes
/// over encodes and adjoint over pixels, each keeping the serial summation
/// order, so Exec::Serial and Exec::OpenMP are bit-identical.
class EncodeOperator {
public:
    EncodeOperator(const FieldMap& gx, const FieldMap& gz,
                   const PhaseEncodeTable& table, const AcquisitionProtocol& acq,
                   PhysicsConstants constants = PhysicsConstants(),
                   std::vector<double> pixel_weights = {});

    int n_pixels() const { return n_pix_; }
    int n_encodes() const { return n_enc_; }
    int n_readout() const { return n_t_; }
    std::size_t n_samples_total() const {
        return static_cast<std::size_t>(n_enc_) * n_t_;
    }
    const Grid3& image_grid() const { return grid_; }

    /// image (pixels) -> data (encodes x readout, t fastest)
    std::vector<cplx> forward(std::span<const cplx> image,
                              Exec exec = Exec::OpenMP) const;
    /// data -> image, conjugate transpose of forward
    std::vector<cplx> adjoint(std::span<const cplx> data,
                              Exec exec = Exec::OpenMP) const;

    /// diag(A^H A), accumulated from the actual table magnitudes (no
    /// unit-magnitude assumption).
    std::vector<double> normal_diag() const;

private:
    int n_pix_, n_enc_, n_t_;
    Grid3 grid_;
    // SoA phase tables: readout term [pixel][t], blip term [pixel][encode]
    std::vector<double> ex_re_, ex_im_, ez_re_, ez_im_;
};

/// Full 3D RARE simulation: stacks per-slab 2D encodes and applies the
/// y-encode phase exp(-i 2 pi gamma l_y(echo) * gy_peak * y_slab * tau).
/// Gx/Gz maps either share the phantom grid (per-slab slices) or are single
/// ny == 1 slices reused for every slab.
SignalData simulate_3d(const Phantom& phantom, const FieldMap& gx,
                       const FieldMap& gz, const Protocol& protocol,
                       PhysicsConstants constants = PhysicsConstants(),
                       Exec exec = Exec::OpenMP);

enum class PartitionNorm {
    Slab,     // 1/N: recovers per-slab model signals exactly
    Unitary,  // 1/sqrt(N): energy preserving
};

/// Inverse DFT along the y-encode axis after reordering y_order to
/// monotonic k_y; yields one 2D SignalData (n_echoes == 1) per partition.
/// Requires the y encodes to form the complete symmetric index set.
std::vector<SignalData> partition_y(const SignalData& data, const Protocol& protocol,
                                    PartitionNorm norm = PartitionNorm::Slab);

/// Adds i.i.d. complex Gaussian noise, sigma per real/imag component,
/// deterministic per seed. sigma == 0 returns the input bitwise-unchanged.
SignalData add_noise(const SignalData& data, double sigma, std::uint64_t seed);

// --- SIGDAT v1 on-disk format ---
// Text header + companion raw binary `<path>.bin` of little-endian float64
// interleaved (re, im), t-fastest, echo next, shot slowest.
void save_sigdat(const SignalData& data, const std::string& path);
SignalData load_sigdat(const std::string& path);

}  // namespace pmri
