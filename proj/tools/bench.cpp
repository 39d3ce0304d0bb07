// Benchmarks the OpenMP kernels against their serial reference twins and
// verifies bit-identical outputs while timing them.
//
//   pmri_bench [--threads N] [--size S]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "pmri/bloch.hpp"
#include "pmri/encode.hpp"
#include "pmri/exec.hpp"
#include "pmri/fieldmap.hpp"
#include "pmri/halbach.hpp"
#include "pmri/pulse.hpp"
#include "pmri/rng.hpp"
#include "pmri/sequence.hpp"

using namespace pmri;

namespace {

template <typename F>
double time_s(F&& fn, int reps = 3) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

void report(const char* name, double serial, double parallel, bool identical) {
    std::printf("%-22s serial %8.4f s   openmp %8.4f s   speedup %5.2fx   %s\n",
                name, serial, parallel, serial / parallel,
                identical ? "bit-identical" : "OUTPUTS DIFFER");
}

}  // namespace

int main(int argc, char** argv) {
    int threads = 0, size = 96;
    for (int i = 1; i < argc; ++i) {
        if (!std::strcmp(argv[i], "--threads") && i + 1 < argc) threads = std::atoi(argv[++i]);
        else if (!std::strcmp(argv[i], "--size") && i + 1 < argc) size = std::atoi(argv[++i]);
        else {
            std::fprintf(stderr, "usage: pmri_bench [--threads N] [--size S]\n");
            return 2;
        }
    }
    set_max_threads(threads);
    std::printf("pmri kernel benchmark, image size %dx%d, max threads %d\n\n", size,
                size, max_threads());

    // field synthesis over a volume grid
    {
        const auto dipoles = halbach_cylinder(0.15, 24, 19, 0.45, 1.2e4);
        Grid3 grid(48, 48, 24, 0.004, 0.004, 0.008, {-0.094, -0.094, -0.092});
        FieldMap out_serial(grid, "Bx"), out_par(grid, "Bx");
        const double ts = time_s([&] { out_serial = synthesize_field(dipoles, grid, Axis::X, Exec::Serial); });
        const double tp = time_s([&] { out_par = synthesize_field(dipoles, grid, Axis::X, Exec::OpenMP); });
        report("synthesize_field", ts, tp, out_serial.values == out_par.values);
    }

    // encode forward/adjoint on a nonlinear slice
    {
        const double fov = 0.22;
        const double dx = fov / size;
        Grid3 grid(size, 1, size, dx, dx, dx,
                   {-0.5 * (size - 1) * dx, 0.0, -0.5 * (size - 1) * dx});
        AcquisitionProtocol timing;
        timing.dwell = 10e-6;
        const Protocol proto = build_protocol(Contrast::PD, size, 1, size, timing);
        FieldMap gx(grid, "Gx"), gz(grid, "Gz");
        const double g = 7.6e-3;
        for (int k = 0; k < size; ++k)
            for (int i = 0; i < size; ++i) {
                const Vec3 p = grid.position(i, 0, k);
                gx.at(i, 0, k) = g * p.x + 0.1 * g / 0.11 * p.x * p.x;
                gz.at(i, 0, k) = g * p.z;
            }
        const EncodeOperator op(gx, gz, proto.table, proto.acq);
        Rng rng(1);
        std::vector<cplx> img(grid.size());
        for (auto& v : img) v = {rng.gaussian(), rng.gaussian()};

        std::vector<cplx> fs, fp;
        const double ts = time_s([&] { fs = op.forward(img, Exec::Serial); });
        const double tp = time_s([&] { fp = op.forward(img, Exec::OpenMP); });
        report("encode forward", ts, tp, fs == fp);

        std::vector<cplx> as, ap;
        const double ts2 = time_s([&] { as = op.adjoint(fs, Exec::Serial); });
        const double tp2 = time_s([&] { ap = op.adjoint(fs, Exec::OpenMP); });
        report("encode adjoint", ts2, tp2, as == ap);
    }

    // Bloch excitation profile
    {
        const PulseWaveform p =
            make_wurst(3.2e-3, 1e5, 40, wurst_excitation_peak_b1(3.2e-3, 1e5), 1e-6);
        std::vector<double> b1{0.8, 0.9, 1.0, 1.1, 1.2};
        std::vector<double> offs;
        for (double o = -50e3; o <= 50e3; o += 2.5e3) offs.push_back(o);
        ProfileGrid gs, gp;
        const double ts = time_s(
            [&] { gs = excitation_profile(p, b1, offs, PhysicsConstants(), Exec::Serial); }, 2);
        const double tp = time_s(
            [&] { gp = excitation_profile(p, b1, offs, PhysicsConstants(), Exec::OpenMP); }, 2);
        report("excitation_profile", ts, tp, gs.values == gp.values);
    }
    return 0;
}
