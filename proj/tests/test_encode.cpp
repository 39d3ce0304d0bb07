#include "pmri/encode.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "pmri/io_util.hpp"
#include "pmri/rng.hpp"

using namespace pmri;
using namespace pmri::testing;

namespace {

std::vector<cplx> random_image(std::size_t n, Rng& rng) {
    std::vector<cplx> v(n);
    for (auto& c : v) c = {rng.gaussian(), rng.gaussian()};
    return v;
}

Eigen::VectorXcd to_eigen(const std::vector<cplx>& v) {
    return Eigen::Map<const Eigen::VectorXcd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

TEST_CASE("make_phantom") {
    Grid3 grid(64, 1, 64, 0.0025, 0.0025, 0.0025, {-0.07875, 0.0, -0.07875});

    SUBCASE("disc mass counts area to one boundary ring") {
        PhantomParams params;
        params.discs.push_back({0.0, 0.0, 0.05, 1.0});
        const Phantom ph = make_phantom("disk-set", grid, params, 0);
        const double expect = M_PI * 0.05 * 0.05 / (grid.dx * grid.dz);
        const double ring = 2.0 * M_PI * 0.05 / grid.dx + 4;
        CHECK(std::abs(phantom_mass(ph) - expect) <= ring);
        CHECK(ph.warnings.empty());
    }

    SUBCASE("empty parameter set gives a zero phantom") {
        const Phantom ph = make_phantom("disk-set", grid, {}, 0);
        CHECK(phantom_mass(ph) == 0.0);
    }

    SUBCASE("fixed seed reproduces the phantom exactly") {
        PhantomParams params;
        params.random_discs = 5;
        const Phantom a = make_phantom("disk-set", grid, params, 99);
        const Phantom b = make_phantom("disk-set", grid, params, 99);
        CHECK(a.values == b.values);
        const Phantom c = make_phantom("disk-set", grid, params, 100);
        CHECK(a.values != c.values);
    }

    SUBCASE("disc outside the grid warns and clips") {
        PhantomParams params;
        params.discs.push_back({0.07, 0.0, 0.03, 1.0});
        const Phantom ph = make_phantom("disk-set", grid, params, 0);
        REQUIRE(ph.warnings.size() == 1);
        CHECK(phantom_mass(ph) > 0.0);
        for (double v : ph.values) CHECK(v >= 0.0);
    }

    SUBCASE("shepp-logan-like is deterministic and nonnegative") {
        const Phantom a = make_phantom("shepp-logan-like", grid, {}, 1);
        const Phantom b = make_phantom("shepp-logan-like", grid, {}, 2);
        CHECK(a.values == b.values);  // seed-free kind
        CHECK(phantom_mass(a) > 0.0);
    }

    SUBCASE("imported PGM raster round-trips through the phantom") {
        const auto dir = std::filesystem::temp_directory_path() / "pmri_phantom";
        std::filesystem::create_directories(dir);
        const std::string pgm = (dir / "object.pgm").string();
        std::vector<double> raster(64 * 64, 0.0);
        for (int k = 20; k < 40; ++k)
            for (int i = 10; i < 50; ++i) raster[k * 64 + i] = 0.75;
        save_pgm16(pgm, raster, 64, 64, 0.0, 1.0);

        PhantomParams params;
        params.raster_path = pgm;
        const Phantom ph = make_phantom("imported", grid, params, 0);
        CHECK(ph.at(30, 0, 30) == doctest::Approx(0.75).epsilon(1e-4));
        CHECK(ph.at(0, 0, 0) == 0.0);

        Grid3 wrong(32, 1, 32, 0.005, 0.005, 0.005, grid.origin);
        CHECK_THROWS_AS(make_phantom("imported", wrong, params, 0), config_error);
    }
}

TEST_CASE("forward operator against the dense signal-equation oracle") {
    // nonlinear maps: linear plus quadratic perturbations
    const int nx = 16, nz = 16;
    LinearFixture f = make_linear_fixture(nx, nz);
    for (int k = 0; k < nz; ++k)
        for (int i = 0; i < nx; ++i) {
            const Vec3 p = f.grid.position(i, 0, k);
            f.gx.at(i, 0, k) += 0.1 * f.gx_gradient / 0.11 * p.x * p.x;
            f.gz.at(i, 0, k) += 0.05 * f.gz_gradient / 0.09 * p.z * p.z;
        }
    const EncodeOperator op(f.gx, f.gz, f.protocol.table, f.protocol.acq);
    const Eigen::MatrixXcd A =
        dense_encode_matrix(f.gx, f.gz, f.protocol.table, f.protocol.acq);
    Rng rng(5);

    SUBCASE("random phantom forward matches dense multiplication to 1e-12") {
        const std::vector<cplx> m = random_image(f.grid.size(), rng);
        const std::vector<cplx> s = op.forward(m);
        const Eigen::VectorXcd s_oracle = A * to_eigen(m);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            num += std::norm(s[i] - s_oracle(static_cast<Eigen::Index>(i)));
            den += std::norm(s_oracle(static_cast<Eigen::Index>(i)));
        }
        CHECK(std::sqrt(num / den) < 1e-12);
    }

    SUBCASE("adjoint matches the dense conjugate transpose to 1e-12") {
        std::vector<cplx> s(op.n_samples_total());
        for (auto& v : s) v = {rng.gaussian(), rng.gaussian()};
        const std::vector<cplx> x = op.adjoint(s);
        const Eigen::VectorXcd x_oracle = A.adjoint() * to_eigen(s);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            num += std::norm(x[i] - x_oracle(static_cast<Eigen::Index>(i)));
            den += std::norm(x_oracle(static_cast<Eigen::Index>(i)));
        }
        CHECK(std::sqrt(num / den) < 1e-12);
    }

    SUBCASE("inner-product adjoint identity holds to 1e-10") {
        for (int trial = 0; trial < 5; ++trial) {
            const std::vector<cplx> phi = random_image(f.grid.size(), rng);
            std::vector<cplx> psi(op.n_samples_total());
            for (auto& v : psi) v = {rng.gaussian(), rng.gaussian()};
            const std::vector<cplx> a_phi = op.forward(phi);
            const std::vector<cplx> ah_psi = op.adjoint(psi);
            cplx lhs(0, 0), rhs(0, 0);
            for (std::size_t i = 0; i < a_phi.size(); ++i)
                lhs += std::conj(a_phi[i]) * psi[i];
            for (std::size_t i = 0; i < phi.size(); ++i)
                rhs += std::conj(phi[i]) * ah_psi[i];
            double a_norm = 0.0, psi_norm = 0.0;
            for (const auto& v : a_phi) a_norm += std::norm(v);
            for (const auto& v : psi) psi_norm += std::norm(v);
            CHECK(std::abs(lhs - rhs) <=
                  1e-10 * std::sqrt(a_norm) * std::sqrt(psi_norm));
        }
    }

    SUBCASE("linearity to 1e-12 relative") {
        const std::vector<cplx> m1 = random_image(f.grid.size(), rng);
        const std::vector<cplx> m2 = random_image(f.grid.size(), rng);
        const cplx a(1.7, -0.3), b(-0.4, 2.1);
        std::vector<cplx> mixed(f.grid.size());
        for (std::size_t i = 0; i < mixed.size(); ++i)
            mixed[i] = a * m1[i] + b * m2[i];
        const std::vector<cplx> s_mixed = op.forward(mixed);
        const std::vector<cplx> s1 = op.forward(m1);
        const std::vector<cplx> s2 = op.forward(m2);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < s_mixed.size(); ++i) {
            num += std::norm(s_mixed[i] - (a * s1[i] + b * s2[i]));
            den += std::norm(s_mixed[i]);
        }
        CHECK(std::sqrt(num / den) < 1e-12);
    }

    SUBCASE("serial and OpenMP paths are bit-identical") {
        const std::vector<cplx> m = random_image(f.grid.size(), rng);
        const auto s_par = op.forward(m, Exec::OpenMP);
        const auto s_ser = op.forward(m, Exec::Serial);
        CHECK(s_par == s_ser);
        const auto x_par = op.adjoint(s_par, Exec::OpenMP);
        const auto x_ser = op.adjoint(s_par, Exec::Serial);
        CHECK(x_par == x_ser);
    }
}

TEST_CASE("forward operator special cases") {
    LinearFixture f = make_linear_fixture(8, 8);
    const EncodeOperator op(f.gx, f.gz, f.protocol.table, f.protocol.acq);

    SUBCASE("single unit pixel gives unit-magnitude phase samples") {
        std::vector<cplx> m(f.grid.size(), cplx(0, 0));
        const int i0 = 5, k0 = 2;
        m[f.grid.index(i0, 0, k0)] = 1.0;
        const std::vector<cplx> s = op.forward(m);
        const double gamma = PhysicsConstants().gamma();
        const Vec3 p = f.grid.position(i0, 0, k0);
        for (int n = 0; n < op.n_encodes(); ++n)
            for (int it = 0; it < op.n_readout(); ++it) {
                const cplx v = s[static_cast<std::size_t>(n) * op.n_readout() + it];
                CHECK(std::abs(v) == doctest::Approx(1.0).epsilon(1e-12));
                const double ph = -2.0 * M_PI * gamma *
                                  (f.gx_gradient * p.x * f.protocol.acq.sample_time(it) +
                                   f.protocol.table.l_z(n) * f.gz_gradient * p.z *
                                       f.protocol.acq.tau);
                CHECK(v.real() == doctest::Approx(std::cos(ph)).epsilon(1e-10));
                CHECK(v.imag() == doctest::Approx(std::sin(ph)).epsilon(1e-10));
            }
    }

    SUBCASE("zero Gz map makes every encode identical") {
        const FieldMap gz_zero(f.grid, "Gz");
        const EncodeOperator op0(f.gx, gz_zero, f.protocol.table, f.protocol.acq);
        Rng rng(17);
        const std::vector<cplx> m = random_image(f.grid.size(), rng);
        const std::vector<cplx> s = op0.forward(m);
        for (int n = 1; n < op0.n_encodes(); ++n)
            for (int it = 0; it < op0.n_readout(); ++it)
                CHECK(s[static_cast<std::size_t>(n) * op0.n_readout() + it] ==
                      s[static_cast<std::size_t>(it)]);
    }

    SUBCASE("grid mismatch is rejected") {
        Grid3 other(9, 1, 8, f.grid.dx, f.grid.dy, f.grid.dz, f.grid.origin);
        const FieldMap gz_bad(other, "Gz");
        CHECK_THROWS_AS(EncodeOperator(f.gx, gz_bad, f.protocol.table, f.protocol.acq),
                        config_error);
    }

    SUBCASE("exactly linear maps sample the phantom DFT") {
        // critically sampled fixture: compare against a direct DFT oracle at
        // k_x(t) = gamma gx t, k_z(n) = gamma gz l(n) tau
        Rng rng(29);
        std::vector<cplx> m = random_image(f.grid.size(), rng);
        const std::vector<cplx> s = op.forward(m);
        const double gamma = PhysicsConstants().gamma();
        double num = 0.0, den = 0.0;
        for (int n = 0; n < op.n_encodes(); ++n)
            for (int it = 0; it < op.n_readout(); ++it) {
                const double kx = gamma * f.gx_gradient * f.protocol.acq.sample_time(it);
                const double kz = gamma * f.gz_gradient * f.protocol.table.l_z(n) *
                                  f.protocol.acq.tau;
                cplx acc(0, 0);
                for (int k = 0; k < f.grid.nz; ++k)
                    for (int i = 0; i < f.grid.nx; ++i) {
                        const Vec3 p = f.grid.position(i, 0, k);
                        const double ph = -2.0 * M_PI * (kx * p.x + kz * p.z);
                        acc += m[f.grid.index(i, 0, k)] *
                               cplx(std::cos(ph), std::sin(ph));
                    }
                num += std::norm(acc - s[static_cast<std::size_t>(n) * op.n_readout() + it]);
                den += std::norm(acc);
            }
        CHECK(std::sqrt(num / den) < 1e-9);
    }
}

TEST_CASE("3D simulation and y partitioning") {
    // geometry matched to the y-encode table so slabs land on partitions
    const int nx = 8, ny = 8, nz = 6;
    LinearFixture f2d = make_linear_fixture(nx, nz);
    AcquisitionProtocol timing = f2d.protocol.acq;
    Protocol proto = build_protocol(Contrast::PD, nx, ny, nz, timing);
    proto.acq.gz_peak = f2d.protocol.acq.gz_peak;

    const double gamma = PhysicsConstants().gamma();
    const double dy = proto.table.y_max_index /
                      (ny * gamma * proto.acq.gy_peak * proto.acq.tau);
    Grid3 grid3(nx, ny, nz, f2d.grid.dx, dy, f2d.grid.dz,
                {f2d.grid.origin.x, -dy * (ny / 2), f2d.grid.origin.z});

    SUBCASE("slab-confined phantom focuses its energy in one partition") {
        for (int slab : {0, 3, 7}) {
            PhantomParams params;
            Disc d;
            d.cx = 0.0;
            d.cz = 0.0;
            d.radius = 0.05;
            d.y_min = grid3.origin.y + slab * dy - 0.1 * dy;
            d.y_max = grid3.origin.y + slab * dy + 0.1 * dy;
            params.discs.push_back(d);
            const Phantom ph = make_phantom("disk-set", grid3, params, 0);
            REQUIRE(phantom_mass(ph) > 0.0);

            const SignalData full = simulate_3d(ph, f2d.gx, f2d.gz, proto);
            const auto parts = partition_y(full, proto);
            REQUIRE(static_cast<int>(parts.size()) == ny);
            std::vector<double> energy(ny, 0.0);
            double total = 0.0;
            for (int j = 0; j < ny; ++j) {
                for (const auto& v : parts[j].samples) energy[j] += std::norm(v);
                total += energy[j];
            }
            CHECK(energy[slab] >= 0.9 * total);
        }
    }

    SUBCASE("single y encode passes data through unchanged") {
        Protocol p1 = build_protocol(Contrast::PD, nx, 1, nz, timing);
        p1.acq.gz_peak = f2d.protocol.acq.gz_peak;
        Grid3 g1(nx, 1, nz, f2d.grid.dx, dy, f2d.grid.dz, f2d.grid.origin);
        PhantomParams params;
        params.discs.push_back({0.0, 0.0, 0.05, 1.0});
        const Phantom ph = make_phantom("disk-set", g1, params, 0);
        const SignalData full = simulate_3d(ph, f2d.gx, f2d.gz, p1);
        const auto parts = partition_y(full, p1);
        REQUIRE(parts.size() == 1);
        CHECK(parts[0].samples == full.samples);
    }

    SUBCASE("unitary partition preserves energy (Parseval)") {
        PhantomParams params;
        params.random_discs = 4;
        const Phantom ph = make_phantom("disk-set", grid3, params, 77);
        const SignalData full = simulate_3d(ph, f2d.gx, f2d.gz, proto);
        const auto parts = partition_y(full, proto, PartitionNorm::Unitary);
        double in = 0.0, out = 0.0;
        for (const auto& v : full.samples) in += std::norm(v);
        for (const auto& pj : parts)
            for (const auto& v : pj.samples) out += std::norm(v);
        CHECK(out == doctest::Approx(in).epsilon(1e-10));
    }

    SUBCASE("incomplete y coverage is rejected") {
        PhantomParams params;
        params.discs.push_back({0.0, 0.0, 0.05, 1.0});
        const Phantom ph = make_phantom("disk-set", grid3, params, 0);
        const SignalData full = simulate_3d(ph, f2d.gx, f2d.gz, proto);
        Protocol broken = proto;
        broken.table.y_order[2] = broken.table.y_order[1];
        CHECK_THROWS_AS(partition_y(full, broken), config_error);
    }
}

TEST_CASE("noise injection") {
    SignalData s;
    s.n_shots = 10;
    s.n_echoes = 10;
    s.n_samples = 100;
    s.dwell = 1e-5;
    s.samples.assign(s.size(), cplx(1.0, -2.0));

    SUBCASE("sigma zero is bitwise identity") {
        const SignalData out = add_noise(s, 0.0, 7);
        CHECK(out.samples == s.samples);
        CHECK(out.noise_sigma == 0.0);
    }

    SUBCASE("sample variance within 1% of sigma^2 over 1e6 draws") {
        SignalData big;
        big.n_shots = 1;
        big.n_echoes = 1;
        big.n_samples = 500000;
        big.samples.assign(big.size(), cplx(0, 0));
        const double sigma = 0.7;
        const SignalData noisy = add_noise(big, sigma, 123);
        double acc = 0.0;
        for (const auto& v : noisy.samples) acc += std::norm(v);
        const double var_per_comp = acc / (2.0 * static_cast<double>(big.size()));
        CHECK(var_per_comp == doctest::Approx(sigma * sigma).epsilon(0.01));
    }

    SUBCASE("fixed seed reproduces") {
        const SignalData a = add_noise(s, 0.3, 42);
        const SignalData b = add_noise(s, 0.3, 42);
        CHECK(a.samples == b.samples);
        const SignalData c = add_noise(s, 0.3, 43);
        CHECK(a.samples != c.samples);
    }
}

TEST_CASE("SIGDAT v1 round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "pmri_sigdat_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "echo.sig").string();

    Rng rng(31);
    SignalData s;
    s.n_shots = 3;
    s.n_echoes = 4;
    s.n_samples = 5;
    s.dwell = 5.46875e-6;
    s.protocol_hash = "0123456789abcdef";
    s.samples.resize(s.size());
    for (auto& v : s.samples) v = {rng.gaussian(), rng.gaussian()};

    save_sigdat(s, path);
    const SignalData back = load_sigdat(path);
    CHECK(back.n_shots == 3);
    CHECK(back.n_echoes == 4);
    CHECK(back.n_samples == 5);
    CHECK(back.dwell == s.dwell);
    CHECK(back.protocol_hash == s.protocol_hash);
    CHECK(back.samples == s.samples);

    SUBCASE("byte length mismatch is rejected") {
        std::filesystem::resize_file(path + ".bin", s.size() * 16 - 16);
        CHECK_THROWS_AS(load_sigdat(path), io_error);
    }
}
