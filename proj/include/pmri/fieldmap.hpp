#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pmri/core.hpp"
#include "pmri/exec.hpp"

namespace pmri {

/// Regular 3D sampling lattice. World position of index (i,j,k) is
/// origin + (i*dx, j*dy, k*dz), exactly.
struct Grid3 {
    int nx = 1, ny = 1, nz = 1;
    double dx = 1.0, dy = 1.0, dz = 1.0;
    Vec3 origin;

    Grid3() = default;
    Grid3(int nx_, int ny_, int nz_, double dx_, double dy_, double dz_,
          Vec3 origin_ = {});

    std::size_t size() const {
        return static_cast<std::size_t>(nx) * ny * nz;
    }
    // x-fastest, then y, then z
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(nx) *
                   (static_cast<std::size_t>(j) +
                    static_cast<std::size_t>(ny) * static_cast<std::size_t>(k));
    }
    Vec3 position(int i, int j, int k) const {
        return {origin.x + i * dx, origin.y + j * dy, origin.z + k * dz};
    }
    bool same_layout(const Grid3& o) const;
};

/// Scalar field sampled on a Grid3 (Tesla). Invalid samples (outside an
/// analysis ROI) are marked with a quiet NaN and excluded from statistics.
struct FieldMap {
    Grid3 grid;
    std::vector<double> values;  // length grid.size(), x-fastest
    std::string label;

    FieldMap() = default;
    FieldMap(Grid3 g, std::string label_);
    FieldMap(Grid3 g, std::vector<double> v, std::string label_);

    double& at(int i, int j, int k) { return values[grid.index(i, j, k)]; }
    double at(int i, int j, int k) const { return values[grid.index(i, j, k)]; }

    FieldMap& operator+=(const FieldMap& o);
    FieldMap& operator*=(double s);

    /// Throws if any stored value is non-finite (loader/synthesis contract;
    /// maps carrying NaN ROI sentinels skip this check).
    void validate_finite() const;
};

/// Ideal point dipole: position in meters, moment in A·m².
struct Dipole {
    Vec3 position;
    Vec3 moment;
};

/// First-order fit B(r) ~ b0 + g·r over a spherical ROI.
struct LinearFit {
    double b0 = 0.0;       // Tesla, value extrapolated to the world origin
    Vec3 g;                // Tesla/m
    double rmse = 0.0;     // Tesla
    Sphere roi;

    double ideal(const Vec3& p) const {
        return b0 + g.x * p.x + g.y * p.y + g.z * p.z;
    }
};

/// B(p) of an ideal dipole: (mu0/4pi) * [3 rhat (m·rhat) - m] / |r|^3.
/// Throws singularity_error when p coincides with the dipole position.
Vec3 dipole_field(const Dipole& d, const Vec3& p);

/// Superposition of dipole fields sampled on a grid; the selected component
/// becomes the scalar map. Order-independent; parallel over grid points.
FieldMap synthesize_field(const std::vector<Dipole>& dipoles, const Grid3& grid,
                          Axis component, Exec exec = Exec::OpenMP,
                          std::string label = {});

/// Least-squares (b0, g) over the finite samples inside the ROI.
/// Needs at least 4 non-coplanar samples; throws numeric_error on a
/// rank-deficient sample set.
LinearFit linear_fit(const FieldMap& map, const Sphere& roi);

/// Same fit restricted to the named gradient axes (the others are pinned
/// to zero) — the form used on single-slice maps, where the full fit would
/// be rank deficient.
LinearFit linear_fit(const FieldMap& map, const Sphere& roi,
                     const std::vector<Axis>& axes);

/// Percent difference between a measured map and the ideal (fitted linear)
/// map: 100 * (B_meas - B_ideal) / span(B_ideal over ROI). Samples outside
/// the ROI are NaN.
FieldMap error_map(const FieldMap& map, const LinearFit& fit, const Sphere& roi);

/// Per-voxel displacement along `axis` that a linear-field reconstruction
/// would induce: x'(r) - x(r), where x'(r) is the apparent coordinate
/// (B_meas - b0 - off-axis linear terms) / g_axis. NaN outside the ROI.
/// Throws singularity_error when the fitted gradient along `axis` vanishes
/// (an encoding hole: position becomes ambiguous).
FieldMap deformation_map(const FieldMap& map, const LinearFit& fit, Axis axis,
                         const Sphere& roi);

// --- statistics helpers over the finite (in-ROI) samples ---
struct MapStats {
    double mean = 0.0, min = 0.0, max = 0.0, rms = 0.0;
    std::size_t count = 0;
};
MapStats finite_stats(const FieldMap& map);

// --- FMAP v1 on-disk format ---
// Text header `<path>`: one "key value" pair per line, UTF-8, fixed key
// order {format, version, nx, ny, nz, dx, dy, dz, origin, units, label,
// data}; companion raw binary `<path>.bin` holding nx*ny*nz little-endian
// IEEE-754 float64 values, x-fastest. The loader rejects length mismatches.
void save_fmap(const FieldMap& map, const std::string& path);
FieldMap load_fmap(const std::string& path);

}  // namespace pmri
