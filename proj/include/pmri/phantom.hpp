#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmri/core.hpp"
#include "pmri/fieldmap.hpp"

namespace pmri {

/// Digital test object: nonnegative proton density on a grid. Discs are
/// drawn in the (x, z) image plane and extruded along y unless a y range
/// restricts them.
struct Phantom {
    Grid3 grid;
    std::vector<double> values;  // x-fastest, >= 0, finite
    std::string kind;
    std::vector<std::string> warnings;  // e.g. clipped discs

    double& at(int i, int j, int k) { return values[grid.index(i, j, k)]; }
    double at(int i, int j, int k) const { return values[grid.index(i, j, k)]; }
};

struct Disc {
    double cx = 0.0, cz = 0.0;  // center, meters (world)
    double radius = 0.0;        // meters
    double intensity = 1.0;
    double y_min = -1e30, y_max = 1e30;  // y slab restriction, meters
};

struct PhantomParams {
    std::vector<Disc> discs;
    int random_discs = 0;        // extra seeded discs (disk-set kind)
    std::string raster_path;     // PGM file (imported kind)
    double raster_intensity = 1.0;
};

/// kind: "disk-set" | "shepp-logan-like" | "imported".
/// Deterministic for a fixed seed. Discs reaching outside the grid are
/// clipped with a warning recorded on the phantom.
Phantom make_phantom(const std::string& kind, const Grid3& grid,
                     const PhantomParams& params, std::uint64_t seed);

/// Sum of values (proton mass in voxel units).
double phantom_mass(const Phantom& p);

/// Magnitude export via the FMAP container (units field is nominal).
void save_phantom_fmap(const Phantom& p, const std::string& path);

}  // namespace pmri
