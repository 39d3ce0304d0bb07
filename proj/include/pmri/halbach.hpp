#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pmri/core.hpp"
#include "pmri/fieldmap.hpp"

namespace pmri {

/// One cylindrical layer of rungs: `n_rungs` azimuthal positions at
/// `radius`, each rung a stack of `slots_per_rung` cube slots spaced
/// `slot_pitch` along z and centered on z = 0.
struct HalbachLayer {
    double radius = 0.0;
    int n_rungs = 0;
    int slots_per_rung = 0;
    double slot_pitch = 0.0;
};

/// Extra single-row ring (shoulder-end field falloff compensation).
struct BoosterRing {
    double radius = 0.0;
    double z_position = 0.0;
    int n_slots = 0;
};

/// Slot lattice for the sparse Halbach cylinder. The magnetization
/// direction at azimuth theta follows the dipole Halbach rule: it rotates
/// twice as fast as the position angle (4 pi per revolution), giving a
/// uniform transverse interior field along +x and a self-shielded exterior.
struct HalbachGeometry {
    std::vector<HalbachLayer> layers;
    std::optional<BoosterRing> booster;
    double cube_side = 0.0254;  // m
    double br_n42 = 1.30;       // T, nominal remanence
    double br_n52 = 1.45;       // T

    struct Slot {
        Vec3 position;
        Vec3 direction;  // unit dipole direction
    };

    std::vector<Slot> slots() const;  // deterministic enumeration order
    std::size_t slot_count() const;
};

enum class Allele : std::uint8_t { Empty = 0, N42 = 1, N52 = 2 };

using Chromosome = std::vector<Allele>;

/// Point dipoles for the populated slots; cube of remanence Br becomes a
/// centered dipole of moment Br * side^3 / mu0. Only trustworthy at
/// evaluation distances >= 2 cube sides from a slot.
std::vector<Dipole> realize_magnets(const HalbachGeometry& geom,
                                    const Chromosome& chromosome);

/// Ideal dense Halbach ring of `n` dipoles in the z = z0 plane, total
/// moment `total_moment`; reference object for discretization checks.
std::vector<Dipole> halbach_ring(double radius, int n, double total_moment,
                                 double z0 = 0.0);

/// Ideal Halbach cylinder sampled as `n_rings` rings of `n_azimuthal`
/// dipoles spanning `length` along z.
std::vector<Dipole> halbach_cylinder(double radius, int n_azimuthal, int n_rings,
                                     double length, double total_moment);

// text round-trip: "slot_index allele" lines
std::string chromosome_to_text(const Chromosome& c);
Chromosome chromosome_from_text(const std::string& text);

}  // namespace pmri
