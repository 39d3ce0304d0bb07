#include "pmri/halbach.hpp"

#include <cmath>
#include <sstream>

namespace pmri {

std::vector<HalbachGeometry::Slot> HalbachGeometry::slots() const {
    std::vector<Slot> out;
    out.reserve(slot_count());
    for (const HalbachLayer& layer : layers) {
        for (int r = 0; r < layer.n_rungs; ++r) {
            const double theta = 2.0 * M_PI * r / layer.n_rungs;
            const Vec3 dir{std::cos(2.0 * theta), std::sin(2.0 * theta), 0.0};
            const double cx = layer.radius * std::cos(theta);
            const double cy = layer.radius * std::sin(theta);
            for (int s = 0; s < layer.slots_per_rung; ++s) {
                const double z = (s - 0.5 * (layer.slots_per_rung - 1)) * layer.slot_pitch;
                out.push_back({{cx, cy, z}, dir});
            }
        }
    }
    if (booster) {
        for (int r = 0; r < booster->n_slots; ++r) {
            const double theta = 2.0 * M_PI * r / booster->n_slots;
            const Vec3 dir{std::cos(2.0 * theta), std::sin(2.0 * theta), 0.0};
            out.push_back({{booster->radius * std::cos(theta),
                            booster->radius * std::sin(theta), booster->z_position},
                           dir});
        }
    }
    return out;
}

std::size_t HalbachGeometry::slot_count() const {
    std::size_t n = 0;
    for (const HalbachLayer& layer : layers)
        n += static_cast<std::size_t>(layer.n_rungs) * layer.slots_per_rung;
    if (booster) n += booster->n_slots;
    return n;
}

std::vector<Dipole> realize_magnets(const HalbachGeometry& geom,
                                    const Chromosome& chromosome) {
    const auto slots = geom.slots();
    if (chromosome.size() != slots.size())
        throw config_error("realize_magnets: chromosome length " +
                           std::to_string(chromosome.size()) + " != slot count " +
                           std::to_string(slots.size()));
    const double volume = geom.cube_side * geom.cube_side * geom.cube_side;
    const double mu0 = PhysicsConstants().mu0();
    std::vector<Dipole> dipoles;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (chromosome[i] == Allele::Empty) continue;
        const double br = chromosome[i] == Allele::N42 ? geom.br_n42 : geom.br_n52;
        dipoles.push_back({slots[i].position, slots[i].direction * (br * volume / mu0)});
    }
    return dipoles;
}

std::vector<Dipole> halbach_ring(double radius, int n, double total_moment,
                                 double z0) {
    std::vector<Dipole> out;
    out.reserve(n);
    for (int r = 0; r < n; ++r) {
        const double theta = 2.0 * M_PI * r / n;
        const Vec3 dir{std::cos(2.0 * theta), std::sin(2.0 * theta), 0.0};
        out.push_back({{radius * std::cos(theta), radius * std::sin(theta), z0},
                       dir * (total_moment / n)});
    }
    return out;
}

std::vector<Dipole> halbach_cylinder(double radius, int n_azimuthal, int n_rings,
                                     double length, double total_moment) {
    std::vector<Dipole> out;
    out.reserve(static_cast<std::size_t>(n_azimuthal) * n_rings);
    for (int i = 0; i < n_rings; ++i) {
        const double z = n_rings > 1 ? (i - 0.5 * (n_rings - 1)) * (length / (n_rings - 1))
                                     : 0.0;
        const auto ring = halbach_ring(radius, n_azimuthal, total_moment / n_rings, z);
        out.insert(out.end(), ring.begin(), ring.end());
    }
    return out;
}

std::string chromosome_to_text(const Chromosome& c) {
    std::ostringstream ss;
    ss << "chromosome pmri.v1 " << c.size() << "\n";
    for (std::size_t i = 0; i < c.size(); ++i) {
        const char* name = c[i] == Allele::Empty ? "Empty"
                           : c[i] == Allele::N42 ? "N42"
                                                 : "N52";
        ss << i << " " << name << "\n";
    }
    return ss.str();
}

Chromosome chromosome_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string magic, version;
    std::size_t n = 0;
    in >> magic >> version >> n;
    if (magic != "chromosome" || version != "pmri.v1" || in.fail())
        throw io_error("chromosome_from_text: bad header");
    Chromosome c(n, Allele::Empty);
    std::size_t idx;
    std::string name;
    while (in >> idx >> name) {
        if (idx >= n) throw io_error("chromosome_from_text: slot index out of range");
        if (name == "Empty") c[idx] = Allele::Empty;
        else if (name == "N42") c[idx] = Allele::N42;
        else if (name == "N52") c[idx] = Allele::N52;
        else throw io_error("chromosome_from_text: unknown allele '" + name + "'");
    }
    return c;
}

}  // namespace pmri
