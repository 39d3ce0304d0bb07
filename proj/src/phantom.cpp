#include "pmri/phantom.hpp"

#include <cmath>

#include "pmri/io_util.hpp"
#include "pmri/rng.hpp"

namespace pmri {

namespace {

struct Ellipse {
    double cx, cz, a, b, angle_deg, intensity;
};

// Shepp-Logan-style ellipse set in unit coordinates [-1, 1]^2.
const Ellipse kSheppLogan[] = {
    {0.0, 0.0, 0.69, 0.92, 0.0, 1.0},
    {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8},
    {0.22, 0.0, 0.11, 0.31, -18.0, -0.2},
    {-0.22, 0.0, 0.16, 0.41, 18.0, -0.2},
    {0.0, 0.35, 0.21, 0.25, 0.0, 0.1},
    {0.0, 0.1, 0.046, 0.046, 0.0, 0.1},
    {0.0, -0.1, 0.046, 0.046, 0.0, 0.1},
    {-0.08, -0.605, 0.046, 0.023, 0.0, 0.1},
    {0.0, -0.605, 0.023, 0.023, 0.0, 0.1},
    {0.06, -0.605, 0.023, 0.046, 0.0, 0.1},
};

void add_disc(Phantom& ph, const Disc& d) {
    const Grid3& g = ph.grid;
    const double x_lo = g.origin.x, x_hi = g.origin.x + (g.nx - 1) * g.dx;
    const double z_lo = g.origin.z, z_hi = g.origin.z + (g.nz - 1) * g.dz;
    if (d.cx - d.radius < x_lo || d.cx + d.radius > x_hi ||
        d.cz - d.radius < z_lo || d.cz + d.radius > z_hi)
        ph.warnings.push_back("disc at (" + std::to_string(d.cx) + ", " +
                              std::to_string(d.cz) + ") extends outside the grid; clipped");
    const double r2 = d.radius * d.radius;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j) {
            const double y = g.origin.y + j * g.dy;
            if (y < d.y_min || y > d.y_max) continue;
            for (int i = 0; i < g.nx; ++i) {
                const Vec3 p = g.position(i, j, k);
                const double ddx = p.x - d.cx, ddz = p.z - d.cz;
                if (ddx * ddx + ddz * ddz <= r2)
                    ph.at(i, j, k) += d.intensity;
            }
        }
}

}  // namespace

Phantom make_phantom(const std::string& kind, const Grid3& grid,
                     const PhantomParams& params, std::uint64_t seed) {
    Phantom ph;
    ph.grid = grid;
    ph.values.assign(grid.size(), 0.0);
    ph.kind = kind;

    const double ext_x = (grid.nx - 1) * grid.dx;
    const double ext_z = (grid.nz - 1) * grid.dz;
    const double cx = grid.origin.x + 0.5 * ext_x;
    const double cz = grid.origin.z + 0.5 * ext_z;

    if (kind == "disk-set") {
        for (const Disc& d : params.discs) add_disc(ph, d);
        Rng rng(seed);
        for (int r = 0; r < params.random_discs; ++r) {
            Disc d;
            d.cx = cx + (rng.uniform() - 0.5) * 0.7 * ext_x;
            d.cz = cz + (rng.uniform() - 0.5) * 0.7 * ext_z;
            d.radius = (0.03 + 0.1 * rng.uniform()) * std::min(ext_x, ext_z);
            d.intensity = 0.3 + 0.7 * rng.uniform();
            add_disc(ph, d);
        }
    } else if (kind == "shepp-logan-like") {
        const double sx = 0.5 * ext_x, sz = 0.5 * ext_z;
        for (int k = 0; k < grid.nz; ++k)
            for (int j = 0; j < grid.ny; ++j)
                for (int i = 0; i < grid.nx; ++i) {
                    const Vec3 p = grid.position(i, j, k);
                    const double u = sx > 0 ? (p.x - cx) / sx : 0.0;
                    const double v = sz > 0 ? (p.z - cz) / sz : 0.0;
                    double val = 0.0;
                    for (const Ellipse& e : kSheppLogan) {
                        const double th = e.angle_deg * M_PI / 180.0;
                        const double du = std::cos(th) * (u - e.cx) + std::sin(th) * (v - e.cz);
                        const double dv = -std::sin(th) * (u - e.cx) + std::cos(th) * (v - e.cz);
                        if ((du / e.a) * (du / e.a) + (dv / e.b) * (dv / e.b) <= 1.0)
                            val += e.intensity;
                    }
                    ph.at(i, j, k) = std::max(0.0, val);
                }
    } else if (kind == "imported") {
        if (params.raster_path.empty())
            throw config_error("make_phantom: imported kind needs raster_path");
        const PgmImage img = load_pgm(params.raster_path);
        if (img.width != grid.nx || img.height != grid.nz)
            throw config_error("make_phantom: raster is " + std::to_string(img.width) +
                               "x" + std::to_string(img.height) + ", grid wants " +
                               std::to_string(grid.nx) + "x" + std::to_string(grid.nz));
        for (int k = 0; k < grid.nz; ++k)
            for (int j = 0; j < grid.ny; ++j)
                for (int i = 0; i < grid.nx; ++i)
                    ph.at(i, j, k) =
                        params.raster_intensity * img.values[static_cast<std::size_t>(k) * grid.nx + i];
    } else {
        throw config_error("make_phantom: unknown kind '" + kind + "'");
    }
    return ph;
}

double phantom_mass(const Phantom& p) {
    double acc = 0.0;
    for (double v : p.values) acc += v;
    return acc;
}

void save_phantom_fmap(const Phantom& p, const std::string& path) {
    FieldMap m(p.grid, p.values, "phantom");
    save_fmap(m, path);
}

}  // namespace pmri
