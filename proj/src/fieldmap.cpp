#include "pmri/fieldmap.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace pmri {

Grid3::Grid3(int nx_, int ny_, int nz_, double dx_, double dy_, double dz_,
             Vec3 origin_)
    : nx(nx_), ny(ny_), nz(nz_), dx(dx_), dy(dy_), dz(dz_), origin(origin_) {
    if (nx < 1 || ny < 1 || nz < 1)
        throw config_error("Grid3: sample counts must be >= 1");
    if (!(dx > 0.0) || !(dy > 0.0) || !(dz > 0.0))
        throw config_error("Grid3: spacings must be positive");
}

bool Grid3::same_layout(const Grid3& o) const {
    return nx == o.nx && ny == o.ny && nz == o.nz && dx == o.dx && dy == o.dy &&
           dz == o.dz && origin.x == o.origin.x && origin.y == o.origin.y &&
           origin.z == o.origin.z;
}

FieldMap::FieldMap(Grid3 g, std::string label_)
    : grid(g), values(g.size(), 0.0), label(std::move(label_)) {}

FieldMap::FieldMap(Grid3 g, std::vector<double> v, std::string label_)
    : grid(g), values(std::move(v)), label(std::move(label_)) {
    if (values.size() != grid.size())
        throw config_error("FieldMap: value count does not match grid");
}

FieldMap& FieldMap::operator+=(const FieldMap& o) {
    if (!grid.same_layout(o.grid))
        throw config_error("FieldMap: grid mismatch in addition");
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
    return *this;
}

FieldMap& FieldMap::operator*=(double s) {
    for (double& v : values) v *= s;
    return *this;
}

void FieldMap::validate_finite() const {
    for (double v : values)
        if (!std::isfinite(v))
            throw numeric_error("FieldMap '" + label + "' has non-finite values");
}

Vec3 dipole_field(const Dipole& d, const Vec3& p) {
    const Vec3 r = p - d.position;
    const double rn2 = r.norm2();
    if (rn2 == 0.0)
        throw singularity_error("dipole_field: evaluation point coincides with dipole");
    const double rn = std::sqrt(rn2);
    const Vec3 rhat = r / rn;
    const double mdotr = d.moment.dot(rhat);
    const double k = 1e-7 / (rn2 * rn);  // mu0/(4 pi) / |r|^3
    return k * (3.0 * mdotr * rhat - d.moment);
}

namespace {

double pick(const Vec3& v, Axis a) {
    switch (a) {
        case Axis::X: return v.x;
        case Axis::Y: return v.y;
        default: return v.z;
    }
}

double synth_point(const std::vector<Dipole>& dipoles, const Vec3& p, Axis comp) {
    double acc = 0.0;
    for (std::size_t di = 0; di < dipoles.size(); ++di) {
        const Vec3 r = p - dipoles[di].position;
        if (r.norm2() == 0.0)
            throw singularity_error("synthesize_field: grid point coincides with dipole " +
                                    std::to_string(di));
        acc += pick(dipole_field(dipoles[di], p), comp);
    }
    return acc;
}

}  // namespace

FieldMap synthesize_field(const std::vector<Dipole>& dipoles, const Grid3& grid,
                          Axis component, Exec exec, std::string label) {
    FieldMap out(grid, label.empty() ? std::string("B") + axis_name(component)
                                     : std::move(label));
    const int nz = grid.nz, ny = grid.ny, nx = grid.nx;
    if (exec == Exec::OpenMP) {
#pragma omp parallel for collapse(2) schedule(static)
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i)
                    out.values[grid.index(i, j, k)] =
                        synth_point(dipoles, grid.position(i, j, k), component);
    } else {
        for (int k = 0; k < nz; ++k)
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i)
                    out.values[grid.index(i, j, k)] =
                        synth_point(dipoles, grid.position(i, j, k), component);
    }
    return out;
}

namespace {

// Solve the 4x4 normal system in place; throws on rank deficiency.
std::array<double, 4> solve4(std::array<std::array<double, 4>, 4> a,
                             std::array<double, 4> b, double scale_hint) {
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) <= 1e-12 * scale_hint)
            throw numeric_error(
                "linear_fit: rank-deficient sample set (coplanar or collinear ROI samples)");
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    return {b[0] / a[0][0], b[1] / a[1][1], b[2] / a[2][2], b[3] / a[3][3]};
}

}  // namespace

LinearFit linear_fit(const FieldMap& map, const Sphere& roi) {
    return linear_fit(map, roi, {Axis::X, Axis::Y, Axis::Z});
}

LinearFit linear_fit(const FieldMap& map, const Sphere& roi,
                     const std::vector<Axis>& axes) {
    bool use[3] = {false, false, false};
    for (Axis a : axes) use[static_cast<int>(a)] = true;

    // Normal equations for B ~ c0 + c1 x + c2 y + c3 z (gradient columns
    // restricted to `axes`); coordinates are centered on the ROI for
    // conditioning and shifted back afterwards.
    std::array<std::array<double, 4>, 4> ata{};
    std::array<double, 4> atb{};
    std::size_t n = 0;
    for (int k = 0; k < map.grid.nz; ++k)
        for (int j = 0; j < map.grid.ny; ++j)
            for (int i = 0; i < map.grid.nx; ++i) {
                const Vec3 p = map.grid.position(i, j, k);
                if (!roi.contains(p)) continue;
                const double v = map.at(i, j, k);
                if (!std::isfinite(v)) continue;
                const double row[4] = {1.0, use[0] ? p.x - roi.center.x : 0.0,
                                       use[1] ? p.y - roi.center.y : 0.0,
                                       use[2] ? p.z - roi.center.z : 0.0};
                for (int r = 0; r < 4; ++r) {
                    for (int c = 0; c < 4; ++c) ata[r][c] += row[r] * row[c];
                    atb[r] += row[r] * v;
                }
                ++n;
            }
    if (n < 4)
        throw numeric_error("linear_fit: ROI contains fewer than 4 usable samples");

    // Disabled axes get an identity row so the pivoting never stalls there.
    for (int a = 0; a < 3; ++a)
        if (!use[a]) ata[a + 1][a + 1] = 1.0;

    // Scale hint: typical magnitude of the moment matrix entries.
    double scale = 0.0;
    for (int r = 0; r < 4; ++r) scale = std::max(scale, std::abs(ata[r][r]));
    const auto c = solve4(ata, atb, scale);

    LinearFit fit;
    fit.g = {use[0] ? c[1] : 0.0, use[1] ? c[2] : 0.0, use[2] ? c[3] : 0.0};
    fit.b0 = c[0] - fit.g.dot(roi.center);
    fit.roi = roi;

    double ss = 0.0;
    for (int k = 0; k < map.grid.nz; ++k)
        for (int j = 0; j < map.grid.ny; ++j)
            for (int i = 0; i < map.grid.nx; ++i) {
                const Vec3 p = map.grid.position(i, j, k);
                if (!roi.contains(p)) continue;
                const double v = map.at(i, j, k);
                if (!std::isfinite(v)) continue;
                const double r = v - fit.ideal(p);
                ss += r * r;
            }
    fit.rmse = std::sqrt(ss / static_cast<double>(n));
    return fit;
}

FieldMap error_map(const FieldMap& map, const LinearFit& fit, const Sphere& roi) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int k = 0; k < map.grid.nz; ++k)
        for (int j = 0; j < map.grid.ny; ++j)
            for (int i = 0; i < map.grid.nx; ++i) {
                const Vec3 p = map.grid.position(i, j, k);
                if (!roi.contains(p)) continue;
                const double ideal = fit.ideal(p);
                lo = std::min(lo, ideal);
                hi = std::max(hi, ideal);
            }
    const double span = hi - lo;
    if (!(span > 0.0))
        throw numeric_error("error_map: ideal field span over ROI is zero (degenerate fit)");

    FieldMap out(map.grid, map.label + "_err_pct");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int k = 0; k < map.grid.nz; ++k)
        for (int j = 0; j < map.grid.ny; ++j)
            for (int i = 0; i < map.grid.nx; ++i) {
                const Vec3 p = map.grid.position(i, j, k);
                const std::size_t idx = map.grid.index(i, j, k);
                if (!roi.contains(p) || !std::isfinite(map.values[idx])) {
                    out.values[idx] = nan;
                    continue;
                }
                out.values[idx] = 100.0 * (map.values[idx] - fit.ideal(p)) / span;
            }
    return out;
}

FieldMap deformation_map(const FieldMap& map, const LinearFit& fit, Axis axis,
                         const Sphere& roi) {
    const double g_axis = pick(fit.g, axis);
    if (g_axis == 0.0)
        throw singularity_error(std::string("deformation_map: fitted gradient along ") +
                                axis_name(axis) + " vanishes (encoding hole)");

    FieldMap out(map.grid, map.label + "_deform_" + axis_name(axis));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int k = 0; k < map.grid.nz; ++k)
        for (int j = 0; j < map.grid.ny; ++j)
            for (int i = 0; i < map.grid.nx; ++i) {
                const Vec3 p = map.grid.position(i, j, k);
                const std::size_t idx = map.grid.index(i, j, k);
                if (!roi.contains(p) || !std::isfinite(map.values[idx])) {
                    out.values[idx] = nan;
                    continue;
                }
                // Remove b0 and the other two linear terms, then divide by the
                // axis gradient: what a linear-field recon takes the coordinate
                // to be.
                double off_axis = fit.b0;
                if (axis != Axis::X) off_axis += fit.g.x * p.x;
                if (axis != Axis::Y) off_axis += fit.g.y * p.y;
                if (axis != Axis::Z) off_axis += fit.g.z * p.z;
                const double apparent = (map.values[idx] - off_axis) / g_axis;
                out.values[idx] = apparent - pick(p, axis);
            }
    return out;
}

MapStats finite_stats(const FieldMap& map) {
    MapStats s;
    s.min = std::numeric_limits<double>::infinity();
    s.max = -s.min;
    double acc = 0.0, acc2 = 0.0;
    for (double v : map.values) {
        if (!std::isfinite(v)) continue;
        acc += v;
        acc2 += v * v;
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
        ++s.count;
    }
    if (s.count > 0) {
        s.mean = acc / static_cast<double>(s.count);
        s.rms = std::sqrt(acc2 / static_cast<double>(s.count));
    } else {
        s.min = s.max = 0.0;
    }
    return s;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void save_fmap(const FieldMap& map, const std::string& path) {
    const std::string bin_path = path + ".bin";
    const std::string bin_name = std::filesystem::path(bin_path).filename().string();
    std::ofstream hdr(path, std::ios::trunc);
    if (!hdr) throw io_error("save_fmap: cannot open " + path);
    hdr << "format FMAP\n"
        << "version 1\n"
        << "nx " << map.grid.nx << "\n"
        << "ny " << map.grid.ny << "\n"
        << "nz " << map.grid.nz << "\n"
        << "dx " << fmt_double(map.grid.dx) << "\n"
        << "dy " << fmt_double(map.grid.dy) << "\n"
        << "dz " << fmt_double(map.grid.dz) << "\n"
        << "origin " << fmt_double(map.grid.origin.x) << " "
        << fmt_double(map.grid.origin.y) << " " << fmt_double(map.grid.origin.z)
        << "\n"
        << "units T\n"
        << "label " << (map.label.empty() ? "B" : map.label) << "\n"
        << "data " << bin_name << "\n";
    if (!hdr) throw io_error("save_fmap: write failed for " + path);
    hdr.close();

    std::ofstream bin(bin_path, std::ios::trunc | std::ios::binary);
    if (!bin) throw io_error("save_fmap: cannot open " + bin_path);
    // Little-endian host assumed (x86/aarch64); values stored as raw float64.
    bin.write(reinterpret_cast<const char*>(map.values.data()),
              static_cast<std::streamsize>(map.values.size() * sizeof(double)));
    if (!bin) throw io_error("save_fmap: write failed for " + bin_path);
}

FieldMap load_fmap(const std::string& path) {
    std::ifstream hdr(path);
    if (!hdr) throw io_error("load_fmap: cannot open " + path);
    std::string line, key;
    Grid3 grid;
    int nx = 0, ny = 0, nz = 0;
    double dx = 0, dy = 0, dz = 0;
    Vec3 origin;
    std::string label = "B", data_name, format;
    int version = 0;
    while (std::getline(hdr, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        ss >> key;
        if (key == "format") ss >> format;
        else if (key == "version") ss >> version;
        else if (key == "nx") ss >> nx;
        else if (key == "ny") ss >> ny;
        else if (key == "nz") ss >> nz;
        else if (key == "dx") ss >> dx;
        else if (key == "dy") ss >> dy;
        else if (key == "dz") ss >> dz;
        else if (key == "origin") ss >> origin.x >> origin.y >> origin.z;
        else if (key == "units") { /* always Tesla */ }
        else if (key == "label") ss >> label;
        else if (key == "data") ss >> data_name;
        else throw io_error("load_fmap: unknown header key '" + key + "' in " + path);
        if (ss.fail())
            throw io_error("load_fmap: malformed value for key '" + key + "' in " + path);
    }
    if (format != "FMAP") throw io_error("load_fmap: missing 'format FMAP' in " + path);
    if (version != 1) throw io_error("load_fmap: unsupported FMAP version in " + path);
    Grid3 g(nx, ny, nz, dx, dy, dz, origin);

    std::string bin_path = data_name.empty()
                               ? path + ".bin"
                               : (std::filesystem::path(path).parent_path() / data_name)
                                     .string();
    std::ifstream bin(bin_path, std::ios::binary | std::ios::ate);
    if (!bin) throw io_error("load_fmap: cannot open " + bin_path);
    const std::streamsize bytes = bin.tellg();
    const std::streamsize want =
        static_cast<std::streamsize>(g.size() * sizeof(double));
    if (bytes != want)
        throw io_error("load_fmap: " + bin_path + " holds " + std::to_string(bytes) +
                       " bytes, expected " + std::to_string(want));
    bin.seekg(0);
    std::vector<double> vals(g.size());
    bin.read(reinterpret_cast<char*>(vals.data()), want);
    if (!bin) throw io_error("load_fmap: short read from " + bin_path);
    return FieldMap(g, std::move(vals), label);
}

}  // namespace pmri
