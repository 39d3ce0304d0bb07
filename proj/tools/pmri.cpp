// pmri: portable low-field MRI simulation and reconstruction toolkit.
//
// One binary, subcommand style. Every command takes a JSON config plus
// optional --set key=value overrides, and writes a resolved-config echo
// sufficient to replay the run bit-identically.
//
// Exit codes: 0 success, 2 usage/config error, 3 I/O error, 4 numerical
// failure.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "pmri/bloch.hpp"
#include "pmri/core.hpp"
#include "pmri/encode.hpp"
#include "pmri/exec.hpp"
#include "pmri/fieldmap.hpp"
#include "pmri/io_util.hpp"
#include "pmri/magnet_opt.hpp"
#include "pmri/phantom.hpp"
#include "pmri/pulse.hpp"
#include "pmri/recon.hpp"
#include "pmri/sequence.hpp"

using json = nlohmann::json;
using namespace pmri;
namespace fs = std::filesystem;

namespace {

json load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open config " + path);
    json cfg;
    try {
        f >> cfg;
    } catch (const json::exception& e) {
        throw config_error("config " + path + ": " + e.what());
    }
    return cfg;
}

// --set a.b.c=value with value parsed as JSON when possible
void apply_overrides(json& cfg, const std::vector<std::string>& sets) {
    for (const std::string& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw config_error("--set expects key=value, got '" + s + "'");
        const std::string key = s.substr(0, eq);
        const std::string val = s.substr(eq + 1);
        json* node = &cfg;
        std::size_t pos = 0;
        while (true) {
            const auto dot = key.find('.', pos);
            const std::string part = key.substr(pos, dot - pos);
            if (dot == std::string::npos) {
                json parsed;
                try {
                    parsed = json::parse(val);
                } catch (const json::exception&) {
                    parsed = val;
                }
                (*node)[part] = parsed;
                break;
            }
            node = &(*node)[part];
            pos = dot + 1;
        }
    }
}

fs::path resolve_outdir(std::string out) {
    if (out.empty()) {
        const char* root = std::getenv("PMRI_OUTPUT_ROOT");
        if (!root || !*root)
            throw config_error("no --out given and PMRI_OUTPUT_ROOT is not set");
        out = root;
    }
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create output directory " + dir.string());
    return dir;
}

void write_config_echo(const json& cfg, const fs::path& dir, const std::string& cmd) {
    json echo = cfg;
    echo["_command"] = cmd;
    echo["_version"] = kVersion;
    write_text_file((dir / (cmd + ".config_echo.json")).string(), echo.dump(2) + "\n");
}

Vec3 vec3_of(const json& a) {
    if (!a.is_array() || a.size() != 3) throw config_error("expected a 3-vector");
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

Sphere sphere_of(const json& j) {
    return {vec3_of(j.at("center")), j.at("radius").get<double>()};
}

Grid3 grid_of(const json& j) {
    const auto n = j.at("n");
    const auto sp = j.at("spacing");
    return Grid3(n[0].get<int>(), n[1].get<int>(), n[2].get<int>(),
                 sp[0].get<double>(), sp[1].get<double>(), sp[2].get<double>(),
                 vec3_of(j.at("origin")));
}

HalbachGeometry geometry_of(const json& j) {
    HalbachGeometry geom;
    for (const auto& l : j.at("layers"))
        geom.layers.push_back({l.at("radius").get<double>(), l.at("rungs").get<int>(),
                               l.at("slots").get<int>(), l.at("pitch").get<double>()});
    if (j.contains("booster")) {
        const auto& b = j["booster"];
        geom.booster = BoosterRing{b.at("radius").get<double>(), b.at("z").get<double>(),
                                   b.at("slots").get<int>()};
    }
    geom.cube_side = j.value("cube_side", 0.0254);
    geom.br_n42 = j.value("br_n42", 1.30);
    geom.br_n52 = j.value("br_n52", 1.45);
    return geom;
}

PulseWaveform pulse_of(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const double dt = j.value("dt", 5e-7);
    if (kind == "wurst") {
        const double duration = j.at("duration").get<double>();
        const double bw = j.at("sweep_bw").get<double>();
        const int order = j.value("order", 40);
        double peak = j.value("peak_b1", 0.0);
        if (peak <= 0.0) {
            const std::string role = j.value("role", "excitation");
            peak = role == "refocusing" ? wurst_refocusing_peak_b1(duration, bw)
                                        : wurst_excitation_peak_b1(duration, bw);
        }
        return make_wurst(duration, bw, order, peak, dt);
    }
    if (kind == "hard") {
        return make_hard(j.at("duration").get<double>(),
                         j.at("flip").get<double>() * M_PI / 180.0, dt);
    }
    throw config_error("pulse kind must be 'wurst' or 'hard', got '" + kind + "'");
}

std::vector<double> axis_of(const json& j) {
    const double from = j.at("from").get<double>();
    const double to = j.at("to").get<double>();
    const int count = j.at("count").get<int>();
    if (count < 1) throw config_error("axis count must be >= 1");
    std::vector<double> v(count);
    for (int i = 0; i < count; ++i)
        v[i] = count == 1 ? from : from + (to - from) * i / (count - 1);
    return v;
}

void save_raster_pgm(const std::vector<double>& vals, int w, int h,
                     const fs::path& path, double lo, double hi, json& prov) {
    save_pgm16(path.string(), vals, w, h, lo, hi);
    prov["rasters"].push_back({{"file", path.filename().string()},
                               {"window_lo", lo},
                               {"window_hi", hi}});
}

// ----------------------------------------------------------------------
// simulate/recon shared pieces

struct MapsBundle {
    FieldMap gx;
    FieldMap gz;
};

// Either loads FMAPs or synthesizes separable linear(+quadratic) maps on
// the phantom slice grid.
MapsBundle maps_of(const json& j, const Grid3& slice_grid) {
    if (j.contains("gx_file")) {
        MapsBundle m{load_fmap(j.at("gx_file").get<std::string>()),
                     load_fmap(j.at("gz_file").get<std::string>())};
        if (j.value("demodulate_b0", false)) {
            // a raw B0 map encodes relative to the center Larmor frequency:
            // subtract the fitted constant, keep the spatial variation
            const Sphere all{{0, 0, 0}, 1e9};
            const LinearFit fit = linear_fit(m.gx, all, {Axis::X, Axis::Z});
            for (double& v : m.gx.values) v -= fit.b0;
        }
        return m;
    }
    const json& syn = j.at("synthesize");
    const double gx_g = syn.at("gx_gradient").get<double>();
    const double gz_g = syn.at("gz_gradient").get<double>();
    const double qx = syn.value("gx_quadratic_frac", 0.0);
    const double qz = syn.value("gz_quadratic_frac", 0.0);
    const double half_x = 0.5 * (slice_grid.nx - 1) * slice_grid.dx;
    const double half_z = 0.5 * (slice_grid.nz - 1) * slice_grid.dz;
    MapsBundle m{FieldMap(slice_grid, "Gx"), FieldMap(slice_grid, "Gz")};
    for (int k = 0; k < slice_grid.nz; ++k)
        for (int i = 0; i < slice_grid.nx; ++i) {
            const Vec3 p = slice_grid.position(i, 0, k);
            m.gx.at(i, 0, k) =
                gx_g * p.x + (half_x > 0 ? qx * gx_g / half_x * p.x * p.x : 0.0);
            m.gz.at(i, 0, k) =
                gz_g * p.z + (half_z > 0 ? qz * gz_g / half_z * p.z * p.z : 0.0);
        }
    return m;
}

Protocol protocol_of(const json& j, int nx, int ny, int nz) {
    AcquisitionProtocol timing;
    const json t = j.value("timing", json::object());
    timing.tr = t.value("tr", timing.tr);
    timing.te_eff = t.value("te_eff", timing.te_eff);
    timing.echo_spacing = t.value("echo_spacing", timing.echo_spacing);
    timing.dwell = t.value("dwell", timing.dwell);
    timing.tau = t.value("tau", timing.tau);
    timing.averages = t.value("averages", timing.averages);
    timing.gy_peak = t.value("gy_peak", timing.gy_peak);
    timing.gz_peak = t.value("gz_peak", timing.gz_peak);
    if (t.contains("ti")) timing.ti = t["ti"].get<double>();
    const Contrast contrast = contrast_from_name(j.value("contrast", "PD"));
    return build_protocol(contrast, nx, ny, nz, timing);
}

std::string protocol_hash_of(const Protocol& p) {
    return fnv1a_hex(p.acq.serialize() + p.table.to_csv());
}

// ----------------------------------------------------------------------
// subcommand handlers

int cmd_design_magnet(const json& cfg, const fs::path& dir) {
    const HalbachGeometry geom = geometry_of(cfg.at("geometry"));
    FitnessTargets targets;
    targets.roi = sphere_of(cfg.at("roi"));
    targets.eval_grid = grid_of(cfg.at("eval_grid"));
    const json tj = cfg.value("targets", json::object());
    targets.b0_floor = tj.value("b0_floor", targets.b0_floor);
    targets.lambda_monotonic = tj.value("lambda_monotonic", targets.lambda_monotonic);
    targets.lambda_range = tj.value("lambda_range", targets.lambda_range);
    targets.range_cap = tj.value("range_cap", targets.range_cap);

    GaParams ga;
    const json gj = cfg.value("ga", json::object());
    ga.population = gj.value("population", ga.population);
    ga.generations = gj.value("generations", ga.generations);
    ga.tournament_size = gj.value("tournament", ga.tournament_size);
    ga.crossover_mix = gj.value("crossover_mix", ga.crossover_mix);
    ga.mutation_p = gj.value("mutation_p", ga.mutation_p);
    ga.elitism = gj.value("elitism", ga.elitism);
    ga.init_fill = gj.value("init_fill", ga.init_fill);
    ga.seed = gj.value("seed", ga.seed);

    const GaResult res = run_ga(geom, targets, ga);
    write_text_file((dir / "chromosome.txt").string(), chromosome_to_text(res.best));
    write_text_file((dir / "history.csv").string(), history_to_csv(res));

    const Grid3 map_grid =
        cfg.contains("map_grid") ? grid_of(cfg["map_grid"]) : targets.eval_grid;
    const FieldMap bx = synthesize_field(realize_magnets(geom, res.best), map_grid,
                                         Axis::X, Exec::OpenMP, "Gx");
    save_fmap(bx, (dir / "magnet_bx.fmap").string());

    json report{{"mean_b0_T", res.best_report.mean_b0},
                {"field_range_T", res.best_report.field_range},
                {"monotonic", res.best_report.monotonic},
                {"score", res.best_report.score},
                {"feasible", res.feasible},
                {"near_field_samples", res.best_report.near_field_samples}};
    write_text_file((dir / "fitness_report.json").string(), report.dump(2) + "\n");
    std::cout << "design-magnet: mean B0 = " << res.best_report.mean_b0 * 1e3
              << " mT, monotonic = " << (res.best_report.monotonic ? "yes" : "no")
              << ", feasible = " << (res.feasible ? "yes" : "no") << "\n";
    return 0;
}

int cmd_shim(const json& cfg, const fs::path& dir) {
    const FieldMap base = load_fmap(cfg.at("base_map").get<std::string>());
    const Sphere roi = sphere_of(cfg.at("roi"));

    LinearFit target;
    if (cfg.contains("target")) {
        target.b0 = cfg["target"].value("b0", 0.0);
        target.g = vec3_of(cfg["target"].at("g"));
        target.roi = roi;
    } else {
        // target: the best linear fit of the base map itself
        target = base.grid.ny == 1 ? linear_fit(base, roi, {Axis::X, Axis::Z})
                                   : linear_fit(base, roi);
    }

    std::vector<Vec3> sites;
    const json& sj = cfg.at("sites");
    if (sj.contains("rings")) {
        for (const auto& r : sj["rings"]) {
            const int count = r.at("count").get<int>();
            for (int i = 0; i < count; ++i) {
                const double th = 2.0 * M_PI * i / count;
                sites.push_back({r.at("radius").get<double>() * std::cos(th),
                                 r.at("radius").get<double>() * std::sin(th),
                                 r.at("z").get<double>()});
            }
        }
    } else {
        for (const auto& p : sj.at("points")) sites.push_back(vec3_of(p));
    }
    std::vector<double> bounds(sites.size(), cfg.value("bound", 1.0));

    ShimOptions opts;
    opts.rel_tol = cfg.value("rel_tol", opts.rel_tol);
    opts.max_iter = cfg.value("max_iter", opts.max_iter);
    const ShimLayout lay = solve_shims(base, sites, bounds, target, roi, opts);

    write_text_file((dir / "shims.txt").string(), lay.to_text());
    FieldMap shimmed = base;
    std::vector<Dipole> shim_dipoles;
    for (std::size_t i = 0; i < sites.size(); ++i)
        shim_dipoles.push_back({sites[i], lay.moments[i]});
    const FieldMap delta =
        synthesize_field(shim_dipoles, base.grid, Axis::X, Exec::OpenMP, "shim");
    shimmed += delta;
    shimmed.label = base.label + "_shimmed";
    save_fmap(shimmed, (dir / "shimmed.fmap").string());

    std::cout << "shim: rmse before = " << lay.rmse_before
              << " T, after = " << lay.rmse_after << " T ("
              << (lay.rmse_before > 0
                      ? 100.0 * (1.0 - lay.rmse_after / lay.rmse_before)
                      : 0.0)
              << "% reduction)\n";
    return 0;
}

int cmd_pulse_profile(const json& cfg, const fs::path& dir) {
    json prov;
    const std::vector<double> b1 = axis_of(cfg.at("b1_scales"));
    const std::vector<double> offs = axis_of(cfg.at("offsets"));

    json exc_cfg = cfg.at("excitation");
    exc_cfg["role"] = "excitation";
    const PulseWaveform exc = pulse_of(exc_cfg);
    save_pulse_csv(exc, (dir / "excitation_pulse.csv").string());
    const ProfileGrid ep = excitation_profile(exc, b1, offs);
    save_profile_fmap(ep, (dir / "excitation_profile.fmap").string(), "Mxy");
    save_raster_pgm(ep.values, static_cast<int>(offs.size()),
                    static_cast<int>(b1.size()), dir / "excitation_profile.pgm",
                    0.0, 1.0, prov);

    json ref_cfg = cfg.at("refocusing");
    ref_cfg["role"] = "refocusing";
    const PulseWaveform ref = pulse_of(ref_cfg);
    save_pulse_csv(ref, (dir / "refocusing_pulse.csv").string());
    const ProfileGrid rp = refocusing_profile(ref, b1, offs);
    save_profile_fmap(rp, (dir / "refocusing_profile.fmap").string(), "echo");
    save_raster_pgm(rp.values, static_cast<int>(offs.size()),
                    static_cast<int>(b1.size()), dir / "refocusing_profile.pgm",
                    0.0, 1.0, prov);

    write_text_file((dir / "pulse_profile.provenance.json").string(),
                    prov.dump(2) + "\n");
    std::cout << "pulse-profile: " << b1.size() << " x " << offs.size()
              << " cells per profile\n";
    return 0;
}

int cmd_echo_train(const json& cfg, const fs::path& dir) {
    json exc_cfg = cfg.at("excitation");
    exc_cfg["role"] = "excitation";
    json ref_cfg = cfg.at("refocusing");
    ref_cfg["role"] = "refocusing";
    const PulseWaveform exc = pulse_of(exc_cfg);
    const PulseWaveform ref = pulse_of(ref_cfg);
    const std::vector<double> isos = axis_of(cfg.at("isochromats"));

    EchoTrainOptions opt;
    opt.n_echoes = cfg.value("n_echoes", opt.n_echoes);
    opt.echo_spacing = cfg.value("echo_spacing", opt.echo_spacing);
    opt.phase_cycle = cfg.value("phase_cycle", false);
    opt.b1_scale = cfg.value("b1_scale", 1.0);
    const EchoTrainResult res = simulate_echo_train(exc, ref, isos, opt);

    std::ostringstream summary;
    summary.precision(12);
    summary << "echo,label,time_s,re,im,abs\n";
    for (int k = 0; k < opt.n_echoes; ++k)
        summary << (k + 1) << "," << res.echo_label[k] << "," << res.echo_time[k]
                << "," << res.echo_signal[k].real() << ","
                << res.echo_signal[k].imag() << "," << std::abs(res.echo_signal[k])
                << "\n";
    write_text_file((dir / "echo_summary.csv").string(), summary.str());

    std::ostringstream phases;
    phases.precision(12);
    phases << "echo,label,offset_hz,phase_rad,magnitude\n";
    for (int k = 0; k < opt.n_echoes; ++k)
        for (std::size_t i = 0; i < isos.size(); ++i)
            phases << (k + 1) << "," << res.echo_label[k] << "," << isos[i] << ","
                   << std::arg(res.echo_by_iso[k][i]) << ","
                   << std::abs(res.echo_by_iso[k][i]) << "\n";
    write_text_file((dir / "echo_phase.csv").string(), phases.str());
    std::cout << "echo-train: " << opt.n_echoes << " echoes, " << isos.size()
              << " isochromats" << (opt.phase_cycle ? ", phase-cycled" : "") << "\n";
    return 0;
}

int cmd_simulate(const json& cfg, const fs::path& dir) {
    const auto mj = cfg.at("matrix");
    const int nx = mj.at("nx").get<int>();
    const int ny = mj.at("ny").get<int>();
    const int nz = mj.at("nz").get<int>();

    const Protocol proto = protocol_of(cfg, nx, ny, nz);

    const auto fov = cfg.at("fov");
    const double fov_x = fov.at("x").get<double>();
    const double fov_z = fov.at("z").get<double>();
    const double dx = fov_x / nx, dz = fov_z / nz;
    // y slabs at the pitch the blip table resolves (partition spacing)
    const double gamma = PhysicsConstants().gamma();
    const double dy =
        proto.table.y_max_index > 0
            ? proto.table.y_max_index / (ny * gamma * proto.acq.gy_peak * proto.acq.tau)
            : dz;
    Grid3 grid(nx, ny, nz, dx, dy, dz,
               {-0.5 * (nx - 1) * dx, -dy * (ny / 2), -0.5 * (nz - 1) * dz});
    Grid3 slice_grid(nx, 1, nz, dx, dy, dz, grid.origin);

    const MapsBundle maps = maps_of(cfg.at("maps"), slice_grid);

    PhantomParams pp;
    const json& pj = cfg.at("phantom");
    const std::string kind = pj.at("kind").get<std::string>();
    if (pj.contains("discs"))
        for (const auto& d : pj["discs"]) {
            Disc disc;
            disc.cx = d.at("cx").get<double>();
            disc.cz = d.at("cz").get<double>();
            disc.radius = d.at("radius").get<double>();
            disc.intensity = d.value("intensity", 1.0);
            if (d.contains("y_min")) disc.y_min = d["y_min"].get<double>();
            if (d.contains("y_max")) disc.y_max = d["y_max"].get<double>();
            pp.discs.push_back(disc);
        }
    pp.random_discs = pj.value("random_discs", 0);
    if (pj.contains("raster")) pp.raster_path = pj["raster"].get<std::string>();
    const std::uint64_t seed = cfg.value("seed", 1);
    const Phantom phantom = make_phantom(kind, grid, pp, seed);
    for (const std::string& w : phantom.warnings)
        std::cerr << "warning: " << w << "\n";

    SignalData data = simulate_3d(phantom, maps.gx, maps.gz, proto);
    const double sigma = cfg.value("noise_sigma", 0.0);
    if (sigma > 0.0) data = add_noise(data, sigma, seed);

    save_sigdat(data, (dir / "signal.sig").string());
    write_text_file((dir / "protocol.txt").string(), proto.acq.serialize());
    write_text_file((dir / "encode_table.csv").string(), proto.table.to_csv());
    save_fmap(maps.gx, (dir / "gx.fmap").string());
    save_fmap(maps.gz, (dir / "gz.fmap").string());
    save_phantom_fmap(phantom, (dir / "phantom.fmap").string());

    std::cout << "simulate: " << nz << " shots x " << ny << " echoes x " << nx
              << " samples, protocol hash " << data.protocol_hash << "\n";
    return 0;
}

int cmd_recon(const json& cfg, const fs::path& dir) {
    const SignalData data = load_sigdat(cfg.at("sigdat").get<std::string>());
    const AcquisitionProtocol acq = AcquisitionProtocol::deserialize(
        read_text_file(cfg.at("protocol").get<std::string>()));
    Protocol proto = build_protocol(acq.contrast, acq.n_readout,
                                    acq.echo_train_length, acq.n_shots, acq);

    if (protocol_hash_of(proto) != data.protocol_hash)
        throw config_error(
            "protocol hash mismatch: SIGDAT was simulated with hash " +
            data.protocol_hash + " but the supplied protocol hashes to " +
            protocol_hash_of(proto) +
            "; refusing to reconstruct with inconsistent encoding");

    FieldMap gx = load_fmap(cfg.at("maps").at("gx").get<std::string>());
    const FieldMap gz = load_fmap(cfg.at("maps").at("gz").get<std::string>());
    if (cfg.at("maps").value("demodulate_b0", false)) {
        const Sphere all{{0, 0, 0}, 1e9};
        const LinearFit fit = linear_fit(gx, all, {Axis::X, Axis::Z});
        for (double& v : gx.values) v -= fit.b0;
    }
    const Grid3& slice = gx.grid;

    const bool do_cg = cfg.value("cg", true);
    const bool do_fft = cfg.value("fft", true);
    const bool precondition = cfg.value("precondition", true);
    CgOptions cg_opts;
    cg_opts.tol = cfg.value("tol", 1e-3);
    cg_opts.max_iter = cfg.value("max_iter", 25);

    // per-axis fits for the FFT baseline and the deformation report
    const Sphere fit_roi =
        cfg.contains("fit_roi")
            ? sphere_of(cfg["fit_roi"])
            : Sphere{{0, 0, 0},
                     0.75 * std::max((slice.nx - 1) * slice.dx,
                                     (slice.nz - 1) * slice.dz)};
    const LinearFit fit_x = linear_fit(gx, fit_roi, {Axis::X, Axis::Z});
    const LinearFit fit_z = linear_fit(gz, fit_roi, {Axis::X, Axis::Z});

    std::optional<FieldMap> truth;
    if (cfg.contains("ground_truth"))
        truth = load_fmap(cfg["ground_truth"].get<std::string>());

    const auto partitions = partition_y(data, proto);
    json prov;
    std::ostringstream report;
    report.precision(12);
    report << "partition,method,iterations,final_rel_residual,rel_rmse_vs_truth\n";

    auto truth_rmse = [&](const Image& img, int j) {
        if (!truth) return std::numeric_limits<double>::quiet_NaN();
        double num = 0.0, den = 0.0;
        for (int k = 0; k < slice.nz; ++k)
            for (int i = 0; i < slice.nx; ++i) {
                const double t = truth->at(i, truth->grid.ny > 1 ? j : 0, k);
                const double d = std::abs(img.values[slice.index(i, 0, k)]) - t;
                num += d * d;
                den += t * t;
            }
        return den > 0 ? std::sqrt(num / den)
                       : std::numeric_limits<double>::quiet_NaN();
    };

    EncodeOperator op(gx, gz, proto.table, proto.acq);
    const Preconditioner pre = build_preconditioner(op);
    if (!pre.hole_pixels.empty())
        std::cerr << "warning: " << pre.hole_pixels.size()
                  << " encoding-hole pixels excluded from the preconditioner\n";

    for (std::size_t j = 0; j < partitions.size(); ++j) {
        double energy = 0.0;
        for (const auto& v : partitions[j].samples) energy += std::norm(v);
        if (energy == 0.0 && partitions.size() > 1) continue;  // empty slab

        if (do_cg) {
            const Image img = cg_solve(op, partitions[j].samples,
                                       precondition ? &pre : nullptr, cg_opts);
            const std::string stem = "cg_p" + std::to_string(j);
            FieldMap mag(slice, img.magnitude(), stem);
            save_fmap(mag, (dir / (stem + ".fmap")).string());
            const MapStats st = finite_stats(mag);
            save_raster_pgm(mag.values, slice.nx, slice.nz, dir / (stem + ".pgm"),
                            0.0, st.max > 0 ? st.max : 1.0, prov);
            report << j << ",CG," << img.provenance.iterations << ","
                   << img.provenance.final_rel_residual << ","
                   << truth_rmse(img, static_cast<int>(j)) << "\n";
        }
        if (do_fft) {
            const Image img = fft_recon(partitions[j], fit_x, fit_z, proto, slice);
            const std::string stem = "fft_p" + std::to_string(j);
            FieldMap mag(slice, img.magnitude(), stem);
            save_fmap(mag, (dir / (stem + ".fmap")).string());
            const MapStats st = finite_stats(mag);
            save_raster_pgm(mag.values, slice.nx, slice.nz, dir / (stem + ".pgm"),
                            0.0, st.max > 0 ? st.max : 1.0, prov);
            report << j << ",FFT,0,0," << truth_rmse(img, static_cast<int>(j))
                   << "\n";
        }
        if (do_cg && cfg.value("intensity_correction", false)) {
            const Image img = cg_solve(op, partitions[j].samples,
                                       precondition ? &pre : nullptr, cg_opts);
            // mask: pixels above a fraction of the image peak
            const double thresh = cfg.value("mask_threshold", 0.1);
            double peak = 0.0;
            for (const auto& v : img.values) peak = std::max(peak, std::abs(v));
            std::vector<std::uint8_t> mask(img.values.size(), 0);
            for (std::size_t p = 0; p < mask.size(); ++p)
                mask[p] = std::abs(img.values[p]) >= thresh * peak ? 1 : 0;
            const double fov = slice.nx * slice.dx;
            const Image corr =
                intensity_correct(img, mask, cfg.value("filter_sigma", fov / 8.0));
            if (!corr.provenance.note.empty())
                std::cerr << "warning: " << corr.provenance.note << "\n";
            const std::string stem = "cg_corrected_p" + std::to_string(j);
            FieldMap mag(slice, corr.magnitude(), stem);
            save_fmap(mag, (dir / (stem + ".fmap")).string());
            const MapStats st = finite_stats(mag);
            save_raster_pgm(mag.values, slice.nx, slice.nz, dir / (stem + ".pgm"),
                            0.0, st.max > 0 ? st.max : 1.0, prov);
        }
    }
    write_text_file((dir / "report.csv").string(), report.str());

    if (cfg.value("deformation_report", true)) {
        const FieldMap def = deformation_map(gx, fit_x, Axis::X, fit_roi);
        save_fmap(def, (dir / "deformation_x.fmap").string());
        const MapStats st = finite_stats(def);
        prov["deformation_x"] = {{"min_m", st.min}, {"max_m", st.max}, {"rms_m", st.rms}};
    }

    if (cfg.contains("snr_rois")) {
        const auto roi_of = [](const json& a) {
            return RectRoi{a[0].get<int>(), a[1].get<int>(), a[2].get<int>(),
                           a[3].get<int>()};
        };
        const RectRoi sig = roi_of(cfg["snr_rois"].at("signal"));
        const RectRoi bg = roi_of(cfg["snr_rois"].at("background"));
        std::ostringstream snr_csv;
        snr_csv << "acquisition,snr\n";
        for (std::size_t j = 0; j < partitions.size(); ++j) {
            double energy = 0.0;
            for (const auto& v : partitions[j].samples) energy += std::norm(v);
            if (energy == 0.0 && partitions.size() > 1) continue;
            const Image img = fft_recon(partitions[j], fit_x, fit_z, proto, slice);
            snr_csv << j << "," << compute_snr(img, sig, bg) << "\n";
        }
        write_text_file((dir / "snr.csv").string(), snr_csv.str());
    }

    prov["cg"] = {{"tol", cg_opts.tol},
                  {"max_iter", cg_opts.max_iter},
                  {"preconditioned", precondition}};
    write_text_file((dir / "recon.provenance.json").string(), prov.dump(2) + "\n");
    std::cout << "recon: " << partitions.size() << " partitions processed\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pmri: portable low-field MRI simulation and reconstruction"};
    app.require_subcommand(1);

    std::string config_path, out;
    std::vector<std::string> sets;
    int threads = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--out", out, "output directory (default: $PMRI_OUTPUT_ROOT)");
        sub->add_option("--set", sets, "override config entries, key.path=value");
        sub->add_option("--threads", threads, "cap worker threads (0 = default)");
    };

    CLI::App* design = app.add_subcommand("design-magnet", "GA magnet placement");
    CLI::App* shim = app.add_subcommand("shim", "bounded least-squares shimming");
    CLI::App* pulse = app.add_subcommand("pulse-profile", "Bloch pulse profiles");
    CLI::App* train = app.add_subcommand("echo-train", "chirped RARE echo train");
    CLI::App* simulate = app.add_subcommand("simulate", "3D RARE signal synthesis");
    CLI::App* recon = app.add_subcommand("recon", "CG and FFT reconstruction");
    for (CLI::App* sub : {design, shim, pulse, train, simulate, recon})
        add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        set_max_threads(threads);
        json cfg = load_config(config_path);
        apply_overrides(cfg, sets);
        const fs::path dir = resolve_outdir(out);

        if (design->parsed()) {
            write_config_echo(cfg, dir, "design-magnet");
            return cmd_design_magnet(cfg, dir);
        }
        if (shim->parsed()) {
            write_config_echo(cfg, dir, "shim");
            return cmd_shim(cfg, dir);
        }
        if (pulse->parsed()) {
            write_config_echo(cfg, dir, "pulse-profile");
            return cmd_pulse_profile(cfg, dir);
        }
        if (train->parsed()) {
            write_config_echo(cfg, dir, "echo-train");
            return cmd_echo_train(cfg, dir);
        }
        if (simulate->parsed()) {
            write_config_echo(cfg, dir, "simulate");
            return cmd_simulate(cfg, dir);
        }
        write_config_echo(cfg, dir, "recon");
        return cmd_recon(cfg, dir);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const io_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
