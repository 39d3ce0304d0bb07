#include "pmri/magnet_opt.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "pmri/rng.hpp"

namespace pmri {

FitnessReport evaluate_fitness(const Chromosome& chromosome,
                               const HalbachGeometry& geom,
                               const FitnessTargets& targets, Exec exec) {
    if (chromosome.size() != geom.slot_count())
        throw config_error("evaluate_fitness: chromosome length mismatch");

    const std::vector<Dipole> dipoles = realize_magnets(geom, chromosome);
    FieldMap bx = dipoles.empty()
                      ? FieldMap(targets.eval_grid, "Bx")
                      : synthesize_field(dipoles, targets.eval_grid, Axis::X, exec);

    FitnessReport rep;
    const Grid3& g = targets.eval_grid;
    double acc = 0.0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t count = 0;
    rep.monotonic = true;

    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j) {
            bool have_prev = false;
            double prev = 0.0;
            for (int i = 0; i < g.nx; ++i) {
                const Vec3 p = g.position(i, j, k);
                if (!targets.roi.contains(p)) {
                    have_prev = false;
                    continue;
                }
                const double v = bx.at(i, j, k);
                acc += v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
                ++count;
                if (have_prev) {
                    const double inc = v - prev;
                    if (inc < targets.monotonic_tol) rep.monotonic = false;
                    if (inc < 0.0) rep.monotonic_violation += -inc;
                }
                prev = v;
                have_prev = true;
            }
        }
    if (count == 0) throw config_error("evaluate_fitness: ROI contains no grid samples");

    rep.mean_b0 = acc / static_cast<double>(count);
    rep.field_range = count ? hi - lo : 0.0;
    if (dipoles.empty()) rep.monotonic = false;  // zero gradient

    // dipole-model validity: flag ROI samples too close to a magnet
    const double near = 2.0 * geom.cube_side;
    for (const Dipole& d : dipoles) {
        const double dist_to_center = (d.position - targets.roi.center).norm();
        if (dist_to_center < targets.roi.radius + near) {
            for (int k = 0; k < g.nz; ++k)
                for (int j = 0; j < g.ny; ++j)
                    for (int i = 0; i < g.nx; ++i) {
                        const Vec3 p = g.position(i, j, k);
                        if (targets.roi.contains(p) && (p - d.position).norm() < near)
                            ++rep.near_field_samples;
                    }
        }
    }

    rep.score = rep.mean_b0 - targets.lambda_monotonic * rep.monotonic_violation -
                targets.lambda_range * std::max(0.0, rep.field_range - targets.range_cap);
    return rep;
}

namespace {

Allele random_allele(Rng& rng) {
    switch (rng.integer(3)) {
        case 0: return Allele::Empty;
        case 1: return Allele::N42;
        default: return Allele::N52;
    }
}

}  // namespace

GaResult run_ga(const HalbachGeometry& geom, const FitnessTargets& targets,
                const GaParams& params, Exec exec) {
    if (params.population < 2) throw config_error("run_ga: population must be >= 2");
    if (params.generations < 1) throw config_error("run_ga: generations must be >= 1");
    const std::size_t n_slots = geom.slot_count();
    if (n_slots == 0) throw config_error("run_ga: geometry has no slots");
    const double mut_p =
        params.mutation_p >= 0.0 ? params.mutation_p : 1.0 / static_cast<double>(n_slots);

    Rng rng(params.seed);
    std::vector<Chromosome> pop(params.population, Chromosome(n_slots, Allele::Empty));
    for (auto& c : pop)
        for (auto& a : c)
            if (rng.uniform() < params.init_fill) a = rng.uniform() < 0.5 ? Allele::N42 : Allele::N52;

    std::vector<double> scores(params.population);
    std::vector<FitnessReport> reports(params.population);
    auto evaluate_all = [&]() {
        // pure evaluations; safe to run concurrently
#pragma omp parallel for schedule(dynamic) if (exec == Exec::OpenMP)
        for (int i = 0; i < params.population; ++i) {
            reports[i] = evaluate_fitness(pop[i], geom, targets, Exec::Serial);
            scores[i] = reports[i].score;
        }
    };
    evaluate_all();

    GaResult result;
    auto best_index = [&]() {
        int b = 0;
        for (int i = 1; i < params.population; ++i)
            if (scores[i] > scores[b]) b = i;
        return b;
    };
    int b = best_index();
    result.best = pop[b];
    result.best_report = reports[b];

    auto tournament = [&]() -> const Chromosome& {
        int winner = static_cast<int>(rng.integer(params.population));
        for (int t = 1; t < params.tournament_size; ++t) {
            const int c = static_cast<int>(rng.integer(params.population));
            if (scores[c] > scores[winner]) winner = c;
        }
        return pop[winner];
    };

    for (int gen = 0; gen < params.generations; ++gen) {
        std::vector<Chromosome> next;
        next.reserve(params.population);
        for (int e = 0; e < params.elitism && e < params.population; ++e)
            next.push_back(result.best);
        while (static_cast<int>(next.size()) < params.population) {
            const Chromosome& pa = tournament();
            const Chromosome& pb = tournament();
            Chromosome child(n_slots);
            for (std::size_t i = 0; i < n_slots; ++i)
                child[i] = rng.uniform() < params.crossover_mix ? pb[i] : pa[i];
            for (std::size_t i = 0; i < n_slots; ++i)
                if (rng.uniform() < mut_p) child[i] = random_allele(rng);
            next.push_back(std::move(child));
        }
        pop = std::move(next);
        evaluate_all();
        b = best_index();
        if (scores[b] > result.best_report.score) {
            result.best = pop[b];
            result.best_report = reports[b];
        }
        result.best_history.push_back(result.best_report.score);
        double mean = 0.0;
        for (double s : scores) mean += s;
        result.mean_history.push_back(mean / params.population);
    }

    result.feasible =
        result.best_report.monotonic && result.best_report.mean_b0 >= targets.b0_floor;
    return result;
}

std::string history_to_csv(const GaResult& result) {
    std::ostringstream ss;
    ss.precision(12);
    ss << "generation,best_score,mean_score\n";
    for (std::size_t g = 0; g < result.best_history.size(); ++g)
        ss << g << "," << result.best_history[g] << "," << result.mean_history[g] << "\n";
    return ss.str();
}

std::string ShimLayout::to_text() const {
    std::ostringstream ss;
    ss.precision(17);
    ss << "shims pmri.v1 " << sites.size() << "\n";
    for (std::size_t i = 0; i < sites.size(); ++i)
        ss << "site " << sites[i].x << " " << sites[i].y << " " << sites[i].z
           << " moment " << moments[i].x << " " << moments[i].y << " " << moments[i].z
           << "\n";
    return ss.str();
}

ShimLayout solve_shims(const FieldMap& base, const std::vector<Vec3>& sites,
                       const std::vector<double>& bounds, const LinearFit& target,
                       const Sphere& roi, const ShimOptions& options) {
    if (sites.empty()) throw config_error("solve_shims: no shim sites");
    if (bounds.size() != sites.size())
        throw config_error("solve_shims: bounds count does not match sites");
    if (target.g.norm2() == 0.0)
        throw config_error("solve_shims: target gradient is zero");

    // Collect ROI samples and the initial residual base - target.
    std::vector<Vec3> pts;
    std::vector<double> resid0;
    const Grid3& g = base.grid;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const Vec3 p = g.position(i, j, k);
                if (!roi.contains(p)) continue;
                const double v = base.at(i, j, k);
                if (!std::isfinite(v)) continue;
                pts.push_back(p);
                resid0.push_back(v - target.ideal(p));
            }
    const int n_samp = static_cast<int>(pts.size());
    if (n_samp == 0) throw config_error("solve_shims: ROI contains no samples");
    const int n_var = 3 * static_cast<int>(sites.size());

    // Response matrix: x-component of the dipole field per unit moment axis.
    Eigen::MatrixXd A(n_samp, n_var);
    for (int s = 0; s < n_samp; ++s)
        for (std::size_t i = 0; i < sites.size(); ++i) {
            for (int c = 0; c < 3; ++c) {
                Vec3 unit{c == 0 ? 1.0 : 0.0, c == 1 ? 1.0 : 0.0, c == 2 ? 1.0 : 0.0};
                A(s, 3 * static_cast<int>(i) + c) =
                    dipole_field({sites[i], unit}, pts[s]).x;
            }
        }
    Eigen::VectorXd r0 = Eigen::Map<const Eigen::VectorXd>(resid0.data(), n_samp);

    // Lipschitz constant of the gradient via power iteration on A^T A.
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n_var).normalized();
    double lip = 0.0;
    for (int it = 0; it < 50; ++it) {
        Eigen::VectorXd w = A.transpose() * (A * v);
        lip = w.norm();
        if (lip == 0.0) break;
        v = w / lip;
    }
    ShimLayout out;
    out.sites = sites;
    out.bounds = bounds;
    out.moments.assign(sites.size(), Vec3{});
    out.rmse_before = std::sqrt(r0.squaredNorm() / n_samp);
    if (lip == 0.0) {  // degenerate responses; zero moments are optimal
        out.rmse_after = out.rmse_before;
        return out;
    }

    // FISTA on the moment-ball-constrained least squares, with a monotone
    // safeguard (an accelerated step that raises the objective is replaced
    // by the plain projected-gradient step). Gradient Lipschitz constant is
    // 2 * ||A^T A||.
    const double step = 1.0 / (2.0 * lip);
    auto project = [&](Eigen::VectorXd& m) {
        for (std::size_t i = 0; i < sites.size(); ++i) {
            const int o = 3 * static_cast<int>(i);
            const double nrm = m.segment<3>(o).norm();
            if (nrm > bounds[i])
                m.segment<3>(o) *= (bounds[i] > 0.0 ? bounds[i] / nrm : 0.0);
        }
    };
    auto objective = [&](const Eigen::VectorXd& m) {
        return (A * m + r0).squaredNorm();
    };
    auto pg_step = [&](const Eigen::VectorXd& from) {
        Eigen::VectorXd out =
            from - step * 2.0 * (A.transpose() * (A * from + r0));
        project(out);
        return out;
    };

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_var);
    Eigen::VectorXd x_prev = x;
    double f_prev = objective(x);
    double t_momentum = 1.0;
    int it = 0;
    for (; it < options.max_iter; ++it) {
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
        Eigen::VectorXd y = x + ((t_momentum - 1.0) / t_next) * (x - x_prev);
        Eigen::VectorXd x_new = pg_step(y);
        double f_new = objective(x_new);
        if (f_new > f_prev) {  // safeguard: fall back and drop momentum
            x_new = pg_step(x);
            f_new = objective(x_new);
            t_momentum = 1.0;
        } else {
            t_momentum = t_next;
        }
        x_prev = x;
        x = x_new;
        const bool converged =
            f_prev - f_new <= options.rel_tol * std::max(f_prev, 1e-300);
        f_prev = f_new;
        if (converged && it > 0) {
            ++it;
            break;
        }
    }

    out.iterations = it;
    for (std::size_t i = 0; i < sites.size(); ++i) {
        const int o = 3 * static_cast<int>(i);
        out.moments[i] = {x[o], x[o + 1], x[o + 2]};
    }
    out.rmse_after = std::sqrt(f_prev / n_samp);
    // projected gradient from zero is monotone; never worse than no shims
    if (out.rmse_after > out.rmse_before) {
        out.moments.assign(sites.size(), Vec3{});
        out.rmse_after = out.rmse_before;
    }
    return out;
}

}  // namespace pmri
