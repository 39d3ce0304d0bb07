#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmri/core.hpp"
#include "pmri/exec.hpp"
#include "pmri/fieldmap.hpp"
#include "pmri/halbach.hpp"

namespace pmri {

/// Constraint set for the magnet score
///   score = mean_b0 - lambda_monotonic * (summed negative x-increments)
///           - lambda_range * max(0, range - range_cap).
struct FitnessTargets {
    Sphere roi;
    Grid3 eval_grid;             // samples restricted to the ROI sphere
    double b0_floor = 70e-3;     // T, feasibility threshold for mean B0
    double lambda_monotonic = 1e3;
    double lambda_range = 10.0;
    double range_cap = 8e-3;     // T
    double monotonic_tol = 1e-9; // T, minimum strict increment
};

struct FitnessReport {
    double mean_b0 = 0.0;      // T over ROI
    bool monotonic = false;    // strictly increasing along every ROI x line
    double field_range = 0.0;  // T, max - min over ROI
    double score = 0.0;
    double monotonic_violation = 0.0;  // summed negative increments, T
    int near_field_samples = 0;  // ROI samples closer than 2 cube sides to a magnet
};

FitnessReport evaluate_fitness(const Chromosome& chromosome,
                               const HalbachGeometry& geom,
                               const FitnessTargets& targets,
                               Exec exec = Exec::OpenMP);

struct GaParams {
    int population = 32;
    int generations = 100;
    int tournament_size = 3;
    double crossover_mix = 0.5;   // per-allele probability of taking parent B
    double mutation_p = -1.0;     // per-allele; < 0 means 1/slot_count
    int elitism = 1;
    double init_fill = 0.5;       // initial occupancy probability
    std::uint64_t seed = 1;
};

struct GaResult {
    Chromosome best;
    FitnessReport best_report;
    std::vector<double> best_history;   // per-generation best score
    std::vector<double> mean_history;   // per-generation population mean
    bool feasible = false;  // best meets b0_floor with a monotonic field
};

/// Tournament-selection GA over {Empty, N42, N52} placements. Deterministic
/// for a fixed seed: all stochastic steps run on one seeded stream and
/// fitness evaluation is pure (parallel within a generation).
/// An infeasible outcome is reported via `feasible`, never an error.
GaResult run_ga(const HalbachGeometry& geom, const FitnessTargets& targets,
                const GaParams& params, Exec exec = Exec::OpenMP);

std::string history_to_csv(const GaResult& result);

struct ShimOptions {
    double rel_tol = 1e-8;  // relative objective change convergence
    int max_iter = 20000;
};

struct ShimLayout {
    std::vector<Vec3> sites;
    std::vector<Vec3> moments;       // |moments[i]| <= bounds[i]
    std::vector<double> bounds;
    double rmse_before = 0.0;        // T, ||base - target|| RMS over ROI
    double rmse_after = 0.0;
    int iterations = 0;

    std::string to_text() const;  // "site x y z moment mx my mz" lines
};

/// Bounded linear least squares for the shim moments: minimizes the ROI RMS
/// of (base + shim field - target) subject to per-site moment-norm bounds,
/// by projected gradient descent (monotone, so the result is never worse
/// than zero shims). The scalar field being matched is the x component.
ShimLayout solve_shims(const FieldMap& base, const std::vector<Vec3>& sites,
                       const std::vector<double>& bounds, const LinearFit& target,
                       const Sphere& roi, const ShimOptions& options = {});

}  // namespace pmri
