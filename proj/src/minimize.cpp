#include "fracperim/minimize.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <limits>
#include <numeric>

#include "fracperim/approx.hpp"
#include "fracperim/parallel.hpp"

namespace fracperim {

MinimizationProblem MinimizationProblem::on_window(const DomainWindow& window, const CellSet& exterior_data,
                                                   const InteractionTable& table) {
    return {window, exterior_data, window.omega, &table};
}

void MinimizationProblem::validate() const {
    if (table == nullptr) throw Error(ErrorCode::InvalidArgument, "problem has no interaction table");
    if (!(window.spec == exterior_data.spec)) throw Error(ErrorCode::SpecMismatch, "window and data grids differ");
    if (!table->compatible_with(window.spec)) throw Error(ErrorCode::SpecMismatch, "table does not match the grid");
    if (free_cells.size() != window.spec.cell_count() || !free_cells.subset_of(window.omega))
        throw Error(ErrorCode::InvalidArgument, "free cells must lie in the window");
}

double ReducedProblem::energy(const std::vector<double>& x) const {
    const std::size_t n = size();
    CompensatedSum acc;
    for (std::size_t i = 0; i < n; ++i) {
        acc.add(x[i] * to_complement[i] + (1.0 - x[i]) * to_set[i]);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = std::abs(x[i] - x[j]);
            if (d != 0.0) acc.add(weight(i, j) * d);
        }
    }
    acc.add(constant);
    return acc.value();
}

ReducedProblem reduce(const MinimizationProblem& p) {
    p.validate();
    const GridSpec& spec = p.window.spec;
    const InteractionTable& table = *p.table;
    const CellSet& data = p.exterior_data;
    const ExteriorField exterior = exterior_masses(spec, data.exterior, table, p.window.policy);

    ReducedProblem r;
    r.cells = p.free_cells.indices();
    const std::size_t n = r.cells.size();
    const std::size_t total = spec.cell_count();
    std::vector<long> codes(total);
    for (std::size_t i = 0; i < total; ++i) codes[i] = table.code(spec.coords(i));

    r.weights.assign(n * n, 0.0);
    r.to_set.assign(n, 0.0);
    r.to_complement.assign(n, 0.0);
    r.row_sums.assign(n, 0.0);
    parallel_for(n, [&](std::size_t a) {
        const std::size_t i = r.cells[a];
        for (std::size_t b = 0; b < n; ++b)
            if (b != a) r.weights[a * n + b] = table.at(codes[r.cells[b]] - codes[i]);
        CompensatedSum in_set, in_comp, row;
        for (std::size_t j = 0; j < total; ++j) {
            if (p.free_cells.test(j)) continue;
            (data.inside.test(j) ? in_set : in_comp).add(table.at(codes[j] - codes[i]));
        }
        in_set.add(exterior.mass_in_set[i]);
        in_comp.add(exterior.mass_in_complement[i]);
        r.to_set[a] = in_set.value();
        r.to_complement[a] = in_comp.value();
        for (std::size_t b = 0; b < n; ++b) row.add(r.weights[a * n + b]);
        r.row_sums[a] = row.value();
    });

    // fixed-fixed contribution: whatever the window counts beyond the free part
    std::vector<double> x(n);
    for (std::size_t a = 0; a < n; ++a) x[a] = data.inside.test(r.cells[a]) ? 1.0 : 0.0;
    const double full = perimeter(data, p.window, table, exterior).total;
    r.constant = full - r.energy(x);
    return r;
}

namespace {

struct LevelScan {
    std::vector<double> x;  // best superlevel indicator on the free cells
    double energy = std::numeric_limits<double>::infinity();
    double threshold = 0.5;
};

/// Energies of every superlevel set of u, by adding cells in decreasing
/// order of u; candidates within a relative 1e-9 of the best are re-scored
/// exactly and ties go to the lexicographically smallest mask.
LevelScan scan_levels(const ReducedProblem& r, const std::vector<double>& u) {
    const std::size_t n = r.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return u[a] > u[b]; });

    // sorted distinct levels, with 0 and 1 added
    std::vector<double> levels(u.begin(), u.end());
    levels.push_back(0.0);
    levels.push_back(1.0);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

    struct Candidate {
        std::size_t prefix;
        double energy;
        double threshold;
    };
    std::vector<Candidate> candidates;
    std::vector<double> inner(n, 0.0);  // sum of weights to cells already added
    double energy = std::accumulate(r.to_set.begin(), r.to_set.end(), r.constant);
    std::size_t added = 0;
    candidates.push_back({0, energy, 1.0});  // empty
    // walk levels from the top: t in (levels[k], levels[k+1]) keeps cells with u > t
    for (std::size_t k = levels.size() - 1; k-- > 0;) {
        const double t = 0.5 * (levels[k] + levels[k + 1]);
        while (added < n && u[order[added]] > t) {
            const std::size_t c = order[added];
            energy += r.to_complement[c] - r.to_set[c] + r.row_sums[c] - 2.0 * inner[c];
            for (std::size_t j = 0; j < n; ++j) inner[j] += r.weight(j, c);
            ++added;
        }
        candidates.push_back({added, energy, t});
    }
    while (added < n) {
        const std::size_t c = order[added];
        energy += r.to_complement[c] - r.to_set[c] + r.row_sums[c] - 2.0 * inner[c];
        for (std::size_t j = 0; j < n; ++j) inner[j] += r.weight(j, c);
        ++added;
    }
    candidates.push_back({n, energy, -0.5});  // full
    double best = std::numeric_limits<double>::infinity();
    for (const Candidate& c : candidates) best = std::min(best, c.energy);

    LevelScan out;
    std::vector<double> x(n);
    std::vector<double> best_x;
    for (const Candidate& c : candidates) {
        if (c.energy > best + 1e-9 * (1.0 + std::abs(best))) continue;
        std::fill(x.begin(), x.end(), 0.0);
        for (std::size_t a = 0; a < c.prefix; ++a) x[order[a]] = 1.0;
        const double exact = r.energy(x);
        const double slack = 1e-12 * (1.0 + std::abs(exact));
        const bool better = exact < out.energy - slack ||
                            (std::abs(exact - out.energy) <= slack && std::lexicographical_compare(x.begin(), x.end(), best_x.begin(), best_x.end()));
        if (best_x.empty() || better) {
            out.energy = exact;
            out.threshold = c.threshold;
            best_x = x;
        }
    }
    out.x = best_x;
    return out;
}

bool binary_better(const ReducedProblem&, const std::vector<double>& a, double ea, const std::vector<double>& b,
                   double eb) {
    const double slack = 1e-12 * (1.0 + std::abs(eb));
    if (ea < eb - slack) return true;
    if (ea > eb + slack) return false;
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

CellSet assemble(const MinimizationProblem& p, const ReducedProblem& r, const std::vector<double>& x) {
    CellSet out = p.exterior_data;
    for (std::size_t a = 0; a < r.size(); ++a) out.inside.set(r.cells[a], x[a] > 0.5);
    return out;
}

ScalarField assemble_field(const MinimizationProblem& p, const ReducedProblem& r, const std::vector<double>& u) {
    ScalarField out = ScalarField::indicator(p.exterior_data);
    for (std::size_t a = 0; a < r.size(); ++a) out.values[r.cells[a]] = u[a];
    return out;
}

/// (K^T P)_i + c_i for the antisymmetric dual P and the lower bound it gives.
double dual_bound(const ReducedProblem& r, const std::vector<double>& dual) {
    const std::size_t n = r.size();
    CompensatedSum acc;
    for (std::size_t i = 0; i < n; ++i) {
        CompensatedSum g;
        for (std::size_t j = 0; j < n; ++j) g.add(r.weight(i, j) * dual[i * n + j]);
        g.add(r.to_complement[i] - r.to_set[i]);
        acc.add(std::min(0.0, g.value()));
        acc.add(r.to_set[i]);
    }
    acc.add(r.constant);
    return acc.value();
}

}  // namespace

RelaxedSolution solve_relaxed(const MinimizationProblem& p, const SolverOptions& options) {
    const ReducedProblem r = reduce(p);
    const std::size_t n = r.size();
    const GridSpec& spec = p.window.spec;

    RelaxedSolution sol;
    if (n == 0) {
        sol.u = ScalarField::indicator(p.exterior_data);
        sol.energy = r.energy({});
        sol.best_superlevel = p.exterior_data.inside;
        sol.history = {sol.energy};
        return sol;
    }

    const CellSet& start = options.warm_start ? *options.warm_start : p.exterior_data;
    const ScalarField init = mollify(start, {2.0 * spec.h});
    std::vector<double> u(n), c(n);
    for (std::size_t a = 0; a < n; ++a) {
        u[a] = std::clamp(init.values[r.cells[a]], 0.0, 1.0);
        c[a] = r.to_complement[a] - r.to_set[a];
    }

    std::vector<double> best_u = u;
    double best_energy = r.energy(u);
    double best_dual = -std::numeric_limits<double>::infinity();
    LevelScan best_level = scan_levels(r, u);
    sol.history.push_back(best_energy);

    std::vector<double> dual(n * n, 0.0);  // antisymmetric, |entries| <= 1
    std::vector<double> dual_avg;            // step-weighted mean of subgradient duals
    double step_total = 0.0;
    if (options.method == RelaxedMethod::Subgradient) dual_avg.assign(n * n, 0.0);
    std::vector<double> u_bar = u, u_next(n), grad(n);
    const double max_row = *std::max_element(r.row_sums.begin(), r.row_sums.end());
    const double step0 = max_row > 0.0 ? 0.5 / max_row : 0.5;

    constexpr int window = 50;
    auto certified = [&] {
        const double scale = 1.0 + std::abs(best_level.energy);
        return best_level.energy - best_dual <= options.gap_tol * scale ||
               best_energy - best_dual <= options.gap_tol * scale;
    };

    int k = 0;
    bool converged = false;
    for (k = 1; k <= options.max_iter; ++k) {
        if (options.method == RelaxedMethod::PrimalDual) {
            // diagonal preconditioning: sigma_ij = 1/(2 w_ij), tau_i = 1/sum_j w_ij
            parallel_for(n, [&](std::size_t i) {
                for (std::size_t j = i + 1; j < n; ++j) {
                    if (r.weight(i, j) == 0.0) continue;
                    const double v = std::clamp(dual[i * n + j] + 0.5 * (u_bar[i] - u_bar[j]), -1.0, 1.0);
                    dual[i * n + j] = v;
                    dual[j * n + i] = -v;
                }
            });
            parallel_for(n, [&](std::size_t i) {
                double g = c[i];
                for (std::size_t j = 0; j < n; ++j) g += r.weight(i, j) * dual[i * n + j];
                const double tau = r.row_sums[i] > 0.0 ? 1.0 / r.row_sums[i] : 1.0;
                u_next[i] = std::clamp(u[i] - tau * g, 0.0, 1.0);
            });
            for (std::size_t i = 0; i < n; ++i) {
                u_bar[i] = 2.0 * u_next[i] - u[i];
                u[i] = u_next[i];
            }
        } else {
            parallel_for(n, [&](std::size_t i) {
                double g = c[i];
                for (std::size_t j = 0; j < n; ++j) {
                    const double d = u[i] - u[j];
                    if (d > 0.0) g += r.weight(i, j);
                    else if (d < 0.0) g -= r.weight(i, j);
                }
                grad[i] = g;
            });
            const double step = step0 / std::sqrt(static_cast<double>(k));
            for (std::size_t i = 0; i < n; ++i) u[i] = std::clamp(u[i] - step * grad[i], 0.0, 1.0);
            // the sign pattern that produced this step, averaged into a feasible dual
            step_total += step;
            const double mix = step / step_total;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double d = u_bar[i] - u_bar[j];
                    const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                    dual_avg[i * n + j] += mix * (sign - dual_avg[i * n + j]);
                }
            u_bar = u;
        }

        const double e = r.energy(u);
        if (e < best_energy) {
            best_energy = e;
            best_u = u;
        }
        sol.history.push_back(best_energy);
        if (k % 10 == 0 || k == options.max_iter) {
            best_dual = std::max(best_dual, dual_bound(r, dual_avg.empty() ? dual : dual_avg));
            LevelScan scan = scan_levels(r, u);
            if (binary_better(r, scan.x, scan.energy, best_level.x, best_level.energy)) best_level = std::move(scan);
            if (certified()) {
                converged = true;
                break;
            }
        }
        // subgradient steps are not monotone: wait for half the run without progress
        const int stall = options.method == RelaxedMethod::Subgradient ? std::max(window, k / 2) : window;
        if (k > stall) {
            const double before = sol.history[sol.history.size() - 1 - stall];
            if (before - best_energy < options.tol * (1.0 + std::abs(best_energy))) {
                converged = true;
                break;
            }
        }
    }

    LevelScan final_scan = scan_levels(r, best_u);
    if (binary_better(r, final_scan.x, final_scan.energy, best_level.x, best_level.energy))
        best_level = std::move(final_scan);
    sol.u = assemble_field(p, r, best_u);
    sol.energy = best_energy;
    sol.iterations = std::min(k, options.max_iter);
    sol.kkt_residual = std::max(0.0, best_energy - best_dual);
    sol.best_superlevel = assemble(p, r, best_level.x).inside;
    if (!converged) throw ConvergenceFailure("relaxed solver hit max_iter", std::move(sol));
    return sol;
}

SolverReport threshold_minimizer(const ScalarField& u, const MinimizationProblem& p) {
    const ReducedProblem r = reduce(p);
    std::vector<double> values(r.size());
    for (std::size_t a = 0; a < r.size(); ++a) values[a] = u.values[r.cells[a]];
    const LevelScan scan = scan_levels(r, values);
    SolverReport report;
    report.relaxed_energy = relaxed_energy(u, p.window, *p.table);
    report.threshold = scan.threshold;
    report.minimizer = assemble(p, r, scan.x);
    report.energy = perimeter(report.minimizer, p.window, *p.table).total;
    return report;
}

SolverReport minimize(const MinimizationProblem& p, const SolverOptions& options) {
    RelaxedSolution sol;
    try {
        sol = solve_relaxed(p, options);
    } catch (const ConvergenceFailure& failure) {
        sol = failure.best();
    }
    SolverReport report = threshold_minimizer(sol.u, p);
    CellSet tracked = p.exterior_data;
    tracked.inside = sol.best_superlevel;
    const double tracked_energy = perimeter(tracked, p.window, *p.table).total;
    const double slack = 1e-12 * (1.0 + std::abs(report.energy));
    if (tracked_energy < report.energy - slack ||
        (std::abs(tracked_energy - report.energy) <= slack && tracked.inside < report.minimizer.inside)) {
        report.minimizer = tracked;
        report.energy = tracked_energy;
    }
    report.relaxed_energy = sol.energy;
    report.iterations = sol.iterations;
    report.kkt_residual = sol.kkt_residual;
    return report;
}

BruteForceResult brute_force_minimum(const MinimizationProblem& p) {
    p.validate();
    if (p.free_cells.count() > 24) throw Error(ErrorCode::OracleTooLarge, "brute force needs at most 24 free cells");
    const ReducedProblem r = reduce(p);
    const std::size_t n = r.size();

    // Gray-code walk with incremental energies
    std::vector<double> x(n, 0.0), inner(n, 0.0);
    double energy = std::accumulate(r.to_set.begin(), r.to_set.end(), r.constant);
    std::vector<std::uint32_t> candidates{0};
    double best = energy;
    const std::uint64_t count = std::uint64_t{1} << n;
    std::uint32_t code = 0;
    for (std::uint64_t step = 1; step < count; ++step) {
        const int bit = std::countr_zero(step);
        const std::size_t c = static_cast<std::size_t>(bit);
        const double sign = x[c] == 0.0 ? 1.0 : -1.0;
        energy += sign * (r.to_complement[c] - r.to_set[c] + r.row_sums[c] - 2.0 * inner[c]);
        x[c] = 1.0 - x[c];
        for (std::size_t j = 0; j < n; ++j) inner[j] += sign * r.weight(j, c);
        code ^= std::uint32_t{1} << bit;
        const double window = 1e-6 * (1.0 + std::abs(best));
        if (energy < best - window) {
            best = energy;
            candidates.clear();
            candidates.push_back(code);
        } else if (energy <= best + window) {
            best = std::min(best, energy);
            candidates.push_back(code);
        }
    }

    std::vector<double> best_x, trial(n);
    double best_energy = std::numeric_limits<double>::infinity();
    for (std::uint32_t cand : candidates) {
        for (std::size_t a = 0; a < n; ++a) trial[a] = (cand >> a) & 1u ? 1.0 : 0.0;
        const double e = r.energy(trial);
        if (best_x.empty() || binary_better(r, trial, e, best_x, best_energy)) {
            best_x = trial;
            best_energy = e;
        }
    }
    BruteForceResult out;
    out.minimizer = assemble(p, r, best_x);
    out.energy = perimeter(out.minimizer, p.window, *p.table).total;
    return out;
}

bool is_box_or_l_shape(const GridSpec& spec, const CellMask& omega) {
    const std::vector<std::size_t> cells = omega.indices();
    if (cells.empty()) return false;
    CellCoord lo{INT32_MAX, INT32_MAX, INT32_MAX}, hi{INT32_MIN, INT32_MIN, INT32_MIN};
    for (std::size_t i : cells) {
        const CellCoord c = spec.coords(i);
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], c[a]);
            hi[a] = std::max(hi[a], c[a]);
        }
    }
    CellMask hole(spec.cell_count());
    for (int z = lo[2]; z <= hi[2]; ++z)
        for (int y = lo[1]; y <= hi[1]; ++y)
            for (int x = lo[0]; x <= hi[0]; ++x) {
                const std::size_t i = spec.index({x, y, z});
                if (!omega.test(i)) hole.set(i);
            }
    if (hole.none()) return true;
    // the missing part must be a box touching a corner of the bounding box
    CellCoord hlo{INT32_MAX, INT32_MAX, INT32_MAX}, hhi{INT32_MIN, INT32_MIN, INT32_MIN};
    for (std::size_t i : hole.indices()) {
        const CellCoord c = spec.coords(i);
        for (int a = 0; a < 3; ++a) {
            hlo[a] = std::min(hlo[a], c[a]);
            hhi[a] = std::max(hhi[a], c[a]);
        }
    }
    std::size_t volume = 1;
    for (int a = 0; a < 3; ++a) volume *= static_cast<std::size_t>(hhi[a] - hlo[a] + 1);
    if (volume != hole.count()) return false;
    for (int a = 0; a < spec.dim; ++a)
        if (hlo[a] != lo[a] && hhi[a] != hi[a]) return false;
    return true;
}

namespace {

bool minimal_with_free(const CellSet& set, const DomainWindow& window, const CellMask& free_cells,
                       const InteractionTable& table, double tol) {
    MinimizationProblem p{window, set, free_cells, &table};
    const BruteForceResult best = brute_force_minimum(p);
    const double own = perimeter(set, window, table).total;
    return own <= best.energy + tol * (1.0 + std::abs(best.energy));
}

}  // namespace

MinimalityReport check_minimality_equivalence(const CellSet& set, const DomainWindow& window,
                                              const InteractionTable& table, double tol) {
    const GridSpec& spec = window.spec;
    MinimalityReport report;
    report.untested_domain = !is_box_or_l_shape(spec, window.omega);
    report.global_ok = minimal_with_free(set, window, window.omega, table, tol);

    const ScalarField distance = signed_distance(window);
    const DomainWindow inner = sublevel_window(window, distance, -spec.h);
    if (inner.omega.none()) {
        report.degenerate = true;
        report.compact_ok = true;
        report.local_ok = true;
        return report;
    }
    report.compact_ok = minimal_with_free(set, window, inner.omega, table, tol);

    report.local_ok = true;
    for (int k = 1;; ++k) {
        const DomainWindow sub = sublevel_window(window, distance, -k * spec.h);
        if (sub.omega.none()) break;
        if (!minimal_with_free(set, sub, sub.omega, table, tol)) {
            report.local_ok = false;
            break;
        }
    }
    return report;
}

LocalMinimalityRun solve_locally_minimal(const MinimizationProblem& p, const std::vector<DomainWindow>& windows,
                                         const SolverOptions& options) {
    if (windows.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one window");
    for (std::size_t k = 1; k < windows.size(); ++k)
        if (!windows[k - 1].omega.subset_of(windows[k].omega))
            throw Error(ErrorCode::NotNested, "windows must increase");
    if (!windows.back().omega.subset_of(p.window.omega))
        throw Error(ErrorCode::NotNested, "windows must lie in the problem window");

    LocalMinimalityRun run;
    SolverOptions opts = options;
    for (const DomainWindow& w : windows) {
        MinimizationProblem step{w, p.exterior_data, w.omega & p.free_cells, p.table};
        SolverReport report = minimize(step, opts);
        opts.warm_start = report.minimizer;
        run.inner_energies.push_back(perimeter(report.minimizer, windows.front(), *p.table).total);
        run.steps.push_back(std::move(report));
    }
    for (std::size_t k = 0; k < run.inner_energies.size(); ++k) {
        bool stable = true;
        for (std::size_t j = k + 1; j < run.inner_energies.size(); ++j)
            stable = stable && std::abs(run.inner_energies[j] - run.inner_energies[k]) <=
                                   1e-6 * (1.0 + std::abs(run.inner_energies[k]));
        if (stable) {
            run.stabilized_at = static_cast<int>(k);
            break;
        }
    }
    return run;
}

}  // namespace fracperim
