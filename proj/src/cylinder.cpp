#include "fracperim/cylinder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "fracperim/error.hpp"
#include "fracperim/parallel.hpp"

namespace fracperim {

namespace {

bool is_multiple(double x, double h) { return std::abs(x / h - std::round(x / h)) < 1e-9; }

double integrate(const std::function<double(double)>& f, double a, double b) {
    if (!(b > a)) return 0.0;
    thread_local boost::math::quadrature::tanh_sinh<double> integrator;
    return integrator.integrate(f, a, b, 1e-12);
}

// int_I int_J f(|y - x|) dy dx as a single integral over delta = y - x, with
// breakpoints at the kinks of the overlap length and at delta = 0.
double interval_pair_integral(double a1, double b1, double a2, double b2, const std::function<double(double)>& f) {
    const double lo = a2 - b1, hi = b2 - a1;
    std::vector<double> cuts{lo, hi, a2 - a1, b2 - b1};
    if (lo < 0.0 && hi > 0.0) cuts.push_back(0.0);
    std::sort(cuts.begin(), cuts.end());
    auto overlap = [&](double delta) {
        return std::max(0.0, std::min(b1, b2 - delta) - std::max(a1, a2 - delta));
    };
    CompensatedSum sum;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
        sum.add(integrate(
            [&](double delta) {
                const double w = overlap(delta);
                return w > 0.0 && delta != 0.0 ? w * f(std::abs(delta)) : 0.0;
            },
            cuts[k], cuts[k + 1]));
    return sum.value();
}

void require_line_base(const GridSpec& base) {
    if (base.dim != 1) throw Error(ErrorCode::InvalidArgument, "cylinder experiments need a one-dimensional base");
}

void require_graph(const CylinderGeometry& g, const SubgraphExterior& v) {
    if (!(v.base == g.base) || v.heights.size() != g.base.cell_count() || !v.below)
        throw Error(ErrorCode::SpecMismatch, "graph data must be a subgraph tabulated on the base grid");
}

double max_abs_height(const SubgraphExterior& v, const CellMask* only) {
    double m = 0.0;
    for (std::size_t i = 0; i < v.heights.size(); ++i)
        if (!only || only->test(i)) m = std::max(m, std::abs(v.heights[i]));
    return m;
}

// Unit-scale interaction between cell [0,1] x [g, g+1] and the column
// [m, m+1] x (-inf, 0).
double unit_tail_weight(int m, int g, double s) {
    auto f = [&](double d) { return column_k2(d, g, s) - column_k2(d, g + 1.0, s); };
    return interval_pair_integral(0.0, 1.0, m, m + 1.0, f);
}

// Table of unit_tail_weight over |m| < columns, 0 <= g < gaps.
class TailTable {
public:
    TailTable(int columns, int gaps, double s) : columns_(columns), gaps_(gaps), values_((2 * columns - 1) * gaps) {
        parallel_for(values_.size(), [&](std::size_t idx) {
            const int m = static_cast<int>(idx / gaps_) - (columns_ - 1);
            const int g = static_cast<int>(idx % gaps_);
            values_[idx] = unit_tail_weight(m, g, s);
        });
    }
    double at(int m, int g) const { return values_[(m + columns_ - 1) * gaps_ + g]; }

private:
    int columns_, gaps_;
    std::vector<double> values_;
};

IntervalUnion sector_intervals(double sigma, double inner, double outer) {
    IntervalUnion out;
    if (sigma == 1.0) out.emplace_back(-outer, -inner);
    out.emplace_back(inner, outer);
    return out;
}

DivergenceScan run_scan(const CylinderGeometry& g, double sigma, double T0, const std::vector<double>& T_schedule,
                        double s) {
    if (!(s > 0.0 && s < 1.0)) throw Error(ErrorCode::InvalidParameter, "s must lie in (0,1)");
    if (T_schedule.empty()) throw Error(ErrorCode::InvalidSchedule, "empty T schedule");
    for (std::size_t i = 0; i < T_schedule.size(); ++i) {
        if (!(T_schedule[i] > T0)) throw Error(ErrorCode::InvalidSchedule, "every T must exceed T0");
        if (i > 0 && !(T_schedule[i] > T_schedule[i - 1]))
            throw Error(ErrorCode::InvalidSchedule, "T schedule must increase");
    }
    const IntervalUnion omega = g.omega_intervals();
    const double measure = g.omega_measure();
    const double hausdorff = 2.0 * sigma;  // counting measure of Sigma on the unit sphere of the line
    DivergenceScan scan;
    scan.T0 = T0;
    scan.rows.resize(T_schedule.size());
    parallel_for(T_schedule.size(), [&](std::size_t idx) {
        const double T = T_schedule[idx];
        auto f = [&](double d) { return column_k2(d, 2.0 * T, s); };
        CompensatedSum sum;
        for (const auto& [a1, b1] : omega)
            for (const auto& [a2, b2] : sector_intervals(sigma, T0, T)) sum.add(interval_pair_integral(a1, b1, a2, b2, f));
        DivergenceRow& row = scan.rows[idx];
        row.T = T;
        row.computed = sum.value();
        row.lower_bound = measure * hausdorff * (T - T0) /
                          (std::pow(2.0, (2.0 + s) / 2.0) * (1.0 + s) * s * std::pow(2.0 * T, s));
    });
    std::vector<double> xs, ys;
    for (const DivergenceRow& r : scan.rows) {
        xs.push_back(r.T);
        ys.push_back(r.computed);
    }
    scan.tail_slope = xs.size() >= 2 ? fit_tail_slope(xs, ys) : 0.0;
    return scan;
}

}  // namespace

double column_k1(double d, double a, double s) {
    if (d <= 1e-12 * a) return std::pow(a, -(1.0 + s)) / (1.0 + s);  // d -> 0 limit
    if (d == 0.0) return std::numeric_limits<double>::infinity();
    const double alpha = (1.0 + s) / 2.0;
    const double x0 = d * d / (d * d + a * a);
    return std::pow(d, -(1.0 + s)) * 0.5 * boost::math::beta(alpha, 0.5) * boost::math::ibeta(alpha, 0.5, x0);
}

double column_k2(double d, double a, double s) {
    if (d == 0.0 && a == 0.0) return std::numeric_limits<double>::infinity();
    const double head = std::pow(std::hypot(d, a), -s) / s;
    return a == 0.0 ? head : head - a * column_k1(d, a, s);
}

CylinderGeometry CylinderGeometry::make(const DomainWindow& omega_base, double height) {
    require_line_base(omega_base.spec);
    const GridSpec& base = omega_base.spec;
    if (!(height > 0.0) || !is_multiple(height, base.h))
        throw Error(ErrorCode::InvalidArgument, "cylinder height must be a positive multiple of h");
    if (omega_base.omega.none()) throw Error(ErrorCode::DegenerateDomain, "empty base domain");
    CylinderGeometry g;
    g.base = base;
    g.omega = omega_base.omega;
    g.height = height;
    const int rows = static_cast<int>(std::lround(2.0 * height / base.h));
    g.grid = GridSpec::make(2, {base.extent[0], rows, 1}, base.h, {base.origin[0], -height, 0.0});
    return g;
}

DomainWindow CylinderGeometry::window(double k) const {
    if (k > height * (1.0 + 1e-12)) throw Error(ErrorCode::WindowTooShort, "window taller than the grid");
    DomainWindow w{grid, CellMask(grid.cell_count())};
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
        const CellCoord c = grid.coords(i);
        w.omega.set(i, omega.test(static_cast<std::size_t>(c[0])) && std::abs(grid.center_of(c)[1]) < k);
    }
    return w;
}

CellSet CylinderGeometry::subgraph(const SubgraphExterior& v) const {
    require_graph(*this, v);
    return CellSet::from_model(grid, v);
}

double CylinderGeometry::enclosing_radius() const {
    double r = 0.0;
    for (const auto& [a, b] : omega_intervals()) r = std::max({r, std::abs(a), std::abs(b)});
    return r;
}

IntervalUnion CylinderGeometry::omega_intervals() const {
    IntervalUnion out;
    const int n = base.extent[0];
    for (int i = 0; i < n;) {
        if (!omega.test(static_cast<std::size_t>(i))) {
            ++i;
            continue;
        }
        int j = i;
        while (j < n && omega.test(static_cast<std::size_t>(j))) ++j;
        out.emplace_back(base.origin[0] + i * base.h, base.origin[0] + j * base.h);
        i = j;
    }
    return out;
}

SubgraphExterior graph_on(const GridSpec& base, const std::function<double(double)>& v, double farfield) {
    require_line_base(base);
    SubgraphExterior g{base, std::vector<double>(base.cell_count()), farfield, true};
    for (std::size_t i = 0; i < base.cell_count(); ++i) g.heights[i] = v(base.center(i)[0]);
    return g;
}

PerimeterBreakdown truncated_cylinder_perimeter(const CylinderGeometry& geometry, const CellSet& set, double k,
                                                const InteractionTable& table) {
    if (!(set.spec == geometry.grid)) throw Error(ErrorCode::SpecMismatch, "set is not on the cylinder grid");
    if (k + 1.0 > geometry.height * (1.0 + 1e-12))
        throw Error(ErrorCode::WindowTooShort, "grid must cover (-k-1, k+1)");
    return perimeter(set, geometry.window(k), table);
}

PerimeterBreakdown truncated_cylinder_perimeter(const CylinderGeometry& geometry, const SubgraphExterior& v,
                                                double k, const InteractionTable& table) {
    return truncated_cylinder_perimeter(geometry, geometry.subgraph(v), k, table);
}

LocalPartReport local_part_bound(const CylinderGeometry& geometry, const CellSet& set, double k,
                                 const InteractionTable& table) {
    const GridSpec& grid = geometry.grid;
    if (!(set.spec == grid)) throw Error(ErrorCode::SpecMismatch, "set is not on the cylinder grid");
    if (!is_multiple(k, grid.h) || k < 0.0) throw Error(ErrorCode::InvalidArgument, "k must be a multiple of h");
    if (k + 1.0 > geometry.height * (1.0 + 1e-12))
        throw Error(ErrorCode::WindowTooShort, "grid must cover (-k-1, k+1)");
    const double s = table.params().s;
    const double h = grid.h;

    // Omega x (-inf, -k] in E n Omega^inf in Omega x (-inf, k], checked on the
    // grid and on the exterior model just beyond it.
    const int nx = grid.extent[0], ny = grid.extent[1];
    for (int x = 0; x < nx; ++x) {
        if (!geometry.omega.test(static_cast<std::size_t>(x))) continue;
        const double xc = grid.center_of({x, 0, 0})[0];
        if (exterior_contains(set.exterior, {xc, geometry.height + 0.5 * h, 0.0}, 2) ||
            !exterior_contains(set.exterior, {xc, -geometry.height - 0.5 * h, 0.0}, 2))
            throw Error(ErrorCode::HypothesisViolated, "set is not confined between -k and k beyond the grid");
        for (int y = 0; y < ny; ++y) {
            const double bottom = -geometry.height + y * h, top = bottom + h;
            const bool in = set.inside.test(grid.index({x, y, 0}));
            if ((top <= -k + 1e-12 * h && !in) || (bottom >= k - 1e-12 * h && in))
                throw Error(ErrorCode::HypothesisViolated, "set is not confined between -k and k");
        }
    }

    const DomainWindow w = geometry.window(k + 1.0);
    const CellMask in_window = set.inside & w.omega;
    const CellMask out_window = w.omega.minus(set.inside);
    LocalPartReport r;
    r.window_part = interaction(grid, in_window, out_window, table);

    // Tails along the vertical axis, in units of h.
    const int cut = static_cast<int>(std::lround((geometry.height - k - 1.0) / h));  // first row of Omega^{k+1}
    const int rows = static_cast<int>(std::lround(2.0 * (k + 1.0) / h));
    const TailTable tails(nx, rows, s);
    const double scale = std::pow(h, 2.0 - s);
    const std::vector<std::size_t> columns = geometry.omega.indices();
    auto tail_sum = [&](const CellMask& cells, bool from_below) {
        const std::vector<std::size_t> idx = cells.indices();
        std::vector<double> per(idx.size());
        parallel_for(idx.size(), [&](std::size_t a) {
            const CellCoord c = grid.coords(idx[a]);
            const int gap = from_below ? c[1] - cut : cut + rows - 1 - c[1];
            CompensatedSum acc;
            for (std::size_t j : columns) acc.add(tails.at(static_cast<int>(j) - c[0], gap));
            per[a] = acc.value();
        });
        return scale * ordered_sum(per);
    };
    r.lower_tail = tail_sum(out_window, true);
    r.upper_tail = tail_sum(in_window, false);

    const double K = k + 1.0;
    CompensatedSum far;
    for (const auto& [a1, b1] : geometry.omega_intervals())
        for (const auto& [a2, b2] : geometry.omega_intervals())
            far.add(interval_pair_integral(a1, b1, a2, b2, [&](double d) { return column_k2(d, 2.0 * K, s); }));
    r.far_tail = far.value();
    r.total = r.window_part + r.lower_tail + r.upper_tail + r.far_tail;

    const double measure = geometry.omega_measure();
    r.near_bound = 2.0 * std::numbers::pi / s * (2.0 * k + 1.0) * measure;
    r.far_bound = measure * measure / ((1.0 + s) * s) / std::pow(2.0 * k + 2.0, s);
    r.bound = r.window_part + 2.0 * r.near_bound + r.far_bound;
    r.within_bound = r.lower_tail <= r.near_bound && r.upper_tail <= r.near_bound && r.far_tail <= r.far_bound;
    return r;
}

DivergenceScan nonlocal_divergence_scan(const CylinderGeometry& geometry, const SubgraphExterior& v, double k,
                                        const std::vector<double>& T_schedule, double s) {
    require_graph(geometry, v);
    for (double x : v.heights)
        if (!std::isfinite(x)) throw Error(ErrorCode::HypothesisViolated, "graph is not bounded");
    if (!std::isfinite(v.farfield) || max_abs_height(v, nullptr) > k || std::abs(v.farfield) > k)
        throw Error(ErrorCode::HypothesisViolated, "graph exceeds the bound k");
    return run_scan(geometry, 1.0, std::max(k, geometry.enclosing_radius()), T_schedule, s);
}

DivergenceScan sector_divergence_scan(const CylinderGeometry& geometry, const SubgraphExterior& v, double sigma,
                                      double M, double r0, const std::vector<double>& T_schedule, double s) {
    require_graph(geometry, v);
    if (sigma != 0.5 && sigma != 1.0)
        throw Error(ErrorCode::InvalidArgument, "on a line the sector fraction is 1/2 or 1");
    if (max_abs_height(v, &geometry.omega) > M) throw Error(ErrorCode::HypothesisViolated, "|v| > M on Omega");
    bool below = v.farfield <= M, above = v.farfield >= -M;
    for (std::size_t i = 0; i < v.heights.size(); ++i) {
        const double x = geometry.base.center(i)[0];
        const bool in_sector = sigma == 1.0 ? std::abs(x) >= r0 : x >= r0;
        if (!in_sector) continue;
        below = below && v.heights[i] <= M;
        above = above && v.heights[i] >= -M;
    }
    if (!below && !above) throw Error(ErrorCode::HypothesisViolated, "graph not bounded on one side over the sector");
    return run_scan(geometry, sigma, std::max({M, geometry.enclosing_radius(), r0}), T_schedule, s);
}

double fit_tail_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InvalidArgument, "need two points to fit");
    const std::size_t start = std::min(x.size() / 2, x.size() - 2);
    return loglog_slope({x.begin() + start, x.end()}, {y.begin() + start, y.end()});
}

double vertical_confinement_check(const CylinderGeometry& geometry, const CellSet& set) {
    const GridSpec& grid = geometry.grid;
    if (!(set.spec == grid)) throw Error(ErrorCode::SpecMismatch, "set is not on the cylinder grid");
    const double h = grid.h;
    double M = 0.0;
    for (int x = 0; x < grid.extent[0]; ++x) {
        if (!geometry.omega.test(static_cast<std::size_t>(x))) continue;
        const double xc = grid.center_of({x, 0, 0})[0];
        if (exterior_contains(set.exterior, {xc, geometry.height + 0.5 * h, 0.0}, 2) ||
            !exterior_contains(set.exterior, {xc, -geometry.height - 0.5 * h, 0.0}, 2))
            throw Error(ErrorCode::ConfinementUndetermined, "exterior data is not confined above and below the grid");
        const int ny = grid.extent[1];
        if (set.inside.test(grid.index({x, ny - 1, 0})) || !set.inside.test(grid.index({x, 0, 0})))
            throw Error(ErrorCode::ConfinementUndetermined, "interface reaches the end of the grid");
        for (int y = 0; y < ny; ++y) {
            const double bottom = -geometry.height + y * h;
            if (set.inside.test(grid.index({x, y, 0})))
                M = std::max(M, bottom + h);
            else
                M = std::max(M, -bottom);
        }
    }
    return M;
}

SolverReport solve_cylinder(const CylinderGeometry& geometry, const SubgraphExterior& v, double k,
                            const InteractionTable& table, const SolverOptions& options) {
    const auto problem = MinimizationProblem::on_window(geometry.window(k), geometry.subgraph(v), table);
    return minimize(problem, options);
}

StabilityRun tall_cylinder_stability(const CylinderGeometry& geometry, const SubgraphExterior& v, double k0,
                                     int extra, const InteractionTable& table, const SolverOptions& options) {
    if (extra < 1) throw Error(ErrorCode::InvalidArgument, "need at least one taller cylinder");
    StabilityRun run;
    for (int j = 0; j <= extra; ++j) {
        const double k = k0 + j;
        run.ks.push_back(k);
        run.reports.push_back(solve_cylinder(geometry, v, k, table, options));
        run.measured_M.push_back(vertical_confinement_check(geometry, run.reports.back().minimizer));
    }
    const CellMask inner = geometry.window(k0).omega;
    const CellMask reference = run.reports.front().minimizer.inside & inner;
    run.identical_inside = true;
    for (const SolverReport& r : run.reports) run.identical_inside = run.identical_inside && (r.minimizer.inside & inner) == reference;
    return run;
}

std::vector<AreaRow> graph_area_asymptotics(const std::function<double(double)>& u, double lo, double hi,
                                            const std::vector<double>& s_schedule,
                                            const std::vector<int>& cells_per_unit, int near_field_order) {
    if (!(hi > lo)) throw Error(ErrorCode::InvalidInterval, "empty base interval");
    std::vector<AreaRow> rows;
    for (int c : cells_per_unit) {
        const double length_cells = (hi - lo) * c;
        if (c <= 0 || std::abs(length_cells - std::round(length_cells)) > 1e-9)
            throw Error(ErrorCode::InvalidArgument, "interval length must be a whole number of cells");
        const int n = static_cast<int>(std::lround(length_cells));
        const double h = 1.0 / c;
        const GridSpec base = GridSpec::make(1, {n, 1, 1}, h, {lo, 0.0, 0.0});
        const SubgraphExterior graph = graph_on(base, u, 0.0);
        const double k = std::ceil(max_abs_height(graph, nullptr));
        const CylinderGeometry g = CylinderGeometry::make(DomainWindow::whole(base), k + 1.0);
        const CellSet set = g.subgraph(graph);

        CompensatedSum area;
        for (int i = 0; i < n; ++i) {
            const int l = std::max(0, i - 1), r = std::min(n - 1, i + 1);
            const double slope = r > l ? (graph.heights[r] - graph.heights[l]) / ((r - l) * h) : 0.0;
            area.add(h * std::sqrt(1.0 + slope * slope));
        }
        for (double s : s_schedule) {
            const InteractionTable table =
                build_table(g.grid, {s, 2, near_field_order}, g.grid.max_extent());
            const double local = interaction(g.grid, set.inside, ~set.inside, table);
            AreaRow row;
            row.s = s;
            row.h = h;
            row.scaled_local = (1.0 - s) * local;
            row.scaled_area = unit_ball_volume(1) * area.value();
            row.ratio = row.scaled_local / row.scaled_area;
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace fracperim
