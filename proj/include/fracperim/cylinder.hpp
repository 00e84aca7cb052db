#pragma once

#include <functional>
#include <vector>

#include "fracperim/functional.hpp"
#include "fracperim/grid.hpp"
#include "fracperim/kernel.hpp"
#include "fracperim/minimize.hpp"

namespace fracperim {

/// Omega x (-height, height) over a one-dimensional base, gridded with the
/// base cell size. The second coordinate is the vertical one.
struct CylinderGeometry {
    GridSpec base;
    CellMask omega;  // base cells of Omega
    GridSpec grid;   // two-dimensional
    double height = 0.0;

    /// `height` must be a multiple of the base cell size.
    static CylinderGeometry make(const DomainWindow& omega_base, double height);

    /// Omega^k = Omega x (-k, k), by cell centers.
    DomainWindow window(double k) const;
    /// Sg(v) rasterized on the grid, with Sg(v) itself as the exterior model.
    CellSet subgraph(const SubgraphExterior& v) const;
    /// Lebesgue measure of Omega.
    double omega_measure() const { return static_cast<double>(omega.count()) * base.h; }
    /// Smallest R with Omega inside the closed ball B_R.
    double enclosing_radius() const;
    /// Omega as maximal runs of cells, as intervals.
    IntervalUnion omega_intervals() const;
};

/// Graph data tabulated on the base cells, constant `farfield` beyond.
SubgraphExterior graph_on(const GridSpec& base, const std::function<double(double)>& v, double farfield);

/// P_s(E, Omega^k). Needs the grid to cover (-k-1, k+1); beyond the grid
/// the exterior model of E is used.
PerimeterBreakdown truncated_cylinder_perimeter(const CylinderGeometry& geometry, const CellSet& set, double k,
                                                const InteractionTable& table);
PerimeterBreakdown truncated_cylinder_perimeter(const CylinderGeometry& geometry, const SubgraphExterior& v,
                                                double k, const InteractionTable& table);

/// P^L_s(E, Omega^infinity) for E with Omega x (-inf, -k] in E and
/// E n Omega^infinity below height k, assembled as P^L(E, Omega^{k+1}) plus
/// the three tail interactions, each evaluated semi-analytically along the
/// vertical axis. The bound replaces the tails by their explicit majorants.
struct LocalPartReport {
    double window_part = 0.0;  // P^L(E, Omega^{k+1})
    double lower_tail = 0.0;   // L(Omega x (-inf,-k-1), E^c n Omega^{k+1})
    double upper_tail = 0.0;   // L(Omega x (k+1,inf), E n Omega^{k+1})
    double far_tail = 0.0;     // L(Omega x (-inf,-k-1), Omega x (k+1,inf))
    double total = 0.0;
    double near_bound = 0.0;   // 2 pi/s (2k+1)|Omega|, majorant of each of the first two tails
    double far_bound = 0.0;    // |Omega|^2 / ((1+s) s (2k+2)^s)
    double bound = 0.0;        // window_part + 2 near_bound + far_bound
    bool within_bound = false;
};
LocalPartReport local_part_bound(const CylinderGeometry& geometry, const CellSet& set, double k,
                                 const InteractionTable& table);

struct DivergenceRow {
    double T = 0.0;
    double lower_bound = 0.0;
    double computed = 0.0;
};

struct DivergenceScan {
    std::vector<DivergenceRow> rows;
    double T0 = 0.0;
    /// Least-squares slope of log(computed) against log(T) over the last half of the rows.
    double tail_slope = 0.0;
};

/// L_s(Omega x (-inf,-T), (B_T \ B_R) x (T, inf)) for each T, with the
/// vertical integrals in closed form (incomplete beta) and the horizontal
/// ones by quadrature, next to the lower bound
///   |Omega| |B_T \ B_R| / (2^{(2+s)/2} (1+s) s (2T)^s).
/// Requires |v| <= k everywhere and T > max(k, R) increasing.
DivergenceScan nonlocal_divergence_scan(const CylinderGeometry& geometry, const SubgraphExterior& v, double k,
                                        const std::vector<double>& T_schedule, double s);

/// Same scan with B_T \ B_R replaced by the sector S(T) = {r w : T0 < r < T,
/// w in Sigma}, T0 = max(M, R, r0). On a line Sigma is one ray
/// (sigma = 1/2, the positive one) or both (sigma = 1). Requires |v| <= M on
/// Omega and v <= M (or v >= -M) on the sector beyond r0.
DivergenceScan sector_divergence_scan(const CylinderGeometry& geometry, const SubgraphExterior& v, double sigma,
                                      double M, double r0, const std::vector<double>& T_schedule, double s);

/// Least-squares slope of log y against log x over the last half of the points.
double fit_tail_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Smallest M with Omega x (-inf,-M] in E and E n Omega^infinity in
/// Omega x (-inf, M], read off the grid. Throws ConfinementUndetermined when
/// the interface reaches the top or bottom row of the grid.
double vertical_confinement_check(const CylinderGeometry& geometry, const CellSet& set);

/// Minimizer of P_s(., Omega^k) with exterior data Sg(v).
SolverReport solve_cylinder(const CylinderGeometry& geometry, const SubgraphExterior& v, double k,
                            const InteractionTable& table, const SolverOptions& options = {});

struct StabilityRun {
    std::vector<double> ks;
    std::vector<SolverReport> reports;
    std::vector<double> measured_M;
    /// All minimizers agree on Omega^{ks.front()}.
    bool identical_inside = false;
};

/// Minimize on Omega^k for k = k0, k0+1, ..., k0+extra and compare the
/// minimizers inside Omega^{k0}.
StabilityRun tall_cylinder_stability(const CylinderGeometry& geometry, const SubgraphExterior& v, double k0,
                                     int extra, const InteractionTable& table, const SolverOptions& options = {});

struct AreaRow {
    double s = 0.0;
    double h = 0.0;
    double scaled_local = 0.0;  // (1-s) P^L(Sg(u), Omega^{k+1})
    double scaled_area = 0.0;   // omega_1 A(u, Omega)
    double ratio = 0.0;
};

/// (1-s) P^L(Sg(u), Omega^{k+1}) against omega_1 A(u, Omega) on Omega = (lo, hi)
/// for every s and every resolution (cells per unit length), k = ceil(max |u|).
/// A(u, Omega) uses central differences of u at the cell centers.
std::vector<AreaRow> graph_area_asymptotics(const std::function<double(double)>& u, double lo, double hi,
                                            const std::vector<double>& s_schedule,
                                            const std::vector<int>& cells_per_unit, int near_field_order = 8);

/// Closed-form helpers for the vertical direction (two-dimensional kernel).
/// K1(d, a) = int_a^inf (d^2 + r^2)^{-(2+s)/2} dr.
double column_k1(double d, double a, double s);
/// K2(d, a) = int_a^inf (r - a) (d^2 + r^2)^{-(2+s)/2} dr: the interaction of
/// two vertical half-lines at horizontal distance d and vertical gap a.
double column_k2(double d, double a, double s);

}  // namespace fracperim
