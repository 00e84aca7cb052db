#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "fracperim/grid.hpp"
#include "fracperim/kernel.hpp"

namespace fracperim {

/// Interaction of every box cell with the region beyond the box, split by
/// the phase of the exterior model there. `bound_*` bounds the mass that
/// was not resolved (beyond the padding ring), per phase.
struct ExteriorField {
    std::vector<double> mass_in_set;
    std::vector<double> mass_in_complement;
    std::vector<double> bound_in_set;
    std::vector<double> bound_in_complement;

    static ExteriorField zero(std::size_t cells);
    ExteriorField complemented() const;
    double total_mass(std::size_t i) const { return mass_in_set[i] + mass_in_complement[i]; }
};

/// Beyond-box masses for `model`. In 1D the analytic policy is exact (closed
/// forms on the two half-lines); otherwise a ring of padding cells is summed
/// with table weights and the rest is bounded with tail_mass.
ExteriorField exterior_masses(const GridSpec& spec, const ExteriorModel& model, const InteractionTable& table,
                              const ComplementPolicy& policy);

struct PerimeterBreakdown {
    double local = 0.0;
    double nonlocal = 0.0;
    double total = 0.0;
    double truncation_error_bound = 0.0;
    /// E or its complement has no cell in the window; total is 0 by convention.
    bool degenerate = false;
};

/// L_s(A, B) = sum over i in A, j in B of w(j - i). A and B must be disjoint.
double interaction(const GridSpec& spec, const CellMask& a, const CellMask& b, const InteractionTable& table);

/// P_s(E, Omega) split into the Omega x Omega part and the cross terms.
PerimeterBreakdown perimeter(const CellSet& set, const DomainWindow& window, const InteractionTable& table);
PerimeterBreakdown perimeter(const CellSet& set, const DomainWindow& window, const InteractionTable& table,
                             const ExteriorField& exterior);

/// |P(E,outer) - P(E,inner) - L(E n S, E^c \ inner) - L(E \ outer, E^c n S)|
/// with S = outer \ inner. Zero up to rounding. Taking E \ inner in the
/// second term would count the pairs in S x S twice.
double decomposition_check(const CellSet& set, const DomainWindow& inner, const DomainWindow& outer,
                           const InteractionTable& table);
double decomposition_check(const CellSet& set, const DomainWindow& inner, const DomainWindow& outer,
                           const InteractionTable& table, const ExteriorField& exterior);

/// F(u, Omega): half the Omega x Omega part of the W^{s,1} seminorm plus the
/// Omega x complement part.
PerimeterBreakdown relaxed_energy_breakdown(const ScalarField& u, const DomainWindow& window,
                                            const InteractionTable& table, const ExteriorField& exterior);
double relaxed_energy(const ScalarField& u, const DomainWindow& window, const InteractionTable& table);
double relaxed_energy(const ScalarField& u, const DomainWindow& window, const InteractionTable& table,
                      const ExteriorField& exterior);

/// Sorted distinct values of u, including the values it takes beyond the box.
std::vector<double> field_levels(const ScalarField& u);

/// {u > t}, with the exterior taken from the field.
CellSet superlevel_set(const ScalarField& u, double t);

struct CoareaResult {
    double lhs = 0.0;
    double rhs = 0.0;
    std::vector<double> levels;
};

/// lhs = F(u, Omega); rhs = sum_k (t_{k+1} - t_k) P({u > t_k}, Omega).
CoareaResult coarea_check(const ScalarField& u, const DomainWindow& window, const InteractionTable& table);
CoareaResult coarea_check(const ScalarField& u, const DomainWindow& window, const InteractionTable& table,
                          const ExteriorField& exterior);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct StripRow {
    double delta = 0.0;
    double value = 0.0;  // L_s(Omega_{-delta}, Omega \ Omega_{-delta})
    double bound = 0.0;  // C delta^{1-s}
};

struct StripScan {
    std::vector<StripRow> rows;
    /// n omega_n / (s (1-s)) times the largest face-counted measure of the
    /// level sets {d = r}, -r0 < r <= 0.
    double constant = 0.0;
    double level_set_measure = 0.0;
    double exponent = 0.0;  // fitted over all rows
};

/// Interaction of the inner parallel set Omega_{-delta} with the strip
/// Omega \ Omega_{-delta} for each delta (strictly decreasing, < r0), next
/// to the bound line C delta^{1-s}.
StripScan strip_scan(const DomainWindow& window, const std::vector<double>& deltas, const InteractionTable& table,
                     double r0);

/// Positive decreasing sequence with a known finite sum.
struct SummableSequence {
    std::function<double(int)> term;  // k >= 1
    double total = 0.0;
};

/// beta_k = 1 / (k log^2(k+1)): summable, while sum beta_{2k}^{1-s} diverges
/// for every s in (0,1).
SummableSequence log_squared_sequence();

/// Disjoint open intervals on the line; endpoints may be infinite.
using IntervalUnion = std::vector<std::pair<double, double>>;

/// P_s(A, O) for a finite union of intervals A and O = (lo, hi), evaluated
/// with the closed-form interval interactions.
double interval_union_perimeter(const IntervalUnion& set, double lo, double hi, double s);

/// E_m = union of (sigma_{2j}, sigma_{2j+1}) for j = 1..m with
/// sigma_k = beta_1 + ... + beta_k.
IntervalUnion accumulating_intervals(const SummableSequence& beta, int m);

/// P_s(E_m, (0, M)) with M the sum of the sequence.
double divergence_probe_1d(const SummableSequence& beta, int m, double s);

/// P_s(E_m, (lo, hi)).
double divergence_probe_1d_window(const SummableSequence& beta, int m, double s, double lo, double hi);

}  // namespace fracperim
