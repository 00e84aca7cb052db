#pragma once

#include <optional>
#include <vector>

#include "fracperim/error.hpp"
#include "fracperim/functional.hpp"
#include "fracperim/grid.hpp"
#include "fracperim/kernel.hpp"

namespace fracperim {

/// Minimize P_s(F, window) over sets F that agree with `exterior_data`
/// off the free cells. Free cells default to the window.
struct MinimizationProblem {
    DomainWindow window;
    CellSet exterior_data;
    CellMask free_cells;
    const InteractionTable* table = nullptr;

    static MinimizationProblem on_window(const DomainWindow& window, const CellSet& exterior_data,
                                         const InteractionTable& table);
    void validate() const;
};

/// The problem restricted to its free cells: for x in {0,1}^F (or [0,1]^F)
///   energy(x) = sum_{i<j} w_ij |x_i - x_j| + sum_i (x_i b_i + (1 - x_i) a_i) + constant
/// where a_i (b_i) is the interaction of free cell i with the fixed part of
/// the set (of its complement), exterior included.
struct ReducedProblem {
    std::vector<std::size_t> cells;  // free cells, increasing grid index
    std::vector<double> weights;     // dense, row-major, F x F
    std::vector<double> to_set;      // a_i
    std::vector<double> to_complement;  // b_i
    double constant = 0.0;              // fixed-fixed pairs counted by the window
    std::vector<double> row_sums;

    std::size_t size() const { return cells.size(); }
    double weight(std::size_t i, std::size_t j) const { return weights[i * cells.size() + j]; }
    /// Compensated energy in a fixed summation order.
    double energy(const std::vector<double>& x) const;
};

ReducedProblem reduce(const MinimizationProblem& p);

enum class RelaxedMethod { PrimalDual, Subgradient };

struct SolverOptions {
    double tol = 1e-12;
    int max_iter = 20000;
    RelaxedMethod method = RelaxedMethod::PrimalDual;
    /// Stop once the certified duality gap is below gap_tol * (1 + |energy|).
    double gap_tol = 1e-12;
    /// Start from mollify(chi_{warm_start}, 2h) instead of E0.
    std::optional<CellSet> warm_start;
};

struct RelaxedSolution {
    ScalarField u;
    double energy = 0.0;  // F(u, window)
    int iterations = 0;
    /// Duality gap of the best iterate: an upper bound on energy - min F.
    double kkt_residual = 0.0;
    /// Best superlevel set met along the iterations (by reduced energy).
    CellMask best_superlevel;
    /// Best-iterate energies, non-increasing.
    std::vector<double> history;
};

/// Raised when max_iter runs out; carries the best iterate.
class ConvergenceFailure : public Error {
public:
    ConvergenceFailure(const std::string& what, RelaxedSolution best)
        : Error(ErrorCode::ConvergenceFailure, what), best_(std::move(best)) {}
    const RelaxedSolution& best() const { return best_; }

private:
    RelaxedSolution best_;
};

/// Minimize F(u, window) over u in [0,1] on the free cells, u = chi_{E0}
/// elsewhere. Starts from mollify(chi_{E0}, 2h).
RelaxedSolution solve_relaxed(const MinimizationProblem& p, const SolverOptions& options = {});

struct SolverReport {
    double relaxed_energy = 0.0;
    double threshold = 0.5;
    CellSet minimizer;
    /// perimeter(minimizer, window).total, recomputed from scratch.
    double energy = 0.0;
    int iterations = 0;
    double kkt_residual = 0.0;
};

/// Least-energy superlevel set of u, scanning midpoints of the sorted
/// distinct free values of u (plus levels giving the empty and full sets).
SolverReport threshold_minimizer(const ScalarField& u, const MinimizationProblem& p);

/// solve_relaxed + threshold_minimizer; the better of the thresholded best
/// iterate and the best superlevel set seen during the iterations is kept.
/// A ConvergenceFailure is absorbed: its best iterate is thresholded.
SolverReport minimize(const MinimizationProblem& p, const SolverOptions& options = {});

struct BruteForceResult {
    CellSet minimizer;
    double energy = 0.0;
};

/// Exhaustive search over 2^F competitors (F <= 24). Among energies within a
/// relative 1e-12 of the minimum, the lexicographically smallest mask wins.
BruteForceResult brute_force_minimum(const MinimizationProblem& p);

struct MinimalityReport {
    bool global_ok = false;
    bool compact_ok = false;
    bool local_ok = false;
    /// No cell at signed distance < -h from the boundary: classes (ii) and
    /// (iii) are vacuous.
    bool degenerate = false;
    /// The window is neither a box nor an L-shape.
    bool untested_domain = false;
};

/// Is E minimal (i) among all competitors on Omega, (ii) among competitors
/// differing only in Omega_{-h}, (iii) in every window Omega_{-kh}, k >= 1?
/// Energies within tol * (1 + min) of the minimum count as minimal.
MinimalityReport check_minimality_equivalence(const CellSet& set, const DomainWindow& window,
                                              const InteractionTable& table, double tol = 1e-9);

/// True when the window's cells form a box, or a box minus a corner box.
bool is_box_or_l_shape(const GridSpec& spec, const CellMask& omega);

struct LocalMinimalityRun {
    std::vector<SolverReport> steps;
    /// P_s(step minimizer, innermost window) per step.
    std::vector<double> inner_energies;
    /// First step after which inner energies move by less than 1e-6
    /// (relative), or -1.
    int stabilized_at = -1;
};

/// Minimize on each window of an increasing nested sequence, with E0 fixed
/// outside it and the previous minimizer as warm start.
LocalMinimalityRun solve_locally_minimal(const MinimizationProblem& p, const std::vector<DomainWindow>& windows,
                                         const SolverOptions& options = {});

}  // namespace fracperim
