#pragma once

#include <vector>

#include "fracperim/functional.hpp"
#include "fracperim/grid.hpp"
#include "fracperim/kernel.hpp"

namespace fracperim {

struct MollifierSpec {
    enum class Profile { PolynomialBump };
    double eps = 0.0;
    Profile profile = Profile::PolynomialBump;
};

/// Unnormalized radial profile on [0, 1): (1 - r^2)^4.
double mollifier_profile(double r, MollifierSpec::Profile profile);

/// Discrete convolution with the sampled profile over centers at distance
/// < eps, renormalized so the weights sum to one. Values beyond the box come
/// from the field's exterior; the result keeps that exterior. eps = h is the
/// identity.
ScalarField mollify(const ScalarField& u, const MollifierSpec& m);
ScalarField mollify(const CellSet& set, const MollifierSpec& m);

/// {u > t}.
CellSet superlevel(const ScalarField& u, double t);

struct ApproxStep {
    double eps = 0.0;
    double threshold = 0.5;
    CellSet set;
    PerimeterBreakdown perimeter;
    /// Boundary cells of the approximant (outside the excluded band, for
    /// the Lipschitz pipeline) all lie in N_eps(boundary of E).
    bool boundary_in_neighborhood = false;
};

/// Mollify chi_E at each eps, threshold at the level in {0.01, ..., 0.99}
/// whose perimeter in the window is closest to P(E, window) (ties toward
/// 1/2), and record the perimeter and the boundary check. Beyond the box
/// the approximants keep the exterior model of E.
std::vector<ApproxStep> approximate_set(const CellSet& set, const DomainWindow& window,
                                        const std::vector<double>& eps_schedule, const InteractionTable& table);

/// As approximate_set, but chi_E is first multiplied by the cut-off
/// 1 - chi{|d_Omega| < delta} with delta = 2 eps. The boundary check skips
/// N_{2 delta}(boundary of Omega).
std::vector<ApproxStep> approximate_set_lipschitz(const CellSet& set, const DomainWindow& window,
                                                  const std::vector<double>& eps_schedule,
                                                  const InteractionTable& table);

/// Face neighbours of opposite phase, with the exterior model beyond the box.
CellMask set_boundary_cells(const CellSet& set);

}  // namespace fracperim
