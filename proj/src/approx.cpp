#include "fracperim/approx.hpp"

#include <cmath>
#include <functional>
#include <map>

#include "fracperim/error.hpp"
#include "fracperim/parallel.hpp"

namespace fracperim {

double mollifier_profile(double r, MollifierSpec::Profile) {
    if (r >= 1.0) return 0.0;
    const double q = 1.0 - r * r;
    return q * q * q * q;
}

namespace {

struct Stencil {
    std::vector<CellCoord> offsets;
    std::vector<double> weights;
    double total = 0.0;
};

Stencil make_stencil(const GridSpec& spec, const MollifierSpec& m) {
    if (!(m.eps >= spec.h * (1.0 - 1e-12)))
        throw Error(ErrorCode::EpsilonBelowResolution, "mollifier radius below the cell size");
    const int reach = static_cast<int>(std::ceil(m.eps / spec.h));
    Stencil st;
    CellCoord lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < spec.dim; ++a) {
        lo[a] = -reach;
        hi[a] = reach;
    }
    CompensatedSum total;
    for (int z = lo[2]; z <= hi[2]; ++z)
        for (int y = lo[1]; y <= hi[1]; ++y)
            for (int x = lo[0]; x <= hi[0]; ++x) {
                const double r = spec.h * std::sqrt(double(x) * x + double(y) * y + double(z) * z) / m.eps;
                if (r >= 1.0) continue;
                const double w = mollifier_profile(r, m.profile);
                st.offsets.push_back({x, y, z});
                st.weights.push_back(w);
                total.add(w);
            }
    st.total = total.value();
    return st;
}

int stencil_reach(const GridSpec& spec, double eps) { return static_cast<int>(std::ceil(eps / spec.h)); }

ScalarField convolve(const ScalarField& shape, const std::function<double(const CellCoord&)>& value,
                     const MollifierSpec& m) {
    const GridSpec& spec = shape.spec;
    const Stencil st = make_stencil(spec, m);
    ScalarField out = shape;
    parallel_for(spec.cell_count(), [&](std::size_t i) {
        const CellCoord c = spec.coords(i);
        CompensatedSum acc;
        for (std::size_t k = 0; k < st.offsets.size(); ++k) {
            const CellCoord nb{c[0] + st.offsets[k][0], c[1] + st.offsets[k][1], c[2] + st.offsets[k][2]};
            acc.add(st.weights[k] * value(nb));
        }
        out.values[i] = acc.value() / st.total;
    });
    return out;
}

std::function<double(const CellCoord&)> extended_values(const ScalarField& u) {
    return [&u](const CellCoord& c) {
        const GridSpec& spec = u.spec;
        if (spec.in_box(c)) return u.values[spec.index(c)];
        if (u.exterior_value) return *u.exterior_value;
        return exterior_contains(u.exterior, spec.center_of(c), spec.dim) ? 1.0 : 0.0;
    };
}

bool set_phase(const CellSet& set, const CellCoord& c) {
    const GridSpec& spec = set.spec;
    return spec.in_box(c) ? set.inside.test(spec.index(c)) : exterior_contains(set.exterior, spec.center_of(c), spec.dim);
}

void check_schedule(const GridSpec& spec, const std::vector<double>& schedule) {
    if (schedule.empty()) throw Error(ErrorCode::InvalidSchedule, "empty eps schedule");
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        if (!(schedule[k] >= spec.h * (1.0 - 1e-12)))
            throw Error(ErrorCode::EpsilonBelowResolution, "eps below the cell size");
        if (k > 0 && !(schedule[k] < schedule[k - 1]))
            throw Error(ErrorCode::InvalidSchedule, "eps schedule must decrease");
    }
}

using FieldBuilder = std::function<ScalarField(double eps)>;
using ExcludedBand = std::function<CellMask(double eps)>;

std::vector<ApproxStep> run_pipeline(const CellSet& set, const DomainWindow& window,
                                     const std::vector<double>& schedule, const InteractionTable& table,
                                     const FieldBuilder& field_at, const ExcludedBand& excluded_at) {
    check_schedule(set.spec, schedule);
    const GridSpec& spec = set.spec;
    const ExteriorField exterior = exterior_masses(spec, set.exterior, table, window.policy);
    const double target = perimeter(set, window, table, exterior).total;
    const ScalarField distance = signed_distance(set, stencil_reach(spec, schedule.front()) + 1);

    std::vector<ApproxStep> steps;
    for (double eps : schedule) {
        const ScalarField u = field_at(eps);
        std::map<CellMask, PerimeterBreakdown> cache;
        ApproxStep best;
        double best_gap = std::numeric_limits<double>::infinity();
        for (int k = 1; k <= 99; ++k) {
            const double t = k / 100.0;
            CellSet candidate = superlevel(u, t);
            auto it = cache.find(candidate.inside);
            if (it == cache.end())
                it = cache.emplace(candidate.inside, perimeter(candidate, window, table, exterior)).first;
            const double gap = std::abs(it->second.total - target);
            const bool better = gap < best_gap || (gap == best_gap && std::abs(t - 0.5) < std::abs(best.threshold - 0.5));
            if (better) {
                best_gap = gap;
                best.threshold = t;
                best.set = std::move(candidate);
                best.perimeter = it->second;
            }
        }
        best.eps = eps;
        const CellMask excluded = excluded_at(eps);
        const CellMask boundary = set_boundary_cells(best.set).minus(excluded);
        bool inside = true;
        for (std::size_t i : boundary.indices()) inside = inside && std::abs(distance.values[i]) < eps;
        best.boundary_in_neighborhood = inside;
        steps.push_back(std::move(best));
    }
    return steps;
}

}  // namespace

ScalarField mollify(const ScalarField& u, const MollifierSpec& m) {
    if (u.values.size() != u.spec.cell_count()) throw Error(ErrorCode::SpecMismatch, "field size");
    return convolve(u, extended_values(u), m);
}

ScalarField mollify(const CellSet& set, const MollifierSpec& m) { return mollify(ScalarField::indicator(set), m); }

CellSet superlevel(const ScalarField& u, double t) { return superlevel_set(u, t); }

CellMask set_boundary_cells(const CellSet& set) {
    const GridSpec& spec = set.spec;
    CellMask out(spec.cell_count());
    for (std::size_t i = 0; i < spec.cell_count(); ++i) {
        const CellCoord c = spec.coords(i);
        const bool phase = set.inside.test(i);
        for (int a = 0; a < spec.dim && !out.test(i); ++a)
            for (int dir : {-1, 1}) {
                CellCoord nb = c;
                nb[a] += dir;
                if (set_phase(set, nb) != phase) {
                    out.set(i);
                    break;
                }
            }
    }
    return out;
}

std::vector<ApproxStep> approximate_set(const CellSet& set, const DomainWindow& window,
                                        const std::vector<double>& eps_schedule, const InteractionTable& table) {
    const ScalarField chi = ScalarField::indicator(set);
    return run_pipeline(
        set, window, eps_schedule, table, [&](double eps) { return mollify(chi, {eps}); },
        [&](double) { return CellMask(set.spec.cell_count()); });
}

std::vector<ApproxStep> approximate_set_lipschitz(const CellSet& set, const DomainWindow& window,
                                                  const std::vector<double>& eps_schedule,
                                                  const InteractionTable& table) {
    const GridSpec& spec = set.spec;
    check_schedule(spec, eps_schedule);
    auto in_omega = [&](const CellCoord& c) { return spec.in_box(c) && window.omega.test(spec.index(c)); };
    const int pad = stencil_reach(spec, eps_schedule.front()) + 1;
    const PaddedDistance omega_distance = padded_signed_distance(spec, in_omega, pad);
    const ScalarField shape = ScalarField::indicator(set);

    auto field_at = [&](double eps) {
        const double delta = 2.0 * eps;
        auto value = [&](const CellCoord& c) {
            if (std::abs(omega_distance.at(c)) < delta) return 0.0;
            return set_phase(set, c) ? 1.0 : 0.0;
        };
        return convolve(shape, value, {eps});
    };
    auto excluded_at = [&](double eps) {
        CellMask band(spec.cell_count());
        for (std::size_t i = 0; i < spec.cell_count(); ++i)
            band.set(i, std::abs(omega_distance.at(spec.coords(i))) < 4.0 * eps);
        return band;
    };
    return run_pipeline(set, window, eps_schedule, table, field_at, excluded_at);
}

}  // namespace fracperim
