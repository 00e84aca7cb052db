#include "fracperim/functional.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "fracperim/error.hpp"
#include "fracperim/parallel.hpp"

namespace fracperim {

ExteriorField ExteriorField::zero(std::size_t cells) {
    return {std::vector<double>(cells, 0.0), std::vector<double>(cells, 0.0), std::vector<double>(cells, 0.0),
            std::vector<double>(cells, 0.0)};
}

ExteriorField ExteriorField::complemented() const {
    return {mass_in_complement, mass_in_set, bound_in_complement, bound_in_set};
}

namespace {

struct Segment {
    double lo;
    double hi;
    bool in_set;
};

/// Phase segments of the two half-lines beyond [x0, x1].
std::vector<Segment> exterior_segments_1d(const ExteriorModel& model, double x0, double x1) {
    const double inf = std::numeric_limits<double>::infinity();
    const int phase = constant_phase(model);
    if (phase >= 0) return {{-inf, x0, phase == 1}, {x1, inf, phase == 1}};
    double level = 0.0;
    bool below = true;
    if (const auto* half = std::get_if<HalfSpaceExterior>(&model)) {
        if (half->axis != 0) throw Error(ErrorCode::InvalidArgument, "half-space axis out of range for a 1D grid");
        level = half->level;
        below = half->below;
    } else {
        const auto& graph = std::get<SubgraphExterior>(model);
        level = graph.farfield;
        below = graph.below;
    }
    std::vector<Segment> out;
    auto split = [&](double lo, double hi) {
        // (lo, level) has phase `below`, (level, hi) the other one
        if (level <= lo) {
            out.push_back({lo, hi, !below});
        } else if (level >= hi) {
            out.push_back({lo, hi, below});
        } else {
            out.push_back({lo, level, below});
            out.push_back({level, hi, !below});
        }
    };
    split(-inf, x0);
    split(x1, inf);
    return out;
}

ExteriorField exact_exterior_1d(const GridSpec& spec, const ExteriorModel& model, double s) {
    const std::size_t n = spec.cell_count();
    ExteriorField field = ExteriorField::zero(n);
    const double x0 = spec.origin[0];
    const double x1 = x0 + spec.extent[0] * spec.h;
    const std::vector<Segment> segments = exterior_segments_1d(model, x0, x1);
    parallel_for(n, [&](std::size_t i) {
        // both ends from the index, so the last cell ends exactly at x1
        const double a = x0 + static_cast<double>(i) * spec.h;
        const double b = x0 + static_cast<double>(i + 1) * spec.h;
        CompensatedSum in_set, in_comp;
        for (const Segment& seg : segments) {
            const double v = interval_interaction(a, b, seg.lo, seg.hi, s);
            (seg.in_set ? in_set : in_comp).add(v);
        }
        field.mass_in_set[i] = in_set.value();
        field.mass_in_complement[i] = in_comp.value();
    });
    return field;
}

}  // namespace

ExteriorField exterior_masses(const GridSpec& spec, const ExteriorModel& model, const InteractionTable& table,
                              const ComplementPolicy& policy) {
    if (!table.compatible_with(spec)) throw Error(ErrorCode::SpecMismatch, "table does not match the grid");
    if (spec.dim == 1 && policy.kind == ComplementPolicy::Kind::AnalyticTail)
        return exact_exterior_1d(spec, model, table.params().s);

    const int available = table.max_offset() - (spec.max_extent() - 1);
    int pad = available;
    if (policy.kind == ComplementPolicy::Kind::TruncateAtRadius) {
        pad = static_cast<int>(std::ceil(policy.radius / spec.h - 1e-9));
        if (pad > available) throw Error(ErrorCode::InvalidArgument, "truncation radius exceeds the table reach");
    }
    pad = std::max(pad, 0);

    struct RingCell {
        long code;
        bool in_set;
    };
    std::vector<RingCell> ring;
    CellCoord lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < spec.dim; ++a) {
        lo[a] = -pad;
        hi[a] = spec.extent[a] - 1 + pad;
    }
    for (int z = lo[2]; z <= hi[2]; ++z)
        for (int y = lo[1]; y <= hi[1]; ++y)
            for (int x = lo[0]; x <= hi[0]; ++x) {
                const CellCoord c{x, y, z};
                if (spec.in_box(c)) continue;
                ring.push_back({table.code(c), exterior_contains(model, spec.center_of(c), spec.dim)});
            }

    const std::size_t n = spec.cell_count();
    ExteriorField field = ExteriorField::zero(n);
    const int phase = constant_phase(model);
    const double volume = spec.cell_volume();
    parallel_for(n, [&](std::size_t i) {
        const CellCoord c = spec.coords(i);
        const long ci = table.code(c);
        CompensatedSum in_set, in_comp;
        for (const RingCell& r : ring) (r.in_set ? in_set : in_comp).add(table.at(r.code - ci));
        field.mass_in_set[i] = in_set.value();
        field.mass_in_complement[i] = in_comp.value();

        int gap = std::numeric_limits<int>::max();
        for (int a = 0; a < spec.dim; ++a) gap = std::min({gap, c[a] + pad, spec.extent[a] - 1 - c[a] + pad});
        const double bound = gap > 0 ? volume * tail_mass(gap * spec.h, table.params())
                                     : std::numeric_limits<double>::infinity();
        field.bound_in_set[i] = phase == 0 ? 0.0 : bound;
        field.bound_in_complement[i] = phase == 1 ? 0.0 : bound;
    });
    return field;
}

// ---------------------------------------------------------------------------

namespace {

void require_compatible(const GridSpec& spec, const DomainWindow& window, const InteractionTable& table) {
    if (!(window.spec == spec)) throw Error(ErrorCode::SpecMismatch, "window and set live on different grids");
    if (!table.compatible_with(spec)) throw Error(ErrorCode::SpecMismatch, "table does not match the grid");
    if (window.omega.size() != spec.cell_count()) throw Error(ErrorCode::SpecMismatch, "window mask size");
}

std::vector<long> cell_codes(const GridSpec& spec, const InteractionTable& table) {
    std::vector<long> codes(spec.cell_count());
    for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = table.code(spec.coords(i));
    return codes;
}

/// Shared pair sum behind perimeter and the relaxed energy. Beyond the box
/// the field is either the indicator of the exterior model described by
/// `exterior`, or the constant `exterior_constant`.
PerimeterBreakdown energy_core(const GridSpec& spec, const std::vector<double>& values, const ExteriorField& exterior,
                               std::optional<double> exterior_constant, const DomainWindow& window,
                               const InteractionTable& table) {
    require_compatible(spec, window, table);
    const std::vector<long> codes = cell_codes(spec, table);
    const std::vector<std::size_t> cells = window.omega.indices();
    const std::size_t n = spec.cell_count();
    std::vector<double> local(cells.size(), 0.0), cross(cells.size(), 0.0), bound(cells.size(), 0.0);

    parallel_for(cells.size(), [&](std::size_t k) {
        const std::size_t i = cells[k];
        const double ui = values[i];
        const long ci = codes[i];
        CompensatedSum loc, nl;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = std::abs(ui - values[j]);
            if (d == 0.0) continue;
            const double w = table.at(codes[j] - ci) * d;
            (window.omega.test(j) ? loc : nl).add(w);
        }
        if (exterior_constant) {
            const double d = std::abs(ui - *exterior_constant);
            if (d != 0.0) {
                nl.add(d * exterior.total_mass(i));
                bound[k] = d * (exterior.bound_in_set[i] + exterior.bound_in_complement[i]);
            }
        } else {
            nl.add(ui * exterior.mass_in_complement[i] + (1.0 - ui) * exterior.mass_in_set[i]);
            bound[k] = ui * exterior.bound_in_complement[i] + (1.0 - ui) * exterior.bound_in_set[i];
        }
        local[k] = loc.value();
        cross[k] = nl.value();
    });

    PerimeterBreakdown out;
    out.local = 0.5 * ordered_sum(local);
    out.nonlocal = ordered_sum(cross);
    out.total = out.local + out.nonlocal;
    out.truncation_error_bound = ordered_sum(bound);
    out.degenerate = cells.empty();
    return out;
}

std::vector<double> indicator_values(const CellMask& mask) {
    std::vector<double> v(mask.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = mask.test(i) ? 1.0 : 0.0;
    return v;
}

/// Mass of the exterior phase `in_set` seen from the cells of `mask`.
double exterior_interaction(const CellMask& mask, const ExteriorField& exterior, bool in_set) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask.test(i)) acc.add(in_set ? exterior.mass_in_set[i] : exterior.mass_in_complement[i]);
    return acc.value();
}

}  // namespace

double interaction(const GridSpec& spec, const CellMask& a, const CellMask& b, const InteractionTable& table) {
    if (a.size() != spec.cell_count() || b.size() != spec.cell_count())
        throw Error(ErrorCode::SpecMismatch, "mask size does not match the grid");
    if (!table.compatible_with(spec)) throw Error(ErrorCode::SpecMismatch, "table does not match the grid");
    if (!a.disjoint_from(b)) throw Error(ErrorCode::NotDisjoint, "interaction needs disjoint sets");
    const std::vector<std::size_t> rows = a.indices();
    const std::vector<std::size_t> cols = b.indices();
    if (rows.empty() || cols.empty()) return 0.0;
    const std::vector<long> codes = cell_codes(spec, table);
    std::vector<long> col_codes(cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k) col_codes[k] = codes[cols[k]];
    std::vector<double> partial(rows.size(), 0.0);
    parallel_for(rows.size(), [&](std::size_t k) {
        const long ci = codes[rows[k]];
        CompensatedSum acc;
        for (long cj : col_codes) acc.add(table.at(cj - ci));
        partial[k] = acc.value();
    });
    return ordered_sum(partial);
}

PerimeterBreakdown perimeter(const CellSet& set, const DomainWindow& window, const InteractionTable& table,
                             const ExteriorField& exterior) {
    return energy_core(set.spec, indicator_values(set.inside), exterior, std::nullopt, window, table);
}

PerimeterBreakdown perimeter(const CellSet& set, const DomainWindow& window, const InteractionTable& table) {
    require_compatible(set.spec, window, table);
    return perimeter(set, window, table, exterior_masses(set.spec, set.exterior, table, window.policy));
}

double decomposition_check(const CellSet& set, const DomainWindow& inner, const DomainWindow& outer,
                           const InteractionTable& table, const ExteriorField& exterior) {
    if (!inner.omega.subset_of(outer.omega)) throw Error(ErrorCode::NotNested, "inner window is not inside outer");
    const PerimeterBreakdown p_outer = perimeter(set, outer, table, exterior);
    const PerimeterBreakdown p_inner = perimeter(set, inner, table, exterior);
    const CellMask strip = outer.omega.minus(inner.omega);
    const CellMask comp = ~set.inside;
    const CellMask set_strip = set.inside & strip;
    const CellMask comp_strip = comp & strip;
    const double term1 = interaction(set.spec, set_strip, comp.minus(inner.omega), table) +
                         exterior_interaction(set_strip, exterior, false);
    // E outside the outer window: pairs inside the strip are already in term1
    const double term2 = interaction(set.spec, set.inside.minus(outer.omega), comp_strip, table) +
                         exterior_interaction(comp_strip, exterior, true);
    return std::abs(p_outer.total - p_inner.total - term1 - term2);
}

double decomposition_check(const CellSet& set, const DomainWindow& inner, const DomainWindow& outer,
                           const InteractionTable& table) {
    require_compatible(set.spec, outer, table);
    return decomposition_check(set, inner, outer, table,
                               exterior_masses(set.spec, set.exterior, table, outer.policy));
}

PerimeterBreakdown relaxed_energy_breakdown(const ScalarField& u, const DomainWindow& window,
                                            const InteractionTable& table, const ExteriorField& exterior) {
    if (u.values.size() != u.spec.cell_count()) throw Error(ErrorCode::SpecMismatch, "field size");
    return energy_core(u.spec, u.values, exterior, u.exterior_value, window, table);
}

double relaxed_energy(const ScalarField& u, const DomainWindow& window, const InteractionTable& table,
                      const ExteriorField& exterior) {
    return relaxed_energy_breakdown(u, window, table, exterior).total;
}

double relaxed_energy(const ScalarField& u, const DomainWindow& window, const InteractionTable& table) {
    require_compatible(u.spec, window, table);
    return relaxed_energy(u, window, table, exterior_masses(u.spec, u.exterior, table, window.policy));
}

std::vector<double> field_levels(const ScalarField& u) {
    std::vector<double> levels = u.values;
    if (u.exterior_value) {
        levels.push_back(*u.exterior_value);
    } else {
        const int phase = constant_phase(u.exterior);
        if (phase != 1) levels.push_back(0.0);
        if (phase != 0) levels.push_back(1.0);
    }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    return levels;
}

CellSet superlevel_set(const ScalarField& u, double t) {
    CellSet out{u.spec, CellMask(u.spec.cell_count()), EmptyExterior{}};
    for (std::size_t i = 0; i < u.values.size(); ++i) out.inside.set(i, u.values[i] > t);
    if (u.exterior_value) {
        out.exterior = *u.exterior_value > t ? ExteriorModel{FullExterior{}} : ExteriorModel{EmptyExterior{}};
    } else if (t < 0.0) {
        out.exterior = FullExterior{};
    } else if (t >= 1.0) {
        out.exterior = EmptyExterior{};
    } else {
        out.exterior = u.exterior;
    }
    return out;
}

CoareaResult coarea_check(const ScalarField& u, const DomainWindow& window, const InteractionTable& table,
                          const ExteriorField& exterior) {
    CoareaResult out;
    out.lhs = relaxed_energy(u, window, table, exterior);
    out.levels = field_levels(u);
    CompensatedSum rhs;
    for (std::size_t k = 0; k + 1 < out.levels.size(); ++k) {
        const double t = out.levels[k];
        const CellSet level_set = superlevel_set(u, t);
        std::optional<double> constant;
        if (u.exterior_value || t < 0.0 || t >= 1.0) constant = constant_phase(level_set.exterior) == 1 ? 1.0 : 0.0;
        const PerimeterBreakdown p =
            energy_core(u.spec, indicator_values(level_set.inside), exterior, constant, window, table);
        rhs.add((out.levels[k + 1] - t) * p.total);
    }
    out.rhs = rhs.value();
    return out;
}

CoareaResult coarea_check(const ScalarField& u, const DomainWindow& window, const InteractionTable& table) {
    require_compatible(u.spec, window, table);
    return coarea_check(u, window, table, exterior_masses(u.spec, u.exterior, table, window.policy));
}

// ---------------------------------------------------------------------------

SummableSequence log_squared_sequence() {
    auto term = [](int k) {
        const double l = std::log(k + 1.0);
        return 1.0 / (k * l * l);
    };
    constexpr int head = 10000;
    CompensatedSum sum;
    for (int k = 1; k <= head; ++k) sum.add(term(k));
    // Euler-Maclaurin for the tail k > head
    auto f = [](double x) {
        const double l = std::log(x + 1.0);
        return 1.0 / (x * l * l);
    };
    // int_N^inf f = 1/log(N+1) + int_N^inf dx / (x (x+1) log^2(x+1)); the
    // remainder decays like x^-2 and is left to the quadrature
    boost::math::quadrature::exp_sinh<double> integrator;
    const double integral = 1.0 / std::log(head + 1.0) + integrator.integrate([](double t) {
                                const double x = head + t;
                                const double l = std::log(x + 1.0);
                                return 1.0 / (x * (x + 1.0) * l * l);
                            });
    const double step = 1e-3;
    const double derivative = (f(head + step) - f(head - step)) / (2.0 * step);
    sum.add(integral - 0.5 * f(head) - derivative / 12.0);
    return {term, sum.value()};
}

namespace {

IntervalUnion complement_on_line(const IntervalUnion& set) {
    const double inf = std::numeric_limits<double>::infinity();
    IntervalUnion out;
    double cursor = -inf;
    for (const auto& [lo, hi] : set) {
        if (lo > cursor) out.emplace_back(cursor, lo);
        cursor = hi;
    }
    if (cursor < inf) out.emplace_back(cursor, inf);
    return out;
}

IntervalUnion clip(const IntervalUnion& set, double lo, double hi) {
    IntervalUnion out;
    for (const auto& [a, b] : set) {
        const double l = std::max(a, lo), r = std::min(b, hi);
        if (l < r) out.emplace_back(l, r);
    }
    return out;
}

IntervalUnion outside(const IntervalUnion& set, double lo, double hi) {
    const double inf = std::numeric_limits<double>::infinity();
    IntervalUnion out = clip(set, -inf, lo);
    const IntervalUnion right = clip(set, hi, inf);
    out.insert(out.end(), right.begin(), right.end());
    return out;
}

void add_pairs(CompensatedSum& acc, const IntervalUnion& a, const IntervalUnion& b, double s) {
    for (const auto& [a0, a1] : a)
        for (const auto& [b0, b1] : b) acc.add(interval_interaction(a0, a1, b0, b1, s));
}

}  // namespace

double interval_union_perimeter(const IntervalUnion& set, double lo, double hi, double s) {
    if (!(lo < hi)) throw Error(ErrorCode::InvalidInterval, "window must satisfy lo < hi");
    const IntervalUnion comp = complement_on_line(set);
    const IntervalUnion set_in = clip(set, lo, hi), comp_in = clip(comp, lo, hi);
    const IntervalUnion set_out = outside(set, lo, hi), comp_out = outside(comp, lo, hi);
    CompensatedSum acc;
    add_pairs(acc, set_in, comp_in, s);
    add_pairs(acc, set_in, comp_out, s);
    add_pairs(acc, set_out, comp_in, s);
    return acc.value();
}

IntervalUnion accumulating_intervals(const SummableSequence& beta, int m) {
    if (m < 1) throw Error(ErrorCode::InvalidArgument, "need at least one interval");
    std::vector<double> sigma(2 * m + 2, 0.0);
    double previous = std::numeric_limits<double>::infinity();
    CompensatedSum partial;
    for (int k = 1; k <= 2 * m + 1; ++k) {
        const double b = beta.term(k);
        if (!(b > 0.0) || !(b < previous)) throw Error(ErrorCode::InvalidSequence, "sequence must be positive and decreasing");
        previous = b;
        partial.add(b);
        sigma[k] = partial.value();
    }
    if (!(sigma[2 * m + 1] < beta.total)) throw Error(ErrorCode::InvalidSequence, "partial sums exceed the stated total");
    IntervalUnion out;
    for (int j = 1; j <= m; ++j) out.emplace_back(sigma[2 * j], sigma[2 * j + 1]);
    return out;
}

double divergence_probe_1d(const SummableSequence& beta, int m, double s) {
    return divergence_probe_1d_window(beta, m, s, 0.0, beta.total);
}

double divergence_probe_1d_window(const SummableSequence& beta, int m, double s, double lo, double hi) {
    KernelParams{s, 1, 1}.validate();
    return interval_union_perimeter(accumulating_intervals(beta, m), lo, hi, s);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InvalidArgument, "need two points to fit");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

// Faces between the mask and the rest, box faces included, times h^{n-1}.
double face_measure(const GridSpec& spec, const CellMask& mask) {
    std::size_t faces = 0;
    for (std::size_t i : mask.indices()) {
        const CellCoord c = spec.coords(i);
        for (int a = 0; a < spec.dim; ++a)
            for (int dir : {-1, 1}) {
                CellCoord nb = c;
                nb[a] += dir;
                if (!spec.in_box(nb) || !mask.test(spec.index(nb))) ++faces;
            }
    }
    return static_cast<double>(faces) * std::pow(spec.h, spec.dim - 1);
}

}  // namespace

StripScan strip_scan(const DomainWindow& window, const std::vector<double>& deltas, const InteractionTable& table,
                     double r0) {
    const GridSpec& spec = window.spec;
    if (deltas.empty()) throw Error(ErrorCode::InvalidSchedule, "empty delta schedule");
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        if (!(deltas[k] > 0.0) || !(deltas[k] < r0)) throw Error(ErrorCode::InvalidSchedule, "need 0 < delta < r0");
        if (k > 0 && !(deltas[k] < deltas[k - 1])) throw Error(ErrorCode::InvalidSchedule, "deltas must decrease");
    }
    const double s = table.params().s;
    const ScalarField distance = signed_distance(window);

    // {d < r} only changes at the distance values themselves
    std::vector<double> levels{0.0};
    for (std::size_t i : window.omega.indices())
        if (distance.values[i] > -r0) levels.push_back(distance.values[i]);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    std::vector<double> measures(levels.size());
    parallel_for(levels.size(), [&](std::size_t k) {
        measures[k] = face_measure(spec, sublevel_window(window, distance, levels[k] + 1e-12 * spec.h).omega);
    });

    StripScan scan;
    scan.level_set_measure = *std::max_element(measures.begin(), measures.end());
    scan.constant = spec.dim * unit_ball_volume(spec.dim) / (s * (1.0 - s)) * scan.level_set_measure;
    std::vector<double> xs, ys;
    for (double delta : deltas) {
        const CellMask inner = sublevel_window(window, distance, -delta).omega;
        StripRow row;
        row.delta = delta;
        row.value = interaction(spec, inner, window.omega.minus(inner), table);
        row.bound = scan.constant * std::pow(delta, 1.0 - s);
        scan.rows.push_back(row);
        xs.push_back(delta);
        ys.push_back(row.value);
    }
    scan.exponent = deltas.size() >= 2 ? loglog_slope(xs, ys) : 0.0;
    return scan;
}

}  // namespace fracperim
