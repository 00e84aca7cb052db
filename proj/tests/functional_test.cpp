#include <doctest.h>

#include <cmath>
#include <random>

#include "fracperim/error.hpp"
#include "fracperim/functional.hpp"
#include "fracperim/parallel.hpp"

using namespace fracperim;

namespace {

CellMask disk_mask(const GridSpec& spec, double cx, double cy, double r) {
    CellMask m(spec.cell_count());
    for (std::size_t i = 0; i < spec.cell_count(); ++i) {
        const Point p = spec.center(i);
        m.set(i, std::hypot(p[0] - cx, p[1] - cy) < r);
    }
    return m;
}

// Definition-level oracle: the box is enlarged by `pad` cells whose phase
// comes from the exterior model, and every pair with at least one cell in
// Omega is enumerated explicitly.
double brute_force_perimeter_2d(const CellSet& set, const CellMask& omega, const InteractionTable& table, int pad) {
    const GridSpec& spec = set.spec;
    struct Cell {
        CellCoord c;
        bool in_e;
        bool in_omega;
    };
    std::vector<Cell> cells;
    for (int y = -pad; y < spec.extent[1] + pad; ++y)
        for (int x = -pad; x < spec.extent[0] + pad; ++x) {
            const CellCoord c{x, y, 0};
            if (spec.in_box(c)) {
                const std::size_t i = spec.index(c);
                cells.push_back({c, set.inside.test(i), omega.test(i)});
            } else {
                cells.push_back({c, exterior_contains(set.exterior, spec.center_of(c), 2), false});
            }
        }
    long double total = 0.0L;
    for (const Cell& a : cells) {
        if (!a.in_e) continue;
        for (const Cell& b : cells) {
            if (b.in_e || !(a.in_omega || b.in_omega)) continue;
            total += table.weight({b.c[0] - a.c[0], b.c[1] - a.c[1], 0});
        }
    }
    return static_cast<double>(total);
}

}  // namespace

TEST_CASE("1D perimeter matches the continuous interval formula") {
    const GridSpec spec = GridSpec::make(1, {16, 1, 1}, 1.0 / 16);
    for (double s : {0.3, 0.7}) {
        const InteractionTable table = build_table(spec, {s, 1, 8}, 15);
        CellSet set = CellSet::empty(spec);
        for (int i = 4; i < 11; ++i) set.inside.set(i);
        const PerimeterBreakdown p = perimeter(set, DomainWindow::whole(spec), table);
        CHECK(p.total == doctest::Approx(interval_union_perimeter({{0.25, 11.0 / 16}}, 0.0, 1.0, s)).epsilon(1e-12));
        CHECK(p.truncation_error_bound == 0.0);
        CHECK_FALSE(p.degenerate);

        // half-line exterior and a window smaller than the box
        CellSet half = CellSet::from_model(spec, HalfSpaceExterior{0, 0.4, true});
        DomainWindow window{spec, CellMask(spec.cell_count())};
        for (int i = 2; i < 14; ++i) window.omega.set(i);
        const double inf = std::numeric_limits<double>::infinity();
        const double expect = interval_union_perimeter({{-inf, 0.375}}, 2.0 / 16, 14.0 / 16, s);
        CHECK(perimeter(half, window, table).total == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("2D perimeter matches brute-force pair enumeration") {
    const GridSpec spec = GridSpec::make(2, {10, 8, 1}, 0.125);
    const InteractionTable table = build_table(spec, {0.5, 2, 5}, 12);
    const CellSet disk{spec, disk_mask(spec, 0.6, 0.5, 0.3), EmptyExterior{}};
    const CellSet half = CellSet::from_model(spec, HalfSpaceExterior{1, 0.45, true});
    DomainWindow window{spec, disk_mask(spec, 0.6, 0.5, 0.42), ComplementPolicy::truncate_at(0.25)};
    for (const CellSet& set : {disk, half}) {
        const double expect = brute_force_perimeter_2d(set, window.omega, table, 2);
        CHECK(perimeter(set, window, table).total == doctest::Approx(expect).epsilon(1e-12));
        CHECK(perimeter(set.complement(), window, table).total == doctest::Approx(expect).epsilon(1e-12));
    }
    DomainWindow whole = DomainWindow::whole(spec);
    whole.policy = ComplementPolicy::truncate_at(0.25);
    const double expect = brute_force_perimeter_2d(half, whole.omega, table, 2);
    CHECK(perimeter(half, whole, table).total == doctest::Approx(expect).epsilon(1e-12));
    CHECK_THROWS_AS(perimeter(half, DomainWindow{spec, whole.omega, ComplementPolicy::truncate_at(1.0)}, table),
                    Error);
}

TEST_CASE("truncation bound covers the omitted mass") {
    const GridSpec spec = GridSpec::make(2, {8, 8, 1}, 0.125);
    const InteractionTable table = build_table(spec, {0.6, 2, 5}, 30);
    const CellSet set = CellSet::from_model(spec, HalfSpaceExterior{0, 0.5, true});
    const DomainWindow near{spec, CellMask(spec.cell_count(), true), ComplementPolicy::truncate_at(0.25)};
    const DomainWindow far{spec, CellMask(spec.cell_count(), true), ComplementPolicy::truncate_at(2.75)};
    const PerimeterBreakdown a = perimeter(set, near, table);
    const PerimeterBreakdown b = perimeter(set, far, table);
    CHECK(b.total > a.total);
    CHECK(b.total - a.total <= a.truncation_error_bound);
    CHECK(b.truncation_error_bound < a.truncation_error_bound);
    // the empty exterior only misses complement mass, seen from E
    const CellSet disk{spec, disk_mask(spec, 0.5, 0.5, 0.3), EmptyExterior{}};
    CHECK(perimeter(disk, near, table).truncation_error_bound > 0.0);
    const CellSet nothing = CellSet::empty(spec);
    CHECK(perimeter(nothing, near, table).truncation_error_bound == 0.0);
}

TEST_CASE("decomposition identity holds to rounding") {
    const GridSpec spec = GridSpec::make(2, {12, 12, 1}, 1.0 / 12);
    const InteractionTable table = build_table(spec, {0.4, 2, 5}, 11);
    const CellSet set{spec, disk_mask(spec, 0.4, 0.55, 0.3), EmptyExterior{}};
    const DomainWindow outer{spec, disk_mask(spec, 0.5, 0.5, 0.45)};
    const DomainWindow inner{spec, disk_mask(spec, 0.5, 0.5, 0.25)};
    const double defect = decomposition_check(set, inner, outer, table);
    CHECK(defect < 1e-12 * perimeter(set, outer, table).total);
    CHECK_THROWS_AS(decomposition_check(set, outer, inner, table), Error);
    CHECK(decomposition_check(set, outer, outer, table) < 1e-14);

    // Brute-force partition of the pairs counted by P(E, outer) but not by
    // P(E, inner): both cells outside inner and at least one in the strip.
    const CellMask strip = outer.omega.minus(inner.omega);
    const CellMask comp = ~set.inside;
    const double strip_strip = interaction(spec, set.inside & strip, comp & strip, table);
    const double strip_out = interaction(spec, set.inside & strip, comp.minus(outer.omega), table);
    const double out_strip = interaction(spec, set.inside.minus(outer.omega), comp & strip, table);
    const ExteriorField ext = exterior_masses(spec, set.exterior, table, outer.policy);
    double beyond = 0.0;
    for (std::size_t i : (comp & strip).indices()) beyond += ext.mass_in_set[i];
    for (std::size_t i : (set.inside & strip).indices()) beyond += ext.mass_in_complement[i];
    const double diff = perimeter(set, outer, table).total - perimeter(set, inner, table).total;
    CHECK(diff == doctest::Approx(strip_strip + strip_out + out_strip + beyond).epsilon(1e-12));
    CHECK(strip_strip > 0.0);
}

TEST_CASE("interaction is bilinear and checks disjointness") {
    const GridSpec spec = GridSpec::make(1, {6, 1, 1}, 1.0);
    const InteractionTable table = build_table(spec, {0.5, 1, 8}, 5);
    CellMask a(6), b(6);
    a.set(0);
    b.set(2);
    b.set(5);
    CHECK(interaction(spec, a, b, table) ==
          doctest::Approx(interval_pair_exact(0, 1, 2, 3, 0.5) + interval_pair_exact(0, 1, 5, 6, 0.5)));
    CHECK(interaction(spec, a, b, table) == doctest::Approx(interaction(spec, b, a, table)));
    CHECK_THROWS_AS(interaction(spec, a, a, table), Error);
}

TEST_CASE("relaxed energy of an indicator equals the perimeter exactly") {
    const GridSpec spec = GridSpec::make(2, {9, 9, 1}, 1.0 / 9);
    const InteractionTable table = build_table(spec, {0.5, 2, 5}, 12);
    const CellSet set = CellSet::from_model(spec, HalfSpaceExterior{0, 0.3, true});
    const DomainWindow window{spec, disk_mask(spec, 0.5, 0.5, 0.4)};
    CHECK(relaxed_energy(ScalarField::indicator(set), window, table) == perimeter(set, window, table).total);
}

TEST_CASE("coarea formula") {
    const GridSpec spec = GridSpec::make(2, {8, 8, 1}, 0.125);
    const InteractionTable table = build_table(spec, {0.5, 2, 5}, 12);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    ScalarField u{spec, std::vector<double>(spec.cell_count()), HalfSpaceExterior{1, 0.5, false}};
    for (double& v : u.values) v = dist(rng);
    const DomainWindow window{spec, disk_mask(spec, 0.5, 0.5, 0.35)};
    const CoareaResult r = coarea_check(u, window, table);
    CHECK(r.levels.size() == spec.cell_count() + 2);
    CHECK(r.rhs == doctest::Approx(r.lhs).epsilon(1e-12));

    // constant exterior value outside [0, 1]
    ScalarField v = ScalarField::constant(spec, 0.0);
    v.values = u.values;
    for (double& x : v.values) x = 3.0 * x - 1.0;
    v.exterior_value = 1.5;
    const CoareaResult rv = coarea_check(v, window, table);
    CHECK(rv.rhs == doctest::Approx(rv.lhs).epsilon(1e-12));
}

TEST_CASE("superlevel sets and levels") {
    const GridSpec spec = GridSpec::make(1, {3, 1, 1}, 1.0);
    ScalarField u{spec, {0.2, 0.8, 0.5}, HalfSpaceExterior{0, 1.0, true}};
    CHECK(field_levels(u) == std::vector<double>{0.0, 0.2, 0.5, 0.8, 1.0});
    const CellSet mid = superlevel_set(u, 0.5);
    CHECK(mid.inside.test(1));
    CHECK_FALSE(mid.inside.test(2));
    CHECK(std::holds_alternative<HalfSpaceExterior>(mid.exterior));
    CHECK(std::holds_alternative<FullExterior>(superlevel_set(u, -0.1).exterior));
    CHECK(std::holds_alternative<EmptyExterior>(superlevel_set(u, 1.0).exterior));
}

TEST_CASE("degenerate window") {
    const GridSpec spec = GridSpec::make(1, {4, 1, 1}, 0.25);
    const InteractionTable table = build_table(spec, {0.5, 1, 8}, 3);
    const PerimeterBreakdown p = perimeter(CellSet::empty(spec), DomainWindow{spec, CellMask(4)}, table);
    CHECK(p.degenerate);
    CHECK(p.total == 0.0);
}

TEST_CASE("results do not depend on the thread count") {
    const GridSpec spec = GridSpec::make(2, {16, 16, 1}, 1.0 / 16);
    const InteractionTable table = build_table(spec, {0.3, 2, 5}, 20);
    const CellSet set{spec, disk_mask(spec, 0.5, 0.5, 0.3), EmptyExterior{}};
    const DomainWindow window{spec, disk_mask(spec, 0.5, 0.5, 0.45)};
    const int saved = thread_count();
    set_thread_count(1);
    const double one = perimeter(set, window, table).total;
    set_thread_count(6);
    const double six = perimeter(set, window, table).total;
    set_thread_count(saved);
    CHECK(one == six);
}

TEST_CASE("log-squared sequence total") {
    const SummableSequence beta = log_squared_sequence();
    CHECK(beta.term(1) == doctest::Approx(1.0 / (std::log(2.0) * std::log(2.0))));
    // direct partial sum plus the integral tail 1/log(N+1), which differs from
    // the true tail by O(1/(N log^3 N))
    long double partial = 0.0L;
    const int n = 2000000;
    for (int k = 1; k <= n; ++k) partial += beta.term(k);
    const double oracle = static_cast<double>(partial) + 1.0 / std::log(n + 1.0);
    CHECK(beta.total == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("accumulating intervals and the 1D probe") {
    SummableSequence geometric{[](int k) { return std::pow(0.5, k); }, 1.0};
    const IntervalUnion e2 = accumulating_intervals(geometric, 2);
    REQUIRE(e2.size() == 2);
    CHECK(e2[0].first == doctest::Approx(0.75));
    CHECK(e2[0].second == doctest::Approx(0.875));
    CHECK(e2[1].first == doctest::Approx(0.9375));

    // single interval by hand: P((a,b), (0,M)) = L with the two gaps and the two half-lines
    const IntervalUnion e1 = accumulating_intervals(geometric, 1);
    const double a = 0.75, b = 0.875, s = 0.5;
    const double expect = interval_pair_exact(0, a, a, b, s) + interval_pair_exact(a, b, b, 1.0, s) +
                          interval_halfline_exact(a, b, 1.0, s) + interval_halfline_exact(-b, -a, 0.0, s);
    CHECK(divergence_probe_1d(geometric, 1, s) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(e1.size() == 1);

    SummableSequence growing{[](int k) { return 0.1 * k; }, 100.0};
    CHECK_THROWS_AS(accumulating_intervals(growing, 2), Error);
    SummableSequence wrong_total{[](int k) { return std::pow(0.5, k); }, 0.5};
    CHECK_THROWS_AS(accumulating_intervals(wrong_total, 2), Error);
    CHECK_THROWS_AS(divergence_probe_1d(geometric, 2, 1.0), Error);
}

TEST_CASE("strip scan in 1D against the interval formula") {
    const int n = 256;
    const GridSpec spec = GridSpec::make(1, {n, 1, 1}, 1.0 / n);
    const DomainWindow window = DomainWindow::whole(spec);
    const std::vector<double> deltas{0.25, 0.125, 0.0625, 0.03125};
    for (double s : {0.3, 0.7}) {
        const InteractionTable table = build_table(spec, {s, 1, 8}, n);
        const StripScan scan = strip_scan(window, deltas, table, 0.3);
        // two sides, each int_0^d int_d^{1-d} (y-x)^{-1-s}
        for (const StripRow& row : scan.rows) {
            const double d = row.delta;
            const double exact =
                2.0 / (s * (1.0 - s)) * (std::pow(d, 1 - s) - std::pow(1 - d, 1 - s) + std::pow(1 - 2 * d, 1 - s));
            CHECK(row.value == doctest::Approx(exact).epsilon(1e-6));
            CHECK(row.value <= row.bound);
        }
        // n omega_n = 2 and H^0 of a level set is two points
        CHECK(scan.level_set_measure == doctest::Approx(2.0));
        CHECK(scan.constant == doctest::Approx(2.0 / (s * (1 - s)) * 2.0));
    }
}

TEST_CASE("strip scan rejects bad schedules") {
    const GridSpec spec = GridSpec::make(1, {32, 1, 1}, 1.0 / 32);
    const InteractionTable table = build_table(spec, {0.5, 1, 8}, 32);
    const DomainWindow window = DomainWindow::whole(spec);
    CHECK_THROWS_AS(strip_scan(window, {}, table, 0.3), Error);
    CHECK_THROWS_AS(strip_scan(window, {0.1, 0.2}, table, 0.3), Error);
    CHECK_THROWS_AS(strip_scan(window, {0.4}, table, 0.3), Error);
}

TEST_CASE("1D exterior with a cell size that is not a power of two") {
    // the last cell must end exactly where the exterior half-line begins
    for (int n : {5, 7, 11}) {
        const GridSpec spec = GridSpec::make(1, {n, 1, 1}, 1.0 / 12);
        const InteractionTable table = build_table(spec, {0.5, 1, 8}, n);
        const CellSet set = CellSet::from_model(spec, HalfSpaceExterior{0, 0.2, true});
        const DomainWindow whole = DomainWindow::whole(spec);
        REQUIRE_NOTHROW(perimeter(set, whole, table));
        CHECK(perimeter(set, whole, table).total ==
              doctest::Approx(perimeter(set.complement(), whole, table).total).epsilon(1e-13));
    }
}
