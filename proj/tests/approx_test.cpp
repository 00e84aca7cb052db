#include <doctest.h>

#include <cmath>

#include "fracperim/approx.hpp"
#include "fracperim/error.hpp"

using namespace fracperim;

namespace {

CellSet disk(const GridSpec& spec, double cx, double cy, double r) {
    CellSet set = CellSet::empty(spec);
    for (std::size_t i = 0; i < spec.cell_count(); ++i) {
        const Point p = spec.center(i);
        set.inside.set(i, std::hypot(p[0] - cx, p[1] - cy) < r);
    }
    return set;
}

// Direct convolution oracle: explicit double loop over all cells of a large
// enough region, with the profile written out independently.
double direct_mollify(const CellSet& set, double eps, const CellCoord& c) {
    const GridSpec& spec = set.spec;
    double num = 0.0, den = 0.0;
    const int reach = static_cast<int>(eps / spec.h) + 1;
    for (int dy = -reach; dy <= reach; ++dy)
        for (int dx = -reach; dx <= reach; ++dx) {
            const double r = std::hypot(dx, dy) * spec.h / eps;
            if (r >= 1.0) continue;
            const double w = std::pow(1.0 - r * r, 4);
            const CellCoord nb{c[0] + dx, c[1] + dy, 0};
            const bool in = spec.in_box(nb) ? set.inside.test(spec.index(nb))
                                            : exterior_contains(set.exterior, spec.center_of(nb), 2);
            num += w * (in ? 1.0 : 0.0);
            den += w;
        }
    return num / den;
}

}  // namespace

TEST_CASE("mollifier basics") {
    const GridSpec spec = GridSpec::make(2, {12, 12, 1}, 1.0 / 12);
    CHECK(mollifier_profile(0.0, MollifierSpec::Profile::PolynomialBump) == 1.0);
    CHECK(mollifier_profile(1.0, MollifierSpec::Profile::PolynomialBump) == 0.0);

    const ScalarField one = mollify(ScalarField::constant(spec, 1.0), {3 * spec.h});
    for (double v : one.values) CHECK(v == 1.0);

    const CellSet blob = disk(spec, 0.5, 0.45, 0.3);
    const ScalarField same = mollify(blob, {spec.h});
    CHECK(same.values == ScalarField::indicator(blob).values);

    CHECK_THROWS_AS(mollify(blob, {0.5 * spec.h}), Error);
}

TEST_CASE("mollified half-space against direct convolution") {
    const GridSpec spec = GridSpec::make(2, {10, 10, 1}, 0.1);
    const CellSet half = CellSet::from_model(spec, HalfSpaceExterior{0, 0.5, true});
    const double eps = 0.3;
    const ScalarField u = mollify(half, {eps});
    const ScalarField d = signed_distance(half, 4);
    for (std::size_t i = 0; i < spec.cell_count(); ++i) {
        const CellCoord c = spec.coords(i);
        CHECK(u.values[i] == doctest::Approx(direct_mollify(half, eps, c)).epsilon(1e-12));
        CHECK(u.values[i] >= 0.0);
        CHECK(u.values[i] <= 1.0);
        if (d.values[i] <= -eps) CHECK(u.values[i] == 1.0);
        if (d.values[i] >= eps) CHECK(u.values[i] == 0.0);
        if (c[0] > 0) CHECK(u.values[i] <= u.values[spec.index({c[0] - 1, c[1], 0})]);
    }
}

TEST_CASE("mollification is linear") {
    const GridSpec spec = GridSpec::make(2, {9, 9, 1}, 1.0 / 9);
    const ScalarField a = ScalarField::indicator(disk(spec, 0.3, 0.3, 0.3));
    const ScalarField b = ScalarField::indicator(disk(spec, 0.7, 0.6, 0.25));
    ScalarField combo = a;
    for (std::size_t i = 0; i < combo.values.size(); ++i) combo.values[i] = 2.0 * a.values[i] - 0.5 * b.values[i];
    const MollifierSpec m{0.3};
    const ScalarField ma = mollify(a, m), mb = mollify(b, m), mc = mollify(combo, m);
    for (std::size_t i = 0; i < combo.values.size(); ++i)
        CHECK(mc.values[i] == doctest::Approx(2.0 * ma.values[i] - 0.5 * mb.values[i]).epsilon(1e-12));
}

TEST_CASE("superlevel sets of a mollified indicator") {
    const GridSpec spec = GridSpec::make(2, {10, 10, 1}, 0.1);
    const CellSet blob = disk(spec, 0.5, 0.5, 0.3);
    const ScalarField u = mollify(blob, {0.25});
    CHECK(superlevel(u, -0.1).inside.all());
    CHECK(superlevel(ScalarField::indicator(blob), 0.5).inside == blob.inside);
    for (double t = 0.05; t < 0.95; t += 0.1) CHECK(superlevel(u, t + 0.1).inside.subset_of(superlevel(u, t).inside));

    const InteractionTable table = build_table(spec, {0.5, 2, 5}, 14);
    const CoareaResult r = coarea_check(u, DomainWindow::whole(spec), table);
    CHECK(r.rhs == doctest::Approx(r.lhs).epsilon(1e-12));
}

TEST_CASE("approximation pipeline") {
    const GridSpec spec = GridSpec::make(2, {16, 16, 1}, 1.0 / 16);
    const double h = spec.h;
    const InteractionTable table = build_table(spec, {0.5, 2, 5}, 24);
    DomainWindow inner{spec, CellMask(spec.cell_count())};
    for (std::size_t i = 0; i < spec.cell_count(); ++i) {
        const CellCoord c = spec.coords(i);
        inner.omega.set(i, c[0] >= 3 && c[1] >= 3 && c[0] < 13 && c[1] < 13);
    }
    const std::vector<double> schedule{8 * h, 4 * h, 2 * h, h};

    SUBCASE("half-space: containment at every step") {
        const CellSet half = CellSet::from_model(spec, HalfSpaceExterior{1, 0.47, true});
        for (const ApproxStep& step : approximate_set(half, inner, schedule, table))
            CHECK(step.boundary_in_neighborhood);
    }
    SUBCASE("checkerboard: value at eps = h matches") {
        CellSet checker = CellSet::empty(spec);
        for (std::size_t i = 0; i < spec.cell_count(); ++i) {
            const CellCoord c = spec.coords(i);
            checker.inside.set(i, (c[0] + c[1]) % 2 == 0);
        }
        const std::vector<ApproxStep> steps = approximate_set(checker, inner, schedule, table);
        const double target = perimeter(checker, inner, table).total;
        CHECK(steps.back().perimeter.total == doctest::Approx(target).epsilon(0.05));
        CHECK(steps.back().set.inside == checker.inside);
    }
    SUBCASE("set far inside omega: both pipelines agree") {
        const CellSet blob = disk(spec, 0.5, 0.5, 0.12);
        const DomainWindow whole = DomainWindow::whole(spec);
        const std::vector<double> short_schedule{2 * h, h};
        const auto plain = approximate_set(blob, whole, short_schedule, table);
        const auto cut = approximate_set_lipschitz(blob, whole, short_schedule, table);
        for (std::size_t k = 0; k < plain.size(); ++k) {
            CHECK(plain[k].set.inside == cut[k].set.inside);
            CHECK(plain[k].perimeter.total == cut[k].perimeter.total);
        }
    }
    SUBCASE("set touching the domain boundary: relaxed containment") {
        const CellSet blob = disk(spec, 0.2, 0.5, 0.35);
        for (const ApproxStep& step : approximate_set_lipschitz(blob, DomainWindow::whole(spec), schedule, table))
            CHECK(step.boundary_in_neighborhood);
    }
    SUBCASE("schedule validation") {
        const CellSet blob = disk(spec, 0.5, 0.5, 0.3);
        CHECK_THROWS_AS(approximate_set(blob, inner, {h, 2 * h}, table), Error);
        CHECK_THROWS_AS(approximate_set(blob, inner, {2 * h, 0.5 * h}, table), Error);
        CHECK_THROWS_AS(approximate_set(blob, inner, {}, table), Error);
    }
}

TEST_CASE("cut-off converges in L1 and in perimeter under refinement") {
    // E touches the boundary of Omega = box; at eps = h the cut-off band has
    // width 4h, so the error should shrink with h.
    double previous_error = 1.0, previous_changed = 1.0;
    for (int n : {16, 32}) {
        const GridSpec spec = GridSpec::make(2, {n, n, 1}, 1.0 / n);
        const InteractionTable table = build_table(spec, {0.5, 2, 5}, n + 4);
        const CellSet blob = disk(spec, 0.3, 0.5, 0.4);
        const DomainWindow whole = DomainWindow::whole(spec);
        const auto steps = approximate_set_lipschitz(blob, whole, {spec.h}, table);
        const double target = perimeter(blob, whole, table).total;
        const double error = std::abs(steps[0].perimeter.total / target - 1.0);
        const double changed = double((steps[0].set.inside ^ blob.inside).count()) / spec.cell_count();
        CHECK(error < previous_error);
        CHECK(changed < previous_changed);
        previous_error = error;
        previous_changed = changed;
    }
}
