#include <doctest.h>

#include <cmath>
#include <limits>

#include "fracperim/error.hpp"
#include "fracperim/grid.hpp"

using namespace fracperim;

namespace {

CellMask mask_from(std::initializer_list<int> bits) {
    CellMask m(bits.size());
    std::size_t i = 0;
    for (int b : bits) m.set(i++, b != 0);
    return m;
}

// Brute-force distance from a point to the nearest face between omega and
// its complement, using explicit face enumeration in 2D.
double face_distance_2d(const GridSpec& spec, const CellMask& omega, const Point& p) {
    double best = std::numeric_limits<double>::infinity();
    auto inside = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= spec.extent[0] || y >= spec.extent[1]) return false;
        return omega.test(spec.index({x, y, 0}));
    };
    auto seg = [&](double x0, double y0, double x1, double y1) {
        // axis-aligned segment
        const double cx = std::clamp(p[0], std::min(x0, x1), std::max(x0, x1));
        const double cy = std::clamp(p[1], std::min(y0, y1), std::max(y0, y1));
        best = std::min(best, std::hypot(p[0] - cx, p[1] - cy));
    };
    const double h = spec.h;
    for (int y = -1; y <= spec.extent[1]; ++y)
        for (int x = -1; x <= spec.extent[0]; ++x) {
            const double x0 = spec.origin[0] + x * h, y0 = spec.origin[1] + y * h;
            if (inside(x, y) != inside(x + 1, y)) seg(x0 + h, y0, x0 + h, y0 + h);
            if (inside(x, y) != inside(x, y + 1)) seg(x0, y0 + h, x0 + h, y0 + h);
        }
    return best;
}

}  // namespace

TEST_CASE("grid spec indexing and centers") {
    const GridSpec spec = GridSpec::make(2, {4, 3, 1}, 0.5, {1.0, -1.0, 0.0});
    CHECK(spec.cell_count() == 12);
    for (std::size_t i = 0; i < spec.cell_count(); ++i) CHECK(spec.index(spec.coords(i)) == i);
    CHECK(spec.coords(5) == CellCoord{1, 1, 0});
    const Point c = spec.center(5);
    CHECK(c[0] == doctest::Approx(1.75));
    CHECK(c[1] == doctest::Approx(-0.25));
    CHECK(spec.cell_volume() == doctest::Approx(0.25));
    CHECK(spec.max_extent() == 4);
}

TEST_CASE("grid spec validation") {
    CHECK_THROWS_AS(GridSpec::make(4, {1, 1, 1}, 1.0), Error);
    CHECK_THROWS_AS(GridSpec::make(1, {0, 1, 1}, 1.0), Error);
    CHECK_THROWS_AS(GridSpec::make(1, {3, 1, 1}, -1.0), Error);
    // unused axes are normalized by make, rejected by validate
    CHECK(GridSpec::make(1, {3, 2, 1}, 1.0).extent[1] == 1);
    GridSpec raw;
    raw.extent = {3, 2, 1};
    CHECK_THROWS_AS(raw.validate(), Error);
}

TEST_CASE("mask algebra and lexicographic order") {
    const CellMask a = mask_from({1, 1, 0, 0});
    const CellMask b = mask_from({0, 1, 1, 0});
    CHECK((a & b) == mask_from({0, 1, 0, 0}));
    CHECK((a | b) == mask_from({1, 1, 1, 0}));
    CHECK((a ^ b) == mask_from({1, 0, 1, 0}));
    CHECK(~a == mask_from({0, 0, 1, 1}));
    CHECK(a.minus(b) == mask_from({1, 0, 0, 0}));
    CHECK(a.count() == 2);
    CHECK((a & b).subset_of(a));
    CHECK_FALSE(a.disjoint_from(b));
    CHECK(a.minus(b).disjoint_from(b));
    // cell 0 is most significant and "out" sorts before "in"
    CHECK(mask_from({0, 1, 1, 1}) < mask_from({1, 0, 0, 0}));
    CHECK(mask_from({1, 0, 0, 1}) < mask_from({1, 0, 1, 0}));
    CHECK_THROWS_AS((void)(a & CellMask(3)), Error);
}

TEST_CASE("exterior models") {
    const HalfSpaceExterior half{1, 1.0, true};
    CHECK(exterior_contains(half, {0.0, 0.7, 0.0}, 2));
    CHECK_FALSE(exterior_contains(half, {0.0, 1.2, 0.0}, 2));
    CHECK(exterior_contains(complement_of(half), {0.0, 1.2, 0.0}, 2));
    CHECK(constant_phase(EmptyExterior{}) == 0);
    CHECK(constant_phase(FullExterior{}) == 1);
    CHECK(constant_phase(half) == -1);
    CHECK(std::holds_alternative<FullExterior>(complement_of(EmptyExterior{})));

    SubgraphExterior graph;
    graph.base = GridSpec::make(1, {2, 1, 1}, 1.0);
    graph.heights = {0.5, 1.5};
    graph.farfield = -1.0;
    CHECK(subgraph_height(graph, {0.5, 0.0, 0.0}, 2) == 0.5);
    CHECK(subgraph_height(graph, {1.5, 0.0, 0.0}, 2) == 1.5);
    CHECK(subgraph_height(graph, {7.0, 0.0, 0.0}, 2) == -1.0);
    CHECK(exterior_contains(graph, {1.5, 1.0, 0.0}, 2));
    CHECK_FALSE(exterior_contains(graph, {0.5, 1.0, 0.0}, 2));

    const GridSpec spec = GridSpec::make(2, {2, 2, 1}, 1.0);
    const CellSet set = CellSet::from_model(spec, half);
    CHECK(set.inside == mask_from({1, 1, 0, 0}));
    CHECK(set.complement().inside == mask_from({0, 0, 1, 1}));
}

TEST_CASE("signed distance in 1D matches the worked example") {
    const GridSpec spec = GridSpec::make(1, {4, 1, 1}, 0.25);
    const DomainWindow window{spec, mask_from({0, 1, 1, 0})};
    const ScalarField d = signed_distance(window);
    CHECK(d.values[0] == doctest::Approx(0.125));
    CHECK(d.values[1] == doctest::Approx(-0.125));
    CHECK(d.values[2] == doctest::Approx(-0.125));
    CHECK(d.values[3] == doctest::Approx(0.125));
}

TEST_CASE("signed distance in 2D agrees with face enumeration") {
    const GridSpec spec = GridSpec::make(2, {9, 7, 1}, 0.125);
    CellMask omega(spec.cell_count());
    for (std::size_t i = 0; i < spec.cell_count(); ++i) {
        const Point p = spec.center(i);
        omega.set(i, (p[0] - 0.55) * (p[0] - 0.55) + (p[1] - 0.45) * (p[1] - 0.45) < 0.1);
    }
    const DomainWindow window{spec, omega};
    const ScalarField d = signed_distance(window);
    for (std::size_t i = 0; i < spec.cell_count(); ++i) {
        const double expect = face_distance_2d(spec, omega, spec.center(i)) * (omega.test(i) ? -1.0 : 1.0);
        CHECK(d.values[i] == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK_THROWS_AS(signed_distance(DomainWindow{spec, CellMask(spec.cell_count())}), Error);
    // the whole box: distance to the box faces
    const ScalarField box = signed_distance(DomainWindow::whole(spec));
    const CellCoord corner{0, 0, 0};
    CHECK(box.values[spec.index(corner)] == doctest::Approx(-0.5 * spec.h));
}

TEST_CASE("sublevel windows and tubes") {
    const GridSpec spec = GridSpec::make(1, {8, 1, 1}, 0.125);
    const DomainWindow window{spec, mask_from({0, 1, 1, 1, 1, 1, 1, 0})};
    // centers at distance h/2, 3h/2, ... from the omega boundary
    CHECK(sublevel_window(window, -0.125).omega == mask_from({0, 0, 1, 1, 1, 1, 0, 0}));
    CHECK(sublevel_window(window, 0.05).omega == window.omega);
    CHECK(sublevel_window(window, 0.2).omega == CellMask(8, true));
    CHECK(tubular_neighborhood(window, 0.1) == mask_from({1, 1, 0, 0, 0, 0, 1, 1}));
    CHECK_THROWS_AS(tubular_neighborhood(window, 0.0), Error);
}

TEST_CASE("boundary cells and grid smoothness") {
    const GridSpec spec = GridSpec::make(2, {4, 4, 1}, 1.0);
    CellMask block(16);
    for (int y = 1; y < 3; ++y)
        for (int x = 1; x < 3; ++x) block.set(spec.index({x, y, 0}));
    CHECK(is_grid_smooth(spec, block));
    const CellMask bnd = boundary_cells(spec, block);
    // the block and its eight face neighbours
    CHECK(bnd.count() == 12);
    CHECK(bnd.test(spec.index({1, 1, 0})));
    CHECK_FALSE(bnd.test(spec.index({0, 0, 0})));

    CellMask checker(16);
    checker.set(spec.index({1, 1, 0}));
    checker.set(spec.index({2, 2, 0}));
    CHECK_FALSE(is_grid_smooth(spec, checker));
}

TEST_CASE("grid and field files round trip") {
    const GridSpec spec = GridSpec::make(2, {3, 2, 1}, 0.25, {-1.0, 0.5, 0.0});
    const CellMask mask = mask_from({1, 0, 0, 1, 1, 0});
    const GridFile g = parse_grid_file(write_grid_file(spec, mask));
    CHECK(g.spec == spec);
    CHECK(g.mask == mask);

    const std::vector<double> values{0.1, 0.2, 1.0 / 3.0, 0.0, 1.0, 0.75};
    const FieldFile f = parse_field_file(write_field_file(spec, values));
    CHECK(f.spec == spec);
    CHECK(f.values == values);

    // x is the fastest axis
    const GridFile h = parse_grid_file("fracgrid 2 3 2 1.0 0 0\n100\n000\n");
    CHECK(h.mask.test(0));
    CHECK(h.mask.count() == 1);

    CHECK_THROWS_AS(parse_grid_file("fracgrid 2 3 2 1.0 0 0\n100\n00"), Error);
    CHECK_THROWS_AS(parse_grid_file("fracgrid 2 3 2 1.0 0 0\n100\n0020"), Error);
    CHECK_THROWS_AS(parse_grid_file("grid 1 3 1.0 0\n100"), Error);
    CHECK_THROWS_AS(parse_field_file("fracfield 1 2 1.0 0\n0.5"), Error);
    CHECK_THROWS_AS(read_grid_file("/nonexistent/file.grid"), Error);
}

TEST_CASE("padded signed distance") {
    const GridSpec spec = GridSpec::make(2, {6, 5, 1}, 0.2);
    CellMask omega(spec.cell_count());
    for (std::size_t i = 0; i < spec.cell_count(); ++i) omega.set(i, spec.coords(i)[0] + spec.coords(i)[1] < 6);
    const DomainWindow window{spec, omega};
    auto phase = [&](const CellCoord& c) { return spec.in_box(c) && omega.test(spec.index(c)); };
    const ScalarField plain = signed_distance(window);
    for (int pad : {0, 3}) {
        const PaddedDistance padded = padded_signed_distance(spec, phase, pad);
        for (std::size_t i = 0; i < spec.cell_count(); ++i) CHECK(padded.at(spec.coords(i)) == doctest::Approx(plain.values[i]).epsilon(1e-14));
    }
    // a ring cell just left of the box, next to an omega cell
    const PaddedDistance padded = padded_signed_distance(spec, phase, 2);
    CHECK(padded.at({-1, 0, 0}) == doctest::Approx(0.1));
    CHECK(padded.at({-2, 0, 0}) == doctest::Approx(0.3));

    // a half-space set: the boundary is the line y = 0.6, also beyond the box
    const CellSet half = CellSet::from_model(spec, HalfSpaceExterior{1, 0.6, true});
    const ScalarField d = signed_distance(half, 2);
    for (std::size_t i = 0; i < spec.cell_count(); ++i)
        CHECK(d.values[i] == doctest::Approx(spec.center(i)[1] - 0.6));
    CHECK(std::isinf(signed_distance(CellSet::empty(spec), 1).values[0]));
}
