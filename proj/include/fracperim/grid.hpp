#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace fracperim {

using Point = std::array<double, 3>;
using CellCoord = std::array<int, 3>;

/// Uniform Cartesian grid of cubic cells. Unused axes have extent 1.
/// Cell centers sit at origin + (k + 1/2) h; flat index is x-fastest.
struct GridSpec {
    int dim = 1;
    Point origin{0.0, 0.0, 0.0};
    CellCoord extent{1, 1, 1};
    double h = 1.0;

    static GridSpec make(int dim, CellCoord extent, double h, Point origin = {0.0, 0.0, 0.0});

    void validate() const;
    std::size_t cell_count() const {
        return static_cast<std::size_t>(extent[0]) * extent[1] * extent[2];
    }
    CellCoord coords(std::size_t index) const;
    std::size_t index(const CellCoord& c) const {
        return static_cast<std::size_t>(c[0]) +
               static_cast<std::size_t>(extent[0]) *
                   (static_cast<std::size_t>(c[1]) + static_cast<std::size_t>(extent[1]) * c[2]);
    }
    bool in_box(const CellCoord& c) const;
    Point center_of(const CellCoord& c) const;
    Point center(std::size_t index) const { return center_of(coords(index)); }
    double cell_volume() const;
    int max_extent() const;

    bool operator==(const GridSpec&) const = default;
};

/// One flag per grid cell.
class CellMask {
public:
    CellMask() = default;
    explicit CellMask(std::size_t n, bool value = false) : bits_(n, value ? 1 : 0) {}

    std::size_t size() const { return bits_.size(); }
    bool test(std::size_t i) const { return bits_[i] != 0; }
    void set(std::size_t i, bool value = true) { bits_[i] = value ? 1 : 0; }

    std::size_t count() const;
    bool none() const { return count() == 0; }
    bool all() const { return count() == size(); }
    std::vector<std::size_t> indices() const;

    CellMask operator&(const CellMask& other) const;
    CellMask operator|(const CellMask& other) const;
    CellMask operator^(const CellMask& other) const;
    CellMask operator~() const;
    /// Cells in this mask and not in `other`.
    CellMask minus(const CellMask& other) const;
    bool subset_of(const CellMask& other) const;
    bool disjoint_from(const CellMask& other) const;

    bool operator==(const CellMask&) const = default;
    /// Lexicographic order with cell 0 as the most significant position.
    std::strong_ordering operator<=>(const CellMask& other) const;

private:
    std::vector<std::uint8_t> bits_;
};

/// Models of the set outside the grid box.
struct EmptyExterior {
    bool operator==(const EmptyExterior&) const = default;
};
struct FullExterior {
    bool operator==(const FullExterior&) const = default;
};
/// {x_axis < level} when below, {x_axis > level} otherwise.
struct HalfSpaceExterior {
    int axis = 0;
    double level = 0.0;
    bool below = true;
    bool operator==(const HalfSpaceExterior&) const = default;
};
/// {t < v(x')} (or {t > v(x')} when !below) with t the last coordinate and
/// v tabulated on a base grid of dimension dim-1; v = farfield off the base box.
struct SubgraphExterior {
    GridSpec base;
    std::vector<double> heights;
    double farfield = 0.0;
    bool below = true;
    bool operator==(const SubgraphExterior&) const = default;
};

using ExteriorModel = std::variant<EmptyExterior, FullExterior, HalfSpaceExterior, SubgraphExterior>;

bool exterior_contains(const ExteriorModel& model, const Point& p, int dim);
ExteriorModel complement_of(const ExteriorModel& model);
/// 0 or 1 when the model is a constant phase, -1 when both phases occur.
int constant_phase(const ExteriorModel& model);
double subgraph_height(const SubgraphExterior& model, const Point& p, int dim);

/// The set E: occupancy inside the box plus a model of E outside it.
struct CellSet {
    GridSpec spec;
    CellMask inside;
    ExteriorModel exterior = EmptyExterior{};

    static CellSet empty(const GridSpec& spec) { return {spec, CellMask(spec.cell_count()), EmptyExterior{}}; }
    static CellSet full(const GridSpec& spec) { return {spec, CellMask(spec.cell_count(), true), FullExterior{}}; }
    /// Cell-center rasterization of the exterior model over the whole box.
    static CellSet from_model(const GridSpec& spec, const ExteriorModel& model);

    CellSet complement() const { return {spec, ~inside, complement_of(exterior)}; }
    bool contains(std::size_t cell) const { return inside.test(cell); }
};

/// Per-cell values. Beyond the box the field is the indicator of `exterior`,
/// or `exterior_value` everywhere when that is set.
struct ScalarField {
    GridSpec spec;
    std::vector<double> values;
    ExteriorModel exterior = EmptyExterior{};
    std::optional<double> exterior_value;

    static ScalarField constant(const GridSpec& spec, double value);
    static ScalarField indicator(const CellSet& set);
    double operator[](std::size_t i) const { return values[i]; }
};

struct ComplementPolicy {
    enum class Kind { TruncateAtRadius, AnalyticTail };
    Kind kind = Kind::AnalyticTail;
    double radius = 0.0;

    static ComplementPolicy truncate_at(double radius) { return {Kind::TruncateAtRadius, radius}; }
    static ComplementPolicy analytic_tail() { return {Kind::AnalyticTail, 0.0}; }
    bool operator==(const ComplementPolicy&) const = default;
};

/// Omega restricted to the box; everything beyond the box is complement.
struct DomainWindow {
    GridSpec spec;
    CellMask omega;
    ComplementPolicy policy = ComplementPolicy::analytic_tail();

    static DomainWindow whole(const GridSpec& spec) { return {spec, CellMask(spec.cell_count(), true)}; }
};

/// Signed distance from cell centers to the faces separating omega from its
/// complement (box faces of omega cells included); negative inside omega.
ScalarField signed_distance(const DomainWindow& window);

/// Signed distance on the box enlarged by `pad` cells per side, for the set
/// whose phase at any cell coordinate is given by `phase`. Faces more than
/// `pad` cells beyond the box are not seen.
struct PaddedDistance {
    GridSpec spec;  // the enlarged grid
    int pad = 0;
    std::vector<double> values;

    /// Value at a coordinate of the original box (may lie in the padding).
    double at(const CellCoord& c) const;
};
PaddedDistance padded_signed_distance(const GridSpec& spec, const std::function<bool(const CellCoord&)>& phase,
                                      int pad);

/// Signed distance to the boundary of a set, using its exterior model
/// beyond the box. Infinite when the set has no boundary in reach.
ScalarField signed_distance(const CellSet& set, int pad);

/// Omega_r = {signed distance < r}.
DomainWindow sublevel_window(const DomainWindow& window, double r);
DomainWindow sublevel_window(const DomainWindow& window, const ScalarField& distance, double r);

/// N_rho(boundary) = {|signed distance| < rho}.
CellMask tubular_neighborhood(const DomainWindow& window, double rho);
CellMask tubular_neighborhood(const ScalarField& distance, double rho);

/// Cells with a face neighbour (inside the box) of the opposite phase.
CellMask boundary_cells(const GridSpec& spec, const CellMask& mask);

/// Face-connected boundary and no 2x2 checkerboard blocks: the grid-scale
/// stand-in for a smooth boundary.
bool is_grid_smooth(const GridSpec& spec, const CellMask& mask);

/// `fracgrid <dim> <nx> [ny] [nz] <h> <ox> [oy] [oz]` + row-major 0/1 cells.
std::string write_grid_file(const GridSpec& spec, const CellMask& mask);
struct GridFile {
    GridSpec spec;
    CellMask mask;
};
GridFile parse_grid_file(const std::string& text);
GridFile read_grid_file(const std::string& path);

/// `fracfield <dim> <nx> [ny] [nz] <h> <ox> [oy] [oz]` + one real per cell.
std::string write_field_file(const GridSpec& spec, const std::vector<double>& values);
struct FieldFile {
    GridSpec spec;
    std::vector<double> values;
};
FieldFile parse_field_file(const std::string& text);
FieldFile read_field_file(const std::string& path);

}  // namespace fracperim
