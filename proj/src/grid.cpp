#include "fracperim/grid.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

#include "fracperim/error.hpp"
#include "fracperim/parallel.hpp"

namespace fracperim {

GridSpec GridSpec::make(int dim, CellCoord extent, double h, Point origin) {
    GridSpec spec;
    spec.dim = dim;
    spec.h = h;
    for (int a = 0; a < 3; ++a) {
        spec.extent[a] = a < dim ? extent[a] : 1;
        spec.origin[a] = a < dim ? origin[a] : 0.0;
    }
    spec.validate();
    return spec;
}

void GridSpec::validate() const {
    if (dim < 1 || dim > 3) throw Error(ErrorCode::InvalidArgument, "grid dimension must be 1, 2 or 3");
    if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorCode::InvalidArgument, "cell size must be positive");
    for (int a = 0; a < 3; ++a) {
        if (extent[a] < 1) throw Error(ErrorCode::InvalidArgument, "extents must be >= 1");
        if (a >= dim && extent[a] != 1) throw Error(ErrorCode::InvalidArgument, "unused axes must have extent 1");
    }
}

CellCoord GridSpec::coords(std::size_t index) const {
    CellCoord c{0, 0, 0};
    c[0] = static_cast<int>(index % extent[0]);
    index /= extent[0];
    c[1] = static_cast<int>(index % extent[1]);
    c[2] = static_cast<int>(index / extent[1]);
    return c;
}

bool GridSpec::in_box(const CellCoord& c) const {
    for (int a = 0; a < 3; ++a)
        if (c[a] < 0 || c[a] >= extent[a]) return false;
    return true;
}

Point GridSpec::center_of(const CellCoord& c) const {
    Point p{0.0, 0.0, 0.0};
    for (int a = 0; a < dim; ++a) p[a] = origin[a] + (c[a] + 0.5) * h;
    return p;
}

double GridSpec::cell_volume() const { return std::pow(h, dim); }

int GridSpec::max_extent() const { return *std::max_element(extent.begin(), extent.begin() + dim); }

// ---------------------------------------------------------------------------

std::size_t CellMask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<std::size_t> CellMask::indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i]) out.push_back(i);
    return out;
}

namespace {

void require_same_size(const CellMask& a, const CellMask& b) {
    if (a.size() != b.size()) throw Error(ErrorCode::SpecMismatch, "cell masks of different sizes");
}

}  // namespace

CellMask CellMask::operator&(const CellMask& other) const {
    require_same_size(*this, other);
    CellMask out(size());
    for (std::size_t i = 0; i < size(); ++i) out.bits_[i] = bits_[i] & other.bits_[i];
    return out;
}

CellMask CellMask::operator|(const CellMask& other) const {
    require_same_size(*this, other);
    CellMask out(size());
    for (std::size_t i = 0; i < size(); ++i) out.bits_[i] = bits_[i] | other.bits_[i];
    return out;
}

CellMask CellMask::operator^(const CellMask& other) const {
    require_same_size(*this, other);
    CellMask out(size());
    for (std::size_t i = 0; i < size(); ++i) out.bits_[i] = bits_[i] ^ other.bits_[i];
    return out;
}

CellMask CellMask::operator~() const {
    CellMask out(size());
    for (std::size_t i = 0; i < size(); ++i) out.bits_[i] = bits_[i] ? 0 : 1;
    return out;
}

CellMask CellMask::minus(const CellMask& other) const {
    require_same_size(*this, other);
    CellMask out(size());
    for (std::size_t i = 0; i < size(); ++i) out.bits_[i] = bits_[i] & (other.bits_[i] ^ 1);
    return out;
}

bool CellMask::subset_of(const CellMask& other) const {
    require_same_size(*this, other);
    for (std::size_t i = 0; i < size(); ++i)
        if (bits_[i] && !other.bits_[i]) return false;
    return true;
}

bool CellMask::disjoint_from(const CellMask& other) const {
    require_same_size(*this, other);
    for (std::size_t i = 0; i < size(); ++i)
        if (bits_[i] && other.bits_[i]) return false;
    return true;
}

std::strong_ordering CellMask::operator<=>(const CellMask& other) const {
    return std::lexicographical_compare_three_way(bits_.begin(), bits_.end(), other.bits_.begin(),
                                                  other.bits_.end());
}

// ---------------------------------------------------------------------------

double subgraph_height(const SubgraphExterior& model, const Point& p, int dim) {
    const GridSpec& base = model.base;
    if (base.dim != dim - 1 || model.heights.size() != base.cell_count()) return model.farfield;
    CellCoord c{0, 0, 0};
    for (int a = 0; a < base.dim; ++a) c[a] = static_cast<int>(std::floor((p[a] - base.origin[a]) / base.h));
    if (!base.in_box(c)) return model.farfield;
    return model.heights[base.index(c)];
}

bool exterior_contains(const ExteriorModel& model, const Point& p, int dim) {
    return std::visit(
        [&](const auto& m) -> bool {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, EmptyExterior>) {
                return false;
            } else if constexpr (std::is_same_v<T, FullExterior>) {
                return true;
            } else if constexpr (std::is_same_v<T, HalfSpaceExterior>) {
                return m.below ? p[m.axis] < m.level : p[m.axis] > m.level;
            } else {
                const double t = p[dim - 1];
                const double v = subgraph_height(m, p, dim);
                return m.below ? t < v : t > v;
            }
        },
        model);
}

ExteriorModel complement_of(const ExteriorModel& model) {
    return std::visit(
        [](const auto& m) -> ExteriorModel {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, EmptyExterior>) {
                return FullExterior{};
            } else if constexpr (std::is_same_v<T, FullExterior>) {
                return EmptyExterior{};
            } else {
                T flipped = m;
                flipped.below = !m.below;
                return flipped;
            }
        },
        model);
}

int constant_phase(const ExteriorModel& model) {
    if (std::holds_alternative<EmptyExterior>(model)) return 0;
    if (std::holds_alternative<FullExterior>(model)) return 1;
    return -1;
}

CellSet CellSet::from_model(const GridSpec& spec, const ExteriorModel& model) {
    CellSet set{spec, CellMask(spec.cell_count()), model};
    for (std::size_t i = 0; i < spec.cell_count(); ++i)
        set.inside.set(i, exterior_contains(model, spec.center(i), spec.dim));
    return set;
}

ScalarField ScalarField::constant(const GridSpec& spec, double value) {
    return ScalarField{spec, std::vector<double>(spec.cell_count(), value), EmptyExterior{}, value};
}

ScalarField ScalarField::indicator(const CellSet& set) {
    ScalarField f{set.spec, std::vector<double>(set.spec.cell_count(), 0.0), set.exterior, std::nullopt};
    for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = set.inside.test(i) ? 1.0 : 0.0;
    return f;
}

// ---------------------------------------------------------------------------

namespace {

struct Face {
    Point lo;
    Point hi;
};

std::vector<Face> boundary_faces(const GridSpec& spec, const CellMask& omega) {
    std::vector<Face> faces;
    for (std::size_t i = 0; i < spec.cell_count(); ++i) {
        if (!omega.test(i)) continue;
        const CellCoord c = spec.coords(i);
        for (int a = 0; a < spec.dim; ++a) {
            for (int dir : {-1, 1}) {
                CellCoord nb = c;
                nb[a] += dir;
                if (spec.in_box(nb) && omega.test(spec.index(nb))) continue;
                Face f;
                for (int b = 0; b < 3; ++b) {
                    f.lo[b] = b < spec.dim ? spec.origin[b] + c[b] * spec.h : 0.0;
                    f.hi[b] = b < spec.dim ? f.lo[b] + spec.h : 0.0;
                }
                const double plane = spec.origin[a] + (c[a] + (dir > 0 ? 1 : 0)) * spec.h;
                f.lo[a] = plane;
                f.hi[a] = plane;
                faces.push_back(f);
            }
        }
    }
    return faces;
}

double squared_distance_to_face(const Point& p, const Face& f, int dim) {
    double d2 = 0.0;
    for (int a = 0; a < dim; ++a) {
        const double d = p[a] < f.lo[a] ? f.lo[a] - p[a] : (p[a] > f.hi[a] ? p[a] - f.hi[a] : 0.0);
        d2 += d * d;
    }
    return d2;
}

}  // namespace

ScalarField signed_distance(const DomainWindow& window) {
    const GridSpec& spec = window.spec;
    const std::size_t n = spec.cell_count();
    if (window.omega.size() != n) throw Error(ErrorCode::SpecMismatch, "window mask does not match grid");
    if (window.omega.none()) throw Error(ErrorCode::DegenerateDomain, "signed distance of an empty domain");

    const std::vector<Face> faces = boundary_faces(spec, window.omega);
    ScalarField out{spec, std::vector<double>(n, 0.0), EmptyExterior{}, std::nullopt};
    parallel_for(n, [&](std::size_t i) {
        const Point p = spec.center(i);
        double best = std::numeric_limits<double>::infinity();
        for (const Face& f : faces) best = std::min(best, squared_distance_to_face(p, f, spec.dim));
        const double d = std::sqrt(best);
        out.values[i] = window.omega.test(i) ? -d : d;
    });
    return out;
}

double PaddedDistance::at(const CellCoord& c) const {
    CellCoord e = c;
    for (int a = 0; a < spec.dim; ++a) e[a] += pad;
    return values[spec.index(e)];
}

PaddedDistance padded_signed_distance(const GridSpec& spec, const std::function<bool(const CellCoord&)>& phase,
                                      int pad) {
    if (pad < 0) throw Error(ErrorCode::InvalidArgument, "padding must be non-negative");
    PaddedDistance out;
    out.pad = pad;
    out.spec = spec;
    for (int a = 0; a < spec.dim; ++a) {
        out.spec.origin[a] -= pad * spec.h;
        out.spec.extent[a] += 2 * pad;
    }
    const std::size_t n = out.spec.cell_count();
    auto original = [&](std::size_t i) {
        CellCoord c = out.spec.coords(i);
        for (int a = 0; a < spec.dim; ++a) c[a] -= pad;
        return c;
    };
    std::vector<std::uint8_t> inside(n);
    for (std::size_t i = 0; i < n; ++i) inside[i] = phase(original(i)) ? 1 : 0;

    std::vector<Face> faces;
    for (std::size_t i = 0; i < n; ++i) {
        const CellCoord c = original(i);
        const CellCoord e = out.spec.coords(i);
        for (int a = 0; a < spec.dim; ++a) {
            for (int dir : {-1, 1}) {
                CellCoord ne = e;
                ne[a] += dir;
                CellCoord nc = c;
                nc[a] += dir;
                const bool other = out.spec.in_box(ne) ? inside[out.spec.index(ne)] != 0 : phase(nc);
                if (other == (inside[i] != 0)) continue;
                // each interior face once; faces on the enlarged box edge from the inner side
                if (out.spec.in_box(ne) && dir < 0) continue;
                Face f;
                for (int b = 0; b < 3; ++b) {
                    f.lo[b] = b < spec.dim ? spec.origin[b] + c[b] * spec.h : 0.0;
                    f.hi[b] = b < spec.dim ? f.lo[b] + spec.h : 0.0;
                }
                const double plane = spec.origin[a] + (c[a] + (dir > 0 ? 1 : 0)) * spec.h;
                f.lo[a] = plane;
                f.hi[a] = plane;
                faces.push_back(f);
            }
        }
    }
    out.values.assign(n, std::numeric_limits<double>::infinity());
    parallel_for(n, [&](std::size_t i) {
        const Point p = out.spec.center(i);
        double best = std::numeric_limits<double>::infinity();
        for (const Face& f : faces) best = std::min(best, squared_distance_to_face(p, f, spec.dim));
        const double d = std::sqrt(best);
        out.values[i] = inside[i] ? -d : d;
    });
    return out;
}

ScalarField signed_distance(const CellSet& set, int pad) {
    const GridSpec& spec = set.spec;
    auto phase = [&](const CellCoord& c) {
        return spec.in_box(c) ? set.inside.test(spec.index(c)) : exterior_contains(set.exterior, spec.center_of(c), spec.dim);
    };
    const PaddedDistance d = padded_signed_distance(spec, phase, pad);
    ScalarField out{spec, std::vector<double>(spec.cell_count()), EmptyExterior{}, std::nullopt};
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = d.at(spec.coords(i));
    return out;
}

DomainWindow sublevel_window(const DomainWindow& window, const ScalarField& distance, double r) {
    DomainWindow out{window.spec, CellMask(window.spec.cell_count()), window.policy};
    for (std::size_t i = 0; i < distance.values.size(); ++i) out.omega.set(i, distance.values[i] < r);
    return out;
}

DomainWindow sublevel_window(const DomainWindow& window, double r) {
    return sublevel_window(window, signed_distance(window), r);
}

CellMask tubular_neighborhood(const ScalarField& distance, double rho) {
    if (!(rho > 0.0)) throw Error(ErrorCode::InvalidArgument, "tube radius must be positive");
    CellMask out(distance.values.size());
    for (std::size_t i = 0; i < distance.values.size(); ++i) out.set(i, std::abs(distance.values[i]) < rho);
    return out;
}

CellMask tubular_neighborhood(const DomainWindow& window, double rho) {
    if (!(rho > 0.0)) throw Error(ErrorCode::InvalidArgument, "tube radius must be positive");
    return tubular_neighborhood(signed_distance(window), rho);
}

CellMask boundary_cells(const GridSpec& spec, const CellMask& mask) {
    CellMask out(spec.cell_count());
    for (std::size_t i = 0; i < spec.cell_count(); ++i) {
        const CellCoord c = spec.coords(i);
        for (int a = 0; a < spec.dim && !out.test(i); ++a) {
            for (int dir : {-1, 1}) {
                CellCoord nb = c;
                nb[a] += dir;
                if (spec.in_box(nb) && mask.test(spec.index(nb)) != mask.test(i)) {
                    out.set(i);
                    break;
                }
            }
        }
    }
    return out;
}

bool is_grid_smooth(const GridSpec& spec, const CellMask& mask) {
    // checkerboard 2x2 blocks in every coordinate plane
    for (int a = 0; a < spec.dim; ++a) {
        for (int b = a + 1; b < spec.dim; ++b) {
            for (std::size_t i = 0; i < spec.cell_count(); ++i) {
                CellCoord c = spec.coords(i);
                CellCoord ca = c, cb = c, cab = c;
                ca[a] += 1;
                cb[b] += 1;
                cab[a] += 1;
                cab[b] += 1;
                if (!spec.in_box(cab)) continue;
                const bool p00 = mask.test(i), p10 = mask.test(spec.index(ca));
                const bool p01 = mask.test(spec.index(cb)), p11 = mask.test(spec.index(cab));
                if (p00 == p11 && p10 == p01 && p00 != p10) return false;
            }
        }
    }
    const CellMask boundary = boundary_cells(spec, mask);
    const std::vector<std::size_t> cells = boundary.indices();
    if (cells.empty()) return true;
    // In 1D each interface is its own component; only check connectivity for dim >= 2.
    if (spec.dim == 1) return true;
    CellMask seen(spec.cell_count());
    std::queue<std::size_t> todo;
    todo.push(cells.front());
    seen.set(cells.front());
    std::size_t reached = 0;
    while (!todo.empty()) {
        const std::size_t i = todo.front();
        todo.pop();
        ++reached;
        const CellCoord c = spec.coords(i);
        for (int a = 0; a < spec.dim; ++a) {
            for (int dir : {-1, 1}) {
                CellCoord nb = c;
                nb[a] += dir;
                if (!spec.in_box(nb)) continue;
                const std::size_t j = spec.index(nb);
                if (boundary.test(j) && !seen.test(j)) {
                    seen.set(j);
                    todo.push(j);
                }
            }
        }
    }
    return reached == cells.size();
}

// ---------------------------------------------------------------------------

namespace {

std::string header_line(const char* tag, const GridSpec& spec) {
    std::ostringstream os;
    os.precision(17);
    os << tag << ' ' << spec.dim;
    for (int a = 0; a < spec.dim; ++a) os << ' ' << spec.extent[a];
    os << ' ' << spec.h;
    for (int a = 0; a < spec.dim; ++a) os << ' ' << spec.origin[a];
    os << '\n';
    return os.str();
}

GridSpec parse_header(std::istream& in, const std::string& expected_tag) {
    std::string tag;
    if (!(in >> tag) || tag != expected_tag)
        throw Error(ErrorCode::ParseError, "expected header tag '" + expected_tag + "'");
    int dim = 0;
    if (!(in >> dim) || dim < 1 || dim > 3) throw Error(ErrorCode::ParseError, "bad dimension in header");
    CellCoord extent{1, 1, 1};
    for (int a = 0; a < dim; ++a)
        if (!(in >> extent[a]) || extent[a] < 1) throw Error(ErrorCode::ParseError, "bad extent in header");
    double h = 0.0;
    if (!(in >> h) || !(h > 0.0)) throw Error(ErrorCode::ParseError, "bad cell size in header");
    Point origin{0.0, 0.0, 0.0};
    for (int a = 0; a < dim; ++a)
        if (!(in >> origin[a])) throw Error(ErrorCode::ParseError, "bad origin in header");
    return GridSpec::make(dim, extent, h, origin);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

std::string write_grid_file(const GridSpec& spec, const CellMask& mask) {
    std::string out = header_line("fracgrid", spec);
    const std::size_t row = static_cast<std::size_t>(spec.extent[0]);
    for (std::size_t i = 0; i < spec.cell_count(); ++i) {
        out.push_back(mask.test(i) ? '1' : '0');
        if ((i + 1) % row == 0) out.push_back('\n');
    }
    return out;
}

GridFile parse_grid_file(const std::string& text) {
    std::istringstream in(text);
    GridFile out;
    out.spec = parse_header(in, "fracgrid");
    out.mask = CellMask(out.spec.cell_count());
    std::size_t next = 0;
    char ch = 0;
    while (in.get(ch)) {
        if (std::isspace(static_cast<unsigned char>(ch))) continue;
        if (ch != '0' && ch != '1') throw Error(ErrorCode::ParseError, std::string("unexpected character '") + ch + "'");
        if (next >= out.mask.size()) throw Error(ErrorCode::ParseError, "too many cells in grid file");
        out.mask.set(next++, ch == '1');
    }
    if (next != out.mask.size()) throw Error(ErrorCode::ParseError, "too few cells in grid file");
    return out;
}

GridFile read_grid_file(const std::string& path) { return parse_grid_file(slurp(path)); }

std::string write_field_file(const GridSpec& spec, const std::vector<double>& values) {
    std::ostringstream os;
    os.precision(17);
    os << header_line("fracfield", spec);
    const std::size_t row = static_cast<std::size_t>(spec.extent[0]);
    for (std::size_t i = 0; i < values.size(); ++i) os << values[i] << ((i + 1) % row == 0 ? '\n' : ' ');
    return os.str();
}

FieldFile parse_field_file(const std::string& text) {
    std::istringstream in(text);
    FieldFile out;
    out.spec = parse_header(in, "fracfield");
    out.values.resize(out.spec.cell_count());
    for (double& v : out.values)
        if (!(in >> v)) throw Error(ErrorCode::ParseError, "too few values in field file");
    std::string extra;
    if (in >> extra) throw Error(ErrorCode::ParseError, "trailing data in field file");
    return out;
}

FieldFile read_field_file(const std::string& path) { return parse_field_file(slurp(path)); }

}  // namespace fracperim
