#include "shape.hpp"

#include <cmath>
#include <vector>

#include "fracperim/error.hpp"

namespace fracperim::cli {

using nlohmann::json;

namespace {

template <class T>
T get(const json& j, const std::string& key, const std::string& field) {
    if (!j.contains(key)) throw ConfigError(field + "." + key, "missing key");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(field + "." + key, e.what());
    }
}

template <class T>
T get_or(const json& j, const std::string& key, const std::string& field, T fallback) {
    return j.contains(key) ? get<T>(j, key, field) : fallback;
}

Point to_point(const std::vector<double>& v, const std::string& field) {
    if (v.empty() || v.size() > 3) throw ConfigError(field, "need 1 to 3 coordinates");
    Point p{0.0, 0.0, 0.0};
    for (std::size_t a = 0; a < v.size(); ++a) p[a] = v[a];
    return p;
}

// [lo, hi] per axis inside the closed grid box
bool inside_box(const GridSpec& spec, const Point& lo, const Point& hi) {
    for (int a = 0; a < spec.dim; ++a) {
        const double b0 = spec.origin[a];
        const double b1 = spec.origin[a] + spec.extent[a] * spec.h;
        if (lo[a] < b0 || hi[a] > b1) return false;
    }
    return true;
}

Shape bounded(std::function<bool(const Point&)> contains, Point lo, Point hi) {
    return {std::move(contains), [lo, hi](const GridSpec& spec) -> std::optional<ExteriorModel> {
                if (inside_box(spec, lo, hi)) return EmptyExterior{};
                return std::nullopt;
            }};
}

Shape constant_shape(bool full) {
    return {[full](const Point&) { return full; },
            [full](const GridSpec&) -> std::optional<ExteriorModel> {
                if (full) return FullExterior{};
                return EmptyExterior{};
            }};
}

}  // namespace

SubgraphExterior parse_graph(const json& j, const std::string& field, const std::filesystem::path& dir,
                             const std::optional<GridSpec>& base) {
    if (!j.is_object()) throw ConfigError(field, "expected an object");
    SubgraphExterior g;
    g.farfield = get_or<double>(j, "farfield", field, 0.0);
    g.below = get_or<bool>(j, "below", field, true);
    if (!std::isfinite(g.farfield)) throw ConfigError(field + ".farfield", "must be finite");
    if (!j.contains("heights")) {
        if (!base) throw ConfigError(field + ".heights", "missing key");
        g.base = *base;
        g.heights.assign(base->cell_count(), g.farfield);
        return g;
    }
    const json& hj = j.at("heights");
    if (hj.is_string()) {
        try {
            FieldFile f = read_field_file((dir / hj.get<std::string>()).string());
            g.base = f.spec;
            g.heights = std::move(f.values);
        } catch (const Error& e) {
            throw ConfigError(field + ".heights", e.what());
        }
    } else {
        g.heights = get<std::vector<double>>(j, "heights", field);
        if (j.contains("base")) {
            const json& bj = j.at("base");
            const double h = get<double>(bj, "h", field + ".base");
            const Point origin = to_point(get_or<std::vector<double>>(bj, "origin", field + ".base", {0.0}),
                                          field + ".base.origin");
            g.base = GridSpec::make(1, {static_cast<int>(g.heights.size()), 1, 1}, h, origin);
        } else if (base) {
            g.base = *base;
        } else {
            throw ConfigError(field + ".base", "inline heights need a base grid");
        }
        if (g.heights.size() != g.base.cell_count()) throw ConfigError(field + ".heights", "one height per base cell");
    }
    for (double v : g.heights)
        if (!std::isfinite(v)) throw ConfigError(field + ".heights", "heights must be finite");
    return g;
}

Shape parse_shape(const json& j, const std::string& field, const std::filesystem::path& dir) {
    if (!j.is_object()) throw ConfigError(field, "expected a shape object");
    if (j.contains("union")) {
        const json& parts = j.at("union");
        if (!parts.is_array()) throw ConfigError(field + ".union", "expected an array");
        std::vector<Shape> shapes;
        for (std::size_t k = 0; k < parts.size(); ++k)
            shapes.push_back(parse_shape(parts[k], field + ".union[" + std::to_string(k) + "]", dir));
        Shape u;
        u.contains = [shapes](const Point& p) {
            for (const Shape& s : shapes)
                if (s.contains(p)) return true;
            return false;
        };
        u.exterior = [shapes](const GridSpec& spec) -> std::optional<ExteriorModel> {
            std::vector<ExteriorModel> parts;
            for (const Shape& s : shapes) {
                auto m = s.exterior(spec);
                if (!m) return std::nullopt;
                if (std::holds_alternative<FullExterior>(*m)) return FullExterior{};
                if (!std::holds_alternative<EmptyExterior>(*m)) parts.push_back(*m);
            }
            if (parts.empty()) return EmptyExterior{};
            if (parts.size() == 1) return parts.front();
            return std::nullopt;
        };
        return u;
    }
    if (j.contains("complement")) {
        Shape inner = parse_shape(j.at("complement"), field + ".complement", dir);
        return {[inner](const Point& p) { return !inner.contains(p); },
                [inner](const GridSpec& spec) -> std::optional<ExteriorModel> {
                    auto m = inner.exterior(spec);
                    if (!m) return std::nullopt;
                    return complement_of(*m);
                }};
    }
    if (j.contains("graph")) {
        json g = j.at("graph");
        g["shape"] = "subgraph";
        return parse_shape(g, field + ".graph", dir);
    }

    const std::string kind = get<std::string>(j, "shape", field);
    if (kind == "full") return constant_shape(true);
    if (kind == "empty") return constant_shape(false);
    if (kind == "ball") {
        const Point c = to_point(get<std::vector<double>>(j, "center", field), field + ".center");
        const double r = get<double>(j, "radius", field);
        if (!(r > 0.0)) throw ConfigError(field + ".radius", "must be positive");
        Point lo = c, hi = c;
        for (int a = 0; a < 3; ++a) lo[a] -= r, hi[a] += r;
        return bounded(
            [c, r](const Point& p) {
                return std::hypot(p[0] - c[0], p[1] - c[1], p[2] - c[2]) < r;
            },
            lo, hi);
    }
    if (kind == "box") {
        const Point lo = to_point(get<std::vector<double>>(j, "lo", field), field + ".lo");
        const Point hi = to_point(get<std::vector<double>>(j, "hi", field), field + ".hi");
        for (int a = 0; a < 3; ++a)
            if (lo[a] > hi[a]) throw ConfigError(field + ".hi", "need lo <= hi");
        return bounded(
            [lo, hi](const Point& p) {
                for (int a = 0; a < 3; ++a)
                    if (!(p[a] > lo[a] && p[a] < hi[a]) && lo[a] != hi[a]) return false;
                return true;
            },
            lo, hi);
    }
    if (kind == "halfspace") {
        HalfSpaceExterior m;
        m.axis = get<int>(j, "axis", field);
        m.level = get<double>(j, "level", field);
        m.below = get_or<bool>(j, "below", field, true);
        if (m.axis < 0 || m.axis > 2) throw ConfigError(field + ".axis", "axis must be 0, 1 or 2");
        return {[m](const Point& p) { return m.below ? p[m.axis] < m.level : p[m.axis] > m.level; },
                [m](const GridSpec& spec) -> std::optional<ExteriorModel> {
                    if (m.axis >= spec.dim) return std::nullopt;
                    return m;
                }};
    }
    if (kind == "subgraph") {
        const SubgraphExterior g = parse_graph(j, field, dir, std::nullopt);
        const int dim = g.base.dim + 1;
        return {[g, dim](const Point& p) { return exterior_contains(g, p, dim); },
                [g, dim](const GridSpec& spec) -> std::optional<ExteriorModel> {
                    if (spec.dim != dim) return std::nullopt;
                    return g;
                }};
    }
    throw ConfigError(field + ".shape", "unknown shape '" + kind + "'");
}

CellMask rasterize_mask(const Shape& shape, const GridSpec& spec) {
    CellMask m(spec.cell_count());
    for (std::size_t i = 0; i < spec.cell_count(); ++i) m.set(i, shape.contains(spec.center(i)));
    return m;
}

CellSet rasterize(const Shape& shape, const GridSpec& spec, const std::string& field) {
    auto model = shape.exterior(spec);
    if (!model) throw ConfigError(field, "shape has no exterior model beyond the grid box");
    return {spec, rasterize_mask(shape, spec), *model};
}

}  // namespace fracperim::cli
