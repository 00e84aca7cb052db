#include "app.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "fracperim/approx.hpp"
#include "fracperim/cylinder.hpp"
#include "fracperim/error.hpp"
#include "fracperim/functional.hpp"
#include "fracperim/grid.hpp"
#include "fracperim/kernel.hpp"
#include "fracperim/minimize.hpp"
#include "fracperim/parallel.hpp"
#include "shape.hpp"

namespace fracperim::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kCommands = {
    "compute",      "approx",        "minimize",    "coarea-check", "decomposition-check", "strip-scan",
    "cylinder-scan", "sector-scan",  "confinement", "davila-scan",  "diverge-1d"};

const std::vector<std::string> kKeys = {
    "command", "s",      "grid",   "set",         "exterior",   "omega",          "inner",   "outer",
    "field",   "mollify_eps", "eps", "lipschitz", "deltas",     "r0",             "tol",     "gap_tol",
    "max_iter", "method", "oracle", "height",     "k",          "T",              "sigma",   "M",
    "v",       "k0",     "extra",  "slope_tol",   "exponent_tol", "u",            "lo",      "hi",
    "s_list",  "cells_per_unit", "near_field_order", "m", "windows", "pad",         "output",  "minimizer_out",
    "seed",    "threads"};

std::string num(double x) { return fmt::format("{:.17g}", x); }

// Typed access to the merged config, with the key named on failure.
class Config {
public:
    Config(json j, fs::path dir) : j_(std::move(j)), dir_(std::move(dir)) {}

    const json& raw() const { return j_; }
    const fs::path& dir() const { return dir_; }
    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    template <class T>
    T get(const std::string& key) const {
        if (!has(key)) throw ConfigError(key, "missing key");
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(key, e.what());
        }
    }
    template <class T>
    T get_or(const std::string& key, T fallback) const {
        return has(key) ? get<T>(key) : fallback;
    }

    double s() const {
        const double s = get<double>("s");
        if (!(s > 0.0 && s < 1.0)) throw ConfigError("s", "s must lie in (0, 1)");
        return s;
    }

    double positive(const std::string& key, std::optional<double> fallback = std::nullopt) const {
        const double v = fallback && !has(key) ? *fallback : get<double>(key);
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(key, "must be positive");
        return v;
    }

    int count(const std::string& key, int fallback, int minimum) const {
        const int v = get_or<int>(key, fallback);
        if (v < minimum) throw ConfigError(key, fmt::format("must be at least {}", minimum));
        return v;
    }

    std::vector<double> schedule(const std::string& key, bool increasing, std::optional<std::vector<double>> fallback =
                                                                              std::nullopt) const {
        std::vector<double> v = fallback && !has(key) ? *fallback : get<std::vector<double>>(key);
        if (v.empty()) throw ConfigError(key, "schedule is empty");
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!std::isfinite(v[i])) throw ConfigError(key, "schedule entries must be finite");
            if (i > 0 && (increasing ? !(v[i] > v[i - 1]) : !(v[i] < v[i - 1])))
                throw ConfigError(key, increasing ? "schedule must increase" : "schedule must decrease");
        }
        return v;
    }

    Shape shape(const std::string& key) const { return parse_shape(j_.at(key), key, dir_); }

private:
    json j_;
    fs::path dir_;
};

struct Grid {
    GridSpec spec;
    std::optional<CellMask> mask;  // present when read from a grid file
};

Grid load_grid(const Config& c) {
    if (!c.has("grid")) throw ConfigError("grid", "missing key");
    const json& g = c.raw().at("grid");
    if (g.is_string()) {
        try {
            GridFile f = read_grid_file((c.dir() / g.get<std::string>()).string());
            return {f.spec, std::move(f.mask)};
        } catch (const Error& e) {
            throw ConfigError("grid", e.what());
        }
    }
    if (!g.is_object()) throw ConfigError("grid", "expected a grid file path or an object");
    try {
        const int dim = g.at("dim").get<int>();
        const auto extent = g.at("extent").get<std::vector<int>>();
        const double h = g.at("h").get<double>();
        const auto origin = g.value("origin", std::vector<double>{});
        if (dim < 1 || dim > 3 || static_cast<int>(extent.size()) != dim)
            throw ConfigError("grid.extent", "need one extent per dimension (1 to 3)");
        CellCoord e{1, 1, 1};
        Point o{0.0, 0.0, 0.0};
        for (int a = 0; a < dim; ++a) e[a] = extent[a];
        for (std::size_t a = 0; a < origin.size() && a < 3; ++a) o[a] = origin[a];
        return {GridSpec::make(dim, e, h, o), std::nullopt};
    } catch (const json::exception& e) {
        throw ConfigError("grid", e.what());
    } catch (const Error& e) {
        throw ConfigError("grid", e.what());
    }
}

// The set E: a "set" shape, else the grid file's cells with the "exterior"
// model beyond the box, else the "exterior" shape itself.
CellSet load_set(const Config& c, const Grid& grid) {
    if (c.has("set")) return rasterize(c.shape("set"), grid.spec, "set");
    if (grid.mask) {
        ExteriorModel model = EmptyExterior{};
        if (c.has("exterior")) {
            auto m = c.shape("exterior").exterior(grid.spec);
            if (!m) throw ConfigError("exterior", "shape has no exterior model beyond the grid box");
            model = *m;
        }
        return {grid.spec, *grid.mask, model};
    }
    if (c.has("exterior")) return rasterize(c.shape("exterior"), grid.spec, "exterior");
    throw ConfigError("set", "missing key");
}

DomainWindow load_window(const Config& c, const GridSpec& spec, const std::string& key = "omega") {
    if (!c.has(key)) return DomainWindow::whole(spec);
    DomainWindow w{spec, rasterize_mask(c.shape(key), spec)};
    if (w.omega.none()) throw ConfigError(key, "window has no cells on the grid");
    return w;
}

InteractionTable load_table(const Config& c, const GridSpec& spec, double s) {
    const int pad = c.count("pad", spec.dim == 1 ? 0 : 8, 0);
    const int order = c.count("near_field_order", 8, 1);
    return build_table(spec, {s, spec.dim, order}, spec.max_extent() - 1 + pad);
}

SolverOptions load_solver(const Config& c) {
    SolverOptions o;
    o.tol = c.get_or<double>("tol", o.tol);
    o.gap_tol = c.get_or<double>("gap_tol", o.gap_tol);
    o.max_iter = c.count("max_iter", o.max_iter, 1);
    const std::string method = c.get_or<std::string>("method", "primal-dual");
    if (method == "primal-dual")
        o.method = RelaxedMethod::PrimalDual;
    else if (method == "subgradient")
        o.method = RelaxedMethod::Subgradient;
    else
        throw ConfigError("method", "expected 'primal-dual' or 'subgradient'");
    return o;
}

json breakdown_json(const PerimeterBreakdown& p) {
    return {{"local", p.local},
            {"nonlocal", p.nonlocal},
            {"total", p.total},
            {"truncation_error_bound", p.truncation_error_bound},
            {"degenerate", p.degenerate}};
}

// Command output: a JSON document or a CSV table, plus the verdict of any
// property checks.
struct Result {
    std::optional<json> document;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    json summary = json::object();
    bool properties_hold = true;

    void check(const std::string& name, bool ok) {
        summary["checks"][name] = ok;
        properties_hold = properties_hold && ok;
    }
};

Result document(json j) {
    Result r;
    r.document = std::move(j);
    return r;
}

std::string render(const Result& r, const json& echoed) {
    std::ostringstream os;
    if (r.document) {
        json doc = {{"config", echoed}, {"result", *r.document}};
        if (!r.summary.empty()) doc["summary"] = r.summary;
        os << doc.dump(2) << '\n';
        return os.str();
    }
    os << "# config: " << echoed.dump() << '\n';
    for (std::size_t k = 0; k < r.columns.size(); ++k) os << (k ? "," : "") << r.columns[k];
    os << '\n';
    for (const auto& row : r.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << row[k];
        os << '\n';
    }
    if (!r.summary.empty()) os << "# summary: " << r.summary.dump() << '\n';
    return os.str();
}

// ---- commands ---------------------------------------------------------------

Result cmd_compute(const Config& c) {
    const double s = c.s();
    const Grid grid = load_grid(c);
    const CellSet set = load_set(c, grid);
    const DomainWindow window = load_window(c, grid.spec);
    const InteractionTable table = load_table(c, grid.spec, s);
    return document(breakdown_json(perimeter(set, window, table)));
}

Result cmd_approx(const Config& c) {
    const double s = c.s();
    const Grid grid = load_grid(c);
    const double h = grid.spec.h;
    const CellSet set = load_set(c, grid);
    const DomainWindow window = load_window(c, grid.spec);
    const InteractionTable table = load_table(c, grid.spec, s);
    const auto eps = c.schedule("eps", false, std::vector<double>{8 * h, 4 * h, 2 * h, h});
    const bool lipschitz = c.get_or<bool>("lipschitz", false);
    const auto steps = lipschitz ? approximate_set_lipschitz(set, window, eps, table)
                                 : approximate_set(set, window, eps, table);
    Result r;
    r.columns = {"eps", "threshold", "local", "nonlocal", "total", "boundary_in_neighborhood"};
    bool contained = true;
    for (const ApproxStep& st : steps) {
        r.rows.push_back({num(st.eps), num(st.threshold), num(st.perimeter.local), num(st.perimeter.nonlocal),
                          num(st.perimeter.total), st.boundary_in_neighborhood ? "1" : "0"});
        contained = contained && st.boundary_in_neighborhood;
    }
    r.summary["reference"] = perimeter(set, window, table).total;
    r.check("boundary_containment", contained);
    return r;
}

Result cmd_minimize(const Config& c) {
    const double s = c.s();
    const Grid grid = load_grid(c);
    const CellSet data = load_set(c, grid);
    const DomainWindow window = load_window(c, grid.spec);
    const InteractionTable table = load_table(c, grid.spec, s);
    const MinimizationProblem problem = MinimizationProblem::on_window(window, data, table);
    const SolverReport rep = minimize(problem, load_solver(c));

    const std::string grid_text = write_grid_file(grid.spec, rep.minimizer.inside);
    json doc = {{"relaxed_energy", rep.relaxed_energy},
                {"threshold", rep.threshold},
                {"energy", rep.energy},
                {"iterations", rep.iterations},
                {"kkt_residual", rep.kkt_residual},
                {"free_cells", problem.free_cells.count()},
                {"minimizer", grid_text}};
    Result r = document(doc);
    r.check("thresholded_below_relaxed", rep.energy <= rep.relaxed_energy + 1e-9 * (1.0 + std::abs(rep.energy)));
    if (c.get_or<bool>("oracle", false)) {
        const BruteForceResult oracle = brute_force_minimum(problem);
        (*r.document)["oracle_energy"] = oracle.energy;
        r.check("matches_oracle", rep.energy <= oracle.energy + 1e-9 * (1.0 + std::abs(oracle.energy)));
    }
    if (c.has("minimizer_out")) {
        std::ofstream f(c.dir() / c.get<std::string>("minimizer_out"));
        if (!f) throw ConfigError("minimizer_out", "cannot open for writing");
        f << grid_text;
    }
    return r;
}

Result cmd_coarea(const Config& c) {
    const double s = c.s();
    const Grid grid = load_grid(c);
    const DomainWindow window = load_window(c, grid.spec);
    const InteractionTable table = load_table(c, grid.spec, s);
    ScalarField u;
    if (c.has("field")) {
        FieldFile f;
        try {
            f = read_field_file((c.dir() / c.get<std::string>("field")).string());
        } catch (const Error& e) {
            throw ConfigError("field", e.what());
        }
        if (!(f.spec == grid.spec)) throw ConfigError("field", "field grid differs from the configured grid");
        u = {f.spec, std::move(f.values), EmptyExterior{}, std::nullopt};
        if (c.has("exterior")) {
            auto m = c.shape("exterior").exterior(grid.spec);
            if (!m) throw ConfigError("exterior", "shape has no exterior model beyond the grid box");
            u.exterior = *m;
        }
    } else {
        const double eps = c.positive("mollify_eps", 2.0 * grid.spec.h);
        u = mollify(load_set(c, grid), MollifierSpec{eps});
    }
    const CoareaResult res = coarea_check(u, window, table);
    const double residual = std::abs(res.lhs - res.rhs) / std::max(1.0, std::abs(res.lhs));
    Result r = document({{"lhs", res.lhs},
                         {"rhs", res.rhs},
                         {"relative_residual", residual},
                         {"levels", res.levels.size()}});
    r.check("coarea_identity", residual <= 1e-10);
    return r;
}

Result cmd_decomposition(const Config& c) {
    const double s = c.s();
    const Grid grid = load_grid(c);
    const CellSet set = load_set(c, grid);
    if (!c.has("inner")) throw ConfigError("inner", "missing key");
    const DomainWindow inner = load_window(c, grid.spec, "inner");
    const DomainWindow outer = load_window(c, grid.spec, "outer");
    if (!inner.omega.subset_of(outer.omega)) throw ConfigError("inner", "inner window must lie inside outer");
    const InteractionTable table = load_table(c, grid.spec, s);
    const double residual = decomposition_check(set, inner, outer, table);
    const double scale = perimeter(set, outer, table).total;
    const double relative = residual / std::max(1.0, scale);
    Result r = document({{"residual", residual}, {"outer_perimeter", scale}, {"relative_residual", relative}});
    r.check("decomposition_identity", relative <= 1e-10);
    return r;
}

Result cmd_strip(const Config& c) {
    const double s = c.s();
    const Grid grid = load_grid(c);
    const DomainWindow window = load_window(c, grid.spec);
    const auto deltas = c.schedule("deltas", false, std::vector<double>{0.25, 0.125, 0.0625, 0.03125, 0.015625});
    const double r0 = c.positive("r0", 1.2 * deltas.front());
    const double tol = c.positive("exponent_tol", 0.1);
    const InteractionTable table = load_table(c, grid.spec, s);
    const StripScan scan = strip_scan(window, deltas, table, r0);
    Result r;
    r.columns = {"delta", "value", "bound", "exponent", "constant"};
    bool below = true;
    for (const StripRow& row : scan.rows) {
        r.rows.push_back({num(row.delta), num(row.value), num(row.bound), num(scan.exponent), num(scan.constant)});
        below = below && row.value <= row.bound;
    }
    r.summary["exponent"] = scan.exponent;
    r.summary["target_exponent"] = 1.0 - s;
    r.summary["level_set_measure"] = scan.level_set_measure;
    r.check("below_bound_line", below);
    r.check("exponent", std::abs(scan.exponent - (1.0 - s)) <= tol);
    return r;
}

struct Cylinder {
    CylinderGeometry geometry;
    SubgraphExterior v;
};

Cylinder load_cylinder(const Config& c, double height) {
    const Grid grid = load_grid(c);
    if (grid.spec.dim != 1) throw ConfigError("grid", "the cylinder commands take a one-dimensional base grid");
    if (!c.has("omega")) throw ConfigError("omega", "missing key");
    const DomainWindow omega = load_window(c, grid.spec);
    if (!c.has("v")) throw ConfigError("v", "missing key");
    json vj = c.raw().at("v");
    if (vj.contains("graph")) vj = vj.at("graph");
    SubgraphExterior v = parse_graph(vj, "v", c.dir(), grid.spec);
    if (!(v.base == grid.spec)) throw ConfigError("v.heights", "heights must live on the base grid");
    return {CylinderGeometry::make(omega, height), std::move(v)};
}

void divergence_rows(Result& r, const DivergenceScan& scan, double s, double tol) {
    r.columns = {"T", "lower_bound", "computed", "tail_slope", "T0"};
    bool increasing = true, above = true;
    for (std::size_t i = 0; i < scan.rows.size(); ++i) {
        const DivergenceRow& row = scan.rows[i];
        r.rows.push_back({num(row.T), num(row.lower_bound), num(row.computed), num(scan.tail_slope), num(scan.T0)});
        if (i > 0) increasing = increasing && row.computed > scan.rows[i - 1].computed;
        above = above && row.lower_bound <= row.computed;
    }
    r.summary["tail_slope"] = scan.tail_slope;
    r.summary["target_slope"] = 1.0 - s;
    r.check("strictly_increasing", increasing);
    r.check("above_lower_bound", above);
    r.check("tail_slope", std::abs(scan.tail_slope - (1.0 - s)) <= tol);
}

Result cmd_cylinder_scan(const Config& c) {
    const double s = c.s();
    const double k = c.positive("k");
    const Cylinder cyl = load_cylinder(c, c.positive("height", k + 2.0));
    const auto Ts = c.schedule("T", true);
    Result r;
    divergence_rows(r, nonlocal_divergence_scan(cyl.geometry, cyl.v, k, Ts, s), s, c.positive("slope_tol", 0.1));
    // P^L of Sg(v) against its explicit finite bound
    const GridSpec& g = cyl.geometry.grid;
    const InteractionTable table = build_table(g, {s, 2, c.count("near_field_order", 8, 1)}, g.max_extent() + 4);
    const LocalPartReport local = local_part_bound(cyl.geometry, cyl.geometry.subgraph(cyl.v), k, table);
    r.summary["local_part"] = {{"window_part", local.window_part}, {"lower_tail", local.lower_tail},
                               {"upper_tail", local.upper_tail},   {"far_tail", local.far_tail},
                               {"total", local.total},             {"bound", local.bound}};
    r.check("local_part_within_bound", local.within_bound);
    return r;
}

Result cmd_sector_scan(const Config& c) {
    const double s = c.s();
    const double M = c.positive("M");
    const Cylinder cyl = load_cylinder(c, c.positive("height", M + 2.0));
    const double sigma = c.get_or<double>("sigma", 0.5);
    const double r0 = c.get_or<double>("r0", 0.0);
    if (r0 < 0.0) throw ConfigError("r0", "must be non-negative");
    Result r;
    divergence_rows(r, sector_divergence_scan(cyl.geometry, cyl.v, sigma, M, r0, c.schedule("T", true), s), s,
                    c.positive("slope_tol", 0.1));
    r.summary["sigma"] = sigma;
    return r;
}

Result cmd_confinement(const Config& c) {
    const double s = c.s();
    const double k0 = c.positive("k0");
    const int extra = c.count("extra", 2, 0);
    const Cylinder cyl = load_cylinder(c, c.positive("height", k0 + extra + 2.0));
    const GridSpec& g = cyl.geometry.grid;
    const InteractionTable table = build_table(g, {s, 2, c.count("near_field_order", 8, 1)}, g.max_extent() + 4);
    const StabilityRun run = tall_cylinder_stability(cyl.geometry, cyl.v, k0, extra, table, load_solver(c));
    Result r;
    r.columns = {"k", "energy", "relaxed_energy", "iterations", "measured_M"};
    for (std::size_t i = 0; i < run.ks.size(); ++i)
        r.rows.push_back({num(run.ks[i]), num(run.reports[i].energy), num(run.reports[i].relaxed_energy),
                          std::to_string(run.reports[i].iterations), num(run.measured_M[i])});
    r.check("identical_inside", run.identical_inside);
    return r;
}

Result cmd_davila(const Config& c) {
    const auto coeffs = c.get_or<std::vector<double>>("u", {0.0});
    const double lo = c.get_or<double>("lo", 0.0);
    const double hi = c.get_or<double>("hi", 1.0);
    if (!(hi > lo)) throw ConfigError("hi", "need lo < hi");
    const auto s_list = c.schedule("s_list", true, std::vector<double>{0.6, 0.7, 0.8, 0.9});
    for (double s : s_list)
        if (!(s > 0.0 && s < 1.0)) throw ConfigError("s_list", "every s must lie in (0, 1)");
    const auto cells = c.get_or<std::vector<int>>("cells_per_unit", {8, 16});
    for (std::size_t i = 0; i < cells.size(); ++i)
        if (cells[i] < 1 || (i > 0 && cells[i] <= cells[i - 1]))
            throw ConfigError("cells_per_unit", "resolutions must be positive and increasing");
    const auto u = [coeffs](double x) {
        double y = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) y = y * x + *it;
        return y;
    };
    const auto rows = graph_area_asymptotics(u, lo, hi, s_list, cells, c.count("near_field_order", 8, 1));
    Result r;
    r.columns = {"s", "h", "scaled_local", "scaled_area", "ratio", "toward_one"};
    bool trend = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const AreaRow& a = rows[i];
        bool toward = true;
        if (i > 0 && rows[i - 1].s == a.s) toward = std::abs(a.ratio - 1.0) <= std::abs(rows[i - 1].ratio - 1.0);
        trend = trend && toward;
        r.rows.push_back(
            {num(a.s), num(a.h), num(a.scaled_local), num(a.scaled_area), num(a.ratio), toward ? "1" : "0"});
    }
    // flagged in the output only: coarse grids may break the trend
    r.summary["trend_toward_one"] = trend;
    return r;
}

Result cmd_diverge(const Config& c) {
    const double s = c.s();
    const auto ms = c.get_or<std::vector<int>>("m", {1, 2, 4, 8, 16, 32, 64});
    for (std::size_t i = 0; i < ms.size(); ++i)
        if (ms[i] < 1 || (i > 0 && ms[i] <= ms[i - 1])) throw ConfigError("m", "counts must be positive and increasing");
    std::vector<std::pair<double, double>> windows;
    if (c.has("windows")) {
        for (const auto& w : c.get<std::vector<std::vector<double>>>("windows")) {
            if (w.size() != 2 || !(w[1] > w[0])) throw ConfigError("windows", "each window is [lo, hi] with lo < hi");
            windows.emplace_back(w[0], w[1]);
        }
    }
    const SummableSequence beta = log_squared_sequence();
    Result r;
    r.columns = {"m", "value"};
    for (std::size_t k = 0; k < windows.size(); ++k) r.columns.push_back(fmt::format("window_{}", k));
    for (int m : ms) {
        std::vector<std::string> row{std::to_string(m), num(divergence_probe_1d(beta, m, s))};
        for (const auto& [lo, hi] : windows) row.push_back(num(divergence_probe_1d_window(beta, m, s, lo, hi)));
        r.rows.push_back(std::move(row));
    }
    r.summary["M"] = beta.total;
    return r;
}

using Command = Result (*)(const Config&);

const std::map<std::string, Command>& commands() {
    static const std::map<std::string, Command> table = {
        {"compute", cmd_compute},
        {"approx", cmd_approx},
        {"minimize", cmd_minimize},
        {"coarea-check", cmd_coarea},
        {"decomposition-check", cmd_decomposition},
        {"strip-scan", cmd_strip},
        {"cylinder-scan", cmd_cylinder_scan},
        {"sector-scan", cmd_sector_scan},
        {"confinement", cmd_confinement},
        {"davila-scan", cmd_davila},
        {"diverge-1d", cmd_diverge},
    };
    return table;
}

int is_numerical(ErrorCode code) {
    return code == ErrorCode::ConvergenceFailure || code == ErrorCode::OracleTooLarge ||
           code == ErrorCode::ConfinementUndetermined;
}

void diagnose(std::ostream& err, const std::string& kind, const std::string& field, const std::string& message) {
    json d = {{"error", kind}, {"message", message}};
    if (!field.empty()) d["field"] = field;
    err << d.dump() << '\n';
}

// Shape-valued flags take inline JSON, or @path for a JSON file.
json json_arg(const std::string& text, const std::string& field) {
    std::string body = text;
    if (!body.empty() && body.front() == '@') {
        std::ifstream f(body.substr(1));
        if (!f) throw ConfigError(field, "cannot read " + body.substr(1));
        body.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    }
    try {
        return json::parse(body);
    } catch (const json::exception& e) {
        throw ConfigError(field, e.what());
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fractional perimeters on uniform grids"};
    std::string command, config_path;
    app.add_option("command", command, "one of: " + fmt::format("{}", fmt::join(kCommands, ", ")));
    app.add_option("--config", config_path, "JSON config; flags override its keys");

    // flags map one-to-one onto config keys
    std::map<std::string, double> reals;
    std::map<std::string, int> ints;
    std::map<std::string, std::string> texts, shapes;
    std::map<std::string, std::vector<double>> lists;
    std::map<std::string, std::vector<int>> int_lists;
    std::map<std::string, bool> switches;
    auto real = [&](const std::string& key, const std::string& help) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        app.add_option(flag, reals[key], help)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    };
    auto integer = [&](const std::string& key, const std::string& help) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        app.add_option(flag, ints[key], help)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    };
    auto text = [&](const std::string& key, const std::string& help) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        app.add_option(flag, texts[key], help)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    };
    auto shape = [&](const std::string& key, const std::string& help) {
        app.add_option("--" + key, shapes[key], help)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    };
    auto list = [&](const std::string& key, const std::string& help) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        app.add_option(flag, lists[key], help)->delimiter(',')->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    };
    auto int_list = [&](const std::string& key, const std::string& help) {
        std::string flag = "--" + key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        app.add_option(flag, int_lists[key], help)
            ->delimiter(',')
            ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    };
    auto toggle = [&](const std::string& key, const std::string& help) {
        app.add_flag("--" + key, switches[key], help);
    };

    real("s", "fractional order in (0, 1)");
    shape("grid", "grid file path, or an inline JSON object {dim, extent, h, origin}");
    shape("set", "shape of E (JSON or @file)");
    shape("exterior", "shape whose model fixes E beyond the box (JSON or @file)");
    shape("omega", "shape of the window (JSON or @file); default: the whole box");
    shape("inner", "inner window for decomposition-check");
    shape("outer", "outer window for decomposition-check");
    shape("v", "exterior graph data {heights, farfield} for the cylinder commands");
    shape("windows", "list of [lo, hi] windows for diverge-1d");
    text("field", "fracfield file for coarea-check");
    real("mollify_eps", "mollification radius for coarea-check");
    list("eps", "decreasing mollification radii for approx");
    toggle("lipschitz", "approx: use the cut-off pipeline");
    list("deltas", "decreasing strip widths");
    real("r0", "strip-scan level range, or the sector start radius");
    real("tol", "solver tolerance");
    real("gap_tol", "relative duality-gap tolerance");
    integer("max_iter", "solver iteration cap");
    text("method", "primal-dual or subgradient");
    toggle("oracle", "minimize: compare with exhaustive search");
    real("height", "half height of the cylinder grid");
    real("k", "cylinder window half height");
    list("T", "increasing truncation heights");
    real("sigma", "sector fraction, 0.5 or 1");
    real("M", "sector bound on |v|");
    real("k0", "first window of the stability run");
    integer("extra", "additional windows of the stability run");
    real("slope_tol", "tolerance on the fitted tail slope");
    real("exponent_tol", "tolerance on the fitted strip exponent");
    list("u", "polynomial coefficients of u, constant term first");
    real("lo", "left end of the base interval");
    real("hi", "right end of the base interval");
    list("s_list", "increasing values of s");
    int_list("cells_per_unit", "increasing resolutions");
    integer("near_field_order", "near-field subdivision depth");
    int_list("m", "increasing interval counts");
    integer("pad", "padding ring for the exterior masses");
    text("output", "output file (default: standard output)");
    text("minimizer_out", "minimize: write the minimizer grid file here");
    integer("seed", "seed recorded with the run");
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (overrides FRACPERIM_THREADS)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return Ok;
    } catch (const CLI::ParseError& e) {
        diagnose(err, "config", "arguments", e.what());
        return ConfigFailure;
    }

    json cfg = json::object();
    fs::path dir = fs::current_path();
    try {
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) throw ConfigError("config", "cannot read " + config_path);
            try {
                cfg = json::parse(f);
            } catch (const json::exception& e) {
                throw ConfigError("config", e.what());
            }
            if (!cfg.is_object()) throw ConfigError("config", "expected a JSON object");
            dir = fs::absolute(config_path).parent_path();
        }
        auto given = [&](const std::string& key) {
            std::string flag = "--" + key;
            std::replace(flag.begin(), flag.end(), '_', '-');
            return app.count(flag) > 0;
        };
        for (auto& [k, v] : reals)
            if (given(k)) cfg[k] = v;
        for (auto& [k, v] : ints)
            if (given(k)) cfg[k] = v;
        for (auto& [k, v] : texts)
            if (given(k)) cfg[k] = v;
        for (auto& [k, v] : lists)
            if (given(k)) cfg[k] = v;
        for (auto& [k, v] : int_lists)
            if (given(k)) cfg[k] = v;
        for (auto& [k, v] : switches)
            if (given(k)) cfg[k] = v;
        for (auto& [k, v] : shapes) {
            if (!given(k)) continue;
            // a bare grid argument is a file path
            if (k == "grid" && !v.empty() && v.front() != '{' && v.front() != '@')
                cfg[k] = v;
            else
                cfg[k] = json_arg(v, k);
        }
        if (!command.empty()) cfg["command"] = command;

        for (auto it = cfg.begin(); it != cfg.end(); ++it)
            if (std::find(kKeys.begin(), kKeys.end(), it.key()) == kKeys.end())
                throw ConfigError(it.key(), "unknown key");
        if (!cfg.contains("command") || !cfg["command"].is_string())
            throw ConfigError("command", "missing command");
        const std::string name = cfg["command"].get<std::string>();
        const auto found = commands().find(name);
        if (found == commands().end()) throw ConfigError("command", "unknown command '" + name + "'");

        if (cfg.contains("threads")) {
            if (!cfg["threads"].is_number_integer() || cfg["threads"].get<int>() < 1)
                throw ConfigError("threads", "must be a positive integer");
            set_thread_count(cfg["threads"].get<int>());
        }
        if (threads > 0) set_thread_count(threads);
        if (app.count("--threads") && threads < 1) throw ConfigError("threads", "must be a positive integer");

        json echoed = cfg;
        echoed.erase("threads");
        const Config config(cfg, dir);
        const Result result = found->second(config);
        const std::string text_out = render(result, echoed);
        if (config.has("output")) {
            std::ofstream f(dir / config.get<std::string>("output"));
            if (!f) throw ConfigError("output", "cannot open for writing");
            f << text_out;
        } else {
            out << text_out;
        }
        return result.properties_hold ? Ok : PropertyFailure;
    } catch (const ConfigError& e) {
        diagnose(err, "config", e.field(), e.what());
        return ConfigFailure;
    } catch (const Error& e) {
        if (is_numerical(e.code())) {
            diagnose(err, "numerical", "", e.what());
            return NumericalFailure;
        }
        diagnose(err, std::string(to_string(e.code())), "", e.what());
        return ConfigFailure;
    } catch (const std::exception& e) {
        diagnose(err, "internal", "", e.what());
        return ConfigFailure;
    }
}

}  // namespace fracperim::cli
