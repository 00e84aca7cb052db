#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "app.hpp"
#include "fracperim/functional.hpp"
#include "fracperim/parallel.hpp"
#include "shape.hpp"

using namespace fracperim;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

const std::string kLine = R"({"dim":1,"extent":[4],"h":0.25})";
const std::string kMiddle = R"({"shape":"box","lo":[0.25],"hi":[0.75]})";

std::filesystem::path scratch_dir() {
    auto dir = std::filesystem::temp_directory_path() / "fracperim_cli_test";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("compute dispatches to the perimeter") {
    const Run r = run({"compute", "--s", "0.5", "--grid", kLine, "--set", kMiddle});
    REQUIRE(r.code == 0);
    const json doc = json::parse(r.out);

    const GridSpec spec = GridSpec::make(1, {4, 1, 1}, 0.25);
    CellSet set = CellSet::empty(spec);
    set.inside.set(1);
    set.inside.set(2);
    const InteractionTable table = build_table(spec, {0.5, 1, 8}, 3);
    const PerimeterBreakdown p = perimeter(set, DomainWindow::whole(spec), table);
    CHECK(doc["result"]["total"].get<double>() == p.total);
    CHECK(doc["result"]["local"].get<double>() == p.local);
    CHECK(doc["config"]["command"] == "compute");
}

TEST_CASE("config errors name the field") {
    Run r = run({"frobnicate"});
    CHECK(r.code == cli::ConfigFailure);
    CHECK(json::parse(r.err)["field"] == "command");

    r = run({"compute", "--s", "1.2", "--grid", kLine, "--set", kMiddle});
    CHECK(r.code == cli::ConfigFailure);
    CHECK(json::parse(r.err)["field"] == "s");

    r = run({"compute", "--s", "0.5", "--grid", kLine, "--set", R"({"shape":"blob"})"});
    CHECK(r.code == cli::ConfigFailure);
    CHECK(json::parse(r.err)["field"] == "set.shape");

    r = run({"compute", "--s", "0.5", "--grid", kLine});
    CHECK(json::parse(r.err)["field"] == "set");

    r = run({"strip-scan", "--s", "0.5", "--grid", kLine, "--deltas", "0.1,0.2"});
    CHECK(json::parse(r.err)["field"] == "deltas");

    r = run({"compute", "--bogus"});
    CHECK(r.code == cli::ConfigFailure);
}

TEST_CASE("flags override the config file and threads are not echoed") {
    const auto path = scratch_dir() / "compute.json";
    std::ofstream(path) << json{{"command", "compute"}, {"s", 0.3}, {"grid", json::parse(kLine)},
                                {"set", json::parse(kMiddle)}, {"threads", 2}}
                               .dump();
    const Run base = run({"--config", path.string()});
    REQUIRE(base.code == 0);
    const json a = json::parse(base.out);
    CHECK(a["config"]["s"] == 0.3);
    CHECK_FALSE(a["config"].contains("threads"));

    const Run over = run({"--config", path.string(), "--s", "0.4", "--s", "0.6"});
    REQUIRE(over.code == 0);
    CHECK(json::parse(over.out)["config"]["s"] == 0.6);
    set_thread_count(1);
}

TEST_CASE("minimizer grid file round-trips") {
    const auto file = scratch_dir() / "min.fracgrid";
    const Run r = run({"minimize", "--s", "0.5", "--grid", R"({"dim":2,"extent":[6,6],"h":0.25})", "--set",
                       R"({"shape":"halfspace","axis":0,"level":0.75})", "--omega",
                       R"({"shape":"box","lo":[0.5,0.5],"hi":[1.0,1.0]})", "--oracle", "--minimizer-out",
                       file.string()});
    REQUIRE(r.code == 0);
    const json doc = json::parse(r.out);
    CHECK(doc["summary"]["checks"]["matches_oracle"] == true);

    const GridFile written = read_grid_file(file.string());
    const GridFile embedded = parse_grid_file(doc["result"]["minimizer"].get<std::string>());
    CHECK(written.mask == embedded.mask);
    CHECK(written.spec == embedded.spec);
    CHECK(write_grid_file(written.spec, written.mask) == doc["result"]["minimizer"].get<std::string>());

    // the grid file feeds back in as the set, with the exterior from a shape
    const Run again = run({"compute", "--s", "0.5", "--grid", file.string(), "--exterior",
                           R"({"shape":"halfspace","axis":0,"level":0.75})"});
    CHECK(again.code == 0);
}

TEST_CASE("exit codes for property and numerical failures") {
    // 36 free cells is beyond the exhaustive search
    Run r = run({"minimize", "--s", "0.5", "--grid", R"({"dim":2,"extent":[6,6],"h":0.25})", "--set",
                 R"({"shape":"empty"})", "--oracle"});
    CHECK(r.code == cli::NumericalFailure);
    CHECK(json::parse(r.err)["error"] == "numerical");

    // an unreachable exponent tolerance turns the fit into a failed property
    r = run({"strip-scan", "--s", "0.5", "--grid", R"({"dim":1,"extent":[64],"h":0.015625})", "--deltas",
             "0.25,0.125,0.0625", "--exponent-tol", "1e-9"});
    CHECK(r.code == cli::PropertyFailure);
    CHECK(r.out.find("# summary:") != std::string::npos);
}

TEST_CASE("csv output is identical across thread counts") {
    const std::vector<std::string> args{"strip-scan", "--s", "0.5", "--grid",
                                        R"({"dim":2,"extent":[32,32],"h":0.03125})", "--deltas",
                                        "0.25,0.125,0.0625"};
    auto with = [&](const char* n) {
        auto a = args;
        a.insert(a.end(), {"--threads", n});
        return run(a);
    };
    const Run one = with("1");
    const Run eight = with("8");
    CHECK(one.out == eight.out);
    CHECK(one.out.find("--threads") == std::string::npos);
    // 17 significant digits
    CHECK(one.out.find("0.125,") != std::string::npos);
    set_thread_count(1);
}

TEST_CASE("shape language") {
    const GridSpec spec = GridSpec::make(2, {4, 4, 1}, 0.25);
    const std::filesystem::path dir = ".";
    auto model = [&](const std::string& text) { return cli::parse_shape(json::parse(text), "set", dir).exterior(spec); };

    CHECK(std::holds_alternative<EmptyExterior>(*model(R"({"shape":"ball","center":[0.5,0.5],"radius":0.25})")));
    CHECK_FALSE(model(R"({"shape":"ball","center":[0.5,0.5],"radius":2})").has_value());
    CHECK(std::holds_alternative<FullExterior>(
        *model(R"({"complement":{"shape":"ball","center":[0.5,0.5],"radius":0.25}})")));
    CHECK(std::holds_alternative<HalfSpaceExterior>(
        *model(R"({"union":[{"shape":"halfspace","axis":1,"level":0.5},{"shape":"box","lo":[0,0],"hi":[0.5,0.5]}]})")));
    CHECK_FALSE(model(R"({"union":[{"shape":"halfspace","axis":1,"level":0.5},{"shape":"halfspace","axis":0,"level":0.5}]})")
                    .has_value());
    CHECK(std::holds_alternative<FullExterior>(*model(R"({"union":[{"shape":"full"},{"shape":"halfspace","axis":0,"level":0.5}]})")));

    const cli::Shape graph = cli::parse_shape(
        json::parse(R"({"graph":{"heights":[0.25,0.75,0.25,0.25],"farfield":0.5,"base":{"h":0.25}}})"), "v", dir);
    REQUIRE(graph.exterior(spec).has_value());
    const CellSet set = cli::rasterize(graph, spec, "v");
    CHECK(set.inside.count() == 1 + 3 + 1 + 1);
    CHECK(graph.contains({2.0, 0.4, 0.0}));   // far field 0.5
    CHECK_FALSE(graph.contains({2.0, 0.6, 0.0}));
    CHECK_THROWS_AS(cli::rasterize(cli::parse_shape(json::parse(R"({"shape":"ball","center":[0,0],"radius":3})"),
                                                    "set", dir),
                                   spec, "set"),
                    cli::ConfigError);
}
