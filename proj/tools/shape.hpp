#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "fracperim/grid.hpp"

namespace fracperim::cli {

/// A config value was missing or malformed. `field` is the dotted path of
/// the offending key.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& what) : std::runtime_error(what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// A set described in the JSON shape language: a membership test plus, when
/// one exists, an exterior model that agrees with it beyond a given box.
struct Shape {
    std::function<bool(const Point&)> contains;
    std::function<std::optional<ExteriorModel>(const GridSpec&)> exterior;
};

/// Shapes:
///   {"shape":"ball","center":[..],"radius":r}
///   {"shape":"box","lo":[..],"hi":[..]}
///   {"shape":"halfspace","axis":a,"level":t,"below":true}
///   {"shape":"subgraph","heights":<fracfield path or array>,"farfield":c,"below":true,
///    "base":{"h":..,"origin":[..]}}     (base only with an inline array)
///   {"graph":{...same fields as subgraph...}}
///   {"union":[...]}, {"complement":{...}}, {"shape":"full"}, {"shape":"empty"}
/// Relative paths resolve against `dir`.
Shape parse_shape(const nlohmann::json& j, const std::string& field, const std::filesystem::path& dir);

/// Subgraph data of a graph shape; `base` is the grid the heights live on
/// when they are given inline.
SubgraphExterior parse_graph(const nlohmann::json& j, const std::string& field, const std::filesystem::path& dir,
                             const std::optional<GridSpec>& base);

/// Cell-center rasterization with the shape's own exterior model. Throws
/// ConfigError when the shape has no exterior model beyond this box.
CellSet rasterize(const Shape& shape, const GridSpec& spec, const std::string& field);
CellMask rasterize_mask(const Shape& shape, const GridSpec& spec);

}  // namespace fracperim::cli
