#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pbill/config.hpp"

namespace pbill {

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

/// Everything one command emits. Renders to CSV (tables, with the rest as
/// '#' header lines) or to a JSON envelope; both carry the same numbers.
struct ResultEnvelope {
    std::string command;
    ordered_json config;
    ordered_json resolved = ordered_json::object();  // scatterers after resolving random draws and band offsets
    ordered_json summary = ordered_json::object();
    std::vector<std::string> diagnostics;
    std::vector<Table> tables;
    std::optional<ordered_json> timings;
    /// Set when a numerical guarantee failed; output is still written.
    bool numerical_failure = false;
};

std::string library_version();

/// %.17g, with inf and nan spelled out.
std::string format_real(double v);

std::string render_csv(const ResultEnvelope& env);
std::string render_json(const ResultEnvelope& env);
std::string render(const ResultEnvelope& env, OutputFormat format);

/// Levels from a spectrum output in either format, each repeated by its multiplicity.
std::vector<double> read_levels(const std::string& text);
std::vector<double> read_levels_file(const std::string& path);

/// Table rows from either rendering, as doubles; strings become NaN. For format-equivalence checks.
std::vector<std::vector<double>> read_table(const std::string& text, const std::string& name);

void write_output(const std::string& path, const std::string& content);

}  // namespace pbill
