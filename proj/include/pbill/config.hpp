#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pbill/basis.hpp"
#include "pbill/greens.hpp"
#include "pbill/solver.hpp"

namespace pbill {

using ordered_json = nlohmann::ordered_json;

inline constexpr int schema_version = 1;

/// 1/vbar either as a number or relative to the strong-band center at the window center.
struct CouplingSpec {
    double value = 0.0;
    bool band_center = false;  // value is then an offset from the band center

    static CouplingSpec parse(const ordered_json& j);
    ordered_json to_json() const;
    double resolve(const BilliardSpec& spec, double lambda, const EnergyWindow& window) const;
};

struct ScattererSpec {
    Point position;
    CouplingSpec vbar_inv;
};

/// Positions drawn uniformly from the interior box [margin, 1 - margin] in units
/// of the side lengths, with the run seed.
struct RandomScatterers {
    std::size_t count = 0;
    double margin = 0.05;
    CouplingSpec vbar_inv;
};

enum class OutputFormat { csv, json };

struct RunConfig {
    BilliardSpec billiard;
    double lambda = 1.0;
    std::vector<ScattererSpec> scatterers;
    std::optional<RandomScatterers> random_scatterers;
    EnergyWindow window{0.0, 0.0};
    GreensAccuracy accuracy;
    SolverOptions solver;
    std::uint64_t seed = 0;
    std::string output_path;  // empty: standard output
    OutputFormat format = OutputFormat::csv;
    int workers = 0;          // 0: OpenMP default

    std::size_t exclude_lowest = 200;
    std::size_t bins = 40;
    std::string stats_input;  // levels file for the stats command; empty runs the spectrum inline
    std::vector<CouplingSpec> sweep_grid;
    std::optional<double> predict_omega;  // defaults to the window center
    std::size_t survey_scatterer = 0;
};

/// Parses a config document. Unknown keys and type errors are collected and
/// reported together in one ContractError.
RunConfig config_from_json(const ordered_json& j);
RunConfig load_config(const std::string& path);
ordered_json config_to_json(const RunConfig& c);

/// Every violated precondition, in a fixed order. Empty when the config is valid.
std::vector<std::string> validation_errors(const RunConfig& c);
/// Throws ContractError listing all of validation_errors.
void validate(const RunConfig& c);

/// Explicit scatterers followed by the random ones, couplings resolved.
ScattererSet resolve_scatterers(const RunConfig& c);

/// Center of the window, with an unbounded lower end replaced by the ground energy.
double window_center(const RunConfig& c);

/// "LO:HI" with either side a number or -inf.
EnergyWindow parse_window(const std::string& text);

}  // namespace pbill
