#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pbill/config.hpp"
#include "pbill/report.hpp"
#include "pbill/solver.hpp"

namespace pbill {

struct CommandOptions {
    bool timings = false;  // wall-clock timings make output non-reproducible, so they are opt-in
};

/// Mode table and series caches shared by every run on one geometry.
struct PreparedRun {
    ScattererSet scatterers;
    std::shared_ptr<const ModeTable> table;
    std::shared_ptr<const SeriesTermSource> source;
};

/// Validates the config and builds the caches. Throws ContractError listing every violation.
PreparedRun prepare(const RunConfig& c);

/// Levels in the window: the unperturbed spectrum for N = 0, solve_single for
/// N = 1 and solve_multi otherwise. vbar_inv overrides the resolved couplings when given.
SpectrumResult compute_spectrum(const RunConfig& c, const PreparedRun& run,
                                const std::vector<double>* vbar_inv = nullptr);

/// Scatterers lying on a line x = p lx / q or y = p ly / q with q <= 12, where
/// whole families of modes vanish.
std::vector<std::string> symmetry_warnings(const BilliardSpec& spec, const ScattererSet& set);

ResultEnvelope cmd_spectrum(const RunConfig& c, const CommandOptions& opts = {});
/// levels: a previously computed spectrum; when absent the spectrum is computed inline.
ResultEnvelope cmd_stats(const RunConfig& c, const std::optional<std::vector<double>>& levels,
                         const CommandOptions& opts = {});
ResultEnvelope cmd_sweep(const RunConfig& c, const CommandOptions& opts = {});
ResultEnvelope cmd_survey(const RunConfig& c, const CommandOptions& opts = {});
ResultEnvelope cmd_predict(const RunConfig& c, const CommandOptions& opts = {});

}  // namespace pbill
