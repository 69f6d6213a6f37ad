#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pbill/commands.hpp"
#include "pbill/config.hpp"
#include "pbill/error.hpp"
#include "pbill/kernels.hpp"
#include "pbill/report.hpp"

namespace {

enum ExitCode : int { ok = 0, usage = 1, validation = 2, numerical = 3, io = 4 };

struct Overrides {
    std::string config;
    std::string window;
    std::optional<std::size_t> n_max;
    std::optional<double> tol;
    std::string format;
    std::optional<int> workers;
    std::string out;
    std::string input;
    std::optional<double> omega;
    bool timings = false;
};

pbill::RunConfig build_config(const Overrides& o) {
    pbill::RunConfig c = pbill::load_config(o.config);
    if (!o.window.empty()) c.window = pbill::parse_window(o.window);
    if (o.n_max) c.accuracy.n_max = *o.n_max;
    if (o.tol) c.solver.tol = *o.tol;
    if (o.format == "csv") c.format = pbill::OutputFormat::csv;
    if (o.format == "json") c.format = pbill::OutputFormat::json;
    if (o.workers) c.workers = *o.workers;
    if (!o.out.empty()) c.output_path = o.out;
    if (!o.input.empty()) c.stats_input = o.input;
    if (o.omega) c.predict_omega = *o.omega;
    return c;
}

int run(const std::string& command, const Overrides& o) {
    const pbill::RunConfig c = build_config(o);
    pbill::validate(c);
    if (c.workers > 0) pbill::kernels::parallel::set_threads(c.workers);
    const pbill::CommandOptions opts{o.timings};
    pbill::ResultEnvelope env;
    if (command == "spectrum") {
        env = pbill::cmd_spectrum(c, opts);
    } else if (command == "stats") {
        std::optional<std::vector<double>> levels;
        if (!c.stats_input.empty()) levels = pbill::read_levels_file(c.stats_input);
        env = pbill::cmd_stats(c, levels, opts);
    } else if (command == "sweep") {
        env = pbill::cmd_sweep(c, opts);
    } else if (command == "survey") {
        env = pbill::cmd_survey(c, opts);
    } else {
        env = pbill::cmd_predict(c, opts);
    }
    pbill::write_output(c.output_path, pbill::render(env, c.format));
    if (env.numerical_failure) {
        std::cerr << "pbill: numerical failure; see diagnostics in the output\n";
        return numerical;
    }
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectra of a rectangular billiard with point scatterers"};
    app.set_version_flag("--version", pbill::library_version());
    app.require_subcommand(1);
    app.fallthrough();

    Overrides o;
    app.add_option("--config", o.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    app.add_option("--window", o.window, "energy window LO:HI (LO may be -inf)");
    app.add_option("--nmax", o.n_max, "series truncation (mode count)");
    app.add_option("--tol", o.tol, "absolute root tolerance");
    app.add_option("--format", o.format, "output format")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--workers", o.workers, "OpenMP worker count")->check(CLI::NonNegativeNumber);
    app.add_option("--out", o.out, "output path; standard output when omitted");
    app.add_flag("--timings", o.timings, "include wall-clock timings in the output");

    app.add_subcommand("spectrum", "perturbed levels in the window");
    auto* stats = app.add_subcommand("stats", "spacing histogram and KS distances");
    stats->add_option("--input", o.input, "levels file written by the spectrum command");
    app.add_subcommand("sweep", "spacing statistics over a grid of couplings");
    app.add_subcommand("survey", "inflection points of the regularized Green's function");
    auto* predict = app.add_subcommand("predict", "strong-coupling band membership");
    predict->add_option("--omega", o.omega, "energy at which the band is evaluated");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage;
    }

    try {
        return run(app.get_subcommands().front()->get_name(), o);
    } catch (const pbill::ContractError& e) {
        std::cerr << "pbill: " << e.what() << '\n';
        return validation;
    } catch (const pbill::IoError& e) {
        std::cerr << "pbill: " << e.what() << '\n';
        return io;
    } catch (const pbill::NumericalError& e) {
        std::cerr << "pbill: numerical failure: " << e.what() << '\n';
        return numerical;
    } catch (const std::exception& e) {
        std::cerr << "pbill: " << e.what() << '\n';
        return numerical;
    }
}
