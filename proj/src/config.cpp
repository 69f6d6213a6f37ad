#include "pbill/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "pbill/error.hpp"

namespace pbill {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double parse_real(const std::string& s) {
    if (s == "-inf") return -inf;
    if (s == "inf" || s == "+inf") return inf;
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ContractError("not a number: '" + s + "'");
    }
    if (used != s.size()) throw ContractError("not a number: '" + s + "'");
    return v;
}

ordered_json real_to_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

// Reads typed fields from one JSON object and records every problem instead of stopping at the first.
class Reader {
public:
    Reader(const ordered_json& obj, std::string path, std::vector<std::string>& errors)
        : obj_(obj), path_(std::move(path)), errors_(errors) {
        if (!obj_.is_object()) errors_.push_back(path_ + ": expected an object");
    }

    ~Reader() {
        if (!obj_.is_object()) return;
        for (const auto& [key, value] : obj_.items()) {
            if (!seen_.contains(key)) errors_.push_back(path_ + "." + key + ": unknown key");
        }
    }

    const ordered_json* find(const std::string& key) {
        seen_.insert(key);
        if (!obj_.is_object()) return nullptr;
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void real(const std::string& key, double& out) {
        if (const auto* v = find(key)) {
            if (v->is_number()) {
                out = v->get<double>();
            } else if (v->is_string()) {
                try {
                    out = parse_real(v->get<std::string>());
                } catch (const ContractError& e) {
                    fail(key, e.what());
                }
            } else {
                fail(key, "expected a number");
            }
        }
    }

    template <class Int>
    void integer(const std::string& key, Int& out) {
        if (const auto* v = find(key)) {
            if (v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
                out = v->get<Int>();
            } else {
                fail(key, "expected a non-negative integer");
            }
        }
    }

    void string(const std::string& key, std::string& out) {
        if (const auto* v = find(key)) {
            if (v->is_string()) out = v->get<std::string>();
            else fail(key, "expected a string");
        }
    }

    void object(const std::string& key, const std::function<void(Reader&)>& body) {
        if (const auto* v = find(key)) {
            Reader sub(*v, path_ + "." + key, errors_);
            if (v->is_object()) body(sub);
        }
    }

    void fail(const std::string& key, const std::string& msg) { errors_.push_back(path_ + "." + key + ": " + msg); }
    const std::string& path() const { return path_; }

private:
    const ordered_json& obj_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

std::string join(const std::vector<std::string>& lines, const std::string& head) {
    std::string msg = head;
    for (const auto& l : lines) msg += "\n  " + l;
    return msg;
}

const char* to_string(TailMode t) { return t == TailMode::none ? "none" : "integral"; }

}  // namespace

CouplingSpec CouplingSpec::parse(const ordered_json& j) {
    if (j.is_number()) return {j.get<double>(), false};
    if (!j.is_string()) throw ContractError("coupling must be a number or \"band_center[+-offset]\"");
    const std::string s = j.get<std::string>();
    const std::string key = "band_center";
    if (s.rfind(key, 0) != 0) return {parse_real(s), false};
    const std::string rest = s.substr(key.size());
    if (rest.empty()) return {0.0, true};
    if (rest[0] != '+' && rest[0] != '-') throw ContractError("bad coupling expression '" + s + "'");
    return {parse_real(rest), true};
}

ordered_json CouplingSpec::to_json() const {
    if (!band_center) return real_to_json(value);
    if (value == 0.0) return "band_center";
    std::ostringstream os;
    os.precision(17);
    os << "band_center" << (value > 0 ? "+" : "") << value;
    return os.str();
}

double CouplingSpec::resolve(const BilliardSpec& spec, double lambda, const EnergyWindow& window) const {
    if (!band_center) return value;
    double lo = window.lo;
    if (!std::isfinite(lo)) lo = mode_energy(spec, 1, 1);
    const double center = 0.5 * (lo + window.hi);
    if (!(center > 0.0)) throw ContractError("band_center coupling needs a window center above zero");
    return spec.mass / (2.0 * std::numbers::pi) * std::log(center / lambda) + value;
}

RunConfig config_from_json(const ordered_json& j) {
    RunConfig c;
    std::vector<std::string> errors;
    {
        Reader r(j, "config", errors);
        if (const auto* v = r.find("schema_version")) {
            if (!v->is_number_integer() || v->get<int>() != schema_version)
                r.fail("schema_version", "expected " + std::to_string(schema_version));
        }
        r.object("billiard", [&](Reader& b) {
            b.real("lx", c.billiard.lx);
            b.real("ly", c.billiard.ly);
            b.real("mass", c.billiard.mass);
        });
        r.object("scatterers", [&](Reader& s) {
            s.real("lambda", c.lambda);
            if (const auto* pts = s.find("points")) {
                if (!pts->is_array()) {
                    s.fail("points", "expected an array");
                } else {
                    for (std::size_t k = 0; k < pts->size(); ++k) {
                        Reader p((*pts)[k], s.path() + ".points[" + std::to_string(k) + "]", errors);
                        ScattererSpec sc;
                        p.real("x", sc.position.x);
                        p.real("y", sc.position.y);
                        if (const auto* v = p.find("vbar_inv")) {
                            try {
                                sc.vbar_inv = CouplingSpec::parse(*v);
                            } catch (const ContractError& e) {
                                p.fail("vbar_inv", e.what());
                            }
                        } else {
                            p.fail("vbar_inv", "missing");
                        }
                        c.scatterers.push_back(sc);
                    }
                }
            }
            s.object("random", [&](Reader& rnd) {
                RandomScatterers rs;
                rnd.integer("count", rs.count);
                rnd.real("margin", rs.margin);
                if (const auto* v = rnd.find("vbar_inv")) {
                    try {
                        rs.vbar_inv = CouplingSpec::parse(*v);
                    } catch (const ContractError& e) {
                        rnd.fail("vbar_inv", e.what());
                    }
                }
                c.random_scatterers = rs;
            });
        });
        r.object("window", [&](Reader& w) {
            if (!w.find("lo")) w.fail("lo", "missing");
            if (!w.find("hi")) w.fail("hi", "missing");
            w.real("lo", c.window.lo);
            w.real("hi", c.window.hi);
        });
        r.object("accuracy", [&](Reader& a) {
            a.integer("n_max", c.accuracy.n_max);
            std::string tail = to_string(c.accuracy.tail);
            a.string("tail", tail);
            if (tail == "none") c.accuracy.tail = TailMode::none;
            else if (tail == "integral") c.accuracy.tail = TailMode::integral;
            else a.fail("tail", "expected \"none\" or \"integral\"");
            a.real("target_abs_err", c.accuracy.target_abs_err);
            a.integer("block_levels", c.accuracy.block_levels);
            a.real("pole_exclusion", c.accuracy.pole_exclusion);
        });
        r.object("solver", [&](Reader& s) {
            s.real("tol", c.solver.tol);
            s.integer("grid_per_spacing", c.solver.grid_per_spacing);
            s.real("bound_state_floor", c.solver.bound_state_floor);
            s.real("coupling_threshold", c.solver.coupling_threshold);
        });
        r.object("stats", [&](Reader& s) {
            s.integer("exclude_lowest", c.exclude_lowest);
            s.integer("bins", c.bins);
            s.string("input", c.stats_input);
        });
        r.object("sweep", [&](Reader& s) {
            if (const auto* g = s.find("vbar_inv")) {
                if (!g->is_array()) {
                    s.fail("vbar_inv", "expected an array");
                } else {
                    for (const auto& v : *g) {
                        try {
                            c.sweep_grid.push_back(CouplingSpec::parse(v));
                        } catch (const ContractError& e) {
                            s.fail("vbar_inv", e.what());
                        }
                    }
                }
            }
        });
        r.object("predict", [&](Reader& p) {
            double omega = std::numeric_limits<double>::quiet_NaN();
            p.real("omega", omega);
            if (!std::isnan(omega)) c.predict_omega = omega;
        });
        r.object("survey", [&](Reader& s) { s.integer("scatterer", c.survey_scatterer); });
        r.integer("seed", c.seed);
        r.integer("workers", c.workers);
        r.object("output", [&](Reader& o) {
            o.string("path", c.output_path);
            std::string fmt = "csv";
            o.string("format", fmt);
            if (fmt == "csv") c.format = OutputFormat::csv;
            else if (fmt == "json") c.format = OutputFormat::json;
            else o.fail("format", "expected \"csv\" or \"json\"");
        });
    }
    if (!errors.empty()) throw ContractError(join(errors, "invalid config:"));
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ContractError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

ordered_json config_to_json(const RunConfig& c) {
    ordered_json j;
    j["schema_version"] = schema_version;
    j["billiard"] = {{"lx", c.billiard.lx}, {"ly", c.billiard.ly}, {"mass", c.billiard.mass}};
    ordered_json pts = ordered_json::array();
    for (const auto& s : c.scatterers)
        pts.push_back({{"x", s.position.x}, {"y", s.position.y}, {"vbar_inv", s.vbar_inv.to_json()}});
    j["scatterers"] = {{"lambda", c.lambda}, {"points", pts}};
    if (c.random_scatterers) {
        const auto& r = *c.random_scatterers;
        j["scatterers"]["random"] = {{"count", r.count}, {"margin", r.margin}, {"vbar_inv", r.vbar_inv.to_json()}};
    }
    j["window"] = {{"lo", real_to_json(c.window.lo)}, {"hi", real_to_json(c.window.hi)}};
    j["accuracy"] = {{"n_max", c.accuracy.n_max},
                     {"tail", to_string(c.accuracy.tail)},
                     {"target_abs_err", c.accuracy.target_abs_err},
                     {"block_levels", c.accuracy.block_levels},
                     {"pole_exclusion", c.accuracy.pole_exclusion}};
    j["solver"] = {{"tol", c.solver.tol},
                   {"grid_per_spacing", c.solver.grid_per_spacing},
                   {"bound_state_floor", real_to_json(c.solver.bound_state_floor)},
                   {"coupling_threshold", c.solver.coupling_threshold}};
    j["stats"] = {{"exclude_lowest", c.exclude_lowest}, {"bins", c.bins}, {"input", c.stats_input}};
    ordered_json grid = ordered_json::array();
    for (const auto& g : c.sweep_grid) grid.push_back(g.to_json());
    j["sweep"] = {{"vbar_inv", grid}};
    if (c.predict_omega) j["predict"] = {{"omega", *c.predict_omega}};
    j["survey"] = {{"scatterer", c.survey_scatterer}};
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["output"] = {{"path", c.output_path}, {"format", c.format == OutputFormat::csv ? "csv" : "json"}};
    return j;
}

std::vector<std::string> validation_errors(const RunConfig& c) {
    std::vector<std::string> errors;
    auto check = [&](const char* what, auto&& fn) {
        try {
            fn();
        } catch (const ContractError& e) {
            errors.push_back(std::string(what) + ": " + e.what());
        }
    };
    bool geometry_ok = true;
    check("billiard", [&] {
        try {
            c.billiard.validate();
        } catch (const ContractError&) {
            geometry_ok = false;
            throw;
        }
    });
    check("window", [&] { c.window.validate(); });
    check("accuracy", [&] { c.accuracy.validate(); });
    check("solver", [&] { c.solver.validate(); });
    if (!(c.lambda > 0.0) || !std::isfinite(c.lambda)) errors.push_back("scatterers.lambda: must be positive");
    if (c.random_scatterers) {
        const auto& r = *c.random_scatterers;
        if (!(r.margin > 0.0 && r.margin < 0.5)) errors.push_back("scatterers.random.margin: must lie in (0, 0.5)");
    }
    if (geometry_ok) check("scatterers", [&] { resolve_scatterers(c).validate(c.billiard); });
    if (c.bins == 0) errors.push_back("stats.bins: must be positive");
    if (c.workers < 0) errors.push_back("workers: must be non-negative");
    if (c.survey_scatterer >= c.scatterers.size() + (c.random_scatterers ? c.random_scatterers->count : 0) &&
        !(c.scatterers.empty() && !c.random_scatterers))
        errors.push_back("survey.scatterer: index out of range");
    if (c.predict_omega && !(*c.predict_omega > 0.0)) errors.push_back("predict.omega: must be positive");
    if (c.accuracy.n_max > ModeTable::default_mode_budget)
        errors.push_back("accuracy.n_max: exceeds the mode budget of " +
                         std::to_string(ModeTable::default_mode_budget));
    return errors;
}

void validate(const RunConfig& c) {
    const auto errors = validation_errors(c);
    if (!errors.empty()) throw ContractError(join(errors, "invalid config:"));
}

ScattererSet resolve_scatterers(const RunConfig& c) {
    ScattererSet set;
    set.lambda = c.lambda;
    for (const auto& s : c.scatterers) {
        set.positions.push_back(s.position);
        set.vbar_inv.push_back(s.vbar_inv.resolve(c.billiard, c.lambda, c.window));
    }
    if (c.random_scatterers) {
        const auto& r = *c.random_scatterers;
        std::mt19937_64 rng(c.seed);
        std::uniform_real_distribution<double> u(r.margin, 1.0 - r.margin);
        const double v = r.vbar_inv.resolve(c.billiard, c.lambda, c.window);
        for (std::size_t k = 0; k < r.count; ++k) {
            const double x = u(rng) * c.billiard.lx;
            const double y = u(rng) * c.billiard.ly;
            set.positions.push_back({x, y});
            set.vbar_inv.push_back(v);
        }
    }
    return set;
}

double window_center(const RunConfig& c) {
    double lo = c.window.lo;
    if (!std::isfinite(lo)) lo = mode_energy(c.billiard, 1, 1);
    return 0.5 * (lo + c.window.hi);
}

EnergyWindow parse_window(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ContractError("window must be LO:HI, got '" + text + "'");
    return {parse_real(text.substr(0, colon)), parse_real(text.substr(colon + 1))};
}

}  // namespace pbill
