#include "pbill/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "pbill/error.hpp"

namespace pbill {

namespace {

ordered_json cell_to_json(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) {
        if (std::isfinite(*d)) return *d;
        return format_real(*d);  // JSON has no inf/nan literals
    }
    if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
    return std::get<std::string>(c);
}

std::string cell_to_csv(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return format_real(*d);
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    return std::get<std::string>(c);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_cell(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') return std::numeric_limits<double>::quiet_NaN();
    return v;
}

double json_number(const ordered_json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return parse_cell(v.get<std::string>());
    return std::numeric_limits<double>::quiet_NaN();
}

bool looks_like_json(const std::string& text) {
    for (char ch : text) {
        if (ch == ' ' || ch == '\n' || ch == '\t' || ch == '\r') continue;
        return ch == '{';
    }
    return false;
}

// Header plus rows of one named table in CSV output.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

CsvTable find_csv_table(const std::string& text, const std::string& name) {
    std::istringstream in(text);
    std::string line;
    bool active = false;
    bool found = false;
    CsvTable t;
    while (std::getline(in, line)) {
        if (line.rfind("# table=", 0) == 0) {
            active = line.substr(8) == name;
            found = found || active;
            continue;
        }
        if (!active || line.empty() || line[0] == '#') continue;
        if (t.columns.empty()) t.columns = split(line, ',');
        else t.rows.push_back(split(line, ','));
    }
    if (!found) throw ContractError("no table '" + name + "' in input");
    return t;
}

const ordered_json& find_json_table(const ordered_json& doc, const std::string& name) {
    if (doc.contains("tables")) {
        for (const auto& t : doc["tables"]) {
            if (t.value("name", "") == name) return t;
        }
    }
    throw ContractError("no table '" + name + "' in input");
}

}  // namespace

std::string library_version() { return PBILL_VERSION; }

std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string render_csv(const ResultEnvelope& env) {
    std::ostringstream os;
    os << "# schema_version=" << schema_version << '\n';
    os << "# pbill_version=" << library_version() << '\n';
    os << "# command=" << env.command << '\n';
    os << "# config=" << env.config.dump() << '\n';
    if (!env.resolved.empty()) os << "# resolved=" << env.resolved.dump() << '\n';
    for (const auto& [key, value] : env.summary.items()) os << "# summary." << key << '=' << value.dump() << '\n';
    for (const auto& d : env.diagnostics) os << "# diagnostic=" << d << '\n';
    if (env.timings) os << "# timings=" << env.timings->dump() << '\n';
    for (const auto& t : env.tables) {
        os << "# table=" << t.name << '\n';
        for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
        os << '\n';
        for (const auto& row : t.rows) {
            for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << cell_to_csv(row[c]);
            os << '\n';
        }
    }
    return os.str();
}

std::string render_json(const ResultEnvelope& env) {
    ordered_json j;
    j["schema_version"] = schema_version;
    j["pbill_version"] = library_version();
    j["command"] = env.command;
    j["config"] = env.config;
    if (!env.resolved.empty()) j["resolved"] = env.resolved;
    j["summary"] = env.summary;
    j["diagnostics"] = env.diagnostics;
    ordered_json tables = ordered_json::array();
    for (const auto& t : env.tables) {
        ordered_json rows = ordered_json::array();
        for (const auto& row : t.rows) {
            ordered_json r = ordered_json::array();
            for (const auto& c : row) r.push_back(cell_to_json(c));
            rows.push_back(std::move(r));
        }
        tables.push_back({{"name", t.name}, {"columns", t.columns}, {"rows", std::move(rows)}});
    }
    j["tables"] = std::move(tables);
    if (env.timings) j["timings"] = *env.timings;
    return j.dump(2) + "\n";
}

std::string render(const ResultEnvelope& env, OutputFormat format) {
    return format == OutputFormat::csv ? render_csv(env) : render_json(env);
}

std::vector<std::vector<double>> read_table(const std::string& text, const std::string& name) {
    std::vector<std::vector<double>> out;
    if (looks_like_json(text)) {
        ordered_json doc;
        try {
            doc = ordered_json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ContractError(std::string("input is not valid JSON: ") + e.what());
        }
        for (const auto& row : find_json_table(doc, name)["rows"]) {
            std::vector<double> r;
            for (const auto& c : row) r.push_back(json_number(c));
            out.push_back(std::move(r));
        }
        return out;
    }
    for (const auto& row : find_csv_table(text, name).rows) {
        std::vector<double> r;
        for (const auto& c : row) r.push_back(parse_cell(c));
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<double> read_levels(const std::string& text) {
    std::vector<std::string> columns;
    if (looks_like_json(text)) {
        const auto doc = ordered_json::parse(text, nullptr, false);
        if (doc.is_discarded()) throw ContractError("levels input is not valid JSON");
        columns = find_json_table(doc, "levels")["columns"].get<std::vector<std::string>>();
    } else {
        columns = find_csv_table(text, "levels").columns;
    }
    std::size_t omega_col = columns.size(), mult_col = columns.size();
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c] == "omega") omega_col = c;
        if (columns[c] == "multiplicity") mult_col = c;
    }
    if (omega_col == columns.size()) throw ContractError("levels table has no omega column");
    std::vector<double> levels;
    for (const auto& row : read_table(text, "levels")) {
        if (omega_col >= row.size()) throw ContractError("levels table row is too short");
        const double m = mult_col < row.size() ? row[mult_col] : 1.0;
        if (!(m >= 1.0) || m != std::floor(m)) throw ContractError("bad multiplicity in levels table");
        for (int k = 0; k < static_cast<int>(m); ++k) levels.push_back(row[omega_col]);
    }
    return levels;
}

std::vector<double> read_levels_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open levels file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return read_levels(buf.str());
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        std::cout.flush();
        if (!std::cout) throw IoError("writing to standard output failed");
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    out.close();
    if (!out) throw IoError("writing '" + path + "' failed");
}

}  // namespace pbill
