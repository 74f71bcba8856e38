#include "homog/config.hpp"

#include "homog/error.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <sstream>

namespace homog {

namespace {

Config from_tree(const boost::property_tree::ptree& tree) {
    Config cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            cfg.set(section, body.data());
            continue;
        }
        for (const auto& [key, value] : body) cfg.set(section + "." + key, value.data());
    }
    return cfg;
}

}  // namespace

Config Config::from_file(const std::string& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(path, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("cannot read config: ") + e.what());
    }
    return from_tree(tree);
}

Config Config::from_string(const std::string& text) {
    boost::property_tree::ptree tree;
    std::istringstream is(text);
    try {
        boost::property_tree::read_ini(is, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("cannot parse config: ") + e.what());
    }
    return from_tree(tree);
}

void Config::set(const std::string& key, const std::string& value) {
    const std::string v = boost::algorithm::trim_copy(value);
    for (auto& [k, old] : entries_)
        if (k == key) {
            old = v;
            return;
        }
    entries_.emplace_back(key, v);
}

bool Config::has(const std::string& key) const { return get(key).has_value(); }

std::optional<std::string> Config::get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return v;
    return std::nullopt;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    auto v = get(key);
    return v ? *v : fallback;
}

double parse_number(const std::string& text) {
    const std::string t = boost::algorithm::trim_copy(text);
    auto parse_plain = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw ConfigError("not a number: '" + text + "'");
        }
        if (used != s.size()) throw ConfigError("not a number: '" + text + "'");
        return v;
    };
    const auto slash = t.find('/');
    if (slash == std::string::npos) return parse_plain(t);
    const double num = parse_plain(boost::algorithm::trim_copy(t.substr(0, slash)));
    const double den = parse_plain(boost::algorithm::trim_copy(t.substr(slash + 1)));
    if (den == 0.0) throw ConfigError("division by zero in '" + text + "'");
    return num / den;
}

double Config::get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
        return parse_number(*v);
    } catch (const ConfigError&) {
        throw ConfigError("config key '" + key + "' is not a number: '" + *v + "'");
    }
}

long long Config::get_int(const std::string& key, long long fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(*v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v->size() || v->empty()) throw ConfigError("config key '" + key + "' is not an integer: '" + *v + "'");
    return out;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    const std::string s = boost::algorithm::to_lower_copy(*v);
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw ConfigError("config key '" + key + "' is not a boolean: '" + *v + "'");
}

std::vector<double> Config::get_list(const std::string& key, const std::vector<double>& fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::vector<std::string> parts;
    boost::algorithm::split(parts, *v, boost::algorithm::is_any_of(","));
    std::vector<double> out;
    for (const auto& p : parts) {
        if (boost::algorithm::trim_copy(p).empty()) continue;
        try {
            out.push_back(parse_number(p));
        } catch (const ConfigError&) {
            throw ConfigError("config key '" + key + "' has a malformed list item '" + p + "'");
        }
    }
    return out;
}

std::vector<std::string> Config::keys(const std::string& section) const {
    std::vector<std::string> out;
    const std::string prefix = section + ".";
    for (const auto& [k, v] : entries_)
        if (k.rfind(prefix, 0) == 0) out.push_back(k.substr(prefix.size()));
    return out;
}

namespace {

std::vector<int> key_indices(const std::string& key, char lead, std::size_t expected_digits) {
    // Accepts forms like a12, a12_21, v1, v1_12, c, c_12 (1-based digits).
    std::vector<int> idx;
    if (key.empty() || key[0] != lead) return {};
    for (std::size_t i = 1; i < key.size(); ++i) {
        if (key[i] == '_') continue;
        if (key[i] < '1' || key[i] > '9') return {};
        idx.push_back(key[i] - '1');
    }
    if (idx.size() != expected_digits) return {};
    return idx;
}

}  // namespace

CoefficientSet coefficients_from_config(const Config& cfg) {
    const std::string preset_name = cfg.get_string("problem.preset", "");
    const auto seed = static_cast<std::uint64_t>(cfg.get_int("problem.seed", 0));
    CoefficientSet s;
    if (!preset_name.empty()) {
        s = preset(preset_name, seed);
        if (cfg.has("problem.dim") && cfg.get_int("problem.dim", 2) != s.dim)
            throw ConfigError("problem.dim conflicts with the preset");
        if (cfg.has("problem.m") && cfg.get_int("problem.m", 1) != s.m) throw ConfigError("problem.m conflicts with the preset");
    } else {
        const int dim = static_cast<int>(cfg.get_int("problem.dim", 2));
        const int m = static_cast<int>(cfg.get_int("problem.m", 1));
        s = CoefficientSet::zeros(dim, m);
        s.name = "custom";
    }
    s.lambda = cfg.get_double("problem.lambda", s.lambda);
    if (s.lambda < 0.0) throw ConfigError("problem.lambda must be nonnegative");
    s.kappa_bound = cfg.get_double("problem.kappa", s.kappa_bound);
    s.symmetric_A = cfg.get_bool("problem.symmetric_A", s.symmetric_A);

    const int d = s.dim, m = s.m;
    const auto vars = cell_variables(d);
    auto parse_entry = [&](const std::string& section, const std::string& key) {
        const std::string text = *cfg.get(section + "." + key);
        try {
            return parse_expr(text, vars);
        } catch (const ParseError& e) {
            throw ConfigError("[" + section + "] " + key + ": " + e.what());
        }
    };
    auto check_range = [&](const std::vector<int>& idx, const std::vector<int>& limits, const std::string& key) {
        for (std::size_t i = 0; i < idx.size(); ++i)
            if (idx[i] >= limits[i]) throw ConfigError("coefficient key '" + key + "' is out of range");
    };
    for (const auto& key : cfg.keys("A")) {
        auto idx = key_indices(key, 'a', m == 1 ? 2 : 4);
        if (idx.empty()) throw ConfigError("unrecognised key [A] " + key);
        if (m == 1) idx.insert(idx.end(), {0, 0});
        check_range(idx, {d, d, m, m}, key);
        s.A[s.a_index(idx[0], idx[1], idx[2], idx[3])] = parse_entry("A", key);
    }
    for (const auto& sec : {std::string("V"), std::string("B")}) {
        const char lead = sec == "V" ? 'v' : 'b';
        for (const auto& key : cfg.keys(sec)) {
            auto idx = key_indices(key, lead, m == 1 ? 1 : 3);
            if (idx.empty()) throw ConfigError("unrecognised key [" + sec + "] " + key);
            if (m == 1) idx.insert(idx.end(), {0, 0});
            check_range(idx, {d, m, m}, key);
            auto& target = sec == "V" ? s.V : s.B;
            target[s.v_index(idx[0], idx[1], idx[2])] = parse_entry(sec, key);
        }
    }
    for (const auto& key : cfg.keys("c")) {
        auto idx = key_indices(key, 'c', m == 1 ? 0 : 2);
        if (idx.empty() && !(m == 1 && key == "c")) throw ConfigError("unrecognised key [c] " + key);
        if (m == 1) idx = {0, 0};
        check_range(idx, {m, m}, key);
        s.c[s.c_index(idx[0], idx[1])] = parse_entry("c", key);
    }
    return s;
}

CellGrid grid_from_config(const Config& cfg) {
    CellGrid g;
    g.dim = static_cast<int>(cfg.get_int("problem.dim", 2));
    g.N = static_cast<int>(cfg.get_int("grid.N", 128));
    g.check();
    return g;
}

}  // namespace homog
