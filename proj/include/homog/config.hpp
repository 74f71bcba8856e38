#pragma once

#include "homog/coefficients.hpp"

#include <optional>
#include <string>
#include <vector>

namespace homog {

/// INI-style key/value configuration (sections in brackets, `key = value`, `;` or `#` comments).
/// Keys are addressed as "section.key".
class Config {
public:
    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    bool has(const std::string& key) const;
    std::optional<std::string> get(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    /// Comma separated list of numbers; each item may be a fraction such as 1/16.
    std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

    void set(const std::string& key, const std::string& value);
    /// Keys of one section in file order.
    std::vector<std::string> keys(const std::string& section) const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

/// Parses a decimal number or a simple fraction "p/q".
double parse_number(const std::string& text);

/// Builds the coefficient set from [problem], [A], [V], [B] and [c].
///
/// [problem] dim, m, lambda, preset, seed, kappa, symmetric_A
/// [A] a<i><j> (m = 1) or a<i><j>_<alpha><beta>
/// [V] v<i> or v<i>_<alpha><beta>;  [B] b<i> or b<i>_<alpha><beta>;  [c] c or c_<alpha><beta>
/// Indices are 1-based. Entries not given are zero, or taken from the preset when one is named.
CoefficientSet coefficients_from_config(const Config& cfg);

/// [grid] N (default 128).
CellGrid grid_from_config(const Config& cfg);

}  // namespace homog
