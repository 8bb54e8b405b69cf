#include "spsim/config.hpp"

#include <algorithm>
#include <array>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spsim/errors.hpp"

namespace spsim {

namespace {

struct UnitFactor {
    std::string_view suffix;
    double factor;
};

constexpr std::array kTimeUnits{UnitFactor{"ps", 1e-3}, UnitFactor{"ns", 1.0},
                                UnitFactor{"us", 1e3}, UnitFactor{"ms", 1e6},
                                UnitFactor{"s", 1e9}};
constexpr std::array kPowerUnits{UnitFactor{"nW", 1e-3}, UnitFactor{"uW", 1.0},
                                 UnitFactor{"mW", 1e3}, UnitFactor{"W", 1e6}};
constexpr std::array kRateUnits{UnitFactor{"cps", 1.0}, UnitFactor{"kcps", 1e3},
                                UnitFactor{"Mcps", 1e6}};
constexpr std::array kLengthUnits{UnitFactor{"nm", 1.0}};
constexpr std::array kPumpUnits{UnitFactor{"/ns/mW", 1.0}, UnitFactor{"/ns/uW", 1e3}};

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

template <std::size_t N>
double apply_units(double number, std::string_view unit, const std::array<UnitFactor, N>& table,
                   std::string_view field) {
    for (const auto& u : table) {
        if (u.suffix == unit) return number * u.factor;
    }
    std::string allowed;
    for (const auto& u : table) {
        if (!allowed.empty()) allowed += ", ";
        allowed += u.suffix;
    }
    throw ConfigError(std::string(field) + ": unit '" + std::string(unit) +
                      "' not recognised (expected one of " + allowed + ")");
}

}  // namespace

double parse_quantity(std::string_view text, Dimension dim, std::string_view field) {
    text = trim(text);
    double number = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), number);
    if (res.ec != std::errc() || !std::isfinite(number)) {
        throw ConfigError(std::string(field) + ": expected a number, got '" + std::string(text) + "'");
    }
    const auto unit = trim(text.substr(static_cast<std::size_t>(res.ptr - text.data())));
    if (dim == Dimension::kNumber) {
        if (!unit.empty()) {
            throw ConfigError(std::string(field) + ": dimensionless value carries unit '" +
                              std::string(unit) + "'");
        }
        return number;
    }
    if (unit.empty()) throw ConfigError(std::string(field) + ": missing unit suffix");
    switch (dim) {
        case Dimension::kTimeNs: return apply_units(number, unit, kTimeUnits, field);
        case Dimension::kPowerUw: return apply_units(number, unit, kPowerUnits, field);
        case Dimension::kRateCps: return apply_units(number, unit, kRateUnits, field);
        case Dimension::kLengthNm: return apply_units(number, unit, kLengthUnits, field);
        case Dimension::kPumpCoefficient: return apply_units(number, unit, kPumpUnits, field);
        case Dimension::kNumber: break;
    }
    return number;
}

Config Config::parse(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
    }
    Config cfg;
    for (const auto& [section, node] : tree) {
        if (node.empty()) {
            cfg.values_[section] = std::string(trim(node.data()));
            continue;
        }
        for (const auto& [key, leaf] : node) {
            cfg.values_[section + "." + key] = std::string(trim(leaf.data()));
        }
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

bool Config::has(std::string_view key) const { return values_.find(key) != values_.end(); }

const std::string& Config::raw(std::string_view key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required field " + std::string(key));
    return it->second;
}

double Config::quantity(std::string_view key, Dimension dim) const {
    return parse_quantity(raw(key), dim, key);
}

double Config::quantity_or(std::string_view key, Dimension dim, double fallback) const {
    return has(key) ? quantity(key, dim) : fallback;
}

std::vector<double> Config::quantity_list(std::string_view key, Dimension dim) const {
    std::vector<double> out;
    std::string_view rest = raw(key);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto item = trim(rest.substr(0, comma));
        if (!item.empty()) out.push_back(parse_quantity(item, dim, key));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    if (out.empty()) throw ConfigError(std::string(key) + ": empty list");
    return out;
}

std::uint64_t Config::integer(std::string_view key) const {
    const auto text = trim(raw(key));
    std::uint64_t v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw ConfigError(std::string(key) + ": expected a non-negative integer");
    }
    return v;
}

std::string Config::string_or(std::string_view key, std::string fallback) const {
    return has(key) ? raw(key) : std::move(fallback);
}

EmitterParams emitter_from(const Config& cfg) {
    EmitterParams e;
    e.radiative_lifetime_ns = cfg.quantity("emitter.radiative_lifetime", Dimension::kTimeNs);
    e.t_on_us = cfg.quantity("emitter.t_on", Dimension::kTimeNs) * 1e-3;
    e.t_off_us = cfg.quantity("emitter.t_off", Dimension::kTimeNs) * 1e-3;
    const double p_sat = cfg.quantity_or("emitter.pump_saturation_power", Dimension::kPowerUw, 66.0);
    e.pump_coefficient = cfg.has("emitter.pump_coefficient")
                             ? cfg.quantity("emitter.pump_coefficient", Dimension::kPumpCoefficient)
                             : default_pump_coefficient(e.radiative_lifetime_ns, p_sat);
    e.validate();
    return e;
}

DetectionParams detection_from(const Config& cfg) {
    DetectionParams d;
    d.overall_efficiency = cfg.quantity("detection.efficiency", Dimension::kNumber);
    d.splitter_ratio = cfg.quantity_or("detection.splitter_ratio", Dimension::kNumber, 0.5);
    d.background_rate_cps = cfg.quantity_or("detection.background", Dimension::kRateCps, 0.0);
    d.dead_time_ns = cfg.quantity_or("detection.dead_time", Dimension::kTimeNs, 50.0);
    d.jitter_sigma_ps = cfg.quantity_or("detection.jitter", Dimension::kTimeNs, 0.150) * 1e3;
    d.validate();
    return d;
}

}  // namespace spsim
