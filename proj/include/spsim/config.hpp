#pragma once

// Sectioned key-value configuration with strict unit suffixes.
//
//   [emitter]
//   radiative_lifetime = 2.1 ns
//   t_on = 9.1 us
//
// Keys are addressed as "section.key". Dimensional values must carry a unit:
// time (ps, ns, us, ms, s), power (nW, uW, mW, W), count rate (cps, kcps,
// Mcps), wavelength (nm), pump coefficient (/ns/mW, /ns/uW). Lists are comma
// separated.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spsim/model.hpp"

namespace spsim {

enum class Dimension { kTimeNs, kPowerUw, kRateCps, kLengthNm, kPumpCoefficient, kNumber };

/// Parses "<number> <unit>" into the canonical unit of `dim`. Throws
/// ConfigError naming `field` on a missing or unknown unit.
double parse_quantity(std::string_view text, Dimension dim, std::string_view field);

class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::filesystem::path& path);

    bool has(std::string_view key) const;
    /// Throws ConfigError("missing required field <key>").
    const std::string& raw(std::string_view key) const;
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    double quantity(std::string_view key, Dimension dim) const;
    double quantity_or(std::string_view key, Dimension dim, double fallback) const;
    std::vector<double> quantity_list(std::string_view key, Dimension dim) const;
    std::uint64_t integer(std::string_view key) const;
    std::string string_or(std::string_view key, std::string fallback) const;

    const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

private:
    std::map<std::string, std::string, std::less<>> values_;
};

/// [emitter] section. pump_coefficient defaults to doubling 1/T at
/// pump_saturation_power (default 66 uW).
EmitterParams emitter_from(const Config& cfg);
/// [detection] section.
DetectionParams detection_from(const Config& cfg);

}  // namespace spsim
