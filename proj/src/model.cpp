#include "spsim/model.hpp"

#include <cmath>
#include <cstdlib>

#include "spsim/errors.hpp"

namespace spsim {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

void EmitterParams::validate() const {
    require(positive(radiative_lifetime_ns), "emitter.radiative_lifetime must be > 0");
    require(positive(t_on_us), "emitter.t_on must be > 0");
    require(positive(t_off_us), "emitter.t_off must be > 0");
    require(std::isfinite(pump_coefficient) && pump_coefficient >= 0.0,
            "emitter.pump_coefficient must be >= 0");
    const double lifetime_us = radiative_lifetime_ns * 1e-3;
    require(lifetime_us < t_on_us && lifetime_us < t_off_us,
            "emitter.radiative_lifetime must be shorter than both blinking dwell times");
}

void ExcitationCW::validate() const {
    require(std::isfinite(power_uw) && power_uw >= 0.0, "cw.power must be >= 0");
    require(positive(wavelength_nm), "cw.wavelength must be > 0");
}

void ExcitationPulsed::validate() const {
    require(positive(rep_period_ns), "pulsed.rep_period must be > 0");
    require(excitation_prob >= 0.0 && excitation_prob <= 1.0,
            "pulsed.excitation_prob must lie in [0, 1]");
}

void DetectionParams::validate() const {
    require(overall_efficiency >= 0.0 && overall_efficiency <= 1.0,
            "detection.efficiency must lie in [0, 1]");
    require(splitter_ratio >= 0.0 && splitter_ratio <= 1.0,
            "detection.splitter_ratio must lie in [0, 1]");
    require(std::isfinite(background_rate_cps) && background_rate_cps >= 0.0,
            "detection.background must be >= 0");
    require(std::isfinite(dead_time_ns) && dead_time_ns >= 0.0,
            "detection.dead_time must be >= 0");
    require(std::isfinite(jitter_sigma_ps) && jitter_sigma_ps >= 0.0,
            "detection.jitter must be >= 0");
}

void SaturationParams::validate() const {
    require(positive(rate_at_saturation_cps), "saturation.rate_at_saturation must be > 0");
    require(positive(saturation_power_uw), "saturation.saturation_power must be > 0");
}

void PLETable::validate() const {
    require(rows.size() >= 2, "PLE table needs at least two rows");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        require(std::isfinite(r.wavelength_nm), "PLE wavelength must be finite");
        require(r.signal_rate_cps >= 0.0 && r.background_rate_cps >= 0.0,
                "PLE rates must be >= 0");
        if (i > 0) {
            require(r.wavelength_nm > rows[i - 1].wavelength_nm,
                    "PLE wavelengths must be strictly increasing");
        }
    }
}

double bunching_plateau(double t_on, double t_off) { return 1.0 + t_off / t_on; }

double eval_cn_model(long m, double t_on, double t_off, double theta) {
    if (m == 0) throw DomainError("eval_cn_model: the blinking model does not apply at m = 0");
    if (!(t_on > 0.0 && t_off > 0.0 && theta > 0.0)) {
        throw DomainError("eval_cn_model: t_on, t_off and theta must be > 0");
    }
    const double rate = 1.0 / t_on + 1.0 / t_off;
    const double delay = static_cast<double>(std::labs(m)) * theta;
    return 1.0 + (t_off / t_on) * std::exp(-rate * delay);
}

double eval_saturation(double power_uw, const SaturationParams& sat) {
    if (!(power_uw >= 0.0)) throw DomainError("eval_saturation: power must be >= 0");
    if (std::isinf(power_uw)) return sat.rate_at_saturation_cps;
    return sat.rate_at_saturation_cps * power_uw / (power_uw + sat.saturation_power_uw);
}

double predicted_saturated_rate(const DetectionParams& det, const EmitterParams& emitter,
                                double theta_ns) {
    if (!(theta_ns > 0.0)) throw DomainError("predicted_saturated_rate: theta must be > 0");
    const double duty = emitter.t_on_us / (emitter.t_on_us + emitter.t_off_us);
    return det.overall_efficiency * duty / (theta_ns * 1e-9);
}

double decay_rate_at_power(double power_uw, const EmitterParams& emitter) {
    if (!(power_uw >= 0.0)) throw DomainError("decay_rate_at_power: power must be >= 0");
    return 1.0 / emitter.radiative_lifetime_ns + emitter.pump_coefficient * power_uw * 1e-3;
}

double default_pump_coefficient(double radiative_lifetime_ns, double p_sat_uw) {
    return (1.0 / radiative_lifetime_ns) / (p_sat_uw * 1e-3);
}

double excitation_prob_from_power(double power_uw, double p_sat_uw) {
    if (!(power_uw >= 0.0)) throw DomainError("excitation_prob_from_power: power must be >= 0");
    if (!(p_sat_uw > 0.0)) throw DomainError("excitation_prob_from_power: P_sat must be > 0");
    return power_uw / (power_uw + p_sat_uw);
}

double duty_cycle(const EmitterParams& emitter) {
    return emitter.t_on_us / (emitter.t_on_us + emitter.t_off_us);
}

}  // namespace spsim
