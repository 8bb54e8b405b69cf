#pragma once

// Physical parameter types and the closed-form forward models shared by the
// simulator and the estimators.

#include <string>
#include <vector>

namespace spsim {

/// Photophysics of a single blinking colour centre.
struct EmitterParams {
    double radiative_lifetime_ns = 2.0;  ///< excited-state lifetime at zero pump power
    double t_on_us = 9.1;                ///< mean ON (bright) dwell
    double t_off_us = 7.0;               ///< mean OFF (dark) dwell
    double pump_coefficient = 0.0;       ///< slope of 1/T vs power, ns^-1 per mW

    /// Throws ConfigError when a field is non-positive or the lifetime is not
    /// well below both dwell times.
    void validate() const;
};

struct ExcitationCW {
    double power_uw = 0.0;
    double wavelength_nm = 765.0;

    void validate() const;
};

struct ExcitationPulsed {
    double rep_period_ns = 50.0;
    double excitation_prob = 1.0;  ///< promotion probability per pulse

    void validate() const;
};

struct DetectionParams {
    double overall_efficiency = 0.0035;  ///< emitted -> detected, both detectors
    double splitter_ratio = 0.5;         ///< fraction routed to channel 1
    double background_rate_cps = 0.0;    ///< per channel
    double dead_time_ns = 50.0;          ///< per channel
    double jitter_sigma_ps = 150.0;      ///< per channel, Gaussian

    void validate() const;
};

struct SaturationParams {
    double rate_at_saturation_cps = 35e3;
    double saturation_power_uw = 66.0;

    void validate() const;
};

struct PLERow {
    double wavelength_nm;
    double signal_rate_cps;
    double background_rate_cps;
};

/// Photoluminescence-excitation table with strictly increasing wavelengths.
struct PLETable {
    std::vector<PLERow> rows;

    void validate() const;
};

/// Long-delay bunching level 1 + t_off/t_on of a telegraph-blinking emitter.
/// This is the |m| -> 0 limit of eval_cn_model and the plateau fitted by
/// fit_antibunching_cw.
double bunching_plateau(double t_on, double t_off);

/// Normalized coincidences of pulsed peak m != 0 for an emitter blinking with
/// mean dwell times t_on/t_off, excited every theta. All three times must share
/// one unit. Throws DomainError for m == 0 or non-positive times.
double eval_cn_model(long m, double t_on, double t_off, double theta);

/// Detected rate R = R_inf P / (P + P_sat). Throws DomainError on negative power.
double eval_saturation(double power_uw, const SaturationParams& sat);

/// Saturated detected rate eta * t_on/(t_on + t_off) / theta, in counts/s.
/// Unlike EmitterParams::validate this accepts t_off == 0 (unit duty cycle).
double predicted_saturated_rate(const DetectionParams& det, const EmitterParams& emitter,
                                double theta_ns);

/// 1/T = 1/radiative_lifetime + pump_coefficient * P, in ns^-1.
double decay_rate_at_power(double power_uw, const EmitterParams& emitter);

/// Pump coefficient for which 1/T doubles between P = 0 and P = p_sat_uw.
double default_pump_coefficient(double radiative_lifetime_ns, double p_sat_uw);

/// Per-pulse excitation probability P / (P + P_sat).
double excitation_prob_from_power(double power_uw, double p_sat_uw);

/// Fraction of time the emitter spends ON.
double duty_cycle(const EmitterParams& emitter);

}  // namespace spsim
