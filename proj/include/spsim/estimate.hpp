#pragma once

// Estimators inverting the forward models: lifetime, cw antibunching, decay
// rate vs power, saturation, blinking dwell times, detection efficiency,
// background correction, and the PLE optimum.

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spsim/correlate.hpp"
#include "spsim/model.hpp"

namespace spsim {

struct FitParameter {
    std::string name;
    std::string unit;
    double value = 0.0;
    double std_error = 0.0;
};

struct FitResult {
    std::string model;
    std::vector<FitParameter> parameters;
    double residual_norm = 0.0;  ///< sqrt(chi^2) of the weighted residuals
    double chi2 = 0.0;
    int dof = 0;
    int iterations = 0;
    bool converged = false;
    std::string message;

    /// Throws std::out_of_range for unknown names.
    const FitParameter& at(std::string_view name) const;
    double value(std::string_view name) const { return at(name).value; }
    double error(std::string_view name) const { return at(name).std_error; }
};

/// Gaussian instrument response of a delay measurement.
struct IRFModel {
    double sigma_ps = 0.0;
};

/// Variance model for counting data. kObserved uses max(count, 1) per bin.
/// kModel refits with variances from the fitted prediction, which avoids the
/// downward bias of observed-count weights when bins hold only a few counts.
enum class Weighting { kObserved, kModel };

/// (power, value) sample; sigma <= 0 means "unknown", giving unit weights.
struct PowerPoint {
    double power_uw;
    double value;
    double sigma = 0.0;
};

/// A exp(-t/T) + B over bins whose centre lies in [window_start, window_end),
/// t measured from window_start. Weights 1/max(count, 1). Reports lifetime [ns],
/// amplitude and offset [counts/bin].
FitResult fit_exponential_decay(const Histogram& hist, SignedTick window_start,
                                SignedTick window_end, Weighting weighting = Weighting::kObserved);

/// g2(tau) = beta - (beta - g0) exp(-|tau|/T) convolved with the IRF. Reports
/// decay_time [ns], plateau and g0.
FitResult fit_antibunching_cw(const G2Curve& curve, const IRFModel& irf,
                             Weighting weighting = Weighting::kObserved);

/// Ordinary least-squares line through (power [uW], 1/T [ns^-1]). Reports
/// intercept_rate, slope and the derived lifetime = 1/intercept_rate.
FitResult fit_rate_vs_power(std::span<const PowerPoint> points);

/// Damped least squares of R = R_inf P / (P + P_sat). Reports R_inf [counts/s]
/// and P_sat [uW].
FitResult fit_saturation(std::span<const PowerPoint> points);

/// Damped least squares of the blinking peak model over all m != 0. Reports
/// t_on and t_off in us for theta given in ns.
FitResult fit_blinking(const PeakSeries& peaks, double theta_ns,
                       Weighting weighting = Weighting::kObserved);

/// eta = r_inf * theta * (t_on + t_off) / t_on; t_on and t_off share one unit.
double infer_detection_efficiency(double r_inf_cps, double t_on, double t_off, double theta_ns);

struct CorrectedG2 {
    double value = 0.0;      ///< clamped at 0
    double unclamped = 0.0;
    bool inconsistent = false;  ///< unclamped more than 3 sigma below zero
};

/// Removes the uncorrelated-background floor 1 - p^2, p = rho/(1 + rho).
/// `sigma` is the standard error of the measured value (0 = unknown).
CorrectedG2 background_correct_g2(double g_measured_0, double signal_to_background,
                                  double sigma = 0.0);

struct PLEOptimum {
    double wavelength_nm = 0.0;
    double signal_to_background = 0.0;
};

/// Row maximizing signal/background among wavelengths <= filter_edge - guard;
/// ties go to the longer wavelength.
PLEOptimum ple_optimum(const PLETable& table, double filter_edge_nm, double guard_nm = 15.0);

/// Analytic gradient of eval_cn_model with respect to (t_on, t_off).
std::array<double, 2> cn_model_gradient(long m, double t_on, double t_off, double theta);

/// Analytic gradient of eval_saturation with respect to (R_inf, P_sat).
std::array<double, 2> saturation_gradient(double power_uw, double r_inf, double p_sat);

}  // namespace spsim
