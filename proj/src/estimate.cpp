#include "spsim/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "spsim/errors.hpp"
#include "spsim/lsq.hpp"
#include "spsim/units.hpp"

namespace spsim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

FitResult from_solution(std::string model, const lsq::Solution& sol,
                        std::vector<FitParameter> params) {
    FitResult out;
    out.model = std::move(model);
    out.parameters = std::move(params);
    out.chi2 = sol.chi2;
    out.residual_norm = std::sqrt(sol.chi2);
    out.dof = sol.dof;
    out.iterations = sol.iterations;
    out.converged = sol.converged;
    out.message = sol.message;
    if (sol.used_simplex) {
        out.message = out.message.empty() ? "simplex fallback" : "simplex fallback: " + out.message;
    }
    return out;
}

FitResult not_converged(std::string model, std::vector<FitParameter> params, std::string why) {
    FitResult out;
    out.model = std::move(model);
    for (auto& p : params) {
        p.value = kNaN;
        p.std_error = kNaN;
    }
    out.parameters = std::move(params);
    out.residual_norm = kNaN;
    out.chi2 = kNaN;
    out.message = std::move(why);
    return out;
}

// Uniform-grid Gaussian kernel over +-6 sigma.
struct GaussianKernel {
    std::vector<double> offsets;
    std::vector<double> weights;

    explicit GaussianKernel(double sigma) {
        if (!(sigma > 0.0)) {
            offsets = {0.0};
            weights = {1.0};
            return;
        }
        constexpr int kNodes = 161;
        const double h = 12.0 * sigma / (kNodes - 1);
        double total = 0.0;
        for (int k = 0; k < kNodes; ++k) {
            const double u = -6.0 * sigma + h * k;
            offsets.push_back(u);
            weights.push_back(std::exp(-0.5 * u * u / (sigma * sigma)));
            total += weights.back();
        }
        for (auto& w : weights) w /= total;
    }
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Counting data: 1/count weights bias a fit low when bins hold few counts.
// Refitting with variances proportional to the model prediction removes that.
// unit_var[i] is the variance of a single count in the units of y[i].
lsq::Solution refit_model_variance(const lsq::Model& model, lsq::Data data,
                                   const std::vector<double>& unit_var, lsq::Solution sol,
                                   const lsq::Options& opt, Weighting weighting, int rounds = 3) {
    if (weighting == Weighting::kObserved) return sol;
    for (int r = 0; r < rounds && sol.converged; ++r) {
        for (std::size_t i = 0; i < data.x.size(); ++i) {
            const double mu = model(data.x[i], sol.params, {});
            data.sigma[i] = std::sqrt(unit_var[i] * std::max(mu, 0.5 * unit_var[i]));
        }
        auto next = lsq::levenberg_marquardt(model, data, sol.params, opt);
        if (!next.converged) break;
        next.iterations += sol.iterations;
        sol = std::move(next);
    }
    return sol;
}

std::size_t distinct_count(std::span<const PowerPoint> points) {
    std::vector<double> powers;
    for (const auto& p : points) powers.push_back(p.power_uw);
    std::sort(powers.begin(), powers.end());
    return static_cast<std::size_t>(std::unique(powers.begin(), powers.end()) - powers.begin());
}

}  // namespace

const FitParameter& FitResult::at(std::string_view name) const {
    for (const auto& p : parameters) {
        if (p.name == name) return p;
    }
    throw std::out_of_range("FitResult: no parameter named " + std::string(name));
}

std::array<double, 2> cn_model_gradient(long m, double t_on, double t_off, double theta) {
    const double x = static_cast<double>(std::labs(m)) * theta;
    const double e = std::exp(-(1.0 / t_on + 1.0 / t_off) * x);
    const double ratio = t_off / t_on;
    return {-ratio / t_on * e + ratio * e * x / (t_on * t_on),
            e / t_on + ratio * e * x / (t_off * t_off)};
}

std::array<double, 2> saturation_gradient(double power_uw, double r_inf, double p_sat) {
    const double d = power_uw + p_sat;
    return {power_uw / d, -r_inf * power_uw / (d * d)};
}

FitResult fit_exponential_decay(const Histogram& hist, SignedTick window_start,
                                SignedTick window_end, Weighting weighting) {
    const std::vector<FitParameter> names{
        {"lifetime", "ns"}, {"amplitude", "counts/bin"}, {"offset", "counts/bin"}};
    lsq::Data data;
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < hist.size(); ++i) {
        const double c = hist.bin_center(i);
        if (c < static_cast<double>(window_start) || c >= static_cast<double>(window_end)) continue;
        const auto y = static_cast<double>(hist.counts[i]);
        data.x.push_back(c - static_cast<double>(window_start));
        data.y.push_back(y);
        data.sigma.push_back(std::sqrt(std::max(y, 1.0)));
        if (hist.counts[i] > 0) ++nonzero;
    }
    if (nonzero < 5) {
        return not_converged("exponential_decay", names, "fewer than 5 nonzero bins in the window");
    }

    const std::size_t n = data.y.size();
    const std::size_t tail = std::max<std::size_t>(3, n / 10);
    const double offset0 =
        std::accumulate(data.y.end() - static_cast<std::ptrdiff_t>(tail), data.y.end(), 0.0) /
        static_cast<double>(tail);
    const double head = (data.y[0] + data.y[1] + data.y[2]) / 3.0;
    const double amp0 = std::max(head - offset0, 1.0);
    double weight = 0.0;
    double moment = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double excess = std::max(data.y[i] - offset0, 0.0);
        weight += excess;
        moment += excess * data.x[i];
    }
    const double span = data.x.back() + static_cast<double>(hist.bin_width);
    double lifetime0 = weight > 0.0 ? moment / weight : span / 4.0;
    lifetime0 = std::clamp(lifetime0, static_cast<double>(hist.bin_width), span);

    lsq::Model model = [](double x, std::span<const double> p, std::span<double> g) {
        const double e = std::exp(-x / p[0]);
        if (!g.empty()) {
            g[0] = p[1] * e * x / (p[0] * p[0]);
            g[1] = e;
            g[2] = 1.0;
        }
        return p[1] * e + p[2];
    };
    lsq::Options opt;
    opt.feasible = [](std::span<const double> p) { return p[0] > 0.0; };
    const auto sol = refit_model_variance(
        model, data, std::vector<double>(n, 1.0),
        lsq::levenberg_marquardt(model, data, {lifetime0, amp0, offset0}, opt), opt, weighting);

    auto params = names;
    params[0].value = sol.params[0] / kPsPerNs;
    params[0].std_error = sol.std_errors[0] / kPsPerNs;
    params[1].value = sol.params[1];
    params[1].std_error = sol.std_errors[1];
    params[2].value = sol.params[2];
    params[2].std_error = sol.std_errors[2];
    return from_solution("exponential_decay", sol, std::move(params));
}

FitResult fit_antibunching_cw(const G2Curve& curve, const IRFModel& irf, Weighting weighting) {
    const std::vector<FitParameter> names{{"decay_time", "ns"}, {"plateau", ""}, {"g0", ""}};
    if (curve.values.size() != curve.tau_ps.size() || curve.sigma.size() != curve.tau_ps.size()) {
        throw ConfigError("fit_antibunching_cw: curve arrays differ in length");
    }
    if (curve.values.size() < 8) throw ConfigError("fit_antibunching_cw: need at least 8 bins");
    if (irf.sigma_ps < 0.0) throw ConfigError("fit_antibunching_cw: IRF sigma must be >= 0");

    // Zero-count bins get the Poisson floor max(count, 1): sigma^2 / value
    // is 1/denominator for every nonzero bin.
    double unit_sigma = 0.0;
    for (std::size_t i = 0; i < curve.values.size(); ++i) {
        if (curve.values[i] > 0.0 && curve.sigma[i] > 0.0) {
            unit_sigma = curve.sigma[i] * curve.sigma[i] / curve.values[i];
            break;
        }
    }
    if (!(unit_sigma > 0.0)) {
        return not_converged("antibunching_cw", names, "curve has no counts");
    }
    lsq::Data data;
    data.x = curve.tau_ps;
    data.y = curve.values;
    for (const double s : curve.sigma) data.sigma.push_back(std::max(s, unit_sigma));

    double max_tau = 0.0;
    for (const double t : data.x) max_tau = std::max(max_tau, std::abs(t));
    std::vector<double> outer;
    for (std::size_t i = 0; i < data.x.size(); ++i) {
        if (std::abs(data.x[i]) >= 0.7 * max_tau) outer.push_back(data.y[i]);
    }
    const double plateau0 = std::accumulate(outer.begin(), outer.end(), 0.0) /
                            static_cast<double>(std::max<std::size_t>(outer.size(), 1));
    std::vector<std::size_t> by_tau(data.x.size());
    std::iota(by_tau.begin(), by_tau.end(), 0);
    std::sort(by_tau.begin(), by_tau.end(),
              [&](auto a, auto b) { return std::abs(data.x[a]) < std::abs(data.x[b]); });
    const double central0 =
        (data.y[by_tau[0]] + data.y[by_tau[1]] + data.y[by_tau[2]]) / 3.0;
    const double g00 = std::clamp(central0, 0.0, 0.9 * plateau0);
    const double half_level = 0.5 * (plateau0 + g00);
    double tau_half = max_tau / 10.0;
    for (const auto i : by_tau) {
        if (data.y[i] >= half_level && std::abs(data.x[i]) > 0.0) {
            tau_half = std::abs(data.x[i]);
            break;
        }
    }
    const double decay0 = std::max(tau_half / std::log(2.0), 1.0);

    const GaussianKernel kernel(irf.sigma_ps);
    lsq::Model model = [&kernel](double x, std::span<const double> p, std::span<double> g) {
        const double decay = p[0];
        const double depth = p[1] - p[2];
        double value = 0.0;
        if (!g.empty()) std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t k = 0; k < kernel.offsets.size(); ++k) {
            const double t = std::abs(x - kernel.offsets[k]);
            const double e = std::exp(-t / decay);
            const double w = kernel.weights[k];
            value += w * (p[1] - depth * e);
            if (!g.empty()) {
                g[0] += w * (-depth * e * t / (decay * decay));
                g[1] += w * (1.0 - e);
                g[2] += w * e;
            }
        }
        return value;
    };
    lsq::Options opt;
    opt.feasible = [](std::span<const double> p) { return p[0] > 0.0; };
    const auto sol = refit_model_variance(
        model, data, std::vector<double>(data.x.size(), unit_sigma),
        lsq::levenberg_marquardt(model, data, {decay0, plateau0, g00}, opt), opt, weighting);

    auto params = names;
    params[0].value = sol.params[0] / kPsPerNs;
    params[0].std_error = sol.std_errors[0] / kPsPerNs;
    params[1].value = sol.params[1];
    params[1].std_error = sol.std_errors[1];
    params[2].value = sol.params[2];
    params[2].std_error = sol.std_errors[2];
    auto out = from_solution("antibunching_cw", sol, std::move(params));
    if (out.converged && max_tau < 10.0 * sol.params[0]) {
        out.converged = false;
        out.message = "curve spans fewer than 10 decay times";
    }
    return out;
}

FitResult fit_rate_vs_power(std::span<const PowerPoint> points) {
    if (points.size() < 2 || distinct_count(points) < 2) {
        throw ConfigError("fit_rate_vs_power: need at least two distinct powers");
    }
    const auto n = static_cast<double>(points.size());
    double mx = 0.0;
    double my = 0.0;
    for (const auto& p : points) {
        mx += p.power_uw / n;
        my += p.value / n;
    }
    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& p : points) {
        sxx += (p.power_uw - mx) * (p.power_uw - mx);
        sxy += (p.power_uw - mx) * (p.value - my);
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double ssr = 0.0;
    for (const auto& p : points) {
        const double r = p.value - (intercept + slope * p.power_uw);
        ssr += r * r;
    }
    const int dof = static_cast<int>(points.size()) - 2;
    const double s2 = dof > 0 ? ssr / dof : 0.0;
    const double se_slope = std::sqrt(s2 / sxx);
    const double se_intercept = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));

    FitResult out;
    out.model = "rate_vs_power";
    out.parameters = {
        {"intercept_rate", "1/ns", intercept, se_intercept},
        {"slope", "1/(ns uW)", slope, se_slope},
        {"lifetime", "ns", 1.0 / intercept, se_intercept / (intercept * intercept)},
    };
    out.chi2 = ssr;
    out.residual_norm = std::sqrt(ssr);
    out.dof = dof;
    out.iterations = 1;
    out.converged = intercept > 0.0;
    if (!out.converged) out.message = "non-positive intercept: lifetime undefined";
    return out;
}

FitResult fit_saturation(std::span<const PowerPoint> points) {
    const std::vector<FitParameter> names{{"R_inf", "counts/s"}, {"P_sat", "uW"}};
    if (distinct_count(points) < 3) throw ConfigError("fit_saturation: need at least three distinct powers");
    lsq::Data data;
    std::vector<double> powers;
    double max_rate = 0.0;
    double min_rate = std::numeric_limits<double>::infinity();
    for (const auto& p : points) {
        if (p.power_uw < 0.0) throw DomainError("fit_saturation: negative power");
        data.x.push_back(p.power_uw);
        data.y.push_back(p.value);
        data.sigma.push_back(p.sigma > 0.0 ? p.sigma : 1.0);
        powers.push_back(p.power_uw);
        max_rate = std::max(max_rate, p.value);
        min_rate = std::min(min_rate, p.value);
    }
    if (!(max_rate > 0.0) || max_rate - min_rate <= 1e-12 * max_rate) {
        return not_converged("saturation", names, "degenerate data: rates do not vary with power");
    }

    lsq::Model model = [](double x, std::span<const double> p, std::span<double> g) {
        const double d = x + p[1];
        if (!g.empty()) {
            g[0] = x / d;
            g[1] = -p[0] * x / (d * d);
        }
        return p[0] * x / d;
    };
    lsq::Options opt;
    opt.feasible = [](std::span<const double> p) { return p[0] > 0.0 && p[1] > 0.0; };
    const auto sol = lsq::levenberg_marquardt(model, data, {2.0 * max_rate, median(powers)}, opt);

    auto params = names;
    for (std::size_t j = 0; j < 2; ++j) {
        params[j].value = sol.params[j];
        params[j].std_error = sol.std_errors[j];
    }
    auto out = from_solution("saturation", sol, std::move(params));
    const auto [lo, hi] = std::minmax_element(powers.begin(), powers.end());
    if (out.converged && !(*lo < sol.params[1] && sol.params[1] < *hi)) {
        out.converged = false;
        out.message = "P_sat estimate lies outside the sampled power range";
    }
    return out;
}

FitResult fit_blinking(const PeakSeries& peaks, double theta_ns, Weighting weighting) {
    const std::vector<FitParameter> names{{"t_on", "us"}, {"t_off", "us"}};
    if (!(theta_ns > 0.0)) throw DomainError("fit_blinking: theta must be > 0");
    if (peaks.normalized.size() != peaks.m.size() || peaks.sigma.size() != peaks.m.size()) {
        throw ConfigError("fit_blinking: peaks must be normalized first");
    }
    const double theta_us = theta_ns * 1e-3;
    lsq::Data data;
    int left = 0;
    int right = 0;
    for (std::size_t i = 0; i < peaks.m.size(); ++i) {
        const long m = peaks.m[i];
        if (m == 0) continue;
        (m < 0 ? left : right) += 1;
        data.x.push_back(static_cast<double>(std::labs(m)) * theta_us);
        data.y.push_back(peaks.normalized[i]);
        data.sigma.push_back(peaks.sigma[i]);
    }
    if (left < 4 || right < 4) {
        throw ConfigError("fit_blinking: need at least 4 peaks with m != 0 on each side");
    }

    // Bunching height from the nearest peaks (|m| <= 2), as a weighted mean.
    double wsum = 0.0;
    double hsum = 0.0;
    for (std::size_t i = 0; i < data.x.size(); ++i) {
        if (data.x[i] > 2.5 * theta_us) continue;
        const double w = 1.0 / (data.sigma[i] * data.sigma[i]);
        wsum += w;
        hsum += w * (data.y[i] - 1.0);
    }
    const double height = hsum / wsum;
    if (!(height > 3.0 / std::sqrt(wsum))) {
        return not_converged("blinking", names, "no bunching: C_N(m != 0) consistent with 1");
    }

    // Decay constant from a weighted log-linear regression of the excess.
    double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < data.x.size(); ++i) {
        const double excess = data.y[i] - 1.0;
        if (excess <= 2.0 * data.sigma[i]) continue;
        const double w = (excess / data.sigma[i]) * (excess / data.sigma[i]);
        const double ly = std::log(excess);
        sw += w;
        sx += w * data.x[i];
        sy += w * ly;
        sxx += w * data.x[i] * data.x[i];
        sxy += w * data.x[i] * ly;
    }
    double decay_rate = 0.0;
    const double det = sw * sxx - sx * sx;
    if (det > 0.0) decay_rate = -(sw * sxy - sx * sy) / det;
    double max_x = 0.0;
    for (const double x : data.x) max_x = std::max(max_x, x);
    if (!(decay_rate > 0.0) || !std::isfinite(decay_rate)) decay_rate = 4.0 / max_x;

    const double ratio0 = height * std::exp(decay_rate * theta_us);
    const double t_on0 = (1.0 + 1.0 / ratio0) / decay_rate;
    const double t_off0 = ratio0 * t_on0;

    lsq::Model model = [](double x, std::span<const double> p, std::span<double> g) {
        const double e = std::exp(-(1.0 / p[0] + 1.0 / p[1]) * x);
        const double ratio = p[1] / p[0];
        if (!g.empty()) {
            g[0] = -ratio / p[0] * e + ratio * e * x / (p[0] * p[0]);
            g[1] = e / p[0] + ratio * e * x / (p[1] * p[1]);
        }
        return 1.0 + ratio * e;
    };
    lsq::Options opt;
    opt.feasible = [](std::span<const double> p) { return p[0] > 0.0 && p[1] > 0.0; };
    std::vector<double> unit_var;
    for (std::size_t i = 0; i < data.x.size(); ++i) {
        const double s2 = data.sigma[i] * data.sigma[i];
        unit_var.push_back(data.y[i] > 0.0 ? s2 / data.y[i] : s2);
    }
    const auto sol = refit_model_variance(
        model, data, unit_var, lsq::levenberg_marquardt(model, data, {t_on0, t_off0}, opt), opt,
        weighting);

    auto params = names;
    for (std::size_t j = 0; j < 2; ++j) {
        params[j].value = sol.params[j];
        params[j].std_error = sol.std_errors[j];
    }
    return from_solution("blinking", sol, std::move(params));
}

double infer_detection_efficiency(double r_inf_cps, double t_on, double t_off, double theta_ns) {
    if (!(r_inf_cps > 0.0 && t_on > 0.0 && t_off >= 0.0 && theta_ns > 0.0)) {
        throw DomainError("infer_detection_efficiency: inputs must be positive");
    }
    return r_inf_cps * theta_ns * 1e-9 * (t_on + t_off) / t_on;
}

CorrectedG2 background_correct_g2(double g_measured_0, double signal_to_background, double sigma) {
    if (!(signal_to_background > 0.0)) throw DomainError("background_correct_g2: rho must be > 0");
    if (!(g_measured_0 >= 0.0)) throw DomainError("background_correct_g2: g2(0) must be >= 0");
    const double p = std::isinf(signal_to_background)
                         ? 1.0
                         : signal_to_background / (1.0 + signal_to_background);
    const double p2 = p * p;
    CorrectedG2 out;
    out.unclamped = (g_measured_0 - (1.0 - p2)) / p2;
    out.value = std::max(out.unclamped, 0.0);
    out.inconsistent = sigma > 0.0 && out.unclamped < -3.0 * sigma / p2;
    return out;
}

PLEOptimum ple_optimum(const PLETable& table, double filter_edge_nm, double guard_nm) {
    if (guard_nm < 0.0) throw ConfigError("ple_optimum: guard must be >= 0");
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        if (r.signal_rate_cps < 0.0 || r.background_rate_cps < 0.0) {
            throw ConfigError("ple_optimum: rates must be >= 0");
        }
        if (i > 0 && !(r.wavelength_nm > table.rows[i - 1].wavelength_nm)) {
            throw ConfigError("ple_optimum: wavelengths must be strictly increasing");
        }
    }
    const double limit = filter_edge_nm - guard_nm;
    bool found = false;
    PLEOptimum best;
    for (const auto& r : table.rows) {
        if (r.wavelength_nm > limit) break;
        const double ratio = r.background_rate_cps > 0.0
                                 ? r.signal_rate_cps / r.background_rate_cps
                                 : std::numeric_limits<double>::infinity();
        if (!found || ratio >= best.signal_to_background) {
            best = {r.wavelength_nm, ratio};
            found = true;
        }
    }
    if (!found) throw ConfigError("ple_optimum: no wavelength below the filter edge minus guard");
    return best;
}

}  // namespace spsim
