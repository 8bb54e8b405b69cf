#include "spsim/report.hpp"

#include <cmath>
#include <fstream>

#include "spsim/correlate.hpp"
#include "spsim/errors.hpp"
#include "spsim/estimate.hpp"
#include "spsim/io.hpp"
#include "spsim/simulate.hpp"

namespace spsim {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::string_view kPaperPulsed = R"ini(# Pulsed excitation at 20 MHz: peak comb, blinking, lifetime and saturation.
[run]
pipeline = pulsed
seed = 2008

[emitter]
radiative_lifetime = 2.1 ns
t_on = 9.1 us
t_off = 7.0 us

[detection]
# R_inf = 35 kcps at theta = 50 ns for a 9.1/7.0 us duty cycle
efficiency = 0.0030962
splitter_ratio = 0.5
background = 700 cps
dead_time = 50 ns
jitter = 150 ps

[pulsed]
rep_period = 50 ns
saturation_power = 66 uW
power = 50 uW
duration = 100 s
saturation_powers = 6.6 uW, 13.2 uW, 26.4 uW, 52.8 uW, 79.2 uW, 132 uW, 198 uW, 264 uW
saturation_duration = 10 s
peak_bin_width = 1 ns
max_peak = 300
decay_bin_width = 0.1 ns
decay_fit_start = 0.5 ns
decay_fit_end = 30 ns
)ini";

constexpr std::string_view kPaperCw = R"ini(# Continuous-wave excitation at 765 nm: g2 dip vs power and the PLE optimum.
[run]
pipeline = cw
seed = 2008

[emitter]
radiative_lifetime = 2.0 ns
t_on = 9.1 us
t_off = 7.0 us
pump_coefficient = 0.6 /ns/mW

[detection]
efficiency = 0.003
splitter_ratio = 0.5
background = 400 cps
dead_time = 50 ns
jitter = 150 ps

[cw]
powers = 0.1 mW, 0.3 mW, 0.6 mW, 1.0 mW, 1.5 mW, 2.0 mW
duration = 20 s
wavelength = 765 nm
bin_width = 0.128 ns
range = 40 ns

[ple]
wavelengths = 700 nm, 710 nm, 720 nm, 730 nm, 740 nm, 750 nm, 755 nm, 760 nm, 765 nm, 770 nm
signal = 20 kcps, 26 kcps, 33 kcps, 40 kcps, 47 kcps, 54 kcps, 58 kcps, 61 kcps, 64 kcps, 66 kcps
background = 0.8 kcps, 0.8 kcps, 0.8 kcps, 0.8 kcps, 0.8 kcps, 0.8 kcps, 0.8 kcps, 0.8 kcps, 0.8 kcps, 1.0 kcps
filter_edge = 780 nm
guard = 15 nm
)ini";

json finite_or_null(double x) {
    if (std::isfinite(x)) return x;
    return nullptr;
}

class ArtifactWriter {
public:
    ArtifactWriter(fs::path dir, ReportOutput& out) : dir_(std::move(dir)), out_(out) {}

    template <class T>
    std::string csv(const std::string& name, const T& value) {
        export_csv(value, dir_ / name);
        out_.files.push_back(dir_ / name);
        return name;
    }

    std::string text(const std::string& name, const std::string& content) {
        std::ofstream f(dir_ / name, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open " + (dir_ / name).string() + " for writing");
        f << content;
        f.close();
        if (!f) throw IoError("failed to write " + (dir_ / name).string());
        out_.files.push_back(dir_ / name);
        return name;
    }

private:
    fs::path dir_;
    ReportOutput& out_;
};

Weighting weighting_from(const Config& cfg) {
    const auto w = cfg.string_or("fit.weighting", "observed");
    if (w == "observed") return Weighting::kObserved;
    if (w == "model") return Weighting::kModel;
    throw ConfigError("fit.weighting: expected observed or model, got '" + w + "'");
}

json fit_entry(const FitResult& fit, ReportOutput& out) {
    if (!fit.converged) out.all_converged = false;
    return to_json(fit);
}

json run_pulsed(const Config& cfg, std::uint64_t seed, ArtifactWriter& files, ReportOutput& out,
                json& fits) {
    const auto emitter = emitter_from(cfg);
    const auto det = detection_from(cfg);
    const double theta_ns = cfg.quantity("pulsed.rep_period", Dimension::kTimeNs);
    const double p_sat = cfg.quantity("pulsed.saturation_power", Dimension::kPowerUw);
    const double power = cfg.quantity("pulsed.power", Dimension::kPowerUw);
    const double duration_ns = cfg.quantity("pulsed.duration", Dimension::kTimeNs);
    const Tick peak_bin = ns_to_ticks(cfg.quantity_or("pulsed.peak_bin_width", Dimension::kTimeNs, 1.0));
    const auto max_peak = static_cast<long>(cfg.quantity_or("pulsed.max_peak", Dimension::kNumber, 300));
    const Tick decay_bin = ns_to_ticks(cfg.quantity_or("pulsed.decay_bin_width", Dimension::kTimeNs, 0.1));
    const double fit_start = cfg.quantity_or("pulsed.decay_fit_start", Dimension::kTimeNs, 0.5);
    const double fit_end = cfg.quantity_or("pulsed.decay_fit_end", Dimension::kTimeNs, 30.0);
    const Tick theta = ns_to_ticks(theta_ns);
    const Tick window = ns_to_ticks(cfg.quantity_or("pulsed.peak_window", Dimension::kTimeNs, theta_ns));

    const ExcitationPulsed exc{theta_ns, excitation_prob_from_power(power, p_sat)};
    const TimeTagStream stream =
        cfg.has("input.timetags")
            ? read_timetags(fs::path(cfg.raw("input.timetags")))
            : simulate_pulsed(emitter, exc, det, ns_to_ticks(duration_ns), seed);
    const double t_acq = stream.duration_s();
    const double n1 = stream.rate_cps(1);
    const double n2 = stream.rate_cps(2);

    json section;
    section["stream"] = {{"source", cfg.has("input.timetags") ? "file" : "simulated"},
                         {"seed", stream.seed},
                         {"duration_s", t_acq},
                         {"counts_ch1", stream.count(1)},
                         {"counts_ch2", stream.count(2)},
                         {"rate_ch1_cps", n1},
                         {"rate_ch2_cps", n2},
                         {"excitation_prob", exc.excitation_prob}};
    if (!(n1 > 0.0 && n2 > 0.0)) throw ConfigError("pulsed: a channel recorded no detections");

    const auto hist = cross_correlation(stream, HistogramLayout::peak_aligned(theta, peak_bin, max_peak));
    auto peaks = normalize_peak_counts(integrate_peaks(hist, theta, window), n1, n2,
                                       theta_ns * 1e-9, t_acq);
    section["artifacts"]["g2"] = files.csv("pulsed_g2.csv", normalize_g2(hist, n1, n2, t_acq));
    section["artifacts"]["peaks"] = files.csv("pulsed_peaks.csv", peaks);
    const auto centre = peaks.index_of(0);
    const auto first = peaks.index_of(1);
    section["C_N(0)"] = centre >= 0 ? json(peaks.normalized[centre]) : json(nullptr);
    section["C_N(1)"] = first >= 0 ? json(peaks.normalized[first]) : json(nullptr);

    // Uncorrelated background lowers the whole comb toward 1 by p1 p2.
    PeakSeries fit_peaks = peaks;
    const double bg = cfg.has("input.timetags") ? 0.0 : det.background_rate_cps;
    const bool correct = bg > 0.0 && cfg.string_or("pulsed.correct_background", "true") == "true";
    if (correct) {
        const double p12 = ((n1 - bg) / n1) * ((n2 - bg) / n2);
        for (std::size_t i = 0; i < fit_peaks.m.size(); ++i) {
            fit_peaks.normalized[i] = (fit_peaks.normalized[i] - (1.0 - p12)) / p12;
            fit_peaks.sigma[i] /= p12;
        }
        section["signal_fraction_product"] = p12;
        section["C_N(0)_background_corrected"] =
            centre >= 0 ? json(fit_peaks.normalized[centre]) : json(nullptr);
    }
    const auto blinking = fit_blinking(fit_peaks, theta_ns, weighting_from(cfg));
    fits["blinking"] = fit_entry(blinking, out);

    const auto decay = pulse_delay_histogram(stream, theta, decay_bin);
    section["artifacts"]["decay"] = files.csv("pulsed_decay.csv", decay);
    const auto lifetime = fit_exponential_decay(decay, static_cast<SignedTick>(ns_to_ticks(fit_start)),
                                                static_cast<SignedTick>(ns_to_ticks(fit_end)),
                                                weighting_from(cfg));
    fits["lifetime"] = fit_entry(lifetime, out);

    json estimates = {{"t_on_us", finite_or_null(blinking.value("t_on"))},
                      {"t_off_us", finite_or_null(blinking.value("t_off"))},
                      {"lifetime_ns", finite_or_null(lifetime.value("lifetime"))}};

    if (cfg.has("pulsed.saturation_powers")) {
        const auto powers = cfg.quantity_list("pulsed.saturation_powers", Dimension::kPowerUw);
        const double sat_duration_ns =
            cfg.quantity_or("pulsed.saturation_duration", Dimension::kTimeNs, duration_ns);
        std::vector<PowerPoint> points;
        std::string table = "power_uw,rate_cps,sigma_cps\n";
        for (std::size_t i = 0; i < powers.size(); ++i) {
            const ExcitationPulsed e{theta_ns, excitation_prob_from_power(powers[i], p_sat)};
            const auto s = simulate_pulsed(emitter, e, det, ns_to_ticks(sat_duration_ns), seed + 1 + i);
            const auto counts = static_cast<double>(s.size());
            const double t = s.duration_s();
            PowerPoint p{powers[i], counts / t - 2.0 * det.background_rate_cps,
                         std::sqrt(std::max(counts, 1.0)) / t};
            points.push_back(p);
            table += format_double(p.power_uw) + "," + format_double(p.value) + "," +
                     format_double(p.sigma) + "\n";
        }
        section["artifacts"]["saturation"] = files.text("saturation.csv", table);
        const auto saturation = fit_saturation(points);
        fits["saturation"] = fit_entry(saturation, out);
        estimates["R_inf_cps"] = finite_or_null(saturation.value("R_inf"));
        estimates["P_sat_uw"] = finite_or_null(saturation.value("P_sat"));
        if (saturation.converged && blinking.converged) {
            estimates["eta_det"] = infer_detection_efficiency(
                saturation.value("R_inf"), blinking.value("t_on"), blinking.value("t_off"), theta_ns);
        } else {
            estimates["eta_det"] = nullptr;
        }
    }
    section["estimates"] = estimates;
    return section;
}

json run_cw(const Config& cfg, std::uint64_t seed, ArtifactWriter& files, ReportOutput& out,
            json& fits) {
    const auto emitter = emitter_from(cfg);
    const auto det = detection_from(cfg);
    const auto powers = cfg.quantity_list("cw.powers", Dimension::kPowerUw);
    const double duration_ns = cfg.quantity("cw.duration", Dimension::kTimeNs);
    const double wavelength = cfg.quantity_or("cw.wavelength", Dimension::kLengthNm, 765.0);
    const Tick bin = ns_to_ticks(cfg.quantity_or("cw.bin_width", Dimension::kTimeNs, 0.128));
    const Tick range = ns_to_ticks(cfg.quantity_or("cw.range", Dimension::kTimeNs, 20.0));
    const IRFModel irf{cfg.quantity_or("cw.irf_sigma", Dimension::kTimeNs,
                                       std::sqrt(2.0) * det.jitter_sigma_ps * 1e-3) * 1e3};

    json section;
    section["irf_sigma_ps"] = irf.sigma_ps;
    json runs = json::array();
    json g2_fits = json::array();
    std::vector<PowerPoint> rates;
    std::string table = "power_uw,rate_per_ns,sigma_per_ns\n";
    for (std::size_t i = 0; i < powers.size(); ++i) {
        const auto stream = simulate_cw(emitter, ExcitationCW{powers[i], wavelength}, det,
                                        ns_to_ticks(duration_ns), seed + 100 + i);
        const double n1 = stream.rate_cps(1);
        const double n2 = stream.rate_cps(2);
        if (!(n1 > 0.0 && n2 > 0.0)) throw ConfigError("cw: a channel recorded no detections");
        const auto curve = normalize_g2(cross_correlation(stream, bin, range), n1, n2, stream.duration_s());
        const std::string name = "cw_g2_" + std::to_string(i) + ".csv";
        files.csv(name, curve);
        const auto fit = fit_antibunching_cw(curve, irf, weighting_from(cfg));
        g2_fits.push_back(fit_entry(fit, out));

        json run = {{"power_uw", powers[i]},
                    {"seed", stream.seed},
                    {"rate_ch1_cps", n1},
                    {"rate_ch2_cps", n2},
                    {"g2_file", name},
                    {"decay_time_ns", finite_or_null(fit.value("decay_time"))},
                    {"g0", finite_or_null(fit.value("g0"))},
                    {"plateau", finite_or_null(fit.value("plateau"))}};
        if (det.background_rate_cps > 0.0 && fit.converged) {
            const double signal = 0.5 * (n1 + n2) - det.background_rate_cps;
            if (signal > 0.0) {
                const double rho = signal / det.background_rate_cps;
                const auto corrected = background_correct_g2(std::max(fit.value("g0"), 0.0), rho,
                                                             fit.error("g0"));
                run["signal_to_background"] = rho;
                run["g0_background_corrected"] = corrected.value;
                run["g0_correction_inconsistent"] = corrected.inconsistent;
            }
        }
        runs.push_back(run);
        if (fit.converged) {
            const double t = fit.value("decay_time");
            PowerPoint p{powers[i], 1.0 / t, fit.error("decay_time") / (t * t)};
            rates.push_back(p);
            table += format_double(p.power_uw) + "," + format_double(p.value) + "," +
                     format_double(p.sigma) + "\n";
        }
    }
    section["runs"] = runs;
    fits["antibunching_cw"] = g2_fits;
    section["artifacts"]["rate_vs_power"] = files.text("cw_rate_vs_power.csv", table);
    if (rates.size() >= 2) {
        const auto line = fit_rate_vs_power(rates);
        fits["rate_vs_power"] = fit_entry(line, out);
        section["estimates"] = {{"lifetime_ns", finite_or_null(line.value("lifetime"))},
                                {"slope_per_ns_uw", finite_or_null(line.value("slope"))}};
    } else {
        out.all_converged = false;
        section["estimates"] = {{"lifetime_ns", nullptr}, {"slope_per_ns_uw", nullptr}};
    }
    return section;
}

PLETable ple_table_from(const Config& cfg) {
    PLETable table;
    if (cfg.has("ple.table")) {
        for (const auto& p : read_power_csv(fs::path(cfg.raw("ple.table")))) {
            // read_power_csv gives (x, y, sigma) = (wavelength, signal, background)
            table.rows.push_back({p.power_uw, p.value, p.sigma});
        }
    } else {
        const auto wl = cfg.quantity_list("ple.wavelengths", Dimension::kLengthNm);
        const auto signal = cfg.quantity_list("ple.signal", Dimension::kRateCps);
        const auto background = cfg.quantity_list("ple.background", Dimension::kRateCps);
        if (signal.size() != wl.size() || background.size() != wl.size()) {
            throw ConfigError("ple: wavelengths, signal and background lists differ in length");
        }
        for (std::size_t i = 0; i < wl.size(); ++i) table.rows.push_back({wl[i], signal[i], background[i]});
    }
    table.validate();
    return table;
}

json run_ple(const Config& cfg, ArtifactWriter& files) {
    const auto table = ple_table_from(cfg);
    const double edge = cfg.quantity_or("ple.filter_edge", Dimension::kLengthNm, 780.0);
    const double guard = cfg.quantity_or("ple.guard", Dimension::kLengthNm, 15.0);
    const auto best = ple_optimum(table, edge, guard);
    std::string csv = "wavelength_nm,signal_cps,background_cps,signal_to_background\n";
    for (const auto& r : table.rows) {
        csv += format_double(r.wavelength_nm) + "," + format_double(r.signal_rate_cps) + "," +
               format_double(r.background_rate_cps) + "," +
               format_double(r.background_rate_cps > 0.0 ? r.signal_rate_cps / r.background_rate_cps
                                                         : std::nan("")) +
               "\n";
    }
    return {{"optimum_wavelength_nm", best.wavelength_nm},
            {"signal_to_background", finite_or_null(best.signal_to_background)},
            {"filter_edge_nm", edge},
            {"guard_nm", guard},
            {"artifact", files.text("ple.csv", csv)}};
}

}  // namespace

std::vector<std::string> preset_names() { return {"paper-pulsed", "paper-cw"}; }

std::string preset_text(std::string_view name) {
    if (name == "paper-pulsed") return std::string(kPaperPulsed);
    if (name == "paper-cw") return std::string(kPaperCw);
    throw ConfigError("unknown preset '" + std::string(name) + "' (known: paper-pulsed, paper-cw)");
}

ReportOutput run_report(const Config& cfg, const fs::path& out_dir,
                        std::optional<std::uint64_t> seed_override) {
    const std::string pipeline = cfg.raw("run.pipeline");
    if (pipeline != "pulsed" && pipeline != "cw" && pipeline != "full") {
        throw ConfigError("run.pipeline: expected pulsed, cw or full, got '" + pipeline + "'");
    }
    const std::uint64_t seed = seed_override ? *seed_override : cfg.integer("run.seed");
    // Fail on configuration errors before any simulation work.
    emitter_from(cfg);
    detection_from(cfg);
    weighting_from(cfg);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

    ReportOutput out;
    ArtifactWriter files(out_dir, out);
    json report;
    report["schema"] = "spsim-report/1";
    report["pipeline"] = pipeline;
    report["seed"] = seed;
    json config = json::object();
    for (const auto& [k, v] : cfg.values()) config[k] = v;
    report["config"] = config;
    json fits = json::object();

    if (pipeline == "pulsed" || pipeline == "full") report["pulsed"] = run_pulsed(cfg, seed, files, out, fits);
    if (pipeline == "cw" || pipeline == "full") report["cw"] = run_cw(cfg, seed, files, out, fits);
    if (cfg.has("ple.table") || cfg.has("ple.wavelengths")) report["ple"] = run_ple(cfg, files);

    report["fits"] = fits;
    report["all_converged"] = out.all_converged;
    files.text("fits.json", fits.dump(2) + "\n");
    files.text("report.json", report.dump(2) + "\n");
    out.report = std::move(report);
    return out;
}

}  // namespace spsim
