// spsim: simulate, correlate and fit two-channel photon time-tag data.
//
// Exit status: 0 success, 1 invalid input or configuration, 2 file I/O or
// format error, 3 a fit did not converge.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "spsim/config.hpp"
#include "spsim/correlate.hpp"
#include "spsim/errors.hpp"
#include "spsim/estimate.hpp"
#include "spsim/io.hpp"
#include "spsim/report.hpp"
#include "spsim/simulate.hpp"

namespace fs = std::filesystem;
using namespace spsim;

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kIo = 2, kNotConverged = 3 };

struct Globals {
    std::optional<std::uint64_t> seed;
    fs::path out_dir = ".";
    std::optional<fs::path> config;
    std::optional<std::string> preset;
    std::vector<std::string> overrides;
};

Config load_config(const Globals& g, bool required) {
    Config cfg;
    if (g.config && g.preset) throw ConfigError("--config and --preset are mutually exclusive");
    if (g.config) {
        cfg = Config::load(*g.config);
    } else if (g.preset) {
        cfg = Config::parse(preset_text(*g.preset));
    } else if (required) {
        throw ConfigError("a configuration is required (--config FILE or --preset NAME)");
    }
    for (const auto& kv : g.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("--set expects section.key=value, got '" + kv + "'");
        }
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

std::uint64_t resolve_seed(const Globals& g, const Config& cfg) {
    if (g.seed) return *g.seed;
    return cfg.has("run.seed") ? cfg.integer("run.seed") : 1;
}

Tick ticks_of(const std::string& text, std::string_view flag) {
    return ns_to_ticks(parse_quantity(text, Dimension::kTimeNs, flag));
}

fs::path in_out_dir(const Globals& g, const fs::path& name) {
    if (name.is_absolute() || name.has_parent_path()) return name;
    fs::create_directories(g.out_dir);
    return g.out_dir / name;
}

int emit_fit(const Globals& g, const FitResult& fit, const std::string& name) {
    const auto json = to_json(fit);
    const auto path = in_out_dir(g, name + ".json");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << json.dump(2) << "\n";
    out.close();
    export_csv(fit, in_out_dir(g, name + ".csv"));
    std::cout << json.dump(2) << "\n";
    if (!fit.converged) {
        std::cerr << "spsim: fit did not converge: " << fit.message << "\n";
        return kNotConverged;
    }
    return kOk;
}

struct SimulateArgs {
    std::string mode = "pulsed";
    std::string duration;
    std::string power;
    std::string output = "timetags.phft";
    double mean_photons = 0.1;
};

int run_simulate(const Globals& g, const SimulateArgs& a) {
    const auto cfg = load_config(g, true);
    const auto seed = resolve_seed(g, cfg);
    const auto det = detection_from(cfg);
    TimeTagStream stream;
    if (a.mode == "pulsed") {
        const auto emitter = emitter_from(cfg);
        const double theta = cfg.quantity("pulsed.rep_period", Dimension::kTimeNs);
        const double p_sat = cfg.quantity_or("pulsed.saturation_power", Dimension::kPowerUw, 66.0);
        const double power = a.power.empty() ? cfg.quantity("pulsed.power", Dimension::kPowerUw)
                                             : parse_quantity(a.power, Dimension::kPowerUw, "--power");
        const Tick duration = a.duration.empty()
                                  ? ns_to_ticks(cfg.quantity("pulsed.duration", Dimension::kTimeNs))
                                  : ticks_of(a.duration, "--duration");
        stream = simulate_pulsed(emitter, {theta, excitation_prob_from_power(power, p_sat)}, det,
                                 duration, seed);
    } else if (a.mode == "cw") {
        const auto emitter = emitter_from(cfg);
        if (a.power.empty()) throw ConfigError("--power is required for cw simulation");
        if (a.duration.empty() && !cfg.has("cw.duration")) {
            throw ConfigError("missing required field cw.duration (or --duration)");
        }
        const Tick duration = a.duration.empty()
                                  ? ns_to_ticks(cfg.quantity("cw.duration", Dimension::kTimeNs))
                                  : ticks_of(a.duration, "--duration");
        const ExcitationCW exc{parse_quantity(a.power, Dimension::kPowerUw, "--power"),
                               cfg.quantity_or("cw.wavelength", Dimension::kLengthNm, 765.0)};
        stream = simulate_cw(emitter, exc, det, duration, seed);
    } else {
        const double theta = cfg.quantity_or("pulsed.rep_period", Dimension::kTimeNs, 50.0);
        if (a.duration.empty()) throw ConfigError("--duration is required for coherent simulation");
        stream = simulate_coherent_pulsed(theta, a.mean_photons, det, ticks_of(a.duration, "--duration"),
                                          seed);
    }
    const auto path = in_out_dir(g, a.output);
    const auto bytes = write_timetags(stream, path);
    std::cout << path.string() << ": " << stream.size() << " records (" << stream.count(1) << " ch1, "
              << stream.count(2) << " ch2), " << bytes << " bytes, seed " << seed << "\n";
    return kOk;
}

struct CorrelateArgs {
    std::string input;
    std::string mode = "g2";
    std::string bin_width = "0.128 ns";
    std::string range = "50 ns";
    std::string rep_period = "50 ns";
    std::string window;
    long max_peak = 10;
    std::string output;
};

int run_correlate(const Globals& g, const CorrelateArgs& a) {
    const auto stream = read_timetags(fs::path(a.input));
    const Tick w = ticks_of(a.bin_width, "--bin-width");
    const double n1 = stream.rate_cps(1);
    const double n2 = stream.rate_cps(2);
    const double t_acq = stream.duration_s();
    std::string out_name = a.output;
    if (a.mode == "g2" || a.mode == "start-stop") {
        const Tick range = ticks_of(a.range, "--range");
        const auto hist = a.mode == "g2" ? cross_correlation(stream, w, range)
                                         : start_stop_histogram(stream, w, range);
        if (out_name.empty()) out_name = a.mode == "g2" ? "g2.csv" : "start_stop.csv";
        if (a.mode == "g2") {
            export_csv(normalize_g2(hist, n1, n2, t_acq), in_out_dir(g, out_name));
        } else {
            export_csv(hist, in_out_dir(g, out_name));
        }
    } else if (a.mode == "peaks") {
        const Tick theta = ticks_of(a.rep_period, "--rep-period");
        const Tick window = a.window.empty() ? theta : ticks_of(a.window, "--window");
        const auto hist = cross_correlation(stream, HistogramLayout::peak_aligned(theta, w, a.max_peak));
        const auto peaks = normalize_peak_counts(integrate_peaks(hist, theta, window), n1, n2,
                                                 static_cast<double>(theta) * 1e-12, t_acq);
        if (out_name.empty()) out_name = "peaks.csv";
        export_csv(peaks, in_out_dir(g, out_name));
    } else {
        const Tick theta = ticks_of(a.rep_period, "--rep-period");
        if (out_name.empty()) out_name = "decay.csv";
        export_csv(pulse_delay_histogram(stream, theta, w), in_out_dir(g, out_name));
    }
    std::cout << in_out_dir(g, out_name).string() << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spsim: triggered single-photon source simulation and analysis"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "Base random seed (overrides run.seed)");
    app.add_option("--out-dir", g.out_dir, "Directory for output files")->capture_default_str();
    app.add_option("--config", g.config, "Configuration file")->check(CLI::ExistingFile);
    app.add_option("--preset", g.preset, "Built-in configuration")
        ->check(CLI::IsMember(preset_names()));
    app.add_option("--set", g.overrides, "Override a configuration value: section.key=value");

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Generate a time-tag file");
    simulate->add_option("--mode", sim.mode, "pulsed, cw or coherent")
        ->check(CLI::IsMember({"pulsed", "cw", "coherent"}))
        ->capture_default_str();
    simulate->add_option("--duration", sim.duration, "Acquisition time, e.g. '10 s'");
    simulate->add_option("--power", sim.power, "Excitation power, e.g. '50 uW'");
    simulate->add_option("--mean-photons", sim.mean_photons,
                         "Mean photons per pulse (coherent mode)")
        ->capture_default_str();
    simulate->add_option("-o,--output", sim.output, "Output file")->capture_default_str();

    CorrelateArgs cor;
    auto* correlate = app.add_subcommand("correlate", "Histogram a time-tag file");
    correlate->add_option("-i,--input", cor.input, "Time-tag file")->required();
    correlate->add_option("--mode", cor.mode, "g2, start-stop, peaks or decay")
        ->check(CLI::IsMember({"g2", "start-stop", "peaks", "decay"}))
        ->capture_default_str();
    correlate->add_option("--bin-width", cor.bin_width)->capture_default_str();
    correlate->add_option("--range", cor.range)->capture_default_str();
    correlate->add_option("--rep-period", cor.rep_period)->capture_default_str();
    correlate->add_option("--window", cor.window, "Peak integration window (default: rep period)");
    correlate->add_option("--max-peak", cor.max_peak)->capture_default_str();
    correlate->add_option("-o,--output", cor.output, "Output CSV");

    std::string fit_input;
    std::string window_start = "0.5 ns";
    std::string window_end = "30 ns";
    auto* fit_lifetime = app.add_subcommand("fit-lifetime", "Fit a decay histogram CSV");
    fit_lifetime->add_option("-i,--input", fit_input, "Histogram CSV (tau_ps,counts)")->required();
    fit_lifetime->add_option("--window-start", window_start)->capture_default_str();
    fit_lifetime->add_option("--window-end", window_end)->capture_default_str();

    auto* fit_sat = app.add_subcommand("fit-saturation", "Fit rate vs power");
    fit_sat->add_option("-i,--input", fit_input, "CSV power_uw,rate_cps[,sigma_cps]")->required();

    std::string theta = "50 ns";
    auto* fit_blink = app.add_subcommand("fit-blinking", "Fit blinking dwell times to a peak table");
    fit_blink->add_option("-i,--input", fit_input, "Peak CSV (m,c_m,C_N)")->required();
    fit_blink->add_option("--rep-period", theta)->capture_default_str();

    std::string irf_sigma = "0 ns";
    auto* fit_g2 = app.add_subcommand("fit-g2", "Fit a cw antibunching curve");
    fit_g2->add_option("-i,--input", fit_input, "g2 CSV (tau_ps,value,sigma)")->required();
    fit_g2->add_option("--irf-sigma", irf_sigma, "Gaussian IRF width of the delay")
        ->capture_default_str();

    std::string weighting = "observed";
    for (auto* sub : {fit_lifetime, fit_blink, fit_g2}) {
        sub->add_option("--weighting", weighting, "observed (1/max(count,1)) or model variances")
            ->check(CLI::IsMember({"observed", "model"}))
            ->capture_default_str();
    }

    auto* report = app.add_subcommand("report", "Run a full pipeline and write a report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kValidation;
    }

    const Weighting wmode = weighting == "model" ? Weighting::kModel : Weighting::kObserved;
    try {
        if (*simulate) return run_simulate(g, sim);
        if (*correlate) return run_correlate(g, cor);
        if (*fit_lifetime) {
            const auto hist = read_histogram_csv(fs::path(fit_input));
            const auto fit = fit_exponential_decay(
                hist, static_cast<SignedTick>(ticks_of(window_start, "--window-start")),
                static_cast<SignedTick>(ticks_of(window_end, "--window-end")), wmode);
            return emit_fit(g, fit, "fit_lifetime");
        }
        if (*fit_sat) {
            const auto points = read_power_csv(fs::path(fit_input));
            return emit_fit(g, fit_saturation(points), "fit_saturation");
        }
        if (*fit_blink) {
            const auto peaks = read_peaks_csv(fs::path(fit_input));
            return emit_fit(g, fit_blinking(peaks, parse_quantity(theta, Dimension::kTimeNs, "--rep-period"), wmode),
                            "fit_blinking");
        }
        if (*fit_g2) {
            const auto curve = read_g2_csv(fs::path(fit_input));
            const IRFModel irf{parse_quantity(irf_sigma, Dimension::kTimeNs, "--irf-sigma") * 1e3};
            return emit_fit(g, fit_antibunching_cw(curve, irf, wmode), "fit_g2");
        }
        if (*report) {
            const auto cfg = load_config(g, true);
            const auto out = run_report(cfg, g.out_dir, g.seed);
            std::cout << (g.out_dir / "report.json").string() << "\n";
            if (!out.all_converged) {
                std::cerr << "spsim: at least one fit did not converge (see report.json)\n";
                return kNotConverged;
            }
            return kOk;
        }
    } catch (const IoError& e) {
        std::cerr << "spsim: " << e.what() << "\n";
        return kIo;
    } catch (const FormatError& e) {
        std::cerr << "spsim: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "spsim: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "spsim: " << e.what() << "\n";
        return kValidation;
    }
    return kValidation;
}
