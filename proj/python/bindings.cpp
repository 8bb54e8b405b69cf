#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <tuple>

#include "spsim/config.hpp"
#include "spsim/correlate.hpp"
#include "spsim/errors.hpp"
#include "spsim/estimate.hpp"
#include "spsim/io.hpp"
#include "spsim/model.hpp"
#include "spsim/report.hpp"
#include "spsim/simulate.hpp"
#include "spsim/units.hpp"

namespace py = pybind11;
using namespace spsim;

namespace {

template <class T>
py::array_t<T> to_array(const std::vector<T>& v) {
    py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

template <class T>
std::vector<T> from_array(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
    return {a.data(), a.data() + a.size()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Triggered single-photon source simulation and photon-correlation analysis.";

    auto base = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    static py::exception<FormatError> format_error(m, "FormatError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const FormatError& e) {
            py::set_error(format_error, e.what());
        }
    });
    (void)base;

    py::class_<EmitterParams>(m, "EmitterParams")
        .def(py::init([](double lifetime_ns, double t_on_us, double t_off_us, double pump) {
                 EmitterParams e{lifetime_ns, t_on_us, t_off_us, pump};
                 e.validate();
                 return e;
             }),
             py::arg("radiative_lifetime_ns") = 2.1, py::arg("t_on_us") = 9.1,
             py::arg("t_off_us") = 7.0, py::arg("pump_coefficient") = 0.6)
        .def_readwrite("radiative_lifetime_ns", &EmitterParams::radiative_lifetime_ns)
        .def_readwrite("t_on_us", &EmitterParams::t_on_us)
        .def_readwrite("t_off_us", &EmitterParams::t_off_us)
        .def_readwrite("pump_coefficient", &EmitterParams::pump_coefficient);

    py::class_<DetectionParams>(m, "DetectionParams")
        .def(py::init([](double eta, double splitter, double background, double dead, double jitter) {
                 DetectionParams d;
                 d.overall_efficiency = eta;
                 d.splitter_ratio = splitter;
                 d.background_rate_cps = background;
                 d.dead_time_ns = dead;
                 d.jitter_sigma_ps = jitter;
                 d.validate();
                 return d;
             }),
             py::arg("overall_efficiency") = 0.0035, py::arg("splitter_ratio") = 0.5,
             py::arg("background_rate_cps") = 0.0, py::arg("dead_time_ns") = 50.0,
             py::arg("jitter_sigma_ps") = 150.0)
        .def_readwrite("overall_efficiency", &DetectionParams::overall_efficiency)
        .def_readwrite("splitter_ratio", &DetectionParams::splitter_ratio)
        .def_readwrite("background_rate_cps", &DetectionParams::background_rate_cps)
        .def_readwrite("dead_time_ns", &DetectionParams::dead_time_ns)
        .def_readwrite("jitter_sigma_ps", &DetectionParams::jitter_sigma_ps);

    py::class_<TimeTagStream>(m, "TimeTagStream")
        .def(py::init([](py::array_t<Tick> t1, py::array_t<Tick> t2, Tick duration) {
                 return merge_channels(from_array<Tick>(t1), from_array<Tick>(t2), duration);
             }),
             py::arg("channel1"), py::arg("channel2"), py::arg("duration_ps"))
        .def_property_readonly("timestamps", [](const TimeTagStream& s) { return to_array(s.timestamps); })
        .def_property_readonly("channels", [](const TimeTagStream& s) { return to_array(s.channels); })
        .def_readonly("duration", &TimeTagStream::duration)
        .def_readwrite("seed", &TimeTagStream::seed)
        .def_readwrite("metadata", &TimeTagStream::metadata)
        .def("channel", [](const TimeTagStream& s, int c) { return to_array(s.channel_timestamps(c)); })
        .def("count", &TimeTagStream::count)
        .def("rate_cps", &TimeTagStream::rate_cps)
        .def_property_readonly("duration_s", &TimeTagStream::duration_s)
        .def("__len__", &TimeTagStream::size)
        .def("__eq__", [](const TimeTagStream& a, const TimeTagStream& b) { return a == b; });

    py::class_<Histogram>(m, "Histogram")
        .def_readonly("bin_width", &Histogram::bin_width)
        .def_readonly("origin", &Histogram::origin)
        .def_readonly("total_pairs", &Histogram::total_pairs)
        .def_property_readonly("counts", [](const Histogram& h) { return to_array(h.counts); })
        .def_property_readonly("centers", [](const Histogram& h) {
            std::vector<double> c(h.size());
            for (std::size_t i = 0; i < h.size(); ++i) c[i] = h.bin_center(i);
            return to_array(c);
        })
        .def("__len__", &Histogram::size);

    py::class_<G2Curve>(m, "G2Curve")
        .def_property_readonly("tau_ps", [](const G2Curve& g) { return to_array(g.tau_ps); })
        .def_property_readonly("values", [](const G2Curve& g) { return to_array(g.values); })
        .def_property_readonly("sigma", [](const G2Curve& g) { return to_array(g.sigma); });

    py::class_<PeakSeries>(m, "PeakSeries")
        .def_readonly("m", &PeakSeries::m)
        .def_readonly("raw_counts", &PeakSeries::raw_counts)
        .def_readonly("normalized", &PeakSeries::normalized)
        .def_readonly("sigma", &PeakSeries::sigma)
        .def("index_of", &PeakSeries::index_of);

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("model", &FitResult::model)
        .def_readonly("converged", &FitResult::converged)
        .def_readonly("chi2", &FitResult::chi2)
        .def_readonly("dof", &FitResult::dof)
        .def_readonly("message", &FitResult::message)
        .def("value", &FitResult::value)
        .def("error", &FitResult::error)
        .def_property_readonly("parameters", [](const FitResult& f) {
            py::dict d;
            for (const auto& p : f.parameters) d[py::str(p.name)] = py::make_tuple(p.value, p.std_error, p.unit);
            return d;
        });

    py::enum_<Weighting>(m, "Weighting")
        .value("OBSERVED", Weighting::kObserved)
        .value("MODEL", Weighting::kModel);

    // Models
    m.def("eval_cn_model", &eval_cn_model, py::arg("m"), py::arg("t_on"), py::arg("t_off"), py::arg("theta"));
    m.def("eval_saturation",
          [](double p, double r_inf, double p_sat) { return eval_saturation(p, SaturationParams{r_inf, p_sat}); },
          py::arg("power_uw"), py::arg("r_inf_cps"), py::arg("p_sat_uw"));
    m.def("predicted_saturated_rate", &predicted_saturated_rate, py::arg("detection"), py::arg("emitter"),
          py::arg("rep_period_ns"));
    m.def("infer_detection_efficiency", &infer_detection_efficiency, py::arg("r_inf_cps"), py::arg("t_on"),
          py::arg("t_off"), py::arg("theta_ns"));

    // Simulation; durations in seconds.
    m.def(
        "simulate_pulsed",
        [](const EmitterParams& e, double rep_period_ns, double p_exc, const DetectionParams& d, double seconds,
           std::uint64_t seed) {
            py::gil_scoped_release nogil;
            return simulate_pulsed(e, ExcitationPulsed{rep_period_ns, p_exc}, d, s_to_ticks(seconds), seed);
        },
        py::arg("emitter"), py::arg("rep_period_ns"), py::arg("excitation_prob"), py::arg("detection"),
        py::arg("duration_s"), py::arg("seed"));
    m.def(
        "simulate_cw",
        [](const EmitterParams& e, double power_uw, const DetectionParams& d, double seconds, std::uint64_t seed) {
            py::gil_scoped_release nogil;
            return simulate_cw(e, ExcitationCW{power_uw, 765.0}, d, s_to_ticks(seconds), seed);
        },
        py::arg("emitter"), py::arg("power_uw"), py::arg("detection"), py::arg("duration_s"), py::arg("seed"));
    m.def(
        "simulate_coherent_pulsed",
        [](double rep_period_ns, double mu, const DetectionParams& d, double seconds, std::uint64_t seed) {
            py::gil_scoped_release nogil;
            return simulate_coherent_pulsed(rep_period_ns, mu, d, s_to_ticks(seconds), seed);
        },
        py::arg("rep_period_ns"), py::arg("mean_photons_per_pulse"), py::arg("detection"), py::arg("duration_s"),
        py::arg("seed"));

    // Correlation; times in ps.
    m.def("cross_correlation",
          [](const TimeTagStream& s, Tick w, Tick range) { return cross_correlation(s, w, range); },
          py::arg("stream"), py::arg("bin_width_ps"), py::arg("range_ps"));
    m.def("peak_correlation",
          [](const TimeTagStream& s, Tick theta, Tick w, long max_peak) {
              return cross_correlation(s, HistogramLayout::peak_aligned(theta, w, max_peak));
          },
          py::arg("stream"), py::arg("rep_period_ps"), py::arg("bin_width_ps"), py::arg("max_peak"));
    m.def("start_stop_histogram",
          [](const TimeTagStream& s, Tick w, Tick range) { return start_stop_histogram(s, w, range); },
          py::arg("stream"), py::arg("bin_width_ps"), py::arg("range_ps"));
    m.def("normalize_g2", &normalize_g2, py::arg("histogram"), py::arg("n1_cps"), py::arg("n2_cps"),
          py::arg("t_acq_s"));
    m.def("integrate_peaks", &integrate_peaks, py::arg("histogram"), py::arg("rep_period_ps"),
          py::arg("window_ps"));
    m.def("normalize_peak_counts", &normalize_peak_counts, py::arg("peaks"), py::arg("n1_cps"),
          py::arg("n2_cps"), py::arg("theta_s"), py::arg("t_acq_s"));
    m.def("pulse_delay_histogram", &pulse_delay_histogram, py::arg("stream"), py::arg("rep_period_ps"),
          py::arg("bin_width_ps"), py::arg("phase_ps") = 0);

    // Estimation
    m.def("fit_exponential_decay", &fit_exponential_decay, py::arg("histogram"), py::arg("window_start_ps"),
          py::arg("window_end_ps"), py::arg("weighting") = Weighting::kObserved);
    m.def("fit_antibunching_cw",
          [](const G2Curve& c, double irf_ps, Weighting w) { return fit_antibunching_cw(c, IRFModel{irf_ps}, w); },
          py::arg("curve"), py::arg("irf_sigma_ps") = 0.0, py::arg("weighting") = Weighting::kObserved);
    m.def("fit_blinking", &fit_blinking, py::arg("peaks"), py::arg("theta_ns"),
          py::arg("weighting") = Weighting::kObserved);
    m.def(
        "fit_saturation",
        [](const std::vector<double>& p, const std::vector<double>& r, std::vector<double> sigma) {
            if (p.size() != r.size() || (!sigma.empty() && sigma.size() != p.size())) {
                throw ConfigError("fit_saturation: powers, rates and sigmas differ in length");
            }
            std::vector<PowerPoint> pts;
            for (std::size_t i = 0; i < p.size(); ++i) pts.push_back({p[i], r[i], sigma.empty() ? 0.0 : sigma[i]});
            return fit_saturation(pts);
        },
        py::arg("powers_uw"), py::arg("rates_cps"), py::arg("sigmas_cps") = std::vector<double>{});
    m.def(
        "fit_rate_vs_power",
        [](const std::vector<double>& p, const std::vector<double>& rates) {
            if (p.size() != rates.size()) throw ConfigError("fit_rate_vs_power: lengths differ");
            std::vector<PowerPoint> pts;
            for (std::size_t i = 0; i < p.size(); ++i) pts.push_back({p[i], rates[i]});
            return fit_rate_vs_power(pts);
        },
        py::arg("powers_uw"), py::arg("decay_rates_per_ns"));
    m.def(
        "background_correct_g2",
        [](double g, double rho, double sigma) {
            const auto c = background_correct_g2(g, rho, sigma);
            return py::make_tuple(c.value, c.unclamped, c.inconsistent);
        },
        py::arg("g2_0"), py::arg("signal_to_background"), py::arg("sigma") = 0.0);

    m.def(
        "ple_optimum",
        [](const std::vector<std::tuple<double, double, double>>& rows, double edge_nm, double guard_nm) {
            PLETable t;
            for (const auto& [wl, sig, bg] : rows) t.rows.push_back({wl, sig, bg});
            const auto o = ple_optimum(t, edge_nm, guard_nm);
            return py::make_tuple(o.wavelength_nm, o.signal_to_background);
        },
        py::arg("rows"), py::arg("filter_edge_nm"), py::arg("guard_nm") = 15.0);

    // Files and reports
    m.def("write_timetags", py::overload_cast<const TimeTagStream&, const std::filesystem::path&>(&write_timetags),
          py::arg("stream"), py::arg("path"));
    m.def("read_timetags", py::overload_cast<const std::filesystem::path&>(&read_timetags), py::arg("path"));
    m.def("preset_names", &preset_names);
    m.def("preset_text", [](const std::string& name) { return preset_text(name); }, py::arg("name"));
    m.def(
        "run_report",
        [](const std::string& config_text, const std::filesystem::path& out_dir,
           std::optional<std::uint64_t> seed, const std::map<std::string, std::string>& overrides) {
            auto cfg = Config::parse(config_text);
            for (const auto& [k, v] : overrides) cfg.set(k, v);
            py::gil_scoped_release nogil;
            return run_report(cfg, out_dir, seed).report.dump();
        },
        py::arg("config_text"), py::arg("out_dir"), py::arg("seed") = std::nullopt,
        py::arg("overrides") = std::map<std::string, std::string>{});
}
