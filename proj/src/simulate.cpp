#include "spsim/simulate.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <string>

#include "spsim/errors.hpp"

namespace spsim {

namespace {

enum StreamId : std::uint64_t {
    kTelegraphStream = 1,
    kEmissionStream = 2,
    kDetectionStream = 3,
    kBackgroundStream = 4,
    kThinningStream = 5,
    kJitterStream = 6,
};

std::string num(double x) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

void describe(std::map<std::string, std::string>& meta, const EmitterParams& e) {
    meta["emitter.radiative_lifetime_ns"] = num(e.radiative_lifetime_ns);
    meta["emitter.t_on_us"] = num(e.t_on_us);
    meta["emitter.t_off_us"] = num(e.t_off_us);
    meta["emitter.pump_coefficient_per_ns_mw"] = num(e.pump_coefficient);
}

void describe(std::map<std::string, std::string>& meta, const DetectionParams& d) {
    meta["detection.efficiency"] = num(d.overall_efficiency);
    meta["detection.splitter_ratio"] = num(d.splitter_ratio);
    meta["detection.background_cps"] = num(d.background_rate_cps);
    meta["detection.dead_time_ns"] = num(d.dead_time_ns);
    meta["detection.jitter_ps"] = num(d.jitter_sigma_ps);
}

Tick dead_time_ticks(const DetectionParams& det) {
    return std::max<Tick>(static_cast<Tick>(std::llround(det.dead_time_ns * kPsPerNs)), 1);
}

void add_background(std::vector<Tick>& events, double rate_cps, Tick duration,
                    std::mt19937_64& rng) {
    if (rate_cps <= 0.0) return;
    const auto first_new = static_cast<std::ptrdiff_t>(events.size());
    std::exponential_distribution<double> gap(rate_cps / kPsPerS);
    const auto limit = static_cast<double>(duration);
    for (double t = gap(rng); t < limit; t += gap(rng)) {
        events.push_back(static_cast<Tick>(t));
    }
    std::inplace_merge(events.begin(), events.begin() + first_new, events.end());
}

void add_jitter(std::vector<Tick>& events, double sigma_ps, Tick duration, std::mt19937_64& rng) {
    if (sigma_ps <= 0.0) return;
    std::normal_distribution<double> noise(0.0, sigma_ps);
    const auto limit = static_cast<double>(duration);
    std::size_t kept = 0;
    for (const Tick t : events) {
        const double shifted = std::round(static_cast<double>(t) + noise(rng));
        if (shifted >= 0.0 && shifted < limit) events[kept++] = static_cast<Tick>(shifted);
    }
    events.resize(kept);
    std::sort(events.begin(), events.end());
}

void prune_dead_time(std::vector<Tick>& events, Tick separation) {
    if (events.empty()) return;
    std::size_t kept = 1;
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (events[i] - events[kept - 1] >= separation) events[kept++] = events[i];
    }
    events.resize(kept);
}

// Background, jitter and dead time on already-routed channels.
TimeTagStream finish_channels(std::array<std::vector<Tick>, 2> channels, const DetectionParams& det,
                              Tick duration, std::uint64_t seed) {
    auto background_rng = make_engine(seed, kBackgroundStream);
    for (auto& ch : channels) add_background(ch, det.background_rate_cps, duration, background_rng);

    auto jitter_rng = make_engine(seed, kJitterStream);
    const Tick separation = dead_time_ticks(det);
    for (auto& ch : channels) {
        add_jitter(ch, det.jitter_sigma_ps, duration, jitter_rng);
        prune_dead_time(ch, separation);
    }
    TimeTagStream out = merge_channels(channels[0], channels[1], duration);
    out.seed = seed;
    describe(out.metadata, det);
    return out;
}

void require_sorted(std::span<const Tick> epochs, Tick duration) {
    if (!std::is_sorted(epochs.begin(), epochs.end())) {
        throw ConfigError("detection chain: emission epochs must be sorted");
    }
    if (!epochs.empty() && epochs.back() >= duration) {
        throw ConfigError("detection chain: emission epochs must lie within [0, duration)");
    }
}

template <class NextSegment>
std::vector<Tick> pulsed_core(NextSegment&& next_segment, Tick theta, Tick duration,
                              PulseDecisionSource& decisions) {
    std::vector<Tick> out;
    auto gap = decisions.next_gap();
    if (!gap) return out;
    std::uint64_t remaining = *gap;
    const auto limit = static_cast<double>(duration);
    while (auto seg = next_segment()) {
        if (!seg->on) continue;
        std::uint64_t k = (seg->start + theta - 1) / theta;
        const std::uint64_t k_end = (seg->end + theta - 1) / theta;
        while (k < k_end) {
            if (remaining < k_end - k) {
                k += remaining;
                const double t = static_cast<double>(k * theta) + decisions.next_delay_ps();
                if (t < limit) out.push_back(static_cast<Tick>(t));
                ++k;
                gap = decisions.next_gap();
                if (!gap) {
                    std::sort(out.begin(), out.end());
                    return out;
                }
                remaining = *gap;
            } else {
                remaining -= k_end - k;
                k = k_end;
            }
        }
    }
    // A long radiative delay can push a photon past the next pulse's photon.
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32)};
    return std::mt19937_64(seq);
}

TelegraphSampler::TelegraphSampler(const EmitterParams& emitter, Tick duration, std::uint64_t seed)
    : rng_(make_engine(seed, kTelegraphStream)),
      on_dwell_(1.0 / us_to_ps(emitter.t_on_us)),
      off_dwell_(1.0 / us_to_ps(emitter.t_off_us)),
      duration_(duration) {
    if (!(emitter.t_on_us > 0.0 && emitter.t_off_us > 0.0)) {
        throw ConfigError("telegraph: dwell times must be > 0");
    }
    std::bernoulli_distribution start_on(emitter.t_on_us / (emitter.t_on_us + emitter.t_off_us));
    state_on_ = start_on(rng_);
}

std::optional<TelegraphSegment> TelegraphSampler::next_raw() {
    if (done_) return std::nullopt;
    const auto start = static_cast<Tick>(clock_ps_);
    clock_ps_ += state_on_ ? on_dwell_(rng_) : off_dwell_(rng_);
    Tick end;
    if (clock_ps_ >= static_cast<double>(duration_)) {
        end = duration_;
        done_ = true;
    } else {
        end = static_cast<Tick>(clock_ps_);
    }
    TelegraphSegment seg{state_on_, start, end};
    state_on_ = !state_on_;
    return seg;
}

std::optional<TelegraphSegment> TelegraphSampler::next() {
    while (true) {
        auto raw = next_raw();
        if (!raw) {
            auto out = pending_;
            pending_.reset();
            return out;
        }
        if (raw->length() == 0) continue;
        if (!pending_) {
            pending_ = raw;
        } else if (pending_->on == raw->on) {
            pending_->end = raw->end;
        } else {
            auto out = pending_;
            pending_ = raw;
            return out;
        }
    }
}

TelegraphTrace sample_telegraph(const EmitterParams& emitter, Tick duration, std::uint64_t seed) {
    if (duration == 0) throw ConfigError("sample_telegraph: duration must be > 0");
    TelegraphSampler sampler(emitter, duration, seed);
    TelegraphTrace trace;
    while (auto seg = sampler.next()) trace.push_back(*seg);
    return trace;
}

double on_fraction(const TelegraphTrace& trace) {
    if (trace.empty()) return 0.0;
    Tick on = 0;
    for (const auto& seg : trace) {
        if (seg.on) on += seg.length();
    }
    return static_cast<double>(on) / static_cast<double>(trace.back().end);
}

RandomPulseDecisions::RandomPulseDecisions(double success_prob, double lifetime_ps,
                                           std::uint64_t seed)
    : rng_(make_engine(seed, kEmissionStream)), q_(success_prob), delay_(1.0 / lifetime_ps) {
    if (q_ > 0.0 && q_ < 1.0) gap_.emplace(q_);
}

std::optional<std::uint64_t> RandomPulseDecisions::next_gap() {
    if (q_ <= 0.0) return std::nullopt;
    if (!gap_) return 0;
    return (*gap_)(rng_);
}

double RandomPulseDecisions::next_delay_ps() { return delay_(rng_); }

RecordedPulseDecisions::RecordedPulseDecisions(std::vector<std::uint64_t> gaps,
                                               std::vector<double> delays_ps)
    : gaps_(std::move(gaps)), delays_(std::move(delays_ps)) {}

std::optional<std::uint64_t> RecordedPulseDecisions::next_gap() {
    if (gap_pos_ >= gaps_.size()) return std::nullopt;
    return gaps_[gap_pos_++];
}

double RecordedPulseDecisions::next_delay_ps() {
    if (delay_pos_ >= delays_.size()) throw ConfigError("recorded decisions: delays exhausted");
    return delays_[delay_pos_++];
}

std::vector<Tick> pulsed_emission_epochs(const TelegraphTrace& trace, Tick rep_period,
                                         Tick duration, PulseDecisionSource& decisions) {
    if (rep_period == 0) throw ConfigError("pulsed: rep_period must be > 0");
    std::size_t pos = 0;
    auto next = [&]() -> std::optional<TelegraphSegment> {
        if (pos >= trace.size()) return std::nullopt;
        return trace[pos++];
    };
    return pulsed_core(next, rep_period, duration, decisions);
}

namespace detail {

TimeTagStream detect_thinned(std::span<const Tick> detected_epochs, const DetectionParams& det,
                             Tick duration, std::uint64_t seed) {
    det.validate();
    require_sorted(detected_epochs, duration);
    auto rng = make_engine(seed, kDetectionStream);
    std::bernoulli_distribution to_first(det.splitter_ratio);
    std::array<std::vector<Tick>, 2> channels;
    for (const Tick t : detected_epochs) channels[to_first(rng) ? 0 : 1].push_back(t);
    return finish_channels(std::move(channels), det, duration, seed);
}

}  // namespace detail

TimeTagStream apply_detection_chain(std::span<const Tick> emission_epochs,
                                    const DetectionParams& det, Tick duration,
                                    std::uint64_t seed) {
    det.validate();
    require_sorted(emission_epochs, duration);
    auto rng = make_engine(seed, kThinningStream);
    std::bernoulli_distribution keep(det.overall_efficiency);
    std::vector<Tick> detected;
    for (const Tick t : emission_epochs) {
        if (keep(rng)) detected.push_back(t);
    }
    auto out = detail::detect_thinned(detected, det, duration, seed);
    out.metadata["mode"] = "detection-chain";
    return out;
}

TimeTagStream simulate_cw(const EmitterParams& emitter, const ExcitationCW& exc,
                          const DetectionParams& det, Tick duration, std::uint64_t seed) {
    emitter.validate();
    exc.validate();
    det.validate();
    if (duration < us_to_ticks(1.0)) throw ConfigError("simulate_cw: duration must be >= 1 us");

    const double pump_rate = emitter.pump_coefficient * exc.power_uw * 1e-3 / kPsPerNs;
    const double decay_rate = 1.0 / ns_to_ps(emitter.radiative_lifetime_ns);
    const double eta = det.overall_efficiency;

    std::vector<Tick> detected;
    if (pump_rate > 0.0 && eta > 0.0) {
        auto rng = make_engine(seed, kEmissionStream);
        std::optional<std::geometric_distribution<std::uint64_t>> skipped;
        if (eta < 1.0) skipped.emplace(eta);
        // Delay to the next detected emission: N pump+decay cycles, N >= 1
        // geometric, so the two stages are Gamma(N) distributed.
        auto next_delay = [&]() {
            const double cycles = 1.0 + static_cast<double>(skipped ? (*skipped)(rng) : 0);
            std::gamma_distribution<double> pump(cycles, 1.0 / pump_rate);
            std::gamma_distribution<double> decay(cycles, 1.0 / decay_rate);
            return pump(rng) + decay(rng);
        };

        // The emission cycle advances in ON time only; OFF spans freeze it.
        TelegraphSampler telegraph(emitter, duration, seed);
        double on_before = 0.0;
        double next_on_time = next_delay();
        while (auto seg = telegraph.next()) {
            if (!seg->on) continue;
            const auto len = static_cast<double>(seg->length());
            while (next_on_time < on_before + len) {
                const double t = static_cast<double>(seg->start) + (next_on_time - on_before);
                detected.push_back(static_cast<Tick>(t));
                next_on_time += next_delay();
            }
            on_before += len;
        }
    }

    auto out = detail::detect_thinned(detected, det, duration, seed);
    out.metadata["mode"] = "cw";
    out.metadata["cw.power_uw"] = num(exc.power_uw);
    out.metadata["cw.wavelength_nm"] = num(exc.wavelength_nm);
    describe(out.metadata, emitter);
    return out;
}

TimeTagStream simulate_pulsed(const EmitterParams& emitter, const ExcitationPulsed& exc,
                              const DetectionParams& det, Tick duration, std::uint64_t seed) {
    emitter.validate();
    exc.validate();
    det.validate();
    if (!(exc.rep_period_ns > 10.0 * emitter.radiative_lifetime_ns)) {
        throw ConfigError("simulate_pulsed: rep_period must exceed 10 radiative lifetimes");
    }
    const Tick theta = ns_to_ticks(exc.rep_period_ns);
    const double q = exc.excitation_prob * det.overall_efficiency;
    RandomPulseDecisions decisions(q, ns_to_ps(emitter.radiative_lifetime_ns), seed);
    TelegraphSampler telegraph(emitter, duration, seed);
    auto detected = pulsed_core([&] { return telegraph.next(); }, theta, duration, decisions);

    auto out = detail::detect_thinned(detected, det, duration, seed);
    out.metadata["mode"] = "pulsed";
    out.metadata["pulsed.rep_period_ns"] = num(exc.rep_period_ns);
    out.metadata["pulsed.excitation_prob"] = num(exc.excitation_prob);
    describe(out.metadata, emitter);
    return out;
}

TimeTagStream simulate_coherent_pulsed(double rep_period_ns, double mean_photons_per_pulse,
                                       const DetectionParams& det, Tick duration,
                                       std::uint64_t seed) {
    det.validate();
    if (!(rep_period_ns > 0.0)) throw ConfigError("coherent: rep_period must be > 0");
    if (!(mean_photons_per_pulse >= 0.0)) throw ConfigError("coherent: mean photons must be >= 0");
    const Tick theta = ns_to_ticks(rep_period_ns);
    const std::uint64_t pulses = (duration + theta - 1) / theta;

    std::array<std::vector<Tick>, 2> channels;
    const std::array<double, 2> share{det.splitter_ratio, 1.0 - det.splitter_ratio};
    for (std::size_t c = 0; c < 2; ++c) {
        // Independent Poisson photon numbers per channel and pulse.
        const double mu = mean_photons_per_pulse * det.overall_efficiency * share[c];
        const double q = -std::expm1(-mu);
        if (q <= 0.0) continue;
        auto rng = make_engine(seed, kEmissionStream + 16 * (c + 1));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::geometric_distribution<std::uint64_t> gap(std::min(q, 1.0 - 1e-16));
        for (std::uint64_t k = gap(rng); k < pulses; k += 1 + gap(rng)) {
            // Photon number conditioned on >= 1, by inversion.
            double u = unit(rng) * q;
            double p = std::exp(-mu) * mu;
            std::uint64_t n = 1;
            while (u > p && n < 64) {
                u -= p;
                ++n;
                p *= mu / static_cast<double>(n);
            }
            for (std::uint64_t i = 0; i < n; ++i) channels[c].push_back(k * theta);
        }
    }
    auto out = finish_channels(std::move(channels), det, duration, seed);
    out.metadata["mode"] = "coherent-pulsed";
    out.metadata["pulsed.rep_period_ns"] = num(rep_period_ns);
    out.metadata["coherent.mean_photons_per_pulse"] = num(mean_photons_per_pulse);
    return out;
}

}  // namespace spsim
