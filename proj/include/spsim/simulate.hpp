#pragma once

// Kinetic Monte Carlo generators of two-channel detection streams for a
// blinking single emitter (cw and pulsed excitation) and for attenuated laser
// pulses, followed by a shared detector model.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "spsim/model.hpp"
#include "spsim/timetag.hpp"

namespace spsim {

struct TelegraphSegment {
    bool on;
    Tick start;
    Tick end;  ///< exclusive

    Tick length() const noexcept { return end - start; }
    bool operator==(const TelegraphSegment&) const = default;
};

/// Contiguous, alternating ON/OFF segments covering [0, duration).
using TelegraphTrace = std::vector<TelegraphSegment>;

/// Engine for one named random sub-stream of a seeded run.
std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id);

/// Lazily generated blinking trace. Dwell times are exponential with means
/// t_on/t_off, the initial state is drawn from the stationary distribution,
/// and segments that round to zero ticks are merged into their neighbours.
class TelegraphSampler {
public:
    TelegraphSampler(const EmitterParams& emitter, Tick duration, std::uint64_t seed);

    /// Next segment, or nullopt once the trace has reached the duration.
    std::optional<TelegraphSegment> next();

private:
    std::optional<TelegraphSegment> next_raw();

    std::mt19937_64 rng_;
    std::exponential_distribution<double> on_dwell_;
    std::exponential_distribution<double> off_dwell_;
    Tick duration_;
    double clock_ps_ = 0.0;
    bool state_on_;
    std::optional<TelegraphSegment> pending_;
    bool done_ = false;
};

TelegraphTrace sample_telegraph(const EmitterParams& emitter, Tick duration, std::uint64_t seed);

/// Fraction of [0, duration) spent ON.
double on_fraction(const TelegraphTrace& trace);

/// Random choices consumed by the pulsed generator: how many ON pulses to
/// skip before the next emitting pulse, and the radiative delay of that photon.
class PulseDecisionSource {
public:
    virtual ~PulseDecisionSource() = default;
    /// Number of non-emitting ON pulses before the next emitting one, or
    /// nullopt when no further pulse emits.
    virtual std::optional<std::uint64_t> next_gap() = 0;
    virtual double next_delay_ps() = 0;
};

/// Geometric gaps with per-pulse success probability q, exponential delays.
class RandomPulseDecisions final : public PulseDecisionSource {
public:
    RandomPulseDecisions(double success_prob, double lifetime_ps, std::uint64_t seed);
    std::optional<std::uint64_t> next_gap() override;
    double next_delay_ps() override;

private:
    std::mt19937_64 rng_;
    double q_;
    std::optional<std::geometric_distribution<std::uint64_t>> gap_;
    std::exponential_distribution<double> delay_;
};

/// Replays a recorded decision sequence.
class RecordedPulseDecisions final : public PulseDecisionSource {
public:
    RecordedPulseDecisions(std::vector<std::uint64_t> gaps, std::vector<double> delays_ps);
    std::optional<std::uint64_t> next_gap() override;
    double next_delay_ps() override;

private:
    std::vector<std::uint64_t> gaps_;
    std::vector<double> delays_;
    std::size_t gap_pos_ = 0;
    std::size_t delay_pos_ = 0;
};

/// Event-skipping pulsed emission: pulses sit at k * rep_period, only pulses
/// starting inside an ON segment may emit, and the gap to the next emitting
/// pulse is taken from `decisions`. Cost scales with the number of emissions
/// and segments, not with the number of pulses.
std::vector<Tick> pulsed_emission_epochs(const TelegraphTrace& trace, Tick rep_period,
                                         Tick duration, PulseDecisionSource& decisions);

/// Detection chain: thinning by the overall efficiency, beamsplitter routing,
/// Poisson background per channel, Gaussian jitter with re-sort, then
/// non-paralyzable dead-time pruning. Throws ConfigError on unsorted epochs.
TimeTagStream apply_detection_chain(std::span<const Tick> emission_epochs,
                                    const DetectionParams& det, Tick duration,
                                    std::uint64_t seed);

/// Continuous-wave emission under pump power `exc.power_uw`.
TimeTagStream simulate_cw(const EmitterParams& emitter, const ExcitationCW& exc,
                          const DetectionParams& det, Tick duration, std::uint64_t seed);

/// Pulsed emission with at most one photon per pulse. Requires
/// rep_period > 10 * radiative_lifetime.
TimeTagStream simulate_pulsed(const EmitterParams& emitter, const ExcitationPulsed& exc,
                              const DetectionParams& det, Tick duration, std::uint64_t seed);

/// Attenuated laser pulses: Poissonian photon number per pulse with mean
/// `mean_photons_per_pulse` before detection.
TimeTagStream simulate_coherent_pulsed(double rep_period_ns, double mean_photons_per_pulse,
                                       const DetectionParams& det, Tick duration,
                                       std::uint64_t seed);

namespace detail {

/// Detection chain without the thinning stage, for epochs that were already
/// thinned by the generator (event skipping folds η into the skip probability).
TimeTagStream detect_thinned(std::span<const Tick> detected_epochs, const DetectionParams& det,
                             Tick duration, std::uint64_t seed);

}  // namespace detail

}  // namespace spsim
