#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spsim/units.hpp"

namespace spsim {

/// Two-channel detection record in global time order.
///
/// Stored as parallel arrays: a 100 s stream at a few hundred kcounts/s holds
/// tens of millions of records, and the correlators only ever walk the
/// timestamps of one channel at a time.
struct TimeTagStream {
    Tick resolution_ps = 1;
    Tick duration = 0;  ///< acquisition time T_acq, in ticks
    std::uint64_t seed = 0;
    std::vector<Tick> timestamps;        ///< non-decreasing
    std::vector<std::uint8_t> channels;  ///< 1 or 2, parallel to timestamps
    std::map<std::string, std::string> metadata;

    std::size_t size() const noexcept { return timestamps.size(); }
    bool empty() const noexcept { return timestamps.empty(); }

    std::size_t count(int channel) const;
    double duration_s() const { return static_cast<double>(duration) * resolution_ps * 1e-12; }
    /// Mean detection rate of one channel over the whole acquisition, counts/s.
    double rate_cps(int channel) const;
    std::vector<Tick> channel_timestamps(int channel) const;

    void push_back(Tick t, std::uint8_t channel) {
        timestamps.push_back(t);
        channels.push_back(channel);
    }

    bool operator==(const TimeTagStream&) const = default;
};

struct StreamCheck {
    bool ok = true;
    std::string message;
    explicit operator bool() const noexcept { return ok; }
};

/// Verifies the stream invariants: channels in {1,2}, global time order,
/// timestamps < duration, and same-channel separations >= max(min_separation, 1).
StreamCheck check_stream(const TimeTagStream& stream, Tick min_separation = 1);

/// Channel-swapped copy (1 <-> 2).
TimeTagStream swap_channels(const TimeTagStream& stream);

/// Merges two per-channel sorted timestamp lists into a globally ordered stream.
/// Ties are ordered channel 1 first.
TimeTagStream merge_channels(const std::vector<Tick>& ch1, const std::vector<Tick>& ch2,
                             Tick duration);

}  // namespace spsim
