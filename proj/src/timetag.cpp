#include "spsim/timetag.hpp"

#include <algorithm>
#include <array>

namespace spsim {

std::size_t TimeTagStream::count(int channel) const {
    return static_cast<std::size_t>(
        std::count(channels.begin(), channels.end(), static_cast<std::uint8_t>(channel)));
}

double TimeTagStream::rate_cps(int channel) const {
    const double t = duration_s();
    return t > 0.0 ? static_cast<double>(count(channel)) / t : 0.0;
}

std::vector<Tick> TimeTagStream::channel_timestamps(int channel) const {
    std::vector<Tick> out;
    out.reserve(count(channel));
    for (std::size_t i = 0; i < timestamps.size(); ++i) {
        if (channels[i] == channel) out.push_back(timestamps[i]);
    }
    return out;
}

StreamCheck check_stream(const TimeTagStream& stream, Tick min_separation) {
    const Tick sep = std::max<Tick>(min_separation, 1);
    if (stream.channels.size() != stream.timestamps.size()) {
        return {false, "channel and timestamp arrays differ in length"};
    }
    std::array<bool, 3> seen{};
    std::array<Tick, 3> last{};
    for (std::size_t i = 0; i < stream.size(); ++i) {
        const Tick t = stream.timestamps[i];
        const auto ch = stream.channels[i];
        if (ch != 1 && ch != 2) {
            return {false, "record " + std::to_string(i) + " has invalid channel " +
                               std::to_string(static_cast<int>(ch))};
        }
        if (t >= stream.duration) {
            return {false, "record " + std::to_string(i) + " lies beyond the duration"};
        }
        if (i > 0 && t < stream.timestamps[i - 1]) {
            return {false, "record " + std::to_string(i) + " breaks global time order"};
        }
        if (seen[ch] && t - last[ch] < sep) {
            return {false, "record " + std::to_string(i) + " violates the channel " +
                               std::to_string(static_cast<int>(ch)) + " separation"};
        }
        seen[ch] = true;
        last[ch] = t;
    }
    return {};
}

TimeTagStream swap_channels(const TimeTagStream& stream) {
    TimeTagStream out = stream;
    for (auto& ch : out.channels) ch = static_cast<std::uint8_t>(3 - ch);
    // Re-establish the channel-1-first tie order.
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (out.timestamps[i] == out.timestamps[i - 1] && out.channels[i] < out.channels[i - 1]) {
            std::swap(out.channels[i], out.channels[i - 1]);
        }
    }
    return out;
}

TimeTagStream merge_channels(const std::vector<Tick>& ch1, const std::vector<Tick>& ch2,
                             Tick duration) {
    TimeTagStream out;
    out.duration = duration;
    out.timestamps.reserve(ch1.size() + ch2.size());
    out.channels.reserve(ch1.size() + ch2.size());
    std::size_t a = 0;
    std::size_t b = 0;
    while (a < ch1.size() || b < ch2.size()) {
        if (b == ch2.size() || (a < ch1.size() && ch1[a] <= ch2[b])) {
            out.push_back(ch1[a++], 1);
        } else {
            out.push_back(ch2[b++], 2);
        }
    }
    return out;
}

}  // namespace spsim
