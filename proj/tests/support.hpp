#pragma once

// Small helpers shared by the test programs: random streams and tolerances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "spsim/timetag.hpp"

namespace spsim::testing {

inline bool close_rel(double a, double b, double rel) {
    return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

/// Independent homogeneous Poisson channels with per-channel rates in counts/s.
inline TimeTagStream poisson_stream(double rate1_cps, double rate2_cps, Tick duration,
                                    std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Tick> ch[2];
    const double rates[2] = {rate1_cps, rate2_cps};
    for (int c = 0; c < 2; ++c) {
        if (rates[c] <= 0.0) continue;
        std::exponential_distribution<double> gap(rates[c] * 1e-12);
        Tick last = 0;
        bool any = false;
        for (double t = gap(rng); t < static_cast<double>(duration); t += gap(rng)) {
            const auto tick = static_cast<Tick>(t);
            if (any && tick == last) continue;  // keep same-channel times distinct
            ch[c].push_back(tick);
            last = tick;
            any = true;
        }
    }
    return merge_channels(ch[0], ch[1], duration);
}

/// Random valid stream of arbitrary shape, for format and invariant tests.
inline TimeTagStream random_stream(std::mt19937_64& rng, std::size_t max_records) {
    std::uniform_int_distribution<std::size_t> count(0, max_records);
    std::uniform_int_distribution<Tick> duration_dist(1, Tick{1} << 50);
    const Tick duration = duration_dist(rng);
    const std::size_t n = count(rng);
    std::uniform_int_distribution<Tick> at(0, duration - 1);
    std::vector<Tick> ch[2];
    std::bernoulli_distribution first(0.5);
    for (std::size_t i = 0; i < n; ++i) ch[first(rng) ? 0 : 1].push_back(at(rng));
    for (auto& c : ch) {
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end()), c.end());
    }
    auto s = merge_channels(ch[0], ch[1], duration);
    std::uniform_int_distribution<std::uint64_t> any;
    s.seed = any(rng);
    if (first(rng)) s.metadata["mode"] = "random";
    if (first(rng)) s.metadata["note"] = "quote \" backslash \\ unicode µs";
    return s;
}

}  // namespace spsim::testing
