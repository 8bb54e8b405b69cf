#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spsim/correlate.hpp"
#include "spsim/errors.hpp"
#include "support.hpp"

using namespace spsim;

namespace {

// Every ch1/ch2 pair by brute force.
Histogram brute_force_pairs(const TimeTagStream& s, const HistogramLayout& layout) {
    Histogram h(layout);
    const auto a = s.channel_timestamps(1);
    const auto b = s.channel_timestamps(2);
    for (const Tick t1 : a) {
        for (const Tick t2 : b) {
            const auto tau = static_cast<SignedTick>(t2) - static_cast<SignedTick>(t1);
            if (tau >= layout.origin && tau < layout.upper()) {
                ++h.total_pairs;
                h.add(tau);
            }
        }
    }
    return h;
}

std::size_t bin_of(const Histogram& h, SignedTick tau) {
    return static_cast<std::size_t>((tau - h.origin) / static_cast<SignedTick>(h.bin_width));
}

}  // namespace

TEST_CASE("centred layout") {
    const auto l = HistogramLayout::centered(128, 1280);
    CHECK(l.bins == 21);
    CHECK(l.origin == -1280 - 64);
    CHECK(l.upper() == 1280 + 64);
    CHECK_THROWS_AS(HistogramLayout::centered(128, 100), ConfigError);
    CHECK_THROWS_AS(HistogramLayout::centered(0, 100), ConfigError);
}

TEST_CASE("peak-aligned layout") {
    const auto l = HistogramLayout::peak_aligned(50'000, 1000, 3);
    CHECK(l.origin == -175'000);
    CHECK(l.bins == 350);
    CHECK_THROWS_AS(HistogramLayout::peak_aligned(50'000, 3000, 3), ConfigError);
}

TEST_CASE("single pair") {
    const auto s = merge_channels({1000}, {1500}, 10'000);
    const auto ss = start_stop_histogram(s, 100, 1000);
    const auto cc = cross_correlation(s, 100, 1000);
    CHECK(ss.in_range_sum() == 1);
    CHECK(ss.counts[bin_of(ss, 500)] == 1);
    CHECK(ss == cc);
}

TEST_CASE("empty stream gives an empty histogram") {
    TimeTagStream s;
    s.duration = 100;
    const auto h = start_stop_histogram(s, 10, 50);
    CHECK(h.in_range_sum() == 0);
    CHECK(h.total_pairs == 0);
}

TEST_CASE("start-stop counts only successive pairs") {
    // ch1 at 0 and 100, ch2 at 150 and 170: starts pair with the first stop after them.
    const auto s = merge_channels({0, 100}, {150, 170}, 1000);
    const auto h = start_stop_histogram(s, 10, 500);
    CHECK(h.counts[bin_of(h, 150)] == 1);
    CHECK(h.counts[bin_of(h, 50)] == 1);
    CHECK(h.counts[bin_of(h, 170)] == 0);
    CHECK(h.in_range_sum() == 2);  // ch2 events have no later ch1 event
}

TEST_CASE("coincident events are counted once at zero delay") {
    const auto s = merge_channels({500}, {500}, 1000);
    const auto h = start_stop_histogram(s, 11, 110);
    CHECK(h.in_range_sum() == 1);
    CHECK(h.counts[h.size() / 2] == 1);
}

TEST_CASE("all-pairs sweep matches brute force") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto s = testing::poisson_stream(2e8, 3e8, 200'000, rng());
        const auto layout = HistogramLayout::centered(37, 5000);
        CorrelationStats stats;
        const auto fast = cross_correlation(s, layout, &stats);
        CHECK(fast == brute_force_pairs(s, layout));
        CHECK(stats.comparisons > 0);
    }
}

TEST_CASE("swap symmetry") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        auto s = testing::poisson_stream(5e7, 8e7, 2'000'000, rng());
        // Mirror symmetry of successive pairs needs distinct times across channels.
        while (std::adjacent_find(s.timestamps.begin(), s.timestamps.end()) != s.timestamps.end()) {
            s = testing::poisson_stream(5e7, 8e7, 2'000'000, rng());
        }
        const auto swapped = swap_channels(s);
        for (const Tick w : {Tick{127}, Tick{129}}) {
            const auto layout = HistogramLayout::centered(w, 20'000);
            const auto a = cross_correlation(s, layout);
            const auto b = cross_correlation(swapped, layout);
            auto mirrored = b.counts;
            std::reverse(mirrored.begin(), mirrored.end());
            CHECK(a.counts == mirrored);

            const auto ssa = start_stop_histogram(s, layout);
            const auto ssb = start_stop_histogram(swapped, layout);
            auto ss_mirrored = ssb.counts;
            std::reverse(ss_mirrored.begin(), ss_mirrored.end());
            CHECK(ssa.counts == ss_mirrored);
        }
    }
}

TEST_CASE("successive pairs are a subset of all pairs") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        const auto s = testing::poisson_stream(1e8, 1e8, 5'000'000, rng());
        const auto layout = HistogramLayout::centered(64, 40'000);
        const auto ss = start_stop_histogram(s, layout);
        const auto cc = cross_correlation(s, layout);
        for (std::size_t i = 0; i < ss.size(); ++i) CHECK(ss.counts[i] <= cc.counts[i]);
    }
}

TEST_CASE("Poisson channels: flat all-pairs histogram") {
    const double r1 = 2e5, r2 = 3e5;
    const Tick duration = s_to_ticks(5.0);
    const auto s = testing::poisson_stream(r1, r2, duration, 21);
    const Tick w = 1000;
    const auto h = cross_correlation(s, w, 200'000);
    const double n1 = s.rate_cps(1), n2 = s.rate_cps(2), t = s.duration_s();
    const double expected = n1 * n2 * static_cast<double>(w) * 1e-12 * t;
    for (const auto c : h.counts) {
        CHECK(std::abs(static_cast<double>(c) - expected) < 4.0 * std::sqrt(expected));
    }
    const auto g2 = normalize_g2(h, n1, n2, t);
    for (std::size_t i = 0; i < g2.values.size(); ++i) {
        CHECK(std::abs(g2.values[i] - 1.0) < 4.0 * g2.sigma[i] + 1e-12);
    }
}

TEST_CASE("Poisson channels: normalized mean within one percent for a million pairs") {
    const auto s = testing::poisson_stream(1e6, 1e6, s_to_ticks(1.0), 31);
    const auto h = cross_correlation(s, 1000, 500'000);
    REQUIRE(h.in_range_sum() >= 1'000'000);
    const auto g2 = normalize_g2(h, s.rate_cps(1), s.rate_cps(2), s.duration_s());
    const double mean = std::accumulate(g2.values.begin(), g2.values.end(), 0.0) /
                        static_cast<double>(g2.values.size());
    CHECK(mean >= 0.99);
    CHECK(mean <= 1.01);
}

TEST_CASE("start-stop envelope decays as exp(-N tau) for Poisson stops") {
    const double rate = 1e6;  // stops per second on channel 2
    const auto s = testing::poisson_stream(1e5, rate, s_to_ticks(2.0), 41);
    const Tick w = 100'000;  // 100 ns
    const auto h = start_stop_histogram(s, w, 5'000'000);
    // Positive delays: probability of first stop in [a, a+w) is exp(-N a)(1 - exp(-N w)).
    const double starts = static_cast<double>(s.count(1));
    const double nw = rate * static_cast<double>(w) * 1e-12;
    for (std::size_t i = h.size() / 2 + 1; i < h.size(); ++i) {
        const double a = static_cast<double>(h.bin_left(i)) * 1e-12;
        const double expected = starts * std::exp(-rate * a) * (-std::expm1(-nw));
        CHECK(std::abs(static_cast<double>(h.counts[i]) - expected) < 4.0 * std::sqrt(expected) + 1.0);
    }
}

TEST_CASE("start-stop and all-pairs agree at short delays and low rates") {
    const auto s = testing::poisson_stream(2e4, 2e4, s_to_ticks(50.0), 43);
    const auto layout = HistogramLayout::centered(1000, 10'000);
    const auto ss = start_stop_histogram(s, layout);
    const auto cc = cross_correlation(s, layout);
    const double n1 = s.rate_cps(1), n2 = s.rate_cps(2), t = s.duration_s();
    const auto g_ss = normalize_g2(ss, n1, n2, t);
    const auto g_cc = normalize_g2(cc, n1, n2, t);
    const double mean_ss = std::accumulate(g_ss.values.begin(), g_ss.values.end(), 0.0);
    const double mean_cc = std::accumulate(g_cc.values.begin(), g_cc.values.end(), 0.0);
    CHECK(std::abs(mean_ss / mean_cc - 1.0) < 0.05);
}

TEST_CASE("cross-correlation cost is linear in stream length") {
    const auto layout = HistogramLayout::centered(100, 10'000);
    CorrelationStats small, large;
    const auto a = testing::poisson_stream(1e6, 1e6, s_to_ticks(0.1), 1);
    const auto b = testing::poisson_stream(1e6, 1e6, s_to_ticks(0.4), 1);
    cross_correlation(a, layout, &small);
    cross_correlation(b, layout, &large);
    const double ratio = static_cast<double>(large.comparisons) / static_cast<double>(small.comparisons);
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.05));
    // A few comparisons per event, independent of the total count.
    CHECK(static_cast<double>(large.comparisons) < 3.0 * static_cast<double>(b.size()));
}

TEST_CASE("g2 normalization") {
    Histogram h(HistogramLayout::centered(1000, 2000));
    h.counts = {4, 0, 9, 16, 1};
    const auto g = normalize_g2(h, 1e3, 2e3, 10.0);
    const double denom = 1e3 * 2e3 * 1e-9 * 10.0;
    CHECK(g.values[2] == doctest::Approx(9.0 / denom));
    CHECK(g.sigma[2] == doctest::Approx(3.0 / denom));
    CHECK(g.tau_ps[2] == doctest::Approx(0.0));
    CHECK(g.values[1] == 0.0);
    CHECK_THROWS_AS(normalize_g2(h, 0.0, 2e3, 10.0), DomainError);

    Histogram zero(HistogramLayout::centered(1000, 2000));
    for (const double v : normalize_g2(zero, 1.0, 1.0, 1.0).values) CHECK(v == 0.0);

    Histogram doubled = h;
    for (auto& c : doubled.counts) c *= 2;
    CHECK(normalize_g2(doubled, 1e3, 2e3, 20.0).values == g.values);
}

TEST_CASE("peak integration") {
    const Tick theta = 50'000;
    SUBCASE("delta comb gives unit peaks") {
        Histogram h(HistogramLayout::peak_aligned(theta, 1000, 4));
        for (long m = -4; m <= 4; ++m) h.add(m * static_cast<SignedTick>(theta));
        const auto p = integrate_peaks(h, theta, theta);
        CHECK(p.m.size() == 9);
        for (const auto c : p.raw_counts) CHECK(c == 1);
        CHECK(p.index_of(0) == 4);
        CHECK(p.index_of(9) == -1);
    }
    SUBCASE("full windows partition the histogram") {
        std::mt19937_64 rng(3);
        Histogram h(HistogramLayout::peak_aligned(theta, 500, 6));
        std::uniform_int_distribution<std::uint64_t> c(0, 50);
        for (auto& x : h.counts) x = c(rng);
        const auto p = integrate_peaks(h, theta, theta);
        CHECK(std::accumulate(p.raw_counts.begin(), p.raw_counts.end(), std::uint64_t{0}) == h.in_range_sum());
    }
    SUBCASE("narrow windows") {
        Histogram h(HistogramLayout::peak_aligned(theta, 1000, 2));
        h.add(50'000 + 1500);   // inside a 4 ns window around m = 1
        h.add(50'000 + 10'500);  // outside
        const auto p = integrate_peaks(h, theta, 4000);
        CHECK(p.raw_counts[static_cast<std::size_t>(p.index_of(1))] == 1);
        CHECK(p.window == 4000);
    }
    SUBCASE("overlapping windows") {
        Histogram h(HistogramLayout::peak_aligned(theta, 1000, 2));
        CHECK_THROWS_AS(integrate_peaks(h, theta, theta + 1), ConfigError);
    }
    SUBCASE("normalization") {
        PeakSeries p;
        p.m = {-1, 0, 1};
        p.raw_counts = {200, 0, 50};
        const auto n = normalize_peak_counts(p, 100.0, 200.0, 50e-9, 100.0);
        const double denom = 100.0 * 200.0 * 50e-9 * 100.0;
        CHECK(n.normalized[0] == doctest::Approx(200.0 / denom));
        CHECK(n.sigma[1] == doctest::Approx(1.0 / denom));
        CHECK_THROWS_AS(normalize_peak_counts(p, 100.0, 0.0, 50e-9, 1.0), DomainError);
    }
}

TEST_CASE("pulse delay histogram folds times modulo the period") {
    const auto s = merge_channels({100, 50'100, 120'000}, {49'999}, 200'000);
    const auto h = pulse_delay_histogram(s, 50'000, 1000);
    CHECK(h.size() == 50);
    CHECK(h.counts[0] == 2);
    CHECK(h.counts[20] == 1);
    CHECK(h.counts[49] == 1);
    const auto shifted = pulse_delay_histogram(s, 50'000, 1000, 100);
    CHECK(shifted.counts[0] == 2);
    CHECK(shifted.counts[19] == 1);
}
