#include "spsim/correlate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spsim/errors.hpp"

namespace spsim {

namespace {

using Signed = SignedTick;

std::vector<Signed> signed_channel(const TimeTagStream& stream, int channel) {
    std::vector<Signed> out;
    for (std::size_t i = 0; i < stream.size(); ++i) {
        if (stream.channels[i] == channel) out.push_back(static_cast<Signed>(stream.timestamps[i]));
    }
    return out;
}

}  // namespace

HistogramLayout HistogramLayout::centered(Tick bin_width, Tick range) {
    if (bin_width == 0) throw ConfigError("histogram: bin_width must be > 0");
    if (range < bin_width) throw ConfigError("histogram: range must be >= bin_width");
    const Tick half_bins = range / bin_width;
    return {bin_width,
            -static_cast<Signed>(half_bins * bin_width) - static_cast<Signed>(bin_width / 2),
            static_cast<std::size_t>(2 * half_bins + 1)};
}

HistogramLayout HistogramLayout::peak_aligned(Tick theta, Tick bin_width, long max_peak) {
    if (bin_width == 0 || theta == 0) throw ConfigError("histogram: theta and bin_width must be > 0");
    if (theta % bin_width != 0) throw ConfigError("histogram: bin_width must divide theta");
    if (max_peak < 0) throw ConfigError("histogram: max_peak must be >= 0");
    const auto peaks = static_cast<Tick>(2 * max_peak + 1);
    return {bin_width,
            -static_cast<Signed>(static_cast<Tick>(max_peak) * theta) - static_cast<Signed>(theta / 2),
            static_cast<std::size_t>(peaks * (theta / bin_width))};
}

Histogram::Histogram(const HistogramLayout& layout)
    : bin_width(layout.bin_width), origin(layout.origin), counts(layout.bins, 0) {
    if (bin_width == 0) throw ConfigError("histogram: bin_width must be > 0");
    if (counts.empty()) throw ConfigError("histogram: needs at least one bin");
}

Histogram::Histogram(Tick bin_width_, SignedTick origin_, std::vector<std::uint64_t> counts_,
                     std::uint64_t total_pairs_)
    : bin_width(bin_width_), origin(origin_), counts(std::move(counts_)), total_pairs(total_pairs_) {
    if (bin_width == 0) throw ConfigError("histogram: bin_width must be > 0");
    if (counts.empty()) throw ConfigError("histogram: needs at least one bin");
}

std::uint64_t Histogram::in_range_sum() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

long PeakSeries::index_of(long peak) const {
    auto it = std::find(m.begin(), m.end(), peak);
    return it == m.end() ? -1 : static_cast<long>(it - m.begin());
}

Histogram start_stop_histogram(const TimeTagStream& stream, const HistogramLayout& layout) {
    Histogram hist(layout);
    const auto ch1 = signed_channel(stream, 1);
    const auto ch2 = signed_channel(stream, 2);

    // Start on channel 1, stop on the next channel-2 event (tau >= 0).
    std::size_t j = 0;
    for (const Signed t1 : ch1) {
        while (j < ch2.size() && ch2[j] < t1) ++j;
        if (j == ch2.size()) break;
        ++hist.total_pairs;
        hist.add(ch2[j] - t1);
    }
    // Start on channel 2, stop on the next channel-1 event (tau < 0).
    std::size_t i = 0;
    for (const Signed t2 : ch2) {
        while (i < ch1.size() && ch1[i] <= t2) ++i;
        if (i == ch1.size()) break;
        ++hist.total_pairs;
        hist.add(t2 - ch1[i]);
    }
    return hist;
}

Histogram start_stop_histogram(const TimeTagStream& stream, Tick bin_width, Tick range) {
    return start_stop_histogram(stream, HistogramLayout::centered(bin_width, range));
}

Histogram cross_correlation(const TimeTagStream& stream, const HistogramLayout& layout,
                            CorrelationStats* stats) {
    Histogram hist(layout);
    const auto ch1 = signed_channel(stream, 1);
    const auto ch2 = signed_channel(stream, 2);
    const Signed lo = layout.origin;
    const Signed hi = layout.upper();

    std::uint64_t comparisons = 0;
    std::size_t first = 0;
    for (const Signed t1 : ch1) {
        // First channel-2 event with t2 - t1 >= lo; monotone in t1.
        while (first < ch2.size() && ch2[first] - t1 < lo) {
            ++first;
            ++comparisons;
        }
        for (std::size_t j = first; j < ch2.size(); ++j) {
            ++comparisons;
            const Signed tau = ch2[j] - t1;
            if (tau >= hi) break;
            ++hist.total_pairs;
            hist.add(tau);
        }
    }
    if (stats) stats->comparisons = comparisons;
    return hist;
}

Histogram cross_correlation(const TimeTagStream& stream, Tick bin_width, Tick range,
                            CorrelationStats* stats) {
    return cross_correlation(stream, HistogramLayout::centered(bin_width, range), stats);
}

G2Curve normalize_g2(const Histogram& hist, double n1_cps, double n2_cps, double t_acq_s) {
    const double denom = n1_cps * n2_cps * static_cast<double>(hist.bin_width) * 1e-12 * t_acq_s;
    if (!(denom > 0.0) || !std::isfinite(denom)) {
        throw DomainError("normalize_g2: rates and acquisition time must be > 0");
    }
    G2Curve curve;
    curve.tau_ps.reserve(hist.size());
    curve.values.reserve(hist.size());
    curve.sigma.reserve(hist.size());
    for (std::size_t i = 0; i < hist.size(); ++i) {
        const auto c = static_cast<double>(hist.counts[i]);
        curve.tau_ps.push_back(hist.bin_center(i));
        curve.values.push_back(c / denom);
        curve.sigma.push_back(std::sqrt(c) / denom);
    }
    return curve;
}

PeakSeries integrate_peaks(const Histogram& hist, Tick theta, Tick window) {
    if (theta == 0 || window == 0) throw ConfigError("integrate_peaks: theta and window must be > 0");
    if (window > theta) throw ConfigError("integrate_peaks: window exceeds theta, peaks overlap");
    const auto th = static_cast<double>(theta);
    const double half = 0.5 * static_cast<double>(window);
    const auto lo = static_cast<double>(hist.origin);
    const auto hi = static_cast<double>(hist.origin) +
                    static_cast<double>(hist.size()) * static_cast<double>(hist.bin_width);

    // Peaks whose whole window lies inside the histogram.
    const auto m_min = static_cast<long>(std::ceil((lo + half) / th));
    const auto m_max = static_cast<long>(std::floor((hi - half) / th));
    PeakSeries peaks;
    peaks.window = window;
    if (m_max < m_min) return peaks;
    for (long m = m_min; m <= m_max; ++m) peaks.m.push_back(m);
    peaks.raw_counts.assign(peaks.m.size(), 0);

    for (std::size_t i = 0; i < hist.size(); ++i) {
        const double c = hist.bin_center(i);
        const auto m = static_cast<long>(std::floor((c + half) / th));
        if (m < m_min || m > m_max) continue;
        const double offset = c - static_cast<double>(m) * th;
        if (offset >= -half && offset < half) peaks.raw_counts[m - m_min] += hist.counts[i];
    }
    return peaks;
}

PeakSeries normalize_peak_counts(PeakSeries peaks, double n1_cps, double n2_cps, double theta_s,
                                 double t_acq_s) {
    const double denom = n1_cps * n2_cps * theta_s * t_acq_s;
    if (!(denom > 0.0) || !std::isfinite(denom)) {
        throw DomainError("normalize_peak_counts: rates, theta and acquisition time must be > 0");
    }
    peaks.normalized.clear();
    peaks.sigma.clear();
    for (const auto c : peaks.raw_counts) {
        const auto cd = static_cast<double>(c);
        peaks.normalized.push_back(cd / denom);
        peaks.sigma.push_back(std::sqrt(std::max(cd, 1.0)) / denom);
    }
    return peaks;
}

Histogram pulse_delay_histogram(const TimeTagStream& stream, Tick theta, Tick bin_width,
                                Tick phase) {
    if (theta == 0 || bin_width == 0) throw ConfigError("pulse_delay_histogram: theta and bin_width must be > 0");
    HistogramLayout layout{bin_width, 0, static_cast<std::size_t>((theta + bin_width - 1) / bin_width)};
    Histogram hist(layout);
    for (const Tick t : stream.timestamps) {
        const Tick shifted = t + theta - (phase % theta);
        hist.add(static_cast<SignedTick>(shifted % theta));
        ++hist.total_pairs;
    }
    return hist;
}

}  // namespace spsim
