#pragma once

// Photon-correlation estimators on two-channel time-tag streams: start-stop
// and all-pairs delay histograms, g2 normalization, and pulsed-peak
// integration with Poissonian normalization.

#include <cstdint>
#include <vector>

#include "spsim/timetag.hpp"

namespace spsim {

/// Delay bins [origin + i*bin_width, origin + (i+1)*bin_width).
struct HistogramLayout {
    Tick bin_width = 128;
    SignedTick origin = 0;
    std::size_t bins = 1;

    /// 2K+1 bins with the middle one centred on zero, K = range / bin_width.
    /// Throws ConfigError unless range >= bin_width > 0.
    static HistogramLayout centered(Tick bin_width, Tick range);

    /// Bins covering peaks -max_peak..max_peak, each peak window
    /// [m*theta - theta/2, m*theta + theta/2) made of whole bins. Requires
    /// bin_width to divide theta.
    static HistogramLayout peak_aligned(Tick theta, Tick bin_width, long max_peak);

    SignedTick upper() const { return origin + static_cast<SignedTick>(bins * bin_width); }
};

struct Histogram {
    Tick bin_width = 1;
    SignedTick origin = 0;  ///< left edge of the first bin
    std::vector<std::uint64_t> counts;
    std::uint64_t total_pairs = 0;  ///< pairs found, including those outside the bins

    explicit Histogram(const HistogramLayout& layout = {});
    Histogram(Tick bin_width, SignedTick origin, std::vector<std::uint64_t> counts,
              std::uint64_t total_pairs);

    std::size_t size() const noexcept { return counts.size(); }
    SignedTick bin_left(std::size_t i) const {
        return origin + static_cast<SignedTick>(i * bin_width);
    }
    double bin_center(std::size_t i) const {
        return static_cast<double>(bin_left(i)) + 0.5 * static_cast<double>(bin_width);
    }
    std::uint64_t in_range_sum() const;

    /// Adds one count at delay tau if it falls inside the bins.
    void add(SignedTick tau) {
        if (tau < origin) return;
        const auto idx = static_cast<std::uint64_t>(tau - origin) / bin_width;
        if (idx < counts.size()) ++counts[idx];
    }

    bool operator==(const Histogram&) const = default;
};

/// Normalized correlation curve.
struct G2Curve {
    std::vector<double> tau_ps;  ///< bin centres
    std::vector<double> values;
    std::vector<double> sigma;
};

/// Integrated coincidence peaks c(m) and, once normalized, C_N(m).
struct PeakSeries {
    std::vector<long> m;
    std::vector<std::uint64_t> raw_counts;
    std::vector<double> normalized;  ///< empty until normalize_peak_counts
    std::vector<double> sigma;       ///< standard error of `normalized`
    Tick window = 0;

    /// Index of peak m, or -1.
    long index_of(long peak) const;
};

struct CorrelationStats {
    std::uint64_t comparisons = 0;
};

/// For each channel-1 event the delay to the next channel-2 event at or after
/// it (tau >= 0), and for each channel-2 event the delay to the next channel-1
/// event strictly after it (tau < 0). Only successive pairs are binned.
Histogram start_stop_histogram(const TimeTagStream& stream, const HistogramLayout& layout);
Histogram start_stop_histogram(const TimeTagStream& stream, Tick bin_width, Tick range);

/// All channel-1/channel-2 pairs with tau = t2 - t1 inside the layout, by a
/// sorted two-index sweep costing O(n1 + n2 + pairs).
Histogram cross_correlation(const TimeTagStream& stream, const HistogramLayout& layout,
                            CorrelationStats* stats = nullptr);
Histogram cross_correlation(const TimeTagStream& stream, Tick bin_width, Tick range,
                            CorrelationStats* stats = nullptr);

/// counts / (n1 n2 bin_width t_acq), with rates in counts/s and t_acq in s.
G2Curve normalize_g2(const Histogram& hist, double n1_cps, double n2_cps, double t_acq_s);

/// c(m): counts of bins whose centre lies in [m*theta - window/2,
/// m*theta + window/2), for every m whose full window lies inside the
/// histogram. Throws ConfigError when window > theta.
PeakSeries integrate_peaks(const Histogram& hist, Tick theta, Tick window);

/// C_N(m) = c(m) / (n1 n2 theta t_acq) with sigma = sqrt(max(c, 1)) / denominator.
PeakSeries normalize_peak_counts(PeakSeries peaks, double n1_cps, double n2_cps, double theta_s,
                                 double t_acq_s);

/// Detection delay after the most recent laser pulse, (t - phase) mod theta,
/// over both channels. Bins cover [0, theta).
Histogram pulse_delay_histogram(const TimeTagStream& stream, Tick theta, Tick bin_width,
                                Tick phase = 0);

}  // namespace spsim
