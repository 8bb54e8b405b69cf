#pragma once

// Binary time-tag persistence and plain-text exports.
//
// Time-tag file layout, all integers little-endian:
//
//   offset  size  field
//   0       8     magic "PHFTAG01"
//   8       8     resolution_ps   (u64)
//   16      8     duration_ticks  (u64)
//   24      8     record_count    (u64)
//   32      8     seed            (u64)
//   40      8     metadata_length (u64, bytes)
//   48      L     metadata, UTF-8 JSON object of string values
//   48+L    9*N   records: channel (u8, 1 or 2), timestamp (u64 ticks)
//
// CSV exports use LF line endings, '.' decimals and shortest round-trip
// formatting of doubles.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "spsim/correlate.hpp"
#include "spsim/estimate.hpp"
#include "spsim/timetag.hpp"

namespace spsim {

inline constexpr char kTimeTagMagic[9] = "PHFTAG01";
inline constexpr std::size_t kTimeTagHeaderBytes = 48;
inline constexpr std::size_t kTimeTagRecordBytes = 9;

/// Serializes the stream; returns the number of bytes written.
std::size_t write_timetags(const TimeTagStream& stream, std::ostream& out);
std::size_t write_timetags(const TimeTagStream& stream, const std::filesystem::path& path);

/// Parses and validates a time-tag file. Throws BadMagicError,
/// TruncatedFileError, NonMonotoneError, InvalidRecordError or FormatError.
TimeTagStream read_timetags(std::istream& in);
TimeTagStream read_timetags(const std::filesystem::path& path);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double x);

// CSV column sets:
//   Histogram   tau_ps,counts        (tau_ps = bin centre)
//   G2Curve     tau_ps,value,sigma
//   PeakSeries  m,c_m,C_N            (C_N empty before normalization)
//   FitResult   name,unit,value,std_error
void export_csv(const Histogram& hist, std::ostream& out);
void export_csv(const G2Curve& curve, std::ostream& out);
void export_csv(const PeakSeries& peaks, std::ostream& out);
void export_csv(const FitResult& fit, std::ostream& out);

template <class T>
void export_csv(const T& value, const std::filesystem::path& path);

/// Re-imports a histogram CSV. The bin width is inferred from the first two
/// rows unless given.
Histogram read_histogram_csv(std::istream& in, std::optional<Tick> bin_width = std::nullopt);
Histogram read_histogram_csv(const std::filesystem::path& path,
                             std::optional<Tick> bin_width = std::nullopt);
G2Curve read_g2_csv(const std::filesystem::path& path);
/// Peak table; sigma is rebuilt as C_N / sqrt(max(c_m, 1)).
PeakSeries read_peaks_csv(const std::filesystem::path& path);
/// Two or three columns: power_uw,rate[,sigma].
std::vector<PowerPoint> read_power_csv(const std::filesystem::path& path);

nlohmann::json to_json(const FitResult& fit);
FitResult fit_result_from_json(const nlohmann::json& j);

}  // namespace spsim
