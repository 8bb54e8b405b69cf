#include "spsim/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "spsim/errors.hpp"

namespace spsim {

namespace {

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

bool read_exact(std::istream& in, unsigned char* dst, std::size_t n) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in.gcount()) == n;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& text, const std::string& where) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        if (text == "nan") return std::nan("");
        throw FormatError(where + ": cannot parse number '" + text + "'");
    }
    return v;
}

template <class Int>
Int parse_int(const std::string& text, const std::string& where) {
    Int v{};
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw FormatError(where + ": cannot parse integer '" + text + "'");
    }
    return v;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = {}) {
    std::ifstream in(path, std::ios::in | mode);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    return in;
}

// Rows of a CSV file with a header line, checked against the expected header.
std::vector<std::vector<std::string>> read_table(std::istream& in, const std::string& name,
                                                 std::size_t min_cols, std::size_t max_cols) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError(name + ": empty file");
    std::vector<std::vector<std::string>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() < min_cols || fields.size() > max_cols) {
            throw FormatError(name + ": line " + std::to_string(lineno) + " has " +
                              std::to_string(fields.size()) + " columns");
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

}  // namespace

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

std::size_t write_timetags(const TimeTagStream& stream, std::ostream& out) {
    if (auto check = check_stream(stream); !check) {
        throw ConfigError("write_timetags: invalid stream: " + check.message);
    }
    nlohmann::json meta = nlohmann::json::object();
    for (const auto& [k, v] : stream.metadata) meta[k] = v;
    const std::string meta_text = meta.dump();

    std::string header(kTimeTagMagic, 8);
    put_u64(header, stream.resolution_ps);
    put_u64(header, stream.duration);
    put_u64(header, stream.size());
    put_u64(header, stream.seed);
    put_u64(header, meta_text.size());
    header += meta_text;
    out.write(header.data(), static_cast<std::streamsize>(header.size()));

    std::string chunk;
    constexpr std::size_t kChunkRecords = 1 << 16;
    chunk.reserve(kChunkRecords * kTimeTagRecordBytes);
    for (std::size_t i = 0; i < stream.size(); ++i) {
        chunk.push_back(static_cast<char>(stream.channels[i]));
        put_u64(chunk, stream.timestamps[i]);
        if (chunk.size() >= kChunkRecords * kTimeTagRecordBytes) {
            out.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
            chunk.clear();
        }
    }
    out.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    if (!out) throw IoError("write_timetags: write failed");
    return header.size() + stream.size() * kTimeTagRecordBytes;
}

std::size_t write_timetags(const TimeTagStream& stream, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    const auto bytes = write_timetags(stream, out);
    out.close();
    if (!out) throw IoError("write_timetags: failed to finish " + path.string());
    return bytes;
}

TimeTagStream read_timetags(std::istream& in) {
    std::array<unsigned char, kTimeTagHeaderBytes> header{};
    in.read(reinterpret_cast<char*>(header.data()), 8);
    if (static_cast<std::size_t>(in.gcount()) < 8 ||
        std::memcmp(header.data(), kTimeTagMagic, 8) != 0) {
        throw BadMagicError("time-tag file: bad magic (expected PHFTAG01)");
    }
    if (!read_exact(in, header.data() + 8, kTimeTagHeaderBytes - 8)) {
        throw FormatError("time-tag file: truncated header");
    }
    TimeTagStream stream;
    stream.resolution_ps = get_u64(header.data() + 8);
    stream.duration = get_u64(header.data() + 16);
    const std::uint64_t count = get_u64(header.data() + 24);
    stream.seed = get_u64(header.data() + 32);
    const std::uint64_t meta_len = get_u64(header.data() + 40);
    if (stream.resolution_ps == 0) throw FormatError("time-tag file: zero resolution");
    if (meta_len > (std::uint64_t{1} << 30)) throw FormatError("time-tag file: metadata too large");

    std::string meta_text(meta_len, '\0');
    if (!read_exact(in, reinterpret_cast<unsigned char*>(meta_text.data()), meta_len)) {
        throw FormatError("time-tag file: truncated metadata");
    }
    try {
        const auto meta = nlohmann::json::parse(meta_text);
        if (!meta.is_object()) throw FormatError("time-tag file: metadata is not a JSON object");
        for (const auto& [k, v] : meta.items()) {
            if (!v.is_string()) throw FormatError("time-tag file: metadata value for " + k + " is not a string");
            stream.metadata[k] = v.get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("time-tag file: metadata is not valid JSON: ") + e.what());
    }

    stream.timestamps.reserve(count);
    stream.channels.reserve(count);
    std::array<Tick, 3> last{};
    std::array<bool, 3> seen{};
    std::array<unsigned char, kTimeTagRecordBytes> rec{};
    for (std::uint64_t i = 0; i < count; ++i) {
        if (!read_exact(in, rec.data(), rec.size())) throw TruncatedFileError(count, i);
        const auto ch = rec[0];
        const Tick t = get_u64(rec.data() + 1);
        if (ch != 1 && ch != 2) {
            throw InvalidRecordError("time-tag file: record " + std::to_string(i) +
                                     " has invalid channel " + std::to_string(ch));
        }
        if (t >= stream.duration) {
            throw InvalidRecordError("time-tag file: record " + std::to_string(i) +
                                     " timestamp is not below the duration");
        }
        if ((seen[ch] && t <= last[ch]) || (i > 0 && t < stream.timestamps.back())) {
            throw NonMonotoneError("time-tag file: record " + std::to_string(i) +
                                   " is out of time order");
        }
        seen[ch] = true;
        last[ch] = t;
        stream.push_back(t, ch);
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw FormatError("time-tag file: trailing bytes after " + std::to_string(count) + " records");
    }
    return stream;
}

TimeTagStream read_timetags(const std::filesystem::path& path) {
    auto in = open_in(path, std::ios::binary);
    return read_timetags(in);
}

void export_csv(const Histogram& hist, std::ostream& out) {
    out << "tau_ps,counts\n";
    for (std::size_t i = 0; i < hist.size(); ++i) {
        out << format_double(hist.bin_center(i)) << ',' << hist.counts[i] << '\n';
    }
}

void export_csv(const G2Curve& curve, std::ostream& out) {
    out << "tau_ps,value,sigma\n";
    for (std::size_t i = 0; i < curve.tau_ps.size(); ++i) {
        out << format_double(curve.tau_ps[i]) << ',' << format_double(curve.values[i]) << ','
            << format_double(curve.sigma[i]) << '\n';
    }
}

void export_csv(const PeakSeries& peaks, std::ostream& out) {
    out << "m,c_m,C_N\n";
    for (std::size_t i = 0; i < peaks.m.size(); ++i) {
        out << peaks.m[i] << ',' << peaks.raw_counts[i] << ',';
        if (i < peaks.normalized.size()) out << format_double(peaks.normalized[i]);
        out << '\n';
    }
}

void export_csv(const FitResult& fit, std::ostream& out) {
    out << "name,unit,value,std_error\n";
    for (const auto& p : fit.parameters) {
        out << p.name << ',' << p.unit << ',' << format_double(p.value) << ','
            << format_double(p.std_error) << '\n';
    }
}

template <class T>
void export_csv(const T& value, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    export_csv(value, out);
    out.close();
    if (!out) throw IoError("failed to write " + path.string());
}

template void export_csv<Histogram>(const Histogram&, const std::filesystem::path&);
template void export_csv<G2Curve>(const G2Curve&, const std::filesystem::path&);
template void export_csv<PeakSeries>(const PeakSeries&, const std::filesystem::path&);
template void export_csv<FitResult>(const FitResult&, const std::filesystem::path&);

Histogram read_histogram_csv(std::istream& in, std::optional<Tick> bin_width) {
    const auto rows = read_table(in, "histogram csv", 2, 2);
    if (rows.empty()) throw FormatError("histogram csv: no bins");
    std::vector<double> centers;
    std::vector<std::uint64_t> counts;
    for (const auto& r : rows) {
        centers.push_back(parse_double(r[0], "histogram csv"));
        counts.push_back(parse_int<std::uint64_t>(r[1], "histogram csv"));
    }
    Tick width = 0;
    if (bin_width) {
        width = *bin_width;
    } else if (centers.size() >= 2) {
        width = static_cast<Tick>(std::llround(centers[1] - centers[0]));
    }
    if (width == 0) throw FormatError("histogram csv: cannot infer the bin width");
    const auto origin =
        static_cast<SignedTick>(std::floor(centers[0] - 0.5 * static_cast<double>(width)));
    std::uint64_t total = 0;
    for (const auto c : counts) total += c;
    return Histogram(width, origin, std::move(counts), total);
}

Histogram read_histogram_csv(const std::filesystem::path& path, std::optional<Tick> bin_width) {
    auto in = open_in(path);
    return read_histogram_csv(in, bin_width);
}

G2Curve read_g2_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    G2Curve curve;
    for (const auto& r : read_table(in, path.string(), 3, 3)) {
        curve.tau_ps.push_back(parse_double(r[0], path.string()));
        curve.values.push_back(parse_double(r[1], path.string()));
        curve.sigma.push_back(parse_double(r[2], path.string()));
    }
    return curve;
}

PeakSeries read_peaks_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    PeakSeries peaks;
    for (const auto& r : read_table(in, path.string(), 2, 3)) {
        peaks.m.push_back(parse_int<long>(r[0], path.string()));
        const auto c = parse_int<std::uint64_t>(r[1], path.string());
        peaks.raw_counts.push_back(c);
        if (r.size() == 3 && !r[2].empty()) {
            const double cn = parse_double(r[2], path.string());
            peaks.normalized.push_back(cn);
            peaks.sigma.push_back(c > 0 ? cn / std::sqrt(static_cast<double>(c)) : 0.0);
        }
    }
    if (!peaks.normalized.empty() && peaks.normalized.size() != peaks.m.size()) {
        throw FormatError(path.string() + ": C_N column is only partly filled");
    }
    // Zero-count peaks: sigma from the shared denominator, sqrt(1)/D.
    double unit = 0.0;
    for (std::size_t i = 0; i < peaks.sigma.size(); ++i) {
        if (peaks.raw_counts[i] > 0) {
            unit = peaks.normalized[i] / static_cast<double>(peaks.raw_counts[i]);
            break;
        }
    }
    for (std::size_t i = 0; i < peaks.sigma.size(); ++i) {
        if (peaks.raw_counts[i] == 0) peaks.sigma[i] = unit;
    }
    return peaks;
}

std::vector<PowerPoint> read_power_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<PowerPoint> points;
    for (const auto& r : read_table(in, path.string(), 2, 3)) {
        PowerPoint p{parse_double(r[0], path.string()), parse_double(r[1], path.string())};
        if (r.size() == 3) p.sigma = parse_double(r[2], path.string());
        points.push_back(p);
    }
    return points;
}

nlohmann::json to_json(const FitResult& fit) {
    auto number = [](double x) -> nlohmann::json {
        if (std::isfinite(x)) return x;
        return nullptr;
    };
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : fit.parameters) {
        params.push_back({{"name", p.name},
                          {"unit", p.unit},
                          {"value", number(p.value)},
                          {"std_error", number(p.std_error)}});
    }
    return {{"model", fit.model},
            {"converged", fit.converged},
            {"iterations", fit.iterations},
            {"residual_norm", number(fit.residual_norm)},
            {"chi2", number(fit.chi2)},
            {"dof", fit.dof},
            {"message", fit.message},
            {"parameters", params}};
}

FitResult fit_result_from_json(const nlohmann::json& j) {
    auto number = [](const nlohmann::json& v) {
        return v.is_null() ? std::nan("") : v.get<double>();
    };
    FitResult fit;
    fit.model = j.at("model").get<std::string>();
    fit.converged = j.at("converged").get<bool>();
    fit.iterations = j.at("iterations").get<int>();
    fit.residual_norm = number(j.at("residual_norm"));
    fit.chi2 = number(j.at("chi2"));
    fit.dof = j.at("dof").get<int>();
    fit.message = j.at("message").get<std::string>();
    for (const auto& p : j.at("parameters")) {
        fit.parameters.push_back({p.at("name").get<std::string>(), p.at("unit").get<std::string>(),
                                  number(p.at("value")), number(p.at("std_error"))});
    }
    return fit;
}

}  // namespace spsim
