#include <doctest.h>

#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "spsim/errors.hpp"
#include "spsim/io.hpp"
#include "support.hpp"

using namespace spsim;

namespace {

std::string serialize(const TimeTagStream& s) {
    std::ostringstream out(std::ios::binary);
    write_timetags(s, out);
    return out.str();
}

TimeTagStream deserialize(const std::string& bytes) {
    std::istringstream in(bytes, std::ios::binary);
    return read_timetags(in);
}

void put_u64(std::string& bytes, std::size_t offset, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes[offset + i] = static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint64_t get_u64(const std::string& bytes, std::size_t offset) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[offset + i]);
    return v;
}

TimeTagStream small_stream() {
    auto s = merge_channels({10, 30, 50}, {20, 40}, 100);
    s.seed = 42;
    s.metadata["mode"] = "test";
    return s;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("spsim_test_io_" + name);
}

}  // namespace

TEST_CASE("header layout") {
    const auto bytes = serialize(small_stream());
    CHECK(bytes.substr(0, 8) == "PHFTAG01");
    CHECK(get_u64(bytes, 8) == 1);
    CHECK(get_u64(bytes, 16) == 100);
    CHECK(get_u64(bytes, 24) == 5);
    CHECK(get_u64(bytes, 32) == 42);
    const auto meta_len = get_u64(bytes, 40);
    CHECK(bytes.size() == kTimeTagHeaderBytes + meta_len + 5 * kTimeTagRecordBytes);
    // First record: channel 1 at tick 10, little-endian.
    const auto rec = kTimeTagHeaderBytes + meta_len;
    CHECK(bytes[rec] == 1);
    CHECK(get_u64(bytes, rec + 1) == 10);
}

TEST_CASE("empty stream is header plus metadata only") {
    TimeTagStream s;
    s.duration = 1000;
    const auto bytes = serialize(s);
    CHECK(bytes.size() == kTimeTagHeaderBytes + get_u64(bytes, 40));
    CHECK(get_u64(bytes, 24) == 0);
    CHECK(deserialize(bytes) == s);
}

TEST_CASE("write, read and write again gives identical bytes") {
    const auto first = serialize(small_stream());
    const auto back = deserialize(first);
    CHECK(back == small_stream());
    CHECK(serialize(back) == first);
}

TEST_CASE("a million records occupy nine bytes each") {
    std::vector<Tick> a, b;
    for (Tick i = 0; i < 500'000; ++i) {
        a.push_back(2 * i);
        b.push_back(2 * i + 1);
    }
    auto s = merge_channels(a, b, 1'000'001);
    const auto path = temp_path("million.phft");
    const auto written = write_timetags(s, path);
    const auto meta_len = serialize(TimeTagStream{s.resolution_ps, s.duration, s.seed, {}, {}, s.metadata}).size() -
                          kTimeTagHeaderBytes;
    CHECK(written == kTimeTagHeaderBytes + meta_len + 9'000'000);
    CHECK(std::filesystem::file_size(path) == written);
    CHECK(read_timetags(path) == s);
    std::filesystem::remove(path);
}

TEST_CASE("random streams round-trip exactly") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 200; ++i) {
        const auto s = testing::random_stream(rng, 500);
        const auto bytes = serialize(s);
        const auto back = deserialize(bytes);
        REQUIRE(back == s);
        CHECK(serialize(back) == bytes);
    }
}

TEST_CASE("corrupted files are rejected with a typed error") {
    const auto good = serialize(small_stream());
    const auto rec = kTimeTagHeaderBytes + get_u64(good, 40);

    SUBCASE("bad magic") {
        auto b = good;
        b[0] = 'X';
        CHECK_THROWS_AS(deserialize(b), BadMagicError);
    }
    SUBCASE("truncated header") {
        CHECK_THROWS_AS(deserialize(good.substr(0, 20)), FormatError);
    }
    SUBCASE("truncated records name expected and found counts") {
        const auto b = good.substr(0, rec + 2 * kTimeTagRecordBytes + 4);
        try {
            deserialize(b);
            FAIL("no exception");
        } catch (const TruncatedFileError& e) {
            CHECK(e.expected() == 5);
            CHECK(e.found() == 2);
            CHECK(std::string(e.what()).find("expected 5") != std::string::npos);
        }
    }
    SUBCASE("non-monotone timestamps") {
        auto b = good;
        put_u64(b, rec + 1, 60);  // first record later than the second
        CHECK_THROWS_AS(deserialize(b), NonMonotoneError);
    }
    SUBCASE("invalid channel") {
        auto b = good;
        b[rec] = 3;
        CHECK_THROWS_AS(deserialize(b), InvalidRecordError);
    }
    SUBCASE("timestamp beyond the duration") {
        auto b = good;
        put_u64(b, rec + 4 * kTimeTagRecordBytes + 1, 100);
        CHECK_THROWS_AS(deserialize(b), InvalidRecordError);
    }
    SUBCASE("trailing bytes") {
        CHECK_THROWS_AS(deserialize(good + "x"), FormatError);
    }
    SUBCASE("metadata that is not an object") {
        TimeTagStream s;
        s.duration = 10;
        auto b = serialize(s);
        const auto len = get_u64(b, 40);
        b.replace(kTimeTagHeaderBytes, len, std::string(len, ' '));
        b[kTimeTagHeaderBytes] = '1';
        CHECK_THROWS_AS(deserialize(b), FormatError);
    }
}

TEST_CASE("missing files are I/O errors") {
    CHECK_THROWS_AS(read_timetags(temp_path("does_not_exist.phft")), IoError);
}

TEST_CASE("doubles are printed shortest and round-trip") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(2.0) == "2");
    CHECK(format_double(-1.5e-300) == "-1.5e-300");
    std::mt19937_64 rng(1);
    for (int i = 0; i < 10'000; ++i) {
        const double x = std::bit_cast<double>(rng());
        if (!std::isfinite(x)) continue;
        const auto text = format_double(x);
        double y = 0.0;
        std::from_chars(text.data(), text.data() + text.size(), y);
        CHECK(std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y));
    }
}

TEST_CASE("histogram csv round trip") {
    const Histogram h(128, -192, {1, 0, 7, 3}, 11);
    std::ostringstream out;
    export_csv(h, out);
    CHECK(out.str() == "tau_ps,counts\n-128,1\n0,0\n128,7\n256,3\n");
    std::istringstream in(out.str());
    const auto back = read_histogram_csv(in);
    CHECK(back.bin_width == 128);
    CHECK(back.origin == -192);
    CHECK(back.counts == h.counts);
}

TEST_CASE("g2, peaks and fit csv columns") {
    G2Curve c{{-64, 64}, {0.5, 1.0 / 3.0}, {0.1, 0.2}};
    std::ostringstream g;
    export_csv(c, g);
    CHECK(g.str().rfind("tau_ps,value,sigma\n", 0) == 0);
    CHECK(g.str().find(format_double(1.0 / 3.0)) != std::string::npos);

    PeakSeries p;
    p.m = {-1, 0, 1};
    p.raw_counts = {10, 2, 12};
    std::ostringstream raw;
    export_csv(p, raw);
    CHECK(raw.str() == "m,c_m,C_N\n-1,10,\n0,2,\n1,12,\n");

    const auto g_path = temp_path("g2.csv");
    export_csv(c, g_path);
    const auto c_back = read_g2_csv(g_path);
    CHECK(c_back.tau_ps == c.tau_ps);
    CHECK(c_back.values == c.values);
    CHECK(c_back.sigma == c.sigma);
    std::filesystem::remove(g_path);

    p.normalized = {1.7, 0.1, 1.8};
    p.sigma = {0.5, 0.05, 0.5};
    const auto p_path = temp_path("peaks.csv");
    export_csv(p, p_path);
    const auto p_back = read_peaks_csv(p_path);
    CHECK(p_back.m == p.m);
    CHECK(p_back.raw_counts == p.raw_counts);
    CHECK(p_back.normalized == p.normalized);
    CHECK(p_back.sigma[0] == doctest::Approx(1.7 / std::sqrt(10.0)));
    std::filesystem::remove(p_path);
}

TEST_CASE("fit results survive JSON") {
    FitResult f;
    f.model = "saturation";
    f.parameters = {{"R_inf", "counts/s", 35000.123, 12.5}, {"P_sat", "uW", 66.0, 0.1}};
    f.chi2 = 3.25;
    f.residual_norm = std::sqrt(3.25);
    f.dof = 6;
    f.iterations = 9;
    f.converged = true;
    f.message = "ok";
    const auto j = to_json(f);
    const auto back = fit_result_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.model == f.model);
    CHECK(back.value("R_inf") == f.value("R_inf"));
    CHECK(back.error("P_sat") == f.error("P_sat"));
    CHECK(back.chi2 == f.chi2);
    CHECK(back.dof == 6);
    CHECK(back.converged);
    CHECK_THROWS_AS(back.at("nope"), std::out_of_range);

    std::ostringstream csv;
    export_csv(f, csv);
    CHECK(csv.str().rfind("name,unit,value,std_error\nR_inf,counts/s,35000.123,12.5\n", 0) == 0);
}

TEST_CASE("power csv") {
    const auto path = temp_path("power.csv");
    {
        std::ofstream out(path);
        out << "power_uw,rate,sigma\n10,1000,30\n20,1800,40\n";
    }
    const auto pts = read_power_csv(path);
    REQUIRE(pts.size() == 2);
    CHECK(pts[1].power_uw == 20.0);
    CHECK(pts[1].value == 1800.0);
    CHECK(pts[1].sigma == 40.0);
    std::filesystem::remove(path);
}
