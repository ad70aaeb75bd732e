#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>

#include <nlohmann/json.hpp>

#include "mtsr/datapipe.hpp"
#include "mtsr/error.hpp"
#include "mtsr/io_util.hpp"

namespace mtsr {
namespace fs = std::filesystem;
namespace {

constexpr std::string_view kHeader = "time_index,row,col,traffic_mb";

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <typename V>
bool parse_number(std::string_view text, V& out) {
    if (text.empty()) return false;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end;
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    if (ec != std::errc()) throw Error("format_double: conversion failed");
    return std::string(buf, ptr);
}

fs::path sidecar_path(const fs::path& csv) {
    fs::path p = csv;
    p.replace_extension(".meta.json");
    return p;
}

GridMeta read_meta(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open grid metadata " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), 1, std::string("invalid metadata: ") + e.what());
    }
    GridMeta meta;
    try {
        meta.rows = j.at("rows").get<std::size_t>();
        meta.cols = j.at("cols").get<std::size_t>();
        meta.interval_minutes = j.value("interval_minutes", std::size_t{10});
        if (j.contains("frames")) meta.frames = j.at("frames").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), 1, std::string("invalid metadata: ") + e.what());
    }
    if (meta.rows == 0 || meta.cols == 0) throw ConfigError("grid metadata: rows and cols must be positive");
    return meta;
}

void write_meta(const fs::path& path, const GridMeta& meta) {
    nlohmann::json j;
    j["rows"] = meta.rows;
    j["cols"] = meta.cols;
    j["interval_minutes"] = meta.interval_minutes;
    if (meta.frames) j["frames"] = *meta.frames;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

TrafficSeries ingest(const fs::path& csv, const GridMeta& meta) {
    std::ifstream in(csv, std::ios::binary);
    if (!in) throw Error("cannot open " + csv.string());
    const std::string file = csv.string();
    TrafficSeries series;
    series.rows = meta.rows;
    series.cols = meta.cols;
    series.interval_minutes = meta.interval_minutes;
    if (meta.frames) series.frames.assign(*meta.frames, Grid(meta.rows, meta.cols, 0.0));
    std::vector<std::vector<bool>> seen(series.frames.size(), std::vector<bool>(meta.rows * meta.cols, false));

    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view row_text = trim(line);
        if (row_text.empty()) continue;
        if (!header_seen) {
            if (row_text != kHeader) {
                throw ParseError(file, lineno, "expected header '" + std::string(kHeader) + "'");
            }
            header_seen = true;
            continue;
        }
        const auto fields = split(row_text, ',');
        if (fields.size() != 4) {
            throw ParseError(file, lineno, "expected 4 fields, got " + std::to_string(fields.size()));
        }
        std::size_t t = 0, r = 0, c = 0;
        double traffic = 0;
        if (!parse_number(fields[0], t) || !parse_number(fields[1], r) || !parse_number(fields[2], c)) {
            throw ParseError(file, lineno, "time_index, row and col must be non-negative integers");
        }
        if (!parse_number(fields[3], traffic) || !std::isfinite(traffic)) {
            throw ParseError(file, lineno, "non-numeric traffic value '" + std::string(fields[3]) + "'");
        }
        if (traffic < 0) throw ParseError(file, lineno, "negative traffic value");
        if (r >= meta.rows || c >= meta.cols) {
            throw ParseError(file, lineno, "cell (" + std::to_string(r) + ", " + std::to_string(c) +
                                               ") outside the declared " + std::to_string(meta.rows) + "x" +
                                               std::to_string(meta.cols) + " grid");
        }
        if (meta.frames && t >= *meta.frames) {
            throw ParseError(file, lineno, "time_index " + std::to_string(t) + " beyond declared frame count");
        }
        while (series.frames.size() <= t) {
            series.frames.emplace_back(meta.rows, meta.cols, 0.0);
            seen.emplace_back(meta.rows * meta.cols, false);
        }
        const std::size_t cell = r * meta.cols + c;
        if (seen[t][cell]) {
            throw ParseError(file, lineno,
                             "duplicate entry for (" + std::to_string(t) + ", " + std::to_string(r) + ", " +
                                 std::to_string(c) + ")");
        }
        seen[t][cell] = true;
        series.frames[t].values[cell] = traffic;
    }
    if (!header_seen) throw ParseError(file, lineno == 0 ? 1 : lineno, "missing header");
    return series;
}

TrafficSeries ingest(const fs::path& csv) { return ingest(csv, read_meta(sidecar_path(csv))); }

void write_frames_csv(const fs::path& path, const std::vector<Grid>& frames, std::size_t first_time) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << kHeader << "\n";
    std::string buf;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        const Grid& f = frames[k];
        const std::string t = std::to_string(first_time + k);
        for (std::size_t r = 0; r < f.rows; ++r)
            for (std::size_t c = 0; c < f.cols; ++c) {
                buf.clear();
                buf += t;
                buf += ',';
                buf += std::to_string(r);
                buf += ',';
                buf += std::to_string(c);
                buf += ',';
                buf += format_double(f(r, c));
                buf += '\n';
                out << buf;
            }
    }
    if (!out) throw Error("write failed for " + path.string());
}

void write_series(const TrafficSeries& series, const fs::path& csv) {
    series.validate();
    write_frames_csv(csv, series.frames, 0);
    write_meta(sidecar_path(csv), {series.rows, series.cols, series.interval_minutes, series.frames.size()});
}

void write_pgm(const fs::path& path, const Grid& frame, double peak) {
    if (!(peak > 0)) throw ConfigError("write_pgm: peak must be positive");
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "P5\n" << frame.cols << " " << frame.rows << "\n65535\n";
    std::string bytes;
    bytes.reserve(frame.size() * 2);
    for (double v : frame.values) {
        const double scaled = std::clamp(v / peak, 0.0, 1.0) * 65535.0;
        const auto level = static_cast<unsigned>(std::lround(scaled));
        bytes.push_back(static_cast<char>((level >> 8) & 0xFF));
        bytes.push_back(static_cast<char>(level & 0xFF));
    }
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw Error("write failed for " + path.string());
}

TrafficSeries ingest_telecom_italia(const fs::path& tsv, const GridMeta& meta) {
    std::ifstream in(tsv, std::ios::binary);
    if (!in) throw Error("cannot open " + tsv.string());
    const std::string file = tsv.string();
    const long long interval_ms = static_cast<long long>(meta.interval_minutes) * 60'000;
    std::map<std::pair<long long, std::size_t>, double> totals;
    long long first = 0;
    bool any = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view text = trim(line);
        if (text.empty()) continue;
        const auto fields = split(text, '\t');
        if (fields.size() < 3) throw ParseError(file, lineno, "expected at least 3 tab-separated fields");
        std::size_t square = 0;
        long long stamp = 0;
        if (!parse_number(fields[0], square) || square == 0 || square > meta.rows * meta.cols) {
            throw ParseError(file, lineno, "invalid square id '" + std::string(fields[0]) + "'");
        }
        if (!parse_number(fields[1], stamp)) throw ParseError(file, lineno, "invalid timestamp");
        double activity = 0;
        for (std::size_t k = 3; k < fields.size(); ++k) {
            if (fields[k].empty()) continue;
            double v = 0;
            if (!parse_number(fields[k], v) || !std::isfinite(v)) {
                throw ParseError(file, lineno, "non-numeric activity value '" + std::string(fields[k]) + "'");
            }
            activity += v;
        }
        if (!any || stamp < first) first = stamp;
        any = true;
        totals[{stamp, square - 1}] += activity;
    }
    TrafficSeries series;
    series.rows = meta.rows;
    series.cols = meta.cols;
    series.interval_minutes = meta.interval_minutes;
    for (const auto& [key, value] : totals) {
        const long long offset = key.first - first;
        if (offset % interval_ms != 0) {
            throw ParseError(file, 0, "timestamp " + std::to_string(key.first) + " is off the interval grid");
        }
        const std::size_t t = std::size_t(offset / interval_ms);
        while (series.frames.size() <= t) series.frames.emplace_back(meta.rows, meta.cols, 0.0);
        series.frames[t].values[key.second] += std::max(0.0, value);
    }
    if (meta.frames && series.frames.size() < *meta.frames) series.frames.resize(*meta.frames, Grid(meta.rows, meta.cols));
    return series;
}

}  // namespace mtsr
