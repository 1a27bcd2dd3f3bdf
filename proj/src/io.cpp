#include "evflow/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace evflow {

namespace {
constexpr float kInvalidFlo = 1e9f;

[[noreturn]] void parse_fail(const std::string& path, std::size_t line_no, const std::string& why) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + why);
}
}  // namespace

EventBatch read_events_text(const std::string& path, int width, int height, ReadReport* report) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    std::vector<Event> raw;
    std::string line;
    std::size_t line_no = 0;
    int max_x = 0, max_y = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        std::istringstream ls(line);
        double t_s = 0.0;
        long long x = 0, y = 0, p = 0;
        if (!(ls >> t_s >> x >> y >> p)) parse_fail(path, line_no, "expected `t x y p`");
        if (t_s < 0.0) parse_fail(path, line_no, "negative timestamp");
        if (!(t_s < 1e12)) parse_fail(path, line_no, "timestamp out of range");
        if (x < -1'000'000'000 || x > 1'000'000'000 || y < -1'000'000'000 || y > 1'000'000'000) {
            parse_fail(path, line_no, "coordinate out of range");
        }
        if (p != 0 && p != 1 && p != -1) {
            parse_fail(path, line_no, "polarity must be 0, 1 or -1, got " + std::to_string(p));
        }
        Event e;
        e.t = static_cast<std::uint64_t>(std::llround(t_s * 1e6));
        e.x = static_cast<std::int32_t>(x);
        e.y = static_cast<std::int32_t>(y);
        e.p = static_cast<std::int8_t>(p);
        max_x = std::max(max_x, e.x);
        max_y = std::max(max_y, e.y);
        raw.push_back(e);
    }
    if (raw.empty()) throw EmptyStreamError("no events in " + path);

    if (width <= 0) width = max_x + 1;
    if (height <= 0) height = max_y + 1;
    NormalizeResult r = normalize_stream(std::move(raw), width, height);
    if (report) {
        report->parsed = r.batch.events.size() + r.dropped;
        report->dropped = r.dropped;
    }
    return std::move(r.batch);
}

void write_events_text(const std::string& path, const EventBatch& batch) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    char buf[96];
    for (const Event& e : batch.events) {
        std::snprintf(buf, sizeof(buf), "%llu.%06llu %d %d %d\n",
                      static_cast<unsigned long long>(e.t / 1000000),
                      static_cast<unsigned long long>(e.t % 1000000), e.x, e.y, e.p > 0 ? 1 : 0);
        out << buf;
    }
}

void write_flow_records(const std::string& path, const EventBatch& batch,
                        std::span<const FlowRecord> records) {
    if (records.size() != batch.events.size()) {
        throw std::invalid_argument("write_flow_records: records must align with events");
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    char buf[192];
    for (std::size_t k = 0; k < records.size(); ++k) {
        const Event& e = batch.events[k];
        const bool defined = records[k].flow.has_value();
        const Vec2d f = defined ? *records[k].flow : Vec2d{};
        std::snprintf(buf, sizeof(buf), "%lld %llu.%06llu %d %d %d %.9g %.9g %d\n",
                      static_cast<long long>(records[k].index),
                      static_cast<unsigned long long>(e.t / 1000000),
                      static_cast<unsigned long long>(e.t % 1000000), e.x, e.y,
                      static_cast<int>(e.p), f.x, f.y, defined ? 1 : 0);
        out << buf;
    }
}

void write_flo(const std::string& path, const FlowField& field) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write("PIEH", 4);
    const std::int32_t w = field.width, h = field.height;
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    for (std::size_t c = 0; c < field.flow.size(); ++c) {
        float u = kInvalidFlo, v = kInvalidFlo;
        if (field.valid[c]) {
            u = static_cast<float>(field.flow[c].x);
            v = static_cast<float>(field.flow[c].y);
        }
        out.write(reinterpret_cast<const char*>(&u), 4);
        out.write(reinterpret_cast<const char*>(&v), 4);
    }
}

FlowField read_flo(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "PIEH", 4) != 0) {
        throw std::runtime_error(path + ": not a flow file (bad magic)");
    }
    std::int32_t w = 0, h = 0;
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    if (!in || w <= 0 || h <= 0 || w > 1 << 16 || h > 1 << 16) {
        throw std::runtime_error(path + ": bad flow dimensions");
    }
    FlowField field(w, h);
    for (std::size_t c = 0; c < field.flow.size(); ++c) {
        float u = 0.f, v = 0.f;
        in.read(reinterpret_cast<char*>(&u), 4);
        in.read(reinterpret_cast<char*>(&v), 4);
        if (!in) throw std::runtime_error(path + ": truncated flow file");
        if (std::isfinite(u) && std::isfinite(v) && std::fabs(u) < 1e8f && std::fabs(v) < 1e8f) {
            field.flow[c] = {static_cast<double>(u), static_cast<double>(v)};
            field.valid[c] = 1;
        }
    }
    return field;
}

std::vector<GtInterval> read_gt_index(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<GtInterval> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        std::istringstream ls(line);
        GtInterval gi;
        if (!(ls >> gi.t0 >> gi.t1 >> gi.flo_path) || gi.t1 <= gi.t0) {
            parse_fail(path, line_no, "expected `t0_us t1_us path.flo` with t1 > t0");
        }
        out.push_back(gi);
    }
    return out;
}

namespace {
void hsv_to_rgb(double h_deg, double s, double v, std::uint8_t* rgb) {
    const double c = v * s;
    const double hp = h_deg / 60.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else { r = c; b = x; }
    const double m = v - c;
    rgb[0] = static_cast<std::uint8_t>(std::lround((r + m) * 255.0));
    rgb[1] = static_cast<std::uint8_t>(std::lround((g + m) * 255.0));
    rgb[2] = static_cast<std::uint8_t>(std::lround((b + m) * 255.0));
}
}  // namespace

RgbImage render_flow(const FlowField& field) {
    RgbImage img;
    img.width = field.width;
    img.height = field.height;
    img.rgb.assign(static_cast<std::size_t>(field.width) * field.height * 3, 0);
    double max_mag = 0.0;
    for (std::size_t c = 0; c < field.flow.size(); ++c) {
        if (field.valid[c]) max_mag = std::max(max_mag, field.flow[c].norm());
    }
    for (std::size_t c = 0; c < field.flow.size(); ++c) {
        if (!field.valid[c]) continue;  // invalid stays black
        const Vec2d& f = field.flow[c];
        const double mag = f.norm();
        const double sat = max_mag > 0.0 ? mag / max_mag : 0.0;
        double hue = std::atan2(f.y, f.x) * 57.29577951308232;
        if (hue < 0.0) hue += 360.0;
        hsv_to_rgb(hue, sat, 1.0, &img.rgb[c * 3]);
    }
    return img;
}

BenchReport bench_throughput(const EventBatch& batch, const MatcherParams& params) {
    using clock = std::chrono::steady_clock;
    {
        TripletMatcher warmup(params, batch.width, batch.height);
        for (std::size_t k = 0; k < batch.events.size(); ++k) {
            warmup.process(batch.events[k], static_cast<std::int64_t>(k));
        }
    }
    TripletMatcher matcher(params, batch.width, batch.height);
    std::vector<double> lat_us(batch.events.size());
    const auto run_start = clock::now();
    for (std::size_t k = 0; k < batch.events.size(); ++k) {
        const auto t0 = clock::now();
        matcher.process(batch.events[k], static_cast<std::int64_t>(k));
        const auto t1 = clock::now();
        lat_us[k] = std::chrono::duration<double, std::micro>(t1 - t0).count();
    }
    const auto run_end = clock::now();

    BenchReport rep;
    rep.n_events = batch.events.size();
    rep.total_seconds = std::chrono::duration<double>(run_end - run_start).count();
    if (!lat_us.empty()) {
        double sum = 0.0;
        for (double v : lat_us) sum += v;
        rep.mean_us_per_event = sum / static_cast<double>(lat_us.size());
        const auto p99 = static_cast<std::size_t>(
            std::min(lat_us.size() - 1, static_cast<std::size_t>(0.99 * lat_us.size())));
        std::nth_element(lat_us.begin(), lat_us.begin() + static_cast<std::ptrdiff_t>(p99),
                         lat_us.end());
        rep.p99_us_per_event = lat_us[p99];
        rep.events_per_second = static_cast<double>(rep.n_events) / rep.total_seconds;
    }
    return rep;
}

void write_histogram_csv(const std::string& path, const VelocityHistogram& hist) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "direction_bin,magnitude_bin,count\n";
    for (const auto& [key, count] : hist.counts) {
        out << key.first << "," << key.second << "," << count << "\n";
    }
}

}  // namespace evflow
