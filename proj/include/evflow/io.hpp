#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evflow/eval.hpp"
#include "evflow/event.hpp"
#include "evflow/matcher.hpp"
#include "evflow/postprocess.hpp"

namespace evflow {

struct ReadReport {
    std::size_t parsed = 0;   // event lines accepted before normalization
    std::size_t dropped = 0;  // out-of-bounds events removed
};

/// Reads the text event format: one `t x y p` per line, t in decimal
/// seconds, p in {0,1} (also accepts -1); `#` starts a comment line.
/// Pass width/height 0 to infer the resolution from the data. Malformed
/// lines raise std::runtime_error naming the line; an eventless file raises
/// EmptyStreamError.
EventBatch read_events_text(const std::string& path, int width = 0, int height = 0,
                            ReadReport* report = nullptr);

/// Writes `t x y p` lines with t as seconds (6 decimals, exact for µs
/// timestamps) and p in {0,1}.
void write_events_text(const std::string& path, const EventBatch& batch);

/// Per-event flow records: `k t x y p fx fy defined` per line, t in seconds,
/// flow in px/s, defined in {0,1}.
void write_flow_records(const std::string& path, const EventBatch& batch,
                        std::span<const FlowRecord> records);

/// Middlebury-layout flow file: "PIEH", int32 width/height, row-major
/// float32 (u, v) pairs. Invalid cells are written as the (1e9, 1e9)
/// sentinel and restored to invalid on read.
void write_flo(const std::string& path, const FlowField& field);
FlowField read_flo(const std::string& path);

/// Ground-truth intervals for evaluation: text lines `t0_us t1_us path.flo`,
/// paths relative to the index file.
struct GtInterval {
    std::uint64_t t0 = 0;
    std::uint64_t t1 = 0;
    std::string flo_path;
};
std::vector<GtInterval> read_gt_index(const std::string& path);

/// Row-major 8-bit RGB image.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;
};

/// Flow color wheel: hue encodes direction, saturation encodes magnitude
/// relative to the slice maximum; zero flow is white, invalid pixels black.
RgbImage render_flow(const FlowField& field);

struct BenchReport {
    std::size_t n_events = 0;
    double mean_us_per_event = 0.0;
    double p99_us_per_event = 0.0;
    double events_per_second = 0.0;
    double total_seconds = 0.0;
};

/// Times the incremental path (state updates included, I/O excluded) on a
/// single thread, after one warm-up pass over the same batch.
BenchReport bench_throughput(const EventBatch& batch, const MatcherParams& params);

void write_histogram_csv(const std::string& path, const VelocityHistogram& hist);

}  // namespace evflow
