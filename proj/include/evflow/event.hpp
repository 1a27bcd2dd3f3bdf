#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace evflow {

/// One brightness-change sample. Timestamps are integer microseconds;
/// polarity is +1/-1 once normalized ({0,1} raw encodings are mapped to
/// {-1,+1} by normalize_stream).
struct Event {
    std::uint64_t t = 0;  // µs
    std::int32_t x = 0;   // pixel column
    std::int32_t y = 0;   // pixel row
    std::int8_t p = 0;    // polarity

    bool operator==(const Event& o) const { return t == o.t && x == o.x && y == o.y && p == o.p; }
};

/// Events sorted by timestamp (non-decreasing), all within the declared
/// sensor resolution.
struct EventBatch {
    std::vector<Event> events;
    int width = 0;
    int height = 0;

    std::size_t size() const { return events.size(); }
    bool empty() const { return events.empty(); }
};

struct EmptyStreamError : std::runtime_error {
    EmptyStreamError() : std::runtime_error("empty event stream") {}
    explicit EmptyStreamError(const std::string& what) : std::runtime_error(what) {}
};

struct NormalizeResult {
    EventBatch batch;
    std::size_t dropped = 0;  // out-of-bounds events removed
};

/// Stable-sorts by timestamp, maps {0,1} polarities to {-1,+1} and drops
/// out-of-bounds events. Ties in t keep input order. Throws EmptyStreamError
/// on empty input and std::invalid_argument on a polarity outside {-1,0,+1}.
NormalizeResult normalize_stream(std::vector<Event> raw, int width, int height);

/// Order-preserving partition into (positive, negative) streams.
std::pair<EventBatch, EventBatch> split_by_polarity(const EventBatch& batch);

}  // namespace evflow
