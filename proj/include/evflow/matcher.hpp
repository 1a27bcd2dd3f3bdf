#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <optional>
#include <vector>

#include "evflow/event.hpp"
#include "evflow/vec2.hpp"

namespace evflow {

enum class WeightMode { gaussian, uniform };

/// Search and averaging parameters of the triplet matcher.
struct MatcherParams {
    double dx = std::numbers::sqrt2;  // spatial search radius, px (Euclidean)
    std::uint64_t dt_us = 100'000;    // temporal search window, µs
    std::uint64_t tau_us = 3'000;     // refractory period, µs
    std::size_t retention = 20'000;   // index maps kept per polarity
    bool exclude_center = false;      // drop zero-displacement neighbors
    WeightMode weight_mode = WeightMode::gaussian;
    double weight_time_scale = 1.0;   // time unit inside the weight, as a multiple of µs

    /// Squared radius used for the lattice test. Distances-squared between
    /// pixels are integers, so the slack only rescues radii typed as
    /// truncated decimals (1.4142 for sqrt 2); it can never admit a farther
    /// lattice point.
    double spatial_radius_sq() const { return dx * dx + 1e-3; }

    /// Half-width of the pixel block that covers the search radius.
    int block_radius() const { return static_cast<int>(std::floor(std::sqrt(spatial_radius_sq()))); }

    /// Upper bound on any emitted speed, px/s.
    double max_speed() const { return dx * 1e6 / static_cast<double>(tau_us); }

    void validate() const;
};

/// Per-event output. flow is empty when the event matched no triplet; that is
/// a normal outcome, not an error.
struct FlowRecord {
    std::int64_t index = -1;    // position in the input stream
    std::optional<Vec2d> flow;  // px/s
    std::uint32_t triplet_count = 0;
};

/// Three matched events, newest first, with the velocity and weight they
/// contribute to the average. Indices are input-stream positions.
struct Triplet {
    std::int64_t k = -1;
    std::int64_t i = -1;
    std::int64_t j = -1;
    Vec2d velocity;  // px/s
    double weight = 0.0;
};

/// Matcher state for a single polarity stream: the retained event records,
/// the index maps in insertion order (bounded by params.retention, evicted
/// oldest-first) and per-pixel recency queues used for the spatial search.
/// Events must arrive in non-decreasing timestamp order.
class PolarityMatcher {
public:
    PolarityMatcher(const MatcherParams& params, int width, int height);

    /// Space-time neighborhood the given event would see, as ascending
    /// input-stream positions. Read-only; does not touch state.
    std::vector<std::int64_t> neighborhood(const Event& e) const;

    /// One full step: search, collect triplets, average, then append the
    /// event and its index map (evicting the oldest map when over retention).
    FlowRecord process(const Event& e, std::int64_t stream_index,
                       std::vector<Triplet>* sink = nullptr);

    std::size_t retained_maps() const { return maps_.size(); }
    std::size_t stored_events() const { return store_.size(); }

private:
    struct Stored {
        std::int64_t t;
        std::int32_t x;
        std::int32_t y;
        std::int64_t stream_index;
    };
    struct PixelQueue {
        std::vector<std::int64_t> ids;  // local ids, ascending
        std::size_t head = 0;           // entries before head are expired
    };
    struct Window {
        std::int64_t lo = 0;
        std::int64_t hi = -1;
        bool empty() const { return hi < lo; }
    };

    Window window_for(std::int64_t t) const;
    void collect_neighbors(const Event& e, std::vector<std::int64_t>& out) const;  // local ids
    void prune_block(const Event& e, std::int64_t window_lo);
    void compact_store();

    const Stored& stored(std::int64_t local) const {
        return store_[static_cast<std::size_t>(local - store_base_)];
    }

    MatcherParams params_;
    int width_;
    int height_;
    std::deque<Stored> store_;  // local id -> event record
    std::int64_t store_base_ = 0;
    std::deque<std::vector<std::int64_t>> maps_;  // local id -> index map
    std::int64_t maps_base_ = 0;
    std::vector<PixelQueue> pixels_;
    std::int64_t next_local_ = 0;
};

/// Routes events into two independent polarity streams and hands out
/// stream positions for incremental use.
class TripletMatcher {
public:
    TripletMatcher(const MatcherParams& params, int width, int height);

    FlowRecord process(const Event& e, std::vector<Triplet>* sink = nullptr);
    FlowRecord process(const Event& e, std::int64_t stream_index,
                       std::vector<Triplet>* sink = nullptr);

    PolarityMatcher& stream(std::int8_t polarity) { return polarity > 0 ? positive_ : negative_; }
    const MatcherParams& params() const { return params_; }

private:
    MatcherParams params_;
    PolarityMatcher positive_;
    PolarityMatcher negative_;
    std::int64_t next_index_ = 0;
};

/// Runs the incremental estimator over a sorted batch; the result is
/// identical to feeding events one by one. Output order matches input order.
/// With threads >= 2 the two polarity streams run in parallel; results do
/// not depend on the thread count. Collected triplets, if requested, are
/// appended in canonical (k, i, j) order.
std::vector<FlowRecord> process_batch(const EventBatch& batch, const MatcherParams& params,
                                      std::vector<Triplet>* triplets = nullptr, int threads = 1);

}  // namespace evflow
