#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "evflow/event.hpp"
#include "evflow/matcher.hpp"
#include "evflow/postprocess.hpp"

namespace evflow {

/// Dense displacement field (px) over the interval [t0, t1], valid only
/// where the mask is set.
struct GroundTruthFlow {
    FlowField displacement;
    std::uint64_t t0 = 0;
    std::uint64_t t1 = 0;

    double interval_s() const { return static_cast<double>(t1 - t0) * 1e-6; }
};

/// Converts a px/s flow slice into a px displacement over dt seconds.
/// Throws std::invalid_argument when dt <= 0. The validity mask carries over.
FlowField scale_flow_to_displacement(const FlowField& flow_pxps, double dt_s);

struct AeeResult {
    double aee = 0.0;          // px
    double outlier_pct = 0.0;  // % of evaluated pixels with error strictly above the threshold
    std::size_t n_evaluated = 0;
};

/// Endpoint error over the pixels valid in both fields. Returns nullopt when
/// the two validity masks do not overlap.
std::optional<AeeResult> aee(const FlowField& pred_disp, const FlowField& gt_disp,
                             double outlier_threshold_px = 3.0);

struct WarpedPoint {
    double x = 0.0;
    double y = 0.0;
};

/// Displaces each event to t_ref along its estimated flow; events without a
/// defined flow keep their position.
std::vector<WarpedPoint> warp_events(const EventBatch& batch, std::span<const FlowRecord> records,
                                     std::uint64_t t_ref_us);

/// Accumulates unit mass per point bilinearly; points outside
/// [0, W-1] x [0, H-1] are discarded. Row-major H x W image.
std::vector<double> iwe(std::span<const WarpedPoint> points, int width, int height);

/// Sharpness ratio Var(warped IWE) / Var(zero-flow IWE) over all pixels.
/// Returns nullopt when the zero-flow baseline has zero variance.
std::optional<double> fwl(const EventBatch& batch, std::span<const FlowRecord> records,
                          std::uint64_t t_ref_us);

/// Triplet-velocity distribution: eight cardinal direction bins, a zero bin,
/// and an overflow bin for off-axis directions (unreachable at the default
/// search radius), each with fixed-width magnitude bins.
struct VelocityHistogram {
    static constexpr int kDirections = 8;  // E, SE, S, SW, W, NW, N, NE in image coordinates
    static constexpr int kZeroBin = 8;
    static constexpr int kOtherBin = 9;

    double magnitude_bin_width = 10.0;  // px/s
    std::map<std::pair<int, int>, std::uint64_t> counts;  // (direction, magnitude bin) -> n

    std::uint64_t direction_total(int direction) const;
    std::uint64_t total() const;
    std::size_t occupied_magnitude_bins() const;
    bool cardinal_or_zero_only() const { return direction_total(kOtherBin) == 0; }
};

VelocityHistogram velocity_histogram(std::span<const Triplet> triplets,
                                     double magnitude_bin_width = 10.0);

/// Ground truth for one evaluation interval.
struct GtIntervalField {
    std::uint64_t t0 = 0;
    std::uint64_t t1 = 0;
    FlowField displacement;  // px over [t0, t1]
};

struct IntervalReport {
    std::uint64_t t0 = 0;
    std::uint64_t t1 = 0;
    std::size_t n_events = 0;
    double pred_coverage = 0.0;  // fraction of pixels with a predicted flow
    std::optional<AeeResult> aee;
    std::optional<double> fwl;
};

struct StreamReport {
    std::vector<IntervalReport> intervals;
    std::optional<AeeResult> aggregate;  // AEE/%Out weighted by evaluated pixels
    std::optional<double> mean_fwl;
};

/// Benchmark-style evaluation: slices the stream into the ground-truth
/// intervals, voxelizes each slice into one bin (optionally smoothed),
/// scales to displacement and scores it; FWL is computed per interval at
/// the interval midpoint when requested.
StreamReport evaluate_stream(const EventBatch& batch, std::span<const FlowRecord> records,
                             const std::vector<GtIntervalField>& intervals,
                             double outlier_threshold_px = 3.0, bool smooth = true,
                             bool with_fwl = false);

}  // namespace evflow
