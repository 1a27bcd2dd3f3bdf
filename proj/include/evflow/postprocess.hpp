#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "evflow/event.hpp"
#include "evflow/matcher.hpp"
#include "evflow/vec2.hpp"

namespace evflow {

/// Dense flow image with a per-pixel validity mask. Cells without a value
/// are invalid, which is distinct from a valid (0,0) flow.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<Vec2d> flow;
    std::vector<std::uint8_t> valid;

    FlowField() = default;
    FlowField(int w, int h)
        : width(w), height(h),
          flow(static_cast<std::size_t>(w) * static_cast<std::size_t>(h)),
          valid(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

    std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    bool is_valid(int x, int y) const { return valid[idx(x, y)] != 0; }
    const Vec2d& at(int x, int y) const { return flow[idx(x, y)]; }
    void set(int x, int y, const Vec2d& v) {
        flow[idx(x, y)] = v;
        valid[idx(x, y)] = 1;
    }
    std::size_t valid_count() const {
        std::size_t n = 0;
        for (auto m : valid) n += m != 0;
        return n;
    }
};

struct InvalidBinCountError : std::invalid_argument {
    InvalidBinCountError() : std::invalid_argument("voxelize: bin count must be >= 1") {}
};

/// Space-time quantized flow: `bins.size()` time slices over [t0, t1].
struct VoxelFlow {
    std::uint64_t t0 = 0;
    std::uint64_t t1 = 0;
    int width = 0;
    int height = 0;
    std::vector<FlowField> bins;

    int bin_count() const { return static_cast<int>(bins.size()); }
    /// Bin edge i of bin_count()+1, in µs. Edges are strictly increasing.
    double edge(int i) const {
        const auto span = static_cast<double>(t1 > t0 ? t1 - t0 : 1);
        return static_cast<double>(t0) + span * i / bin_count();
    }
    /// Time bin of an in-span timestamp.
    int bin_of(std::uint64_t t) const {
        const std::uint64_t span = t1 > t0 ? t1 - t0 : 1;
        const std::uint64_t off = t > t0 ? t - t0 : 0;
        const auto b = static_cast<int>(off * static_cast<std::uint64_t>(bin_count()) / span);
        return b >= bin_count() ? bin_count() - 1 : b;
    }
};

/// Averages the defined flows of `records` (aligned with `batch.events` by
/// position) into (time bin, pixel) cells. Cells with no defined flow stay
/// invalid. Undefined records contribute nothing.
VoxelFlow voxelize(const EventBatch& batch, std::span<const FlowRecord> records, int bin_count);

/// 3x3 spatial smoothing per bin: each output cell is the mean of the valid
/// cells in its (border-truncated) neighborhood, itself included; cells with
/// no valid neighbor stay invalid. Single pass.
VoxelFlow nonzero_average_filter(const VoxelFlow& v);

/// Extracts one time slice. Throws std::out_of_range on a bad bin index.
FlowField collapse_to_image(const VoxelFlow& v, int bin);

}  // namespace evflow
