#include "evflow/postprocess.hpp"

namespace evflow {

VoxelFlow voxelize(const EventBatch& batch, std::span<const FlowRecord> records, int bin_count) {
    if (bin_count < 1) throw InvalidBinCountError();
    if (records.size() != batch.events.size()) {
        throw std::invalid_argument("voxelize: records must align with events");
    }

    VoxelFlow v;
    v.width = batch.width;
    v.height = batch.height;
    if (!batch.events.empty()) {
        v.t0 = batch.events.front().t;
        v.t1 = batch.events.back().t;
    }
    v.bins.assign(static_cast<std::size_t>(bin_count), FlowField(batch.width, batch.height));

    std::vector<std::vector<std::uint32_t>> counts(
        static_cast<std::size_t>(bin_count),
        std::vector<std::uint32_t>(static_cast<std::size_t>(batch.width) * batch.height, 0));

    for (std::size_t r = 0; r < records.size(); ++r) {
        if (!records[r].flow) continue;
        const Event& e = batch.events[r];
        const int b = v.bin_of(e.t);
        FlowField& f = v.bins[static_cast<std::size_t>(b)];
        const std::size_t cell = f.idx(e.x, e.y);
        f.flow[cell].x += records[r].flow->x;
        f.flow[cell].y += records[r].flow->y;
        f.valid[cell] = 1;
        ++counts[static_cast<std::size_t>(b)][cell];
    }
    for (int b = 0; b < bin_count; ++b) {
        FlowField& f = v.bins[static_cast<std::size_t>(b)];
        for (std::size_t c = 0; c < f.flow.size(); ++c) {
            if (counts[static_cast<std::size_t>(b)][c] > 0) {
                f.flow[c].x /= counts[static_cast<std::size_t>(b)][c];
                f.flow[c].y /= counts[static_cast<std::size_t>(b)][c];
            }
        }
    }
    return v;
}

VoxelFlow nonzero_average_filter(const VoxelFlow& v) {
    VoxelFlow out = v;
    for (std::size_t b = 0; b < v.bins.size(); ++b) {
        const FlowField& in = v.bins[b];
        FlowField& dst = out.bins[b];
        for (int y = 0; y < v.height; ++y) {
            for (int x = 0; x < v.width; ++x) {
                Vec2d sum;
                int n = 0;
                for (int oy = -1; oy <= 1; ++oy) {
                    const int py = y + oy;
                    if (py < 0 || py >= v.height) continue;
                    for (int ox = -1; ox <= 1; ++ox) {
                        const int px = x + ox;
                        if (px < 0 || px >= v.width) continue;
                        if (!in.is_valid(px, py)) continue;
                        sum.x += in.at(px, py).x;
                        sum.y += in.at(px, py).y;
                        ++n;
                    }
                }
                if (n > 0) {
                    dst.set(x, y, {sum.x / n, sum.y / n});
                } else {
                    dst.flow[dst.idx(x, y)] = Vec2d{};
                    dst.valid[dst.idx(x, y)] = 0;
                }
            }
        }
    }
    return out;
}

FlowField collapse_to_image(const VoxelFlow& v, int bin) {
    if (bin < 0 || bin >= v.bin_count()) {
        throw std::out_of_range("collapse_to_image: bin index out of range");
    }
    return v.bins[static_cast<std::size_t>(bin)];
}

}  // namespace evflow
