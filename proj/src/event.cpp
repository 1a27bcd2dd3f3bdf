#include "evflow/event.hpp"

#include <algorithm>

namespace evflow {

NormalizeResult normalize_stream(std::vector<Event> raw, int width, int height) {
    if (raw.empty()) {
        throw EmptyStreamError();
    }
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("normalize_stream: resolution must be positive");
    }

    NormalizeResult out;
    out.batch.width = width;
    out.batch.height = height;
    out.batch.events.reserve(raw.size());
    for (Event e : raw) {
        if (e.p == 0) {
            e.p = -1;  // {0,1} encoding
        } else if (e.p != 1 && e.p != -1) {
            throw std::invalid_argument("normalize_stream: polarity must be in {-1,0,+1}, got " +
                                        std::to_string(static_cast<int>(e.p)));
        }
        if (e.x < 0 || e.x >= width || e.y < 0 || e.y >= height) {
            ++out.dropped;
            continue;
        }
        out.batch.events.push_back(e);
    }
    std::stable_sort(out.batch.events.begin(), out.batch.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    return out;
}

std::pair<EventBatch, EventBatch> split_by_polarity(const EventBatch& batch) {
    EventBatch pos{{}, batch.width, batch.height};
    EventBatch neg{{}, batch.width, batch.height};
    for (const Event& e : batch.events) {
        (e.p > 0 ? pos : neg).events.push_back(e);
    }
    return {std::move(pos), std::move(neg)};
}

}  // namespace evflow
