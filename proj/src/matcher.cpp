#include "evflow/matcher.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>
#include <thread>

namespace evflow {

namespace {
constexpr double kSqrt2Pi = 2.5066282746310002;

struct Candidate {
    double exponent;      // log of the Gaussian kernel, 0 for uniform weights
    Vec2d velocity;       // px/s
    double delta_scaled;  // t_k - t_i in weight time units
    std::int64_t i;
    std::int64_t j;
};
}  // namespace

void MatcherParams::validate() const {
    if (!(dx > 0.0)) throw std::invalid_argument("matcher: dx must be > 0");
    if (dt_us == 0) throw std::invalid_argument("matcher: dt must be > 0");
    if (tau_us == 0) throw std::invalid_argument("matcher: tau must be > 0");
    if (retention == 0) throw std::invalid_argument("matcher: retention must be > 0");
    if (!(weight_time_scale > 0.0)) throw std::invalid_argument("matcher: weight time scale must be > 0");
}

PolarityMatcher::PolarityMatcher(const MatcherParams& params, int width, int height)
    : params_(params), width_(width), height_(height) {
    params_.validate();
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("matcher: resolution must be positive");
    }
    pixels_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
}

PolarityMatcher::Window PolarityMatcher::window_for(std::int64_t t) const {
    const auto tau = static_cast<std::int64_t>(params_.tau_us);
    const auto dt = static_cast<std::int64_t>(params_.dt_us);
    Window w;
    if (t < tau) return w;  // nothing can precede the refractory gap
    w.hi = t - tau;
    w.lo = (t >= tau + dt) ? t - tau - dt : 0;
    return w;
}

void PolarityMatcher::collect_neighbors(const Event& e, std::vector<std::int64_t>& out) const {
    const Window win = window_for(static_cast<std::int64_t>(e.t));
    if (win.empty()) return;
    const double rsq = params_.spatial_radius_sq();
    const int r = params_.block_radius();
    for (int oy = -r; oy <= r; ++oy) {
        const int py = e.y + oy;
        if (py < 0 || py >= height_) continue;
        for (int ox = -r; ox <= r; ++ox) {
            if (static_cast<double>(ox * ox + oy * oy) > rsq) continue;
            if (params_.exclude_center && ox == 0 && oy == 0) continue;
            const int px = e.x + ox;
            if (px < 0 || px >= width_) continue;
            const PixelQueue& q = pixels_[static_cast<std::size_t>(py) * width_ + px];
            // ids ascend in time; expired/evicted ids form a prefix
            auto first = std::lower_bound(
                q.ids.begin() + static_cast<std::ptrdiff_t>(q.head), q.ids.end(), win.lo,
                [this](std::int64_t id, std::int64_t lo) {
                    return id < store_base_ || stored(id).t < lo;
                });
            for (auto it = first; it != q.ids.end() && stored(*it).t <= win.hi; ++it) {
                out.push_back(*it);
            }
        }
    }
    std::sort(out.begin(), out.end());
}

void PolarityMatcher::prune_block(const Event& e, std::int64_t window_lo) {
    const int r = params_.block_radius();
    for (int oy = -r; oy <= r; ++oy) {
        const int py = e.y + oy;
        if (py < 0 || py >= height_) continue;
        for (int ox = -r; ox <= r; ++ox) {
            const int px = e.x + ox;
            if (px < 0 || px >= width_) continue;
            PixelQueue& q = pixels_[static_cast<std::size_t>(py) * width_ + px];
            while (q.head < q.ids.size() &&
                   (q.ids[q.head] < store_base_ || stored(q.ids[q.head]).t < window_lo)) {
                ++q.head;
            }
            if (q.head > 64 && q.head * 2 >= q.ids.size()) {
                q.ids.erase(q.ids.begin(), q.ids.begin() + static_cast<std::ptrdiff_t>(q.head));
                q.head = 0;
            }
        }
    }
}

void PolarityMatcher::compact_store() {
    // Events older than the oldest retained index map's window can no longer
    // be referenced by any retained map or future search window.
    const std::int64_t t_oldest = stored(maps_base_).t;
    const std::int64_t cut =
        t_oldest - static_cast<std::int64_t>(params_.tau_us) - static_cast<std::int64_t>(params_.dt_us);
    while (store_base_ < maps_base_ && store_.front().t < cut) {
        store_.pop_front();
        ++store_base_;
    }
}

std::vector<std::int64_t> PolarityMatcher::neighborhood(const Event& e) const {
    std::vector<std::int64_t> locals;
    collect_neighbors(e, locals);
    std::vector<std::int64_t> out;
    out.reserve(locals.size());
    for (std::int64_t id : locals) out.push_back(stored(id).stream_index);
    return out;
}

FlowRecord PolarityMatcher::process(const Event& e, std::int64_t stream_index,
                                    std::vector<Triplet>* sink) {
    assert(store_.empty() || static_cast<std::int64_t>(e.t) >= store_.back().t);

    const std::int64_t t_k = static_cast<std::int64_t>(e.t);
    const Window win = window_for(t_k);
    if (!win.empty()) prune_block(e, win.lo);

    std::vector<std::int64_t> h_k;
    collect_neighbors(e, h_k);

    // Triplets: each in-window neighbor i proposes the events j of its own
    // stored index map that continue the displacement x_k - x_i backwards.
    std::vector<Candidate> cands;
    const bool gaussian = params_.weight_mode == WeightMode::gaussian;
    for (std::int64_t i_local : h_k) {
        if (i_local < maps_base_) continue;  // index map evicted; contributes nothing
        const Stored& si = stored(i_local);
        const std::int32_t ddx = e.x - si.x;
        const std::int32_t ddy = e.y - si.y;
        const std::int64_t delta_us = t_k - si.t;
        assert(delta_us >= static_cast<std::int64_t>(params_.tau_us));
        for (std::int64_t j_local : maps_[static_cast<std::size_t>(i_local - maps_base_)]) {
            assert(j_local >= store_base_);
            const Stored& sj = stored(j_local);
            if (si.x - sj.x != ddx || si.y - sj.y != ddy) continue;
            assert(sj.t <= si.t - static_cast<std::int64_t>(params_.tau_us));
            const double inv_dt = 1e6 / static_cast<double>(sj.t - t_k);
            const Vec2d v{(sj.x - e.x) * inv_dt, (sj.y - e.y) * inv_dt};
            // deviation of t_j from its constant-velocity prediction t_i - delta
            const double dev = static_cast<double>(sj.t - (si.t - delta_us)) * params_.weight_time_scale;
            const double delta = static_cast<double>(delta_us) * params_.weight_time_scale;
            const double ex = gaussian ? -0.5 * (dev / delta) * (dev / delta) : 0.0;
            cands.push_back({ex, v, delta, si.stream_index, sj.stream_index});
        }
    }

    FlowRecord rec;
    rec.index = stream_index;
    rec.triplet_count = static_cast<std::uint32_t>(cands.size());
    if (!cands.empty()) {
        // Weights are normalized by the largest exponent before summing so
        // that far-off-prediction triplets cannot underflow the denominator
        // to zero; the common factor cancels in the average.
        double emax = 0.0;
        if (gaussian) {
            emax = cands.front().exponent;
            for (const Candidate& c : cands) emax = std::max(emax, c.exponent);
        }
        double sum_w = 0.0;
        Vec2d sum_wv;
        for (const Candidate& c : cands) {
            const double w = gaussian ? std::exp(c.exponent - emax) / (c.delta_scaled * kSqrt2Pi) : 1.0;
            sum_w += w;
            sum_wv.x += w * c.velocity.x;
            sum_wv.y += w * c.velocity.y;
            if (sink) {
                const double raw =
                    gaussian ? std::exp(c.exponent) / (c.delta_scaled * kSqrt2Pi) : 1.0;
                sink->push_back({stream_index, c.i, c.j, c.velocity, raw});
            }
        }
        rec.flow = Vec2d{sum_wv.x / sum_w, sum_wv.y / sum_w};
    }

    // State update happens regardless of the match outcome.
    const std::int64_t local = next_local_++;
    store_.push_back({t_k, e.x, e.y, stream_index});
    std::vector<std::int64_t> map_entry(h_k.begin(), h_k.end());
    maps_.push_back(std::move(map_entry));
    pixels_[static_cast<std::size_t>(e.y) * width_ + e.x].ids.push_back(local);
    if (maps_.size() > params_.retention) {
        maps_.pop_front();
        ++maps_base_;
        compact_store();
    }
    return rec;
}

TripletMatcher::TripletMatcher(const MatcherParams& params, int width, int height)
    : params_(params), positive_(params, width, height), negative_(params, width, height) {}

FlowRecord TripletMatcher::process(const Event& e, std::vector<Triplet>* sink) {
    return process(e, next_index_++, sink);
}

FlowRecord TripletMatcher::process(const Event& e, std::int64_t stream_index,
                                   std::vector<Triplet>* sink) {
    if (e.p != 1 && e.p != -1) {
        throw std::invalid_argument("matcher: event polarity must be +1 or -1");
    }
    next_index_ = std::max(next_index_, stream_index + 1);
    return stream(e.p).process(e, stream_index, sink);
}

std::vector<FlowRecord> process_batch(const EventBatch& batch, const MatcherParams& params,
                                      std::vector<Triplet>* triplets, int threads) {
    params.validate();
    std::vector<FlowRecord> out(batch.events.size());
    if (batch.events.empty()) return out;

    auto run_stream = [&](std::int8_t pol, std::vector<Triplet>* sink) {
        PolarityMatcher m(params, batch.width, batch.height);
        for (std::size_t k = 0; k < batch.events.size(); ++k) {
            const Event& e = batch.events[k];
            if ((e.p > 0) == (pol > 0)) {
                out[k] = m.process(e, static_cast<std::int64_t>(k), sink);
            }
        }
    };

    std::vector<Triplet> pos_triplets;
    std::vector<Triplet> neg_triplets;
    std::vector<Triplet>* pos_sink = triplets ? &pos_triplets : nullptr;
    std::vector<Triplet>* neg_sink = triplets ? &neg_triplets : nullptr;
    if (threads >= 2) {
        std::thread tp(run_stream, std::int8_t{1}, pos_sink);
        std::thread tn(run_stream, std::int8_t{-1}, neg_sink);
        tp.join();
        tn.join();
    } else {
        run_stream(1, pos_sink);
        run_stream(-1, neg_sink);
    }

    if (triplets) {
        const auto base = static_cast<std::ptrdiff_t>(triplets->size());
        triplets->reserve(triplets->size() + pos_triplets.size() + neg_triplets.size());
        triplets->insert(triplets->end(), pos_triplets.begin(), pos_triplets.end());
        triplets->insert(triplets->end(), neg_triplets.begin(), neg_triplets.end());
        std::sort(triplets->begin() + base, triplets->end(),
                  [](const Triplet& a, const Triplet& b) {
                      if (a.k != b.k) return a.k < b.k;
                      if (a.i != b.i) return a.i < b.i;
                      return a.j < b.j;
                  });
    }
    return out;
}

}  // namespace evflow
