#include "evflow/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace evflow {

namespace {
constexpr double kSqrt2Pi = 2.5066282746310002;

// Index range [first, last) of events whose timestamp lies in
// [t_new - tau - dt, t_new - tau]; the batch is sorted by t.
struct Range {
    std::size_t first;
    std::size_t last;
};

Range window_range(const std::vector<std::int64_t>& times, std::int64_t t_new, std::int64_t tau,
                   std::int64_t dt) {
    const std::int64_t hi = t_new - tau;
    if (hi < 0) return {0, 0};
    const std::int64_t lo = t_new - tau - dt;
    const auto b = std::lower_bound(times.begin(), times.end(), lo);
    const auto e = std::upper_bound(times.begin(), times.end(), hi);
    return {static_cast<std::size_t>(b - times.begin()), static_cast<std::size_t>(e - times.begin())};
}
}  // namespace

std::vector<FlowRecord> brute_force_flow(const EventBatch& batch, const MatcherParams& params,
                                         std::vector<Triplet>* triplets) {
    params.validate();
    const auto& ev = batch.events;
    const std::size_t n = ev.size();
    std::vector<FlowRecord> out(n);
    if (n == 0) return out;

    std::vector<std::int64_t> times(n);
    std::vector<std::int64_t> pord(n);  // ordinal within the event's polarity stream
    std::int64_t n_pos = 0, n_neg = 0;
    for (std::size_t k = 0; k < n; ++k) {
        times[k] = static_cast<std::int64_t>(ev[k].t);
        pord[k] = ev[k].p > 0 ? n_pos++ : n_neg++;
    }

    const auto tau = static_cast<std::int64_t>(params.tau_us);
    const auto dt = static_cast<std::int64_t>(params.dt_us);
    const auto retention = static_cast<std::int64_t>(params.retention);
    const double rsq = params.spatial_radius_sq();
    const bool gaussian = params.weight_mode == WeightMode::gaussian;

    auto spatial_ok = [&](const Event& a, const Event& b) {
        const std::int64_t ddx = a.x - b.x;
        const std::int64_t ddy = a.y - b.y;
        if (params.exclude_center && ddx == 0 && ddy == 0) return false;
        return static_cast<double>(ddx * ddx + ddy * ddy) <= rsq;
    };

    struct Vote {
        double exponent;
        Vec2d velocity;
        double delta_scaled;
        std::size_t i;
        std::size_t j;
    };
    std::vector<Vote> votes;

    for (std::size_t k = 0; k < n; ++k) {
        votes.clear();
        const Range ri = window_range(times, times[k], tau, dt);
        for (std::size_t i = ri.first; i < ri.last; ++i) {
            if (ev[i].p != ev[k].p) continue;
            if (!spatial_ok(ev[k], ev[i])) continue;
            if (pord[k] - pord[i] > retention) continue;  // H_i no longer retained
            const std::int32_t ddx = ev[k].x - ev[i].x;
            const std::int32_t ddy = ev[k].y - ev[i].y;
            const Range rj = window_range(times, times[i], tau, dt);
            for (std::size_t j = rj.first; j < rj.last; ++j) {
                if (ev[j].p != ev[i].p) continue;
                if (!spatial_ok(ev[i], ev[j])) continue;
                if (ev[i].x - ev[j].x != ddx || ev[i].y - ev[j].y != ddy) continue;
                const double inv_dt = 1e6 / static_cast<double>(times[j] - times[k]);
                const Vec2d v{(ev[j].x - ev[k].x) * inv_dt, (ev[j].y - ev[k].y) * inv_dt};
                const std::int64_t delta_us = times[k] - times[i];
                const double dev =
                    static_cast<double>(times[j] - (times[i] - delta_us)) * params.weight_time_scale;
                const double delta = static_cast<double>(delta_us) * params.weight_time_scale;
                const double exponent = gaussian ? -0.5 * (dev / delta) * (dev / delta) : 0.0;
                votes.push_back({exponent, v, delta, i, j});
            }
        }

        FlowRecord rec;
        rec.index = static_cast<std::int64_t>(k);
        rec.triplet_count = static_cast<std::uint32_t>(votes.size());
        if (!votes.empty()) {
            double emax = 0.0;
            if (gaussian) {
                emax = votes.front().exponent;
                for (const Vote& v : votes) emax = std::max(emax, v.exponent);
            }
            double sum_w = 0.0;
            Vec2d sum_wv;
            for (const Vote& v : votes) {
                const double w = gaussian ? std::exp(v.exponent - emax) / (v.delta_scaled * kSqrt2Pi) : 1.0;
                sum_w += w;
                sum_wv.x += w * v.velocity.x;
                sum_wv.y += w * v.velocity.y;
                if (triplets) {
                    const double raw =
                        gaussian ? std::exp(v.exponent) / (v.delta_scaled * kSqrt2Pi) : 1.0;
                    triplets->push_back({static_cast<std::int64_t>(k), static_cast<std::int64_t>(v.i),
                                         static_cast<std::int64_t>(v.j), v.velocity, raw});
                }
            }
            rec.flow = Vec2d{sum_wv.x / sum_w, sum_wv.y / sum_w};
        }
        out[k] = rec;
    }
    return out;
}

}  // namespace evflow
