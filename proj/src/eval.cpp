#include "evflow/eval.hpp"

#include <cmath>
#include <stdexcept>

namespace evflow {

FlowField scale_flow_to_displacement(const FlowField& flow_pxps, double dt_s) {
    if (!(dt_s > 0.0)) throw std::invalid_argument("scale_flow_to_displacement: dt must be > 0");
    FlowField out = flow_pxps;
    for (std::size_t c = 0; c < out.flow.size(); ++c) {
        if (out.valid[c]) {
            out.flow[c].x *= dt_s;
            out.flow[c].y *= dt_s;
        }
    }
    return out;
}

std::optional<AeeResult> aee(const FlowField& pred_disp, const FlowField& gt_disp,
                             double outlier_threshold_px) {
    if (pred_disp.width != gt_disp.width || pred_disp.height != gt_disp.height) {
        throw std::invalid_argument("aee: resolution mismatch");
    }
    double sum = 0.0;
    std::size_t n = 0;
    std::size_t outliers = 0;
    for (std::size_t c = 0; c < pred_disp.flow.size(); ++c) {
        if (!pred_disp.valid[c] || !gt_disp.valid[c]) continue;
        const double ex = pred_disp.flow[c].x - gt_disp.flow[c].x;
        const double ey = pred_disp.flow[c].y - gt_disp.flow[c].y;
        const double err = std::sqrt(ex * ex + ey * ey);
        sum += err;
        if (err > outlier_threshold_px) ++outliers;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return AeeResult{sum / static_cast<double>(n),
                     100.0 * static_cast<double>(outliers) / static_cast<double>(n), n};
}

std::vector<WarpedPoint> warp_events(const EventBatch& batch, std::span<const FlowRecord> records,
                                     std::uint64_t t_ref_us) {
    if (records.size() != batch.events.size()) {
        throw std::invalid_argument("warp_events: records must align with events");
    }
    std::vector<WarpedPoint> pts(batch.events.size());
    for (std::size_t k = 0; k < batch.events.size(); ++k) {
        const Event& e = batch.events[k];
        WarpedPoint p{static_cast<double>(e.x), static_cast<double>(e.y)};
        if (records[k].flow) {
            const double dt_s =
                (static_cast<double>(t_ref_us) - static_cast<double>(e.t)) * 1e-6;
            p.x += records[k].flow->x * dt_s;
            p.y += records[k].flow->y * dt_s;
        }
        pts[k] = p;
    }
    return pts;
}

std::vector<double> iwe(std::span<const WarpedPoint> points, int width, int height) {
    std::vector<double> img(static_cast<std::size_t>(width) * height, 0.0);
    for (const WarpedPoint& p : points) {
        if (p.x < 0.0 || p.y < 0.0 || p.x > width - 1 || p.y > height - 1) continue;
        const int x0 = static_cast<int>(std::floor(p.x));
        const int y0 = static_cast<int>(std::floor(p.y));
        const double wx = p.x - x0;
        const double wy = p.y - y0;
        auto deposit = [&](int x, int y, double w) {
            if (w != 0.0 && x < width && y < height) {
                img[static_cast<std::size_t>(y) * width + x] += w;
            }
        };
        deposit(x0, y0, (1.0 - wx) * (1.0 - wy));
        deposit(x0 + 1, y0, wx * (1.0 - wy));
        deposit(x0, y0 + 1, (1.0 - wx) * wy);
        deposit(x0 + 1, y0 + 1, wx * wy);
    }
    return img;
}

namespace {
double variance(const std::vector<double>& img) {
    double mean = 0.0;
    for (double v : img) mean += v;
    mean /= static_cast<double>(img.size());
    double var = 0.0;
    for (double v : img) var += (v - mean) * (v - mean);
    return var / static_cast<double>(img.size());
}
}  // namespace

std::optional<double> fwl(const EventBatch& batch, std::span<const FlowRecord> records,
                          std::uint64_t t_ref_us) {
    if (batch.events.empty()) throw EmptyStreamError("fwl: empty batch");
    const auto warped = warp_events(batch, records, t_ref_us);
    const std::vector<FlowRecord> zero(records.size());  // all flows undefined -> identity warp
    const auto identity = warp_events(batch, zero, t_ref_us);
    const double num = variance(iwe(warped, batch.width, batch.height));
    const double den = variance(iwe(identity, batch.width, batch.height));
    if (den == 0.0) return std::nullopt;
    return num / den;
}

std::uint64_t VelocityHistogram::direction_total(int direction) const {
    std::uint64_t n = 0;
    for (const auto& [key, count] : counts) {
        if (key.first == direction) n += count;
    }
    return n;
}

std::uint64_t VelocityHistogram::total() const {
    std::uint64_t n = 0;
    for (const auto& [key, count] : counts) n += count;
    return n;
}

std::size_t VelocityHistogram::occupied_magnitude_bins() const {
    std::map<int, bool> bins;
    for (const auto& [key, count] : counts) {
        if (count > 0 && key.first != kZeroBin) bins[key.second] = true;
    }
    return bins.size();
}

StreamReport evaluate_stream(const EventBatch& batch, std::span<const FlowRecord> records,
                             const std::vector<GtIntervalField>& intervals,
                             double outlier_threshold_px, bool smooth, bool with_fwl) {
    if (records.size() != batch.events.size()) {
        throw std::invalid_argument("evaluate_stream: records must align with events");
    }
    StreamReport report;
    double aee_weighted = 0.0;
    double out_weighted = 0.0;
    std::size_t total_eval = 0;
    double fwl_sum = 0.0;
    std::size_t fwl_n = 0;

    for (const GtIntervalField& gi : intervals) {
        IntervalReport ir;
        ir.t0 = gi.t0;
        ir.t1 = gi.t1;

        EventBatch sub;
        sub.width = batch.width;
        sub.height = batch.height;
        std::vector<FlowRecord> sub_records;
        for (std::size_t k = 0; k < batch.events.size(); ++k) {
            if (batch.events[k].t >= gi.t0 && batch.events[k].t <= gi.t1) {
                sub.events.push_back(batch.events[k]);
                sub_records.push_back(records[k]);
            }
        }
        ir.n_events = sub.events.size();
        if (!sub.events.empty()) {
            auto vox = voxelize(sub, sub_records, 1);
            if (smooth) vox = nonzero_average_filter(vox);
            auto pred = scale_flow_to_displacement(collapse_to_image(vox, 0),
                                                   static_cast<double>(gi.t1 - gi.t0) * 1e-6);
            ir.pred_coverage = static_cast<double>(pred.valid_count()) /
                               static_cast<double>(pred.flow.size());
            ir.aee = aee(pred, gi.displacement, outlier_threshold_px);
            if (ir.aee) {
                aee_weighted += ir.aee->aee * static_cast<double>(ir.aee->n_evaluated);
                out_weighted += ir.aee->outlier_pct * static_cast<double>(ir.aee->n_evaluated);
                total_eval += ir.aee->n_evaluated;
            }
            if (with_fwl) {
                ir.fwl = fwl(sub, sub_records, gi.t0 / 2 + gi.t1 / 2);
                if (ir.fwl) {
                    fwl_sum += *ir.fwl;
                    ++fwl_n;
                }
            }
        }
        report.intervals.push_back(std::move(ir));
    }
    if (total_eval > 0) {
        report.aggregate = AeeResult{aee_weighted / static_cast<double>(total_eval),
                                     out_weighted / static_cast<double>(total_eval), total_eval};
    }
    if (fwl_n > 0) report.mean_fwl = fwl_sum / static_cast<double>(fwl_n);
    return report;
}

VelocityHistogram velocity_histogram(std::span<const Triplet> triplets,
                                     double magnitude_bin_width) {
    VelocityHistogram h;
    h.magnitude_bin_width = magnitude_bin_width;
    for (const Triplet& t : triplets) {
        const double vx = t.velocity.x;
        const double vy = t.velocity.y;
        int dir;
        if (vx == 0.0 && vy == 0.0) {
            dir = VelocityHistogram::kZeroBin;
        } else if (vx == 0.0 || vy == 0.0 || std::fabs(vx) == std::fabs(vy)) {
            // Components of a triplet velocity share the divisor t_j - t_k,
            // so axis-aligned and exact-diagonal directions compare exactly.
            const int sx = vx > 0.0 ? 1 : (vx < 0.0 ? -1 : 0);
            const int sy = vy > 0.0 ? 1 : (vy < 0.0 ? -1 : 0);
            // Bin 0 is +x, then clockwise in image coordinates (y grows down).
            static constexpr int lut[3][3] = {
                // sx = -1, 0, +1 across; sy = -1, 0, +1 down
                {5, 6, 7},   // NW, N, NE
                {4, -1, 0},  // W,  -, E
                {3, 2, 1},   // SW, S, SE
            };
            dir = lut[sy + 1][sx + 1];
        } else {
            dir = VelocityHistogram::kOtherBin;
        }
        const double mag = std::sqrt(vx * vx + vy * vy);
        const int mbin = static_cast<int>(mag / magnitude_bin_width);
        ++h.counts[{dir, mbin}];
    }
    return h;
}

}  // namespace evflow
