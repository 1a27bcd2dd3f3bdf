#include "evflow/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "evflow/rng.hpp"

namespace evflow {

namespace {

struct Dir {
    int sx = 0;
    int sy = 0;
    bool diagonal() const { return sx != 0 && sy != 0; }
};

Dir classify_direction(double vx, double vy) {
    const bool cardinal = (vx == 0.0) != (vy == 0.0);
    const bool diagonal = vx != 0.0 && vy != 0.0 && std::fabs(vx) == std::fabs(vy);
    if (!cardinal && !diagonal) {
        throw std::invalid_argument(
            "synthetic: velocity must point along a cardinal or diagonal direction");
    }
    return {vx > 0.0 ? 1 : (vx < 0.0 ? -1 : 0), vy > 0.0 ? 1 : (vy < 0.0 ? -1 : 0)};
}

struct Emitter {
    std::vector<Event> events;
    std::vector<std::uint8_t> traversed;
    int width;
    int height;

    Emitter(int w, int h) : traversed(static_cast<std::size_t>(w) * h, 0), width(w), height(h) {}

    void emit(std::uint64_t t, int x, int y, std::int8_t p) {
        events.push_back({t, x, y, p});
        traversed[static_cast<std::size_t>(y) * width + x] = 1;
    }
};

void emit_bar(const SceneSpec& spec, const Dir& d, std::uint64_t period, Emitter& em) {
    // Leading edge crosses lane `lane` (column or row) at (step+1) * period;
    // the trailing edge follows bar_width lanes behind with opposite polarity.
    const bool horizontal_motion = d.sy == 0;
    const int lanes = horizontal_motion ? spec.width : spec.height;
    const int span = horizontal_motion ? spec.height : spec.width;
    const int step_sign = horizontal_motion ? d.sx : d.sy;
    const auto lag = static_cast<std::uint64_t>(spec.bar_width_px) * period;
    for (int step = 0; step < lanes; ++step) {
        const int lane = step_sign > 0 ? step : lanes - 1 - step;
        const std::uint64_t t_lead = static_cast<std::uint64_t>(step + 1) * period;
        if (t_lead > spec.duration_us) break;
        const std::uint64_t t_trail = t_lead + lag;
        for (int s = 0; s < span; ++s) {
            const int x = horizontal_motion ? lane : s;
            const int y = horizontal_motion ? s : lane;
            em.emit(t_lead, x, y, 1);
            if (t_trail <= spec.duration_us) em.emit(t_trail, x, y, -1);
            if (spec.spacing_us > 0) {
                // sustained stimulus while the bar body covers the pixel
                for (std::uint64_t t = t_lead + spec.spacing_us;
                     t < t_trail && t <= spec.duration_us; t += spec.spacing_us) {
                    em.emit(t, x, y, 1);
                }
            }
        }
    }
}

void emit_diagonal_edge(const SceneSpec& spec, const Dir& d, std::uint64_t period, Emitter& em) {
    // The edge line is perpendicular to the motion; pixels are crossed in
    // increasing sweep index m = sx*x + sy*y.
    int m_min = 0;
    m_min = std::min(m_min, d.sx * (spec.width - 1));
    m_min = std::min(m_min, d.sy * (spec.height - 1));
    m_min = std::min(m_min, d.sx * (spec.width - 1) + d.sy * (spec.height - 1));
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const int m = d.sx * x + d.sy * y;
            const std::uint64_t t = static_cast<std::uint64_t>(m - m_min + 1) * period;
            if (t <= spec.duration_us) em.emit(t, x, y, 1);
        }
    }
}

void emit_dots(const SceneSpec& spec, const Dir& d, std::uint64_t period, Emitter& em, Rng& rng) {
    // Transverse anchor of a dot's path; parallel paths at least 3 apart
    // keep the 3x3 searches of different dots disjoint.
    auto path_anchor = [&](int x, int y) {
        if (d.sy == 0) return y;
        if (d.sx == 0) return x;
        return d.sx * d.sy > 0 ? x - y : x + y;
    };
    std::vector<int> anchors;
    for (int dot = 0; dot < spec.dot_count; ++dot) {
        for (int attempt = 0; attempt < 64; ++attempt) {
            const int x0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.width)));
            const int y0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.height)));
            const int tc = path_anchor(x0, y0);
            bool clash = false;
            for (int a : anchors) clash = clash || std::abs(a - tc) < 3;
            if (clash) continue;
            // walk back to the entry border so the path is as long as possible
            int x = x0, y = y0;
            while (x - d.sx >= 0 && x - d.sx < spec.width && y - d.sy >= 0 &&
                   y - d.sy < spec.height) {
                x -= d.sx;
                y -= d.sy;
            }
            int len = 0;
            for (int cx = x, cy = y; cx >= 0 && cx < spec.width && cy >= 0 && cy < spec.height;
                 cx += d.sx, cy += d.sy) {
                ++len;
            }
            if (len < 6) continue;
            anchors.push_back(tc);
            const std::uint64_t t0 = period + rng.uniform_int(4 * period);
            int n = 0;
            for (int cx = x, cy = y; cx >= 0 && cx < spec.width && cy >= 0 && cy < spec.height;
                 cx += d.sx, cy += d.sy, ++n) {
                const std::uint64_t t = t0 + static_cast<std::uint64_t>(n) * period;
                if (t > spec.duration_us) break;
                em.emit(t, cx, cy, 1);
                if (n > 0) em.emit(t, cx - d.sx, cy - d.sy, -1);  // dot just left this pixel
            }
            break;
        }
    }
}

}  // namespace

SyntheticScene generate(const SceneSpec& spec, std::uint64_t seed) {
    if (spec.width <= 0 || spec.height <= 0) {
        throw std::invalid_argument("synthetic: resolution must be positive");
    }
    SyntheticScene scene;
    scene.batch.width = spec.width;
    scene.batch.height = spec.height;
    scene.gt.displacement = FlowField(spec.width, spec.height);
    scene.gt.t0 = 0;
    scene.gt.t1 = spec.duration_us;

    if (spec.vx == 0.0 && spec.vy == 0.0) {
        return scene;  // no brightness change, no events
    }

    const Dir d = classify_direction(spec.vx, spec.vy);
    switch (spec.pattern) {
        case Pattern::vertical_bar:
            if (d.sy != 0) throw std::invalid_argument("synthetic: vertical bar needs horizontal motion");
            break;
        case Pattern::horizontal_bar:
            if (d.sx != 0) throw std::invalid_argument("synthetic: horizontal bar needs vertical motion");
            break;
        case Pattern::diagonal_edge:
            if (!d.diagonal()) throw std::invalid_argument("synthetic: diagonal edge needs diagonal motion");
            break;
        case Pattern::random_dots:
            break;
    }

    // Crossing times live on the integer-µs grid: the sweep advances one
    // pixel lane per `period`, and the realized velocity follows from the
    // rounded period rather than the requested one.
    const double lane_rate = std::fabs(spec.vx) + std::fabs(spec.vy);  // lanes per second
    std::uint64_t period = static_cast<std::uint64_t>(std::llround(1e6 / lane_rate));
    if (period == 0) period = 1;
    const double component = 1e6 / (static_cast<double>(period) * (d.diagonal() ? 2.0 : 1.0));
    scene.velocity = {d.sx * component, d.sy * component};

    Emitter em(spec.width, spec.height);
    Rng rng(seed);
    switch (spec.pattern) {
        case Pattern::vertical_bar:
        case Pattern::horizontal_bar:
            emit_bar(spec, d, period, em);
            break;
        case Pattern::diagonal_edge:
            emit_diagonal_edge(spec, d, period, em);
            break;
        case Pattern::random_dots:
            emit_dots(spec, d, period, em, rng);
            break;
    }
    if (em.events.empty()) {
        throw std::runtime_error("synthetic: duration too short, no edge crossing occurred");
    }

    if (spec.jitter_us > 0.0) {
        for (Event& e : em.events) {
            const double t = static_cast<double>(e.t) + rng.normal() * spec.jitter_us;
            e.t = t <= 0.0 ? 0 : static_cast<std::uint64_t>(std::llround(t));
        }
    }
    if (spec.noise_rate > 0.0) {
        const auto n_noise =
            static_cast<std::uint64_t>(std::llround(spec.noise_rate * spec.duration_us * 1e-6));
        for (std::uint64_t i = 0; i < n_noise; ++i) {
            Event e;
            e.t = rng.uniform_int(spec.duration_us + 1);
            e.x = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.width)));
            e.y = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.height)));
            e.p = rng.uniform01() < 0.5 ? 1 : -1;
            em.events.push_back(e);
        }
    }

    std::stable_sort(em.events.begin(), em.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    scene.batch.events = std::move(em.events);

    // Ground truth is claimed on traversed pixels away from the image border,
    // where the pattern's local space-time structure is complete.
    const Vec2d disp = scene.velocity * (static_cast<double>(spec.duration_us) * 1e-6);
    for (int y = 2; y < spec.height - 2; ++y) {
        for (int x = 2; x < spec.width - 2; ++x) {
            if (em.traversed[static_cast<std::size_t>(y) * spec.width + x]) {
                scene.gt.displacement.set(x, y, disp);
            }
        }
    }
    return scene;
}

EventBatch perturb(const EventBatch& batch, double jitter_us, double drop_prob,
                   std::uint64_t seed) {
    Rng rng(seed);
    EventBatch out;
    out.width = batch.width;
    out.height = batch.height;
    out.events.reserve(batch.events.size());
    for (const Event& e : batch.events) {
        Event copy = e;
        if (jitter_us > 0.0) {
            const double t = static_cast<double>(e.t) + rng.normal() * jitter_us;
            copy.t = t <= 0.0 ? 0 : static_cast<std::uint64_t>(std::llround(t));
        }
        if (drop_prob > 0.0 && rng.uniform01() < drop_prob) continue;
        out.events.push_back(copy);
    }
    std::stable_sort(out.events.begin(), out.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    return out;
}

}  // namespace evflow
