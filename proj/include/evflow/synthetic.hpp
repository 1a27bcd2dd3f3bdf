#pragma once

#include <cstdint>

#include "evflow/eval.hpp"
#include "evflow/event.hpp"
#include "evflow/vec2.hpp"

namespace evflow {

enum class Pattern {
    vertical_bar,    // vertical stripe, horizontal motion
    horizontal_bar,  // horizontal stripe, vertical motion
    diagonal_edge,   // half-plane edge perpendicular to a diagonal motion
    random_dots,     // isolated single-pixel dots, shared translation
};

/// Scene description for the generator. Velocities must point along one of
/// the eight cardinal/diagonal directions (or be exactly zero, which yields
/// no events); the moving pattern is oriented perpendicular to the motion.
struct SceneSpec {
    Pattern pattern = Pattern::vertical_bar;
    double vx = 200.0;  // px/s, requested
    double vy = 0.0;
    std::uint64_t duration_us = 500'000;
    int width = 48;
    int height = 48;
    std::uint64_t spacing_us = 0;  // re-emission period while a pixel stays covered; 0 = crossings only
    double jitter_us = 0.0;        // Gaussian timestamp noise, std dev
    double noise_rate = 0.0;       // background events per second
    int bar_width_px = 4;
    int dot_count = 12;
};

/// Generated stream with its analytic ground truth. `velocity` is the
/// realized velocity: crossing times live on the integer-µs grid, so the
/// requested speed is rounded to the nearest representable period and the
/// ground truth reports what was actually rendered.
struct SyntheticScene {
    EventBatch batch;
    GroundTruthFlow gt;  // displacement over the full duration, on traversed pixels
    Vec2d velocity;      // px/s
};

/// Deterministic for a given seed. Throws std::runtime_error when a moving
/// pattern produces no events within the duration.
SyntheticScene generate(const SceneSpec& spec, std::uint64_t seed);

/// Adds Gaussian timestamp jitter (std dev jitter_us), drops events i.i.d.
/// with probability drop_prob, and re-sorts. Deterministic for a given seed.
EventBatch perturb(const EventBatch& batch, double jitter_us, double drop_prob,
                   std::uint64_t seed);

}  // namespace evflow
