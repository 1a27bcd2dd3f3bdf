#pragma once

#include <cmath>

namespace evflow {

struct Vec2d {
    double x = 0.0;
    double y = 0.0;

    Vec2d operator+(const Vec2d& o) const { return {x + o.x, y + o.y}; }
    Vec2d operator-(const Vec2d& o) const { return {x - o.x, y - o.y}; }
    Vec2d operator*(double s) const { return {x * s, y * s}; }
    bool operator==(const Vec2d& o) const { return x == o.x && y == o.y; }

    double norm() const { return std::hypot(x, y); }
};

inline Vec2d operator*(double s, const Vec2d& v) { return v * s; }

}  // namespace evflow
