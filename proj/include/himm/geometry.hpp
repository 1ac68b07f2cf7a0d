#pragma once

#include <cmath>
#include <optional>
#include <vector>

namespace himm {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::sqrt(x * x + y * y); }
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec2 xy() const { return {x, y}; }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Wraps an angle into [-pi, pi).
inline double normalize_yaw(double yaw) {
    double a = std::fmod(yaw + kPi, 2.0 * kPi);
    if (a < 0.0) a += 2.0 * kPi;
    return a - kPi;
}

struct Pose {
    Vec3 position;
    double yaw = 0.0; // radians, kept in [-pi, pi)

    static Pose at(double x, double y, double yaw = 0.0) {
        return Pose{{x, y, 0.0}, normalize_yaw(yaw)};
    }
};

inline bool finite(const Vec2& v) { return std::isfinite(v.x) && std::isfinite(v.y); }
inline bool finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}
inline bool finite(const Pose& p) { return finite(p.position) && std::isfinite(p.yaw); }

// Axis-aligned 3D box given by center and full extents.
struct Box3 {
    Vec3 center;
    Vec3 extents;
};

// Minimum distance from point p to the segment [a, b].
inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.dot(ab);
    if (len2 <= 0.0) return distance(p, a);
    double t = (p - a).dot(ab) / len2;
    t = std::max(0.0, std::min(1.0, t));
    return distance(p, a + ab * t);
}

// Intersection parameter t in [0,1] along [p, p+d] with segment [a, b],
// or nullopt when they do not cross. Parallel overlaps report nothing.
inline std::optional<double> segment_intersection_t(const Vec2& p, const Vec2& d,
                                                    const Vec2& a, const Vec2& b) {
    const Vec2 s = b - a;
    const double denom = d.x * s.y - d.y * s.x;
    if (denom == 0.0) return std::nullopt;
    const Vec2 qp = a - p;
    const double t = (qp.x * s.y - qp.y * s.x) / denom;
    const double u = (qp.x * d.y - qp.y * d.x) / denom;
    if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return std::nullopt;
    return t;
}

inline double polyline_length(const std::vector<Vec2>& pts) {
    double len = 0.0;
    for (size_t i = 1; i < pts.size(); ++i) len += distance(pts[i - 1], pts[i]);
    return len;
}

} // namespace himm
