#pragma once

#include <cmath>
#include <numbers>

namespace macgeo {

/// Displacement in the plane.
struct Vector2 {
    double dx = 0.0;
    double dy = 0.0;

    friend constexpr Vector2 operator+(Vector2 a, Vector2 b) { return {a.dx + b.dx, a.dy + b.dy}; }
    friend constexpr Vector2 operator-(Vector2 a, Vector2 b) { return {a.dx - b.dx, a.dy - b.dy}; }
    friend constexpr Vector2 operator-(Vector2 a) { return {-a.dx, -a.dy}; }
    friend constexpr Vector2 operator*(double s, Vector2 v) { return {s * v.dx, s * v.dy}; }
    friend constexpr Vector2 operator*(Vector2 v, double s) { return {s * v.dx, s * v.dy}; }
    friend constexpr Vector2 operator/(Vector2 v, double s) { return {v.dx / s, v.dy / s}; }
    friend constexpr bool operator==(Vector2, Vector2) = default;

    [[nodiscard]] double norm() const { return std::hypot(dx, dy); }
    [[nodiscard]] constexpr double norm2() const { return dx * dx + dy * dy; }
};

constexpr double dot(Vector2 a, Vector2 b) { return a.dx * b.dx + a.dy * b.dy; }

/// z-component of the 3D cross product.
constexpr double cross(Vector2 a, Vector2 b) { return a.dx * b.dy - a.dy * b.dx; }

/// Rotation by +pi/2 applied three times (clockwise quarter turn): (x, y) -> (y, -x).
constexpr Vector2 rotate_cw(Vector2 v) { return {v.dy, -v.dx}; }

inline Vector2 rotate(Vector2 v, double angle)
{
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {c * v.dx - s * v.dy, s * v.dx + c * v.dy};
}

/// Location in the plane, meters.
struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend constexpr Vector2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Point2 operator+(Point2 p, Vector2 v) { return {p.x + v.dx, p.y + v.dy}; }
    friend constexpr Point2 operator-(Point2 p, Vector2 v) { return {p.x - v.dx, p.y - v.dy}; }
    friend constexpr bool operator==(Point2, Point2) = default;

    [[nodiscard]] constexpr Vector2 as_vector() const { return {x, y}; }
};

inline double distance(Point2 a, Point2 b) { return (a - b).norm(); }

/// Polar angle of v mapped to [0, 2*pi).
inline double polar_angle(Vector2 v)
{
    double a = std::atan2(v.dy, v.dx);
    if (a < 0.0)
        a += 2.0 * std::numbers::pi;
    return a;
}

} // namespace macgeo
