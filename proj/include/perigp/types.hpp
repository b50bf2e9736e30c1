#ifndef PERIGP_TYPES_HPP
#define PERIGP_TYPES_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace perigp {

// Frame coordinate system shared by all trajectories and the simulator.
inline constexpr double kFrameLo = 0.0;
inline constexpr double kFrameHi = 10.0;

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    bool finite() const { return std::isfinite(x) && std::isfinite(y); }

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline double squared_distance(const Point2& a, const Point2& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

inline double distance(const Point2& a, const Point2& b) {
    return std::sqrt(squared_distance(a, b));
}

// Simulation metadata. Filtering decisions never look at this: the filter
// API accepts only (position, time).
enum class Truth : std::uint8_t {
    TruePositive,
    FalsePositive,
};

inline const char* to_string(Truth t) {
    return t == Truth::TruePositive ? "tp" : "fp";
}

inline Truth truth_from_string(const std::string& s) {
    if (s == "tp") return Truth::TruePositive;
    if (s == "fp") return Truth::FalsePositive;
    throw std::invalid_argument("unknown truth tag: " + s);
}

// One predicted bounding-box center with its timestamp.
struct Detection {
    Point2 pos;
    double t = 0.0;  // seconds since run start, >= 0
    Truth truth = Truth::FalsePositive;

    friend bool operator==(const Detection&, const Detection&) = default;
};

}  // namespace perigp

#endif  // PERIGP_TYPES_HPP
