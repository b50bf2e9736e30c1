#ifndef PERIGP_TRAJECTORY_HPP
#define PERIGP_TRAJECTORY_HPP

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "perigp/types.hpp"

namespace perigp {

enum class TrajectoryId {
    Gamma1,  // straight line
    Gamma2,  // convex (parabolic) arc
    Gamma3,  // oscillating
};

inline const char* to_string(TrajectoryId id) {
    switch (id) {
        case TrajectoryId::Gamma1: return "gamma1";
        case TrajectoryId::Gamma2: return "gamma2";
        case TrajectoryId::Gamma3: return "gamma3";
    }
    throw std::logic_error("bad TrajectoryId");
}

inline TrajectoryId trajectory_from_string(const std::string& s) {
    if (s == "gamma1") return TrajectoryId::Gamma1;
    if (s == "gamma2") return TrajectoryId::Gamma2;
    if (s == "gamma3") return TrajectoryId::Gamma3;
    throw std::invalid_argument("unknown trajectory token: " + s);
}

// Periodic spatio-temporal trajectory of the object center. The shape map
// takes the traversal parameter u in [0,1] to a frame position; the object
// is off-frame for the remainder of each period.
struct NominalTrajectory {
    TrajectoryId id = TrajectoryId::Gamma1;
    double period = 8.0;       // seconds, > traversal
    double traversal = 5.2;    // seconds the object stays in frame
    Point2 (*shape)(double) = nullptr;
};

namespace shapes {

inline Point2 gamma1(double u) { return {10.0 * u, 2.0 + 6.0 * u}; }

inline Point2 gamma2(double u) {
    const double w = 2.0 * u - 1.0;
    return {10.0 * u, 1.0 + 8.0 * (1.0 - w * w)};
}

inline Point2 gamma3(double u) {
    return {10.0 * u, 5.0 + 2.0 * std::sin(4.0 * std::numbers::pi * u)};
}

}  // namespace shapes

inline NominalTrajectory make_trajectory(TrajectoryId id, double period = 8.0,
                                         double traversal = 5.2) {
    if (!(period > 0.0) || !(traversal > 0.0) || !(traversal < period))
        throw std::invalid_argument("trajectory requires 0 < traversal < period");
    NominalTrajectory traj{id, period, traversal, nullptr};
    switch (id) {
        case TrajectoryId::Gamma1: traj.shape = &shapes::gamma1; break;
        case TrajectoryId::Gamma2: traj.shape = &shapes::gamma2; break;
        case TrajectoryId::Gamma3: traj.shape = &shapes::gamma3; break;
    }
    return traj;
}

// Position of the object center at time t, or nullopt when the object is
// outside the video frame. Total over t >= 0.
inline std::optional<Point2> nominal_position(const NominalTrajectory& traj, double t) {
    const double phase = std::fmod(t, traj.period);
    if (phase > traj.traversal) return std::nullopt;
    return traj.shape(phase / traj.traversal);
}

}  // namespace perigp

#endif  // PERIGP_TRAJECTORY_HPP
