#ifndef PERIGP_SIMULATOR_HPP
#define PERIGP_SIMULATOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "perigp/pr_curve.hpp"
#include "perigp/rng.hpp"
#include "perigp/trajectory.hpp"
#include "perigp/types.hpp"

namespace perigp {

struct SimulationConfig {
    double dt = 0.1;                // seconds per frame
    double pos_noise_sigma = 0.1;   // frame units
    double time_noise_sigma = 5e-3; // seconds
    std::size_t n_periods = 5;
    std::uint64_t seed = 1;

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
        if (n_periods < 1) throw std::invalid_argument("n_periods must be >= 1");
        if (pos_noise_sigma < 0.0 || time_noise_sigma < 0.0)
            throw std::invalid_argument("noise sigmas must be >= 0");
    }
};

struct RunRecord {
    std::vector<Detection> detections;  // sorted by nominal frame time
    std::size_t n_frames = 0;
    std::size_t n_obj = 0;              // frames where the object is truly present
    SimulationConfig config;
    std::string trajectory_id;

    std::size_t count(Truth tag) const {
        return static_cast<std::size_t>(
            std::count_if(detections.begin(), detections.end(),
                          [tag](const Detection& d) { return d.truth == tag; }));
    }
};

struct FailureProbabilities {
    double p_fn = 0.0;  // in [0,1]
    double p_fp = 0.0;  // unclamped; clamp to [0,1] when used per frame
};

// Per-frame failure probabilities for a detector operating at (recall,
// precision) on a run with n_obj in-frame frames out of n_frames total.
inline FailureProbabilities failure_probabilities(double recall, double precision,
                                                  std::size_t n_frames,
                                                  std::size_t n_obj) {
    if (recall < 0.0 || recall > 1.0)
        throw std::invalid_argument("recall outside [0,1]");
    if (n_frames < 1) throw std::invalid_argument("n_frames must be >= 1");
    if (precision <= 0.0)
        throw std::domain_error("precision must be > 0");
    const double p_fn = 1.0 - recall;
    const double p_fp = (static_cast<double>(n_obj) * (1.0 - p_fn) /
                         static_cast<double>(n_frames)) *
                        ((1.0 - precision) / precision);
    return {p_fn, p_fp};
}

inline std::size_t simulated_frame_count(const NominalTrajectory& traj,
                                         const SimulationConfig& cfg) {
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(cfg.n_periods) * traj.period / cfg.dt));
}

// Frame-by-frame generation given explicit per-frame probabilities. Each
// frame with the object present emits a true detection with probability
// 1 - p_fn at the nominal position plus isotropic Gaussian noise; each
// frame independently emits at most one false detection, uniform over the
// frame, with probability min(p_fp, 1). All timestamps get Gaussian time
// noise. Pure function of (inputs, seed).
inline RunRecord simulate_run_probabilities(const NominalTrajectory& traj,
                                            double p_fn, double p_fp,
                                            const SimulationConfig& cfg) {
    cfg.validate();
    if (p_fn < 0.0 || p_fn > 1.0) throw std::invalid_argument("p_fn outside [0,1]");
    if (p_fp < 0.0) throw std::invalid_argument("p_fp must be >= 0");

    RunRecord run;
    run.config = cfg;
    run.trajectory_id = to_string(traj.id);
    run.n_frames = simulated_frame_count(traj, cfg);

    const double p_fp_frame = std::min(p_fp, 1.0);
    Rng rng(cfg.seed);

    for (std::size_t k = 0; k < run.n_frames; ++k) {
        const double t_nominal = static_cast<double>(k) * cfg.dt;
        const auto pos = nominal_position(traj, t_nominal);
        if (pos) {
            ++run.n_obj;
            if (rng.bernoulli(1.0 - p_fn)) {
                Detection d;
                d.pos.x = pos->x + rng.gaussian(0.0, cfg.pos_noise_sigma);
                d.pos.y = pos->y + rng.gaussian(0.0, cfg.pos_noise_sigma);
                d.t = std::max(0.0, t_nominal + rng.gaussian(0.0, cfg.time_noise_sigma));
                d.truth = Truth::TruePositive;
                run.detections.push_back(d);
            }
        }
        if (rng.bernoulli(p_fp_frame)) {
            Detection d;
            d.pos.x = rng.uniform(kFrameLo, kFrameHi);
            d.pos.y = rng.uniform(kFrameLo, kFrameHi);
            d.t = std::max(0.0, t_nominal + rng.gaussian(0.0, cfg.time_noise_sigma));
            d.truth = Truth::FalsePositive;
            run.detections.push_back(d);
        }
    }
    return run;
}

inline RunRecord simulate_run(const NominalTrajectory& traj, double recall,
                              double precision, const SimulationConfig& cfg) {
    cfg.validate();
    if (recall == 0.0) {
        // No true detections, and the FP rate scales with the TP rate, so
        // both probabilities are fixed regardless of precision.
        return simulate_run_probabilities(traj, 1.0, 0.0, cfg);
    }
    const std::size_t n_frames = simulated_frame_count(traj, cfg);
    std::size_t n_obj = 0;
    for (std::size_t k = 0; k < n_frames; ++k)
        if (nominal_position(traj, static_cast<double>(k) * cfg.dt)) ++n_obj;
    const auto probs = failure_probabilities(recall, precision, n_frames, n_obj);
    return simulate_run_probabilities(traj, probs.p_fn, probs.p_fp, cfg);
}

inline RunRecord simulate_run(const NominalTrajectory& traj, const PRCurveModel& pr,
                              double recall, const SimulationConfig& cfg) {
    return simulate_run(traj, recall, pr.precision(recall), cfg);
}

}  // namespace perigp

#endif  // PERIGP_SIMULATOR_HPP
