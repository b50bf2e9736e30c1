#ifndef PERIGP_FILTER_HPP
#define PERIGP_FILTER_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "perigp/gp.hpp"
#include "perigp/types.hpp"

namespace perigp {

inline double circular_distance(double a, double b, double period) {
    double d = std::fmod(std::abs(a - b), period);
    return std::min(d, period - d);
}

// Online bounding-box filter derived from a trained GP: a detection is
// kept when the GP is confident at its position and the predicted
// trajectory phase matches the cyclic run time. sigma_max serves as the
// bound in both tests. Immutable; sync_phase returns an adjusted copy.
struct FilterModel {
    GPModel gp;
    double period = 0.0;        // estimated period used for the cyclic time
    double sigma_max = 0.0;     // seconds
    double phase_offset = 0.0;  // maps run time to training phase, [0, period)
    bool synced = false;
    // Disabled only by the harness fallback for runs whose period could
    // not be identified; the spatial test still applies.
    bool time_test_enabled = true;
};

enum class DiscardReason {
    None,
    UncertaintyTooHigh,  // sigma test failed
    TimeMismatch,        // cyclic time test failed
};

inline const char* to_string(DiscardReason r) {
    switch (r) {
        case DiscardReason::None: return "none";
        case DiscardReason::UncertaintyTooHigh: return "uncertainty_too_high";
        case DiscardReason::TimeMismatch: return "time_mismatch";
    }
    throw std::logic_error("bad DiscardReason");
}

struct ApplyResult {
    bool keep = false;
    DiscardReason reason = DiscardReason::None;
    double t_hat = 0.0;
    double sigma_hat = 0.0;
};

// sigma_max is the largest out-of-sample uncertainty across the training
// samples: for each sample, the larger of its leave-one-out predictive
// std and its absolute leave-one-out residual, maximized over the set.
// The out-of-sample form matters twice over. In-sample predictive spread
// at a training input is capped near the noise level by the point's own
// observation, and the predictive std alone understates the residual tail
// the time test has to admit; the realized LOO discrepancies calibrate
// that tail directly on the training set.
inline double sigma_max_from_gp(const GPModel& gp) {
    const auto loo = loo_statistics(gp);
    double s = 0.0;
    for (Eigen::Index i = 0; i < loo.variance.size(); ++i)
        s = std::max(s, std::max(std::sqrt(loo.variance(i)),
                                 std::abs(loo.residual(i))));
    return s;
}

inline FilterModel build_filter(GPModel gp, double period) {
    if (gp.train_inputs.empty())
        throw std::invalid_argument("build_filter needs a non-empty training set");
    FilterModel f;
    f.period = period;
    f.sigma_max = sigma_max_from_gp(gp);
    f.gp = std::move(gp);
    return f;
}

struct SyncResult {
    FilterModel filter;
    bool synced = false;
    std::size_t used = 0;  // prefix detections that passed the sigma test
};

// Estimate the run-time-to-training-phase offset from the first detections
// of a run. Only prefix points passing the sigma test contribute; their
// circular residuals (t - t_hat) mod period are combined with a circular
// median (the candidate minimizing the circular L1 distance to the rest).
// With no usable point the offset is left unchanged and the result is
// flagged unsynced.
inline SyncResult sync_phase(const FilterModel& filter,
                             std::span<const std::pair<Point2, double>> prefix) {
    if (prefix.empty()) throw std::invalid_argument("sync_phase needs a prefix");

    std::vector<double> residuals;
    residuals.reserve(prefix.size());
    for (const auto& [pos, t] : prefix) {
        const auto pred = predict(filter.gp, pos);
        if (pred.sigma_hat < filter.sigma_max) {
            double r = std::fmod(t - pred.t_hat, filter.period);
            if (r < 0.0) r += filter.period;
            residuals.push_back(r);
        }
    }

    SyncResult out{filter, false, residuals.size()};
    if (residuals.empty()) return out;

    double best_cost = std::numeric_limits<double>::infinity();
    double best = residuals.front();
    for (const double candidate : residuals) {
        double cost = 0.0;
        for (const double r : residuals)
            cost += circular_distance(candidate, r, filter.period);
        if (cost < best_cost - 1e-15 ||
            (std::abs(cost - best_cost) <= 1e-15 && candidate < best)) {
            best_cost = cost;
            best = candidate;
        }
    }
    out.filter.phase_offset = best;
    out.filter.synced = true;
    out.synced = true;
    return out;
}

// The two acceptance tests on a live detection. Consumes only position and
// time; simulation truth tags are invisible here.
inline ApplyResult apply(const FilterModel& filter, const Point2& pos, double t) {
    const auto pred = predict(filter.gp, pos);
    ApplyResult out;
    out.t_hat = pred.t_hat;
    out.sigma_hat = pred.sigma_hat;
    if (!(pred.sigma_hat < filter.sigma_max)) {
        out.reason = DiscardReason::UncertaintyTooHigh;
        return out;
    }
    if (filter.time_test_enabled) {
        double t_prime = std::fmod(t - filter.phase_offset, filter.period);
        if (t_prime < 0.0) t_prime += filter.period;
        if (!(circular_distance(pred.t_hat, t_prime, filter.period) < filter.sigma_max)) {
            out.reason = DiscardReason::TimeMismatch;
            return out;
        }
    }
    out.keep = true;
    return out;
}

}  // namespace perigp

#endif  // PERIGP_FILTER_HPP
