#ifndef PERIGP_PREPROCESS_HPP
#define PERIGP_PREPROCESS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <vector>

#include "perigp/dbscan.hpp"
#include "perigp/simulator.hpp"
#include "perigp/types.hpp"

namespace perigp {

struct PeriodNotIdentifiable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A detection mapped into one estimated period. The raw timestamp and the
// simulation truth tag ride along for export and for oracle cleaning; no
// downstream computation reads them except manual_clean.
struct AlignedPoint {
    Point2 pos;
    double phase = 0.0;  // in [0, period)
    double t_raw = 0.0;
    Truth truth = Truth::FalsePositive;
};

struct AlignedDataset {
    std::vector<AlignedPoint> points;
    double period = 0.0;            // estimated period T
    double phase_origin = 0.0;      // shift applied before the modulo
    std::size_t n_training_periods = 0;

    std::vector<std::array<double, 3>> xyt() const {
        std::vector<std::array<double, 3>> v;
        v.reserve(points.size());
        for (const auto& p : points) v.push_back({p.pos.x, p.pos.y, p.phase});
        return v;
    }
};

struct PeriodEstimate {
    double period = 0.0;
    ClusterLabeling clusters;  // stage-1 labeling over the t-axis projection
};

namespace detail {

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty set");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    if (m % 2 == 1) return v[m / 2];
    return 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

}  // namespace detail

// Stage-1 period estimation. Detections are clustered on their t-axis
// projection; in the gaps between object appearances only false positives
// occur, so each dense cluster is one trajectory instance. The period is
// the median of the gaps between corresponding extremes (first point to
// first point, last point to last point) of consecutive clusters, which
// tolerates a stray FP at a cluster boundary.
inline PeriodEstimate estimate_period(const RunRecord& run, double eps = 0.5,
                                      std::size_t min_samples = 5) {
    std::vector<std::array<double, 1>> times;
    times.reserve(run.detections.size());
    for (const auto& d : run.detections) times.push_back({d.t});

    PeriodEstimate est;
    est.clusters = dbscan(times, eps, min_samples);
    if (est.clusters.n_clusters < 2)
        throw PeriodNotIdentifiable(
            "need at least 2 trajectory instances, found " +
            std::to_string(est.clusters.n_clusters) + " cluster(s)");

    const int c = est.clusters.n_clusters;
    std::vector<double> t_min(c, std::numeric_limits<double>::infinity());
    std::vector<double> t_max(c, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < times.size(); ++i) {
        const int label = est.clusters.labels[i];
        if (label == ClusterLabeling::kNoise) continue;
        t_min[label] = std::min(t_min[label], times[i][0]);
        t_max[label] = std::max(t_max[label], times[i][0]);
    }

    // Order clusters by their earliest time before differencing.
    std::vector<int> order(c);
    for (int i = 0; i < c; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return t_min[a] < t_min[b]; });

    std::vector<double> gaps;
    gaps.reserve(2 * (c - 1));
    for (int i = 0; i + 1 < c; ++i) {
        gaps.push_back(t_min[order[i + 1]] - t_min[order[i]]);
        gaps.push_back(t_max[order[i + 1]] - t_max[order[i]]);
    }
    est.period = detail::median(std::move(gaps));
    if (!(est.period > 0.0))
        throw PeriodNotIdentifiable("estimated period is not positive");
    return est;
}

// Fold all detections into one period. The origin of the phase axis is
// placed at the end of the largest circular gap in the phase distribution
// so that one trajectory instance stays contiguous in [0, period) instead
// of being split across the wrap-around.
inline AlignedDataset align(const RunRecord& run, double period,
                            std::size_t n_training_periods = 0) {
    if (!(period > 0.0)) throw std::invalid_argument("period must be > 0");

    AlignedDataset out;
    out.period = period;
    out.n_training_periods = n_training_periods;
    if (run.detections.empty()) return out;

    std::vector<double> raw_phases;
    raw_phases.reserve(run.detections.size());
    for (const auto& d : run.detections)
        raw_phases.push_back(std::fmod(d.t, period));

    std::vector<double> sorted = raw_phases;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    double origin = 0.0;  // a single distinct phase needs no shift
    if (sorted.size() >= 2) {
        double best_gap = sorted.front() + period - sorted.back();  // wrap gap
        origin = sorted.front();
        for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
            const double gap = sorted[i + 1] - sorted[i];
            if (gap > best_gap) {
                best_gap = gap;
                origin = sorted[i + 1];
            }
        }
    }
    out.phase_origin = origin;

    out.points.reserve(run.detections.size());
    for (std::size_t i = 0; i < run.detections.size(); ++i) {
        const Detection& d = run.detections[i];
        double phase = raw_phases[i] - origin;
        if (phase < 0.0) phase += period;
        out.points.push_back({d.pos, phase, d.t, d.truth});
    }
    return out;
}

// Stage-2 cleaning. After alignment, around n_training_periods points pile
// up near every true trajectory location while false positives stay
// isolated, so a density clustering over (x, y, phase) separates them.
// min_samples follows the 0.8*N rule and eps comes from the k-distance
// elbow; points labeled noise are dropped.
inline AlignedDataset auto_clean(const AlignedDataset& aligned) {
    if (aligned.points.empty()) return aligned;
    if (aligned.n_training_periods < 2)
        throw std::invalid_argument("auto_clean needs n_training_periods >= 2");

    const auto min_samples = static_cast<std::size_t>(
        std::ceil(0.8 * static_cast<double>(aligned.n_training_periods)));
    const auto pts = aligned.xyt();

    constexpr double kEpsFloor = 1e-6;
    double eps;
    try {
        eps = elbow_eps(pts, min_samples);
    } catch (const DegenerateGeometry&) {
        std::cerr << "perigp: degenerate k-distance curve, falling back to eps="
                  << kEpsFloor << "\n";
        eps = kEpsFloor;
    }
    if (eps < kEpsFloor) {
        std::cerr << "perigp: elbow eps " << eps << " below floor, using "
                  << kEpsFloor << "\n";
        eps = kEpsFloor;
    }

    const auto labeling = dbscan(pts, eps, min_samples);
    AlignedDataset out;
    out.period = aligned.period;
    out.phase_origin = aligned.phase_origin;
    out.n_training_periods = aligned.n_training_periods;
    for (std::size_t i = 0; i < aligned.points.size(); ++i)
        if (labeling.labels[i] != ClusterLabeling::kNoise)
            out.points.push_back(aligned.points[i]);
    return out;
}

// Oracle cleaning: models a human annotator striking out the false
// positives from the recorded training data. The rest of the pipeline
// (period estimation, alignment, stage-2 cleaning) still runs after it.
inline RunRecord manual_clean(const RunRecord& run) {
    RunRecord out = run;
    out.detections.clear();
    for (const auto& d : run.detections)
        if (d.truth == Truth::TruePositive) out.detections.push_back(d);
    return out;
}

}  // namespace perigp

#endif  // PERIGP_PREPROCESS_HPP
