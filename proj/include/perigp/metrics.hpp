#ifndef PERIGP_METRICS_HPP
#define PERIGP_METRICS_HPP

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "perigp/filter.hpp"
#include "perigp/rng.hpp"
#include "perigp/simulator.hpp"

namespace perigp {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

enum class SeriesProvenance {
    Reference,
    PostFilterAuto,
    PostFilterManual,
};

inline const char* to_string(SeriesProvenance p) {
    switch (p) {
        case SeriesProvenance::Reference: return "reference";
        case SeriesProvenance::PostFilterAuto: return "post_filter_auto";
        case SeriesProvenance::PostFilterManual: return "post_filter_manual";
    }
    throw std::logic_error("bad SeriesProvenance");
}

struct PRPoint {
    double recall = 0.0;
    double precision = 0.0;
};

// Evaluated precision-recall points, kept sorted by recall. Duplicate
// recalls are allowed (a filter can map several operating points to the
// same post-filter recall); AP and oF1 are insensitive to duplication.
struct PRSeries {
    std::vector<PRPoint> points;
    SeriesProvenance provenance = SeriesProvenance::Reference;

    void add(double recall, double precision) {
        points.push_back({recall, precision});
    }

    void sort() {
        std::sort(points.begin(), points.end(), [](const PRPoint& a, const PRPoint& b) {
            return a.recall < b.recall ||
                   (a.recall == b.recall && a.precision < b.precision);
        });
    }
};

// Tally a decision vector against the simulator's ground-truth labels.
// A discarded true positive becomes a false negative; false negatives of
// the detector itself are the in-frame frames that produced no TP.
inline ConfusionCounts confusion_from_run(const RunRecord& run,
                                          const std::vector<bool>& kept) {
    if (kept.size() != run.detections.size())
        throw std::invalid_argument("decision vector does not cover the run");
    ConfusionCounts c;
    std::size_t tp_emitted = 0;
    for (std::size_t i = 0; i < run.detections.size(); ++i) {
        const bool is_tp = run.detections[i].truth == Truth::TruePositive;
        tp_emitted += is_tp;
        if (kept[i]) {
            if (is_tp) ++c.tp;
            else ++c.fp;
        } else if (is_tp) {
            ++c.fn;
        }
    }
    c.fn += run.n_obj - tp_emitted;  // objects the detector missed outright
    return c;
}

// Precision is 1 when nothing was predicted (no predictions, no bad
// predictions); recall is 1 when there was nothing to find.
inline std::pair<double, double> precision_recall(const ConfusionCounts& c) {
    const double precision =
        (c.tp + c.fp == 0) ? 1.0
                           : static_cast<double>(c.tp) /
                                 static_cast<double>(c.tp + c.fp);
    const double recall =
        (c.tp + c.fn == 0) ? 1.0
                           : static_cast<double>(c.tp) /
                                 static_cast<double>(c.tp + c.fn);
    return {precision, recall};
}

inline double f1(double precision, double recall) {
    if (precision < 0.0 || precision > 1.0 || recall < 0.0 || recall > 1.0)
        throw std::invalid_argument("f1 inputs outside [0,1]");
    const double s = precision + recall;
    if (s == 0.0) return 0.0;
    return 2.0 * precision * recall / s;
}

// Area under the PR curve. The series first gets the monotone precision
// envelope (precision at recall r replaced by the maximum precision at
// any recall >= r), is anchored at (0, envelope(0)), and is integrated by
// trapezoids up to the largest observed recall; recall beyond that
// contributes nothing.
inline double average_precision(const PRSeries& series) {
    if (series.points.empty())
        throw std::invalid_argument("average_precision of empty series");
    std::vector<PRPoint> pts = series.points;
    std::sort(pts.begin(), pts.end(), [](const PRPoint& a, const PRPoint& b) {
        return a.recall < b.recall;
    });
    std::vector<double> envelope(pts.size());
    double running = 0.0;
    for (std::size_t i = pts.size(); i-- > 0;) {
        running = std::max(running, pts[i].precision);
        envelope[i] = running;
    }
    double ap = envelope.front() * pts.front().recall;  // anchor at recall 0
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        ap += 0.5 * (envelope[i] + envelope[i + 1]) *
              (pts[i + 1].recall - pts[i].recall);
    return ap;
}

struct OperatingPoint {
    double of1 = 0.0;
    double recall = 0.0;
};

// Best F1 over the series; ties resolved toward higher recall.
inline OperatingPoint optimal_f1(const PRSeries& series) {
    if (series.points.empty())
        throw std::invalid_argument("optimal_f1 of empty series");
    OperatingPoint best{-1.0, 0.0};
    for (const auto& p : series.points) {
        const double score = f1(p.precision, p.recall);
        if (score > best.of1 ||
            (score == best.of1 && p.recall > best.recall)) {
            best = {score, p.recall};
        }
    }
    return best;
}

struct ValidationConfig {
    SimulationConfig sim;               // n_periods is the validation length
    std::size_t sync_max_detections = 20;
};

struct GridPointComparison {
    double grid_recall = 0.0;
    PRPoint reference;
    PRPoint post;
};

struct FilterEvaluation {
    PRSeries reference;  // unfiltered, from the same validation runs
    PRSeries post;
    std::vector<bool> synced;            // phase sync outcome per grid point
    std::vector<GridPointComparison> paired;  // in grid order, pre-sorting
};

namespace detail {

// Prefix used for phase synchronization: the first detections of the run,
// capped at sync_max_detections, stopping after one period of wall time.
// If the first period is empty the cap alone applies.
inline std::vector<std::pair<Point2, double>> sync_prefix(
    const RunRecord& run, double period, std::size_t max_detections) {
    std::vector<std::pair<Point2, double>> prefix;
    for (const auto& d : run.detections) {
        if (d.t > period || prefix.size() >= max_detections) break;
        prefix.emplace_back(d.pos, d.t);
    }
    if (prefix.empty()) {
        for (const auto& d : run.detections) {
            if (prefix.size() >= max_detections) break;
            prefix.emplace_back(d.pos, d.t);
        }
    }
    return prefix;
}

}  // namespace detail

// One filtered validation run at a fixed operating recall: simulate,
// synchronize the phase on the run prefix, then apply the filter to every
// detection. Returns the synced filter, the run, and the decisions.
struct FilteredRun {
    RunRecord run;
    std::vector<ApplyResult> decisions;
    std::vector<bool> kept;
    bool synced = false;
};

inline FilteredRun run_filtered(const NominalTrajectory& traj,
                                const PRCurveModel& pr, double recall,
                                const FilterModel& filter,
                                const ValidationConfig& cfg) {
    FilteredRun out;
    const double precision = pr.precision(recall);
    if (precision > 0.0) {
        out.run = simulate_run(traj, recall, precision, cfg.sim);
    } else {
        // Limiting operating point (precision -> 0): the per-frame FP
        // probability saturates at 1.
        out.run = simulate_run_probabilities(traj, 1.0 - recall, 1.0, cfg.sim);
    }

    FilterModel active = filter;
    if (!out.run.detections.empty() && filter.time_test_enabled) {
        const auto prefix = detail::sync_prefix(out.run, filter.period,
                                                cfg.sync_max_detections);
        auto sync = sync_phase(filter, prefix);
        active = std::move(sync.filter);
        out.synced = sync.synced;
    }
    out.decisions.reserve(out.run.detections.size());
    out.kept.reserve(out.run.detections.size());
    for (const auto& d : out.run.detections) {
        out.decisions.push_back(apply(active, d.pos, d.t));
        out.kept.push_back(out.decisions.back().keep);
    }
    return out;
}

// Unfiltered PR curve over the recall grid, using the same per-point seed
// derivation as post_filter_pr so that a reference computed on its own is
// identical to the one a filtered evaluation reports.
inline PRSeries reference_pr(const NominalTrajectory& traj, const PRCurveModel& pr,
                             const std::vector<double>& recall_grid,
                             const ValidationConfig& cfg) {
    PRSeries series;
    series.provenance = SeriesProvenance::Reference;
    for (std::size_t i = 0; i < recall_grid.size(); ++i) {
        const double r = recall_grid[i];
        if (r < 0.0 || r > 1.0)
            throw std::invalid_argument("recall grid value outside [0,1]");
        SimulationConfig sim = cfg.sim;
        sim.seed = derive_seed(cfg.sim.seed, "validation", i);
        const double precision = pr.precision(r);
        const RunRecord run =
            precision > 0.0
                ? simulate_run(traj, r, precision, sim)
                : simulate_run_probabilities(traj, 1.0 - r, 1.0, sim);
        const std::vector<bool> all(run.detections.size(), true);
        const auto [p, rec] = precision_recall(confusion_from_run(run, all));
        series.add(rec, p);
    }
    series.sort();
    return series;
}

// Post-filtering PR curve: for every recall on the grid, simulate an
// independent validation run (seed derived from the config seed and the
// grid index), filter it, and record both the unfiltered and the filtered
// empirical PR points.
inline FilterEvaluation post_filter_pr(const NominalTrajectory& traj,
                                       const PRCurveModel& pr,
                                       const FilterModel& filter,
                                       const std::vector<double>& recall_grid,
                                       const ValidationConfig& cfg,
                                       SeriesProvenance post_tag =
                                           SeriesProvenance::PostFilterAuto) {
    FilterEvaluation eval;
    eval.reference.provenance = SeriesProvenance::Reference;
    eval.post.provenance = post_tag;

    for (std::size_t i = 0; i < recall_grid.size(); ++i) {
        const double r = recall_grid[i];
        if (r < 0.0 || r > 1.0)
            throw std::invalid_argument("recall grid value outside [0,1]");
        ValidationConfig point_cfg = cfg;
        point_cfg.sim.seed = derive_seed(cfg.sim.seed, "validation", i);
        const auto filtered = run_filtered(traj, pr, r, filter, point_cfg);
        eval.synced.push_back(filtered.synced);

        const std::vector<bool> all(filtered.run.detections.size(), true);
        const auto [ref_p, ref_r] =
            precision_recall(confusion_from_run(filtered.run, all));
        eval.reference.add(ref_r, ref_p);

        const auto [post_p, post_r] =
            precision_recall(confusion_from_run(filtered.run, filtered.kept));
        eval.post.add(post_r, post_p);
        eval.paired.push_back({r, {ref_r, ref_p}, {post_r, post_p}});
    }
    eval.reference.sort();
    eval.post.sort();
    return eval;
}

}  // namespace perigp

#endif  // PERIGP_METRICS_HPP
