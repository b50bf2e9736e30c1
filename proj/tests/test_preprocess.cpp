#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "perigp/preprocess.hpp"

using namespace perigp;

namespace {

// dense detections every `spacing` seconds over [lo, hi], all true positives
void add_span(RunRecord& run, double lo, double hi, double spacing = 0.1) {
    for (double t = lo; t <= hi + 1e-9; t += spacing)
        run.detections.push_back({{t, t}, t, Truth::TruePositive});
    std::sort(run.detections.begin(), run.detections.end(),
              [](const Detection& a, const Detection& b) { return a.t < b.t; });
}

RunRecord toy_training_run(double recall, double precision, std::uint64_t seed,
                           std::size_t periods = 5) {
    SimulationConfig cfg;
    cfg.n_periods = periods;
    cfg.seed = seed;
    return simulate_run(make_trajectory(TrajectoryId::Gamma3), recall, precision, cfg);
}

}  // namespace

TEST_SUITE_BEGIN("preprocess");

TEST_CASE("equal cluster gaps give the exact period") {
    RunRecord run;
    add_span(run, 0.0, 5.2);
    add_span(run, 8.0, 13.2);
    add_span(run, 16.0, 21.2);
    const auto est = estimate_period(run);
    CHECK(est.clusters.n_clusters == 3);
    CHECK(est.period == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("even-sized gap multiset takes the mean of the middle two") {
    RunRecord run;
    add_span(run, 0.0, 5.2, 0.05);
    add_span(run, 8.1, 13.2, 0.05);
    add_span(run, 15.9, 21.3, 0.05);
    // t_min gaps {8.1, 7.8}, t_max gaps {8.0, 8.1} -> sorted {7.8, 8.0, 8.1, 8.1}
    const auto est = estimate_period(run);
    CHECK(est.period == doctest::Approx(8.05).epsilon(1e-9));
}

TEST_CASE("dense false positives defeat period estimation most of the time") {
    // the documented failure mode of auto cleaning on a weak detector
    int bad = 0;
    const int trials = 20;
    for (int s = 0; s < trials; ++s) {
        const auto run = toy_training_run(0.9, pr_model_from_ap(0.811, "PR1").precision(0.9),
                                          9000 + s);
        try {
            const auto est = estimate_period(run);
            if (std::abs(est.period - 8.0) > 0.5) ++bad;
        } catch (const PeriodNotIdentifiable&) {
            ++bad;
        }
    }
    CHECK(bad > trials / 2);
}

TEST_CASE("a single cluster cannot identify a period") {
    RunRecord run;
    add_span(run, 0.0, 5.2);
    CHECK_THROWS_AS(estimate_period(run), PeriodNotIdentifiable);
    RunRecord empty;
    CHECK_THROWS_AS(estimate_period(empty), PeriodNotIdentifiable);
}

TEST_CASE("timestamp dilation scales the estimate exactly") {
    const auto run = toy_training_run(0.9, 0.95, 42);
    const auto base = estimate_period(run, 0.5, 5);
    RunRecord dilated = run;
    for (auto& d : dilated.detections) d.t *= 2.0;
    const auto scaled = estimate_period(dilated, 1.0, 5);
    CHECK(scaled.period == 2.0 * base.period);
}

TEST_CASE("exact periodic replicas share one phase") {
    RunRecord run;
    run.detections.push_back({{1, 1}, 1.0, Truth::TruePositive});
    run.detections.push_back({{1, 1}, 9.0, Truth::TruePositive});
    run.detections.push_back({{1, 1}, 17.0, Truth::TruePositive});
    const auto ds = align(run, 8.0);
    CHECK(ds.phase_origin == 0.0);
    REQUIRE(ds.points.size() == 3);
    for (const auto& p : ds.points) CHECK(p.phase == doctest::Approx(1.0));
}

TEST_CASE("origin shift keeps straddling instances contiguous") {
    // start the clock mid-trajectory: in-frame raw phases straddle zero
    auto run = toy_training_run(0.95, 1.0, 7);
    for (auto& d : run.detections) d.t += 4.0;
    const auto ds = align(run, 8.0);
    for (const auto& p : ds.points) {
        CHECK(p.phase >= 0.0);
        CHECK(p.phase < 8.0);
    }
    // every detection of one trajectory instance must stay in one block
    const double slack = 0.1;
    std::vector<std::vector<double>> by_instance;
    for (const auto& p : ds.points) {
        const auto k = std::llround(p.t_raw / 0.1);
        const std::size_t instance = static_cast<std::size_t>((k - 40) / 80);
        if (by_instance.size() <= instance) by_instance.resize(instance + 1);
        by_instance[instance].push_back(p.phase);
    }
    for (const auto& phases : by_instance) {
        if (phases.size() < 2) continue;
        const auto [lo, hi] = std::minmax_element(phases.begin(), phases.end());
        CHECK(*hi - *lo <= 5.2 + slack);
    }
}

TEST_CASE("aligning an empty run yields an empty dataset") {
    RunRecord run;
    const auto ds = align(run, 8.0);
    CHECK(ds.points.empty());
    CHECK(ds.period == 8.0);
}

TEST_CASE("align rejects a non-positive period") {
    RunRecord run;
    CHECK_THROWS_AS(align(run, 0.0), std::invalid_argument);
}

TEST_CASE("cleaning keeps nearly all of an FP-free dataset") {
    const auto run = toy_training_run(0.9, 1.0, 11);
    const auto est = estimate_period(run);
    const auto ds = align(run, est.period,
                          static_cast<std::size_t>(est.clusters.n_clusters));
    const auto cleaned = auto_clean(ds);
    CHECK(cleaned.points.size() >=
          static_cast<std::size_t>(0.95 * double(ds.points.size())));
}

TEST_CASE("an isolated outlier is removed") {
    const auto run = toy_training_run(0.9, 1.0, 13);
    const auto est = estimate_period(run);
    auto ds = align(run, est.period,
                    static_cast<std::size_t>(est.clusters.n_clusters));
    AlignedPoint outlier;
    outlier.pos = {9.7, 0.2};  // >= 5 frame units from the gamma3 band
    outlier.phase = 2.6;
    outlier.t_raw = 2.6;
    outlier.truth = Truth::FalsePositive;
    ds.points.push_back(outlier);
    const auto cleaned = auto_clean(ds);
    for (const auto& p : cleaned.points)
        CHECK(distance(p.pos, outlier.pos) > 1e-9);
    CHECK(cleaned.points.size() >=
          static_cast<std::size_t>(0.95 * double(ds.points.size())));
}

TEST_CASE("cleaning an empty dataset is a no-op") {
    AlignedDataset ds;
    ds.period = 8.0;
    ds.n_training_periods = 5;
    const auto cleaned = auto_clean(ds);
    CHECK(cleaned.points.empty());
}

TEST_CASE("duplicated data falls back to the floor eps and survives") {
    AlignedDataset ds;
    ds.period = 8.0;
    ds.n_training_periods = 5;
    for (int i = 0; i < 10; ++i)
        ds.points.push_back({{1.0, 1.0}, 0.5, 0.5, Truth::TruePositive});
    const auto cleaned = auto_clean(ds);  // warns, then one dense cluster
    CHECK(cleaned.points.size() == 10);
}

TEST_CASE("cleaning requires at least two training periods") {
    AlignedDataset ds;
    ds.period = 8.0;
    ds.n_training_periods = 1;
    ds.points.push_back({{1, 1}, 0.5, 0.5, Truth::TruePositive});
    CHECK_THROWS_AS(auto_clean(ds), std::invalid_argument);
}

TEST_CASE("cleaning never adds points and is nearly idempotent") {
    const auto run = toy_training_run(0.9, pr_model_from_ap(0.942, "PR3").precision(0.9), 19);
    const auto est = estimate_period(run);
    const auto ds = align(run, est.period,
                          static_cast<std::size_t>(est.clusters.n_clusters));
    const auto once = auto_clean(ds);
    CHECK(once.points.size() <= ds.points.size());
    for (const auto& p : once.points) {
        const bool found = std::any_of(
            ds.points.begin(), ds.points.end(), [&](const AlignedPoint& q) {
                return q.pos == p.pos && q.phase == p.phase && q.t_raw == p.t_raw;
            });
        CHECK(found);
    }
    // the elbow eps is recomputed on the cleaned set, so a borderline point
    // can flip; the second pass must not remove more than 1% of the data
    const auto twice = auto_clean(once);
    CHECK(twice.points.size() <= once.points.size());
    CHECK(double(twice.points.size()) >= 0.99 * double(once.points.size()));
}

TEST_CASE("manual cleaning keeps exactly the true positives") {
    SUBCASE("no false positives: identity") {
        const auto run = toy_training_run(0.9, 1.0, 3);
        const auto cleaned = manual_clean(run);
        CHECK(cleaned.detections == run.detections);
    }
    SUBCASE("only false positives: empty result") {
        const auto traj = make_trajectory(TrajectoryId::Gamma1);
        SimulationConfig cfg;
        cfg.n_periods = 2;
        cfg.seed = 21;
        const auto run = simulate_run_probabilities(traj, 1.0, 0.5, cfg);
        CHECK(run.count(Truth::TruePositive) == 0);
        CHECK(manual_clean(run).detections.empty());
    }
    SUBCASE("mixed run: the TP count survives, nothing else") {
        const auto run = toy_training_run(0.9, pr_model_from_ap(0.883, "PR2").precision(0.9), 29);
        const auto expected = run.count(Truth::TruePositive);
        CHECK(run.count(Truth::FalsePositive) > 0);
        const auto cleaned = manual_clean(run);
        CHECK(cleaned.detections.size() == expected);
        for (const auto& d : cleaned.detections)
            CHECK(d.truth == Truth::TruePositive);
        CHECK(cleaned.n_obj == run.n_obj);
        CHECK(cleaned.n_frames == run.n_frames);
    }
}

TEST_SUITE_END();
