#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "perigp/report_io.hpp"

using namespace perigp;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.master_seed = 5150;
    cfg.n_validation_periods = 4;
    cfg.recall_grid = {0.3, 0.6, 0.9};
    cfg.trajectories = {TrajectoryId::Gamma3};
    cfg.pr_ap_targets = {0.942};
    cfg.jobs = 1;
    return cfg;
}

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "perigp_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_SUITE_BEGIN("experiment");

TEST_CASE("PR model calibration solves beta analytically in ascending order") {
    const auto models = calibrate_pr_models({0.942, 0.811, 0.975, 0.883});
    REQUIRE(models.size() == 4);
    CHECK(models[0].label == "PR1");
    CHECK(models[3].label == "PR4");
    CHECK(models[0].beta == doctest::Approx(0.811 / 0.189).epsilon(1e-12));
    CHECK(models[1].beta == doctest::Approx(0.883 / 0.117).epsilon(1e-12));
    CHECK(models[2].beta == doctest::Approx(0.942 / 0.058).epsilon(1e-12));
    CHECK(models[3].beta == doctest::Approx(39.0).epsilon(1e-12));
    for (const auto& m : models)
        CHECK(m.analytic_ap() == doctest::Approx(m.beta / (m.beta + 1.0)));
    CHECK_THROWS_AS(calibrate_pr_models({1.0}), std::invalid_argument);
}

TEST_CASE("analytic reference rows match an independent fine-grid maximization") {
    const auto pr = pr_model_from_ap(0.811, "PR1");
    const auto row = analytic_reference_row(pr);
    CHECK(row.ap == doctest::Approx(0.811).epsilon(1e-12));
    double expect = 0.0;
    for (int i = 1; i <= 100000; ++i) {
        const double r = 1e-5 * i;
        expect = std::max(expect, f1(pr.precision(r), r));
    }
    CHECK(std::abs(row.of1 - expect) <= 0.005);
}

TEST_CASE("experiment runs are deterministic and order-independent") {
    auto cfg = small_config();
    const auto serial_a = run_experiment(cfg);
    const auto serial_b = run_experiment(cfg);
    cfg.jobs = 2;
    const auto parallel = run_experiment(cfg);
    // jobs is config echo, not a result; normalize before comparing bytes
    auto ja = report_to_json(serial_a);
    auto jb = report_to_json(serial_b);
    auto jp = report_to_json(parallel);
    ja["config"].erase("jobs");
    jb["config"].erase("jobs");
    jp["config"].erase("jobs");
    CHECK(ja.dump() == jb.dump());
    CHECK(ja.dump() == jp.dump());
    CHECK(report_to_csv(serial_a) == report_to_csv(parallel));
}

TEST_CASE("report structure and emission") {
    ExperimentConfig cfg = small_config();
    cfg.trajectories = {TrajectoryId::Gamma1, TrajectoryId::Gamma3};
    cfg.pr_ap_targets = {0.883, 0.975};
    const auto report = run_experiment(cfg);
    CHECK(report.reference.size() == 2);
    CHECK(report.cells.size() ==
          cfg.trajectories.size() * cfg.pr_ap_targets.size() *
              cfg.cleaning_modes.size());
    for (const auto& cell : report.cells) {
        CHECK(cell.reference_ap <= 1.0);
        CHECK(cell.reference_of1 <= 1.0);
        CHECK(cell.post_ap <= 1.0);
        CHECK(cell.post_of1 <= 1.0);
        CHECK(cell.grid_points == cfg.recall_grid.size());
    }

    const auto dir = temp_dir("emit");
    emit_report(report, dir);
    CHECK(std::filesystem::exists(dir / "report.csv"));
    CHECK(std::filesystem::exists(dir / "report.json"));
    for (const auto& cell : report.cells) {
        const auto cell_dir = dir / "cells" /
                              (cell.pr_label + "_" + cell.trajectory + "_" +
                               to_string(cell.mode));
        CHECK(std::filesystem::exists(cell_dir / "pr_series.csv"));
        CHECK(std::filesystem::exists(cell_dir / "decisions.csv"));
        if (!cell.failed) CHECK(std::filesystem::exists(cell_dir / "model.json"));
    }

    SUBCASE("emitted report is self-consistent") {
        const auto check = check_report(dir);
        for (const auto& issue : check.issues)
            MESSAGE(issue.where, ": ", issue.what);
        CHECK(check.ok);
    }
    SUBCASE("corruption is detected") {
        const auto victim = dir / "cells" /
                            (report.cells[0].pr_label + "_" +
                             report.cells[0].trajectory + "_" +
                             to_string(report.cells[0].mode)) /
                            "pr_series.csv";
        std::ofstream out(victim, std::ios::app);
        out << "post_filter_auto,0.99,0.01\n";
        out.close();
        CHECK(!check_report(dir).ok);
    }
    SUBCASE("report csv layout") {
        std::ifstream in(dir / "report.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header == "table,mode,trajectory,PR1,PR2");
        std::size_t rows = 0;
        for (std::string line; std::getline(in, line);)
            if (!line.empty()) ++rows;
        // two metric blocks, each: reference + modes x trajectories
        CHECK(rows == 2 * (1 + 2 * 2));
    }
}

TEST_CASE("report json carries the documented structure") {
    const auto cfg = small_config();
    const auto report = run_experiment(cfg);
    const auto j = report_to_json(report);

    CHECK(j.at("kind") == "perigp.report");
    CHECK(j.at("version").is_number_integer());
    CHECK(j.at("config").is_object());
    REQUIRE(j.at("reference").is_array());
    for (const auto& r : j["reference"]) {
        CHECK(r.at("pr").is_string());
        CHECK(r.at("ap").is_number());
        CHECK(r.at("of1").is_number());
    }
    REQUIRE(j.at("cells").is_array());
    for (const auto& c : j["cells"]) {
        for (const char* key :
             {"pr", "trajectory", "mode", "seed", "status", "failed",
              "period_estimate", "sigma_max", "synced_points", "grid_points",
              "reference_ap", "reference_of1", "post_ap", "post_of1"})
            CHECK(c.contains(key));
        CHECK((c.at("mode") == "auto" || c.at("mode") == "manual"));
        CHECK(c.at("failed").is_boolean());
        CHECK((c.at("period_estimate").is_number() ||
               c.at("period_estimate").is_null()));
        for (const char* metric :
             {"reference_ap", "reference_of1", "post_ap", "post_of1"}) {
            const double v = c.at(metric).get<double>();
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("emitted csv metrics recompute from the emitted series bytes") {
    const auto cfg = small_config();
    const auto report = run_experiment(cfg);
    const auto dir = temp_dir("roundtrip");
    emit_report(report, dir);

    const auto& cell = report.cells.front();
    const auto path = dir / "cells" /
                      (cell.pr_label + "_" + cell.trajectory + "_" +
                       to_string(cell.mode)) /
                      "pr_series.csv";
    auto in = io::open_in(path.string());
    const auto series = read_pr_series_csv(in);
    bool found_post = false;
    for (const auto& s : series) {
        if (s.provenance == SeriesProvenance::Reference) {
            CHECK(average_precision(s) == doctest::Approx(cell.reference_ap).epsilon(1e-12));
        } else {
            found_post = true;
            CHECK(average_precision(s) == doctest::Approx(cell.post_ap).epsilon(1e-12));
            CHECK(optimal_f1(s).of1 == doctest::Approx(cell.post_of1).epsilon(1e-12));
        }
    }
    CHECK(found_post == !cell.failed);
}

TEST_CASE("config json round-trips, including the range form of the grid") {
    ExperimentConfig cfg;
    cfg.master_seed = 99;
    cfg.recall_grid = {0.25, 0.5, 0.75, 1.0};
    cfg.cleaning_modes = {CleaningMode::Manual};
    cfg.on_period_failure = PeriodFailurePolicy::UnalignedFallback;
    const auto j = config_to_json(cfg);
    const auto back = config_from_json(j);
    CHECK(back.master_seed == cfg.master_seed);
    CHECK(back.recall_grid == cfg.recall_grid);
    CHECK(back.cleaning_modes == cfg.cleaning_modes);
    CHECK(back.on_period_failure == cfg.on_period_failure);
    CHECK(back.pr_ap_targets == cfg.pr_ap_targets);

    const auto ranged = config_from_json(
        Json{{"recall_grid",
              {{"start", 0.05}, {"stop", 1.0}, {"step", 0.05}}}});
    REQUIRE(ranged.recall_grid.size() == 20);
    CHECK(ranged.recall_grid.front() == doctest::Approx(0.05));
    CHECK(ranged.recall_grid.back() == doctest::Approx(1.0));

    CHECK_THROWS_AS(config_from_json(Json{{"cleaning_modes", {"telepathic"}}}),
                    std::invalid_argument);
}

TEST_CASE("run records round-trip through csv and json") {
    SimulationConfig cfg;
    cfg.n_periods = 2;
    cfg.seed = 8;
    const auto run = simulate_run(make_trajectory(TrajectoryId::Gamma2),
                                  pr_model_from_ap(0.883, "PR2"), 0.8, cfg);
    {
        std::stringstream buf;
        write_run_csv(run, buf);
        const auto back = read_run_csv(buf);
        CHECK(back.detections == run.detections);
    }
    {
        const auto back = run_from_json(run_to_json(run));
        CHECK(back.detections == run.detections);
        CHECK(back.n_obj == run.n_obj);
        CHECK(back.n_frames == run.n_frames);
        CHECK(back.config.seed == run.config.seed);
        CHECK(back.trajectory_id == run.trajectory_id);
    }
}

TEST_CASE("filter models round-trip through json") {
    SimulationConfig sim;
    sim.n_periods = 5;
    sim.seed = 12;
    const auto traj = make_trajectory(TrajectoryId::Gamma3);
    const auto run = simulate_run(traj, pr_model_from_ap(0.942, "PR3"), 0.9, sim);
    const auto pipe = train_pipeline(run, CleaningMode::Manual);

    const auto j = filter_to_json(pipe.filter);
    const auto back = filter_from_json(j);
    CHECK(back.period == pipe.filter.period);
    CHECK(back.sigma_max == pipe.filter.sigma_max);
    CHECK(back.time_test_enabled == pipe.filter.time_test_enabled);
    for (const Point2 q : {Point2{2.0, 5.5}, Point2{7.5, 4.0}, Point2{5.0, 6.9}}) {
        const auto a = predict(pipe.filter.gp, q);
        const auto b = predict(back.gp, q);
        CHECK(a.t_hat == doctest::Approx(b.t_hat).epsilon(1e-12));
        CHECK(a.sigma_hat == doctest::Approx(b.sigma_hat).epsilon(1e-12));
    }
}

TEST_CASE("period failure policies") {
    ExperimentConfig cfg = small_config();
    cfg.pr_ap_targets = {0.811};  // dense FPs: the period is unidentifiable
    cfg.cleaning_modes = {CleaningMode::Auto};

    SUBCASE("record as failed with reference metrics copied") {
        cfg.on_period_failure = PeriodFailurePolicy::RecordFailed;
        const auto report = run_experiment(cfg);
        REQUIRE(report.cells.size() == 1);
        const auto& cell = report.cells[0];
        CHECK(cell.failed);
        CHECK(cell.status == "period_not_identifiable");
        CHECK(cell.post_ap == cell.reference_ap);
        CHECK(cell.post_of1 == cell.reference_of1);
        CHECK(!cell.filter.has_value());
        CHECK(std::isnan(cell.period_estimate));
    }
    SUBCASE("unaligned fallback disables the time test") {
        cfg.on_period_failure = PeriodFailurePolicy::UnalignedFallback;
        const auto report = run_experiment(cfg);
        REQUIRE(report.cells.size() == 1);
        const auto& cell = report.cells[0];
        CHECK(cell.failed);
        CHECK(cell.status == "period_fallback_unaligned");
        REQUIRE(cell.filter.has_value());
        CHECK(!cell.filter->time_test_enabled);
    }
}

TEST_CASE("config validation catches bad grids") {
    ExperimentConfig cfg;
    cfg.recall_grid = {0.5, 0.0};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.recall_grid.clear();
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.trajectories.clear();
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_SUITE_END();
