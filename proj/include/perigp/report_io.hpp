#ifndef PERIGP_REPORT_IO_HPP
#define PERIGP_REPORT_IO_HPP

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "perigp/experiment.hpp"

namespace perigp {

// ---- ExperimentConfig <-> JSON -------------------------------------------

inline Json config_to_json(const ExperimentConfig& cfg) {
    Json j;
    j["master_seed"] = cfg.master_seed;
    j["n_train_periods"] = cfg.n_train_periods;
    j["train_recall"] = cfg.train_recall;
    j["n_validation_periods"] = cfg.n_validation_periods;
    j["recall_grid"] = cfg.recall_grid;
    Json trajs = Json::array();
    for (const auto t : cfg.trajectories) trajs.push_back(to_string(t));
    j["trajectories"] = std::move(trajs);
    j["pr_ap_targets"] = cfg.pr_ap_targets;
    Json modes = Json::array();
    for (const auto m : cfg.cleaning_modes) modes.push_back(to_string(m));
    j["cleaning_modes"] = std::move(modes);
    j["dt"] = cfg.dt;
    j["pos_noise_sigma"] = cfg.pos_noise_sigma;
    j["time_noise_sigma"] = cfg.time_noise_sigma;
    j["on_period_failure"] = to_string(cfg.on_period_failure);
    j["jobs"] = cfg.jobs;
    return j;
}

inline ExperimentConfig config_from_json(const Json& j) {
    ExperimentConfig cfg;
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    cfg.n_train_periods = j.value("n_train_periods", cfg.n_train_periods);
    cfg.train_recall = j.value("train_recall", cfg.train_recall);
    cfg.n_validation_periods =
        j.value("n_validation_periods", cfg.n_validation_periods);
    if (j.contains("recall_grid")) {
        const auto& g = j["recall_grid"];
        if (g.is_array()) {
            cfg.recall_grid = g.get<std::vector<double>>();
        } else {
            // {"start": .., "stop": .., "step": ..}
            const double start = g.at("start").get<double>();
            const double stop = g.at("stop").get<double>();
            const double step = g.at("step").get<double>();
            if (!(step > 0.0)) throw std::invalid_argument("grid step must be > 0");
            cfg.recall_grid.clear();
            for (int i = 0;; ++i) {
                const double r = start + static_cast<double>(i) * step;
                if (r > stop + 1e-12) break;
                cfg.recall_grid.push_back(std::min(r, stop));
            }
        }
    }
    if (j.contains("trajectories")) {
        cfg.trajectories.clear();
        for (const auto& t : j["trajectories"])
            cfg.trajectories.push_back(trajectory_from_string(t.get<std::string>()));
    }
    if (j.contains("pr_ap_targets"))
        cfg.pr_ap_targets = j["pr_ap_targets"].get<std::vector<double>>();
    if (j.contains("cleaning_modes")) {
        cfg.cleaning_modes.clear();
        for (const auto& m : j["cleaning_modes"])
            cfg.cleaning_modes.push_back(
                cleaning_mode_from_string(m.get<std::string>()));
    }
    cfg.dt = j.value("dt", cfg.dt);
    cfg.pos_noise_sigma = j.value("pos_noise_sigma", cfg.pos_noise_sigma);
    cfg.time_noise_sigma = j.value("time_noise_sigma", cfg.time_noise_sigma);
    if (j.contains("on_period_failure"))
        cfg.on_period_failure = period_failure_policy_from_string(
            j["on_period_failure"].get<std::string>());
    cfg.jobs = j.value("jobs", cfg.jobs);
    return cfg;
}

// ---- Report serialization -------------------------------------------------

inline Json report_to_json(const ExperimentReport& report) {
    Json j;
    j["kind"] = "perigp.report";
    j["version"] = 1;
    j["config"] = config_to_json(report.config);
    Json refs = Json::array();
    for (const auto& r : report.reference)
        refs.push_back({{"pr", r.pr_label}, {"ap", r.ap}, {"of1", r.of1}});
    j["reference"] = std::move(refs);
    Json cells = Json::array();
    for (const auto& c : report.cells) {
        Json e;
        e["pr"] = c.pr_label;
        e["trajectory"] = c.trajectory;
        e["mode"] = to_string(c.mode);
        e["seed"] = c.seed;
        e["status"] = c.status;
        e["failed"] = c.failed;
        if (std::isfinite(c.period_estimate))
            e["period_estimate"] = c.period_estimate;
        else
            e["period_estimate"] = nullptr;
        if (std::isfinite(c.sigma_max))
            e["sigma_max"] = c.sigma_max;
        else
            e["sigma_max"] = nullptr;
        e["synced_points"] = c.synced_points;
        e["grid_points"] = c.grid_points;
        e["reference_ap"] = c.reference_ap;
        e["reference_of1"] = c.reference_of1;
        e["post_ap"] = c.post_ap;
        e["post_of1"] = c.post_of1;
        cells.push_back(std::move(e));
    }
    j["cells"] = std::move(cells);
    return j;
}

// Rows of the two metric tables, in the fixed emission order.
inline std::string report_to_csv(const ExperimentReport& report) {
    std::string out = "table,mode,trajectory";
    for (const auto& r : report.reference) out += "," + r.pr_label;
    out += '\n';

    const auto cell_metric = [&](const std::string& pr, const std::string& traj,
                                 CleaningMode mode, bool ap) {
        const CellResult* c = report.find(pr, traj, mode);
        if (!c) return std::string("nan");
        return io::fixed6(ap ? c->post_ap : c->post_of1);
    };

    for (const bool ap : {true, false}) {
        const std::string metric = ap ? "AP" : "oF1";
        out += metric + ",reference,-";
        for (const auto& r : report.reference)
            out += "," + io::fixed6(ap ? r.ap : r.of1);
        out += '\n';
        for (const auto mode : report.config.cleaning_modes) {
            for (const auto traj : report.config.trajectories) {
                out += metric + "," + to_string(mode) + "," + to_string(traj);
                for (const auto& r : report.reference)
                    out += "," + cell_metric(r.pr_label, to_string(traj), mode, ap);
                out += '\n';
            }
        }
    }
    return out;
}

// ---- Report emission --------------------------------------------------------

// Writes report.csv, report.json and one directory per cell with the PR
// series, the decision log of the representative operating point, and the
// trained model. Byte-stable for a fixed master seed.
inline void emit_report(const ExperimentReport& report,
                        const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    {
        auto csv = io::open_out((out_dir / "report.csv").string());
        csv << report_to_csv(report);
    }
    {
        auto json_out = io::open_out((out_dir / "report.json").string());
        json_out << report_to_json(report).dump(2) << '\n';
    }

    for (const auto& cell : report.cells) {
        const fs::path dir = out_dir / "cells" /
                             (cell.pr_label + "_" + cell.trajectory + "_" +
                              to_string(cell.mode));
        fs::create_directories(dir);
        {
            auto out = io::open_out((dir / "pr_series.csv").string());
            std::vector<PRSeries> series{cell.reference_series};
            if (!cell.failed) series.push_back(cell.post_series);
            write_pr_series_csv(series, out);
        }
        {
            auto out = io::open_out((dir / "decisions.csv").string());
            write_decisions_csv(cell.decision_log, out);
        }
        if (cell.filter) {
            auto out = io::open_out((dir / "model.json").string());
            Json j = filter_to_json(*cell.filter);
            j["period_estimate"] = cell.filter->time_test_enabled
                                       ? Json(cell.filter->period)
                                       : Json(nullptr);
            out << j.dump(2) << '\n';
        }
    }
}

// ---- Self-consistency check -------------------------------------------------

struct ConsistencyIssue {
    std::string where;
    std::string what;
};

struct ConsistencyResult {
    bool ok = true;
    std::vector<ConsistencyIssue> issues;

    void flag(std::string where, std::string what) {
        ok = false;
        issues.push_back({std::move(where), std::move(what)});
    }
};

// Recompute every metric in report.json from the emitted per-cell PR
// series files and compare.
inline ConsistencyResult check_report(const std::filesystem::path& out_dir,
                                      double tolerance = 1e-9) {
    namespace fs = std::filesystem;
    ConsistencyResult result;

    auto in = io::open_in((out_dir / "report.json").string());
    const Json j = Json::parse(in);
    const ExperimentConfig cfg = config_from_json(j.at("config"));

    // Reference rows are analytic in the PR targets.
    const auto models = calibrate_pr_models(cfg.pr_ap_targets);
    std::map<std::string, ReferenceRow> expected_refs;
    for (const auto& m : models) {
        expected_refs[m.label] = analytic_reference_row(m);
    }
    for (const auto& r : j.at("reference")) {
        const auto label = r.at("pr").get<std::string>();
        const auto it = expected_refs.find(label);
        if (it == expected_refs.end()) {
            result.flag("reference/" + label, "unknown PR label");
            continue;
        }
        if (std::abs(r.at("ap").get<double>() - it->second.ap) > tolerance)
            result.flag("reference/" + label, "AP mismatch");
        if (std::abs(r.at("of1").get<double>() - it->second.of1) > tolerance)
            result.flag("reference/" + label, "oF1 mismatch");
    }

    for (const auto& c : j.at("cells")) {
        const std::string tag = c.at("pr").get<std::string>() + "_" +
                                c.at("trajectory").get<std::string>() + "_" +
                                c.at("mode").get<std::string>();
        const fs::path series_path = out_dir / "cells" / tag / "pr_series.csv";
        if (!fs::exists(series_path)) {
            result.flag(tag, "missing pr_series.csv");
            continue;
        }
        auto series_in = io::open_in(series_path.string());
        const auto series = read_pr_series_csv(series_in);
        const PRSeries* reference = nullptr;
        const PRSeries* post = nullptr;
        for (const auto& s : series) {
            if (s.provenance == SeriesProvenance::Reference) reference = &s;
            else post = &s;
        }
        if (!reference) {
            result.flag(tag, "missing reference series");
            continue;
        }
        const auto check = [&](const char* name, double stored, double computed) {
            if (std::abs(stored - computed) > tolerance)
                result.flag(tag, std::string(name) + " mismatch (stored " +
                                     io::full(stored) + ", recomputed " +
                                     io::full(computed) + ")");
        };
        check("reference_ap", c.at("reference_ap").get<double>(),
              average_precision(*reference));
        check("reference_of1", c.at("reference_of1").get<double>(),
              optimal_f1(*reference).of1);
        const bool failed = c.at("failed").get<bool>();
        if (!failed) {
            if (!post) {
                result.flag(tag, "missing post-filter series");
                continue;
            }
            check("post_ap", c.at("post_ap").get<double>(),
                  average_precision(*post));
            check("post_of1", c.at("post_of1").get<double>(),
                  optimal_f1(*post).of1);
        } else {
            check("post_ap", c.at("post_ap").get<double>(),
                  average_precision(*reference));
            check("post_of1", c.at("post_of1").get<double>(),
                  optimal_f1(*reference).of1);
        }
    }
    return result;
}

}  // namespace perigp

#endif  // PERIGP_REPORT_IO_HPP
