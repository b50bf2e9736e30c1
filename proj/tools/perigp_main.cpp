// Command-line front end: simulate detection runs, train the GP filter,
// apply it to recorded detections, evaluate PR curves, and reproduce the
// full experiment matrix.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "perigp/experiment.hpp"
#include "perigp/report_io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitPipelineFailure = 3;

struct SimulateArgs {
    std::string trajectory = "gamma3";
    double ap = 0.942;
    double recall = 0.9;
    std::size_t periods = 5;
    double dt = 0.1;
    double pos_noise = 0.1;
    double time_noise = 5e-3;
    std::uint64_t seed = 1;
    std::string out;
    std::string out_json;
};

struct TrainArgs {
    std::string input;
    std::string mode = "auto";
    std::string out;
    std::string cleaned_out;
};

struct FilterArgs {
    std::string model;
    std::string input;
    std::string out;
    std::size_t sync_max = 20;
};

struct EvaluateArgs {
    std::string model;
    std::string trajectory = "gamma3";
    double ap = 0.942;
    std::size_t periods = 10;
    std::uint64_t seed = 1;
    double grid_start = 0.05, grid_stop = 1.0, grid_step = 0.05;
    std::string out;
};

struct ReportArgs {
    std::string dir;
};

struct RunAllArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::optional<unsigned> jobs;
    bool strict = false;
};

perigp::RunRecord load_run(const std::string& path) {
    auto in = perigp::io::open_in(path);
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json")
        return perigp::run_from_json(perigp::Json::parse(in));
    return perigp::read_run_csv(in);
}

std::vector<double> make_grid(double start, double stop, double step) {
    std::vector<double> grid;
    for (int i = 0;; ++i) {
        const double r = start + static_cast<double>(i) * step;
        if (r > stop + 1e-12) break;
        grid.push_back(std::min(r, stop));
    }
    return grid;
}

int cmd_simulate(const SimulateArgs& a) {
    const auto traj =
        perigp::make_trajectory(perigp::trajectory_from_string(a.trajectory));
    const auto pr = perigp::pr_model_from_ap(a.ap, "PR");
    perigp::SimulationConfig cfg{a.dt, a.pos_noise, a.time_noise, a.periods, a.seed};
    const auto run = perigp::simulate_run(traj, pr, a.recall, cfg);
    if (!a.out.empty()) {
        auto out = perigp::io::open_out(a.out);
        perigp::write_run_csv(run, out);
    }
    if (!a.out_json.empty()) {
        auto out = perigp::io::open_out(a.out_json);
        out << perigp::run_to_json(run).dump(2) << '\n';
    }
    std::cout << "simulated " << run.detections.size() << " detections ("
              << run.count(perigp::Truth::TruePositive) << " tp, "
              << run.count(perigp::Truth::FalsePositive) << " fp) over "
              << run.n_frames << " frames, object present in " << run.n_obj
              << "\n";
    return kExitOk;
}

int cmd_train(const TrainArgs& a) {
    const auto run = load_run(a.input);
    const auto mode = perigp::cleaning_mode_from_string(a.mode);
    perigp::PipelineResult pipe;
    try {
        pipe = perigp::train_pipeline(run, mode);
    } catch (const perigp::PeriodNotIdentifiable& e) {
        std::cerr << "pipeline failure: " << e.what() << "\n";
        return kExitPipelineFailure;
    }
    std::cout << "estimated period " << pipe.estimate.period << " s over "
              << pipe.estimate.clusters.n_clusters << " trajectory instances; "
              << pipe.cleaned.points.size() << " training points after cleaning; "
              << "sigma_max " << pipe.filter.sigma_max << " s\n";
    if (!a.out.empty()) {
        auto out = perigp::io::open_out(a.out);
        out << perigp::filter_to_json(pipe.filter).dump(2) << '\n';
    }
    if (!a.cleaned_out.empty()) {
        auto out = perigp::io::open_out(a.cleaned_out);
        perigp::write_aligned_csv(pipe.cleaned, out);
    }
    return kExitOk;
}

int cmd_filter(const FilterArgs& a) {
    auto model_in = perigp::io::open_in(a.model);
    const auto filter = perigp::filter_from_json(perigp::Json::parse(model_in));
    const auto run = load_run(a.input);

    perigp::FilterModel active = filter;
    if (!run.detections.empty() && filter.time_test_enabled) {
        std::vector<std::pair<perigp::Point2, double>> prefix;
        for (const auto& d : run.detections) {
            if (d.t > filter.period || prefix.size() >= a.sync_max) break;
            prefix.emplace_back(d.pos, d.t);
        }
        if (prefix.empty())
            for (const auto& d : run.detections) {
                if (prefix.size() >= a.sync_max) break;
                prefix.emplace_back(d.pos, d.t);
            }
        const auto sync = perigp::sync_phase(filter, prefix);
        active = sync.filter;
        if (!sync.synced)
            std::cerr << "warning: phase sync failed, using offset 0\n";
    }

    std::vector<perigp::DecisionRow> rows;
    std::size_t kept = 0;
    for (const auto& d : run.detections) {
        const auto r = perigp::apply(active, d.pos, d.t);
        kept += r.keep;
        rows.push_back({d.t, d.pos, r.t_hat, r.sigma_hat, r.keep, r.reason});
    }
    if (!a.out.empty()) {
        auto out = perigp::io::open_out(a.out);
        perigp::write_decisions_csv(rows, out);
    }
    std::cout << "kept " << kept << " of " << rows.size() << " detections\n";
    return kExitOk;
}

int cmd_evaluate(const EvaluateArgs& a) {
    auto model_in = perigp::io::open_in(a.model);
    const auto filter = perigp::filter_from_json(perigp::Json::parse(model_in));
    const auto traj =
        perigp::make_trajectory(perigp::trajectory_from_string(a.trajectory));
    const auto pr = perigp::pr_model_from_ap(a.ap, "PR");

    perigp::ValidationConfig vcfg;
    vcfg.sim.n_periods = a.periods;
    vcfg.sim.seed = a.seed;
    const auto grid = make_grid(a.grid_start, a.grid_stop, a.grid_step);
    const auto eval = perigp::post_filter_pr(traj, pr, filter, grid, vcfg);

    if (!a.out.empty()) {
        auto out = perigp::io::open_out(a.out);
        perigp::write_pr_series_csv({eval.reference, eval.post}, out);
    }
    std::cout << "reference: AP " << perigp::average_precision(eval.reference)
              << ", oF1 " << perigp::optimal_f1(eval.reference).of1 << "\n"
              << "post-filter: AP " << perigp::average_precision(eval.post)
              << ", oF1 " << perigp::optimal_f1(eval.post).of1 << "\n";
    return kExitOk;
}

int cmd_report(const ReportArgs& a) {
    const auto result = perigp::check_report(a.dir);
    if (result.ok) {
        std::cout << "report is self-consistent\n";
        return kExitOk;
    }
    for (const auto& issue : result.issues)
        std::cerr << issue.where << ": " << issue.what << "\n";
    return 1;
}

int cmd_run_all(const RunAllArgs& a) {
    perigp::ExperimentConfig cfg;
    if (!a.config_path.empty()) {
        auto in = perigp::io::open_in(a.config_path);
        cfg = perigp::config_from_json(perigp::Json::parse(in));
    }
    if (a.seed) cfg.master_seed = *a.seed;
    if (a.jobs) cfg.jobs = *a.jobs;
    cfg.validate();

    const auto report = perigp::run_experiment(cfg);
    perigp::emit_report(report, a.out);

    std::size_t failed = 0;
    for (const auto& cell : report.cells) {
        if (cell.failed) ++failed;
        std::cout << cell.pr_label << " " << cell.trajectory << " "
                  << to_string(cell.mode) << ": "
                  << (cell.failed ? cell.status
                                  : "AP " + perigp::io::fixed6(cell.post_ap) +
                                        " oF1 " + perigp::io::fixed6(cell.post_of1))
                  << "\n";
    }
    std::cout << "report written to " << a.out << " (" << report.cells.size()
              << " cells, " << failed << " failed)\n";
    if (a.strict && failed > 0) return kExitPipelineFailure;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GP-based filtering of object detections under periodic motion"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a noisy detection run");
    sim_cmd->add_option("--traj", sim.trajectory, "gamma1|gamma2|gamma3");
    sim_cmd->add_option("--ap", sim.ap, "detector AP target in (0,1)");
    sim_cmd->add_option("--recall", sim.recall, "operating recall");
    sim_cmd->add_option("--periods", sim.periods, "number of periods");
    sim_cmd->add_option("--dt", sim.dt, "seconds per frame");
    sim_cmd->add_option("--pos-noise", sim.pos_noise, "position noise sigma");
    sim_cmd->add_option("--time-noise", sim.time_noise, "time noise sigma");
    sim_cmd->add_option("--seed", sim.seed, "RNG seed");
    sim_cmd->add_option("--out", sim.out, "output CSV path");
    sim_cmd->add_option("--json", sim.out_json, "output JSON path");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train the GP filter from a run");
    train_cmd->add_option("--in", train.input, "run CSV or JSON")->required();
    train_cmd->add_option("--mode", train.mode, "auto|manual");
    train_cmd->add_option("--out", train.out, "model JSON path");
    train_cmd->add_option("--cleaned-out", train.cleaned_out,
                          "export the cleaned aligned training set as CSV");

    FilterArgs filt;
    auto* filter_cmd =
        app.add_subcommand("filter", "Apply a trained filter to detections");
    filter_cmd->add_option("--model", filt.model, "model JSON")->required();
    filter_cmd->add_option("--in", filt.input, "detections CSV or JSON")->required();
    filter_cmd->add_option("--out", filt.out, "decision log CSV");
    filter_cmd->add_option("--sync-max", filt.sync_max, "max prefix detections for sync");

    EvaluateArgs eval;
    auto* eval_cmd =
        app.add_subcommand("evaluate", "PR curve of a trained filter on fresh runs");
    eval_cmd->add_option("--model", eval.model, "model JSON")->required();
    eval_cmd->add_option("--traj", eval.trajectory, "gamma1|gamma2|gamma3");
    eval_cmd->add_option("--ap", eval.ap, "detector AP target");
    eval_cmd->add_option("--periods", eval.periods, "validation periods per point");
    eval_cmd->add_option("--seed", eval.seed, "RNG seed");
    eval_cmd->add_option("--grid-start", eval.grid_start, "first grid recall");
    eval_cmd->add_option("--grid-stop", eval.grid_stop, "last grid recall");
    eval_cmd->add_option("--grid-step", eval.grid_step, "grid step");
    eval_cmd->add_option("--out", eval.out, "PR series CSV");

    ReportArgs rep;
    auto* report_cmd =
        app.add_subcommand("report", "Check an emitted report for self-consistency");
    report_cmd->add_option("--dir", rep.dir, "experiment output directory")
        ->required();

    RunAllArgs runall;
    auto* runall_cmd =
        app.add_subcommand("run-all", "Run the full experiment matrix");
    runall_cmd->add_option("--config", runall.config_path, "config JSON path");
    runall_cmd->add_option("--seed", runall.seed, "master seed override");
    runall_cmd->add_option("--out", runall.out, "output directory");
    runall_cmd->add_option("--jobs", runall.jobs, "worker threads (0 = auto)");
    runall_cmd->add_flag("--strict", runall.strict,
                         "exit 3 when any cell fails its pipeline");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfigError;
    }

    try {
        if (sim_cmd->parsed()) return cmd_simulate(sim);
        if (train_cmd->parsed()) return cmd_train(train);
        if (filter_cmd->parsed()) return cmd_filter(filt);
        if (eval_cmd->parsed()) return cmd_evaluate(eval);
        if (report_cmd->parsed()) return cmd_report(rep);
        if (runall_cmd->parsed()) return cmd_run_all(runall);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const perigp::Json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
