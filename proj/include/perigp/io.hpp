#ifndef PERIGP_IO_HPP
#define PERIGP_IO_HPP

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "perigp/filter.hpp"
#include "perigp/gp.hpp"
#include "perigp/metrics.hpp"
#include "perigp/preprocess.hpp"
#include "perigp/simulator.hpp"

namespace perigp {

using Json = nlohmann::ordered_json;

namespace io {

// Shortest exact decimal representation is not needed; 17 significant
// digits round-trip any double.
inline std::string full(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline double parse_double(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("bad number: " + s);
    return v;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    return in;
}

}  // namespace io

// ---- RunRecord ----------------------------------------------------------

inline void write_run_csv(const RunRecord& run, std::ostream& out) {
    out << "t,x,y,truth\n";
    for (const auto& d : run.detections)
        out << io::full(d.t) << ',' << io::full(d.pos.x) << ','
            << io::full(d.pos.y) << ',' << to_string(d.truth) << '\n';
}

inline RunRecord read_run_csv(std::istream& in) {
    RunRecord run;
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,x,y,truth", 0) != 0)
        throw std::invalid_argument("run CSV must start with header t,x,y,truth");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = io::split_csv_line(line);
        if (f.size() != 4) throw std::invalid_argument("bad run CSV row: " + line);
        Detection d;
        d.t = io::parse_double(f[0]);
        d.pos.x = io::parse_double(f[1]);
        d.pos.y = io::parse_double(f[2]);
        d.truth = truth_from_string(f[3]);
        run.detections.push_back(d);
    }
    return run;
}

inline Json run_to_json(const RunRecord& run) {
    Json j;
    j["kind"] = "perigp.run";
    j["version"] = 1;
    j["trajectory"] = run.trajectory_id;
    j["n_frames"] = run.n_frames;
    j["n_obj"] = run.n_obj;
    j["config"] = {
        {"dt", run.config.dt},
        {"pos_noise_sigma", run.config.pos_noise_sigma},
        {"time_noise_sigma", run.config.time_noise_sigma},
        {"n_periods", run.config.n_periods},
        {"seed", run.config.seed},
    };
    Json dets = Json::array();
    for (const auto& d : run.detections)
        dets.push_back({{"t", d.t}, {"x", d.pos.x}, {"y", d.pos.y},
                        {"truth", to_string(d.truth)}});
    j["detections"] = std::move(dets);
    return j;
}

inline RunRecord run_from_json(const Json& j) {
    RunRecord run;
    run.trajectory_id = j.value("trajectory", std::string{});
    run.n_frames = j.value("n_frames", std::size_t{0});
    run.n_obj = j.value("n_obj", std::size_t{0});
    if (j.contains("config")) {
        const auto& c = j["config"];
        run.config.dt = c.value("dt", 0.1);
        run.config.pos_noise_sigma = c.value("pos_noise_sigma", 0.1);
        run.config.time_noise_sigma = c.value("time_noise_sigma", 5e-3);
        run.config.n_periods = c.value("n_periods", std::size_t{1});
        run.config.seed = c.value("seed", std::uint64_t{0});
    }
    for (const auto& e : j.at("detections")) {
        Detection d;
        d.t = e.at("t").get<double>();
        d.pos.x = e.at("x").get<double>();
        d.pos.y = e.at("y").get<double>();
        d.truth = truth_from_string(e.at("truth").get<std::string>());
        run.detections.push_back(d);
    }
    return run;
}

// ---- AlignedDataset -----------------------------------------------------

inline void write_aligned_csv(const AlignedDataset& ds, std::ostream& out) {
    out << "t,x,y,truth,phase\n";
    for (const auto& p : ds.points)
        out << io::full(p.t_raw) << ',' << io::full(p.pos.x) << ','
            << io::full(p.pos.y) << ',' << to_string(p.truth) << ','
            << io::full(p.phase) << '\n';
}

// ---- PRSeries -----------------------------------------------------------

inline void write_pr_series_csv(const std::vector<PRSeries>& series,
                                std::ostream& out) {
    out << "series,recall,precision\n";
    for (const auto& s : series)
        for (const auto& p : s.points)
            out << to_string(s.provenance) << ',' << io::full(p.recall) << ','
                << io::full(p.precision) << '\n';
}

inline std::vector<PRSeries> read_pr_series_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("series,recall,precision", 0) != 0)
        throw std::invalid_argument("bad pr_series CSV header");
    std::vector<PRSeries> out;
    const auto find = [&out](const std::string& name) -> PRSeries& {
        for (auto& s : out)
            if (to_string(s.provenance) == name) return s;
        PRSeries s;
        if (name == "reference") s.provenance = SeriesProvenance::Reference;
        else if (name == "post_filter_auto") s.provenance = SeriesProvenance::PostFilterAuto;
        else if (name == "post_filter_manual") s.provenance = SeriesProvenance::PostFilterManual;
        else throw std::invalid_argument("unknown series tag: " + name);
        out.push_back(std::move(s));
        return out.back();
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = io::split_csv_line(line);
        if (f.size() != 3) throw std::invalid_argument("bad pr_series row: " + line);
        find(f[0]).add(io::parse_double(f[1]), io::parse_double(f[2]));
    }
    return out;
}

// ---- Filter decision log ------------------------------------------------

struct DecisionRow {
    double t = 0.0;
    Point2 pos;
    double t_hat = 0.0;
    double sigma_hat = 0.0;
    bool keep = false;
    DiscardReason reason = DiscardReason::None;
};

inline void write_decisions_csv(const std::vector<DecisionRow>& rows,
                                std::ostream& out) {
    out << "t,x,y,t_hat,sigma_hat,decision,reason\n";
    for (const auto& r : rows)
        out << io::full(r.t) << ',' << io::full(r.pos.x) << ','
            << io::full(r.pos.y) << ',' << io::full(r.t_hat) << ','
            << io::full(r.sigma_hat) << ',' << (r.keep ? "keep" : "discard")
            << ',' << to_string(r.reason) << '\n';
}

// ---- GP / filter model --------------------------------------------------

inline Json gp_to_json(const GPModel& m) {
    Json j;
    j["hyperparameters"] = {
        {"length_scale", m.hyper.length_scale},
        {"signal_std", m.hyper.signal_std},
        {"noise_std", m.hyper.noise_std},
    };
    j["standardization"] = {
        {"x_mean", m.x_mean}, {"x_std", m.x_std},
        {"y_mean", m.y_mean}, {"y_std", m.y_std},
        {"target_mean", m.target_mean},
    };
    Json inputs = Json::array();
    for (const auto& p : m.train_inputs) inputs.push_back({p.x, p.y});
    j["train_inputs"] = std::move(inputs);
    j["train_targets"] = m.train_targets;
    std::vector<double> alpha(m.alpha.data(), m.alpha.data() + m.alpha.size());
    j["alpha"] = std::move(alpha);
    return j;
}

inline GPModel gp_from_json(const Json& j) {
    GPHyperparams hyper;
    const auto& h = j.at("hyperparameters");
    hyper.length_scale = h.at("length_scale").get<double>();
    hyper.signal_std = h.at("signal_std").get<double>();
    hyper.noise_std = h.at("noise_std").get<double>();

    std::vector<TrainingPoint> points;
    const auto& inputs = j.at("train_inputs");
    const auto& targets = j.at("train_targets");
    if (inputs.size() != targets.size())
        throw std::invalid_argument("train_inputs/train_targets size mismatch");
    points.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i)
        points.push_back({{inputs[i][0].get<double>(), inputs[i][1].get<double>()},
                          targets[i].get<double>()});

    GPModel m = make_gp_model(points, hyper);
    if (j.contains("alpha")) {
        const auto stored = j["alpha"].get<std::vector<double>>();
        if (stored.size() == static_cast<std::size_t>(m.alpha.size()))
            for (std::size_t i = 0; i < stored.size(); ++i)
                m.alpha(static_cast<Eigen::Index>(i)) = stored[i];
    }
    return m;
}

inline Json filter_to_json(const FilterModel& f) {
    Json j;
    j["kind"] = "perigp.filter_model";
    j["version"] = 1;
    j["period"] = f.period;
    j["sigma_max"] = f.sigma_max;
    j["phase_offset"] = f.phase_offset;
    j["synced"] = f.synced;
    j["time_test_enabled"] = f.time_test_enabled;
    j["gp"] = gp_to_json(f.gp);
    return j;
}

inline FilterModel filter_from_json(const Json& j) {
    FilterModel f;
    f.gp = gp_from_json(j.at("gp"));
    f.period = j.at("period").get<double>();
    f.sigma_max = j.at("sigma_max").get<double>();
    f.phase_offset = j.value("phase_offset", 0.0);
    f.synced = j.value("synced", false);
    f.time_test_enabled = j.value("time_test_enabled", true);
    return f;
}

}  // namespace perigp

#endif  // PERIGP_IO_HPP
