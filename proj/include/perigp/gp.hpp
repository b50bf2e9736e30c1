#ifndef PERIGP_GP_HPP
#define PERIGP_GP_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "perigp/types.hpp"

namespace perigp {

struct NotPositiveDefinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Squared-exponential kernel, isotropic over the standardized (x, y)
// plane:  k(a, b) = signal_std^2 * exp(-|a - b|^2 / (2 * length_scale^2)).
struct GPHyperparams {
    double length_scale = 1.0;  // in standardized input units
    double signal_std = 1.0;    // seconds
    double noise_std = 0.1;     // seconds

    void validate() const {
        if (!(length_scale > 0.0) || !(signal_std > 0.0) || !(noise_std > 0.0))
            throw std::invalid_argument("GP hyperparameters must be strictly positive");
    }
};

struct GPPrediction {
    double t_hat = 0.0;      // posterior mean, seconds
    double sigma_hat = 0.0;  // predictive std including observation noise
};

struct TrainingPoint {
    Point2 pos;
    double phase = 0.0;
};

struct FitOptions {
    // When set, the likelihood search is skipped and these values are used
    // as-is (still standardized-space units for length_scale).
    std::optional<GPHyperparams> fixed;
    bool refine = true;
    int max_refine_passes = 3;
};

namespace gp_detail {

inline constexpr double kJitterStart = 1e-10;
inline constexpr double kJitterMax = 1e-6;

struct Standardization {
    double x_mean = 0.0, x_std = 1.0;
    double y_mean = 0.0, y_std = 1.0;
    double target_mean = 0.0;
};

inline Standardization standardize_params(const std::vector<TrainingPoint>& pts) {
    const auto n = static_cast<double>(pts.size());
    Standardization s;
    for (const auto& p : pts) {
        s.x_mean += p.pos.x;
        s.y_mean += p.pos.y;
        s.target_mean += p.phase;
    }
    s.x_mean /= n;
    s.y_mean /= n;
    s.target_mean /= n;
    double vx = 0.0, vy = 0.0;
    for (const auto& p : pts) {
        vx += (p.pos.x - s.x_mean) * (p.pos.x - s.x_mean);
        vy += (p.pos.y - s.y_mean) * (p.pos.y - s.y_mean);
    }
    s.x_std = std::sqrt(vx / n);
    s.y_std = std::sqrt(vy / n);
    if (s.x_std < 1e-12) s.x_std = 1.0;  // constant axis: center only
    if (s.y_std < 1e-12) s.y_std = 1.0;
    return s;
}

inline Eigen::MatrixXd standardized_inputs(const std::vector<TrainingPoint>& pts,
                                           const Standardization& s) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(pts.size()), 2);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        X(i, 0) = (pts[static_cast<std::size_t>(i)].pos.x - s.x_mean) / s.x_std;
        X(i, 1) = (pts[static_cast<std::size_t>(i)].pos.y - s.y_mean) / s.y_std;
    }
    return X;
}

inline Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& X) {
    const Eigen::VectorXd sq = X.rowwise().squaredNorm();
    Eigen::MatrixXd d2 = sq.replicate(1, X.rows()) +
                         sq.transpose().replicate(X.rows(), 1) -
                         2.0 * X * X.transpose();
    return d2.cwiseMax(0.0);
}

inline Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& d2,
                                     const GPHyperparams& h) {
    const double inv = -0.5 / (h.length_scale * h.length_scale);
    return (h.signal_std * h.signal_std) * (d2 * inv).array().exp().matrix();
}

struct Factorization {
    Eigen::MatrixXd L;   // lower Cholesky factor of K + (noise^2 + jitter) I
    double jitter = 0.0;
};

inline Factorization cholesky_with_jitter(const Eigen::MatrixXd& K,
                                          double noise_var) {
    const Eigen::Index n = K.rows();
    double jitter = 0.0;
    while (true) {
        Eigen::MatrixXd A = K;
        A.diagonal().array() += noise_var + jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        if (llt.info() == Eigen::Success)
            return {Eigen::MatrixXd(llt.matrixL()), jitter};
        if (jitter >= kJitterMax)
            throw NotPositiveDefinite("Cholesky failed at jitter " +
                                      std::to_string(jitter) + " (n=" +
                                      std::to_string(n) + ")");
        jitter = (jitter == 0.0) ? kJitterStart : jitter * 10.0;
    }
}

struct LmlResult {
    double lml = -std::numeric_limits<double>::infinity();
    Factorization fact;
    Eigen::VectorXd alpha;
};

inline LmlResult lml_from_parts(const Eigen::MatrixXd& d2,
                                const Eigen::VectorXd& y,
                                const GPHyperparams& h) {
    const Eigen::MatrixXd K = kernel_matrix(d2, h);
    LmlResult r;
    r.fact = cholesky_with_jitter(K, h.noise_std * h.noise_std);
    const auto& L = r.fact.L;
    // alpha = (K + sigma_n^2 I)^{-1} y via two triangular solves
    Eigen::VectorXd v = L.triangularView<Eigen::Lower>().solve(y);
    r.alpha = L.transpose().triangularView<Eigen::Upper>().solve(v);
    const auto n = static_cast<double>(y.size());
    r.lml = -0.5 * y.dot(r.alpha) - L.diagonal().array().log().sum() -
            0.5 * n * std::log(2.0 * std::numbers::pi);
    return r;
}

}  // namespace gp_detail

// Exact Gaussian Process mapping a frame position to the trajectory phase
// at which the object passes through it. Immutable once fitted.
struct GPModel {
    GPHyperparams hyper;
    std::vector<Point2> train_inputs;   // raw frame coordinates
    std::vector<double> train_targets;  // raw phases, seconds

    double x_mean = 0.0, x_std = 1.0;
    double y_mean = 0.0, y_std = 1.0;
    double target_mean = 0.0;

    Eigen::MatrixXd X;      // standardized inputs, n x 2
    Eigen::MatrixXd L;      // lower Cholesky factor of K + (noise^2+jitter) I
    Eigen::VectorXd alpha;  // (K + noise^2 I)^{-1} (targets - target_mean)
    double jitter = 0.0;

    std::size_t size() const { return train_targets.size(); }

    Eigen::Vector2d standardize(const Point2& p) const {
        return {(p.x - x_mean) / x_std, (p.y - y_mean) / y_std};
    }
};

// Assemble a model from data and given hyperparameters (no search).
inline GPModel make_gp_model(const std::vector<TrainingPoint>& points,
                             const GPHyperparams& hyper) {
    hyper.validate();
    if (points.empty()) throw std::invalid_argument("GP needs at least one point");

    GPModel m;
    m.hyper = hyper;
    const auto s = gp_detail::standardize_params(points);
    m.x_mean = s.x_mean;
    m.x_std = s.x_std;
    m.y_mean = s.y_mean;
    m.y_std = s.y_std;
    m.target_mean = s.target_mean;
    m.X = gp_detail::standardized_inputs(points, s);

    Eigen::VectorXd y(static_cast<Eigen::Index>(points.size()));
    m.train_inputs.reserve(points.size());
    m.train_targets.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        m.train_inputs.push_back(points[i].pos);
        m.train_targets.push_back(points[i].phase);
        y(static_cast<Eigen::Index>(i)) = points[i].phase - s.target_mean;
    }

    const auto d2 = gp_detail::squared_distances(m.X);
    auto r = gp_detail::lml_from_parts(d2, y, hyper);
    m.L = std::move(r.fact.L);
    m.jitter = r.fact.jitter;
    m.alpha = std::move(r.alpha);
    return m;
}

// Log marginal likelihood of the data under the given hyperparameters,
// after the same input standardization and target centering fit() applies.
inline double log_marginal_likelihood(const std::vector<TrainingPoint>& points,
                                      const GPHyperparams& hyper) {
    hyper.validate();
    if (points.empty()) throw std::invalid_argument("empty training set");
    const auto s = gp_detail::standardize_params(points);
    const auto X = gp_detail::standardized_inputs(points, s);
    Eigen::VectorXd y(static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i)
        y(static_cast<Eigen::Index>(i)) = points[i].phase - s.target_mean;
    return gp_detail::lml_from_parts(gp_detail::squared_distances(X), y, hyper).lml;
}

// d LML / d log(theta) for theta = (length_scale, signal_std, noise_std).
inline std::array<double, 3> log_marginal_likelihood_gradient(
    const std::vector<TrainingPoint>& points, const GPHyperparams& hyper) {
    hyper.validate();
    if (points.empty()) throw std::invalid_argument("empty training set");
    const auto s = gp_detail::standardize_params(points);
    const auto X = gp_detail::standardized_inputs(points, s);
    Eigen::VectorXd y(static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i)
        y(static_cast<Eigen::Index>(i)) = points[i].phase - s.target_mean;

    const auto d2 = gp_detail::squared_distances(X);
    const Eigen::MatrixXd K = gp_detail::kernel_matrix(d2, hyper);
    const auto fact =
        gp_detail::cholesky_with_jitter(K, hyper.noise_std * hyper.noise_std);
    const auto& L = fact.L;
    const Eigen::VectorXd alpha = L.transpose().triangularView<Eigen::Upper>().solve(
        L.triangularView<Eigen::Lower>().solve(y));
    const Eigen::Index n = y.size();
    const Eigen::MatrixXd Ainv = L.transpose().triangularView<Eigen::Upper>().solve(
        L.triangularView<Eigen::Lower>().solve(
            Eigen::MatrixXd::Identity(n, n)));
    const Eigen::MatrixXd W = alpha * alpha.transpose() - Ainv;

    // dK/dlog(l) = K .* d2 / l^2 ; dK/dlog(sf) = 2K ; dA/dlog(sn) = 2 sn^2 I
    const double inv_l2 = 1.0 / (hyper.length_scale * hyper.length_scale);
    const double g_l = 0.5 * (W.array() * K.array() * d2.array() * inv_l2).sum();
    const double g_sf = 0.5 * (W.array() * (2.0 * K).array()).sum();
    const double g_sn = hyper.noise_std * hyper.noise_std * W.trace();
    return {g_l, g_sf, g_sn};
}

namespace gp_detail {

struct SearchState {
    GPHyperparams hyper;
    double lml = -std::numeric_limits<double>::infinity();
};

struct SearchBounds {
    double l_lo, l_hi;
    double sf_lo, sf_hi;
    double sn_lo, sn_hi;
};

inline GPHyperparams clamp_hyper(GPHyperparams h, const SearchBounds& b) {
    h.length_scale = std::clamp(h.length_scale, b.l_lo, b.l_hi);
    h.signal_std = std::clamp(h.signal_std, b.sf_lo, b.sf_hi);
    h.noise_std = std::clamp(h.noise_std, b.sn_lo, b.sn_hi);
    return h;
}

inline double try_lml(const Eigen::MatrixXd& d2, const Eigen::VectorXd& y,
                      const GPHyperparams& h) {
    try {
        return lml_from_parts(d2, y, h).lml;
    } catch (const NotPositiveDefinite&) {
        return -std::numeric_limits<double>::infinity();
    }
}

}  // namespace gp_detail

// Fit a GP to the cleaned aligned training set. Hyperparameters maximize
// the log marginal likelihood over a fixed log-spaced grid, then each
// coordinate is refined by a derivative-directed line search in log space,
// clamped to the hull of the grid.
//
// Grid (standardized input units; sigma_t is the std of centered targets):
//   length_scale: 0.2 * ||(std_x, std_y)|| * {1/4, 1/2, 1, 2}
//   signal_std:   sigma_t * {0.5, 1, 2}
//   noise_std:    sigma_t * {0.01, 0.03, 0.1, 0.3}
//
// The hull bound on the length scale keeps the model spatially local: the
// filter gates detections on predictive spread, which only carries
// information when uncertainty reverts toward the prior within the frame.
// An unbounded likelihood search on these near-linear phase maps drifts to
// length scales far beyond the frame, where every position looks equally
// certain and the gate loses its geometry.
inline GPModel fit(const std::vector<TrainingPoint>& points,
                   const FitOptions& options = {}) {
    if (points.size() < 2) throw std::invalid_argument("fit needs >= 2 points");
    {
        double vx = 0.0, vy = 0.0;
        for (const auto& p : points) {
            vx += (p.pos.x - points[0].pos.x) * (p.pos.x - points[0].pos.x);
            vy += (p.pos.y - points[0].pos.y) * (p.pos.y - points[0].pos.y);
        }
        if (vx + vy < 1e-20) throw DegenerateData("all GP inputs coincide");
    }

    if (options.fixed) return make_gp_model(points, *options.fixed);

    const auto s = gp_detail::standardize_params(points);
    const auto X = gp_detail::standardized_inputs(points, s);
    Eigen::VectorXd y(static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i)
        y(static_cast<Eigen::Index>(i)) = points[i].phase - s.target_mean;
    const auto d2 = gp_detail::squared_distances(X);

    // After per-axis standardization the input stds are 1 except for
    // constant axes, which standardize to 0.
    const double n_rows = static_cast<double>(X.rows());
    const double std_norm =
        std::sqrt((X.col(0).squaredNorm() + X.col(1).squaredNorm()) / n_rows);
    const double base_l = 0.2 * std::max(std_norm, 1e-3);
    double sigma_t = std::sqrt(y.squaredNorm() / static_cast<double>(y.size()));
    if (sigma_t < 1e-6) sigma_t = 1e-6;

    static constexpr double kLengthFactors[] = {0.25, 0.5, 1.0, 2.0};
    static constexpr double kSignalFactors[] = {0.5, 1.0, 2.0};
    static constexpr double kNoiseFactors[] = {0.01, 0.03, 0.1, 0.3};

    const gp_detail::SearchBounds bounds{
        base_l * kLengthFactors[0], base_l * kLengthFactors[3],
        sigma_t * kSignalFactors[0], sigma_t * kSignalFactors[2],
        sigma_t * kNoiseFactors[0], sigma_t * kNoiseFactors[3]};

    gp_detail::SearchState best;
    for (const double fl : kLengthFactors) {
        for (const double fs : kSignalFactors) {
            for (const double fn : kNoiseFactors) {
                const GPHyperparams h{base_l * fl, sigma_t * fs, sigma_t * fn};
                const double lml = gp_detail::try_lml(d2, y, h);
                if (lml > best.lml) best = {h, lml};
            }
        }
    }
    if (!std::isfinite(best.lml))
        throw NotPositiveDefinite("no hyperparameter candidate factorizes");

    if (options.refine) {
        for (int pass = 0; pass < options.max_refine_passes; ++pass) {
            bool improved = false;
            for (int coord = 0; coord < 3; ++coord) {
                const auto grad =
                    log_marginal_likelihood_gradient(points, best.hyper);
                const double dir = grad[static_cast<std::size_t>(coord)] >= 0.0
                                       ? 1.0 : -1.0;
                double step = 0.35;  // log units
                int accepted = 0;
                while (step >= 0.02 && accepted < 12) {
                    GPHyperparams cand = best.hyper;
                    double* field = coord == 0   ? &cand.length_scale
                                    : coord == 1 ? &cand.signal_std
                                                 : &cand.noise_std;
                    *field *= std::exp(dir * step);
                    cand = gp_detail::clamp_hyper(cand, bounds);
                    const double lml = gp_detail::try_lml(d2, y, cand);
                    if (lml > best.lml + 1e-12) {
                        best = {cand, lml};
                        improved = true;
                        ++accepted;
                    } else {
                        step *= 0.5;
                    }
                }
            }
            if (!improved) break;
        }
    }
    return make_gp_model(points, best.hyper);
}

// Leave-one-out statistics of the training targets, computed from the
// stored factorization: predictive variance 1 / [(K + noise^2 I)^{-1}]_ii
// and prediction residual alpha_i * variance_i. Unlike the in-sample
// predictive spread, which every training point caps near the noise level
// by certifying itself, these measure what a fresh detection at a
// training-like position actually faces.
struct LooStats {
    Eigen::VectorXd variance;  // predictive, includes noise
    Eigen::VectorXd residual;  // target minus LOO mean, seconds
};

inline LooStats loo_statistics(const GPModel& model) {
    const Eigen::Index n = model.L.rows();
    // diag(A^{-1}) with A = L L^T: squared column norms of L^{-1}.
    const Eigen::MatrixXd Linv =
        model.L.triangularView<Eigen::Lower>().solve(
            Eigen::MatrixXd::Identity(n, n));
    LooStats out;
    out.variance.resize(n);
    out.residual.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.variance(i) = 1.0 / Linv.col(i).squaredNorm();
        out.residual(i) = model.alpha(i) * out.variance(i);
    }
    return out;
}

// Posterior mean and predictive standard deviation at a query position.
// sigma_hat includes the observation-noise variance, matching what the
// online filter thresholds against time discrepancies.
inline GPPrediction predict(const GPModel& model, const Point2& p) {
    const Eigen::Vector2d q = model.standardize(p);
    const double sf2 = model.hyper.signal_std * model.hyper.signal_std;
    const double inv = -0.5 / (model.hyper.length_scale * model.hyper.length_scale);

    Eigen::VectorXd k(model.X.rows());
    for (Eigen::Index i = 0; i < model.X.rows(); ++i) {
        const double dx = model.X(i, 0) - q(0);
        const double dy = model.X(i, 1) - q(1);
        k(i) = sf2 * std::exp((dx * dx + dy * dy) * inv);
    }

    GPPrediction out;
    out.t_hat = k.dot(model.alpha) + model.target_mean;
    const Eigen::VectorXd v = model.L.triangularView<Eigen::Lower>().solve(k);
    double latent = sf2 - v.squaredNorm();
    latent = std::clamp(latent, 0.0, sf2);
    out.sigma_hat =
        std::sqrt(latent + model.hyper.noise_std * model.hyper.noise_std);
    return out;
}

}  // namespace perigp

#endif  // PERIGP_GP_HPP
