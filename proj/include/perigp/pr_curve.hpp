#ifndef PERIGP_PR_CURVE_HPP
#define PERIGP_PR_CURVE_HPP

#include <cmath>
#include <stdexcept>
#include <string>

namespace perigp {

// Analytic precision-recall family standing in for a detector:
//
//     precision(r) = 1 - r^beta,   beta > 0
//
// Precision is 1 at recall 0 and decreases monotonically; the area under
// the curve has the closed form beta / (beta + 1), which lets a model be
// calibrated exactly to a target AP.
struct PRCurveModel {
    double beta = 1.0;
    std::string label = "PR";

    double precision(double recall) const {
        if (recall < 0.0 || recall > 1.0)
            throw std::invalid_argument("recall outside [0,1]");
        return 1.0 - std::pow(recall, beta);
    }

    double analytic_ap() const { return beta / (beta + 1.0); }
};

// Solve beta/(beta+1) = ap for beta.
inline PRCurveModel pr_model_from_ap(double ap, std::string label) {
    if (!(ap > 0.0) || !(ap < 1.0))
        throw std::invalid_argument("AP target must lie strictly inside (0,1)");
    return PRCurveModel{ap / (1.0 - ap), std::move(label)};
}

}  // namespace perigp

#endif  // PERIGP_PR_CURVE_HPP
