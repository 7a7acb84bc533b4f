#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "crowdtm/errors.hpp"

namespace crowdtm {

struct GradCheckReport {
    bool pass = false;
    double max_rel_err = 0.0;
    std::size_t worst_index = 0;
};

/// Compares analytic gradients against central finite differences
/// (f(p+h)-f(p-h))/2h, relative error denominator max(|a|,|b|,1e-8).
inline GradCheckReport finite_diff_check(const std::function<double(std::span<const double>)>& loss_fn,
                                         std::span<double> params,
                                         std::span<const double> analytic_grads,
                                         double step, double tol) {
    if (step <= 0.0) throw ConfigError("finite_diff_check: step must be positive");
    if (params.size() != analytic_grads.size())
        throw std::invalid_argument("finite_diff_check: size mismatch");
    GradCheckReport report;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double orig = params[i];
        params[i] = orig + step;
        const double fp = loss_fn(params);
        params[i] = orig - step;
        const double fm = loss_fn(params);
        params[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("finite_diff_check: non-finite loss");
        const double numeric = (fp - fm) / (2.0 * step);
        const double analytic = analytic_grads[i];
        const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-8});
        const double rel = std::fabs(numeric - analytic) / denom;
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_index = i;
        }
    }
    report.pass = report.max_rel_err < tol;
    return report;
}

} // namespace crowdtm
