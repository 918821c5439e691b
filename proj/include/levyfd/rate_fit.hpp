#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "levyfd/errors.hpp"

namespace levyfd {

enum class RateFitStatus { Fitted, Exact, InsufficientData };

inline std::string to_string(RateFitStatus s) {
    switch (s) {
        case RateFitStatus::Fitted: return "fitted";
        case RateFitStatus::Exact: return "exact";
        case RateFitStatus::InsufficientData: return "insufficient-data";
    }
    return "?";
}

/// Least-squares fit of log(error) against log(parameter). The slope is the
/// observed convergence order (positive when errors shrink with the
/// parameter).
struct RateFit {
    RateFitStatus status = RateFitStatus::InsufficientData;
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Fits (parameter, error) pairs. Levels with error exactly zero mean the
/// scheme is exact there: all-zero input short-circuits to Exact, and zero
/// levels are otherwise dropped. Fewer than 3 positive-error levels yield
/// InsufficientData instead of a fit.
inline RateFit fit_rate(const std::vector<std::pair<double, double>>& levels) {
    std::vector<std::pair<double, double>> positive;
    bool any_zero = false;
    for (auto [param, err] : levels) {
        if (!(param > 0.0)) throw Error("rate fit parameters must be positive");
        if (err < 0.0) throw Error("rate fit errors must be nonnegative");
        if (err == 0.0) {
            any_zero = true;
        } else {
            positive.emplace_back(param, err);
        }
    }

    RateFit fit;
    if (any_zero && positive.empty()) {
        fit.status = RateFitStatus::Exact;
        fit.r_squared = 1.0;
        return fit;
    }
    if (positive.size() < 3) {
        fit.status = RateFitStatus::InsufficientData;
        return fit;
    }

    const double n = static_cast<double>(positive.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (auto [param, err] : positive) {
        const double x = std::log(param);
        const double y = std::log(err);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw Error("rate fit needs distinct parameters");
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;

    double ss_res = 0.0, ss_tot = 0.0;
    const double mean_y = sy / n;
    for (auto [param, err] : positive) {
        const double x = std::log(param);
        const double y = std::log(err);
        const double pred = fit.intercept + fit.slope * x;
        ss_res += (y - pred) * (y - pred);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    fit.r_squared = ss_tot > 1e-30 ? 1.0 - ss_res / ss_tot
                                   : (ss_res < 1e-30 ? 1.0 : 0.0);
    fit.status = RateFitStatus::Fitted;
    return fit;
}

} // namespace levyfd
