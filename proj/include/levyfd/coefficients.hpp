#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "levyfd/errors.hpp"
#include "levyfd/grid.hpp"

namespace levyfd {

/// Coefficients (t, x) -> a, b, c of the local operator
/// a d2/dx2 + b d/dx + c, together with the declared magnitude bound and
/// time-regularity data. a may vanish anywhere (degenerate problems are
/// first-class); a < 0 is rejected at evaluation time.
struct CoefficientSet {
    std::function<double(double, double)> a;
    std::function<double(double, double)> b;
    std::function<double(double, double)> c;

    double bound = 1.0;            // K: |a|, |b|, |c| <= K
    double holder_constant = 0.0;  // C in |coef_t - coef_s|^2 <= C |t-s|^gamma
    double holder_exponent = 1.0;  // gamma
    bool time_constant = false;    // hint: no t-dependence (enables caching)

    static CoefficientSet zero() {
        CoefficientSet cs;
        auto z = [](double, double) { return 0.0; };
        cs.a = z;
        cs.b = z;
        cs.c = z;
        cs.bound = 0.0;
        cs.time_constant = true;
        return cs;
    }
};

/// Coefficients evaluated on a grid at a fixed time.
struct CoefficientSample {
    std::vector<double> a, b, c;
};

/// Samples a, b, c at (t, x_j) for all grid points, enforcing finiteness,
/// a >= 0, and the declared magnitude bound.
inline CoefficientSample sample_coefficients(const CoefficientSet& cs, double t,
                                             const GridSpec& spec) {
    const std::size_t n = static_cast<std::size_t>(spec.size());
    CoefficientSample out;
    out.a.resize(n);
    out.b.resize(n);
    out.c.resize(n);
    const double limit = cs.bound + 1e-12;
    for (long j = -spec.halfwidth; j <= spec.halfwidth; ++j) {
        const double x = spec.point(j);
        const double av = cs.a ? cs.a(t, x) : 0.0;
        const double bv = cs.b ? cs.b(t, x) : 0.0;
        const double cv = cs.c ? cs.c(t, x) : 0.0;
        if (!std::isfinite(av) || !std::isfinite(bv) || !std::isfinite(cv))
            throw CoefficientError("coefficient evaluated to a non-finite value", t, x);
        if (av < 0.0)
            throw CoefficientError("diffusion coefficient a must be >= 0", t, x);
        if (std::abs(av) > limit || std::abs(bv) > limit || std::abs(cv) > limit)
            throw CoefficientError("coefficient exceeds its declared bound", t, x);
        const std::size_t i = static_cast<std::size_t>(j + spec.halfwidth);
        out.a[i] = av;
        out.b[i] = bv;
        out.c[i] = cv;
    }
    return out;
}

} // namespace levyfd
