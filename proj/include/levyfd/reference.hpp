#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "levyfd/coefficients.hpp"
#include "levyfd/errors.hpp"
#include "levyfd/grid.hpp"
#include "levyfd/integrator.hpp"
#include "levyfd/levy_measure.hpp"
#include "levyfd/quadrature.hpp"

namespace levyfd {

/// Compactly supported spatial factor of a separable profile, with
/// hand-coded first and second derivatives. `smoothness` tags the
/// continuity class (kSmoothInfinity for C-infinity shapes).
struct SpatialShape {
    std::string name;
    double radius = 1.0;
    int smoothness = 0;
    std::function<double(double)> value;
    std::function<double(double)> deriv;
    std::function<double(double)> second_deriv;
};

struct TimeFactor {
    std::string name;
    std::function<double(double)> value;
    std::function<double(double)> deriv;
};

inline constexpr int kSmoothInfinity = 1000;

/// Separable space-time profile u(t,x) = g(t) U(x).
struct SmoothProfile {
    SpatialShape shape;
    TimeFactor time;

    double u(double t, double x) const { return time.value(t) * shape.value(x); }
    double du_dt(double t, double x) const {
        return time.deriv(t) * shape.value(x);
    }
    double du_dx(double t, double x) const {
        return time.value(t) * shape.deriv(x);
    }
    double d2u_dx2(double t, double x) const {
        return time.value(t) * shape.second_deriv(x);
    }
    std::string name() const { return shape.name + "*" + time.name; }
};

/// C-infinity bump exp(1 - 1/(1-(x/r)^2)) on |x| < r, zero outside.
inline SpatialShape make_bump(double radius = 1.0) {
    if (!(radius > 0.0)) throw Error("bump radius must be positive");
    SpatialShape s;
    s.name = "bump";
    s.radius = radius;
    s.smoothness = kSmoothInfinity;
    const double r = radius;
    auto core = [r](double x) -> double {
        const double sq = (x / r) * (x / r);
        if (sq >= 1.0) return 0.0;
        return std::exp(1.0 - 1.0 / (1.0 - sq));
    };
    s.value = core;
    s.deriv = [r, core](double x) -> double {
        const double s_ = x / r;
        const double d = 1.0 - s_ * s_;
        if (d <= 0.0) return 0.0;
        const double g = -2.0 * s_ / (d * d);
        return core(x) * g / r;
    };
    s.second_deriv = [r, core](double x) -> double {
        const double s_ = x / r;
        const double d = 1.0 - s_ * s_;
        if (d <= 0.0) return 0.0;
        const double g = -2.0 * s_ / (d * d);
        const double gp = -2.0 * (1.0 + 3.0 * s_ * s_) / (d * d * d);
        return core(x) * (g * g + gp) / (r * r);
    };
    return s;
}

/// Polynomial bump (1-(x/r)^2)^p on |x| < r; continuity class C^(p-1),
/// so p >= 6 gives the C^5 regularity needed by the sharper temporal rate.
inline SpatialShape make_poly_bump(double radius = 1.0, int power = 6) {
    if (!(radius > 0.0)) throw Error("bump radius must be positive");
    if (power < 2) throw Error("polynomial bump power must be >= 2");
    SpatialShape s;
    s.name = "polybump" + std::to_string(power);
    s.radius = radius;
    s.smoothness = power - 1;
    const double r = radius;
    const double p = static_cast<double>(power);
    s.value = [r, p](double x) -> double {
        const double d = 1.0 - (x / r) * (x / r);
        return d > 0.0 ? std::pow(d, p) : 0.0;
    };
    s.deriv = [r, p](double x) -> double {
        const double s_ = x / r;
        const double d = 1.0 - s_ * s_;
        if (d <= 0.0) return 0.0;
        return -2.0 * p * s_ * std::pow(d, p - 1.0) / r;
    };
    s.second_deriv = [r, p](double x) -> double {
        const double s_ = x / r;
        const double d = 1.0 - s_ * s_;
        if (d <= 0.0) return 0.0;
        return (4.0 * p * (p - 1.0) * s_ * s_ * std::pow(d, p - 2.0) -
                2.0 * p * std::pow(d, p - 1.0)) /
               (r * r);
    };
    return s;
}

inline TimeFactor make_time_factor(const std::string& name) {
    TimeFactor f;
    f.name = name;
    if (name == "one") {
        f.value = [](double) { return 1.0; };
        f.deriv = [](double) { return 0.0; };
    } else if (name == "exp") {
        f.value = [](double t) { return std::exp(-t); };
        f.deriv = [](double t) { return -std::exp(-t); };
    } else if (name == "cos") {
        f.value = [](double t) { return std::cos(t); };
        f.deriv = [](double t) { return -std::sin(t); };
    } else {
        throw Error("unknown time factor '" + name + "' (one|exp|cos)");
    }
    return f;
}

/// Catalog of built-in profiles: both bump shapes under each time factor.
inline std::vector<SmoothProfile> builtin_profiles(double radius = 1.0,
                                                   int poly_power = 6) {
    std::vector<SmoothProfile> out;
    for (const std::string& tf : {"one", "exp", "cos"}) {
        out.push_back({make_bump(radius), make_time_factor(tf)});
        out.push_back({make_poly_bump(radius, poly_power), make_time_factor(tf)});
    }
    return out;
}

namespace detail {

// Switch between the Taylor-remainder form U(x+z)-U(x)-zU'(x) (cheap, but
// cancellation-prone for tiny z) and the layered integral z^2 * int (1-th)
// U''(x+th z) dth (stable near 0).
inline constexpr double kRemainderSwitch = 0.05;

template <class Shape>
double compensated_remainder(const Shape& shape, double x, double z,
                             double quad_tol) {
    if (std::abs(z) >= kRemainderSwitch) {
        return shape.value(x + z) - shape.value(x) - z * shape.deriv(x);
    }
    auto integrand = [&](double theta) {
        return (1.0 - theta) * shape.second_deriv(x + theta * z);
    };
    const double layered =
        integrate_adaptive(integrand, 0.0, 1.0, 1e-12, 0.1 * quad_tol).value;
    return z * z * layered;
}

} // namespace detail

/// Continuous jump operator applied to a spatial shape at a point:
///
///   J U(x) = int ( U(x+z) - U(x) - 1_{|z|<=1} z U'(x) ) nu(dz)
///
/// evaluated as the compensated small-jump integral over [-1,1] plus the
/// translation integral outside. Adaptive quadrature to absolute accuracy
/// quad_tol; density families require a compactly supported shape so the
/// outer translation integral has bounded support.
inline double continuous_jump(const SpatialShape& shape, double x,
                              const LevyMeasure& measure,
                              double quad_tol = 1e-10) {
    if (measure.family() == LevyMeasure::Family::Atomic) {
        double total = 0.0;
        for (const Atom& a : measure.atoms()) {
            if (std::abs(a.location) <= 1.0) {
                total += a.mass *
                         detail::compensated_remainder(shape, x, a.location, quad_tol);
            } else {
                total += a.mass * (shape.value(x + a.location) - shape.value(x));
            }
        }
        return total;
    }

    if (!std::isfinite(shape.radius))
        throw Error("density-family jump oracle needs a compactly supported shape");

    std::function<double(double)> density;
    double support_lo = -std::numeric_limits<double>::infinity();
    double support_hi = std::numeric_limits<double>::infinity();
    switch (measure.family()) {
        case LevyMeasure::Family::PowerLaw: {
            const double c = measure.intensity(), a = measure.alpha();
            density = [c, a](double z) {
                return c * std::pow(std::abs(z), -2.0 - a);
            };
            break;
        }
        case LevyMeasure::Family::TemperedPowerLaw: {
            const double c = measure.intensity(), a = measure.alpha(),
                         lam = measure.tempering();
            density = [c, a, lam](double z) {
                const double az = std::abs(z);
                return c * std::pow(az, -2.0 - a) * std::exp(-lam * az);
            };
            break;
        }
        case LevyMeasure::Family::CompoundPoisson: {
            const double d = measure.cp_total_mass() /
                             (measure.cp_support_hi() - measure.cp_support_lo());
            density = [d](double) { return d; };
            support_lo = measure.cp_support_lo();
            support_hi = measure.cp_support_hi();
            break;
        }
        default:
            throw Error("unsupported measure family");
    }

    // Small jumps: integrate density(z) * remainder(x, z) over [-1,1],
    // split at 0 and at the remainder-form switch points.
    auto small_integrand = [&](double z) {
        return density(z) * detail::compensated_remainder(shape, x, z, quad_tol);
    };
    double small_total = 0.0;
    {
        std::vector<std::pair<double, double>> pieces;
        const double zs = detail::kRemainderSwitch;
        auto clip = [&](double a, double b) {
            a = std::max(a, support_lo);
            b = std::min(b, support_hi);
            if (b > a) pieces.emplace_back(a, b);
        };
        clip(-1.0, -zs);
        clip(-zs, 0.0);
        clip(0.0, zs);
        clip(zs, 1.0);
        for (auto [a, b] : pieces) {
            small_total += integrate_adaptive(small_integrand, a, b, 1e-12,
                                              quad_tol / 4.0)
                               .value;
        }
    }

    // Big jumps: the translation term has support z in [-r-x, r-x]; the
    // mass term uses the exact tail mass outside the unit ball.
    double big_total = -shape.value(x) * measure.tail_mass(1.0);
    {
        auto translated = [&](double z) { return density(z) * shape.value(x + z); };
        const double r = shape.radius;
        std::vector<std::pair<double, double>> pieces;
        auto clip = [&](double a, double b) {
            a = std::max({a, -r - x, support_lo});
            b = std::min({b, r - x, support_hi});
            if (b > a) pieces.emplace_back(a, b);
        };
        clip(-std::numeric_limits<double>::max(), -1.0);
        clip(1.0, std::numeric_limits<double>::max());
        for (auto [a, b] : pieces) {
            big_total += integrate_adaptive(translated, a, b, 1e-12,
                                            quad_tol / 4.0)
                             .value;
        }
    }
    return small_total + big_total;
}

/// A chosen exact solution u(t,x) = g(t) U(x) turned into a problem of the
/// target equation by manufacturing the forcing
///
///   f = du/dt - a d2u/dx2 - b du/dx - c u - J u,
///
/// so that u solves du/dt = (local + jump) u + f with psi = u(0, .). Every
/// term is analytic except J u, which is evaluated by quadrature. Because
/// the profile is separable, J u(t, x) = g(t) * J U(x) and the grid-bound
/// problem caches J U per grid point.
class ManufacturedProblem {
public:
    ManufacturedProblem(SmoothProfile profile, CoefficientSet coeffs,
                        LevyMeasure measure, double horizon,
                        double quad_tol = 1e-10)
        : profile_(std::move(profile)),
          coeffs_(std::move(coeffs)),
          measure_(std::move(measure)),
          horizon_(horizon),
          quad_tol_(quad_tol) {}

    const SmoothProfile& profile() const { return profile_; }
    const CoefficientSet& coeffs() const { return coeffs_; }
    const LevyMeasure& measure() const { return measure_; }
    double horizon() const { return horizon_; }
    double quad_tol() const { return quad_tol_; }

    double exact(double t, double x) const { return profile_.u(t, x); }

    GridFunction exact_on_grid(double t, const GridSpec& spec) const {
        return sample([&](double x) { return exact(t, x); }, spec);
    }

    /// Pointwise manufactured forcing; evaluates the jump oracle directly.
    double rhs(double t, double x) const {
        return rhs_with_jump(t, x, continuous_jump(profile_.shape, x, measure_,
                                                   quad_tol_));
    }

    /// ProblemSpec whose forcing evaluates J U by quadrature on every call.
    ProblemSpec problem_direct() const {
        ProblemSpec p;
        p.coeffs = coeffs_;
        p.horizon = horizon_;
        p.initial = [prof = profile_](double x) { return prof.u(0.0, x); };
        p.forcing = [self = *this](double t, double x) { return self.rhs(t, x); };
        return p;
    }

    /// ProblemSpec with J U precomputed on the grid points of `spec`.
    /// Off-grid evaluations fall back to the direct quadrature path.
    ProblemSpec problem_for_grid(const GridSpec& spec) const {
        auto cache = std::make_shared<GridFunction>(jump_on_grid(spec));
        ProblemSpec p;
        p.coeffs = coeffs_;
        p.horizon = horizon_;
        p.initial = [prof = profile_](double x) { return prof.u(0.0, x); };
        p.forcing = [self = *this, cache, spec](double t, double x) {
            const double jn = x * static_cast<double>(spec.h.n);
            const long j = std::lround(jn);
            if (std::abs(jn - static_cast<double>(j)) < 1e-9 &&
                std::labs(j) <= spec.halfwidth) {
                return self.rhs_with_jump(t, x, cache->at(j));
            }
            return self.rhs(t, x);
        };
        return p;
    }

    /// J U sampled on the grid (the cache used by problem_for_grid).
    GridFunction jump_on_grid(const GridSpec& spec) const {
        GridFunction out(spec);
        for (long j = -spec.halfwidth; j <= spec.halfwidth; ++j)
            out[j] = continuous_jump(profile_.shape, spec.point(j), measure_,
                                     quad_tol_);
        return out;
    }

private:
    double rhs_with_jump(double t, double x, double jump_value) const {
        const double g = profile_.time.value(t);
        return profile_.du_dt(t, x) - coeffs_.a(t, x) * profile_.d2u_dx2(t, x) -
               coeffs_.b(t, x) * profile_.du_dx(t, x) -
               coeffs_.c(t, x) * profile_.u(t, x) - g * jump_value;
    }

    SmoothProfile profile_;
    CoefficientSet coeffs_;
    LevyMeasure measure_;
    double horizon_;
    double quad_tol_;
};

} // namespace levyfd
