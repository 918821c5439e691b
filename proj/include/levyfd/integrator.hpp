#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "levyfd/coefficients.hpp"
#include "levyfd/errors.hpp"
#include "levyfd/grid.hpp"
#include "levyfd/operators.hpp"

namespace levyfd {

/// Uniform partition of [0, T] into n implicit steps of size tau = T/n.
struct TimeGrid {
    double horizon = 1.0;
    long steps = 1;

    static TimeGrid make(double horizon, long steps) {
        if (!(horizon > 0.0)) throw Error("time horizon must be positive");
        if (steps < 1) throw Error("time grid needs at least one step");
        return TimeGrid{horizon, steps};
    }

    double tau() const { return horizon / static_cast<double>(steps); }
    double knot(long i) const {
        return horizon * static_cast<double>(i) / static_cast<double>(steps);
    }
};

enum class SchemeTag { Semidiscrete, ImplicitEuler };

struct StepDiagnostics {
    double t = 0.0;
    double residual = 0.0;
    int iterations = 0; // 0 marks a direct solve
};

/// Time-evolved solution: snapshots on a common grid plus solver
/// diagnostics for implicit runs. Snapshot 0 is the restricted initial
/// condition.
struct Trajectory {
    GridSpec spec{Spacing{1}, 1};
    SchemeTag tag = SchemeTag::Semidiscrete;
    std::vector<double> times;
    std::vector<GridFunction> snapshots;
    std::vector<StepDiagnostics> diagnostics;

    const GridFunction& at_time(double t) const {
        for (std::size_t i = 0; i < times.size(); ++i)
            if (std::abs(times[i] - t) <= 1e-12 * std::max(1.0, std::abs(t)))
                return snapshots[i];
        throw Error("no snapshot stored at the requested time");
    }
};

/// The problem data fed to both schemes: coefficients, forcing f(t, x)
/// (empty = zero), initial condition, horizon, and the time-regularity
/// exponent used by reports.
struct ProblemSpec {
    CoefficientSet coeffs;
    std::function<double(double, double)> forcing; // may be empty
    std::function<double(double)> initial;
    double horizon = 1.0;
};

struct SolvabilityReport {
    bool pass = false;
    double coercivity_estimate = 0.0; // max Rayleigh quotient over probes
    double tau = 0.0;
    double step_threshold = 0.0; // largest tau the check would accept
};

/// Estimates the coercivity constant of A by Rayleigh-quotient probing
/// (random probes plus a fixed set of smooth shapes) and accepts the step
/// size iff tau * estimate <= 1/2. The underlying theory guarantees a
/// threshold exists but gives no computable constant, so the artifact
/// estimates it and applies the 1/2 safety factor.
inline SolvabilityReport check_solvability(const DiscreteOperator& op, double tau,
                                           std::uint64_t seed = 0x9e3779b9,
                                           int random_probes = 30) {
    const GridSpec& spec = op.spec();
    double worst = -std::numeric_limits<double>::infinity();

    auto consider = [&](const GridFunction& phi) {
        const double nn = inner_l2(phi, phi);
        if (nn <= 0.0) return;
        const double q = inner_l2(op.apply(phi), phi) / nn;
        worst = std::max(worst, q);
    };

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int p = 0; p < random_probes; ++p) {
        GridFunction phi(spec);
        for (long j = -spec.halfwidth; j <= spec.halfwidth; ++j) phi[j] = uni(rng);
        consider(phi);
    }

    const double radius = spec.radius();
    const std::vector<std::function<double(double)>> smooth = {
        [](double) { return 1.0; },
        [radius](double x) { return x / radius; },
        [radius](double x) { return std::exp(-8.0 * x * x / (radius * radius)); },
        [radius](double x) { return std::sin(M_PI * x / radius); },
        [radius](double x) {
            return x * std::exp(-8.0 * x * x / (radius * radius));
        }};
    for (const auto& f : smooth) consider(sample(f, spec));

    SolvabilityReport report;
    report.coercivity_estimate = worst;
    report.tau = tau;
    report.step_threshold = worst > 0.0
                                ? 0.5 / worst
                                : std::numeric_limits<double>::infinity();
    report.pass = tau * worst <= 0.5;
    return report;
}

/// Residual-controlled solve of M v = rhs. Direct sparse LU up to 2000
/// points, BiCGSTAB beyond; either way the result is polished by iterative
/// refinement until the discrete-l2 residual meets `residual_tol`. The
/// contract is on the residual only.
inline std::pair<GridFunction, StepDiagnostics>
linear_solve(const SparseMatrix& M, const GridFunction& rhs, double residual_tol) {
    const long n = static_cast<long>(rhs.values().size());
    Eigen::Map<const Eigen::VectorXd> b(rhs.values().data(), n);
    const double h = rhs.spec().h.value();
    const double sqrt_h = std::sqrt(h);

    Eigen::SparseMatrix<double> mcol = M; // column-major copy for the solvers
    Eigen::VectorXd x(n);
    StepDiagnostics diag;

    const bool direct = n <= 2000;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double>> krylov;
    if (direct) {
        lu.compute(mcol);
        if (lu.info() != Eigen::Success)
            throw SolverError("sparse LU factorization failed", {});
        x = lu.solve(b);
    } else {
        krylov.setTolerance(1e-14);
        krylov.setMaxIterations(5 * n);
        krylov.compute(mcol);
        x = krylov.solve(b);
        diag.iterations = static_cast<int>(krylov.iterations());
    }

    std::vector<double> history;
    auto residual_l2 = [&](const Eigen::VectorXd& v) {
        return sqrt_h * (M * v - b).norm();
    };
    double res = residual_l2(x);
    history.push_back(res);
    for (int round = 0; round < 4 && res > residual_tol; ++round) {
        const Eigen::VectorXd r = b - M * x;
        Eigen::VectorXd d;
        if (direct) {
            d = lu.solve(r);
        } else {
            d = krylov.solve(r);
            diag.iterations += static_cast<int>(krylov.iterations());
        }
        x += d;
        res = residual_l2(x);
        history.push_back(res);
    }
    if (!(res <= residual_tol))
        throw SolverError("linear solver failed to reach the residual tolerance",
                          history);

    GridFunction out(rhs.spec());
    Eigen::Map<Eigen::VectorXd>(out.values().data(), n) = x;
    diag.residual = res;
    return {std::move(out), diag};
}

/// Spatial system bound to one grid: the time-independent jump matrix plus
/// the local part, with a fully assembled matrix cached when the
/// coefficients are time-constant.
class SpatialSystem {
public:
    SpatialSystem(GridSpec spec, CoefficientSet coeffs, const LevyMeasure& measure,
                  long truncation_index)
        : spec_(spec),
          coeffs_(std::move(coeffs)),
          stencil_(JumpStencil::build(measure, spec.h, spec.halfwidth,
                                      truncation_index)),
          jump_(jump_matrix(stencil_, spec)) {
        if (coeffs_.time_constant)
            full_ = levyfd::assemble(coeffs_, stencil_, spec_, 0.0).matrix();
    }

    const GridSpec& spec() const { return spec_; }
    const JumpStencil& stencil() const { return stencil_; }

    DiscreteOperator assemble_at(double t) const {
        if (full_) return DiscreteOperator(t, spec_, *full_);
        return levyfd::assemble(coeffs_, stencil_, spec_, t);
    }

    /// out = (local_t + jump) in
    void apply(double t, const GridFunction& in, GridFunction& out) const {
        const long n = static_cast<long>(in.values().size());
        Eigen::Map<const Eigen::VectorXd> vin(in.values().data(), n);
        Eigen::Map<Eigen::VectorXd> vout(out.values().data(), n);
        if (full_) {
            vout.noalias() = (*full_) * vin;
            return;
        }
        vout.noalias() = jump_ * vin;
        const CoefficientSample cs = sample_coefficients(coeffs_, t, spec_);
        const double h = spec_.h.value();
        const double inv_4h2 = 1.0 / (4.0 * h * h);
        const double inv_2h = 1.0 / (2.0 * h);
        const long m = spec_.halfwidth;
        for (long j = -m; j <= m; ++j) {
            const std::size_t i = static_cast<std::size_t>(j + m);
            const double wide =
                (in.at(j + 2) - 2.0 * in.at(j) + in.at(j - 2)) * inv_4h2;
            const double sym = (in.at(j + 1) - in.at(j - 1)) * inv_2h;
            out[j] += cs.a[i] * wide + cs.b[i] * sym + cs.c[i] * in.at(j);
        }
    }

    /// Max-row-sum stability bound, sampled at a few times across [0, T].
    double stability_bound(double horizon) const {
        double bound = 0.0;
        for (double t : {0.0, 0.5 * horizon, horizon})
            bound = std::max(bound, assemble_at(t).row_sum_bound());
        return bound;
    }

private:
    GridSpec spec_;
    CoefficientSet coeffs_;
    JumpStencil stencil_;
    SparseMatrix jump_;
    std::optional<SparseMatrix> full_;
};

namespace detail {

inline GridFunction sample_forcing(const ProblemSpec& problem, double t,
                                   const GridSpec& spec) {
    if (!problem.forcing) return GridFunction(spec);
    return sample([&](double x) { return problem.forcing(t, x); }, spec);
}

} // namespace detail

inline constexpr double kBlowUpGuard = 1e12;
inline constexpr double kDefaultStabilityFactor = 0.5;

/// Method-of-lines reference solution: classical RK4 on the spatially
/// discretized system with a fine, stability-bounded step. Snapshots are
/// stored exactly at the requested times (plus t = 0). Pass dt_fine <= 0 to
/// let the solver pick stability_factor / row_sum_bound.
inline Trajectory semidiscrete_solve(const SpatialSystem& system,
                                     const ProblemSpec& problem, double dt_fine,
                                     std::vector<double> snapshot_times = {},
                                     double stability_factor = kDefaultStabilityFactor) {
    const GridSpec& spec = system.spec();
    const double horizon = problem.horizon;
    if (snapshot_times.empty()) snapshot_times = {horizon};

    if (dt_fine <= 0.0) {
        const double bound = system.stability_bound(horizon);
        dt_fine = bound > 0.0 ? stability_factor / bound : horizon;
    }

    Trajectory traj;
    traj.spec = spec;
    traj.tag = SchemeTag::Semidiscrete;

    GridFunction v = sample(problem.initial, spec);
    traj.times.push_back(0.0);
    traj.snapshots.push_back(v);

    GridFunction k1(spec), k2(spec), k3(spec), k4(spec), scratch(spec);
    auto rhs = [&](double t, const GridFunction& y, GridFunction& out) {
        system.apply(t, y, out);
        if (problem.forcing) {
            for (long j = -spec.halfwidth; j <= spec.halfwidth; ++j) {
                const double f = problem.forcing(t, spec.point(j));
                if (!std::isfinite(f))
                    throw SamplingError("forcing is not finite", spec.point(j));
                out[j] += f;
            }
        }
    };

    double t = 0.0;
    for (double target : snapshot_times) {
        if (target < t - 1e-14)
            throw Error("snapshot times must be sorted ascending");
        if (target > t + 1e-14) {
            const double span = target - t;
            const long steps =
                std::max(1L, static_cast<long>(std::ceil(span / dt_fine - 1e-12)));
            const double dt = span / static_cast<double>(steps);
            for (long s = 0; s < steps; ++s) {
                rhs(t, v, k1);
                scratch = axpy(0.5 * dt, k1, v);
                rhs(t + 0.5 * dt, scratch, k2);
                scratch = axpy(0.5 * dt, k2, v);
                rhs(t + 0.5 * dt, scratch, k3);
                scratch = axpy(dt, k3, v);
                rhs(t + dt, scratch, k4);
                for (std::size_t i = 0; i < v.values().size(); ++i) {
                    v.values()[i] += dt / 6.0 *
                                     (k1.values()[i] + 2.0 * k2.values()[i] +
                                      2.0 * k3.values()[i] + k4.values()[i]);
                }
                t += dt;
                if (norm_sup(v) > kBlowUpGuard)
                    throw InstabilityError(
                        "semidiscrete integration blew up; decrease dt_fine");
            }
            t = target;
        }
        if (traj.times.empty() || std::abs(traj.times.back() - target) > 1e-14) {
            traj.times.push_back(target);
            traj.snapshots.push_back(v);
        }
    }
    return traj;
}

/// Convenience overload building the spatial system from the measure.
inline Trajectory semidiscrete_solve(const ProblemSpec& problem,
                                     const GridSpec& spec,
                                     const LevyMeasure& measure,
                                     long truncation_index, double dt_fine,
                                     std::vector<double> snapshot_times = {},
                                     double stability_factor = kDefaultStabilityFactor) {
    const SpatialSystem system(spec, problem.coeffs, measure, truncation_index);
    return semidiscrete_solve(system, problem, dt_fine, std::move(snapshot_times),
                              stability_factor);
}

struct ImplicitOptions {
    double residual_tol = 1e-10;   // scaled by (1 + |rhs|)
    std::uint64_t probe_seed = 0x9e3779b9;
    bool check_each_step = true;
};

/// Fully implicit Euler scheme: each step solves
/// (I - tau A_i) v_i = v_{i-1} + tau f(t_i) with f sampled at the right
/// endpoint. Refuses to run when the Rayleigh-probe solvability check
/// rejects the step size.
inline Trajectory implicit_euler_solve(const SpatialSystem& system,
                                       const ProblemSpec& problem, TimeGrid tg,
                                       ImplicitOptions options = {}) {
    const GridSpec& spec = system.spec();
    const double tau = tg.tau();
    const long n = static_cast<long>(spec.size());

    Trajectory traj;
    traj.spec = spec;
    traj.tag = SchemeTag::ImplicitEuler;

    GridFunction v = sample(problem.initial, spec);
    traj.times.push_back(0.0);
    traj.snapshots.push_back(v);

    SparseMatrix identity(static_cast<int>(n), static_cast<int>(n));
    identity.setIdentity();

    bool checked = false;
    for (long i = 1; i <= tg.steps; ++i) {
        const double t_i = tg.knot(i);
        const DiscreteOperator op = system.assemble_at(t_i);
        if (options.check_each_step || !checked) {
            const SolvabilityReport check =
                check_solvability(op, tau, options.probe_seed);
            checked = true;
            if (!check.pass)
                throw StepSizeError("implicit step size fails the solvability check",
                                    check.step_threshold);
        }

        GridFunction rhs = v;
        if (problem.forcing) {
            for (long j = -spec.halfwidth; j <= spec.halfwidth; ++j) {
                const double f = problem.forcing(t_i, spec.point(j));
                if (!std::isfinite(f))
                    throw SamplingError("forcing is not finite", spec.point(j));
                rhs[j] += tau * f;
            }
        }

        SparseMatrix M = identity - tau * op.matrix();
        const double tol = options.residual_tol * (1.0 + norm_l2(rhs));
        auto [solution, diag] = linear_solve(M, rhs, tol);
        diag.t = t_i;
        v = std::move(solution);
        traj.times.push_back(t_i);
        traj.snapshots.push_back(v);
        traj.diagnostics.push_back(diag);
    }
    return traj;
}

/// Convenience overload building the spatial system from the measure.
inline Trajectory implicit_euler_solve(const ProblemSpec& problem,
                                       const GridSpec& spec,
                                       const LevyMeasure& measure,
                                       long truncation_index, TimeGrid tg,
                                       ImplicitOptions options = {}) {
    const SpatialSystem system(spec, problem.coeffs, measure, truncation_index);
    return implicit_euler_solve(system, problem, tg, options);
}

} // namespace levyfd
