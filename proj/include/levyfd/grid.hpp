#pragma once

#include <cassert>
#include <cmath>
#include <utility>
#include <vector>

#include "levyfd/errors.hpp"
#include "levyfd/levy_measure.hpp" // Spacing

namespace levyfd {

/// A uniform symmetric grid x_j = j h for |j| <= halfwidth, i.e. the
/// restriction of the infinite grid h*Z to the window [-R, R] with
/// R = halfwidth * h. The window radius is always an integer multiple of h
/// and the point count 2*halfwidth + 1 is odd.
struct GridSpec {
    Spacing h;
    long halfwidth = 1;

    static GridSpec make(Spacing h, long halfwidth) {
        if (halfwidth < 1) throw Error("grid halfwidth must be >= 1");
        return GridSpec{h, halfwidth};
    }

    /// Builds the spec from a window radius R, which must be a multiple of h.
    static GridSpec from_radius(Spacing h, double radius) {
        const double m_real = radius * static_cast<double>(h.n);
        const long m = std::lround(m_real);
        if (m < 1 || std::abs(m_real - static_cast<double>(m)) > 1e-9)
            throw Error("window radius must be a positive multiple of h");
        return GridSpec{h, m};
    }

    long size() const { return 2 * halfwidth + 1; }
    double radius() const {
        return static_cast<double>(halfwidth) / static_cast<double>(h.n);
    }
    double point(long j) const {
        return static_cast<double>(j) / static_cast<double>(h.n);
    }

    bool operator==(const GridSpec&) const = default;
};

/// Real values on a GridSpec, extended by zero outside the window. All
/// operations below return fresh values; existing grid functions are never
/// mutated in place by the operator library.
class GridFunction {
public:
    explicit GridFunction(GridSpec spec, double fill = 0.0)
        : spec_(spec), values_(static_cast<std::size_t>(spec.size()), fill) {}

    GridFunction(GridSpec spec, std::vector<double> values)
        : spec_(spec), values_(std::move(values)) {
        if (values_.size() != static_cast<std::size_t>(spec_.size()))
            throw Error("grid function value count does not match the spec");
    }

    const GridSpec& spec() const { return spec_; }
    long halfwidth() const { return spec_.halfwidth; }

    /// Value at grid index j, with zero extension beyond the window. Shifted
    /// reads are therefore total for any offset.
    double at(long j) const {
        if (j < -spec_.halfwidth || j > spec_.halfwidth) return 0.0;
        return values_[static_cast<std::size_t>(j + spec_.halfwidth)];
    }

    double& operator[](long j) {
        assert(j >= -spec_.halfwidth && j <= spec_.halfwidth);
        return values_[static_cast<std::size_t>(j + spec_.halfwidth)];
    }
    double operator[](long j) const {
        assert(j >= -spec_.halfwidth && j <= spec_.halfwidth);
        return values_[static_cast<std::size_t>(j + spec_.halfwidth)];
    }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

private:
    GridSpec spec_;
    std::vector<double> values_;
};

/// One-sided difference (phi(x+lambda) - phi(x)) / lambda, lambda = +h or -h.
inline GridFunction delta_forward(const GridFunction& phi, double lambda) {
    if (lambda == 0.0)
        throw InvalidOffsetError("difference offset must be nonzero");
    const double h = phi.spec().h.value();
    long dir = 0;
    if (lambda == h) dir = 1;
    else if (lambda == -h) dir = -1;
    else throw InvalidOffsetError("difference offset must be +h or -h");

    GridFunction out(phi.spec());
    const long m = phi.halfwidth();
    for (long j = -m; j <= m; ++j)
        out[j] = (phi.at(j + dir) - phi.at(j)) / lambda;
    return out;
}

/// Symmetric difference (phi(x+h) - phi(x-h)) / (2h), computed literally as
/// the mean of the two one-sided differences so that the composition
/// identity holds bitwise.
inline GridFunction delta_sym(const GridFunction& phi) {
    const double h = phi.spec().h.value();
    GridFunction out(phi.spec());
    const long m = phi.halfwidth();
    for (long j = -m; j <= m; ++j) {
        out[j] = 0.5 * ((phi.at(j + 1) - phi.at(j)) / h +
                        (phi.at(j - 1) - phi.at(j)) / (-h));
    }
    return out;
}

/// Narrow three-point second difference evaluated at x + shift*h:
/// (phi(x+(s+1)h) - 2 phi(x+s h) + phi(x+(s-1)h)) / h^2.
inline GridFunction second_diff_narrow(const GridFunction& phi, long shift = 0) {
    const double h = phi.spec().h.value();
    const double inv_h2 = 1.0 / (h * h);
    GridFunction out(phi.spec());
    const long m = phi.halfwidth();
    for (long j = -m; j <= m; ++j) {
        out[j] = (phi.at(j + shift + 1) - 2.0 * phi.at(j + shift) +
                  phi.at(j + shift - 1)) * inv_h2;
    }
    return out;
}

/// Wide second difference, the composition of two symmetric differences:
/// (phi(x+2h) - 2 phi(x) + phi(x-2h)) / (4 h^2). Second-order accurate on
/// smooth functions with a 4x larger constant than the narrow stencil.
inline GridFunction second_diff_wide(const GridFunction& phi) {
    const double h = phi.spec().h.value();
    const double inv_4h2 = 1.0 / (4.0 * h * h);
    GridFunction out(phi.spec());
    const long m = phi.halfwidth();
    for (long j = -m; j <= m; ++j)
        out[j] = (phi.at(j + 2) - 2.0 * phi.at(j) + phi.at(j - 2)) * inv_4h2;
    return out;
}

/// Discrete l2 norm sqrt(h * sum phi^2).
inline double norm_l2(const GridFunction& phi) {
    double s = 0.0;
    for (double v : phi.values()) s += v * v;
    return std::sqrt(phi.spec().h.value() * s);
}

inline double norm_sup(const GridFunction& phi) {
    double s = 0.0;
    for (double v : phi.values()) s = std::max(s, std::abs(v));
    return s;
}

/// Discrete l2 inner product h * sum phi psi (specs must match).
inline double inner_l2(const GridFunction& phi, const GridFunction& psi) {
    if (!(phi.spec() == psi.spec()))
        throw SpacingMismatchError("inner product requires matching grids");
    double s = 0.0;
    for (std::size_t i = 0; i < phi.values().size(); ++i)
        s += phi.values()[i] * psi.values()[i];
    return phi.spec().h.value() * s;
}

/// Pointwise sample of an analytic function onto the grid.
template <class F>
GridFunction sample(F&& f, GridSpec spec) {
    GridFunction out(spec);
    for (long j = -spec.halfwidth; j <= spec.halfwidth; ++j) {
        const double x = spec.point(j);
        const double v = f(x);
        if (!std::isfinite(v))
            throw SamplingError("sampled function is not finite", x);
        out[j] = v;
    }
    return out;
}

inline double sup_difference(const GridFunction& a, const GridFunction& b) {
    if (!(a.spec() == b.spec()))
        throw SpacingMismatchError("sup difference requires matching grids");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i)
        s = std::max(s, std::abs(a.values()[i] - b.values()[i]));
    return s;
}

inline double l2_difference(const GridFunction& a, const GridFunction& b) {
    if (!(a.spec() == b.spec()))
        throw SpacingMismatchError("l2 difference requires matching grids");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) {
        const double d = a.values()[i] - b.values()[i];
        s += d * d;
    }
    return std::sqrt(a.spec().h.value() * s);
}

// Small vector helpers used throughout the time integrators.

inline GridFunction axpy(double alpha, const GridFunction& x,
                         const GridFunction& y) {
    GridFunction out = y;
    for (std::size_t i = 0; i < out.values().size(); ++i)
        out.values()[i] += alpha * x.values()[i];
    return out;
}

inline void axpy_inplace(double alpha, const GridFunction& x, GridFunction& y) {
    for (std::size_t i = 0; i < y.values().size(); ++i)
        y.values()[i] += alpha * x.values()[i];
}

} // namespace levyfd
