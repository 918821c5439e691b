#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "levyfd/errors.hpp"
#include "levyfd/quadrature.hpp"

namespace levyfd {

/// Grid spacing restricted to unit fractions h = 1/n. The schemes in this
/// library are only defined for such spacings, so the restriction is
/// enforced structurally rather than checked downstream.
struct Spacing {
    long n = 1;

    double value() const { return 1.0 / static_cast<double>(n); }

    static Spacing unit_fraction(long n) {
        if (n < 1) throw Error("spacing must be 1/n with n >= 1");
        return Spacing{n};
    }

    bool operator==(const Spacing&) const = default;
};

/// One grid cell B_k: ((k-1)h, kh] for k >= 1, [kh, (k+1)h) for k <= -1.
/// Index 0 is not a cell; the cells for fixed h tile the punctured line.
struct Cell {
    long index;
    Spacing h;

    Cell(long k, Spacing spacing) : index(k), h(spacing) {
        if (k == 0) throw InvalidCellError("cell index 0 is not defined");
    }

    double lower() const {
        return (index >= 1 ? index - 1 : index) * h.value();
    }
    double upper() const {
        return (index >= 1 ? index : index + 1) * h.value();
    }
    bool closed_left() const { return index <= -1; }
    bool closed_right() const { return index >= 1; }

    bool contains(double z) const {
        if (index >= 1) return z > lower() && z <= upper();
        return z >= lower() && z < upper();
    }
};

/// Cell index of a point z != 0, consistent with the half-open cell bounds:
/// right-closed cells on the positive axis, left-closed on the negative one.
inline long cell_index_of(double z, Spacing h) {
    if (z == 0.0) throw InvalidCellError("z = 0 belongs to no cell");
    const double q = z * static_cast<double>(h.n);
    return z > 0.0 ? static_cast<long>(std::ceil(q))
                   : static_cast<long>(std::floor(q));
}

/// Total mass outside the unit ball and second moment inside it. These two
/// numbers are the only global quantities the scheme's estimates depend on.
struct Moments {
    double outer_mass = 0.0;          // nu({|z| > 1})
    double inner_second_moment = 0.0; // integral of z^2 over [-1,1]
};

struct Atom {
    double location = 0.0;
    double mass = 0.0;
};

inline constexpr long kDefaultTruncationCap = 1'000'000'000'000L;

/// A one-dimensional Levy measure from one of four concrete families:
///
///   power law          c |z|^(-2-alpha) dz,  alpha in (0,1)   (infinite activity)
///   tempered power law c |z|^(-2-alpha) exp(-lambda |z|) dz   (infinite activity)
///   compound Poisson   uniform density on [lo, hi]            (finite activity)
///   finite atomic      sum of point masses m_j at z_j != 0    (finite activity)
///
/// All instances satisfy nu({0}) = 0 and the integrability condition
/// (finite second moment near 0, finite mass outside the unit ball) by
/// construction. Values are immutable; every operation is a pure function.
class LevyMeasure {
public:
    enum class Family { PowerLaw, TemperedPowerLaw, CompoundPoisson, Atomic };

    static LevyMeasure power_law(double intensity, double alpha) {
        validate_power(intensity, alpha);
        LevyMeasure m;
        m.family_ = Family::PowerLaw;
        m.intensity_ = intensity;
        m.alpha_ = alpha;
        return m;
    }

    static LevyMeasure tempered_power_law(double intensity, double alpha,
                                          double tempering) {
        validate_power(intensity, alpha);
        if (!(tempering >= 0.0))
            throw Error("tempering rate must be >= 0");
        LevyMeasure m;
        m.family_ = Family::TemperedPowerLaw;
        m.intensity_ = intensity;
        m.alpha_ = alpha;
        m.tempering_ = tempering;
        return m;
    }

    /// Compound-Poisson measure with a uniform (hence bounded) density of
    /// total mass `total_mass` on [lo, hi].
    static LevyMeasure compound_poisson_uniform(double total_mass, double lo,
                                                double hi) {
        if (!(total_mass >= 0.0) || !std::isfinite(total_mass))
            throw Error("compound-Poisson total mass must be finite and >= 0");
        if (!(lo < hi)) throw Error("compound-Poisson support must satisfy lo < hi");
        LevyMeasure m;
        m.family_ = Family::CompoundPoisson;
        m.cp_mass_ = total_mass;
        m.cp_lo_ = lo;
        m.cp_hi_ = hi;
        return m;
    }

    static LevyMeasure atomic(std::vector<Atom> atoms) {
        for (const Atom& a : atoms) {
            if (a.location == 0.0)
                throw Error("atoms at z = 0 are not allowed");
            if (!(a.mass > 0.0) || !std::isfinite(a.mass) ||
                !std::isfinite(a.location))
                throw Error("atom masses must be finite and positive");
        }
        LevyMeasure m;
        m.family_ = Family::Atomic;
        m.atoms_ = std::move(atoms);
        return m;
    }

    /// The zero measure (an empty atomic list); drives pure-PDE problems.
    static LevyMeasure zero() { return atomic({}); }

    Family family() const { return family_; }

    bool infinite_activity() const {
        return family_ == Family::PowerLaw || family_ == Family::TemperedPowerLaw;
    }

    /// Radius of the measure's support; +inf for the unbounded families.
    double support_radius() const {
        switch (family_) {
            case Family::CompoundPoisson:
                return std::max(std::abs(cp_lo_), std::abs(cp_hi_));
            case Family::Atomic: {
                double r = 0.0;
                for (const Atom& a : atoms_) r = std::max(r, std::abs(a.location));
                return r;
            }
            default:
                return std::numeric_limits<double>::infinity();
        }
    }

    /// nu(B_k). May be +inf only for the two cells touching the origin
    /// under infinite-activity families.
    double cell_mass(long k, Spacing h) const {
        Cell cell(k, h);
        if (family_ == Family::Atomic) {
            double sum = 0.0;
            for (const Atom& a : atoms_)
                if (cell_index_of(a.location, h) == k) sum += a.mass;
            return sum;
        }
        return density_interval_mass(cell.lower(), cell.upper());
    }

    /// Second moment over B_k: the integral of z^2 against nu. Finite for
    /// every admissible family and cell, including the cells at the origin.
    double cell_second_moment(long k, Spacing h) const {
        Cell cell(k, h);
        if (family_ == Family::Atomic) {
            double sum = 0.0;
            for (const Atom& a : atoms_)
                if (cell_index_of(a.location, h) == k)
                    sum += a.mass * a.location * a.location;
            return sum;
        }
        return density_interval_second_moment(cell.lower(), cell.upper());
    }

    Moments global_moments() const {
        Moments mom;
        switch (family_) {
            case Family::PowerLaw:
                mom.outer_mass = 2.0 * intensity_ / (1.0 + alpha_);
                mom.inner_second_moment = 2.0 * intensity_ / (1.0 - alpha_);
                break;
            case Family::TemperedPowerLaw:
                mom.outer_mass = tail_mass(1.0);
                mom.inner_second_moment = density_interval_second_moment(-1.0, 1.0);
                break;
            case Family::CompoundPoisson:
                mom.outer_mass = tail_mass(1.0);
                mom.inner_second_moment = density_interval_second_moment(
                    std::max(cp_lo_, -1.0), std::min(cp_hi_, 1.0));
                break;
            case Family::Atomic:
                for (const Atom& a : atoms_) {
                    if (std::abs(a.location) > 1.0)
                        mom.outer_mass += a.mass;
                    else
                        mom.inner_second_moment += a.mass * a.location * a.location;
                }
                break;
        }
        return mom;
    }

    /// nu({|z| > x}) with strict inequality, x > 0. Together with the cell
    /// tiling this gives exact interval masses: the mass of all cells with
    /// n < |k| <= K equals tail_mass(n h) - tail_mass(K h).
    double tail_mass(double x) const {
        if (!(x > 0.0)) throw Error("tail_mass requires x > 0");
        switch (family_) {
            case Family::PowerLaw:
                return 2.0 * intensity_ * std::pow(x, -1.0 - alpha_) / (1.0 + alpha_);
            case Family::TemperedPowerLaw: {
                // z = x/u maps the tail onto (0,1]; the transformed
                // integrand u^alpha exp(-lambda x / u) is bounded.
                const double a = alpha_, lam = tempering_, c = intensity_;
                auto g = [=](double u) {
                    return std::pow(u, a) * std::exp(-lam * x / u);
                };
                const double one_sided =
                    c * std::pow(x, -1.0 - a) *
                    integrate_adaptive(g, 0.0, 1.0, 1e-12, 1e-16).value;
                return 2.0 * one_sided;
            }
            case Family::CompoundPoisson: {
                const double d = cp_density();
                const double pos = std::max(0.0, cp_hi_ - std::max(cp_lo_, x));
                const double neg = std::max(0.0, std::min(cp_hi_, -x) - cp_lo_);
                return d * (pos + neg);
            }
            case Family::Atomic: {
                double sum = 0.0;
                for (const Atom& a : atoms_)
                    if (std::abs(a.location) > x) sum += a.mass;
                return sum;
            }
        }
        return 0.0;
    }

    /// Smallest K with K*h >= 1 and nu({|z| > K h}) <= eps_tail. Searches by
    /// doubling plus bisection; throws TailTruncationError carrying the
    /// residual mass when the hard cap is reached first.
    long tail_truncation_index(Spacing h, double eps_tail,
                               long hard_cap = kDefaultTruncationCap) const {
        if (!(eps_tail > 0.0)) throw Error("eps_tail must be positive");
        if (hard_cap < h.n) throw Error("truncation cap below 1/h");
        const auto tail_at = [&](long k) {
            return tail_mass(static_cast<double>(k) / static_cast<double>(h.n));
        };
        long lo = h.n; // K h >= 1 is part of the contract
        if (tail_at(lo) <= eps_tail) return lo;
        long hi = lo;
        while (tail_at(hi) > eps_tail) {
            if (hi >= hard_cap) {
                throw TailTruncationError(
                    "tail truncation cap reached before the mass budget",
                    tail_at(hard_cap));
            }
            lo = hi;
            hi = std::min(hi * 2, hard_cap);
        }
        // Invariant: tail_at(lo) > eps_tail >= tail_at(hi).
        while (hi - lo > 1) {
            const long mid = lo + (hi - lo) / 2;
            (tail_at(mid) > eps_tail ? lo : hi) = mid;
        }
        return hi;
    }

    std::string describe() const {
        std::ostringstream os;
        switch (family_) {
            case Family::PowerLaw:
                os << "power_law(intensity=" << intensity_ << ", alpha=" << alpha_ << ")";
                break;
            case Family::TemperedPowerLaw:
                os << "tempered_power_law(intensity=" << intensity_
                   << ", alpha=" << alpha_ << ", lambda=" << tempering_ << ")";
                break;
            case Family::CompoundPoisson:
                os << "compound_poisson(mass=" << cp_mass_ << ", support=[" << cp_lo_
                   << ", " << cp_hi_ << "])";
                break;
            case Family::Atomic:
                os << "atomic(";
                for (std::size_t i = 0; i < atoms_.size(); ++i) {
                    if (i) os << ", ";
                    os << "(" << atoms_[i].location << ", " << atoms_[i].mass << ")";
                }
                os << ")";
                break;
        }
        return os.str();
    }

    // Family parameters, exposed for reporting and config echo.
    double intensity() const { return intensity_; }
    double alpha() const { return alpha_; }
    double tempering() const { return tempering_; }
    double cp_total_mass() const { return cp_mass_; }
    double cp_support_lo() const { return cp_lo_; }
    double cp_support_hi() const { return cp_hi_; }
    const std::vector<Atom>& atoms() const { return atoms_; }

private:
    LevyMeasure() = default;

    static void validate_power(double intensity, double alpha) {
        if (!(intensity > 0.0) || !std::isfinite(intensity))
            throw Error("power-law intensity must be finite and positive");
        if (!(alpha > 0.0 && alpha < 1.0))
            throw Error("power-law exponent alpha must lie in (0,1)");
    }

    double cp_density() const { return cp_mass_ / (cp_hi_ - cp_lo_); }

    /// Integral of the family density over [a, b] (a <= b, 0 not interior;
    /// cells never straddle the origin). Returns +inf when the interval
    /// touches 0 under an infinite-activity family.
    double density_interval_mass(double a, double b) const {
        switch (family_) {
            case Family::PowerLaw: {
                const double lo = std::min(std::abs(a), std::abs(b));
                const double hi = std::max(std::abs(a), std::abs(b));
                if (lo == 0.0) return std::numeric_limits<double>::infinity();
                const double p = 1.0 + alpha_;
                return intensity_ * (std::pow(lo, -p) - std::pow(hi, -p)) / p;
            }
            case Family::TemperedPowerLaw: {
                const double lo = std::min(std::abs(a), std::abs(b));
                const double hi = std::max(std::abs(a), std::abs(b));
                if (lo == 0.0) return std::numeric_limits<double>::infinity();
                const double aa = alpha_, lam = tempering_, c = intensity_;
                auto f = [=](double z) {
                    return c * std::pow(z, -2.0 - aa) * std::exp(-lam * z);
                };
                return integrate_adaptive(f, lo, hi, 1e-10, 1e-14).value;
            }
            case Family::CompoundPoisson: {
                const double lo = std::max(a, cp_lo_);
                const double hi = std::min(b, cp_hi_);
                return hi > lo ? cp_density() * (hi - lo) : 0.0;
            }
            case Family::Atomic:
                return 0.0; // handled by the atom loop in cell_mass
        }
        return 0.0;
    }

    /// Integral of z^2 times the family density over [a, b]. Always finite.
    double density_interval_second_moment(double a, double b) const {
        switch (family_) {
            case Family::PowerLaw: {
                double total = 0.0;
                // Split at 0 in case of the symmetric global query [-1,1].
                for (auto [lo, hi] : split_about_origin(a, b)) {
                    const double p = 1.0 - alpha_;
                    total += intensity_ * (std::pow(hi, p) - std::pow(lo, p)) / p;
                }
                return total;
            }
            case Family::TemperedPowerLaw: {
                const double aa = alpha_, lam = tempering_, c = intensity_;
                auto f = [=](double z) {
                    return c * std::pow(z, -aa) * std::exp(-lam * z);
                };
                double total = 0.0;
                for (auto [lo, hi] : split_about_origin(a, b))
                    total += integrate_adaptive(f, lo, hi, 1e-10, 1e-14).value;
                return total;
            }
            case Family::CompoundPoisson: {
                const double lo = std::max(a, cp_lo_);
                const double hi = std::min(b, cp_hi_);
                if (hi <= lo) return 0.0;
                return cp_density() * (hi * hi * hi - lo * lo * lo) / 3.0;
            }
            case Family::Atomic:
                return 0.0;
        }
        return 0.0;
    }

    /// Decomposes [a,b] into subintervals of |z| away from the origin,
    /// returned as (lo, hi) pairs with 0 <= lo < hi.
    static std::vector<std::pair<double, double>> split_about_origin(double a,
                                                                     double b) {
        std::vector<std::pair<double, double>> parts;
        if (a < 0.0) parts.emplace_back(std::max(0.0, -b), -a);
        if (b > 0.0) parts.emplace_back(std::max(0.0, a), b);
        std::erase_if(parts, [](auto& p) { return !(p.second > p.first); });
        return parts;
    }

    Family family_ = Family::Atomic;
    double intensity_ = 0.0;
    double alpha_ = 0.5;
    double tempering_ = 0.0;
    double cp_mass_ = 0.0;
    double cp_lo_ = -1.0;
    double cp_hi_ = 1.0;
    std::vector<Atom> atoms_;
};

} // namespace levyfd
