#pragma once

#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

#include "levyfd/coefficients.hpp"
#include "levyfd/errors.hpp"
#include "levyfd/grid.hpp"
#include "levyfd/levy_measure.hpp"

namespace levyfd {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Default tail budget for truncating the jump sum: a 1e-12 fraction of the
/// outer mass, with an absolute floor for measures that carry none.
inline double default_tail_budget(const LevyMeasure& measure) {
    return std::max(1e-12 * measure.global_moments().outer_mass, 1e-14);
}

/// Weight of the second-difference layer l inside the collapsed stencil of
/// cell k: the integral of (1 - theta) over [l/|k|, (l+1)/|k|). The weights
/// of one cell sum to exactly 1/2 (an integer identity, see
/// kernel_weight_closure_holds).
inline double kernel_weight(long k, long l) {
    const long ak = std::labs(k);
    return static_cast<double>(2 * ak - (2 * l + 1)) /
           static_cast<double>(2 * ak * ak);
}

/// Exact integer check of the closure identity sum_l (2|k| - (2l+1)) = k^2,
/// i.e. the kernel weights of cell k sum to 1/2.
inline bool kernel_weight_closure_holds(long k) {
    const long ak = std::labs(k);
    long long num = 0;
    for (long l = 0; l < ak; ++l) num += 2 * ak - (2 * l + 1);
    return num == static_cast<long long>(ak) * ak;
}

struct TailCell {
    long offset = 0;   // cell index k, |k| > 1/h
    double mass = 0.0; // nu(B_k)
};

/// Precomputed weights of the discrete jump operator for one spacing:
/// per-cell second moments inside the unit ball (driving the collapsed
/// second-order stencil) and per-cell masses of the tail translations.
///
/// Tail cells are stored explicitly only for offsets that can connect two
/// points of the window (|k| <= 2*halfwidth); the mass of kept cells beyond
/// that acts purely on the diagonal (all their translations leave the
/// window under zero extension) and is folded into far_mass. This keeps the
/// truncation index free to honor tight tail budgets for heavy-tailed
/// measures without inflating storage or cost.
struct JumpStencil {
    Spacing h;
    std::vector<double> moment_pos; // second moment of cell +k, index k-1, k = 1..n
    std::vector<double> moment_neg; // second moment of cell -k, index k-1
    std::vector<TailCell> tail;     // nonzero-mass cells, 1/h < |k| <= stored reach
    double far_mass = 0.0;          // kept mass beyond the stored reach
    double kept_tail_mass = 0.0;    // total mass of all kept tail cells
    long truncation_index = 0;      // K_max
    double residual_mass = 0.0;     // nu({|z| > K_max h}), dropped by the scheme

    static JumpStencil build(const LevyMeasure& measure, Spacing h,
                             long window_halfwidth, long truncation_index) {
        if (truncation_index < h.n)
            throw Error("truncation index must satisfy K*h >= 1");
        JumpStencil s;
        s.h = h;
        s.truncation_index = truncation_index;
        const long n = h.n;
        s.moment_pos.resize(static_cast<std::size_t>(n));
        s.moment_neg.resize(static_cast<std::size_t>(n));
        for (long k = 1; k <= n; ++k) {
            s.moment_pos[static_cast<std::size_t>(k - 1)] =
                measure.cell_second_moment(k, h);
            s.moment_neg[static_cast<std::size_t>(k - 1)] =
                measure.cell_second_moment(-k, h);
        }

        const long stored_reach = std::min(truncation_index, 2 * window_halfwidth);
        double stored_sum = 0.0;
        for (long k = n + 1; k <= stored_reach; ++k) {
            const double mp = measure.cell_mass(k, h);
            const double mn = measure.cell_mass(-k, h);
            if (mp > 0.0) {
                s.tail.push_back({k, mp});
                stored_sum += mp;
            }
            if (mn > 0.0) {
                s.tail.push_back({-k, mn});
                stored_sum += mn;
            }
        }

        const double hn = static_cast<double>(h.n);
        s.residual_mass =
            measure.tail_mass(static_cast<double>(truncation_index) / hn);
        if (truncation_index > stored_reach) {
            const double beyond_stored =
                measure.tail_mass(static_cast<double>(stored_reach) / hn);
            s.far_mass = std::max(0.0, beyond_stored - s.residual_mass);
        }
        s.kept_tail_mass = stored_sum + s.far_mass;
        return s;
    }
};

/// Second-order part of the jump operator via the collapsed 4-point form of
/// the layered stencil: for a cell on the positive side (k >= 1),
///
///   sum_l w_l D2 phi(x + l h)
///     = [phi(x+kh) + phi(x+(k-1)h) + (2k-1) phi(x-h) - (2k+1) phi(x)] / (2 k^2 h^2)
///
/// and the mirrored expression on the negative side. Each cell costs four
/// reads per point instead of the O(|k|) layered sum.
inline GridFunction apply_jump_small(const GridFunction& phi,
                                     const JumpStencil& stencil) {
    if (!(phi.spec().h == stencil.h))
        throw SpacingMismatchError("stencil and grid function spacings differ");
    const double h = stencil.h.value();
    const long n = stencil.h.n;
    const long m = phi.halfwidth();
    GridFunction out(phi.spec());
    for (long j = -m; j <= m; ++j) {
        double acc = 0.0;
        const double center = phi.at(j);
        const double left = phi.at(j - 1);
        const double right = phi.at(j + 1);
        for (long k = 1; k <= n; ++k) {
            const double scale = 1.0 / (2.0 * static_cast<double>(k) * k * h * h);
            const double zp = stencil.moment_pos[static_cast<std::size_t>(k - 1)];
            if (zp != 0.0) {
                acc += zp * scale *
                       (phi.at(j + k) + phi.at(j + k - 1) + (2.0 * k - 1.0) * left -
                        (2.0 * k + 1.0) * center);
            }
            const double zn = stencil.moment_neg[static_cast<std::size_t>(k - 1)];
            if (zn != 0.0) {
                acc += zn * scale *
                       (phi.at(j - k) + phi.at(j - k + 1) + (2.0 * k - 1.0) * right -
                        (2.0 * k + 1.0) * center);
            }
        }
        out[j] = acc;
    }
    return out;
}

/// Literal layered form of the same operator (the double sum over cells and
/// layers of narrow second differences). O(n^2) per point; retained as an
/// independent oracle for the collapsed form, not used in production paths.
inline GridFunction apply_jump_small_direct(const GridFunction& phi,
                                            const LevyMeasure& measure) {
    const Spacing h = phi.spec().h;
    const double h2 = h.value() * h.value();
    const long n = h.n;
    const long m = phi.halfwidth();
    GridFunction out(phi.spec());
    for (long sign : {+1L, -1L}) {
        for (long ak = 1; ak <= n; ++ak) {
            const long k = sign * ak;
            const double zeta = measure.cell_second_moment(k, h);
            if (zeta == 0.0) continue;
            for (long l = 0; l < ak; ++l) {
                const double w = zeta * kernel_weight(k, l);
                const long s = sign * l;
                for (long j = -m; j <= m; ++j) {
                    out[j] += w *
                              (phi.at(j + s + 1) - 2.0 * phi.at(j + s) +
                               phi.at(j + s - 1)) /
                              h2;
                }
            }
        }
    }
    return out;
}

/// Tail part of the jump operator: translations weighted by cell masses,
/// with the total kept mass on the diagonal. Reads beyond the window are
/// zero by extension, which is exactly how cells beyond the stored reach
/// reduce to the far-mass diagonal term.
inline GridFunction apply_jump_big(const GridFunction& phi,
                                   const JumpStencil& stencil) {
    if (!(phi.spec().h == stencil.h))
        throw SpacingMismatchError("stencil and grid function spacings differ");
    const long m = phi.halfwidth();
    GridFunction out(phi.spec());
    for (long j = -m; j <= m; ++j) {
        double acc = -stencil.kept_tail_mass * phi.at(j);
        for (const TailCell& cell : stencil.tail)
            acc += cell.mass * phi.at(j + cell.offset);
        out[j] = acc;
    }
    return out;
}

/// Full discrete jump operator.
inline GridFunction apply_jump(const GridFunction& phi,
                               const JumpStencil& stencil) {
    GridFunction out = apply_jump_small(phi, stencil);
    axpy_inplace(1.0, apply_jump_big(phi, stencil), out);
    return out;
}

/// Local operator a * wide second difference + b * symmetric difference + c.
inline GridFunction apply_local(const CoefficientSet& coeffs, double t,
                                const GridFunction& phi) {
    const CoefficientSample cs = sample_coefficients(coeffs, t, phi.spec());
    const double h = phi.spec().h.value();
    const double inv_4h2 = 1.0 / (4.0 * h * h);
    const double inv_2h = 1.0 / (2.0 * h);
    const long m = phi.halfwidth();
    GridFunction out(phi.spec());
    for (long j = -m; j <= m; ++j) {
        const std::size_t i = static_cast<std::size_t>(j + m);
        const double wide = (phi.at(j + 2) - 2.0 * phi.at(j) + phi.at(j - 2)) * inv_4h2;
        const double sym = (phi.at(j + 1) - phi.at(j - 1)) * inv_2h;
        out[j] = cs.a[i] * wide + cs.b[i] * sym + cs.c[i] * phi.at(j);
    }
    return out;
}

namespace detail {

inline void add_jump_triplets(std::vector<Eigen::Triplet<double>>& trips,
                              const JumpStencil& stencil, const GridSpec& spec) {
    const long m = spec.halfwidth;
    const long n = spec.h.n;
    const double h = spec.h.value();
    auto add = [&](long row, long col, double v) {
        if (col >= -m && col <= m && v != 0.0)
            trips.emplace_back(static_cast<int>(row + m), static_cast<int>(col + m), v);
    };
    for (long j = -m; j <= m; ++j) {
        for (long k = 1; k <= n; ++k) {
            const double scale = 1.0 / (2.0 * static_cast<double>(k) * k * h * h);
            const double zp = stencil.moment_pos[static_cast<std::size_t>(k - 1)];
            if (zp != 0.0) {
                const double w = zp * scale;
                add(j, j + k, w);
                add(j, j + k - 1, w);
                add(j, j - 1, w * (2.0 * k - 1.0));
                add(j, j, -w * (2.0 * k + 1.0));
            }
            const double zn = stencil.moment_neg[static_cast<std::size_t>(k - 1)];
            if (zn != 0.0) {
                const double w = zn * scale;
                add(j, j - k, w);
                add(j, j - k + 1, w);
                add(j, j + 1, w * (2.0 * k - 1.0));
                add(j, j, -w * (2.0 * k + 1.0));
            }
        }
        for (const TailCell& cell : stencil.tail)
            add(j, j + cell.offset, cell.mass);
        add(j, j, -stencil.kept_tail_mass);
    }
}

inline void add_local_triplets(std::vector<Eigen::Triplet<double>>& trips,
                               const CoefficientSample& cs, const GridSpec& spec) {
    const long m = spec.halfwidth;
    const double h = spec.h.value();
    const double inv_4h2 = 1.0 / (4.0 * h * h);
    const double inv_2h = 1.0 / (2.0 * h);
    auto add = [&](long row, long col, double v) {
        if (col >= -m && col <= m && v != 0.0)
            trips.emplace_back(static_cast<int>(row + m), static_cast<int>(col + m), v);
    };
    for (long j = -m; j <= m; ++j) {
        const std::size_t i = static_cast<std::size_t>(j + m);
        if (cs.a[i] != 0.0) {
            add(j, j + 2, cs.a[i] * inv_4h2);
            add(j, j - 2, cs.a[i] * inv_4h2);
            add(j, j, -2.0 * cs.a[i] * inv_4h2);
        }
        if (cs.b[i] != 0.0) {
            add(j, j + 1, cs.b[i] * inv_2h);
            add(j, j - 1, -cs.b[i] * inv_2h);
        }
        if (cs.c[i] != 0.0) add(j, j, cs.c[i]);
    }
}

} // namespace detail

/// Sparse matrix of the jump operator alone (time-independent).
inline SparseMatrix jump_matrix(const JumpStencil& stencil, const GridSpec& spec) {
    if (!(spec.h == stencil.h))
        throw SpacingMismatchError("stencil and grid spacings differ");
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(spec.size()) *
                  (4 * static_cast<std::size_t>(spec.h.n) + stencil.tail.size() + 1));
    detail::add_jump_triplets(trips, stencil, spec);
    SparseMatrix mat(static_cast<int>(spec.size()), static_cast<int>(spec.size()));
    mat.setFromTriplets(trips.begin(), trips.end());
    return mat;
}

/// The full spatial operator at a fixed time, in sparse row form. Rows near
/// the window boundary drop the out-of-window columns, implementing zero
/// extension.
class DiscreteOperator {
public:
    DiscreteOperator(double t, GridSpec spec, SparseMatrix mat)
        : t_(t), spec_(spec), mat_(std::move(mat)) {}

    double time() const { return t_; }
    const GridSpec& spec() const { return spec_; }
    const SparseMatrix& matrix() const { return mat_; }

    GridFunction apply(const GridFunction& phi) const {
        if (!(phi.spec() == spec_))
            throw SpacingMismatchError("operator and grid function specs differ");
        GridFunction out(spec_);
        Eigen::Map<const Eigen::VectorXd> in(phi.values().data(),
                                             static_cast<long>(phi.values().size()));
        Eigen::Map<Eigen::VectorXd> res(out.values().data(),
                                        static_cast<long>(out.values().size()));
        res.noalias() = mat_ * in;
        return out;
    }

    /// Max absolute row sum; an upper bound for the spectral radius used to
    /// pick stable explicit step sizes.
    double row_sum_bound() const {
        double bound = 0.0;
        for (int r = 0; r < mat_.outerSize(); ++r) {
            double s = 0.0;
            for (SparseMatrix::InnerIterator it(mat_, r); it; ++it)
                s += std::abs(it.value());
            bound = std::max(bound, s);
        }
        return bound;
    }

private:
    double t_;
    GridSpec spec_;
    SparseMatrix mat_;
};

/// Assembles the matrix of (local + jump) at time t from a prebuilt stencil.
inline DiscreteOperator assemble(const CoefficientSet& coeffs,
                                 const JumpStencil& stencil, const GridSpec& spec,
                                 double t) {
    if (!(spec.h == stencil.h))
        throw SpacingMismatchError("stencil and grid spacings differ");
    const CoefficientSample cs = sample_coefficients(coeffs, t, spec);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(spec.size()) *
                  (4 * static_cast<std::size_t>(spec.h.n) + stencil.tail.size() + 6));
    detail::add_jump_triplets(trips, stencil, spec);
    detail::add_local_triplets(trips, cs, spec);
    SparseMatrix mat(static_cast<int>(spec.size()), static_cast<int>(spec.size()));
    mat.setFromTriplets(trips.begin(), trips.end());
    return DiscreteOperator(t, spec, std::move(mat));
}

/// Convenience overload building the stencil from the measure directly.
inline DiscreteOperator assemble(const CoefficientSet& coeffs,
                                 const LevyMeasure& measure, const GridSpec& spec,
                                 double t, long truncation_index) {
    const JumpStencil stencil =
        JumpStencil::build(measure, spec.h, spec.halfwidth, truncation_index);
    return assemble(coeffs, stencil, spec, t);
}

/// Matrix-market style triplet dump (1-based indices).
inline void dump_matrix(const DiscreteOperator& op, std::ostream& os) {
    const SparseMatrix& mat = op.matrix();
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << "% levyfd operator at t=" << op.time() << " h=" << op.spec().h.value()
       << " R=" << op.spec().radius() << "\n";
    os << mat.rows() << " " << mat.cols() << " " << mat.nonZeros() << "\n";
    for (int r = 0; r < mat.outerSize(); ++r)
        for (SparseMatrix::InnerIterator it(mat, r); it; ++it)
            os << (it.row() + 1) << " " << (it.col() + 1) << " " << it.value()
               << "\n";
}

} // namespace levyfd
