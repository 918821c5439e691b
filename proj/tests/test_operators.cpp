#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "levyfd/operators.hpp"
#include "levyfd/rate_fit.hpp"
#include "levyfd/reference.hpp"

using namespace levyfd;

namespace {

GridFunction random_compact(GridSpec spec, long margin, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    GridFunction phi(spec);
    for (long j = -spec.halfwidth + margin; j <= spec.halfwidth - margin; ++j)
        phi[j] = uni(rng);
    return phi;
}

JumpStencil build_stencil(const LevyMeasure& nu, GridSpec spec) {
    const long kmax =
        nu.tail_truncation_index(spec.h, default_tail_budget(nu));
    return JumpStencil::build(nu, spec.h, spec.halfwidth, kmax);
}

CoefficientSet const_coeffs(double a, double b, double c) {
    CoefficientSet cs;
    cs.a = [a](double, double) { return a; };
    cs.b = [b](double, double) { return b; };
    cs.c = [c](double, double) { return c; };
    cs.bound = std::max({std::abs(a), std::abs(b), std::abs(c), 1.0});
    cs.time_constant = true;
    return cs;
}

std::vector<LevyMeasure> property_measures() {
    return {
        LevyMeasure::power_law(1.0, 0.5),
        LevyMeasure::tempered_power_law(1.0, 0.5, 1.0),
        LevyMeasure::atomic({{0.5, 1.0}, {-0.25, 2.0}, {1.5, 0.5}, {-2.0, 0.3}}),
    };
}

} // namespace

TEST_CASE("kernel weights close to one half in exact arithmetic",
          "[operators]") {
    for (long k = 1; k <= 64; ++k) {
        CHECK(kernel_weight_closure_holds(k));
        CHECK(kernel_weight_closure_holds(-k));
    }
    // Spot values: k=2 has weights 3/8 and 1/8.
    CHECK(kernel_weight(2, 0) == Catch::Approx(0.375));
    CHECK(kernel_weight(2, 1) == Catch::Approx(0.125));
}

TEST_CASE("collapsed stencil on a single cell reproduces the hand value",
          "[operators]") {
    // One active cell k=2 with unit second moment, h=1/2. On phi(x)=x^2 the
    // layered operator equals zeta * sum(weights) * phi'' = 1/2 * 2 = 1.
    const auto spec = GridSpec::make(Spacing::unit_fraction(2), 8);
    JumpStencil stencil;
    stencil.h = spec.h;
    stencil.moment_pos = {0.0, 1.0};
    stencil.moment_neg = {0.0, 0.0};
    stencil.truncation_index = 2;

    const auto phi = sample([](double x) { return x * x; }, spec);
    const auto out = apply_jump_small(phi, stencil);
    CHECK(out.at(0) == Catch::Approx(1.0).epsilon(1e-12));

    // The same value from the literal double sum, with a measure whose only
    // second moment sits in cell 2: a unit atom at z=1.
    const auto nu = LevyMeasure::atomic({{1.0, 1.0}});
    const auto direct = apply_jump_small_direct(phi, nu);
    CHECK(direct.at(0) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("small-jump operator annihilates affine functions", "[operators]") {
    const auto spec = GridSpec::make(Spacing::unit_fraction(4), 24);
    const auto nu = LevyMeasure::power_law(1.0, 0.5);
    const auto stencil = build_stencil(nu, spec);

    const auto lin = sample([](double x) { return 2.0 * x - 1.0; }, spec);
    const auto out = apply_jump_small(lin, stencil);
    // Stencil reach is 1 + h; points further than that from the boundary see
    // only the affine part.
    for (long j = -18; j <= 18; ++j)
        CHECK(out.at(j) == Catch::Approx(0.0).margin(1e-11));

    GridFunction constant(spec, 3.0);
    const auto out_c = apply_jump_small(constant, stencil);
    for (long j = -18; j <= 18; ++j)
        CHECK(out_c.at(j) == Catch::Approx(0.0).margin(1e-11));
}

TEST_CASE("collapsed and direct small-jump forms agree", "[operators][property]") {
    std::mt19937_64 rng(21);
    for (const auto& nu : property_measures()) {
        for (long n : {4L, 8L, 16L, 32L}) {
            const auto spec = GridSpec::make(Spacing::unit_fraction(n), 2 * n);
            const auto stencil = build_stencil(nu, spec);
            for (int trial = 0; trial < 5; ++trial) {
                const auto phi = random_compact(spec, 2, rng);
                const auto collapsed = apply_jump_small(phi, stencil);
                const auto direct = apply_jump_small_direct(phi, nu);
                CHECK(sup_difference(collapsed, direct) < 1e-12);
            }
        }
    }
}

TEST_CASE("tail operator examples", "[operators]") {
    SECTION("single atomic tail cell") {
        const auto nu = LevyMeasure::atomic({{2.0, 0.7}});
        const auto spec = GridSpec::make(Spacing::unit_fraction(1), 6);
        const auto stencil = build_stencil(nu, spec);
        REQUIRE(stencil.tail.size() == 1);
        CHECK(stencil.tail[0].offset == 2);
        CHECK(stencil.tail[0].mass == Catch::Approx(0.7));

        std::mt19937_64 rng(5);
        const auto phi = random_compact(spec, 0, rng);
        const auto out = apply_jump_big(phi, stencil);
        for (long j = -6; j <= 6; ++j)
            CHECK(out.at(j) ==
                  Catch::Approx(0.7 * (phi.at(j + 2) - phi.at(j))).margin(1e-15));
    }
    SECTION("constants vanish where the stencil stays inside the window") {
        const auto nu = LevyMeasure::compound_poisson_uniform(2.0, -2.0, 2.0);
        const auto spec = GridSpec::make(Spacing::unit_fraction(2), 10);
        const auto stencil = build_stencil(nu, spec);
        GridFunction one(spec, 1.0);
        const auto out = apply_jump_big(one, stencil);
        // reach = K_max h = 2, so |x| <= 3 is untouched by the boundary
        for (long j = -6; j <= 6; ++j)
            CHECK(out.at(j) == Catch::Approx(0.0).margin(1e-14));
        CHECK(out.at(10) < 0.0); // boundary rows lose mass to zero extension
    }
    SECTION("symmetric tail weights cancel on linear functions") {
        const auto nu = LevyMeasure::atomic({{1.5, 0.3}, {-1.5, 0.3}});
        const auto spec = GridSpec::make(Spacing::unit_fraction(2), 12);
        const auto stencil = build_stencil(nu, spec);
        const auto lin = sample([](double x) { return x; }, spec);
        const auto out = apply_jump_big(lin, stencil);
        for (long j = -9; j <= 9; ++j) // |x| + 1.5 <= R
            CHECK(out.at(j) == Catch::Approx(0.0).margin(1e-14));
    }
}

TEST_CASE("heavy tails fold into the far-mass diagonal", "[operators]") {
    const auto nu = LevyMeasure::power_law(1.0, 0.5);
    const auto spec = GridSpec::make(Spacing::unit_fraction(8), 16);
    const long kmax = nu.tail_truncation_index(spec.h, default_tail_budget(nu));
    const auto stencil = JumpStencil::build(nu, spec.h, spec.halfwidth, kmax);

    CHECK(kmax > 2 * spec.halfwidth); // the budget forces a huge reach
    CHECK(stencil.far_mass > 0.0);
    // Kept mass equals the exact interval mass of all kept cells.
    const double kept_exact =
        nu.tail_mass(1.0) - nu.tail_mass(static_cast<double>(kmax) / 8.0);
    CHECK(stencil.kept_tail_mass == Catch::Approx(kept_exact).epsilon(1e-9));
    CHECK(stencil.residual_mass <= default_tail_budget(nu));

    // No stored offset can connect two window points beyond 2*halfwidth.
    for (const TailCell& cell : stencil.tail)
        CHECK(std::labs(cell.offset) <= 2 * spec.halfwidth);
}

TEST_CASE("local operator examples", "[operators]") {
    const auto spec = GridSpec::make(Spacing::unit_fraction(4), 16);

    const auto quad = sample([](double x) { return x * x; }, spec);
    const auto heat = apply_local(const_coeffs(1.0, 0.0, 0.0), 0.0, quad);
    for (long j = -14; j <= 14; ++j)
        CHECK(heat.at(j) == Catch::Approx(2.0).epsilon(1e-12));

    const auto lin = sample([](double x) { return x; }, spec);
    const auto drift = apply_local(const_coeffs(0.0, 1.0, 0.0), 0.0, lin);
    for (long j = -15; j <= 15; ++j)
        CHECK(drift.at(j) == Catch::Approx(1.0).epsilon(1e-12));

    const auto decay = apply_local(const_coeffs(0.0, 0.0, -1.0), 0.0, quad);
    for (long j = -16; j <= 16; ++j)
        CHECK(decay.at(j) == Catch::Approx(-quad.at(j)).margin(1e-15));
}

TEST_CASE("coefficient evaluation is checked", "[operators]") {
    const auto spec = GridSpec::make(Spacing::unit_fraction(2), 4);
    const auto phi = sample([](double x) { return x; }, spec);

    CoefficientSet negative = const_coeffs(0.0, 0.0, 0.0);
    negative.a = [](double, double x) { return -0.5 + 0.0 * x; };
    CHECK_THROWS_AS(apply_local(negative, 0.0, phi), CoefficientError);

    CoefficientSet nan_coeff = const_coeffs(0.0, 0.0, 0.0);
    nan_coeff.b = [](double, double) {
        return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS(apply_local(nan_coeff, 0.0, phi), CoefficientError);

    CoefficientSet unbounded = const_coeffs(0.0, 0.0, 0.0);
    unbounded.bound = 1.0;
    unbounded.c = [](double, double) { return 2.0; };
    CHECK_THROWS_AS(apply_local(unbounded, 0.0, phi), CoefficientError);
}

TEST_CASE("spacing mismatch is rejected", "[operators]") {
    const auto nu = LevyMeasure::atomic({{0.5, 1.0}});
    const auto spec8 = GridSpec::make(Spacing::unit_fraction(8), 16);
    const auto spec4 = GridSpec::make(Spacing::unit_fraction(4), 8);
    const auto stencil = build_stencil(nu, spec8);
    GridFunction phi(spec4, 1.0);
    CHECK_THROWS_AS(apply_jump_small(phi, stencil), SpacingMismatchError);
    CHECK_THROWS_AS(apply_jump_big(phi, stencil), SpacingMismatchError);
}

TEST_CASE("negative semi-definiteness of the jump operator",
          "[operators][property]") {
    std::mt19937_64 rng(31);
    for (const auto& nu : property_measures()) {
        for (long n : {8L, 16L}) {
            const auto spec = GridSpec::make(Spacing::unit_fraction(n), 2 * n);
            const auto stencil = build_stencil(nu, spec);
            for (int trial = 0; trial < 30; ++trial) {
                // Both boundary-touching and interior-supported samples.
                const long margin = (trial % 2 == 0) ? 0 : spec.halfwidth / 2;
                const auto phi = random_compact(spec, margin, rng);
                const double form = inner_l2(apply_jump(phi, stencil), phi);
                const double nn = inner_l2(phi, phi);
                CHECK(form <= 1e-10 * nn);
            }
        }
    }
}

TEST_CASE("assembled matrix agrees with the matrix-free path",
          "[operators][property]") {
    std::mt19937_64 rng(41);
    const auto nu = LevyMeasure::tempered_power_law(0.8, 0.5, 0.5);
    const auto spec = GridSpec::make(Spacing::unit_fraction(8), 24);
    const auto stencil = build_stencil(nu, spec);

    CoefficientSet cs;
    cs.a = [](double t, double x) { return std::min(x * x, 1.0) * (1.0 + 0.1 * t); };
    cs.b = [](double t, double x) { return 0.3 * std::cos(x + t); };
    cs.c = [](double t, double x) { return -0.2 - 0.1 * std::sin(x - t); };
    cs.bound = 2.0;

    const double t = 0.37;
    const auto op = assemble(cs, stencil, spec, t);
    for (int trial = 0; trial < 20; ++trial) {
        const auto phi = random_compact(spec, 0, rng);
        GridFunction free_path = apply_local(cs, t, phi);
        axpy_inplace(1.0, apply_jump_small(phi, stencil), free_path);
        axpy_inplace(1.0, apply_jump_big(phi, stencil), free_path);
        const auto mat_path = op.apply(phi);
        CHECK(sup_difference(free_path, mat_path) < 1e-12);
    }
}

TEST_CASE("zero operator assembles to the zero matrix", "[operators]") {
    const auto spec = GridSpec::make(Spacing::unit_fraction(4), 8);
    const auto op =
        assemble(CoefficientSet::zero(), LevyMeasure::zero(), spec, 0.0, 4);
    CHECK(op.matrix().nonZeros() == 0);
    CHECK(op.row_sum_bound() == 0.0);
}

TEST_CASE("pure-jump matrix row sums", "[operators]") {
    // Bounded-support measure: interior rows annihilate constants exactly,
    // boundary rows lose mass to zero extension.
    const auto nu = LevyMeasure::atomic({{0.5, 1.0}, {-1.5, 0.4}, {2.0, 0.7}});
    const auto spec = GridSpec::make(Spacing::unit_fraction(2), 12);
    const auto op = assemble(CoefficientSet::zero(), nu, spec, 0.0,
                             nu.tail_truncation_index(spec.h, 1e-14));

    const long m = spec.halfwidth;
    const long reach = 5; // K_max h = 2 plus the unit-ball stencil reach 1+h
    for (long j = -m; j <= m; ++j) {
        double row_sum = 0.0;
        for (SparseMatrix::InnerIterator it(op.matrix(), static_cast<int>(j + m));
             it; ++it)
            row_sum += it.value();
        CHECK(row_sum <= 1e-11);
        if (std::labs(j) + reach <= m)
            CHECK(row_sum == Catch::Approx(0.0).margin(1e-11));
    }
}

TEST_CASE("jump norm does not blow up under refinement", "[operators]") {
    const auto nu = LevyMeasure::power_law(1.0, 0.5);
    const auto shape = make_bump(1.0);
    std::vector<double> norms;
    for (long n : {8L, 16L, 32L, 64L}) {
        const auto spec = GridSpec::from_radius(Spacing::unit_fraction(n), 2.0);
        const auto stencil = build_stencil(nu, spec);
        const auto phi = sample(shape.value, spec);
        norms.push_back(norm_l2(apply_jump(phi, stencil)));
    }
    const auto [lo, hi] = std::minmax_element(norms.begin(), norms.end());
    CHECK(*hi / *lo < 1.10);
}

TEST_CASE("jump operator converges to the quadrature oracle",
          "[operators][rate]") {
    const auto nu = LevyMeasure::power_law(1.0, 0.5);
    const auto shape = make_bump(1.0);

    std::vector<std::pair<double, double>> levels;
    for (long n : {8L, 16L, 32L}) {
        const auto spec = GridSpec::from_radius(Spacing::unit_fraction(n), 2.0);
        const auto stencil = build_stencil(nu, spec);
        const auto phi = sample(shape.value, spec);
        const auto discrete = apply_jump(phi, stencil);
        double sup = 0.0;
        for (long j = -spec.halfwidth; j <= spec.halfwidth; ++j) {
            const double oracle =
                continuous_jump(shape, spec.point(j), nu, 1e-10);
            sup = std::max(sup, std::abs(discrete.at(j) - oracle));
        }
        levels.emplace_back(spec.h.value(), sup);
    }
    const RateFit fit = fit_rate(levels);
    REQUIRE(fit.status == RateFitStatus::Fitted);
    CHECK(fit.slope >= 0.9);
}

TEST_CASE("symmetric difference converges at second order",
          "[operators][rate]") {
    const auto shape = make_bump(1.0);
    std::vector<std::pair<double, double>> levels;
    for (long n : {8L, 16L, 32L, 64L}) {
        const auto spec = GridSpec::from_radius(Spacing::unit_fraction(n), 2.0);
        const auto phi = sample(shape.value, spec);
        const auto d = delta_sym(phi);
        double sup = 0.0;
        for (long j = -spec.halfwidth; j <= spec.halfwidth; ++j)
            sup = std::max(sup, std::abs(d.at(j) - shape.deriv(spec.point(j))));
        levels.emplace_back(spec.h.value(), sup);
    }
    const RateFit fit = fit_rate(levels);
    REQUIRE(fit.status == RateFitStatus::Fitted);
    CHECK(fit.slope >= 1.9);
}

TEST_CASE("matrix dump emits matrix-market triplets", "[operators]") {
    const auto nu = LevyMeasure::atomic({{0.5, 1.0}});
    const auto spec = GridSpec::make(Spacing::unit_fraction(2), 4);
    const auto op = assemble(const_coeffs(0.0, 0.0, -1.0), nu, spec, 0.25,
                             nu.tail_truncation_index(spec.h, 1e-14));
    std::ostringstream os;
    dump_matrix(op, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line.find("MatrixMarket") != std::string::npos);
    std::getline(is, line); // comment
    long rows, cols, nnz;
    is >> rows >> cols >> nnz;
    CHECK(rows == spec.size());
    CHECK(cols == spec.size());
    CHECK(nnz == op.matrix().nonZeros());
    long count = 0;
    long r, c;
    double v;
    while (is >> r >> c >> v) {
        CHECK(r >= 1);
        CHECK(r <= rows);
        CHECK(c >= 1);
        CHECK(c <= cols);
        ++count;
    }
    CHECK(count == nnz);
}
