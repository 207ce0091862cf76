#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nlrte/error.hpp"
#include "nlrte/inverse.hpp"
#include "nlrte/log.hpp"

using namespace nlrte;
using std::numbers::pi;

namespace {

TransportProblem base_slab(int nx, int nz, double horizon, AbsorptionModel (*model)(const SpatialGrid&, const EvolutionGrid&),
                           double sigma_s = 1.0) {
    TransportProblem p;
    p.grid = SpatialGrid(nx);
    p.evolution = EvolutionGrid(horizon, nz);
    p.quadrature = build_quadrature(1, 2);
    p.phase = make_isotropic(p.quadrature);
    p.sigma_s = sigma_s;
    p.absorption = model(p.grid, p.evolution);
    p.initial.assign(nx, 1.0);
    return p;
}

std::vector<double> shape(const SpatialGrid& g, double scale) {
    std::vector<double> f(g.cell_count());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = scale * (0.6 + 0.4 * std::sin(pi * g.center(0, static_cast<int>(i))));
    return f;
}

bool in_interior(const SpatialGrid& g, std::size_t c) {
    const int ix = static_cast<int>(c);
    return ix >= interior_margin && ix < g.cells(0) - interior_margin;
}

// Max relative error of a recovered coefficient against `truth` over the
// interior window and levels >= 1.
template <class Truth>
double coefficient_error(const AbsorptionModel& m, int l, Truth truth) {
    double e = 0.0;
    for (int iz = 1; iz <= m.evolution().steps(); ++iz)
        for (std::size_t c = 0; c < m.grid().cell_count(); ++c) {
            if (!in_interior(m.grid(), c)) continue;
            const double t = truth(m.grid().center(0, static_cast<int>(c)));
            e = std::max(e, std::abs(m.coefficient(l, iz, c) - t) / t);
        }
    return e;
}

AbsorptionModel constant_01_02(const SpatialGrid& g, const EvolutionGrid& e) {
    return AbsorptionModel::constant(g, e, {0.1, 0.2});
}

AbsorptionModel constant_03(const SpatialGrid& g, const EvolutionGrid& e) { return AbsorptionModel::constant(g, e, {0.3}); }

AbsorptionModel zero(const SpatialGrid& g, const EvolutionGrid& e) { return AbsorptionModel::constant(g, e, {0.0}); }

AbsorptionModel varying(const SpatialGrid& g, const EvolutionGrid& e) {
    return AbsorptionModel::from_function(g, e, 1, [](int l, double, double x, double) {
        return l == 0 ? 0.1 : 0.1 + 0.05 * std::sin(2 * pi * x);
    });
}

}  // namespace

TEST_CASE("Vandermonde extraction") {
    SpatialGrid g(4);
    EvolutionGrid e(1.0, 1);
    std::vector<DensityField> gs{DensityField(g, e, 0.5), DensityField(g, e, 1.0)};
    std::vector<DensityField> ms{DensityField(g, e, 0.2), DensityField(g, e, 0.3)};
    auto r = vandermonde_extract(ms, gs);
    CHECK(r.coefficients[0](1, 2) == doctest::Approx(0.1).epsilon(1e-13));
    CHECK(r.coefficients[1](1, 2) == doctest::Approx(0.2).epsilon(1e-13));
    CHECK(r.unreliable_count == 0);

    auto r0 = vandermonde_extract({DensityField(g, e, 0.37)}, {DensityField(g, e, 0.9)});
    CHECK(r0.coefficients[0](0, 1) == 0.37);

    // equal densities at one cell: singular, filled from the neighbours
    gs[1](1, 2) = 0.5;
    ms[0](1, 1) = 0.25;  // neighbour values differ so the average is visible
    r = vandermonde_extract(ms, gs);
    CHECK(r.unreliable[1 * 4 + 2] == 1);
    CHECK(r.unreliable_count == 1);
    const double left = r.coefficients[0](1, 1), right = r.coefficients[0](1, 3);
    CHECK(r.coefficients[0](1, 2) == doctest::Approx(0.5 * (left + right)));

    // negative solution is clamped and flagged
    std::vector<DensityField> mneg{DensityField(g, e, 0.3), DensityField(g, e, 0.2)};
    const auto rc = vandermonde_extract(mneg, {DensityField(g, e, 0.5), DensityField(g, e, 1.0)});
    CHECK(rc.clamped_count == g.cell_count() * 2);
    CHECK(rc.coefficients[1](0, 0) == 0.0);
}

TEST_CASE("kappa") {
    CHECK(kappa(1 / (4 * pi), 3 / (4 * pi)) == doctest::Approx(1 / (2 * std::sqrt(pi))).epsilon(1e-14));
    CHECK(kappa(1 / (4 * pi), 3 / (4 * pi)) == doctest::Approx(0.28209).epsilon(1e-5));
    const auto q = build_quadrature(2, 8);
    CHECK(kappa(make_isotropic(q)) == 0.0);
    CHECK_THROWS_AS(kappa(0.0, 1.0), ValidationError);
}

TEST_CASE("scattering inequality holds for built-in kernels") {
    const auto q = build_quadrature(2, 16);
    const auto iso = appendix_inequality_check(make_isotropic(q), q, 2000, 42);
    CHECK(iso.violations == 0);
    CHECK(iso.min_slack > 0.0);
    for (double g : {0.3, -0.3}) {
        const auto r = appendix_inequality_check(make_linear_anisotropic(g, q), q, 10000, 42);
        CHECK(r.trials == 10000);
        CHECK(r.violations == 0);
    }
    const auto q1 = build_quadrature(1, 2);
    CHECK(appendix_inequality_check(make_linear_anisotropic(0.5, q1), q1, 2000, 1).violations == 0);
    const auto hg = make_tabulated([](double c) { return 0.91 / (1.09 - 0.6 * c); }, q);
    CHECK(appendix_inequality_check(hg, q, 2000, 7).violations == 0);
    CHECK_THROWS_AS(appendix_inequality_check(make_isotropic(q), q, 0, 1), ValidationError);
}

TEST_CASE("smoothing keeps constants and is off at width zero") {
    SpatialGrid g(10, 6);
    EvolutionGrid e(1.0, 5);
    DensityField c(g, e, 2.5);
    for (double v : smooth_density(c, 1.5).values()) CHECK(v == doctest::Approx(2.5).epsilon(1e-14));
    DensityField r(g, e);
    for (std::size_t i = 0; i < r.values().size(); ++i) r.values()[i] = std::sin(0.3 * i);
    CHECK(smooth_density(r, 0.0).values() == r.values());
}

TEST_CASE("data generation: ordering, determinism, preconditions") {
    ExperimentSet set;
    set.base = base_slab(32, 20, 1.0, constant_01_02);
    set.sources = {std::vector<double>(32, 0.5), std::vector<double>(32, 1.0)};
    generate_data(set);
    CHECK(set.ordered);
    for (int iz = 0; iz <= 20; ++iz)
        for (std::size_t c = 0; c < 32; ++c)
            if (in_interior(set.base.grid, c)) CHECK(set.data[0](iz, c) < set.data[1](iz, c));

    ExperimentSet again = set;
    generate_data(again);
    CHECK(again.data[0].values() == set.data[0].values());

    set.noise = 0.01;
    set.seed = 9;
    ExperimentSet noisy_a = set, noisy_b = set;
    generate_data(noisy_a);
    generate_data(noisy_b);
    CHECK(noisy_a.data[1].values() == noisy_b.data[1].values());
    CHECK(noisy_a.data[1].values() != again.data[1].values());

    ExperimentSet bad = set;
    bad.sources[1][5] = 0.4;
    CHECK_THROWS_AS(generate_data(bad), ValidationError);
    bad = set;
    bad.sources[0][0] = 0.0;
    CHECK_THROWS_AS(generate_data(bad), ValidationError);
}

TEST_CASE("different absorption gives different data") {
    ExperimentSet a, b;
    a.base = base_slab(24, 10, 0.5, constant_01_02);
    b.base = base_slab(24, 10, 0.5, constant_03);
    a.sources = b.sources = {shape(a.base.grid, 1.0)};
    generate_data(a);
    generate_data(b);
    CHECK(max_abs_diff(a.data[0].values(), b.data[0].values()) > 1e-3);
}

TEST_CASE("effective absorption recovery") {
    SUBCASE("constant L = 0") {
        ExperimentSet set;
        set.base = base_slab(32, 20, 1.0, constant_03);
        set.sources = {shape(set.base.grid, 1.0)};
        generate_data(set);
        const auto r = recover_effective_absorption(set.experiment(0), set.data[0]);
        double e = 0.0;
        for (int iz = 1; iz <= 20; ++iz)
            for (std::size_t c = 0; c < 32; ++c)
                if (in_interior(set.base.grid, c)) e = std::max(e, std::abs(r.m(iz, c) - 0.3) / 0.3);
        CHECK(e <= 1e-2);
    }
    SUBCASE("scattering-free slab") {
        ExperimentSet set;
        set.base = base_slab(32, 20, 0.5, constant_03, 1e-12);
        set.sources = {shape(set.base.grid, 1.0)};
        {
            WarningSink prev = set_warning_sink([](const std::string&) {});
            generate_data(set);
            set_warning_sink(prev);
        }
        const auto r = recover_effective_absorption(set.experiment(0), set.data[0]);
        REQUIRE(r.trace.size() == 20);
        for (double t : r.trace) CHECK(t <= 1e-8);
        for (int iz = 1; iz <= 20; ++iz)
            for (std::size_t c = interior_margin; c < 32 - interior_margin; ++c)
                CHECK(r.m(iz, c) == doctest::Approx(0.3).epsilon(1e-6));
    }
    SUBCASE("no absorption") {
        ExperimentSet set;
        set.base = base_slab(32, 10, 0.5, zero);
        set.sources = {shape(set.base.grid, 1.0)};
        generate_data(set);
        const auto r = recover_effective_absorption(set.experiment(0), set.data[0]);
        CHECK(max_abs(r.m.values()) < 1e-8);
    }
}

TEST_CASE("reconstruction round trip, constant coefficients") {
    ExperimentSet set;
    set.base = base_slab(32, 20, 1.0, constant_01_02);
    set.sources = {shape(set.base.grid, 0.5), shape(set.base.grid, 1.0)};
    generate_data(set);
    const auto r = reconstruct(set);
    CHECK(coefficient_error(r.recovered, 0, [](double) { return 0.1; }) <= 1e-2);
    CHECK(coefficient_error(r.recovered, 1, [](double) { return 0.2; }) <= 1e-2);
    for (double res : r.residuals) CHECK(res <= 1e-3);
}

TEST_CASE("reconstruction round trip, smoothly varying quadratic coefficient") {
    ExperimentSet set;
    set.base = base_slab(32, 20, 1.0, varying);
    set.sources = {shape(set.base.grid, 0.5), shape(set.base.grid, 1.0)};
    generate_data(set);
    const auto r = reconstruct(set);
    CHECK(coefficient_error(r.recovered, 1, [](double x) { return 0.1 + 0.05 * std::sin(2 * pi * x); }) <= 5e-2);
}

TEST_CASE("noisy data degrades gracefully") {
    ExperimentSet set;
    set.base = base_slab(32, 20, 1.0, constant_01_02);
    set.sources = {shape(set.base.grid, 0.5), shape(set.base.grid, 1.0)};
    set.noise = 0.01;
    set.seed = 3;
    WarningSink prev = set_warning_sink([](const std::string&) {});
    generate_data(set);
    const auto r = reconstruct(set);
    set_warning_sink(prev);
    REQUIRE(r.residuals.size() == 2);
    for (double res : r.residuals) {
        CHECK(std::isfinite(res));
        CHECK(res < 1.0);
    }
    for (double v : r.recovered.values()) CHECK(std::isfinite(v));
}
