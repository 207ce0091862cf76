#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nlrte/error.hpp"
#include "nlrte/limit_harness.hpp"
#include "nlrte/log.hpp"

using namespace nlrte;
using std::numbers::pi;

namespace {

ProblemFactory slab_factory(double sigma_s, double horizon, std::function<double(int, double)> coeff, int order) {
    return [=](int nx, int nz, double eps) {
        TransportProblem p;
        p.grid = SpatialGrid(nx);
        p.evolution = EvolutionGrid(horizon, nz);
        p.quadrature = build_quadrature(1, 2);
        p.phase = make_isotropic(p.quadrature);
        p.sigma_s = sigma_s;
        p.epsilon = eps;
        p.absorption = AbsorptionModel::from_function(p.grid, p.evolution, order,
                                                      [&](int l, double, double x, double) { return coeff(l, x); });
        p.initial.resize(nx);
        for (int i = 0; i < nx; ++i) p.initial[i] = std::pow(std::sin(pi * p.grid.center(0, i)), 2);
        return p;
    };
}

struct QuietWarnings {
    WarningSink prev = set_warning_sink([](const std::string&) {});
    ~QuietWarnings() { set_warning_sink(prev); }
};

}  // namespace

TEST_CASE("log-log fit") {
    const auto [s, r] = fit_loglog({0.4, 0.2, 0.1, 0.05}, {3 * 0.4, 3 * 0.2, 3 * 0.1, 3 * 0.05});
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r < 1e-12);
    const auto [s2, r2] = fit_loglog({1, 2, 4}, {1, 4, 16});
    CHECK(s2 == doctest::Approx(2.0));
    CHECK_THROWS_AS(fit_loglog({1.0}, {1.0}), ValidationError);
    CHECK_THROWS_AS(fit_loglog({1.0, 2.0}, {0.0, 1.0}), ValidationError);
}

TEST_CASE("matched diffusion uses the cell-problem matrix and angular-mean absorption") {
    const auto t = slab_factory(2.0, 0.1, [](int l, double) { return 0.1 * (l + 1); }, 1)(16, 4, 0.5);
    const auto d = matched_diffusion(t);
    CHECK(d.A(0, 0) == doctest::Approx(2.0));
    CHECK(d.nu == 2.0);
    CHECK(d.diffusivity(0) == doctest::Approx(0.5));
    CHECK(d.argument == AbsorptionArgument::angular_mean);
}

TEST_CASE("study input validation") {
    ConvergenceStudy s;
    CHECK_THROWS_AS(run_convergence_study(s), ValidationError);
    s.factory = slab_factory(1.0, 0.1, [](int, double) { return 0.1; }, 1);
    s.epsilons = {0.1, 0.2};
    CHECK_THROWS_AS(run_convergence_study(s), ValidationError);
}

TEST_CASE("single epsilon: table without slope") {
    ConvergenceStudy s;
    s.factory = slab_factory(4.0, 0.2, [](int, double) { return 0.1; }, 1);
    s.epsilons = {0.2};
    s.nx = 32;
    s.nz = 10;
    s.auto_refine = false;
    const auto r = run_convergence_study(s);
    CHECK(r.records.size() == 1);
    CHECK_FALSE(r.slope.has_value());
    CHECK(r.note == "insufficient points");
    CHECK(r.table().rows.size() == 1);
}

TEST_CASE("scattering-only normalization: transport density over nu tends to the heat solution") {
    ConvergenceStudy s;
    s.factory = slab_factory(8.0, 0.3, [](int, double) { return 0.0; }, 0);
    s.epsilons = {0.2, 0.1, 0.05};
    // Fixed grid fine enough that discretization error stays below e(eps).
    s.nx = 2048;
    s.nz = 640;
    s.auto_refine = false;
    const auto r = run_convergence_study(s);
    REQUIRE(r.slope.has_value());
    CHECK(*r.slope >= 0.8);
    CHECK(r.records.back().error < 0.02);
    CHECK(r.monotone);
}

TEST_CASE("degenerate precondition and superset behaviour") {
    QuietWarnings quiet;
    ConvergenceStudy s;
    s.nx = 32;
    s.nz = 8;
    s.auto_refine = false;
    s.epsilons = {0.4, 0.2, 0.1};
    // Sigma_a0 = 0 and Sigma_a1 = 0 on the left half: Sigma_a(||f||) vanishes there.
    s.factory = slab_factory(4.0, 0.2, [](int l, double x) { return l == 1 && x >= 0.5 ? 0.1 : 0.0; }, 1);
    CHECK_THROWS_AS(run_degenerate_study(s), ValidationError);

    s.factory = slab_factory(4.0, 0.2, [](int l, double) { return l == 0 ? 0.05 : 0.1; }, 1);
    const auto a = run_convergence_study(s);
    const auto b = run_degenerate_study(s);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(a.records[i].error == b.records[i].error);
    CHECK(*a.slope == *b.slope);
    CHECK(b.lower_bound_ok);
}
