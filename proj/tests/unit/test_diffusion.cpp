#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nlrte/diffusion.hpp"
#include "nlrte/error.hpp"
#include "nlrte/limit_harness.hpp"

using namespace nlrte;
using std::numbers::pi;

namespace {

DiffusionProblem line(int nx, int nz, double horizon, std::vector<double> coeffs, double a = 1.0) {
    DiffusionProblem d;
    d.grid = SpatialGrid(nx);
    d.evolution = EvolutionGrid(horizon, nz);
    d.A = Eigen::MatrixXd::Constant(1, 1, a);
    d.absorption = AbsorptionModel::constant(d.grid, d.evolution, std::move(coeffs));
    d.argument = AbsorptionArgument::point_value;
    d.initial.resize(nx);
    for (int i = 0; i < nx; ++i) d.initial[i] = std::sin(pi * d.grid.center(0, i));
    return d;
}

// Max error against W*(z, x) over all levels.
template <class Exact>
double max_error(const DensityField& w, Exact exact) {
    double e = 0.0;
    for (int iz = 0; iz < w.levels(); ++iz)
        for (std::size_t c = 0; c < w.cell_count(); ++c)
            e = std::max(e, std::abs(w(iz, c) - exact(w.evolution().level(iz), w.grid().center(0, static_cast<int>(c)))));
    return e;
}

}  // namespace

TEST_CASE("validation") {
    auto d = line(8, 2, 0.1, {0.1});
    d.A = Eigen::MatrixXd::Constant(1, 1, -1.0);
    CHECK_THROWS_AS(d.validate(), ValidationError);
    d = line(8, 2, 0.1, {0.1});
    d.initial[2] = -0.1;
    CHECK_THROWS_AS(d.validate(), ValidationError);
    DiffusionProblem d2 = line(8, 2, 0.1, {0.1});
    d2.grid = SpatialGrid(4, 4);
    d2.A = Eigen::Matrix2d{{1.0, 0.3}, {0.3, 1.0}};
    CHECK_THROWS_AS(d2.validate(), ValidationError);
}

TEST_CASE("zero data stays zero") {
    auto d = line(16, 4, 0.2, {0.1, 0.3});
    std::fill(d.initial.begin(), d.initial.end(), 0.0);
    CHECK(max_abs(solve_semilinear_diffusion(d).w.values()) == 0.0);
    CHECK(max_abs(linear_diffusion_reference(d).w.values()) == 0.0);
}

TEST_CASE("vanishing diffusivity reduces to the pointwise ODE") {
    auto d = line(8, 4000, 1.0, {0.0, 0.4});
    d.sigma_s = 1e12;
    std::fill(d.initial.begin(), d.initial.end(), 1.5);
    const auto s = solve_semilinear_diffusion(d);
    const double exact = 1.0 / (1.0 / 1.5 + 0.4 * 1.0);
    CHECK(s.w(4000, 4) == doctest::Approx(exact).epsilon(2e-4));
}

TEST_CASE("angular_mean argument scales the absorption by nu") {
    auto d = line(8, 4000, 1.0, {0.0, 0.4});
    d.sigma_s = 1e12;
    d.nu = 2.0;
    d.A(0, 0) = 2.0;
    d.argument = AbsorptionArgument::angular_mean;
    std::fill(d.initial.begin(), d.initial.end(), 1.5);
    const auto s = solve_semilinear_diffusion(d);
    CHECK(s.w(4000, 4) == doctest::Approx(1.0 / (1.0 / 1.5 + 0.8)).epsilon(2e-4));
}

TEST_CASE("linear decay of the first Dirichlet mode") {
    // sin(pi x) at cell centres is an exact eigenvector of the discrete operator
    // with eigenvalue (4/h^2) sin^2(pi h / 2) D.
    for (int nx : {16, 64}) {
        auto d = line(nx, 20, 0.2, {0.0}, 3.0);
        d.sigma_s = 2.0;
        const auto ref = linear_diffusion_reference(d, {}, 0.0);
        const double h = 1.0 / nx;
        const double D = 1.5;
        const double lam_h = 4.0 / (h * h) * std::pow(std::sin(pi * h / 2), 2) * D;
        const double dz = 0.01;
        for (int iz : {1, 10, 20})
            for (int i = 0; i < nx; ++i)
                CHECK(ref.w(iz, i) == doctest::Approx(d.initial[i] * std::pow(1 + lam_h * dz, -iz)).epsilon(1e-12));
        // the continuum rate pi^2 A/Sigma_s is approached at second order
        CHECK(lam_h == doctest::Approx(pi * pi * D).epsilon(2.0 * h * h * pi * pi / 12));
    }
}

TEST_CASE("manufactured solution: second order in space") {
    // W* = (1 + z) x (1 - x) e^x is linear in z, so backward Euler is exact in z.
    auto wstar = [](double z, double x) { return (1 + z) * x * (1 - x) * std::exp(x); };
    auto wxx = [](double z, double x) { return (1 + z) * std::exp(x) * (-x * x - 3 * x); };
    const double D = 0.7, c0 = 0.2, c1 = 0.5;
    std::vector<double> hs, errs;
    for (int nx : {16, 32, 64, 128}) {
        auto d = line(nx, 4, 0.4, {c0, c1}, D);
        for (int i = 0; i < nx; ++i) d.initial[i] = wstar(0.0, d.grid.center(0, i));
        d.source = [&](double z, double x, double) {
            const double w = wstar(z, x);
            return x * (1 - x) * std::exp(x) - D * wxx(z, x) + (c0 + c1 * w) * w;
        };
        DiffusionOptions opt;
        opt.tol_picard = 1e-14;
        hs.push_back(1.0 / nx);
        errs.push_back(max_error(solve_semilinear_diffusion(d, opt).w, wstar));
    }
    const auto [slope, resid] = fit_loglog(hs, errs);
    CHECK(slope >= 1.8);
    CHECK(slope <= 2.2);
}

TEST_CASE("manufactured solution: first order in z") {
    // W* = e^{-z} sin(pi x) with the discrete eigenvalue in Q, so the spatial error vanishes.
    const double D = 0.5, c0 = 0.1, c1 = 0.3;
    const int nx = 32;
    const double h = 1.0 / nx;
    const double lam_h = 4.0 / (h * h) * std::pow(std::sin(pi * h / 2), 2);
    auto wstar = [](double z, double x) { return std::exp(-z) * std::sin(pi * x); };
    std::vector<double> dzs, errs;
    for (int nz : {10, 20, 40, 80}) {
        auto d = line(nx, nz, 1.0, {c0, c1}, D);
        d.source = [&](double z, double x, double) {
            const double w = wstar(z, x);
            return -w + D * lam_h * w + (c0 + c1 * w) * w;
        };
        DiffusionOptions opt;
        opt.tol_picard = 1e-14;
        dzs.push_back(1.0 / nz);
        errs.push_back(max_error(solve_semilinear_diffusion(d, opt).w, wstar));
    }
    const auto [slope, resid] = fit_loglog(dzs, errs);
    CHECK(slope >= 0.8);
    CHECK(slope <= 1.2);
}

TEST_CASE("comparison principle and frozen lower bound") {
    auto d = line(32, 20, 0.5, {0.05, 0.4});
    d.argument = AbsorptionArgument::angular_mean;
    d.nu = 2.0;
    d.A(0, 0) = 2.0;
    const auto w = solve_semilinear_diffusion(d).w;
    const auto w0 = linear_diffusion_reference(d).w;
    auto heavier = d;
    heavier.absorption = AbsorptionModel::constant(d.grid, d.evolution, {0.15, 0.4});
    const auto wh = solve_semilinear_diffusion(heavier).w;
    const double fs = max_abs(d.initial);
    for (std::size_t i = 0; i < w.values().size(); ++i) {
        CHECK(w0.values()[i] <= w.values()[i] + 1e-14);
        CHECK(wh.values()[i] <= w.values()[i] + 1e-14);
        CHECK(w.values()[i] >= 0.0);
        CHECK(w.values()[i] <= fs + 1e-12);
    }
}

TEST_CASE("mass change equals boundary flux without absorption") {
    DiffusionProblem d;
    d.grid = SpatialGrid(12, 10, 1.0, 2.0);
    d.evolution = EvolutionGrid(0.1, 5);
    d.A = Eigen::Matrix2d{{1.0, 0.0}, {0.0, 0.5}};
    d.sigma_s = 0.8;
    d.absorption = AbsorptionModel::constant(d.grid, d.evolution, {0.0});
    d.initial.assign(d.grid.cell_count(), 1.0);
    const auto w = solve_semilinear_diffusion(d).w;
    for (int n = 0; n < 5; ++n) {
        double dm = 0.0;
        for (std::size_t c = 0; c < d.grid.cell_count(); ++c) dm += d.grid.volume() * (w(n + 1, c) - w(n, c));
        CHECK(dm / d.evolution.step() == doctest::Approx(-boundary_outflow(d, w.level(n + 1))).epsilon(1e-10));
    }
}
