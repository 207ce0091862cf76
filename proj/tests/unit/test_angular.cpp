#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "nlrte/angular.hpp"
#include "nlrte/error.hpp"

using namespace nlrte;
using std::numbers::pi;

TEST_CASE("quadrature") {
    const auto q1 = build_quadrature(1, 2);
    CHECK(q1.size() == 2);
    CHECK(q1.direction(0)[0] == 1.0);
    CHECK(q1.direction(1)[0] == -1.0);
    CHECK(q1.measure() == 2.0);

    const auto q = build_quadrature(2, 4);
    for (int j = 0; j < 4; ++j) {
        const double th = pi / 4 + j * pi / 2;
        CHECK(q.direction(j)[0] == doctest::Approx(std::cos(th)).epsilon(1e-15));
        CHECK(q.direction(j)[1] == doctest::Approx(std::sin(th)).epsilon(1e-15));
        CHECK(q.weight(j) == doctest::Approx(pi / 2));
    }
    CHECK_THROWS_AS(build_quadrature(3, 4), ValidationError);
    CHECK_THROWS_AS(build_quadrature(2, 1), ValidationError);

    for (int n : {4, 7, 16, 33}) {
        const auto qq = build_quadrature(2, n);
        double sx = 0, sy = 0, sw = 0;
        for (int j = 0; j < n; ++j) {
            const auto& k = qq.direction(j);
            CHECK(std::abs(std::hypot(k[0], k[1]) - 1.0) < 1e-14);
            sx += qq.weight(j) * k[0];
            sy += qq.weight(j) * k[1];
            sw += qq.weight(j);
        }
        CHECK(std::abs(sx) < 1e-13);
        CHECK(std::abs(sy) < 1e-13);
        CHECK(sw == doctest::Approx(qq.measure()).epsilon(1e-14));
    }
}

TEST_CASE("linear anisotropic bounds") {
    const auto q = build_quadrature(2, 16);
    const auto p0 = make_linear_anisotropic(0.0, q);
    CHECK(p0.theta_lower() == doctest::Approx(1 / (2 * pi)));
    CHECK(p0.theta_upper() == doctest::Approx(1 / (2 * pi)));
    const auto p3 = make_linear_anisotropic(0.3, q);
    CHECK(p3.theta_lower() == doctest::Approx(0.4 / (2 * pi)).epsilon(1e-12));
    CHECK(p3.theta_upper() == doctest::Approx(1.6 / (2 * pi)).epsilon(1e-12));
    CHECK(p3.theta_lower() == doctest::Approx(0.06366).epsilon(1e-4));
    CHECK(p3.theta_upper() == doctest::Approx(0.25465).epsilon(1e-4));
    CHECK_THROWS_AS(make_linear_anisotropic(0.6, q), ValidationError);
    CHECK_THROWS_AS(make_linear_anisotropic(1.0, build_quadrature(1, 2)), ValidationError);
}

TEST_CASE("scattering operator") {
    const auto q1 = build_quadrature(1, 2);
    const auto iso1 = make_isotropic(q1);
    const auto r = apply_scattering(iso1, q1, std::vector<double>{1.0, 3.0});
    CHECK(r[0] == doctest::Approx(2.0));
    CHECK(r[1] == doctest::Approx(2.0));

    const auto q = build_quadrature(2, 12);
    const auto p = make_linear_anisotropic(0.3, q);
    std::vector<double> c(12, 2.5), u(12);
    for (double v : apply_scattering(p, q, c)) CHECK(v == doctest::Approx(2.5).epsilon(1e-14));

    // Oracle: dense product with the analytic kernel (1 + 2 g cos)/(2 pi).
    for (int j = 0; j < 12; ++j) u[j] = q.direction(j)[0];
    const auto ku = apply_scattering(p, q, u);
    for (int j = 0; j < 12; ++j) {
        double ref = 0.0;
        for (int l = 0; l < 12; ++l) ref += q.weight(l) * (1 + 2 * 0.3 * q.dot(j, l)) / (2 * pi) * u[l];
        CHECK(ku[j] == doctest::Approx(ref).epsilon(1e-13));
        CHECK(ku[j] == doctest::Approx(0.3 * u[j]).scale(1.0).epsilon(1e-13));
    }
    CHECK_THROWS_AS(apply_scattering(p, q, std::vector<double>(5)), ValidationError);
}

TEST_CASE("anisotropy") {
    const auto q = build_quadrature(2, 16);
    CHECK(std::abs(anisotropy(make_isotropic(q), q)) < 1e-14);
    CHECK(anisotropy(make_linear_anisotropic(0.3, q), q) == doctest::Approx(0.3).epsilon(1e-12));
    const auto q1 = build_quadrature(1, 2);
    CHECK(anisotropy(make_linear_anisotropic(0.6, q1), q1) == doctest::Approx(0.6).epsilon(1e-14));
    const auto p1 = make_linear_anisotropic(0.6, q1);
    CHECK(p1(0, 0) == doctest::Approx(0.8));
    CHECK(p1(0, 1) == doctest::Approx(0.2));
}

TEST_CASE("cell problems") {
    const auto q = build_quadrature(2, 16);
    const auto d_iso = solve_cell_problem(make_isotropic(q), q, 0);
    for (int j = 0; j < 16; ++j) CHECK(d_iso[j] == doctest::Approx(q.direction(j)[0]).scale(1.0).epsilon(1e-12));

    const double g = 0.3;
    const auto p = make_linear_anisotropic(g, q);
    for (int axis = 0; axis < 2; ++axis) {
        const auto d = solve_cell_problem(p, q, axis);
        const auto kd = apply_scattering(p, q, d);
        double mean = 0.0;
        for (int j = 0; j < 16; ++j) {
            CHECK(std::abs(d[j] - kd[j] - q.direction(j)[axis]) < 1e-12);
            CHECK(d[j] == doctest::Approx(q.direction(j)[axis] / (1 - g)).scale(1.0).epsilon(1e-12));
            mean += q.weight(j) * d[j];
        }
        CHECK(std::abs(mean) < 1e-12);
    }

    const auto q1 = build_quadrature(1, 2);
    const auto d1 = solve_cell_problem(make_isotropic(q1), q1, 0);
    CHECK(d1[0] == doctest::Approx(1.0));
    CHECK(d1[1] == doctest::Approx(-1.0));
}

TEST_CASE("diffusion matrix") {
    const auto q = build_quadrature(2, 16);
    const auto a_iso = diffusion_matrix(make_isotropic(q), q);
    CHECK((a_iso - pi * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    // g = 1/2 sits on the edge of the linear family; an odd quadrature keeps
    // (1 + cos)/(2 pi) strictly positive at every node.
    const auto q15 = build_quadrature(2, 15);
    const auto p_half = make_tabulated([](double c) { return (1.0 + c) / (2 * pi); }, q15);
    CHECK(anisotropy(p_half, q15) == doctest::Approx(0.5).epsilon(1e-13));
    const auto a_half = diffusion_matrix(p_half, q15);
    CHECK((a_half - 2 * pi * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-10);
    const auto q1 = build_quadrature(1, 2);
    CHECK(diffusion_matrix(make_isotropic(q1), q1)(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("diffusion matrix equals brute-force double sum for random tabulated kernels") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    const auto q = build_quadrature(2, 12);
    for (int t = 0; t < 5; ++t) {
        const double a = 0.6 + u(rng), b = u(rng) * 0.5, c = u(rng) * 0.3;
        const auto p = make_tabulated([&](double x) { return a + b * x + c * x * x; }, q);
        // Oracle: dense (I - K) solve on the mean-zero subspace via a bordered system.
        const int n = q.size();
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + 1, n + 1);
        for (int j = 0; j < n; ++j) {
            for (int l = 0; l < n; ++l) M(j, l) = (j == l ? 1.0 : 0.0) - q.weight(l) * p(j, l);
            M(j, n) = 1.0;
            M(n, j) = q.weight(j);
        }
        Eigen::Matrix2d ref;
        for (int jdir = 0; jdir < 2; ++jdir) {
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
            for (int j = 0; j < n; ++j) rhs(j) = q.direction(j)[jdir];
            const Eigen::VectorXd d = M.fullPivLu().solve(rhs);
            for (int i = 0; i < 2; ++i) {
                double s = 0.0;
                for (int m = 0; m < n; ++m) s += q.weight(m) * q.direction(m)[i] * d(m);
                ref(i, jdir) = s;
            }
        }
        const auto A = diffusion_matrix(p, q);
        CHECK((A - ref).cwiseAbs().maxCoeff() < 1e-11);
        CHECK((A - A.transpose()).cwiseAbs().maxCoeff() < 1e-11);
        CHECK(A.llt().info() == Eigen::Success);
    }
}

TEST_CASE("kernel normalization and spectrum") {
    const auto q = build_quadrature(2, 16);
    const std::vector<PhaseFunction> kernels = {
        make_isotropic(q), make_linear_anisotropic(0.3, q), make_linear_anisotropic(-0.3, q),
        make_tabulated([](double c) { return 0.75 / (2 * pi * (1.0625 - 0.5 * c)); }, q)};
    for (const auto& p : kernels) {
        const int n = q.size();
        Eigen::MatrixXd S(n, n);
        for (int j = 0; j < n; ++j) {
            double row = 0.0, col = 0.0;
            for (int l = 0; l < n; ++l) {
                row += q.weight(l) * p(j, l);
                col += q.weight(l) * p(l, j);
                S(j, l) = std::sqrt(q.weight(j) * q.weight(l)) * p(j, l);
                CHECK(p(j, l) >= p.theta_lower() - 1e-15);
                CHECK(p(j, l) <= p.theta_upper() + 1e-15);
            }
            CHECK(row == doctest::Approx(1.0).epsilon(1e-13));
            CHECK(col == doctest::Approx(1.0).epsilon(1e-13));
        }
        CHECK(p.theta_lower() > 0.0);
        CHECK(q.measure() * p.theta_lower() <= 1.0 + 1e-14);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
        const auto ev = es.eigenvalues();
        CHECK(ev(n - 1) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ev(n - 2) < 1.0 - 1e-6);
        CHECK(ev(0) > -1.0 + 1e-6);

        std::vector<double> u(n);
        std::mt19937_64 rng(5);
        std::normal_distribution<double> nd;
        for (auto& v : u) v = nd(rng);
        const auto ku = apply_scattering(p, q, u);
        double m0 = 0, m1 = 0;
        for (int j = 0; j < n; ++j) {
            m0 += q.weight(j) * u[j];
            m1 += q.weight(j) * ku[j];
        }
        CHECK(m1 == doctest::Approx(m0).scale(1.0).epsilon(1e-13));
    }
}
