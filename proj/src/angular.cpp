#include "nlrte/angular.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "nlrte/error.hpp"

namespace nlrte {

AngularQuadrature build_quadrature(int dimension, int n_angles) {
    if (dimension != 1 && dimension != 2)
        throw ValidationError("unsupported angular dimension " + std::to_string(dimension) + " (supported: 1, 2)");
    if (n_angles < 2) throw ValidationError("need at least 2 angles, got " + std::to_string(n_angles));

    AngularQuadrature q;
    q.dim_ = dimension;
    if (dimension == 1) {
        // S^0 has exactly two points regardless of the request.
        q.dirs_ = {{1.0, 0.0}, {-1.0, 0.0}};
        q.weights_ = {1.0, 1.0};
        q.measure_ = 2.0;
        return q;
    }
    const double two_pi = 2.0 * std::numbers::pi;
    q.dirs_.resize(n_angles);
    q.weights_.assign(n_angles, two_pi / n_angles);
    for (int j = 0; j < n_angles; ++j) {
        const double theta = two_pi * (j + 0.5) / n_angles;
        q.dirs_[j] = {std::cos(theta), std::sin(theta)};
    }
    q.measure_ = two_pi;
    return q;
}

void PhaseFunction::cache_bounds() {
    theta_lower_ = kernel_.minCoeff();
    theta_upper_ = kernel_.maxCoeff();
}

PhaseFunction make_isotropic(const AngularQuadrature& quad) {
    PhaseFunction p;
    p.family_ = PhaseFunction::Family::isotropic;
    const int n = quad.size();
    p.kernel_ = Eigen::MatrixXd::Constant(n, n, 1.0 / quad.measure());
    p.theta_lower_ = p.theta_upper_ = 1.0 / quad.measure();
    p.g_ = 0.0;
    return p;
}

PhaseFunction make_linear_anisotropic(double g, const AngularQuadrature& quad) {
    const int n = quad.size();
    PhaseFunction p;
    p.family_ = PhaseFunction::Family::linear_anisotropic;
    p.g_ = g;
    p.kernel_.resize(n, n);
    if (quad.dimension() == 2) {
        if (!(std::abs(g) < 0.5))
            throw ValidationError("linear-anisotropic kernel in 2-D needs |g| < 1/2, got " + std::to_string(g));
        const double inv = 1.0 / (2.0 * std::numbers::pi);
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) p.kernel_(j, l) = (1.0 + 2.0 * g * quad.dot(j, l)) * inv;
        p.theta_lower_ = (1.0 - 2.0 * std::abs(g)) * inv;
        p.theta_upper_ = (1.0 + 2.0 * std::abs(g)) * inv;
    } else {
        if (!(std::abs(g) < 1.0))
            throw ValidationError("linear-anisotropic kernel in 1-D needs |g| < 1, got " + std::to_string(g));
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) p.kernel_(j, l) = 0.5 * (1.0 + g * quad.dot(j, l));
        p.theta_lower_ = 0.5 * (1.0 - std::abs(g));
        p.theta_upper_ = 0.5 * (1.0 + std::abs(g));
    }
    return p;
}

PhaseFunction make_tabulated(const std::function<double(double)>& p_of_cosine, const AngularQuadrature& quad) {
    const int n = quad.size();
    PhaseFunction p;
    p.family_ = PhaseFunction::Family::tabulated;
    p.kernel_.resize(n, n);
    for (int j = 0; j < n; ++j) {
        double row = 0.0;
        for (int l = 0; l < n; ++l) {
            const double v = p_of_cosine(quad.dot(j, l));
            if (!(v > 0.0) || !std::isfinite(v))
                throw ValidationError("tabulated phase function must be positive and finite");
            p.kernel_(j, l) = v;
            row += quad.weight(l) * v;
        }
        p.kernel_.row(j) /= row;
    }
    p.cache_bounds();
    p.g_ = anisotropy(p, quad);
    return p;
}

namespace {

void check_shape(const PhaseFunction& p, const AngularQuadrature& quad) {
    if (p.size() != quad.size())
        throw ValidationError("phase function has " + std::to_string(p.size()) + " directions, quadrature has " +
                              std::to_string(quad.size()));
}

// (I - K) as a dense matrix acting on per-direction values.
Eigen::MatrixXd transfer_matrix(const PhaseFunction& p, const AngularQuadrature& quad) {
    const int n = quad.size();
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
    for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) m(j, l) -= p(j, l) * quad.weight(l);
    return m;
}

}  // namespace

std::vector<double> apply_scattering(const PhaseFunction& p, const AngularQuadrature& quad,
                                     std::span<const double> values) {
    check_shape(p, quad);
    if (values.size() != static_cast<std::size_t>(quad.size()))
        throw ValidationError("apply_scattering: expected " + std::to_string(quad.size()) + " values, got " +
                              std::to_string(values.size()));
    const int n = quad.size();
    std::vector<double> out(n, 0.0);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += quad.weight(l) * p(j, l) * values[l];
        out[j] = s;
    }
    return out;
}

double anisotropy(const PhaseFunction& p, const AngularQuadrature& quad) {
    check_shape(p, quad);
    const int n = quad.size();
    std::vector<double> per_row(n, 0.0);
    for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) per_row[j] += quad.weight(l) * p(j, l) * quad.dot(j, l);
    const auto [lo, hi] = std::minmax_element(per_row.begin(), per_row.end());
    if (*hi - *lo > 1e-12)
        throw ValidationError("phase function is not rotation invariant on this quadrature (anisotropy spread " +
                              std::to_string(*hi - *lo) + ")");
    return per_row[0];
}

std::vector<double> solve_cell_problem(const PhaseFunction& p, const AngularQuadrature& quad, int axis) {
    check_shape(p, quad);
    if (axis < 0 || axis >= quad.dimension())
        throw ValidationError("cell problem axis " + std::to_string(axis) + " out of range");
    const int n = quad.size();

    // Bordered system: [(I - K) 1; w^T 0] [D; lambda] = [k.e; 0]. The
    // multiplier vanishes because <k.e> = 0.
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(n + 1, n + 1);
    sys.topLeftCorner(n, n) = transfer_matrix(p, quad);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    for (int j = 0; j < n; ++j) {
        sys(j, n) = 1.0;
        sys(n, j) = quad.weight(j);
        rhs(j) = quad.direction(j)[axis];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
    if (!lu.isInvertible()) throw ValidationError("cell problem is singular: phase function has theta_lower <= 0?");
    const Eigen::VectorXd sol = lu.solve(rhs);

    std::vector<double> d(sol.data(), sol.data() + n);
    const Eigen::VectorXd residual = transfer_matrix(p, quad) * sol.head(n) - rhs.head(n);
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += quad.weight(j) * d[j];
    if (residual.lpNorm<Eigen::Infinity>() > 1e-12 || std::abs(mean) > 1e-12)
        throw ValidationError("cell problem solve inaccurate: residual " +
                              std::to_string(residual.lpNorm<Eigen::Infinity>()) + ", mean " + std::to_string(mean));
    return d;
}

Eigen::MatrixXd diffusion_matrix(const PhaseFunction& p, const AngularQuadrature& quad) {
    const int d = quad.dimension();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    for (int jcol = 0; jcol < d; ++jcol) {
        const auto dj = solve_cell_problem(p, quad, jcol);
        for (int i = 0; i < d; ++i)
            for (int m = 0; m < quad.size(); ++m) a(i, jcol) += quad.weight(m) * quad.direction(m)[i] * dj[m];
    }
    return a;
}

}  // namespace nlrte
