#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace nlrte {

// Discrete ordinates on S^{d-1}, d in {1, 2}.
//   d = 1: directions {+1, -1}, weights {1, 1}, measure 2.
//   d = 2: angles 2*pi*(j + 1/2)/n, weights 2*pi/n, measure 2*pi.
class AngularQuadrature {
public:
    AngularQuadrature() = default;

    int dimension() const noexcept { return dim_; }
    int size() const noexcept { return static_cast<int>(weights_.size()); }
    const std::array<double, 2>& direction(int j) const { return dirs_.at(j); }
    double weight(int j) const { return weights_.at(j); }
    std::span<const double> weights() const noexcept { return weights_; }
    // nu_{d-1}, the total measure of the sphere.
    double measure() const noexcept { return measure_; }
    double dot(int j, int l) const {
        return dirs_[j][0] * dirs_[l][0] + dirs_[j][1] * dirs_[l][1];
    }

    friend AngularQuadrature build_quadrature(int dimension, int n_angles);

private:
    int dim_ = 0;
    std::vector<std::array<double, 2>> dirs_;
    std::vector<double> weights_;
    double measure_ = 0.0;
};

AngularQuadrature build_quadrature(int dimension, int n_angles);

// Rotation-invariant scattering kernel p(k . k') sampled on a quadrature.
// The stored matrix satisfies sum_l w_l p(k_j, k_l) = 1 for every j.
class PhaseFunction {
public:
    enum class Family { isotropic, linear_anisotropic, tabulated };

    Family family() const noexcept { return family_; }
    int size() const noexcept { return static_cast<int>(kernel_.rows()); }
    double operator()(int j, int l) const { return kernel_(j, l); }
    const Eigen::MatrixXd& kernel() const noexcept { return kernel_; }
    double theta_lower() const noexcept { return theta_lower_; }
    double theta_upper() const noexcept { return theta_upper_; }
    // Nominal anisotropy for the analytic families; measured value for tabulated.
    double g() const noexcept { return g_; }

    friend PhaseFunction make_isotropic(const AngularQuadrature& quad);
    friend PhaseFunction make_linear_anisotropic(double g, const AngularQuadrature& quad);
    friend PhaseFunction make_tabulated(const std::function<double(double)>& p_of_cosine,
                                        const AngularQuadrature& quad);

private:
    void cache_bounds();

    Family family_ = Family::isotropic;
    Eigen::MatrixXd kernel_;
    double theta_lower_ = 0.0;
    double theta_upper_ = 0.0;
    double g_ = 0.0;
};

PhaseFunction make_isotropic(const AngularQuadrature& quad);

// d = 2: p = (1 + 2 g cos)/(2 pi), |g| < 1/2.
// d = 1: p(+,+) = p(-,-) = (1 + g)/2, p(+,-) = (1 - g)/2, |g| < 1.
PhaseFunction make_linear_anisotropic(double g, const AngularQuadrature& quad);

// Arbitrary positive kernel given as a function of k . k'. Rows are
// renormalized so the discrete normalization holds exactly.
PhaseFunction make_tabulated(const std::function<double(double)>& p_of_cosine,
                             const AngularQuadrature& quad);

// (K u)_j = sum_l w_l p(k_j, k_l) u_l
std::vector<double> apply_scattering(const PhaseFunction& p, const AngularQuadrature& quad,
                                     std::span<const double> values);

// sum_l w_l p(k_j, k_l) (k_j . k_l); checked j-independent to 1e-12.
double anisotropy(const PhaseFunction& p, const AngularQuadrature& quad);

// Solves (I - K) D = k . e_axis with sum_j w_j D_j = 0.
std::vector<double> solve_cell_problem(const PhaseFunction& p, const AngularQuadrature& quad, int axis);

// A_ij = sum_m w_m (k_m . e_i) D_j(k_m), with the unnormalized angular
// measure. For rotation-invariant kernels A = (nu/d)/(1 - g) I; the
// diffusion flux coefficient is A/(nu * Sigma_s).
Eigen::MatrixXd diffusion_matrix(const PhaseFunction& p, const AngularQuadrature& quad);

}  // namespace nlrte
