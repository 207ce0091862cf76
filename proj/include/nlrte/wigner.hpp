#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "nlrte/transport.hpp"

namespace nlrte {

using cplx = std::complex<double>;

// Periodic transverse field on (0, extent) sampled at cell centers (i + 1/2) h.
struct ComplexField {
    int n = 0;
    double extent = 1.0;
    std::vector<cplx> psi;

    ComplexField() = default;
    ComplexField(int points, double extent_, cplx fill = 0.0);

    double h() const { return extent / n; }
    double x(int i) const { return (i + 0.5) * h(); }
    double norm() const;  // sqrt(h sum |psi|^2)
    std::vector<double> intensity() const;
};

// Stationary Gaussian random potential V(x / eps) with covariance
// sigma_v^2 exp(-y^2 / 2) in fast units y = x / eps.
struct RandomMediumSpec {
    double sigma_v = 0.0;
    // Length in z (slow units) of each independent slab; <= 0 selects eps.
    double decorrelation = -1.0;
    std::uint64_t seed = 0;

    // R_hat(p), normalized so that integral R_hat dp = sigma_v^2.
    double power_spectrum(double p) const;
    double slab_length(double epsilon) const { return decorrelation > 0.0 ? decorrelation : epsilon; }
};

struct RandomSlab {
    double slab_length = 0.0;
    std::vector<std::vector<double>> v;  // one transverse profile per slab

    const std::vector<double>& at(double z) const;
};

struct WignerConfig {
    double epsilon = 0.05;
    double K = 0.0;  // quadratic absorption strength
    // Optional K(z, x) overriding the constant.
    std::function<double(double, double)> K_field;
    int ensemble = 1;
    double smoothing = -1.0;  // Husimi width in x and k; < 0 selects sqrt(eps)
    double dz = 1e-2;

    void validate() const;
    double smoothing_width() const;
};

// Draws the slabs covering [0, z_extent] on a grid of n points over extent.
RandomSlab sample_random_slab(const RandomMediumSpec& spec, double epsilon, int n, double extent, double z_extent,
                              std::mt19937_64& rng);
RandomSlab sample_random_slab(const RandomMediumSpec& spec, double epsilon, int n, double extent, double z_extent);

// One Strang step: half free step, exact local potential + absorption step,
// half free step.  V and K are sampled on the field's grid.
void split_step_propagate(ComplexField& psi, std::span<const double> V, std::span<const double> K, double epsilon,
                          double dz);

// Propagates to z_end through a slab realization (V = 0 when empty).
void propagate(ComplexField& psi, const RandomSlab& slab, const WignerConfig& config, double z0, double z_end);

struct WignerGrid {
    int nx = 0;
    int nk = 0;
    std::vector<double> x;
    std::vector<double> k;  // ascending, spacing pi eps / (n h)
    std::vector<double> w;  // w[ix * nk + ik]

    double dk() const { return k.size() > 1 ? k[1] - k[0] : 0.0; }
    double operator()(int ix, int ik) const { return w[static_cast<std::size_t>(ix) * nk + ik]; }
};

// Discrete Wigner transform; smoothing <= 0 skips the Gaussian (x, k) filter.
WignerGrid wigner_transform(const ComplexField& psi, double epsilon, double smoothing = 0.0);
WignerGrid smooth_wigner(const WignerGrid& w, double width_x, double width_k);

using InitialSampler = std::function<ComplexField(std::mt19937_64&)>;

// psi_0 = a(x) (e^{ix/eps} + e^{i theta} e^{-ix/eps}) / sqrt(2), theta uniform.
InitialSampler counterpropagating_wave(std::vector<double> envelope, double extent, double epsilon);

struct EnsembleResult {
    std::vector<double> z;
    std::vector<std::vector<double>> mean;    // E|psi|^2 per target
    std::vector<std::vector<double>> stderr_; // standard error per target
    std::vector<WignerGrid> snapshots;        // smoothed mean Wigner per target
    int realizations = 0;
    double extent = 0.0;
};

std::uint64_t realization_seed(std::uint64_t master, int index);

EnsembleResult ensemble_density(const RandomMediumSpec& spec, const WignerConfig& config, const InitialSampler& psi0,
                                std::vector<double> z_targets, bool snapshots = false);
EnsembleResult ensemble_density(const RandomMediumSpec& spec, const WignerConfig& config, const ComplexField& psi0,
                                std::vector<double> z_targets, bool snapshots = false);

// Transport problem matched to the wave ensemble: d = 1, eps = 1,
// backscattering 2 pi R_hat(2), Sigma_{a,1} = K, f = a^2 / 2.
TransportProblem matched_transport(const RandomMediumSpec& spec, const WignerConfig& config,
                                   const std::vector<double>& envelope, double extent, double horizon, int steps,
                                   int refine = 1);

struct ComparisonReport {
    std::vector<double> z;
    std::vector<double> discrepancy;  // relative L1 per target
    std::vector<std::vector<double>> transport_density;
    double max_discrepancy = 0.0;
    double threshold = 0.15;
    bool pass = false;
};

ComparisonReport compare_with_transport(const EnsembleResult& ensemble, const TransportProblem& problem,
                                        double threshold = 0.15, const SolverOptions& options = {});

}  // namespace nlrte
