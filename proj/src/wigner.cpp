#include "nlrte/wigner.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <string>

#include <fftw3.h>

#include "nlrte/error.hpp"
#include "nlrte/log.hpp"

namespace nlrte {

namespace {

std::mutex plan_mutex;  // FFTW planning is not thread safe

// In-place complex DFT of fixed size; one instance per thread.
class Fft {
public:
    explicit Fft(int n) : n_(n), buf_(n) {
        std::lock_guard lock(plan_mutex);
        auto* p = reinterpret_cast<fftw_complex*>(buf_.data());
        fwd_ = fftw_plan_dft_1d(n, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_1d(n, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Fft() {
        std::lock_guard lock(plan_mutex);
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }
    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;

    std::vector<cplx>& data() { return buf_; }
    void forward() { fftw_execute(fwd_); }
    // Unnormalized inverse (sum with e^{+i...}).
    void backward() { fftw_execute(bwd_); }
    int size() const { return n_; }

private:
    int n_;
    std::vector<cplx> buf_;
    fftw_plan fwd_{};
    fftw_plan bwd_{};
};

// Angular wavenumber of DFT mode q on a period of length `period`.
double mode(int q, int n, double period) {
    const int s = q <= n / 2 ? q : q - n;
    return 2.0 * std::numbers::pi * s / period;
}

}  // namespace

ComplexField::ComplexField(int points, double extent_, cplx fill) : n(points), extent(extent_), psi(points, fill) {
    if (points < 2) throw ValidationError("complex field needs at least 2 points");
    if (!(extent_ > 0.0)) throw ValidationError("complex field extent must be positive");
}

double ComplexField::norm() const {
    double s = 0.0;
    for (const auto& v : psi) s += std::norm(v);
    return std::sqrt(h() * s);
}

std::vector<double> ComplexField::intensity() const {
    std::vector<double> out(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) out[i] = std::norm(psi[i]);
    return out;
}

double RandomMediumSpec::power_spectrum(double p) const {
    return sigma_v * sigma_v * std::exp(-0.5 * p * p) / std::sqrt(2.0 * std::numbers::pi);
}

const std::vector<double>& RandomSlab::at(double z) const {
    if (v.empty()) throw ValidationError("random slab has no profiles");
    const auto i = static_cast<std::size_t>(std::max(0.0, std::floor(z / slab_length)));
    return v[std::min(i, v.size() - 1)];
}

void WignerConfig::validate() const {
    if (!(epsilon > 0.0) || epsilon > 1.0) throw ValidationError("wigner epsilon must lie in (0, 1]");
    if (!(K >= 0.0)) throw ValidationError("absorption strength K must be >= 0");
    if (ensemble < 1) throw ValidationError("ensemble size must be >= 1");
    if (!(dz > 0.0)) throw ValidationError("wigner step dz must be positive");
}

double WignerConfig::smoothing_width() const { return smoothing >= 0.0 ? smoothing : std::sqrt(epsilon); }

RandomSlab sample_random_slab(const RandomMediumSpec& spec, double epsilon, int n, double extent, double z_extent,
                              std::mt19937_64& rng) {
    if (!(spec.sigma_v >= 0.0)) throw ValidationError("sigma_v must be >= 0");
    if (!(z_extent > 0.0)) throw ValidationError("slab z extent must be positive");
    RandomSlab slab;
    slab.slab_length = spec.slab_length(epsilon);
    const int count = std::max(1, static_cast<int>(std::ceil(z_extent / slab.slab_length - 1e-12)));
    slab.v.assign(count, std::vector<double>(n, 0.0));
    if (spec.sigma_v == 0.0) return slab;

    // Spectral synthesis in fast units: V = IFFT(sqrt(N R_hat(p) dp) FFT(white)) / N.
    const double period = extent / epsilon;
    const double dp = 2.0 * std::numbers::pi / period;
    std::vector<double> shape(n);
    for (int q = 0; q < n; ++q) shape[q] = std::sqrt(n * spec.power_spectrum(mode(q, n, period)) * dp);
    Fft fft(n);
    std::normal_distribution<double> n01;
    for (auto& prof : slab.v) {
        auto& b = fft.data();
        for (int i = 0; i < n; ++i) b[i] = n01(rng);
        fft.forward();
        for (int q = 0; q < n; ++q) b[q] *= shape[q];
        fft.backward();
        for (int i = 0; i < n; ++i) prof[i] = b[i].real() / n;
    }
    return slab;
}

RandomSlab sample_random_slab(const RandomMediumSpec& spec, double epsilon, int n, double extent, double z_extent) {
    std::mt19937_64 rng(spec.seed);
    return sample_random_slab(spec, epsilon, n, extent, z_extent, rng);
}

namespace {

void free_half_step(Fft& fft, ComplexField& psi, double epsilon, double dz) {
    auto& b = fft.data();
    std::copy(psi.psi.begin(), psi.psi.end(), b.begin());
    fft.forward();
    for (int q = 0; q < psi.n; ++q) {
        const double xi = mode(q, psi.n, psi.extent);
        b[q] *= std::polar(1.0 / psi.n, -epsilon * xi * xi * dz / 4.0);
    }
    fft.backward();
    std::copy(b.begin(), b.end(), psi.psi.begin());
}

void local_step(ComplexField& psi, std::span<const double> V, std::span<const double> K, double epsilon, double dz) {
    const double c = dz / std::sqrt(epsilon);
    for (int i = 0; i < psi.n; ++i) {
        double amp = 1.0;
        if (!K.empty() && K[i] > 0.0) amp = 1.0 / std::sqrt(1.0 + K[i] * std::norm(psi.psi[i]) * dz);
        const double phase = V.empty() ? 0.0 : -V[i] * c;
        psi.psi[i] *= std::polar(amp, phase);
    }
}

void step_with(Fft& fft, ComplexField& psi, std::span<const double> V, std::span<const double> K, double epsilon,
               double dz) {
    free_half_step(fft, psi, epsilon, dz);
    local_step(psi, V, K, epsilon, dz);
    free_half_step(fft, psi, epsilon, dz);
}

}  // namespace

void split_step_propagate(ComplexField& psi, std::span<const double> V, std::span<const double> K, double epsilon,
                          double dz) {
    if (!V.empty() && V.size() != psi.psi.size()) throw ValidationError("potential does not match the field grid");
    if (!K.empty() && K.size() != psi.psi.size()) throw ValidationError("absorption does not match the field grid");
    Fft fft(psi.n);
    step_with(fft, psi, V, K, epsilon, dz);
}

void propagate(ComplexField& psi, const RandomSlab& slab, const WignerConfig& config, double z0, double z_end) {
    config.validate();
    if (z_end < z0) throw ValidationError("propagate: z_end before z0");
    const int steps = static_cast<int>(std::ceil((z_end - z0) / config.dz - 1e-9));
    if (steps == 0) return;
    const double dz = (z_end - z0) / steps;
    Fft fft(psi.n);
    std::vector<double> K(psi.n, config.K);
    const bool absorbing = config.K > 0.0 || static_cast<bool>(config.K_field);
    for (int s = 0; s < steps; ++s) {
        const double zm = z0 + (s + 0.5) * dz;
        if (config.K_field)
            for (int i = 0; i < psi.n; ++i) K[i] = config.K_field(zm, psi.x(i));
        std::span<const double> V;
        if (!slab.v.empty()) V = slab.at(zm);
        step_with(fft, psi, V, absorbing ? std::span<const double>(K) : std::span<const double>{}, config.epsilon, dz);
    }
}

WignerGrid wigner_transform(const ComplexField& psi, double epsilon, double smoothing) {
    const int n = psi.n;
    const double h = psi.h();
    WignerGrid w;
    w.nx = n;
    w.nk = n;
    w.x.resize(n);
    w.k.resize(n);
    w.w.assign(static_cast<std::size_t>(n) * n, 0.0);
    const double dk = std::numbers::pi * epsilon / (n * h);
    for (int i = 0; i < n; ++i) {
        w.x[i] = psi.x(i);
        w.k[i] = (i - n / 2) * dk;
    }
    const double scale = h / (std::numbers::pi * epsilon);
    Fft fft(n);
    auto& b = fft.data();
    for (int ix = 0; ix < n; ++ix) {
        // Zero extension outside the window; offset n/2 has no partner and is dropped.
        for (int m = 0; m < n; ++m) {
            const int s = m < n / 2 ? m : m - n;
            const int a = ix - s, c = ix + s;
            b[m] = (2 * m == n || a < 0 || a >= n || c < 0 || c >= n) ? std::complex<double>(0.0)
                                                                      : psi.psi[a] * std::conj(psi.psi[c]);
        }
        fft.backward();  // W_p = sum_m e^{2 pi i p m / n} a_m
        for (int ik = 0; ik < n; ++ik) {
            const int p = ((ik - n / 2) % n + n) % n;
            w.w[static_cast<std::size_t>(ix) * n + ik] = scale * b[p].real();
        }
    }
    if (smoothing > 0.0) return smooth_wigner(w, smoothing, smoothing);
    return w;
}

WignerGrid smooth_wigner(const WignerGrid& w, double width_x, double width_k) {
    // Periodic Gaussian filter along each axis.
    auto filter = [](int n, double width_cells) {
        std::vector<double> k(n, 0.0);
        if (!(width_cells > 0.0)) {
            k[0] = 1.0;
            return k;
        }
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            const int d = std::min(i, n - i);
            k[i] = std::exp(-0.5 * d * d / (width_cells * width_cells));
            s += k[i];
        }
        for (double& v : k) v /= s;
        return k;
    };
    const double hx = w.x.size() > 1 ? w.x[1] - w.x[0] : 1.0;
    const auto fx = filter(w.nx, width_x / hx);
    const auto fk = filter(w.nk, width_k / w.dk());
    WignerGrid tmp = w, out = w;
    for (int ix = 0; ix < w.nx; ++ix)
        for (int ik = 0; ik < w.nk; ++ik) {
            double acc = 0.0;
            for (int t = 0; t < w.nk; ++t)
                if (fk[t] > 1e-16) acc += fk[t] * w(ix, (ik + t) % w.nk);
            tmp.w[static_cast<std::size_t>(ix) * w.nk + ik] = acc;
        }
    for (int ix = 0; ix < w.nx; ++ix)
        for (int ik = 0; ik < w.nk; ++ik) {
            double acc = 0.0;
            for (int t = 0; t < w.nx; ++t)
                if (fx[t] > 1e-16) acc += fx[t] * tmp(( ix + t) % w.nx, ik);
            out.w[static_cast<std::size_t>(ix) * w.nk + ik] = acc;
        }
    return out;
}

InitialSampler counterpropagating_wave(std::vector<double> envelope, double extent, double epsilon) {
    return [envelope = std::move(envelope), extent, epsilon](std::mt19937_64& rng) {
        const int n = static_cast<int>(envelope.size());
        ComplexField f(n, extent);
        std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
        const cplx shift = std::polar(1.0, u(rng));
        for (int i = 0; i < n; ++i) {
            const double x = f.x(i);
            f.psi[i] = envelope[i] * (std::polar(1.0, x / epsilon) + shift * std::polar(1.0, -x / epsilon)) /
                       std::sqrt(2.0);
        }
        return f;
    };
}

std::uint64_t realization_seed(std::uint64_t master, int index) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(index), 0x5eedu};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

EnsembleResult ensemble_density(const RandomMediumSpec& spec, const WignerConfig& config, const InitialSampler& psi0,
                                std::vector<double> z_targets, bool snapshots) {
    config.validate();
    if (z_targets.empty()) throw ValidationError("ensemble needs at least one z target");
    std::sort(z_targets.begin(), z_targets.end());
    if (z_targets.front() < 0.0) throw ValidationError("z targets must be >= 0");
    if (config.dz * spec.sigma_v / std::sqrt(config.epsilon) > 0.5)
        warn("split step: dz sigma_v / sqrt(eps) = " + std::to_string(config.dz * spec.sigma_v / std::sqrt(config.epsilon)) +
             " exceeds 0.5");
    const int N = config.ensemble;
    const int nt = static_cast<int>(z_targets.size());

    EnsembleResult res;
    res.z = z_targets;
    res.realizations = N;
    {
        std::mt19937_64 probe(realization_seed(spec.seed, 0));
        const auto f = psi0(probe);
        res.extent = f.extent;
        res.mean.assign(nt, std::vector<double>(f.n, 0.0));
    }
    const int npts = static_cast<int>(res.mean[0].size());
    std::vector<std::vector<double>> m2(nt, std::vector<double>(npts, 0.0));
    std::vector<WignerGrid> wsum;

    // Realizations run in parallel chunks; the reduction walks them in index
    // order so results do not depend on the worker count.
    const int workers = worker_count();
    const int chunk = std::max(1, std::min(N, 4 * workers));
    std::vector<std::vector<std::vector<double>>> dens(chunk);
    std::vector<std::vector<WignerGrid>> wig(chunk);
    std::vector<std::exception_ptr> errors(chunk);
    long long seen = 0;
    for (int start = 0; start < N; start += chunk) {
        const int count = std::min(chunk, N - start);
#pragma omp parallel for schedule(dynamic) num_threads(workers) if (workers > 1)
        for (int slot = 0; slot < count; ++slot) {
            try {
                std::mt19937_64 rng(realization_seed(spec.seed, start + slot));
                ComplexField psi = psi0(rng);
                if (psi.n != npts) throw ValidationError("initial sampler changed the grid size");
                const RandomSlab slab = sample_random_slab(spec, config.epsilon, psi.n, psi.extent,
                                                           std::max(z_targets.back(), config.dz), rng);
                double z = 0.0;
                dens[slot].assign(nt, {});
                wig[slot].clear();
                for (int t = 0; t < nt; ++t) {
                    propagate(psi, slab, config, z, z_targets[t]);
                    z = z_targets[t];
                    dens[slot][t] = psi.intensity();
                    if (snapshots) wig[slot].push_back(wigner_transform(psi, config.epsilon, 0.0));
                }
            } catch (...) {
                errors[slot] = std::current_exception();
            }
        }
        for (int slot = 0; slot < count; ++slot)
            if (errors[slot]) std::rethrow_exception(errors[slot]);
        for (int slot = 0; slot < count; ++slot) {
            ++seen;
            for (int t = 0; t < nt; ++t)
                for (int i = 0; i < npts; ++i) {
                    // Welford update of mean and squared deviations.
                    const double x = dens[slot][t][i];
                    const double d = x - res.mean[t][i];
                    res.mean[t][i] += d / seen;
                    m2[t][i] += d * (x - res.mean[t][i]);
                }
            if (snapshots) {
                if (wsum.empty())
                    wsum = wig[slot];
                else
                    for (int t = 0; t < nt; ++t)
                        for (std::size_t i = 0; i < wsum[t].w.size(); ++i) wsum[t].w[i] += wig[slot][t].w[i];
            }
        }
    }

    res.stderr_.assign(nt, std::vector<double>(npts, 0.0));
    if (N > 1)
        for (int t = 0; t < nt; ++t)
            for (int i = 0; i < npts; ++i) res.stderr_[t][i] = std::sqrt(m2[t][i] / (N - 1) / N);
    if (snapshots) {
        const double s = config.smoothing_width();
        for (auto& w : wsum) {
            for (double& v : w.w) v /= N;
            res.snapshots.push_back(s > 0.0 ? smooth_wigner(w, s, s) : w);
        }
    }
    return res;
}

EnsembleResult ensemble_density(const RandomMediumSpec& spec, const WignerConfig& config, const ComplexField& psi0,
                                std::vector<double> z_targets, bool snapshots) {
    return ensemble_density(
        spec, config, [&psi0](std::mt19937_64&) { return psi0; }, std::move(z_targets), snapshots);
}

TransportProblem matched_transport(const RandomMediumSpec& spec, const WignerConfig& config,
                                   const std::vector<double>& envelope, double extent, double horizon, int steps,
                                   int refine) {
    if (refine < 1) throw ValidationError("refine factor must be >= 1");
    const int n = static_cast<int>(envelope.size());
    TransportProblem p;
    p.grid = SpatialGrid(n * refine, extent);
    p.evolution = EvolutionGrid(horizon, steps);
    p.quadrature = build_quadrature(1, 2);
    const double fwd = spec.power_spectrum(0.0);
    const double back = spec.power_spectrum(2.0);
    if (spec.sigma_v > 0.0) {
        p.sigma_s = 2.0 * std::numbers::pi * (fwd + back);
        p.phase = make_tabulated([&](double c) { return c > 0.0 ? fwd : back; }, p.quadrature);
    } else {
        // No medium: a negligible isotropic rate keeps the problem valid.
        p.sigma_s = 1e-300;
        p.phase = make_isotropic(p.quadrature);
    }
    p.epsilon = 1.0;
    if (config.K_field)
        p.absorption = AbsorptionModel::from_function(p.grid, p.evolution, 1, [&](int l, double z, double x, double) {
            return l == 0 ? 0.0 : config.K_field(z, x);
        });
    else
        p.absorption = AbsorptionModel::constant(p.grid, p.evolution, {0.0, config.K});
    p.initial.resize(p.grid.cell_count());
    for (int i = 0; i < n; ++i)
        for (int r = 0; r < refine; ++r) {
            // Linear interpolation of the envelope to the refined centers.
            const double x = p.grid.center(0, i * refine + r);
            const double s = x / (extent / n) - 0.5;
            const int i0 = std::clamp(static_cast<int>(std::floor(s)), 0, n - 1);
            const int i1 = std::min(i0 + 1, n - 1);
            const double t = std::clamp(s - i0, 0.0, 1.0);
            const double a = (1.0 - t) * envelope[i0] + t * envelope[i1];
            p.initial[i * refine + r] = 0.5 * a * a;
        }
    return p;
}

ComparisonReport compare_with_transport(const EnsembleResult& ensemble, const TransportProblem& problem,
                                        double threshold, const SolverOptions& options) {
    const int n = ensemble.mean.empty() ? 0 : static_cast<int>(ensemble.mean[0].size());
    if (n == 0) throw ValidationError("ensemble is empty");
    const int nt = problem.grid.cells(0);
    if (problem.grid.dimension() != 1 || nt % n != 0 || std::abs(problem.grid.extent(0) - ensemble.extent) > 1e-12)
        throw ValidationError("transport grid must refine the wave grid by an integer factor");
    const int refine = nt / n;
    SolverOptions opt = options;
    opt.keep_history = false;
    const auto sol = solve_semilinear_march(problem, opt);

    ComparisonReport rep;
    rep.threshold = threshold;
    for (std::size_t t = 0; t < ensemble.z.size(); ++t) {
        const double z = ensemble.z[t];
        const int iz = static_cast<int>(std::lround(z / problem.evolution.step()));
        if (iz < 0 || iz > problem.evolution.steps() || std::abs(problem.evolution.level(iz) - z) > 1e-9)
            throw ValidationError("z target " + std::to_string(z) + " is not a transport level");
        std::vector<double> td(n, 0.0);
        for (int i = 0; i < n; ++i) {
            for (int r = 0; r < refine; ++r) td[i] += sol.density(iz, i * refine + r);
            td[i] /= refine;
        }
        double num = 0.0, den = 0.0;
        for (int i = 0; i < n; ++i) {
            num += std::abs(ensemble.mean[t][i] - td[i]);
            den += std::abs(td[i]);
        }
        const double d = den > 0.0 ? num / den : num;
        rep.z.push_back(z);
        rep.discrepancy.push_back(d);
        rep.transport_density.push_back(std::move(td));
        rep.max_discrepancy = std::max(rep.max_discrepancy, d);
    }
    rep.pass = rep.max_discrepancy <= threshold;
    return rep;
}

}  // namespace nlrte
