#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace nlrte {

class AngularQuadrature;

// Uniform cell-centered grid on the box (0, extent_x) x (0, extent_y).
// Cells are numbered with x fastest: cell = iy * nx + ix.
class SpatialGrid {
public:
    SpatialGrid() = default;
    // 1-D grid on (0, extent).
    SpatialGrid(int nx, double extent = 1.0);
    // 2-D grid on (0, extent_x) x (0, extent_y).
    SpatialGrid(int nx, int ny, double extent_x = 1.0, double extent_y = 1.0);

    int dimension() const noexcept { return dim_; }
    int cells(int axis) const { return n_.at(axis); }
    double extent(int axis) const { return extent_.at(axis); }
    double width(int axis) const { return h_.at(axis); }
    std::size_t cell_count() const noexcept {
        return static_cast<std::size_t>(n_[0]) * static_cast<std::size_t>(n_[1]);
    }
    double center(int axis, int i) const { return (i + 0.5) * h_.at(axis); }
    std::size_t index(int ix, int iy = 0) const noexcept {
        return static_cast<std::size_t>(iy) * n_[0] + ix;
    }
    // Cell volume (length in 1-D, area in 2-D).
    double volume() const noexcept { return dim_ == 1 ? h_[0] : h_[0] * h_[1]; }

    friend bool operator==(const SpatialGrid&, const SpatialGrid&) = default;

private:
    int dim_ = 1;
    std::array<int, 2> n_{2, 1};
    std::array<double, 2> extent_{1.0, 1.0};
    std::array<double, 2> h_{0.5, 1.0};
};

// Uniform steps z_n = n * dz, n = 0..steps, on [0, horizon].
class EvolutionGrid {
public:
    EvolutionGrid() = default;
    EvolutionGrid(double horizon, int steps);

    double horizon() const noexcept { return horizon_; }
    int steps() const noexcept { return steps_; }
    double step() const noexcept { return horizon_ / steps_; }
    double level(int n) const noexcept { return n * step(); }

    friend bool operator==(const EvolutionGrid&, const EvolutionGrid&) = default;

private:
    double horizon_ = 1.0;
    int steps_ = 1;
};

// Intensity on space x angle at one z-level. Angle is the fastest index.
class PhaseSpaceField {
public:
    PhaseSpaceField() = default;
    PhaseSpaceField(const SpatialGrid& grid, int directions, double fill = 0.0);

    const SpatialGrid& grid() const noexcept { return grid_; }
    int directions() const noexcept { return nk_; }
    std::size_t cell_count() const noexcept { return grid_.cell_count(); }

    double& operator()(std::size_t cell, int dir) { return w_[cell * nk_ + dir]; }
    double operator()(std::size_t cell, int dir) const { return w_[cell * nk_ + dir]; }

    std::span<double> cell(std::size_t c) { return {w_.data() + c * nk_, static_cast<std::size_t>(nk_)}; }
    std::span<const double> cell(std::size_t c) const {
        return {w_.data() + c * nk_, static_cast<std::size_t>(nk_)};
    }
    std::vector<double>& values() noexcept { return w_; }
    const std::vector<double>& values() const noexcept { return w_; }

private:
    SpatialGrid grid_;
    int nk_ = 0;
    std::vector<double> w_;
};

// Scalar g[iz][cell] on the space-z grid, iz = 0..steps.
class DensityField {
public:
    DensityField() = default;
    DensityField(const SpatialGrid& grid, const EvolutionGrid& evolution, double fill = 0.0);

    const SpatialGrid& grid() const noexcept { return grid_; }
    const EvolutionGrid& evolution() const noexcept { return evo_; }
    int levels() const noexcept { return evo_.steps() + 1; }
    std::size_t cell_count() const noexcept { return grid_.cell_count(); }

    double& operator()(int iz, std::size_t cell) { return g_[iz * grid_.cell_count() + cell]; }
    double operator()(int iz, std::size_t cell) const { return g_[iz * grid_.cell_count() + cell]; }

    std::span<double> level(int iz) { return {g_.data() + iz * grid_.cell_count(), grid_.cell_count()}; }
    std::span<const double> level(int iz) const {
        return {g_.data() + iz * grid_.cell_count(), grid_.cell_count()};
    }
    std::vector<double>& values() noexcept { return g_; }
    const std::vector<double>& values() const noexcept { return g_; }

private:
    SpatialGrid grid_;
    EvolutionGrid evo_;
    std::vector<double> g_;
};

// Per-cell angular mean <W> = sum_j w_j W_j.
std::vector<double> angular_mean_field(const PhaseSpaceField& w, const AngularQuadrature& quad);

double max_abs(std::span<const double> v);
double max_abs_diff(std::span<const double> a, std::span<const double> b);

}  // namespace nlrte
