#include "nlrte/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nlrte/angular.hpp"
#include "nlrte/error.hpp"

namespace nlrte {

namespace {

void check_axis(int n, double extent, const char* name) {
    if (n < 2)
        throw ValidationError(std::string("spatial grid needs at least 2 cells on axis ") + name + ", got " +
                              std::to_string(n));
    if (!(extent > 0.0) || !std::isfinite(extent))
        throw ValidationError(std::string("spatial grid extent on axis ") + name + " must be positive and finite");
}

}  // namespace

SpatialGrid::SpatialGrid(int nx, double extent) {
    check_axis(nx, extent, "x");
    dim_ = 1;
    n_ = {nx, 1};
    extent_ = {extent, 1.0};
    h_ = {extent / nx, 1.0};
}

SpatialGrid::SpatialGrid(int nx, int ny, double extent_x, double extent_y) {
    check_axis(nx, extent_x, "x");
    check_axis(ny, extent_y, "y");
    dim_ = 2;
    n_ = {nx, ny};
    extent_ = {extent_x, extent_y};
    h_ = {extent_x / nx, extent_y / ny};
}

EvolutionGrid::EvolutionGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ValidationError("evolution horizon must be positive");
    if (steps < 1) throw ValidationError("evolution grid needs at least one step");
}

PhaseSpaceField::PhaseSpaceField(const SpatialGrid& grid, int directions, double fill)
    : grid_(grid), nk_(directions), w_(grid.cell_count() * directions, fill) {
    if (directions < 1) throw ValidationError("phase-space field needs at least one direction");
}

DensityField::DensityField(const SpatialGrid& grid, const EvolutionGrid& evolution, double fill)
    : grid_(grid), evo_(evolution), g_((evolution.steps() + 1) * grid.cell_count(), fill) {}

std::vector<double> angular_mean_field(const PhaseSpaceField& w, const AngularQuadrature& quad) {
    if (w.directions() != quad.size())
        throw ValidationError("angular mean: field has " + std::to_string(w.directions()) +
                              " directions, quadrature has " + std::to_string(quad.size()));
    std::vector<double> mean(w.cell_count(), 0.0);
    const auto weights = quad.weights();
    for (std::size_t c = 0; c < mean.size(); ++c) {
        const auto row = w.cell(c);
        double s = 0.0;
        for (int j = 0; j < quad.size(); ++j) s += weights[j] * row[j];
        mean[c] = s;
    }
    return mean;
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ValidationError("max_abs_diff: size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace nlrte
