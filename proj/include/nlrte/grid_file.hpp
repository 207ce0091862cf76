#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlrte/core.hpp"

namespace nlrte {

// NLRTE1 binary grid format:
//   6 bytes  "NLRTE1"
//   u32      rank
//   u32      dims[rank]
//   f64      payload[prod(dims)], row-major
// All integers and doubles little-endian.
inline constexpr char kGridMagic[6] = {'N', 'L', 'R', 'T', 'E', '1'};

class GridFileError : public std::runtime_error {
public:
    enum class Kind { io, bad_magic, truncated, dimension_overflow, non_finite };

    GridFileError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct GridArray {
    std::vector<std::uint32_t> dims;
    std::vector<double> data;

    std::size_t size() const;
    friend bool operator==(const GridArray&, const GridArray&) = default;
};

void write_grid_file(const GridArray& array, const std::filesystem::path& path);
GridArray read_grid_file(const std::filesystem::path& path);

// Shapes: phase-space (nx[, ny], nk); density (nz + 1, nx[, ny]).
GridArray to_grid_array(const PhaseSpaceField& field);
GridArray to_grid_array(const DensityField& field);
void write_grid_file(const PhaseSpaceField& field, const std::filesystem::path& path);
void write_grid_file(const DensityField& field, const std::filesystem::path& path);

PhaseSpaceField phase_space_from_array(const GridArray& array, const SpatialGrid& grid);
DensityField density_from_array(const GridArray& array, const SpatialGrid& grid, const EvolutionGrid& evo);

}  // namespace nlrte
