#include "nlrte/grid_file.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace nlrte {

namespace {

constexpr std::uint32_t kMaxRank = 16;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f64(std::string& out, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

double get_f64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace

std::size_t GridArray::size() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

void write_grid_file(const GridArray& array, const std::filesystem::path& path) {
    if (array.size() != array.data.size())
        throw GridFileError(GridFileError::Kind::dimension_overflow,
                            "grid dims do not match payload size for " + path.string());
    for (double v : array.data)
        if (!std::isfinite(v))
            throw GridFileError(GridFileError::Kind::non_finite,
                                "refusing to write non-finite value to " + path.string());

    std::string buf;
    buf.reserve(6 + 4 + 4 * array.dims.size() + 8 * array.data.size());
    buf.append(kGridMagic, sizeof(kGridMagic));
    put_u32(buf, static_cast<std::uint32_t>(array.dims.size()));
    for (auto d : array.dims) put_u32(buf, d);
    for (double v : array.data) put_f64(buf, v);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw GridFileError(GridFileError::Kind::io, "cannot open " + path.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw GridFileError(GridFileError::Kind::io, "write failed for " + path.string());
}

GridArray read_grid_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw GridFileError(GridFileError::Kind::io, "cannot open " + path.string());
    const std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
    const std::size_t n = raw.size();

    if (n < 6 || std::memcmp(raw.data(), kGridMagic, 6) != 0)
        throw GridFileError(GridFileError::Kind::bad_magic, path.string() + ": not an NLRTE1 grid file");
    if (n < 10) throw GridFileError(GridFileError::Kind::truncated, path.string() + ": truncated header");

    GridArray array;
    const std::uint32_t rank = get_u32(bytes + 6);
    if (rank > kMaxRank)
        throw GridFileError(GridFileError::Kind::dimension_overflow,
                            path.string() + ": rank " + std::to_string(rank) + " exceeds limit");
    std::size_t pos = 10;
    if (n < pos + 4ull * rank) throw GridFileError(GridFileError::Kind::truncated, path.string() + ": truncated dims");

    std::uint64_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
        const std::uint32_t d = get_u32(bytes + pos);
        pos += 4;
        if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / 8 / d)
            throw GridFileError(GridFileError::Kind::dimension_overflow, path.string() + ": dimension product overflows");
        count *= d;
        array.dims.push_back(d);
    }
    if (count > (n - pos) / 8)
        throw GridFileError(GridFileError::Kind::truncated,
                            path.string() + ": payload truncated (expected " + std::to_string(count) + " values)");
    array.data.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) array.data[i] = get_f64(bytes + pos + 8 * i);
    return array;
}

GridArray to_grid_array(const PhaseSpaceField& field) {
    GridArray a;
    const auto& g = field.grid();
    // Cells are stored x fastest; row-major (ny, nx, nk) keeps the payload order.
    if (g.dimension() == 2) a.dims.push_back(static_cast<std::uint32_t>(g.cells(1)));
    a.dims.push_back(static_cast<std::uint32_t>(g.cells(0)));
    a.dims.push_back(static_cast<std::uint32_t>(field.directions()));
    a.data = field.values();
    return a;
}

GridArray to_grid_array(const DensityField& field) {
    GridArray a;
    const auto& g = field.grid();
    a.dims.push_back(static_cast<std::uint32_t>(field.levels()));
    if (g.dimension() == 2) a.dims.push_back(static_cast<std::uint32_t>(g.cells(1)));
    a.dims.push_back(static_cast<std::uint32_t>(g.cells(0)));
    a.data = field.values();
    return a;
}

void write_grid_file(const PhaseSpaceField& field, const std::filesystem::path& path) {
    write_grid_file(to_grid_array(field), path);
}

void write_grid_file(const DensityField& field, const std::filesystem::path& path) {
    write_grid_file(to_grid_array(field), path);
}

PhaseSpaceField phase_space_from_array(const GridArray& array, const SpatialGrid& grid) {
    const std::size_t expect_rank = grid.dimension() == 2 ? 3 : 2;
    if (array.dims.size() != expect_rank || array.size() % grid.cell_count() != 0 ||
        array.size() / grid.cell_count() != array.dims.back())
        throw GridFileError(GridFileError::Kind::dimension_overflow, "grid array shape does not match spatial grid");
    PhaseSpaceField f(grid, static_cast<int>(array.dims.back()));
    f.values() = array.data;
    return f;
}

DensityField density_from_array(const GridArray& array, const SpatialGrid& grid, const EvolutionGrid& evo) {
    DensityField f(grid, evo);
    const std::size_t expect_rank = grid.dimension() == 2 ? 3 : 2;
    if (array.dims.size() != expect_rank || array.data.size() != f.values().size())
        throw GridFileError(GridFileError::Kind::dimension_overflow, "grid array shape does not match density grid");
    f.values() = array.data;
    return f;
}

}  // namespace nlrte
