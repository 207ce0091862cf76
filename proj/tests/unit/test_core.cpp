#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "nlrte/angular.hpp"
#include "nlrte/core.hpp"
#include "nlrte/error.hpp"
#include "nlrte/grid_file.hpp"
#include "nlrte/manifest.hpp"
#include "nlrte/table.hpp"

using namespace nlrte;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / "nlrte_test_core";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("grids") {
    SpatialGrid g(4, 2.0);
    CHECK(g.dimension() == 1);
    CHECK(g.width(0) == doctest::Approx(0.5));
    CHECK(g.center(0, 0) == doctest::Approx(0.25));
    SpatialGrid g2(4, 3, 1.0, 3.0);
    CHECK(g2.cell_count() == 12);
    CHECK(g2.index(1, 2) == 9);
    CHECK(g2.volume() == doctest::Approx(0.25));
    CHECK_THROWS_AS(SpatialGrid(1), ValidationError);
    CHECK_THROWS_AS(SpatialGrid(4, -1.0), ValidationError);

    EvolutionGrid e(1.0, 10);
    CHECK(e.step() == doctest::Approx(0.1));
    CHECK(e.level(10) == doctest::Approx(1.0));
    CHECK_THROWS_AS(EvolutionGrid(1.0, 0), ValidationError);
    CHECK_THROWS_AS(EvolutionGrid(0.0, 4), ValidationError);
}

TEST_CASE("grid file: 2x2 zeros is 50 bytes") {
    const auto path = scratch("zeros.nlrte");
    write_grid_file(GridArray{{2, 2}, std::vector<double>(4, 0.0)}, path);
    CHECK(fs::file_size(path) == 50);
    std::ifstream in(path, std::ios::binary);
    char magic[6];
    in.read(magic, 6);
    CHECK(std::string(magic, 6) == "NLRTE1");
}

TEST_CASE("grid file round trip is bit exact over random shapes") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> rank_d(1, 3), dim_d(1, 6);
    std::normal_distribution<double> val(0.0, 1e3);
    for (int t = 0; t < 25; ++t) {
        GridArray a;
        const int rank = rank_d(rng);
        for (int r = 0; r < rank; ++r) a.dims.push_back(static_cast<std::uint32_t>(dim_d(rng)));
        a.data.resize(a.size());
        for (auto& v : a.data) v = val(rng);
        const auto path = scratch("rt.nlrte");
        write_grid_file(a, path);
        const auto b = read_grid_file(path);
        CHECK(a == b);
    }
}

TEST_CASE("grid file typed round trip") {
    SpatialGrid g(3, 2);
    EvolutionGrid e(1.0, 2);
    DensityField d(g, e);
    for (std::size_t i = 0; i < d.values().size(); ++i) d.values()[i] = 0.1 * static_cast<double>(i);
    const auto p = scratch("density.nlrte");
    write_grid_file(d, p);
    const auto arr = read_grid_file(p);
    CHECK(arr.dims == std::vector<std::uint32_t>{3, 2, 3});
    CHECK(density_from_array(arr, g, e).values() == d.values());

    PhaseSpaceField w(g, 4);
    for (std::size_t i = 0; i < w.values().size(); ++i) w.values()[i] = std::sqrt(static_cast<double>(i));
    write_grid_file(w, p);
    CHECK(phase_space_from_array(read_grid_file(p), g).values() == w.values());
}

TEST_CASE("grid file errors") {
    const auto p = scratch("bad.nlrte");
    CHECK_THROWS_AS(write_grid_file(GridArray{{2}, {1.0, NAN}}, p), GridFileError);
    try {
        write_grid_file(GridArray{{2}, {1.0, NAN}}, p);
    } catch (const GridFileError& e) {
        CHECK(e.kind() == GridFileError::Kind::non_finite);
    }

    {
        std::ofstream out(p, std::ios::binary);
        out << "BOGUS1" << std::string(12, '\0');
    }
    try {
        read_grid_file(p);
        FAIL("expected bad magic");
    } catch (const GridFileError& e) {
        CHECK(e.kind() == GridFileError::Kind::bad_magic);
    }

    write_grid_file(GridArray{{4}, {1, 2, 3, 4}}, p);
    fs::resize_file(p, fs::file_size(p) - 5);
    try {
        read_grid_file(p);
        FAIL("expected truncation");
    } catch (const GridFileError& e) {
        CHECK(e.kind() == GridFileError::Kind::truncated);
    }

    {
        std::ofstream out(p, std::ios::binary);
        out.write("NLRTE1", 6);
        const std::uint32_t rank = 2, big = 0xFFFFFFFFu;
        out.write(reinterpret_cast<const char*>(&rank), 4);
        out.write(reinterpret_cast<const char*>(&big), 4);
        out.write(reinterpret_cast<const char*>(&big), 4);
    }
    try {
        read_grid_file(p);
        FAIL("expected overflow");
    } catch (const GridFileError& e) {
        CHECK((e.kind() == GridFileError::Kind::dimension_overflow || e.kind() == GridFileError::Kind::truncated));
    }

    try {
        read_grid_file(scratch("does_not_exist.nlrte"));
        FAIL("expected io error");
    } catch (const GridFileError& e) {
        CHECK(e.kind() == GridFileError::Kind::io);
    }
}

TEST_CASE("angular mean") {
    const auto q2 = build_quadrature(2, 16);
    SpatialGrid g(2, 2);
    PhaseSpaceField ones(g, 16, 1.0);
    for (double m : angular_mean_field(ones, q2)) CHECK(m == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-14));

    const auto q1 = build_quadrature(1, 2);
    PhaseSpaceField w(SpatialGrid(2), 2);
    w(0, 0) = 1.0;
    w(0, 1) = 3.0;
    CHECK(angular_mean_field(w, q1)[0] == doctest::Approx(4.0));

    PhaseSpaceField c(g, 16);
    for (std::size_t cell = 0; cell < c.cell_count(); ++cell)
        for (int j = 0; j < 16; ++j) c(cell, j) = q2.direction(j)[0];
    for (double m : angular_mean_field(c, q2)) CHECK(std::abs(m) < 1e-14);

    CHECK_THROWS_AS(angular_mean_field(PhaseSpaceField(g, 8), q2), ValidationError);
}

TEST_CASE("angular mean is linear") {
    const auto q = build_quadrature(2, 8);
    SpatialGrid g(3, 3);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PhaseSpaceField a(g, 8), b(g, 8), s(g, 8);
    for (std::size_t i = 0; i < a.values().size(); ++i) {
        a.values()[i] = u(rng);
        b.values()[i] = u(rng);
        s.values()[i] = 2.0 * a.values()[i] - 3.0 * b.values()[i];
    }
    const auto ma = angular_mean_field(a, q), mb = angular_mean_field(b, q), ms = angular_mean_field(s, q);
    for (std::size_t c = 0; c < ms.size(); ++c) CHECK(ms[c] == doctest::Approx(2.0 * ma[c] - 3.0 * mb[c]).epsilon(1e-13));
}

TEST_CASE("csv and manifest") {
    CsvTable t;
    t.header = {"a", "b"};
    t.add({0.1, 1.0 / 3.0});
    CHECK(t.str() == "a,b\n0.10000000000000001,0.33333333333333331\n");
    CHECK_THROWS_AS(t.add({1.0}), ValidationError);

    RunManifest m;
    m.set("solver.tol", 1e-10);
    m.set("seed", 42LL);
    m.set("name", "forward");
    m.add_output("density.csv");
    const auto back = RunManifest::parse(m.serialize());
    CHECK(back == m);
    CHECK(back.get_double("solver.tol") == 1e-10);
    CHECK_THROWS_AS(m.set("bad key", "x"), ValidationError);
}
