#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "nlrte/angular.hpp"
#include "nlrte/cli.hpp"
#include "nlrte/config.hpp"
#include "nlrte/error.hpp"
#include "nlrte/inverse.hpp"
#include "nlrte/transport.hpp"
#include "nlrte/wigner.hpp"

namespace py = pybind11;
using namespace nlrte;

namespace {

py::array_t<double> to_array(const std::vector<double>& v, std::vector<py::ssize_t> shape) {
    py::array_t<double> a(shape);
    std::copy(v.begin(), v.end(), a.mutable_data());
    return a;
}

PhaseFunction make_phase(const std::string& family, double g, const AngularQuadrature& q) {
    if (family == "isotropic") return make_isotropic(q);
    if (family == "linear_anisotropic") return make_linear_anisotropic(g, q);
    throw ValidationError("unknown phase family '" + family + "'");
}

py::array_t<double> forward_density(const std::string& text) {
    const auto cfg = Config::parse(text);
    const auto problem = transport_from_config(cfg);
    SolverOptions opt = solver_from_config(cfg);
    opt.keep_history = false;
    TransportSolution sol;
    {
        py::gil_scoped_release release;
        sol = solve_semilinear_march(problem, opt);
    }
    const auto& g = problem.grid;
    return to_array(sol.density.values(), {sol.density.levels(), g.dimension() == 2 ? g.cells(1) : 1, g.cells(0)});
}

py::tuple run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "nlrte");
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
}

py::tuple wigner(py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast> psi, double extent,
                 double epsilon, double smoothing) {
    if (psi.ndim() != 1) throw ValidationError("psi must be one-dimensional");
    ComplexField f(static_cast<int>(psi.size()), extent);
    std::copy(psi.data(), psi.data() + psi.size(), f.psi.begin());
    const auto w = wigner_transform(f, epsilon, smoothing);
    return py::make_tuple(to_array(w.x, {w.nx}), to_array(w.k, {w.nk}), to_array(w.w, {w.nx, w.nk}));
}

}  // namespace

PYBIND11_MODULE(_nlrte, m) {
    m.doc() = "Nonlinear radiative transfer solvers";

    // Leaked handles: the translator may run during interpreter shutdown.
    static const py::handle validation = py::exception<ValidationError>(m, "ValidationError", PyExc_ValueError).release();
    static const py::handle convergence =
        py::exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError).release();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConvergenceError& e) {
            py::object exc = convergence(e.what());
            exc.attr("trace") = py::cast(e.trace());
            PyErr_SetObject(convergence.ptr(), exc.ptr());
        } catch (const ValidationError& e) {
            PyErr_SetString(validation.ptr(), e.what());
        }
    });

    m.def("run", &run_cli, py::arg("args"), "Run the command line tool in process; returns (code, stdout, stderr).");
    m.def("forward_density", &forward_density, py::arg("config"),
          "Solve the forward problem described by config text; returns <W> with shape (levels, ny, nx).");
    m.def(
        "homogeneous_oracle",
        [](const std::vector<double>& c, double nu, double f0, double z) { return homogeneous_ode_oracle(c, nu, f0, z); },
        py::arg("coefficients"), py::arg("nu"), py::arg("f0"), py::arg("z"));
    m.def(
        "diffusion_matrix",
        [](int dimension, int n_angles, const std::string& family, double g) {
            const auto q = build_quadrature(dimension, n_angles);
            const Eigen::MatrixXd a = diffusion_matrix(make_phase(family, g, q), q);
            py::array_t<double> out({a.rows(), a.cols()});
            for (Eigen::Index i = 0; i < a.rows(); ++i)
                for (Eigen::Index j = 0; j < a.cols(); ++j) out.mutable_at(i, j) = a(i, j);
            return out;
        },
        py::arg("dimension"), py::arg("n_angles"), py::arg("family") = "isotropic", py::arg("g") = 0.0);
    m.def("kappa", py::overload_cast<double, double>(&kappa), py::arg("theta_lower"), py::arg("theta_upper"));
    m.def(
        "inequality_check",
        [](int dimension, int n_angles, const std::string& family, double g, long long trials, std::uint64_t seed) {
            const auto q = build_quadrature(dimension, n_angles);
            const auto r = appendix_inequality_check(make_phase(family, g, q), q, trials, seed);
            return py::dict(py::arg("trials") = r.trials, py::arg("violations") = r.violations,
                            py::arg("min_slack") = r.min_slack);
        },
        py::arg("dimension"), py::arg("n_angles"), py::arg("family") = "isotropic", py::arg("g") = 0.0,
        py::arg("trials") = 1000, py::arg("seed") = 42);
    m.def("wigner_transform", &wigner, py::arg("psi"), py::arg("extent"), py::arg("epsilon"), py::arg("smoothing") = 0.0,
          "Discrete Wigner transform; returns (x, k, W) with W indexed [x, k].");
}
