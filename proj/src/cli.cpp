#include "nlrte/cli.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>
#include <fftw3.h>

#include <cmath>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>

#include "nlrte/diffusion.hpp"
#include "nlrte/grid_file.hpp"
#include "nlrte/inverse.hpp"
#include "nlrte/limit_harness.hpp"
#include "nlrte/log.hpp"
#include "nlrte/table.hpp"
#include "nlrte/wigner.hpp"

namespace nlrte {

namespace fs = std::filesystem;

SpatialGrid grid_from_config(const Config& cfg) {
    const int nx = static_cast<int>(cfg.integer("grid.nx"));
    if (cfg.integer("grid.dimension") == 1) return SpatialGrid(nx, cfg.real("grid.extent_x"));
    const int ny = cfg.has("grid.ny") ? static_cast<int>(cfg.integer("grid.ny")) : nx;
    return SpatialGrid(nx, ny, cfg.real("grid.extent_x"), cfg.real("grid.extent_y"));
}

EvolutionGrid evolution_from_config(const Config& cfg) {
    return EvolutionGrid(cfg.real("evolution.horizon"), static_cast<int>(cfg.integer("evolution.steps")));
}

AngularQuadrature quadrature_from_config(const Config& cfg) {
    const int d = static_cast<int>(cfg.integer("grid.dimension"));
    return build_quadrature(d, d == 1 ? 2 : static_cast<int>(cfg.integer("angular.n_angles")));
}

PhaseFunction phase_from_config(const Config& cfg, const AngularQuadrature& quad) {
    const auto family = cfg.text("phase.family");
    const double g = cfg.real("phase.g");
    if (family == "isotropic") return make_isotropic(quad);
    if (family == "linear_anisotropic") return make_linear_anisotropic(g, quad);
    if (!(std::abs(g) < 1.0)) throw ValidationError("phase.g must satisfy |g| < 1 for henyey_greenstein");
    return make_tabulated([g](double c) { return (1.0 - g * g) / (2.0 * std::numbers::pi * (1.0 + g * g - 2.0 * g * c)); },
                          quad);
}

AbsorptionModel absorption_from_config(const Config& cfg, const SpatialGrid& grid, const EvolutionGrid& evo) {
    const auto files = cfg.words("absorption.files");
    if (!files.empty()) {
        if (cfg.has("absorption.coefficients") || cfg.has("absorption.left_coefficients"))
            throw ValidationError("absorption.files excludes absorption.coefficients");
        AbsorptionModel model(grid, evo, static_cast<int>(files.size()) - 1);
        for (std::size_t l = 0; l < files.size(); ++l) {
            const auto field = density_from_array(read_grid_file(files[l]), grid, evo);
            for (int iz = 0; iz < field.levels(); ++iz)
                for (std::size_t c = 0; c < grid.cell_count(); ++c)
                    model.coefficient(static_cast<int>(l), iz, c) = field(iz, c);
        }
        model.validate();
        return model;
    }
    auto right = cfg.list("absorption.coefficients");
    auto left = cfg.list("absorption.left_coefficients");
    if (left.empty()) return AbsorptionModel::constant(grid, evo, right);
    const std::size_t n = std::max(left.size(), right.size());
    left.resize(n, 0.0);
    right.resize(n, 0.0);
    const double split = cfg.real("absorption.split");
    auto model = AbsorptionModel::from_function(grid, evo, static_cast<int>(n) - 1,
                                                [&](int l, double, double x, double) { return x < split ? left[l] : right[l]; });
    model.validate();
    return model;
}

std::vector<double> initial_from_config(const Config& cfg, const SpatialGrid& grid) {
    const auto kind = cfg.text("initial.kind");
    std::vector<double> f(grid.cell_count());
    if (kind == "file") {
        const auto path = cfg.text("initial.file");
        if (path.empty()) throw ValidationError("initial.kind = file requires initial.file");
        const auto a = read_grid_file(path);
        if (a.size() != f.size()) throw ValidationError("initial.file " + path + " does not match the grid");
        f = a.data;
        for (double v : f)
            if (!(v >= 0.0)) throw ValidationError("initial.file " + path + " has negative entries");
        return f;
    }
    const double amp = cfg.real("initial.value");
    const double w = cfg.real("initial.width");
    const int d = grid.dimension();
    for (int iy = 0; iy < (d == 2 ? grid.cells(1) : 1); ++iy)
        for (int ix = 0; ix < grid.cells(0); ++ix) {
            double v = amp;
            for (int a = 0; a < d; ++a) {
                const double x = grid.center(a, a == 0 ? ix : iy);
                const double L = grid.extent(a);
                const double s = std::sin(std::numbers::pi * x / L);
                if (kind == "sine") v *= s;
                else if (kind == "sine2") v *= s * s;
                else if (kind == "gaussian") v *= std::exp(-(x - 0.5 * L) * (x - 0.5 * L) / (2.0 * w * w));
            }
            f[grid.index(ix, iy)] = v;
        }
    return f;
}

SolverOptions solver_from_config(const Config& cfg) {
    SolverOptions o;
    o.tol_picard = cfg.real("solver.tol_picard");
    o.max_picard = static_cast<int>(cfg.integer("solver.max_picard"));
    o.tol_source = cfg.real("solver.tol_source");
    o.max_source = static_cast<int>(cfg.integer("solver.max_source"));
    o.nonlinearity = cfg.text("solver.nonlinearity") == "lagged" ? Nonlinearity::lagged : Nonlinearity::per_step_picard;
    return o;
}

TransportProblem transport_from_config(const Config& cfg) {
    TransportProblem p;
    p.grid = grid_from_config(cfg);
    p.evolution = evolution_from_config(cfg);
    p.quadrature = quadrature_from_config(cfg);
    p.phase = phase_from_config(cfg, p.quadrature);
    p.sigma_s = cfg.real("transport.sigma_s");
    p.epsilon = cfg.real("transport.epsilon");
    p.absorption = absorption_from_config(cfg, p.grid, p.evolution);
    p.initial = initial_from_config(cfg, p.grid);
    p.validate();
    return p;
}

fs::path RunContext::output(const std::string& name) {
    manifest.add_output(name);
    return out_dir / name;
}

namespace {

std::string timestamp(std::chrono::system_clock::time_point t) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

}  // namespace

fs::path emit_manifest(RunContext& ctx) {
    fs::create_directories(ctx.out_dir);
    RunManifest m = ctx.manifest;
    m.set("command", ctx.command);
    for (const auto& [k, v] : ctx.config.resolved()) m.set("config." + k, v);
    m.set("version.nlrte", kVersion);
    m.set("version.eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                               std::to_string(EIGEN_MINOR_VERSION));
    m.set("version.fftw", std::string(fftw_version));
    m.set("version.boost", std::string(BOOST_LIB_VERSION));
    m.set("threads", worker_count());
    m.set("status", ctx.failed ? "failed" : "ok");
    if (ctx.failed) {
        m.set("error.kind", ctx.error_kind);
        std::string msg = ctx.error_message;
        for (auto& c : msg)
            if (c == '\n') c = ' ';
        m.set("error.message", msg);
    }
    const auto now = std::chrono::system_clock::now();
    m.set("timing.started", timestamp(ctx.started));
    m.set("timing.wall_seconds", std::chrono::duration<double>(now - ctx.started).count());
    const auto path = ctx.out_dir / "manifest.txt";
    m.write(path);
    return path;
}

namespace {

void density_csv(const DensityField& g, const fs::path& path) {
    CsvTable t;
    const auto& grid = g.grid();
    const bool two = grid.dimension() == 2;
    t.header = two ? std::vector<std::string>{"z", "x", "y", "density"} : std::vector<std::string>{"z", "x", "density"};
    for (int iz = 0; iz < g.levels(); ++iz)
        for (int iy = 0; iy < (two ? grid.cells(1) : 1); ++iy)
            for (int ix = 0; ix < grid.cells(0); ++ix) {
                const double z = g.evolution().level(iz);
                const double v = g(iz, grid.index(ix, iy));
                if (two) t.add({z, grid.center(0, ix), grid.center(1, iy), v});
                else t.add({z, grid.center(0, ix), v});
            }
    t.write(path);
}

void cmd_forward(RunContext& ctx, std::ostream& out) {
    const auto p = transport_from_config(ctx.config);
    auto opt = solver_from_config(ctx.config);
    opt.keep_history = false;
    TransportSolution sol;
    if (ctx.config.text("solver.method") == "picard") {
        auto res = picard_fixed_point(p, opt);
        CsvTable trace;
        trace.header = {"iteration", "relative_change"};
        for (std::size_t i = 0; i < res.trace.size(); ++i) trace.add({static_cast<double>(i + 1), res.trace[i]});
        trace.write(ctx.output("picard_trace.csv"));
        sol = std::move(res.solution);
    } else {
        sol = solve_semilinear_march(p, opt);
    }
    density_csv(sol.density, ctx.output("density.csv"));
    write_grid_file(sol.density, ctx.output("density.nlrte"));
    write_grid_file(sol.final, ctx.output("final.nlrte"));
    ctx.manifest.set("result.source_iterations", sol.stats.source_iterations);
    ctx.manifest.set("result.max_source_iterations", sol.stats.max_source_iterations);
    ctx.manifest.set("result.picard_iterations", sol.stats.picard_iterations);
    ctx.manifest.set("result.max_inner_picard", sol.stats.max_inner_picard);
    const auto last = sol.density.level(sol.density.levels() - 1);
    ctx.manifest.set("result.final_max_density", max_abs(last));
    out << "forward: " << sol.density.levels() << " levels, final max density " << format_double(max_abs(last))
        << ", source iterations " << sol.stats.source_iterations << "\n";
}

void cmd_diffusion(RunContext& ctx, std::ostream& out) {
    const auto t = transport_from_config(ctx.config);
    DiffusionProblem d;
    d.grid = t.grid;
    d.evolution = t.evolution;
    d.A = diffusion_matrix(t.phase, t.quadrature);
    d.sigma_s = t.sigma_s;
    d.nu = t.quadrature.measure();
    d.absorption = t.absorption;
    d.argument = ctx.config.text("diffusion.argument") == "point_value" ? AbsorptionArgument::point_value
                                                                         : AbsorptionArgument::angular_mean;
    d.initial = t.initial;
    DiffusionOptions opt;
    opt.tol_picard = ctx.config.real("solver.tol_picard");
    opt.max_picard = static_cast<int>(ctx.config.integer("solver.max_picard"));
    const auto sol = solve_semilinear_diffusion(d, opt);
    density_csv(sol.w, ctx.output("w0.csv"));
    write_grid_file(sol.w, ctx.output("w0.nlrte"));
    const auto last = sol.w.level(sol.w.levels() - 1);
    ctx.manifest.set("result.max_inner_picard", sol.max_inner_picard);
    ctx.manifest.set("result.linear_solves", sol.linear_solves);
    ctx.manifest.set("result.diffusivity_x", d.diffusivity(0));
    ctx.manifest.set("result.final_outflow", boundary_outflow(d, last));
    out << "diffusion: diffusivity " << format_double(d.diffusivity(0)) << ", final max W0 "
        << format_double(max_abs(last)) << ", max inner Picard " << sol.max_inner_picard << "\n";
}

void cmd_limit_study(RunContext& ctx, std::ostream& out) {
    const Config cfg = ctx.config;
    transport_from_config(cfg);  // validate once up front
    ConvergenceStudy s;
    s.factory = [cfg](int nx, int nz, double eps) {
        Config c = cfg;
        c.set("grid.nx", std::to_string(nx));
        if (c.integer("grid.dimension") == 2) c.set("grid.ny", std::to_string(nx));
        c.set("evolution.steps", std::to_string(nz));
        c.set("transport.epsilon", format_double(eps));
        return transport_from_config(c);
    };
    s.epsilons = cfg.list("study.epsilons");
    s.nx = static_cast<int>(cfg.integer("study.nx"));
    s.nz = static_cast<int>(cfg.integer("study.nz"));
    s.auto_refine = cfg.boolean("study.refine");
    s.max_refinements = static_cast<int>(cfg.integer("study.max_refinements"));
    s.lower_bound_c = cfg.real("study.lower_bound_c");
    s.options = solver_from_config(cfg);
    const bool degenerate = cfg.boolean("study.degenerate");
    const auto res = degenerate ? run_degenerate_study(s) : run_convergence_study(s);
    res.table().write(ctx.output("study.csv"));
    if (res.slope) {
        ctx.manifest.set("result.slope", *res.slope);
        ctx.manifest.set("result.slope_residual", res.slope_residual);
    } else {
        ctx.manifest.set("result.note", res.note);
    }
    ctx.manifest.set("result.monotone", res.monotone ? "true" : "false");
    if (degenerate) ctx.manifest.set("result.lower_bound_ok", res.lower_bound_ok ? "true" : "false");
    for (const auto& r : res.records)
        out << "eps " << format_double(r.epsilon) << "  error " << format_double(r.error) << "  grid " << r.nx << "x"
            << r.nz << "\n";
    if (res.slope)
        out << "fitted order " << format_double(*res.slope) << " (rms residual " << format_double(res.slope_residual)
            << ")\n";
    else
        out << "fitted order unavailable: " << res.note << "\n";
}

void cmd_invert(RunContext& ctx, std::ostream& out) {
    const auto& cfg = ctx.config;
    ExperimentSet set;
    set.base = transport_from_config(cfg);
    for (double s : cfg.list("inverse.sources")) {
        auto f = set.base.initial;
        for (auto& v : f) v *= s;
        set.sources.push_back(std::move(f));
    }
    set.noise = cfg.real("inverse.noise");
    set.seed = static_cast<std::uint64_t>(cfg.integer("inverse.seed"));
    const auto solver = solver_from_config(cfg);
    generate_data(set, solver);
    for (std::size_t j = 0; j < set.data.size(); ++j)
        write_grid_file(set.data[j], ctx.output("data_" + std::to_string(j) + ".nlrte"));
    ctx.manifest.set("result.data_ordered", set.ordered ? "true" : "false");

    InverseOptions opt;
    opt.balance = cfg.text("inverse.balance") == "central" ? BalanceScheme::central : BalanceScheme::consistent;
    opt.smooth = cfg.real("inverse.smooth");
    opt.cond_max = cfg.real("inverse.cond_max");
    opt.tol_m = cfg.real("inverse.tol_m");
    opt.max_iterations = static_cast<int>(cfg.integer("inverse.max_iterations"));
    opt.solver = solver;
    const auto rec = reconstruct(set, opt);

    const auto& grid = set.base.grid;
    const auto& evo = set.base.evolution;
    CsvTable summary;
    summary.header = {"order", "min", "max", "mean"};
    for (int l = 0; l <= rec.recovered.order(); ++l) {
        DensityField c(grid, evo);
        double lo = INFINITY, hi = -INFINITY, sum = 0.0;
        for (int iz = 0; iz < c.levels(); ++iz)
            for (std::size_t k = 0; k < grid.cell_count(); ++k) {
                const double v = rec.recovered.coefficient(l, iz, k);
                c(iz, k) = v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
                sum += v;
            }
        write_grid_file(c, ctx.output("coefficient_" + std::to_string(l) + ".nlrte"));
        summary.add({static_cast<double>(l), lo, hi, sum / static_cast<double>(c.values().size())});
        out << "sigma_a," << l << ": mean " << format_double(sum / static_cast<double>(c.values().size())) << " range ["
            << format_double(lo) << ", " << format_double(hi) << "]\n";
    }
    summary.write(ctx.output("coefficients.csv"));
    CsvTable resid;
    resid.header = {"experiment", "source_scale", "forward_residual", "recovery_iterations"};
    const auto scales = cfg.list("inverse.sources");
    for (std::size_t j = 0; j < rec.residuals.size(); ++j) {
        resid.add({static_cast<double>(j), scales[j], rec.residuals[j], static_cast<double>(rec.recovery_iterations[j])});
        ctx.manifest.set("result.residual_" + std::to_string(j), rec.residuals[j]);
        ctx.manifest.set("result.recovery_iterations_" + std::to_string(j), rec.recovery_iterations[j]);
        out << "experiment " << j << ": forward residual " << format_double(rec.residuals[j]) << "\n";
    }
    resid.write(ctx.output("residuals.csv"));
    ctx.manifest.set("result.unreliable_cells", static_cast<long long>(rec.extraction.unreliable_count));
    ctx.manifest.set("result.clamped_cells", static_cast<long long>(rec.extraction.clamped_count));
}

void cmd_wigner_validate(RunContext& ctx, std::ostream& out) {
    const auto& cfg = ctx.config;
    WignerConfig wc;
    wc.epsilon = cfg.real("wigner.epsilon");
    wc.K = cfg.real("wigner.K");
    wc.ensemble = static_cast<int>(cfg.integer("wigner.ensemble"));
    wc.dz = cfg.real("wigner.dz");
    wc.smoothing = cfg.real("wigner.smoothing");
    wc.validate();
    RandomMediumSpec spec;
    spec.sigma_v = cfg.real("wigner.sigma_v");
    spec.decorrelation = cfg.real("wigner.decorrelation");
    spec.seed = static_cast<std::uint64_t>(cfg.integer("wigner.seed"));
    const int n = static_cast<int>(cfg.integer("wigner.points"));
    const double extent = cfg.real("wigner.extent");
    const double width = cfg.real("wigner.width");
    const double horizon = cfg.real("wigner.horizon");
    auto targets = cfg.list("wigner.targets");
    for (double z : targets)
        if (!(z > 0.0 && z <= horizon)) throw ValidationError("wigner.targets must lie in (0, wigner.horizon]");
    std::vector<double> envelope(n);
    for (int i = 0; i < n; ++i) {
        const double x = (i + 0.5) * extent / n - 0.5 * extent;
        envelope[i] = std::exp(-x * x / (2.0 * width * width));
    }
    const bool snapshots = cfg.boolean("wigner.snapshots");
    const auto ens =
        ensemble_density(spec, wc, counterpropagating_wave(envelope, extent, wc.epsilon), targets, snapshots);
    const auto problem = matched_transport(spec, wc, envelope, extent, horizon,
                                           static_cast<int>(cfg.integer("wigner.transport_steps")),
                                           static_cast<int>(cfg.integer("wigner.refine")));
    const auto rep = compare_with_transport(ens, problem, cfg.real("wigner.threshold"), solver_from_config(cfg));

    CsvTable dens;
    dens.header = {"z", "x", "wave_mean", "wave_stderr", "transport"};
    CsvTable cmp;
    cmp.header = {"z", "relative_l1"};
    for (std::size_t t = 0; t < ens.z.size(); ++t) {
        for (int i = 0; i < n; ++i)
            dens.add({ens.z[t], (i + 0.5) * extent / n, ens.mean[t][i], ens.stderr_[t][i], rep.transport_density[t][i]});
        cmp.add({rep.z[t], rep.discrepancy[t]});
        out << "z " << format_double(rep.z[t]) << "  relative L1 discrepancy " << format_double(rep.discrepancy[t])
            << "\n";
    }
    dens.write(ctx.output("densities.csv"));
    cmp.write(ctx.output("comparison.csv"));
    for (std::size_t t = 0; t < ens.snapshots.size(); ++t) {
        const auto& w = ens.snapshots[t];
        write_grid_file(GridArray{{static_cast<std::uint32_t>(w.nx), static_cast<std::uint32_t>(w.nk)}, w.w},
                        ctx.output("wigner_" + std::to_string(t) + ".nlrte"));
    }
    ctx.manifest.set("result.realizations", ens.realizations);
    ctx.manifest.set("result.max_discrepancy", rep.max_discrepancy);
    ctx.manifest.set("result.within_band", rep.pass ? "true" : "false");
    ctx.manifest.set("result.transport_sigma_s", problem.sigma_s);
    if (rep.pass)
        out << "max discrepancy " << format_double(rep.max_discrepancy) << " within band " << format_double(rep.threshold)
            << "\n";
    else
        warn("wave/transport discrepancy " + format_double(rep.max_discrepancy) + " exceeds the " +
             format_double(rep.threshold) + " band");
}

void cmd_check_conditions(RunContext& ctx, std::ostream& out) {
    const auto p = transport_from_config(ctx.config);
    const double nu = p.quadrature.measure();
    const double f_sup = ctx.config.has("conditions.f_sup") ? ctx.config.real("conditions.f_sup") : p.initial_sup();
    const auto ci = check_condition_i(p.absorption, nu, f_sup);
    const auto cii = check_condition_ii(p.absorption, p.phase, p.sigma_s, nu, f_sup, p.epsilon);
    CsvTable t;
    t.header = {"condition", "order", "pass", "margin"};
    out << "f_sup " << format_double(f_sup) << "\n";
    out << "condition (i): " << (ci.pass ? "pass" : "fail");
    for (std::size_t k = 0; k < ci.margins.size(); ++k) {
        out << "  margin[" << k + 1 << "] " << format_double(ci.margins[k]);
        t.add({1.0, static_cast<double>(k + 1), ci.pass ? 1.0 : 0.0, ci.margins[k]});
    }
    out << "\n";
    const double mii = cii.margins.empty() ? INFINITY : cii.margins[0];
    out << "condition (ii): " << (cii.pass ? "pass" : "fail") << "  margin " << format_double(mii) << "\n";
    t.add({2.0, 0.0, cii.pass ? 1.0 : 0.0, mii});
    t.write(ctx.output("conditions.csv"));
    ctx.manifest.set("result.f_sup", f_sup);
    ctx.manifest.set("result.condition_i", ci.pass ? "pass" : "fail");
    ctx.manifest.set("result.condition_ii", cii.pass ? "pass" : "fail");
    ctx.manifest.set("result.condition_ii_margin", mii);
}

void cmd_inequality_check(RunContext& ctx, std::ostream& out) {
    const auto& cfg = ctx.config;
    const auto quad = quadrature_from_config(cfg);
    const auto p = phase_from_config(cfg, quad);
    const auto rep = appendix_inequality_check(p, quad, cfg.integer("inequality.trials"),
                                               static_cast<std::uint64_t>(cfg.integer("inequality.seed")),
                                               static_cast<int>(cfg.integer("inequality.cells")));
    CsvTable t;
    t.header = {"trials", "violations", "min_slack", "kappa", "theta_lower", "theta_upper"};
    t.add({static_cast<double>(rep.trials), static_cast<double>(rep.violations), rep.min_slack, kappa(p),
           p.theta_lower(), p.theta_upper()});
    t.write(ctx.output("inequality.csv"));
    ctx.manifest.set("result.trials", rep.trials);
    ctx.manifest.set("result.violations", rep.violations);
    ctx.manifest.set("result.min_slack", rep.min_slack);
    ctx.manifest.set("result.kappa", kappa(p));
    out << "trials " << rep.trials << "  violations " << rep.violations << "  min slack " << format_double(rep.min_slack)
        << "  kappa " << format_double(kappa(p)) << "\n";
}

using Command = void (*)(RunContext&, std::ostream&);

struct Entry {
    const char* name;
    const char* help;
    Command fn;
};

const Entry kCommands[] = {
    {"forward", "solve the semilinear transport problem", cmd_forward},
    {"diffusion", "solve the matched semilinear diffusion problem", cmd_diffusion},
    {"limit-study", "epsilon convergence study against the diffusion limit", cmd_limit_study},
    {"invert", "synthesize internal data and reconstruct the absorption coefficients", cmd_invert},
    {"wigner-validate", "paraxial wave ensemble against the matched transport solution", cmd_wigner_validate},
    {"check-conditions", "report the well-posedness conditions and their margins", cmd_check_conditions},
    {"inequality-check", "randomized check of the scattering inequality", cmd_inequality_check},
};

}  // namespace

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Semilinear radiative transport with nonlinear absorption", argv.empty() ? "nlrte" : argv[0]};
    app.require_subcommand(1, 1);
    std::string cfg_path;
    std::string out_dir;
    for (const auto& e : kCommands) {
        auto* sub = app.add_subcommand(e.name, e.help);
        sub->add_option("config", cfg_path, "configuration file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    }
    std::vector<const char*> cargv;
    for (const auto& a : argv) cargv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        err << app.help();
        return 1;
    }

    RunContext ctx;
    ctx.command = app.get_subcommands().front()->get_name();
    Command fn = nullptr;
    for (const auto& e : kCommands)
        if (ctx.command == e.name) fn = e.fn;

    // A warning during the run goes to stderr and into the manifest.
    int warnings = 0;
    auto previous = set_warning_sink([&](const std::string& msg) {
        err << "warning: " << msg << "\n";
        ctx.manifest.set("warning." + std::to_string(warnings++), msg);
    });
    struct Restore {
        WarningSink& prev;
        ~Restore() { set_warning_sink(prev); }
    } restore{previous};

    int code = 0;
    try {
        ctx.config = Config::load(cfg_path);
        if (out_dir.empty()) out_dir = ctx.config.text("output.dir");
        if (out_dir.empty()) throw ValidationError("no output directory: pass --out DIR or set output.dir");
        ctx.out_dir = out_dir;
        fs::create_directories(ctx.out_dir);
        fn(ctx, out);
    } catch (const ConvergenceError& e) {
        ctx.failed = true;
        ctx.error_kind = "convergence";
        ctx.error_message = e.what();
        ctx.manifest.set("error.trace_length", static_cast<long long>(e.trace().size()));
        if (!e.trace().empty()) ctx.manifest.set("error.last_residual", e.trace().back());
        err << "error: " << e.what() << "\n";
        code = 2;
    } catch (const ConfigError& e) {
        ctx.failed = true;
        ctx.error_kind = "config";
        ctx.error_message = e.what();
        err << "error: " << e.what() << "\n";
        code = 1;
    } catch (const std::exception& e) {
        ctx.failed = true;
        ctx.error_kind = dynamic_cast<const GridFileError*>(&e) ? "grid_file" : "validation";
        ctx.error_message = e.what();
        err << "error: " << e.what() << "\n";
        code = 1;
    }
    if (ctx.out_dir.empty() && !out_dir.empty()) ctx.out_dir = out_dir;
    if (!ctx.out_dir.empty()) {
        try {
            const auto path = emit_manifest(ctx);
            out << "manifest: " << path.string() << "\n";
        } catch (const std::exception& e) {
            err << "error: cannot write manifest: " << e.what() << "\n";
            if (code == 0) code = 1;
        }
    }
    return code;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace nlrte
