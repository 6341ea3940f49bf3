// fracmfg: config-driven driver for the time-fractional MFG solver library.
//
// Subcommands: solve-fp, solve-hjb, solve-mfg, simulate-ctrw, check-duality,
// verify-optimality, reduce-beta1, convergence-study.
// Exit codes: 0 = all hard invariants pass, 1 = runtime/solver failure or
// failed invariant (manifest still written), 2 = configuration error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fracmfg/frac_calc.hpp"
#include "fracmfg/fp_solver.hpp"
#include "fracmfg/hjb_solver.hpp"
#include "fracmfg/io.hpp"
#include "fracmfg/mfg.hpp"
#include "fracmfg/run_config.hpp"
#include "fracmfg/subdiffusion_mc.hpp"
#include "fracmfg/variational.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fracmfg;

namespace {

constexpr const char* kVersion = "0.1.0";

struct InvariantCheck {
    std::string name;
    bool pass;
    double value;
    double threshold;
};

struct RunContext {
    RunConfig cfg;
    fs::path out_dir;
    bool quiet = false;
    std::vector<InvariantCheck> checks;
    std::vector<fs::path> outputs;
    json extra; // subcommand-specific diagnostics

    void check(const std::string& name, bool pass, double value, double threshold) {
        checks.push_back({name, pass, value, threshold});
        if (!quiet)
            std::printf("  [%s] %s: value=%.6g threshold=%.6g\n", pass ? "ok" : "FAIL",
                        name.c_str(), value, threshold);
    }
    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    void emit(const fs::path& rel) { outputs.push_back(rel); }
};

json config_echo(const RunConfig& c) {
    return json{{"beta", c.beta},
                {"T", c.T},
                {"nt", c.nt},
                {"nx", c.nx},
                {"dim", c.dim},
                {"coupling", c.coupling},
                {"coupling_p", c.coupling_p},
                {"coupling_a0", c.coupling_a0},
                {"coupling_a1", c.coupling_a1},
                {"m0", c.m0},
                {"m0_amplitude", c.m0_amplitude},
                {"m0_width", c.m0_width},
                {"uT", c.uT},
                {"uT_value", c.uT_value},
                {"uT_amplitude", c.uT_amplitude},
                {"drift", c.drift},
                {"drift_amplitude", c.drift_amplitude},
                {"particles", c.particles},
                {"seed", c.seed},
                {"internal_step", c.internal_step},
                {"mc_nt", c.mc_nt},
                {"damping", c.damping},
                {"picard_tol", c.picard_tol},
                {"picard_max_iter", c.picard_max_iter},
                {"duality_ratio_max", c.duality_ratio_max},
                {"n_perturbations", c.n_perturbations},
                {"threads", c.threads},
                {"out_dir", c.out_dir}};
}

void write_manifest(RunContext& ctx, const std::string& subcommand, double wall_s,
                    const std::string& status, const std::string& error = "") {
    json m;
    m["subcommand"] = subcommand;
    m["version"] = kVersion;
    m["status"] = status;
    if (!error.empty()) m["error"] = error;
    m["wall_time_s"] = wall_s;
    m["config"] = config_echo(ctx.cfg);
    m["invariants"] = json::array();
    for (const auto& c : ctx.checks)
        m["invariants"].push_back(
            {{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"threshold", c.threshold}});
    m["outputs"] = json::array();
    for (const auto& rel : ctx.outputs) {
        const fs::path full = ctx.out_dir / rel;
        m["outputs"].push_back({{"path", rel.string()},
                                {"bytes", static_cast<uint64_t>(fs::file_size(full))},
                                {"fnv1a64", hex64(fnv1a64_file(full.string()))}});
    }
    std::ofstream out(ctx.out_dir / "manifest.json", std::ios::binary);
    out << m.dump(2) << "\n";
}

json field_meta(const RunConfig& cfg, const FPDiagnostics* diag = nullptr) {
    json j{{"beta", cfg.beta},
           {"T", cfg.T},
           {"nt", cfg.nt},
           {"nx", cfg.nx},
           {"drift", cfg.drift},
           {"drift_amplitude", cfg.drift_amplitude}};
    if (diag) {
        j["max_mass_error"] = diag->max_mass_error;
        j["min_density"] = diag->min_density;
        j["max_cell_peclet"] = diag->max_cell_peclet;
        j["warnings"] = diag->warnings;
    }
    return j;
}

void write_json(RunContext& ctx, const fs::path& rel, const json& j) {
    std::ofstream out(ctx.out_dir / rel, std::ios::binary);
    out << j.dump(2) << "\n";
    ctx.emit(rel);
}

MFGProblem problem_from_config(const RunConfig& cfg) {
    TimeGrid tg(cfg.T, cfg.nt);
    SpaceGrid sg(cfg.dim, cfg.nx);
    return MFGProblem(cfg.beta, tg, sg, build_coupling(cfg), build_m0(cfg, sg),
                      build_uT(cfg, sg));
}

// --- subcommands -----------------------------------------------------------

void run_solve_fp(RunContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    TimeGrid tg(cfg.T, cfg.nt);
    SpaceGrid sg(1, cfg.nx);
    auto m0 = build_m0(cfg, sg);
    auto v = build_drift_edges(cfg, tg, sg);
    auto fp = solve_fractional_fp(m0, v, cfg.beta, tg, sg);
    auto mem = memory_field(fp.m, cfg.beta, tg);

    write_field_csv((ctx.out_dir / "density.csv").string(), fp.m, tg);
    ctx.emit("density.csv");
    write_json(ctx, "density_meta.json", field_meta(cfg, &fp.diag));

    ctx.check("mass_conservation", fp.diag.max_mass_error <= 1e-10, fp.diag.max_mass_error, 1e-10);
    ctx.check("density_positivity", fp.diag.min_density >= -1e-10, fp.diag.min_density, -1e-10);
    ctx.check("memory_positivity", mem.min_value >= -1e-10, mem.min_value, -1e-10);
}

void run_solve_hjb(RunContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    TimeGrid tg(cfg.T, cfg.nt);
    SpaceGrid sg(1, cfg.nx);
    auto uT = build_uT(cfg, sg);
    auto m0 = build_m0(cfg, sg);
    // standalone HJB runs against the frozen initial density as source
    auto coupling = build_coupling(cfg);
    Field m_frozen(tg.nodes(), sg.cells());
    for (int n = 0; n < tg.nodes(); ++n) m_frozen.set_slice(n, m0);
    Field src = coupling_eval(coupling, m_frozen, sg);
    Field u = solve_fractional_hjb(uT, src, cfg.beta, tg, sg);

    write_field_csv((ctx.out_dir / "value.csv").string(), u, tg);
    ctx.emit("value.csv");
    write_json(ctx, "value_meta.json", field_meta(cfg));

    double terminal_diff = 0.0;
    for (int j = 0; j < sg.cells(); ++j)
        terminal_diff = std::max(terminal_diff, std::abs(u.at(tg.steps, j) - uT[j]));
    ctx.check("terminal_condition_exact", terminal_diff == 0.0, terminal_diff, 0.0);
    if (coupling.kind == CouplingSpec::Kind::Zero) {
        const double lo = *std::min_element(uT.begin(), uT.end());
        const double hi = *std::max_element(uT.begin(), uT.end());
        double worst = 0.0;
        for (double v : u.raw()) worst = std::max({worst, lo - v, v - hi});
        ctx.check("comparison_bounds", worst <= 1e-9, worst, 1e-9);
    }
}

void run_solve_mfg(RunContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    MFGProblem prob = problem_from_config(cfg);
    PicardOptions opts;
    opts.damping = cfg.damping;
    opts.tol = cfg.picard_tol;
    opts.max_iter = cfg.picard_max_iter;
    MFGSolution sol = picard_solve(prob, opts);

    write_field_csv((ctx.out_dir / "value.csv").string(), sol.u, prob.tg);
    ctx.emit("value.csv");
    write_field_csv((ctx.out_dir / "density.csv").string(), sol.m, prob.tg);
    ctx.emit("density.csv");
    write_field_csv((ctx.out_dir / "w.csv").string(), sol.w, prob.tg);
    ctx.emit("w.csv");

    json diag{{"iterations", sol.iterations},
              {"converged", sol.converged},
              {"residual_history", sol.residual_history},
              {"max_mass_error", sol.max_mass_error},
              {"min_density", sol.min_density},
              {"min_memory", sol.min_memory}};
    write_json(ctx, "mfg_diagnostics.json", diag);

    ctx.check("picard_converged", sol.converged, sol.residual_history.back(), cfg.picard_tol);
    ctx.check("mass_conservation", sol.max_mass_error <= 1e-10, sol.max_mass_error, 1e-10);
    ctx.check("density_positivity", sol.min_density >= -1e-10, sol.min_density, -1e-10);
    ctx.check("memory_positivity", sol.min_memory >= -1e-10, sol.min_memory, -1e-10);
}

void run_simulate_ctrw(RunContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    TimeGrid tg(cfg.T, cfg.mc_nt);
    SpaceGrid sg(1, cfg.nx);
    auto m0 = build_m0(cfg, sg);

    // inverse-cdf sampling of x0 from the analytic initial density
    std::vector<double> cdf(sg.cells() + 1, 0.0);
    for (int j = 0; j < sg.cells(); ++j) cdf[j + 1] = cdf[j] + m0[j] * sg.dx();
    const double a = cfg.drift_amplitude;
    const bool use_sin = cfg.drift == "sin", use_cos = cfg.drift == "cos";
    auto drift = [a, use_sin, use_cos](double, const TorusPoint<1>& x) -> TorusPoint<1> {
        constexpr double two_pi = 2.0 * std::numbers::pi;
        if (use_sin) return {a * std::sin(two_pi * x[0])};
        if (use_cos) return {a * std::cos(two_pi * x[0])};
        return {0.0};
    };
    auto init = [&cdf, &sg](Rng& rng) -> TorusPoint<1> {
        const double u = rng.uniform_oo();
        int lo = 0, hi = sg.cells();
        while (lo + 1 < hi) {
            const int mid = (lo + hi) / 2;
            (cdf[mid] <= u ? lo : hi) = mid;
        }
        const double frac = (u - cdf[lo]) / (cdf[lo + 1] - cdf[lo]);
        return {(lo + frac) * sg.dx()};
    };
    McOptions mopts;
    mopts.internal_step = cfg.internal_step;
    mopts.threads = cfg.threads;
    auto ens = simulate_time_changed_sde<1>(drift, cfg.beta, init,
                                            static_cast<int>(cfg.particles), tg, cfg.seed, mopts);

    write_ensemble_csv((ctx.out_dir / "ensemble.csv").string(), ens);
    ctx.emit("ensemble.csv");
    Field dens(tg.nodes(), sg.cells());
    for (int n = 0; n < tg.nodes(); ++n) dens.set_slice(n, empirical_density(ens, n, sg));
    write_field_csv((ctx.out_dir / "density.csv").string(), dens, tg);
    ctx.emit("density.csv");
    write_json(ctx, "ensemble_meta.json",
               json{{"beta", cfg.beta},
                    {"particles", cfg.particles},
                    {"seed", cfg.seed},
                    {"internal_step", resolve_internal_step(cfg.internal_step, cfg.beta, tg)},
                    {"threads", cfg.threads}});

    double out_of_torus = 0.0;
    for (const auto& slice : ens.positions)
        for (const auto& p : slice)
            if (p[0] < 0.0 || p[0] >= 1.0) out_of_torus += 1.0;
    ctx.check("torus_closure", out_of_torus == 0.0, out_of_torus, 0.0);
    double mass_err = 0.0;
    for (int n = 0; n < tg.nodes(); ++n) {
        double mass = 0.0;
        for (int j = 0; j < sg.cells(); ++j) mass += dens.at(n, j) * sg.dx();
        mass_err = std::max(mass_err, std::abs(mass - 1.0));
    }
    ctx.check("histogram_mass", mass_err <= 1e-12, mass_err, 1e-12);
}

void run_check_duality(RunContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    MFGProblem prob = problem_from_config(cfg);
    PicardOptions opts;
    opts.damping = cfg.damping;
    opts.tol = cfg.picard_tol;
    opts.max_iter = cfg.picard_max_iter;
    MFGSolution sol = picard_solve(prob, opts);
    FunctionalReport rep = duality_gap(sol, prob);
    const double ratio = std::abs(rep.gap) / (1.0 + std::abs(rep.value_B));

    write_field_csv((ctx.out_dir / "density.csv").string(), sol.m, prob.tg);
    ctx.emit("density.csv");
    write_field_csv((ctx.out_dir / "value.csv").string(), sol.u, prob.tg);
    ctx.emit("value.csv");
    write_json(ctx, "duality.json",
               json{{"value_A", rep.value_A},
                    {"value_B", rep.value_B},
                    {"gap", rep.gap},
                    {"gap_ratio", ratio},
                    {"kinetic", rep.kinetic},
                    {"coupling", rep.coupling},
                    {"terminal", rep.terminal},
                    {"picard_iterations", sol.iterations},
                    {"picard_converged", sol.converged}});

    ctx.check("picard_converged", sol.converged,
              sol.residual_history.empty() ? 0.0 : sol.residual_history.back(), cfg.picard_tol);
    ctx.check("duality_gap_ratio", ratio <= cfg.duality_ratio_max, ratio, cfg.duality_ratio_max);
}

void run_verify_optimality(RunContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    MFGProblem prob = problem_from_config(cfg);
    PicardOptions opts;
    opts.damping = cfg.damping;
    opts.tol = cfg.picard_tol;
    opts.max_iter = cfg.picard_max_iter;
    MFGSolution sol = picard_solve(prob, opts);
    PerturbationReport rep =
        perturbation_verification(sol, prob, cfg.n_perturbations, {0.01, 0.05}, cfg.seed);

    json margins = json::array();
    double worst = kInf;
    for (auto [h, margin] : rep.min_margin_by_h) {
        margins.push_back({{"h", h}, {"min_margin", margin}});
        worst = std::min(worst, margin);
    }
    write_json(ctx, "optimality.json",
               json{{"base_A", rep.base_A},
                    {"base_B", rep.base_B},
                    {"margins", margins},
                    {"min_b_margin", rep.min_b_margin},
                    {"n_perturbations", cfg.n_perturbations}});

    ctx.check("picard_converged", sol.converged,
              sol.residual_history.empty() ? 0.0 : sol.residual_history.back(), cfg.picard_tol);
    ctx.check("a_perturbation_margin", worst >= -1e-4, worst, -1e-4);
    ctx.check("b_probe_margin", rep.min_b_margin >= -1e-4, rep.min_b_margin, -1e-4);
}

void run_reduce_beta1(RunContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    TimeGrid tg(cfg.T, cfg.nt);
    SpaceGrid sg(1, cfg.nx);
    auto m0 = build_m0(cfg, sg);
    auto uT = build_uT(cfg, sg);
    auto v = build_drift_edges(cfg, tg, sg);
    auto coupling = build_coupling(cfg);

    auto fp_frac = solve_fractional_fp(m0, v, cfg.beta, tg, sg);
    auto fp_classical = solve_classical_fp(m0, v, tg, sg);
    const double fp_diff = sup_norm(fp_frac.m, fp_classical.m);

    Field m_frozen(tg.nodes(), sg.cells());
    for (int n = 0; n < tg.nodes(); ++n) m_frozen.set_slice(n, m0);
    Field src = coupling_eval(coupling, m_frozen, sg);
    Field u_frac = solve_fractional_hjb(uT, src, cfg.beta, tg, sg);
    Field u_classical = classical_hjb_solve(uT, src, tg, sg);
    const double hjb_diff = sup_norm(u_frac, u_classical);

    write_field_csv((ctx.out_dir / "density_fractional.csv").string(), fp_frac.m, tg);
    ctx.emit("density_fractional.csv");
    write_field_csv((ctx.out_dir / "density_classical.csv").string(), fp_classical.m, tg);
    ctx.emit("density_classical.csv");
    write_field_csv((ctx.out_dir / "value_fractional.csv").string(), u_frac, tg);
    ctx.emit("value_fractional.csv");
    write_field_csv((ctx.out_dir / "value_classical.csv").string(), u_classical, tg);
    ctx.emit("value_classical.csv");
    write_json(ctx, "reduction.json",
               json{{"beta", cfg.beta}, {"fp_sup_diff", fp_diff}, {"hjb_sup_diff", hjb_diff}});

    ctx.check("fp_reduction_sup_diff", fp_diff <= 2e-2, fp_diff, 2e-2);
    ctx.check("hjb_reduction_sup_diff", hjb_diff <= 2e-2, hjb_diff, 2e-2);
}

void run_convergence_study(RunContext& ctx) {
    const RunConfig& cfg = ctx.cfg;
    json table = json::array();
    std::vector<double> ratios;
    for (int level = 0; level < 3; ++level) {
        RunConfig c = cfg;
        c.nx = cfg.nx << level;
        c.nt = cfg.nt << level;
        MFGProblem prob = problem_from_config(c);
        PicardOptions opts;
        opts.damping = c.damping;
        opts.tol = c.picard_tol;
        opts.max_iter = c.picard_max_iter;
        MFGSolution sol = picard_solve(prob, opts);
        FunctionalReport rep = duality_gap(sol, prob);
        const double ratio = std::abs(rep.gap) / (1.0 + std::abs(rep.value_B));
        ratios.push_back(ratio);

        // operator accuracy on the same level: D^{1-beta} 1 vs t^{beta-1}/Gamma(beta)
        std::vector<double> ones(prob.tg.nodes(), 1.0);
        auto d = rl_deriv_forward(ones, 1.0 - c.beta, prob.tg);
        double op_err = 0.0;
        for (int n = 0; n < prob.tg.nodes(); ++n) {
            const double t = prob.tg.node(n);
            if (t < 0.1 * c.T) continue;
            const double exact = std::pow(t, c.beta - 1.0) / std::tgamma(c.beta);
            op_err = std::max(op_err, std::abs(d[n] - exact) / exact);
        }
        table.push_back({{"nx", c.nx},
                         {"nt", c.nt},
                         {"gap", rep.gap},
                         {"gap_ratio", ratio},
                         {"rl_const_rel_err", op_err},
                         {"picard_iterations", sol.iterations},
                         {"picard_converged", sol.converged}});
        if (!ctx.quiet)
            std::printf("  level %d (nx=%d nt=%d): gap_ratio=%.6g\n", level, c.nx, c.nt, ratio);
    }
    write_json(ctx, "convergence.json", json{{"levels", table}});
    const bool decreasing = ratios[1] < ratios[0] && ratios[2] < ratios[1];
    ctx.check("gap_ratio_decreasing", decreasing, ratios[2], ratios[0]);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"time-fractional mean field games solver"};
    app.require_subcommand(1);

    std::string config_path, out_override, subname;
    uint64_t seed_override = 0;
    bool has_seed = false;
    int threads_override = 0;
    bool quiet = false;

    const std::vector<std::pair<std::string, void (*)(RunContext&)>> commands = {
        {"solve-fp", run_solve_fp},
        {"solve-hjb", run_solve_hjb},
        {"solve-mfg", run_solve_mfg},
        {"simulate-ctrw", run_simulate_ctrw},
        {"check-duality", run_check_duality},
        {"verify-optimality", run_verify_optimality},
        {"reduce-beta1", run_reduce_beta1},
        {"convergence-study", run_convergence_study},
    };
    for (const auto& [name, fn] : commands) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "run configuration file")->required();
        sub->add_option("--out", out_override, "output directory (overrides config)");
        sub->add_option("--seed", seed_override, "seed override")->each([&](const std::string&) {
            has_seed = true;
        });
        sub->add_option("--threads", threads_override, "worker thread override");
        sub->add_flag("--quiet", quiet, "suppress progress output");
        sub->callback([&, name = name] { subname = name; });
    }

    CLI11_PARSE(app, argc, argv);

    RunContext ctx;
    try {
        ctx.cfg = load_run_config(config_path);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }
    if (has_seed) ctx.cfg.seed = seed_override;
    if (threads_override > 0) ctx.cfg.threads = threads_override;
    if (!out_override.empty()) ctx.cfg.out_dir = out_override;
    ctx.quiet = quiet;
    ctx.out_dir = ctx.cfg.out_dir;
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) {
        std::fprintf(stderr, "cannot create output directory %s: %s\n",
                     ctx.out_dir.string().c_str(), ec.message().c_str());
        return 2;
    }

    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    if (!quiet) std::printf("fracmfg %s: %s\n", kVersion, subname.c_str());
    try {
        for (const auto& [name, fn] : commands)
            if (name == subname) fn(ctx);
    } catch (const std::exception& e) {
        write_manifest(ctx, subname, elapsed(), "failed", e.what());
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    write_manifest(ctx, subname, elapsed(), ctx.all_pass() ? "ok" : "invariant-failure");
    if (!quiet)
        std::printf("%s: %s (%.2fs)\n", subname.c_str(), ctx.all_pass() ? "pass" : "FAIL",
                    elapsed());
    return ctx.all_pass() ? 0 : 1;
}
