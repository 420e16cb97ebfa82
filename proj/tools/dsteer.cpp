#include "dsteer/bench.hpp"
#include "dsteer/config.hpp"
#include "dsteer/csv.hpp"
#include "dsteer/errors.hpp"
#include "dsteer/fokker_planck.hpp"
#include "dsteer/optimality.hpp"
#include "dsteer/parallel.hpp"
#include "dsteer/sde_mc.hpp"
#include "dsteer/transform.hpp"
#include "dsteer/value_hjb.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace dsteer;

namespace {

constexpr int kSolverError = 1;
constexpr int kCheckFailed = 2;

struct Context {
    RunConfig cfg;
    std::string command;
    std::string target;
    fs::path out;
    int jobs = 1;
};

std::ofstream open_out(const Context& ctx, const std::string& name) {
    std::ofstream f(ctx.out / name, std::ios::binary);
    if (!f) throw Error(ErrorKind::InvalidArgument, "cannot write " + (ctx.out / name).string());
    return f;
}

void write_manifest(const Context& ctx, double seconds) {
    auto f = open_out(ctx, "manifest.txt");
    f << "command = " << ctx.command << (ctx.target.empty() ? "" : " " + ctx.target) << '\n';
    f << "version = " << DSTEER_VERSION << '\n';
    f << "preset = " << ctx.cfg.preset << '\n';
    f << "seed = " << ctx.cfg.seed << '\n';
    f << "jobs = " << ctx.jobs << '\n';
    f << "tol_scale = " << format_number(ctx.cfg.tol_scale) << '\n';
    for (const auto& [k, v] : ctx.cfg.echo) f << "config." << k << " = " << v << '\n';
    f << "wall_seconds = " << format_number(seconds) << '\n';
}

void dump_frames(std::ostream& os, const char* value_name, const TimeGrid& tg, const std::vector<Field>& frames,
                 std::size_t stride) {
    CsvWriter w(os, {"t", "x", value_name});
    for (std::size_t k = 0; k < frames.size(); ++k) {
        if (k % stride != 0 && k + 1 != frames.size()) continue;
        const double t = tg.t(k);
        for (std::size_t i = 0; i < frames[k].size(); ++i) w.row(t, frames[k].grid.x(i), frames[k].values[i]);
    }
}

int cmd_fp(const Context& ctx) {
    const Preset p = resolve_preset(ctx.cfg);
    const DensityPath path = solve_fp(p.spec, p.feedback, p.rho0, p.grid, p.time_grid, p.boundary);
    auto d = open_out(ctx, "density.csv");
    dump_frames(d, "rho", path.time_grid, path.frames, ctx.cfg.frame_stride);
    auto f = open_out(ctx, "flux.csv");
    CsvWriter w(f, {"t", "flux_left", "flux_right", "alive_mass"});
    for (std::size_t k = 0; k < path.frames.size(); ++k)
        w.row(path.exit_flux[k].t, path.exit_flux[k].flux_left, path.exit_flux[k].flux_right, path.alive_mass[k]);
    return 0;
}

int cmd_transform(const Context& ctx) {
    const Preset p = resolve_preset(ctx.cfg);
    const DensityPath path = solve_fp(p.spec, p.feedback, p.rho0, p.grid, p.time_grid, p.boundary);
    const VelocityField vel = build_velocity_field(p.spec, p.feedback, path, p.boundary);
    {
        auto f = open_out(ctx, "velocity.csv");
        std::vector<Field> frames;
        frames.reserve(vel.frames.size());
        for (std::size_t k = 0; k < vel.frames.size(); ++k) frames.push_back(vel.frame(k));
        dump_frames(f, "f_tilde", vel.time_grid, frames, ctx.cfg.frame_stride);
    }
    ParticleEnsemble e = ParticleEnsemble::from_quantiles(p.rho0, ctx.cfg.particles);
    advect_particles(e, vel, StopRule{p.boundary, std::nullopt}, p.time_grid.t0(), p.time_grid.t1(),
                     p.time_grid.dt(), ctx.jobs);
    auto f = open_out(ctx, "ensemble.csv");
    CsvWriter w(f, {"id", "x", "alive", "stop_time"});
    for (std::size_t i = 0; i < e.size(); ++i) w.row(i, e.positions[i], static_cast<int>(e.alive[i]), e.stop_time[i]);
    return 0;
}

int cmd_mc(const Context& ctx) {
    const Preset p = resolve_preset(ctx.cfg);
    McConfig mc;
    mc.n_paths = ctx.cfg.paths;
    mc.dt = ctx.cfg.mc_dt.value_or(p.time_grid.dt());
    mc.seed = ctx.cfg.seed;
    mc.t0 = p.time_grid.t0();
    mc.horizon = p.time_grid.t1();
    mc.jobs = ctx.jobs;
    const McResult r = simulate_killed(p.spec, p.feedback, p.rho0, p.boundary, mc);
    {
        auto f = open_out(ctx, "paths.csv");
        CsvWriter w(f, {"path_id", "stop_time", "x_final", "alive", "cost"});
        for (std::size_t i = 0; i < r.size(); ++i)
            w.row(i, r.stop_time[i], r.x_final[i], static_cast<int>(r.alive[i]), r.cost[i]);
    }
    const CostEstimate est = estimate_cost(r);
    auto s = open_out(ctx, "summary.txt");
    s << "mean_cost=" << format_number(est.mean) << '\n'
      << "se=" << format_number(est.standard_error) << '\n'
      << "survival=" << format_number(r.survival()) << '\n';
    return 0;
}

int cmd_hjb(const Context& ctx) {
    const Preset p = resolve_preset(ctx.cfg);
    const ValueField v = solve_hjb_dirichlet(p.spec, p.boundary, p.grid, p.time_grid);
    auto f = open_out(ctx, "value.csv");
    dump_frames(f, "V", v.time_grid, v.frames, ctx.cfg.frame_stride);
    auto c = open_out(ctx, "control.csv");
    dump_frames(c, "u", v.time_grid, v.controls, ctx.cfg.frame_stride);
    return 0;
}

int cmd_vi(const Context& ctx) {
    const Preset p = resolve_preset(ctx.cfg);
    ViOptions o;
    o.stationary = ctx.cfg.stationary.value_or(p.spec.discount > 0.0);
    o.time_grid = p.time_grid;
    o.omega = ctx.cfg.omega;
    o.ends = o.stationary ? ViEnds::Linear : ViEnds::Obstacle;
    o.control = p.feedback;
    const ValueField v = solve_obstacle_vi(p.spec, p.spec.terminal_cost, p.grid, o);
    {
        auto f = open_out(ctx, "value.csv");
        dump_frames(f, "V", v.time_grid, o.stationary ? std::vector<Field>{v.frames.front()} : v.frames,
                    ctx.cfg.frame_stride);
    }
    auto f = open_out(ctx, "free_boundary.csv");
    CsvWriter w(f, {"t", "b"});
    const std::size_t count = o.stationary ? 1 : v.free_boundary.size();
    for (std::size_t k = 0; k < count; ++k)
        if (v.free_boundary[k]) w.row(v.time_grid.t(k), *v.free_boundary[k]);
    if (v.complementarity) {
        auto c = open_out(ctx, "complementarity.txt");
        c << "min_continuation=" << format_number(v.complementarity->min_continuation) << '\n'
          << "min_gap=" << format_number(v.complementarity->min_gap) << '\n'
          << "max_product=" << format_number(v.complementarity->max_product) << '\n';
    }
    return 0;
}

int cmd_sweep(const Context& ctx) {
    const Preset p = resolve_preset(ctx.cfg);
    SweepConfig sc;
    sc.damping = ctx.cfg.damping;
    sc.max_iters = ctx.cfg.max_iters;
    sc.tol = ctx.cfg.tol;
    sc.jobs = ctx.jobs;
    SweepTargets targets;
    targets.boundary = p.boundary;
    const SweepState st = fb_sweep(p.spec, p.rho0, p.grid, p.time_grid, targets, sc);
    {
        auto f = open_out(ctx, "residuals.csv");
        CsvWriter w(f, {"iter", "r_os1", "r_os2", "r_os4", "r_os5", "objective"});
        for (const auto& r : st.history) w.row(r.iter, r.os1, r.os2, r.os4, r.os5, r.objective);
    }
    {
        auto f = open_out(ctx, "costate.csv");
        dump_frames(f, "lambda", st.costate.time_grid, st.costate.frames, ctx.cfg.frame_stride);
    }
    {
        auto f = open_out(ctx, "control.csv");
        dump_frames(f, "u", st.time_grid, st.controls, ctx.cfg.frame_stride);
    }
    auto s = open_out(ctx, "summary.txt");
    s << "converged=" << (st.converged ? 1 : 0) << '\n' << "eta=" << format_number(st.eta) << '\n';
    if (!st.converged) {
        std::cerr << "sweep did not converge; residual history written\n";
        return kSolverError;
    }
    return 0;
}

int cmd_reports(const Context& ctx, bool bench) {
    BenchConfig bc;
    bc.tol_scale = ctx.cfg.tol_scale;
    bc.jobs = ctx.jobs;
    bc.seed = ctx.cfg.seed;
    const auto reports = bench ? run_benchmark(ctx.target, bc) : run_check(ctx.target, bc);
    std::cout << format_reports(reports);
    auto f = open_out(ctx, bench ? "bench.csv" : "check.csv");
    write_reports_csv(f, ctx.target, reports);
    return all_pass(reports) ? 0 : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"density-steering solvers: Fokker-Planck, characteristics, Monte Carlo, HJB, optimality sweep"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    int jobs = 0;
    std::optional<double> tol_scale;
    app.add_option("--config", config_path, "configuration file (key = value)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--jobs", jobs, "worker threads (default: DENSITY_STEER_JOBS or 1)");
    app.add_option("--tol-scale", tol_scale, "multiply check tolerances");

    app.fallthrough();
    std::string target;
    app.add_subcommand("fp", "Fokker-Planck density path for the preset");
    app.add_subcommand("transform", "score-corrected velocity field and characteristic ensemble");
    app.add_subcommand("mc", "Euler-Maruyama paths with first-hitting stopping");
    app.add_subcommand("hjb", "value function and feedback by the Dirichlet HJB solve");
    app.add_subcommand("vi", "obstacle variational inequality and free boundary");
    app.add_subcommand("sweep", "forward-backward optimality sweep");
    auto* bench = app.add_subcommand("bench", "run a named benchmark against its oracle");
    bench->add_option("name", target, "american_put | brownian_bridge | lq_steer")->required();
    auto* check = app.add_subcommand("check", "run a named diagnostic");
    check->add_option("name", target, "stein | marginal | deterministic | absorbing | ito | decomposition | duality")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    Context ctx;
    try {
        ctx.cfg = config_path.empty() ? RunConfig{} : parse_config(config_path);
        if (seed) ctx.cfg.seed = *seed;
        if (tol_scale) ctx.cfg.tol_scale = *tol_scale;
        if (!out_dir.empty()) ctx.cfg.out = out_dir;
        validate(ctx.cfg);
        ctx.jobs = resolve_jobs(jobs > 0 ? jobs : ctx.cfg.jobs);
        ctx.command = app.get_subcommands().front()->get_name();
        ctx.target = target;
        ctx.out = ctx.cfg.out;
        fs::create_directories(ctx.out);

        const auto start = std::chrono::steady_clock::now();
        int status = 0;
        if (ctx.command == "fp") status = cmd_fp(ctx);
        else if (ctx.command == "transform") status = cmd_transform(ctx);
        else if (ctx.command == "mc") status = cmd_mc(ctx);
        else if (ctx.command == "hjb") status = cmd_hjb(ctx);
        else if (ctx.command == "vi") status = cmd_vi(ctx);
        else if (ctx.command == "sweep") status = cmd_sweep(ctx);
        else if (ctx.command == "bench") status = cmd_reports(ctx, true);
        else status = cmd_reports(ctx, false);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_manifest(ctx, seconds);
        return status;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kSolverError;
    }
}
