#include "dsteer/diagnostics.hpp"

#include "dsteer/csv.hpp"
#include "dsteer/fokker_planck.hpp"
#include "dsteer/sde_mc.hpp"
#include "dsteer/transform.hpp"
#include "dsteer/value_hjb.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace dsteer {

CheckReport CheckReport::make(std::string name, double value, double tolerance, std::string notes) {
    CheckReport r;
    r.name = std::move(name);
    r.value = value;
    r.tolerance = tolerance;
    r.pass = std::isfinite(value) && std::abs(value) <= tolerance;
    r.notes = std::move(notes);
    return r;
}

bool all_pass(const std::vector<CheckReport>& reports) {
    return std::all_of(reports.begin(), reports.end(), [](const CheckReport& r) { return r.pass; });
}

double stein_residual(const Field& rho, const std::function<double(double)>& zeta,
                      const std::function<double(double)>& zeta_prime) {
    const Field drho = gradient_central(rho);
    std::vector<double> integrand(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const double x = rho.grid.x(i);
        integrand[i] = zeta(x) * drho.values[i] + zeta_prime(x) * rho.values[i];
    }
    return trapezoid(integrand, rho.grid.dx());
}

namespace {

std::string at_time(double t) {
    std::ostringstream os;
    os << "t=" << t;
    return os.str();
}

}  // namespace

std::vector<CheckReport> marginal_equivalence_report(const Preset& preset, const MarginalConfig& cfg) {
    std::vector<double> checkpoints = cfg.checkpoints;
    std::sort(checkpoints.begin(), checkpoints.end());
    const double horizon = checkpoints.back();
    const double dt = preset.time_grid.dt();
    const TimeGrid tg = TimeGrid::with_step(preset.time_grid.t0(), horizon, dt);

    const DensityPath path = solve_fp(preset.spec, preset.feedback, preset.rho0, preset.grid, tg, preset.boundary);

    McConfig mc;
    mc.n_paths = cfg.samples;
    mc.dt = cfg.mc_dt;
    mc.seed = cfg.seed;
    mc.horizon = horizon;
    mc.t0 = tg.t0();
    mc.jobs = cfg.jobs;
    mc.snapshot_times = checkpoints;
    const McResult paths = simulate_killed(preset.spec, preset.feedback, preset.rho0, preset.boundary, mc);

    const VelocityField velocity = build_velocity_field(preset.spec, preset.feedback, path, preset.boundary);
    ParticleEnsemble particles = ParticleEnsemble::from_quantiles(preset.rho0, cfg.samples);
    const StopRule rule{preset.boundary, std::nullopt};

    std::vector<CheckReport> out;
    double t_prev = tg.t0();
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        const double t = checkpoints[c];
        advect_particles(particles, velocity, rule, t_prev, t, dt, cfg.jobs);
        t_prev = t;
        const Field fp = path.frame_at(t);
        const auto& snap = paths.snapshots[c];
        const auto mc_alive = snap.alive_positions();
        const auto ch_alive = particles.alive_positions();
        const std::string when = at_time(t);
        out.push_back(CheckReport::make("w1_mc_fp " + when, wasserstein1(mc_alive, fp), cfg.w1_tol));
        out.push_back(CheckReport::make("w1_mc_char " + when, wasserstein1(mc_alive, ch_alive), cfg.w1_tol));
        out.push_back(CheckReport::make("w1_fp_char " + when, wasserstein1(ch_alive, fp), cfg.w1_tol));
        if (preset.boundary.active()) {
            const double a = snap.alive_fraction();
            const double b = trapezoid(fp);
            const double ch = particles.alive_fraction();
            const double worst = std::max({std::abs(a - b), std::abs(a - ch), std::abs(b - ch)});
            std::ostringstream note;
            note << std::setprecision(6) << "mc=" << a << " fp=" << b << " char=" << ch;
            out.push_back(CheckReport::make("alive_mass " + when, worst, cfg.mass_tol, note.str()));
        }
    }
    return out;
}

CheckReport decomposition_report(const Preset& preset, const DecompositionConfig& cfg) {
    const ValueField value = solve_hjb_dirichlet(preset.spec, preset.boundary, preset.grid, preset.time_grid);
    const Field mu0 = Field::sample(preset.grid, [&](double x) { return preset.rho0(x); });
    const double predicted = distributional_value(value, mu0, preset.time_grid.t0());

    McConfig mc;
    mc.n_paths = cfg.paths;
    mc.dt = cfg.mc_dt;
    mc.seed = cfg.seed;
    mc.horizon = preset.time_grid.t1();
    mc.t0 = preset.time_grid.t0();
    mc.jobs = cfg.jobs;
    const McResult paths = simulate_killed(preset.spec, value.feedback(), preset.rho0, preset.boundary, mc);
    const CostEstimate est = estimate_cost(paths);

    const double tol = cfg.se_multiple * est.standard_error + cfg.relative * std::abs(est.mean);
    std::ostringstream note;
    note << std::setprecision(8) << "value=" << predicted << " mc=" << est.mean << " se=" << est.standard_error;
    return CheckReport::make("decomposition", std::abs(predicted - est.mean), tol, note.str());
}

std::string format_reports(const std::vector<CheckReport>& reports) {
    std::size_t width = 5;
    for (const auto& r : reports) width = std::max(width, r.name.size());
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(width)) << "check" << "  " << std::setw(14) << "value"
       << std::setw(14) << "tolerance" << std::setw(6) << "pass" << "notes\n";
    for (const auto& r : reports) {
        os << std::left << std::setw(static_cast<int>(width)) << r.name << "  " << std::setw(14)
           << std::setprecision(6) << r.value << std::setw(14) << r.tolerance << std::setw(6)
           << (r.pass ? "PASS" : "FAIL") << r.notes << '\n';
    }
    return os.str();
}

void write_reports_csv(std::ostream& os, const std::string& benchmark, const std::vector<CheckReport>& reports) {
    CsvWriter w(os, {"benchmark", "check", "value", "tolerance", "pass"});
    for (const auto& r : reports) w.row(benchmark, r.name, r.value, r.tolerance, r.pass ? 1 : 0);
}

}  // namespace dsteer
