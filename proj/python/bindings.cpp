#include "dsteer/bench.hpp"
#include "dsteer/config.hpp"
#include "dsteer/diagnostics.hpp"
#include "dsteer/errors.hpp"
#include "dsteer/fokker_planck.hpp"
#include "dsteer/optimality.hpp"
#include "dsteer/presets.hpp"
#include "dsteer/sde_mc.hpp"
#include "dsteer/transform.hpp"
#include "dsteer/value_hjb.hpp"

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>
#include <sstream>

namespace py = pybind11;
using namespace dsteer;

namespace {

using Array = py::array_t<double>;

Array to_array(const std::vector<double>& v) { return Array(static_cast<py::ssize_t>(v.size()), v.data()); }

Array to_array(const std::vector<char>& v) {
    Array out(static_cast<py::ssize_t>(v.size()));
    auto m = out.mutable_unchecked<1>();
    for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<py::ssize_t>(i)) = v[i] ? 1.0 : 0.0;
    return out;
}

/// Frames stacked as (time, space).
Array stack(const std::vector<Field>& frames) {
    const std::size_t nt = frames.size(), nx = nt ? frames.front().size() : 0;
    Array out({static_cast<py::ssize_t>(nt), static_cast<py::ssize_t>(nx)});
    auto m = out.mutable_unchecked<2>();
    for (std::size_t k = 0; k < nt; ++k)
        for (std::size_t i = 0; i < nx; ++i) m(k, i) = frames[k].values[i];
    return out;
}

Array nodes(const Grid1D& g) {
    std::vector<double> x(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) x[i] = g.x(i);
    return to_array(x);
}

Array times(const TimeGrid& tg) {
    std::vector<double> t(tg.steps() + 1);
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = tg.t(k);
    return to_array(t);
}

/// Keyword overrides rendered as config text so they pass the same validation as files.
struct Problem {
    RunConfig cfg;
    Preset preset;
};

Problem make_problem(const std::string& name, const py::kwargs& overrides) {
    std::ostringstream text;
    text << "preset = " << name << '\n';
    for (const auto& [k, v] : overrides) {
        const std::string key = py::str(k);
        std::string value = py::str(v);
        if (py::isinstance<py::bool_>(v)) value = v.cast<bool>() ? "true" : "false";
        text << key << " = " << value << '\n';
    }
    Problem p;
    p.cfg = parse_config_string(text.str());
    p.preset = resolve_preset(p.cfg);
    return p;
}

py::list reports_to_list(const std::vector<CheckReport>& reports) {
    py::list out;
    for (const auto& r : reports) {
        py::dict d;
        d["name"] = r.name;
        d["value"] = r.value;
        d["tolerance"] = r.tolerance;
        d["passed"] = r.pass;
        d["note"] = r.notes;
        out.append(d);
    }
    return out;
}

BenchConfig bench_config(double tol_scale, int jobs, std::uint64_t seed) {
    BenchConfig c;
    c.tol_scale = tol_scale;
    c.jobs = jobs;
    c.seed = seed;
    return c;
}

}  // namespace

PYBIND11_MODULE(_density_steer, m) {
    m.doc() = "Density steering: Fokker-Planck, characteristics, Monte Carlo, HJB and optimality sweeps";
    m.attr("__version__") = DSTEER_VERSION;

    static py::handle error_type = py::exception<Error>(m, "DsteerError").release();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object inst = py::reinterpret_borrow<py::object>(error_type)(std::string(e.what()));
            inst.attr("kind") = std::string(to_string(e.kind()));
            PyErr_SetObject(error_type.ptr(), inst.ptr());
        }
    });

    m.def("preset_names", &preset_names);
    m.def("benchmark_names", &benchmark_names);
    m.def("check_names", &check_names);
    m.def("config_keys", &config_keys);

    py::class_<Problem>(m, "Problem", "A preset with configuration overrides applied")
        .def_property_readonly("name", [](const Problem& p) { return p.preset.name; })
        .def_property_readonly("notes", [](const Problem& p) { return p.preset.notes; })
        .def_property_readonly("x", [](const Problem& p) { return nodes(p.preset.grid); })
        .def_property_readonly("t", [](const Problem& p) { return times(p.preset.time_grid); })
        .def_property_readonly("seed", [](const Problem& p) { return p.cfg.seed; })
        .def("initial_density", [](const Problem& p) {
            const Grid1D& g = p.preset.grid;
            std::vector<double> v(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) v[i] = p.preset.rho0(g.x(i));
            return to_array(v);
        })
        .def("__repr__", [](const Problem& p) { return "<Problem " + p.preset.name + ">"; });

    m.def("problem", &make_problem, py::arg("preset"),
          "Build a problem from a preset name; keyword arguments use the config-file keys");

    m.def(
        "solve_fp",
        [](const Problem& p) {
            const Preset& s = p.preset;
            const DensityPath path = solve_fp(s.spec, s.feedback, s.rho0, s.grid, s.time_grid, s.boundary);
            std::vector<double> left, right;
            for (const auto& r : path.exit_flux) {
                left.push_back(r.flux_left);
                right.push_back(r.flux_right);
            }
            py::dict d;
            d["t"] = times(path.time_grid);
            d["x"] = nodes(s.grid);
            d["rho"] = stack(path.frames);
            d["flux_left"] = to_array(left);
            d["flux_right"] = to_array(right);
            d["alive_mass"] = to_array(path.alive_mass);
            d["mass_balance"] = to_array(mass_balance(path));
            return d;
        },
        py::arg("problem"), "Implicit Fokker-Planck density path with exit fluxes");

    m.def(
        "transform",
        [](const Problem& p, std::size_t particles, int jobs) {
            const Preset& s = p.preset;
            const DensityPath path = solve_fp(s.spec, s.feedback, s.rho0, s.grid, s.time_grid, s.boundary);
            const VelocityField vel = build_velocity_field(s.spec, s.feedback, path, s.boundary);
            ParticleEnsemble e = ParticleEnsemble::from_quantiles(s.rho0, particles);
            advect_particles(e, vel, StopRule{s.boundary, std::nullopt}, s.time_grid.t0(), s.time_grid.t1(),
                             s.time_grid.dt(), jobs);
            std::vector<Field> frames;
            for (std::size_t k = 0; k < vel.frames.size(); ++k) frames.push_back(vel.frame(k));
            py::dict d;
            d["t"] = times(vel.time_grid);
            d["x"] = nodes(s.grid);
            d["velocity"] = stack(frames);
            d["positions"] = to_array(e.positions);
            d["alive"] = to_array(e.alive);
            d["stop_time"] = to_array(e.stop_time);
            return d;
        },
        py::arg("problem"), py::arg("particles") = 10000, py::arg("jobs") = 1,
        "Score-corrected velocity field and the quantile ensemble carried along it");

    m.def(
        "simulate",
        [](const Problem& p, std::size_t paths, std::optional<std::uint64_t> seed, std::optional<double> dt, int jobs) {
            const Preset& s = p.preset;
            McConfig mc;
            mc.n_paths = paths;
            mc.dt = dt.value_or(p.cfg.mc_dt.value_or(s.time_grid.dt()));
            mc.seed = seed.value_or(p.cfg.seed);
            mc.t0 = s.time_grid.t0();
            mc.horizon = s.time_grid.t1();
            mc.jobs = jobs;
            const McResult r = simulate_killed(s.spec, s.feedback, s.rho0, s.boundary, mc);
            const CostEstimate est = estimate_cost(r);
            py::dict d;
            d["x_final"] = to_array(r.x_final);
            d["stop_time"] = to_array(r.stop_time);
            d["alive"] = to_array(r.alive);
            d["cost"] = to_array(r.cost);
            d["survival"] = r.survival();
            d["mean_cost"] = est.mean;
            d["standard_error"] = est.standard_error;
            return d;
        },
        py::arg("problem"), py::arg("paths") = 10000, py::arg("seed") = py::none(), py::arg("dt") = py::none(),
        py::arg("jobs") = 1, "Euler-Maruyama paths killed at the stopping boundary");

    m.def(
        "solve_hjb",
        [](const Problem& p) {
            const Preset& s = p.preset;
            const ValueField v = solve_hjb_dirichlet(s.spec, s.boundary, s.grid, s.time_grid);
            py::dict d;
            d["t"] = times(v.time_grid);
            d["x"] = nodes(s.grid);
            d["V"] = stack(v.frames);
            d["u"] = stack(v.controls);
            return d;
        },
        py::arg("problem"), "Backward HJB value and minimizing feedback");

    m.def(
        "solve_vi",
        [](const Problem& p, std::optional<double> omega) {
            const Preset& s = p.preset;
            ViOptions o;
            o.stationary = p.cfg.stationary.value_or(s.spec.discount > 0.0);
            o.time_grid = s.time_grid;
            o.omega = omega.value_or(p.cfg.omega);
            o.ends = o.stationary ? ViEnds::Linear : ViEnds::Obstacle;
            o.control = s.feedback;
            const ValueField v = solve_obstacle_vi(s.spec, s.spec.terminal_cost, s.grid, o);
            std::vector<double> fb;
            for (const auto& b : v.free_boundary) fb.push_back(b.value_or(std::numeric_limits<double>::quiet_NaN()));
            py::dict d;
            d["t"] = times(v.time_grid);
            d["x"] = nodes(s.grid);
            d["V"] = o.stationary ? stack({v.frames.front()}) : stack(v.frames);
            d["free_boundary"] = to_array(fb);
            d["stationary"] = o.stationary;
            if (v.complementarity) {
                d["min_continuation"] = v.complementarity->min_continuation;
                d["min_gap"] = v.complementarity->min_gap;
                d["max_product"] = v.complementarity->max_product;
            }
            return d;
        },
        py::arg("problem"), py::arg("omega") = py::none(), "Obstacle problem by PSOR with the free boundary");

    m.def(
        "sweep",
        [](const Problem& p, int jobs) {
            const Preset& s = p.preset;
            SweepConfig sc;
            sc.damping = p.cfg.damping;
            sc.max_iters = p.cfg.max_iters;
            sc.tol = p.cfg.tol;
            sc.jobs = jobs;
            SweepTargets targets;
            targets.boundary = s.boundary;
            const SweepState st = fb_sweep(s.spec, s.rho0, s.grid, s.time_grid, targets, sc);
            py::list history;
            for (const auto& r : st.history) {
                py::dict h;
                h["iter"] = r.iter;
                h["os1"] = r.os1;
                h["os2"] = r.os2;
                h["os4"] = r.os4;
                h["os5"] = r.os5;
                h["objective"] = r.objective;
                history.append(h);
            }
            py::dict d;
            d["converged"] = st.converged;
            d["eta"] = st.eta;
            d["history"] = history;
            d["t"] = times(st.time_grid);
            d["x"] = nodes(s.grid);
            d["u"] = stack(st.controls);
            d["costate"] = stack(st.costate.frames);
            return d;
        },
        py::arg("problem"), py::arg("jobs") = 1, "Forward-backward sweep on the optimality system");

    m.def(
        "wasserstein1",
        [](const std::vector<double>& a, const std::vector<double>& b) { return wasserstein1(a, b); },
        py::arg("a"), py::arg("b"), "W1 distance between two empirical samples");

    m.def(
        "stein_residual",
        [](const std::vector<double>& x, const std::vector<double>& rho, const std::function<double(double)>& zeta,
           const std::function<double(double)>& dzeta) {
            if (x.size() < 2 || x.size() != rho.size()) throw Error(ErrorKind::InvalidArgument, "x and rho must match");
            Field f(Grid1D(x.front(), x.back(), x.size()), 0.0);
            f.values = rho;
            return stein_residual(f, zeta, dzeta);
        },
        py::arg("x"), py::arg("rho"), py::arg("zeta"), py::arg("dzeta"),
        "Integral of rho (zeta' + zeta d log rho) on a uniform grid");

    py::class_<PutOracle>(m, "PutOracle")
        .def_readonly("boundary", &PutOracle::boundary)
        .def_readonly("gamma", &PutOracle::gamma)
        .def("value", &PutOracle::value)
        .def("derivative", &PutOracle::derivative);
    m.def("american_put_oracle", &american_put_oracle, py::arg("rate"), py::arg("sigma"), py::arg("strike"));
    m.def("brownian_bridge_oracle", &brownian_bridge_oracle);
    m.attr("BRIDGE_BOUNDARY_SCALE") = kBridgeBoundaryScale;

    py::class_<RiccatiOracle>(m, "RiccatiOracle")
        .def("P", &RiccatiOracle::P)
        .def("feedback", &RiccatiOracle::feedback)
        .def("value", &RiccatiOracle::value)
        .def("costate", &RiccatiOracle::costate);
    m.def("lq_riccati_oracle", &lq_riccati_oracle, py::arg("a"), py::arg("b"), py::arg("q"), py::arg("r"),
          py::arg("qf"), py::arg("horizon"), py::arg("sigma") = 0.0);

    m.def(
        "run_benchmark",
        [](const std::string& name, double tol_scale, int jobs, std::uint64_t seed) {
            return reports_to_list(run_benchmark(name, bench_config(tol_scale, jobs, seed)));
        },
        py::arg("name"), py::arg("tol_scale") = 1.0, py::arg("jobs") = 1, py::arg("seed") = 1);
    m.def(
        "run_check",
        [](const std::string& name, double tol_scale, int jobs, std::uint64_t seed) {
            return reports_to_list(run_check(name, bench_config(tol_scale, jobs, seed)));
        },
        py::arg("name"), py::arg("tol_scale") = 1.0, py::arg("jobs") = 1, py::arg("seed") = 1);
}
