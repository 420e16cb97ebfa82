import math

import numpy as np
import pytest

import density_steer as ds


def test_registry():
    assert "lq_steer" in ds.preset_names()
    assert ds.benchmark_names() == ["american_put", "brownian_bridge", "lq_steer"]
    assert "stein" in ds.check_names()
    assert "dx" in ds.config_keys()


def test_problem_overrides():
    p = ds.problem("bm_absorb", horizon=0.5, dt=0.01)
    assert p.name == "bm_absorb"
    assert p.t[-1] == pytest.approx(0.5)
    assert len(p.t) == 51
    assert np.trapz(p.initial_density(), p.x) == pytest.approx(1.0, abs=1e-3)


def test_errors_carry_their_kind():
    with pytest.raises(ds.DsteerError) as info:
        ds.problem("nope")
    assert info.value.kind in ("ValidationError", "UnknownPreset")
    with pytest.raises(ds.DsteerError) as info:
        ds.problem("ou", dt=-1)
    assert info.value.kind == "ValidationError"
    with pytest.raises(ds.DsteerError):
        ds.wasserstein1([], [1.0])


def test_fp_shapes_and_mass():
    p = ds.problem("integrator", horizon=0.5)
    out = ds.solve_fp(p)
    x, rho = out["x"], out["rho"]
    assert rho.shape == (len(out["t"]), len(x))
    assert np.all(np.abs(out["mass_balance"]) < 1e-2)
    m0 = np.trapz(rho[0], x)
    assert m0 == pytest.approx(1.0, abs=1e-3)


def test_absorbed_brownian_survival_matches_erf():
    p = ds.problem("bm_absorb", horizon=0.5)
    fp = ds.solve_fp(p)
    mc = ds.simulate(p, paths=20000, seed=5)
    assert abs(mc["survival"] - fp["alive_mass"][-1]) < 0.02
    again = ds.simulate(p, paths=20000, seed=5, jobs=2)
    assert np.array_equal(mc["x_final"], again["x_final"])


def test_wasserstein_of_a_shift():
    a = np.linspace(0.0, 1.0, 1001)
    assert ds.wasserstein1(a, a + 0.25) == pytest.approx(0.25, abs=1e-12)


def test_stein_standard_normal():
    x = np.linspace(-8, 8, 1601)
    rho = np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    assert abs(ds.stein_residual(x, rho, lambda z: z, lambda z: 1.0)) < 1e-4


def test_put_oracle_closed_form():
    o = ds.american_put_oracle(0.05, 0.4, 1.0)
    assert o.boundary == pytest.approx(0.1 / 0.26, rel=1e-12)
    assert o.value(o.boundary) == pytest.approx(1.0 - o.boundary)


def test_bridge_and_riccati_oracles():
    assert ds.brownian_bridge_oracle() == pytest.approx(ds.BRIDGE_BOUNDARY_SCALE, abs=1e-9)
    r = ds.lq_riccati_oracle(0.0, 1.0, 0.0, 1.0, 1.0, 1.0)
    assert r.P(0.25) == pytest.approx(1.0 / 1.75, abs=1e-9)


def test_stationary_put_vi():
    out = ds.solve_vi(ds.problem("american_put_log"))
    assert out["stationary"]
    b = math.exp(out["free_boundary"][0])
    assert b == pytest.approx(0.1 / 0.26, rel=0.01)


def test_hjb_and_transform_shapes():
    p = ds.problem("ou_cost", horizon=0.2)
    v = ds.solve_hjb(p)
    assert v["V"].shape == v["u"].shape == (len(v["t"]), len(v["x"]))
    tr = ds.transform(ds.problem("ou", horizon=0.2), particles=2000)
    assert tr["positions"].shape == (2000,)
    assert tr["velocity"].shape[1] == len(tr["x"])


def test_coarse_sweep_converges():
    out = ds.sweep(ds.problem("lq_steer", dx=0.05, dt=0.01))
    assert out["converged"]
    assert out["history"][-1]["os1"] <= 1e-3


def test_check_reports():
    reports = ds.run_check("stein")
    assert reports and all(r["passed"] for r in reports)
    assert {"name", "value", "tolerance", "passed", "note"} <= set(reports[0])
