"""Density steering under first-hitting stopping: Fokker-Planck paths, score-corrected
characteristics, killed Monte Carlo, HJB / obstacle solves and forward-backward sweeps."""

from ._density_steer import (
    BRIDGE_BOUNDARY_SCALE,
    DsteerError,
    Problem,
    PutOracle,
    RiccatiOracle,
    __version__,
    american_put_oracle,
    benchmark_names,
    brownian_bridge_oracle,
    check_names,
    config_keys,
    lq_riccati_oracle,
    preset_names,
    problem,
    run_benchmark,
    run_check,
    simulate,
    solve_fp,
    solve_hjb,
    solve_vi,
    stein_residual,
    sweep,
    transform,
    wasserstein1,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
