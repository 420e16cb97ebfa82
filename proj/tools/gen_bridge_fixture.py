#!/usr/bin/env python3
"""Generate the frozen boundary-scale fixture for the Brownian-bridge stopping benchmark.

The optimal rule for maximizing E[X_tau] over a standard Brownian bridge on [0, 1]
stops at the first time X_t >= B * sqrt(1 - t). Two independent routes are used:

  1. root of the smooth-fit equation  B = (1 - B^2) * sqrt(2 pi) * exp(B^2 / 2) * Phi(B)
  2. a fine-grid stationary obstacle problem in self-similar coordinates
     y = x / sqrt(1 - t), s = -log(1 - t), where the bridge becomes
     dY = -Y/2 ds + dW and the value is h(y) = sup E[exp(-tau/2) Y_tau].

The fixture is written only if both routes agree to 1e-4.
"""
import math
import sys
from pathlib import Path

import numpy as np
from scipy import optimize, special


def smooth_fit_root():
    def eq(b):
        return (1.0 - b * b) * math.sqrt(2.0 * math.pi) * math.exp(0.5 * b * b) * special.ndtr(b) - b

    return optimize.brentq(eq, 0.5, 0.99, xtol=1e-14)


def obstacle_grid(y_min=-12.0, y_max=4.0, n=160001):
    # 0.5 h'' - 0.5 y h' - 0.5 h <= 0, h >= y, complementarity.
    # Brennan-Schwartz: the exercise region is a right half-line, so a backward
    # elimination followed by a projected forward substitution solves the LCP.
    y = np.linspace(y_min, y_max, n)
    dy = y[1] - y[0]
    diff = 0.5 / dy**2
    drift = -0.5 * y
    up = np.maximum(drift, 0.0) / dy
    dn = np.maximum(-drift, 0.0) / dy
    lower = -(diff + dn)
    upper = -(diff + up)
    diag = 2.0 * diff + up + dn + 0.5
    rhs = np.zeros(n)
    obstacle = y.copy()
    # boundary rows: h(y_min) ~ 0 (far continuation), h(y_max) = y_max (stopped)
    lower[0] = 0.0
    upper[0] = 0.0
    diag[0] = 1.0
    rhs[0] = 0.0
    lower[-1] = 0.0
    upper[-1] = 0.0
    diag[-1] = 1.0
    rhs[-1] = obstacle[-1]
    # eliminate from the continuation side (left) towards the exercise side, then
    # substitute back starting inside the exercise region with projection
    d = diag.copy()
    r = rhs.copy()
    for i in range(1, n):
        m = lower[i] / d[i - 1]
        d[i] -= m * upper[i - 1]
        r[i] -= m * r[i - 1]
    h = np.empty(n)
    h[-1] = max(r[-1] / d[-1], obstacle[-1])
    for i in range(n - 2, -1, -1):
        h[i] = max((r[i] - upper[i] * h[i + 1]) / d[i], obstacle[i])
    gap = h - obstacle
    contact = np.nonzero(gap <= 1e-12)[0]
    edge = contact[0]
    # gap grows quadratically past the edge: interpolate sqrt(gap) linearly
    g1 = math.sqrt(max(gap[edge - 1], 0.0))
    g2 = math.sqrt(max(gap[edge - 2], 0.0))
    x1, x2 = y[edge - 1], y[edge - 2]
    return (x1 * g2 - x2 * g1) / (g2 - g1)


def main():
    b_root = smooth_fit_root()
    b_grid = obstacle_grid()
    print(f"smooth-fit root   B = {b_root:.12f}")
    print(f"obstacle grid     B = {b_grid:.12f}")
    if abs(b_root - b_grid) > 1e-4:
        print("routes disagree; fixture not written", file=sys.stderr)
        return 1
    out = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "bridge_boundary_scale.txt"
    out.write_text(
        "# Brownian-bridge optimal stopping boundary scale, b(t) = B * sqrt(1 - t)\n"
        "# generated by tools/gen_bridge_fixture.py (smooth-fit root, cross-checked by grid obstacle solve)\n"
        f"B = {b_root:.12f}\n"
        f"B_grid = {b_grid:.12f}\n"
    )
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
