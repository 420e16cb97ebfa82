"""Smoke tests for the dsteer executable: exit codes, output shapes, reproducibility."""

import csv
import pathlib
import subprocess
import sys

CLI = pathlib.Path(sys.argv[1])
WORK = pathlib.Path(sys.argv[2])
WORK.mkdir(parents=True, exist_ok=True)
failures = []


def run(args, config=None, out=None):
    cmd = [str(CLI)]
    if config is not None:
        path = WORK / f"{abs(hash(config))}.ini"
        path.write_text(config)
        cmd += ["--config", str(path)]
    if out is not None:
        cmd += ["--out", str(WORK / out)]
    return subprocess.run(cmd + args, capture_output=True, text=True)


def expect(name, cond, detail=""):
    print(("ok   " if cond else "FAIL ") + name + (f"  {detail}" if detail and not cond else ""))
    if not cond:
        failures.append(name)


def rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


# fp: one density frame per stored step and one flux row per time node
r = run(["fp"], "preset = bm_absorb\nhorizon = 0.5\ndt = 0.01\nframe_stride = 10\n", "fp")
expect("fp exits 0", r.returncode == 0, r.stderr)
if r.returncode == 0:
    dens = rows(WORK / "fp" / "density.csv")
    flux = rows(WORK / "fp" / "flux.csv")
    expect("density header", dens[0] == ["t", "x", "rho"], str(dens[0]))
    expect("flux header", flux[0] == ["t", "flux_left", "flux_right", "alive_mass"], str(flux[0]))
    expect("flux rows = steps + 1", len(flux) - 1 == 51, str(len(flux) - 1))
    times = sorted({float(row[0]) for row in dens[1:]})
    expect("density frames every 10 steps", len(times) == 6, str(times))
    manifest = (WORK / "fp" / "manifest.txt").read_text()
    expect("manifest records the preset", "preset = bm_absorb" in manifest, manifest)

# mc reproducibility under a fixed seed
cfg = "preset = bm_absorb\npaths = 4000\n"
a = run(["--seed", "11", "mc"], cfg, "mc_a")
b = run(["--seed", "11", "--jobs", "3", "mc"], cfg, "mc_b")
c = run(["--seed", "12", "mc"], cfg, "mc_c")
expect("mc exits 0", a.returncode == b.returncode == c.returncode == 0, a.stderr + b.stderr + c.stderr)
if a.returncode == b.returncode == c.returncode == 0:
    names = sorted(p.name for p in (WORK / "mc_a").glob("*.csv"))
    expect("mc writes csv", len(names) > 0)
    same = all((WORK / "mc_a" / n).read_bytes() == (WORK / "mc_b" / n).read_bytes() for n in names)
    expect("mc identical across jobs", same)
    differ = any((WORK / "mc_a" / n).read_bytes() != (WORK / "mc_c" / n).read_bytes() for n in names)
    expect("mc seed changes the output", differ)

# checks and benchmarks
r = run(["check", "stein"], out="stein")
expect("check stein exits 0", r.returncode == 0, r.stdout + r.stderr)
expect("check writes its report", (WORK / "stein" / "report.csv").exists() or any((WORK / "stein").glob("*.csv")))
r = run(["--tol-scale", "1e-9", "check", "decomposition"], out="tight")
expect("failing check exits 2", r.returncode == 2, f"{r.returncode} {r.stderr}")
r = run(["bench", "american_put"], out="put")
expect("bench american_put exits 0", r.returncode == 0, r.stdout + r.stderr)
r = run(["bench", "nope"], out="nope")
expect("unknown benchmark exits 1", r.returncode == 1, str(r.returncode))

# configuration errors
r = run(["fp"], "preset = no_such_preset\n", "bad1")
expect("unknown preset exits 1", r.returncode == 1, str(r.returncode))
expect("unknown preset is named", "no_such_preset" in r.stderr, r.stderr)
r = run(["fp"], "preset = ou\nsigm = 1\n", "bad2")
expect("misspelled key exits 1", r.returncode == 1 and "sigm" in r.stderr, r.stderr)
r = run(["fp"], "preset = ou\ndt = -1\n", "bad3")
expect("negative dt exits 1", r.returncode == 1 and "dt" in r.stderr, r.stderr)
r = run(["frobnicate"])
expect("unknown subcommand is a usage error", r.returncode != 0)

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
