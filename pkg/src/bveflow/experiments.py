"""Experiment plumbing: config parsing, initial/boundary data, snapshot and
report serialization, and the sweep / comparison drivers.

Output conventions: snapshot CSVs carry the header ``x,z,S`` with one row
per cell (row-major, z index outer) and every value printed in scientific
notation with 17 significant digits, which round-trips float64 exactly
and makes files byte-deterministic.  Report CSVs carry one row per step.
Alongside each CSV the drivers render a matching figure unless figures
are disabled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import figures
from .coefficients import corey
from .diagnostics import DiagnosticsReport, front_position, front_width, overshoot_max
from .grid import Grid, ScalarField
from .solver import (
    MID_HEIGHT,
    WIDTH_LEVELS,
    RunResult,
    SimConfig,
    StepFailure,
    run,
)


class ConfigError(ValueError):
    """Config text rejected; message carries the line number."""


@dataclass(frozen=True)
class InitialCondition:
    """Initial saturation data.

    ``slab`` is the product of a steep rational ramp in x and a piecewise
    inflow profile in z (the plateau on the half-open band
    (slab_lo, slab_hi], zero outside); ``constant`` fills the domain with
    one value.  The discontinuous band is sampled at cell centers without
    smoothing, since cell values are volume averages and the front
    features depend on the sharp band.
    """

    kind: str = "slab"
    plateau: float = 0.9
    steepness: float = 1e5
    slab_lo: float = 0.25
    slab_hi: float = 0.75
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("slab", "constant"):
            raise ValueError(f"unknown initial condition kind {self.kind!r}")
        if not 0.0 <= self.plateau <= 1.0:
            raise ValueError("plateau must lie in [0,1]")
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("constant value must lie in [0,1]")
        if not 0.0 <= self.slab_lo < self.slab_hi <= 1.0:
            raise ValueError("slab bounds must satisfy 0 <= lo < hi <= 1")

    def ramp(self, x):
        x = np.asarray(x, dtype=float)
        return (1.0 - x) ** 2 / (self.steepness * x**2 + (1.0 - x) ** 2)

    def inflow_profile(self, z):
        z = np.asarray(z, dtype=float)
        band = (z > self.slab_lo) & (z <= self.slab_hi)
        if self.kind == "constant":
            return np.full_like(z, self.value)
        return np.where(band, self.plateau, 0.0)

    def eval(self, x, z):
        if self.kind == "constant":
            return np.broadcast_to(
                float(self.value), np.broadcast(np.asarray(x), np.asarray(z)).shape
            ).copy()
        return self.ramp(x) * self.inflow_profile(z)

    def realize(self, grid: Grid) -> ScalarField:
        x = grid.x_centers()[:, None]
        z = grid.z_centers()[None, :]
        return ScalarField(grid, self.eval(x, z))


# ---------------------------------------------------------------------------
# config file parsing


_CONFIG_KEYS = {
    "nx": int,
    "nz": int,
    "beta2": float,
    "viscosity_ratio": float,
    "end_time": float,
    "cfl": float,
    "bc_mode": str,
    "dt_max": float,
    "solver_tol": float,
    "clamp": bool,
    "snapshot_times": tuple,
    "ic_kind": str,
    "plateau": float,
    "steepness": float,
    "slab_lo": float,
    "slab_hi": float,
    "constant_value": float,
}

_IC_KEYS = {"ic_kind", "plateau", "steepness", "slab_lo", "slab_hi", "constant_value"}

_BOOL_WORDS = {
    "true": True,
    "yes": True,
    "on": True,
    "1": True,
    "false": False,
    "no": False,
    "off": False,
    "0": False,
}


def _parse_value(key, raw, lineno):
    kind = _CONFIG_KEYS[key]
    try:
        if kind is bool:
            word = raw.strip().lower()
            if word not in _BOOL_WORDS:
                raise ValueError(f"not a boolean: {raw!r}")
            return _BOOL_WORDS[word]
        if kind is tuple:
            return tuple(float(p) for p in raw.split(",") if p.strip())
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw.strip()
    except ValueError as err:
        raise ConfigError(f"line {lineno}: bad value for {key}: {err}") from None


def parse_config(text: str) -> tuple[SimConfig, InitialCondition]:
    """Parse ``key = value`` lines into a validated configuration.

    Unknown keys, malformed lines, and out-of-range values are rejected
    with line-precise errors; parsing is total (a valid pair or an
    exception, never a partial object).
    """
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw, lineno)

    ic_kwargs = {}
    if "ic_kind" in values:
        ic_kwargs["kind"] = values.pop("ic_kind")
    if "constant_value" in values:
        ic_kwargs["value"] = values.pop("constant_value")
    for key in ("plateau", "steepness", "slab_lo", "slab_hi"):
        if key in values:
            ic_kwargs[key] = values.pop(key)
    try:
        ic = InitialCondition(**ic_kwargs)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    try:
        cfg = SimConfig(**values)
    except (ValueError, TypeError) as err:
        raise ConfigError(str(err)) from None
    return cfg, ic


# ---------------------------------------------------------------------------
# serialization


def _fmt(v) -> str:
    return f"{v:.16e}"


def write_snapshot(S: ScalarField, t: float, path) -> None:
    g = S.grid
    x = g.x_centers()
    z = g.z_centers()
    lines = ["x,z,S"]
    v = S.values
    for j in range(g.nz):
        zj = _fmt(z[j])
        for i in range(g.nx):
            lines.append(f"{_fmt(x[i])},{zj},{_fmt(v[i, j])}")
    path = Path(path)
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as err:
        raise OSError(f"cannot write snapshot {path}: {err}") from err


def read_snapshot(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = Path(path).read_text().strip().splitlines()
    if rows[0] != "x,z,S":
        raise ValueError(f"{path}: unexpected snapshot header {rows[0]!r}")
    data = np.array([[float(p) for p in row.split(",")] for row in rows[1:]])
    return data[:, 0], data[:, 1], data[:, 2]


def write_report(report: DiagnosticsReport, path) -> None:
    lines = [",".join(report.COLUMNS)]
    for idx in range(report.n_steps):
        cells = []
        for name in report.COLUMNS:
            value = report.column(name)[idx]
            cells.append(str(value) if name == "cg_iterations" else _fmt(value))
        lines.append(",".join(cells))
    path = Path(path)
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as err:
        raise OSError(f"cannot write report {path}: {err}") from err


# ---------------------------------------------------------------------------
# drivers


def _snapshot_stem(t: float) -> str:
    return f"snapshot_t{t:.6f}"


def run_single(
    cfg: SimConfig,
    ic: InitialCondition,
    out_dir,
    *,
    render: bool = True,
) -> RunResult:
    """Run one simulation and write snapshots, the report, and figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    coeffs = corey(cfg.viscosity_ratio)
    result = run(cfg, coeffs, ic)
    for t, snap in result.snapshots:
        stem = _snapshot_stem(t)
        write_snapshot(snap, t, out / f"{stem}.csv")
        if render:
            figures.render_snapshot(snap, t, out / f"{stem}.png")
    write_report(result.report, out / "report.csv")
    if render:
        figures.render_report(result.report, out / "report.png")
    return result


DEFAULT_SWEEP = (1e-2, 1e-3, 1e-4, 1e-5)


@dataclass
class SweepEntry:
    beta2: float
    width: float
    front_pos: float
    overshoot: float
    failed: bool = False
    error: str = ""


@dataclass
class SweepReport:
    entries: list
    monotone: bool

    def widths(self):
        return [e.width for e in self.entries]


def run_sweep(
    base_cfg: SimConfig,
    beta2_list=DEFAULT_SWEEP,
    out_dir=None,
    *,
    render: bool = True,
) -> SweepReport:
    """Run the pseudo-parabolic model across a list of beta^2 values.

    Produces per-value snapshots plus a combined front-width table and a
    verdict on whether the width decreases strictly along the list.
    Individual run failures are isolated; the sweep continues.
    """
    beta2_list = list(beta2_list)
    if not beta2_list:
        raise ValueError("beta2 sweep list must not be empty")
    out = Path(out_dir) if out_dir is not None else None
    ic = InitialCondition()
    entries = []
    for b2 in beta2_list:
        cfg = replace(base_cfg, beta2=float(b2))
        sub = None
        if out is not None:
            sub = out / f"beta2_{b2:.0e}"
        try:
            if sub is not None:
                result = run_single(cfg, ic, sub, render=render)
            else:
                result = run(cfg, corey(cfg.viscosity_ratio), ic)
        except StepFailure as err:
            entries.append(
                SweepEntry(b2, math.nan, math.nan, math.nan, True, str(err))
            )
            continue
        final = result.final.S
        entries.append(
            SweepEntry(
                beta2=b2,
                width=front_width(final, WIDTH_LEVELS[0], WIDTH_LEVELS[1], MID_HEIGHT),
                front_pos=result.report.front_pos[-1] if result.report.n_steps else 0.0,
                overshoot=overshoot_max(final, ic.plateau),
            )
        )
    widths = [e.width for e in entries]
    monotone = (
        all(math.isfinite(w) for w in widths)
        and all(a > b for a, b in zip(widths[:-1], widths[1:]))
    )
    report = SweepReport(entries, monotone)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        lines = ["beta2,front_width,front_pos,overshoot,failed"]
        for e in entries:
            lines.append(
                f"{_fmt(e.beta2)},{_fmt(e.width)},{_fmt(e.front_pos)},"
                f"{_fmt(e.overshoot)},{int(e.failed)}"
            )
        (out / "sweep.csv").write_text("\n".join(lines) + "\n")
        if render:
            figures.render_sweep(report, out / "sweep.png")
    return report


@dataclass
class CompareReport:
    bve_overshoot: float
    dve_overshoot: float
    bve_front: float
    dve_front: float
    degenerate: bool
    verdicts: dict

    @property
    def passed(self) -> bool:
        return not self.degenerate and all(self.verdicts.values())


def run_compare(
    cfg: SimConfig,
    out_dir=None,
    *,
    ic: InitialCondition | None = None,
    bve_beta2: float | None = None,
    render: bool = True,
) -> CompareReport:
    """Side-by-side run of the pseudo-parabolic model and its beta=0 limit.

    Verdicts: the pseudo-parabolic run must overshoot the plateau by more
    than 0.01, the transport-only run must not overshoot at all, and its
    front must travel at least as far.  A zero trajectory flags the
    comparison as degenerate (verdicts vacuous-fail).
    """
    ic = ic if ic is not None else InitialCondition()
    if bve_beta2 is None:
        bve_beta2 = cfg.beta2 if cfg.beta2 > 0 else 1e-6
    out = Path(out_dir) if out_dir is not None else None
    results = {}
    for label, b2 in (("bve", bve_beta2), ("dve", 0.0)):
        sub_cfg = replace(cfg, beta2=float(b2))
        if out is not None:
            results[label] = run_single(sub_cfg, ic, out / label, render=render)
        else:
            results[label] = run(sub_cfg, corey(sub_cfg.viscosity_ratio), ic)

    finals = {k: r.final.S for k, r in results.items()}
    degenerate = all(float(np.abs(f.values).max()) < 1e-14 for f in finals.values())
    bve_over = overshoot_max(finals["bve"], ic.plateau)
    dve_over = overshoot_max(finals["dve"], ic.plateau)
    bve_front = front_position(finals["bve"], 0.5, MID_HEIGHT)
    dve_front = front_position(finals["dve"], 0.5, MID_HEIGHT)
    verdicts = {
        "bve_overshoot_gt_0.01": (not degenerate) and bve_over > 0.01,
        "dve_overshoot_le_1e-10": (not degenerate) and dve_over <= 1e-10,
        "bve_front_le_dve_front": (not degenerate) and bve_front <= dve_front,
    }
    report = CompareReport(bve_over, dve_over, bve_front, dve_front, degenerate, verdicts)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        lines = ["quantity,bve,dve"]
        lines.append(f"overshoot,{_fmt(bve_over)},{_fmt(dve_over)}")
        lines.append(f"front_pos,{_fmt(bve_front)},{_fmt(dve_front)}")
        lines.append(f"degenerate,{int(degenerate)},{int(degenerate)}")
        for name, ok in verdicts.items():
            lines.append(f"verdict_{name},{int(ok)},{int(ok)}")
        (out / "compare.csv").write_text("\n".join(lines) + "\n")
        if render:
            figures.render_compare(
                finals["bve"], finals["dve"], MID_HEIGHT, out / "compare.png"
            )
    return report
