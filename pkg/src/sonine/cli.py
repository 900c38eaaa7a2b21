"""Command line front end: ``sonine run <config>`` and ``sonine list-targets``.

A config is a YAML file holding a list of scenarios::

    tolerance: 0.05            # default slope tolerance (optional)
    scenarios:
      - name: rl-l2
        experiment: homogeneous   # relaxation | homogeneous | forced | karamata | fundamental
        kernel: {variant: FractionalRL, alpha: 0.5}
        rho: 2
        dim: 1
        grid: {L: 400, M: 16384, t_end: 1000, n_steps: 2000}
        checkpoints: {t_first: 1, per_decade: 16}
        initial: {kind: gaussian, std: 1.0}
        r: 2
        targets:
          - {id: "Theo:Up:L2", tolerance: 0.02, window: [100, 1000]}

See the README for every field.  Each scenario writes its tables to
``<out>/<name>/`` and all verdicts go to ``<out>/report.json``.

Exit codes: 0 when every verdict passes, 2 when some verdict fails and 1
when a config or a scenario could not be processed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from . import decay
from .decay import RateTarget, Verdict
from .grid import TimeGrid
from .kernels import KernelSpec
from .spectral import (Field, SeparableForcing, SpectralGrid, evolve_forced,
                       evolve_homogeneous, fundamental_solution_field,
                       geometric_checkpoints)
from .volterra import build_relaxation_table

log = logging.getLogger("sonine")

EXPERIMENTS = ("relaxation", "homogeneous", "forced", "karamata", "fundamental")
FLOAT_FMT = "%.12e"
DEFAULT_TOL = 0.05

# checks that are not rate laws; listed next to decay.TARGETS
EXTRA_TARGETS = {
    "identity": "relaxation; mu (1*r) + s = 1 at every node",
    "mass": "fundamental; the integral of Z(t) equals one",
}

ALLOWED = {
    "relaxation": {"targets_allowed": {"identity"}},
    "homogeneous": {"targets_allowed": {"Theo:Up:L2", "Theo:Low:L2",
                                        "Theo:Lr:Est:u0", "Theo:Grad:Sol"}},
    "forced": {"targets_allowed": {"Theo:Ex:decay", "Theo:Ex:decay:2", "Theo:Ex:decay:3"}},
    "karamata": {"targets_allowed": {"Karamata", "Laplace:k1"}},
    "fundamental": {"targets_allowed": {"mass"}},
}


class ConfigError(ValueError):
    pass


def all_targets() -> Dict[str, str]:
    out = dict(decay.TARGETS)
    out.update(EXTRA_TARGETS)
    return out


# config parsing


def _line_map(text: str) -> Dict[tuple, int]:
    """Map from key paths to 1-based line numbers."""
    lines: Dict[tuple, int] = {}

    def walk(node, path):
        lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                walk(v, path + (k.value,))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, path + (i,))

    root = yaml.compose(text, Loader=yaml.SafeLoader)
    if root is not None:
        walk(root, ())
    return lines


class _Ctx:
    """Raises :class:`ConfigError` with the field path and line number."""

    def __init__(self, lines, path=()):
        self.lines = lines
        self.path = path

    def sub(self, *keys):
        return _Ctx(self.lines, self.path + keys)

    def fail(self, msg):
        p = self.path
        while p and p not in self.lines:
            p = p[:-1]
        where = ".".join(str(k) for k in self.path) or "<root>"
        line = self.lines.get(p)
        at = f" (line {line})" if line else ""
        raise ConfigError(f"{where}{at}: {msg}")


def _num(ctx, d, key, default=None, positive=False, integer=False):
    if key not in d:
        if default is None:
            ctx.fail(f"missing required field {key!r}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        ctx.sub(key).fail(f"expected a number, got {v!r}")
    if integer and int(v) != v:
        ctx.sub(key).fail(f"expected an integer, got {v!r}")
    if positive and not v > 0:
        ctx.sub(key).fail(f"must be positive, got {v!r}")
    return int(v) if integer else float(v)


@dataclass
class TargetSpec:
    id: str
    tolerance: float
    window: Optional[tuple] = None
    mode: str = "match"
    p: Optional[float] = None
    centered: bool = False
    endpoint: bool = False


@dataclass
class Scenario:
    name: str
    experiment: str
    kernel: KernelSpec
    t_end: float
    n_steps: int
    rho: Optional[float] = None
    dim: int = 1
    L: Optional[float] = None
    M: Optional[int] = None
    t_first: Optional[float] = None
    per_decade: int = 16
    initial: Optional[dict] = None
    forcing: Optional[dict] = None
    r: float = 2.0
    mus: List[float] = field(default_factory=list)
    times: List[float] = field(default_factory=list)
    eps: Optional[float] = None
    prune: float = 1e-18
    path: str = "volterra"
    window: Optional[tuple] = None
    targets: List[TargetSpec] = field(default_factory=list)


def _window(ctx, w):
    if w is None:
        return None
    if not (isinstance(w, (list, tuple)) and len(w) == 2
            and all(isinstance(x, (int, float)) for x in w) and 0 < w[0] < w[1]):
        ctx.fail(f"window must be [t_lo, t_hi] with 0 < t_lo < t_hi, got {w!r}")
    return (float(w[0]), float(w[1]))


def _descriptor(ctx, d):
    if not isinstance(d, dict) or "kind" not in d:
        ctx.fail("expected a mapping with a 'kind' field")
    kind = d["kind"]
    if kind not in ("gaussian", "cosine", "delta"):
        ctx.sub("kind").fail(f"unknown kind {kind!r}; use gaussian, cosine or delta")
    allowed = {"gaussian": {"std", "mass"}, "cosine": {"mode", "amplitude"},
               "delta": {"mass", "std"}}[kind] | {"kind", "gamma"}
    extra = set(d) - allowed
    if extra:
        ctx.fail(f"unknown fields {sorted(extra)}")
    for key in ("std", "mass", "amplitude"):
        if key in d:
            _num(ctx, d, key, positive=(key == "std"))
    if "mode" in d:
        _num(ctx, d, "mode", integer=True)
    return dict(d)


def _parse_scenario(ctx, d, default_tol) -> Scenario:
    if not isinstance(d, dict):
        ctx.fail("each scenario must be a mapping")
    known = {"name", "experiment", "kernel", "rho", "dim", "grid", "checkpoints",
             "initial", "forcing", "r", "mus", "times", "eps", "prune", "path",
             "window", "targets"}
    extra = set(d) - known
    if extra:
        ctx.fail(f"unknown fields {sorted(extra)}")
    name = d.get("name")
    if not isinstance(name, str) or not name or "/" in name:
        ctx.sub("name").fail("a nonempty name without '/' is required")
    exp = d.get("experiment")
    if exp not in EXPERIMENTS:
        ctx.sub("experiment").fail(f"expected one of {EXPERIMENTS}, got {exp!r}")
    kd = d.get("kernel")
    if not isinstance(kd, dict):
        ctx.sub("kernel").fail("kernel must be a mapping with a 'variant' field")
    try:
        kernel = KernelSpec.from_dict(kd)
    except (TypeError, ValueError) as exc:
        ctx.sub("kernel").fail(str(exc))
    g = d.get("grid")
    if not isinstance(g, dict):
        ctx.sub("grid").fail("grid must be a mapping")
    gctx = ctx.sub("grid")
    sc = Scenario(name, exp, kernel,
                  t_end=_num(gctx, g, "t_end", 1.0 if exp == "fundamental" else None,
                             positive=True),
                  n_steps=_num(gctx, g, "n_steps", None, positive=True, integer=True))
    if sc.n_steps < 2:
        gctx.sub("n_steps").fail("need at least 2 steps")
    spatial = exp in ("homogeneous", "forced", "fundamental")
    if spatial:
        sc.rho = _num(ctx, d, "rho", None, positive=True)
        sc.dim = _num(ctx, d, "dim", 1, positive=True, integer=True)
        sc.L = _num(gctx, g, "L", None, positive=True)
        sc.M = _num(gctx, g, "M", None, positive=True, integer=True)
        if sc.M < 2 or sc.M & (sc.M - 1):
            gctx.sub("M").fail(f"M must be a power of two, got {sc.M}")
    cp = d.get("checkpoints", {}) or {}
    if not isinstance(cp, dict):
        ctx.sub("checkpoints").fail("checkpoints must be a mapping")
    if "t_first" in cp:
        sc.t_first = _num(ctx.sub("checkpoints"), cp, "t_first", positive=True)
    sc.per_decade = _num(ctx.sub("checkpoints"), cp, "per_decade", 16, positive=True,
                         integer=True)
    if exp == "homogeneous":
        if "initial" not in d:
            ctx.fail("homogeneous scenarios need 'initial'")
        sc.initial = _descriptor(ctx.sub("initial"), d["initial"])
    if exp == "forced":
        if "forcing" not in d:
            ctx.fail("forced scenarios need 'forcing'")
        fd = _descriptor(ctx.sub("forcing"), d["forcing"])
        gam = _num(ctx.sub("forcing"), fd, "gamma", None, positive=True)
        if gam > 1:
            ctx.sub("forcing", "gamma").fail("gamma must lie in (0, 1]")
        sc.forcing = fd
    if exp == "relaxation":
        mus = d.get("mus")
        if not (isinstance(mus, list) and mus
                and all(isinstance(m, (int, float)) and m >= 0 for m in mus)):
            ctx.sub("mus").fail("relaxation scenarios need a list of nonnegative mus")
        sc.mus = sorted({float(m) for m in mus})
    if exp == "fundamental":
        ts = d.get("times", [sc.t_end])
        if not (isinstance(ts, list) and ts and all(isinstance(t, (int, float)) and t > 0
                                                     for t in ts)):
            ctx.sub("times").fail("times must be a list of positive numbers")
        sc.times = [float(t) for t in ts]
    sc.r = _num(ctx, d, "r", 2.0)
    if not sc.r >= 1:
        ctx.sub("r").fail("norm index r must be >= 1")
    if "eps" in d:
        sc.eps = _num(ctx, d, "eps", positive=True)
    sc.prune = _num(ctx, d, "prune", 1e-18)
    sc.path = d.get("path", "volterra")
    if sc.path not in ("volterra", "duhamel"):
        ctx.sub("path").fail("path must be 'volterra' or 'duhamel'")
    sc.window = _window(ctx.sub("window"), d.get("window"))
    targets = d.get("targets", []) or []
    if not isinstance(targets, list):
        ctx.sub("targets").fail("targets must be a list")
    known_ids = all_targets()
    for i, t in enumerate(targets):
        tctx = ctx.sub("targets", i)
        if isinstance(t, str):
            t = {"id": t}
        if not isinstance(t, dict) or "id" not in t:
            tctx.fail("a target is an id or a mapping with an 'id' field")
        extra = set(t) - {"id", "tolerance", "window", "mode", "p", "centered", "endpoint"}
        if extra:
            tctx.fail(f"unknown fields {sorted(extra)}")
        tid = t["id"]
        if tid not in known_ids:
            tctx.sub("id").fail(f"unknown target {tid!r}; see 'sonine list-targets'")
        if tid not in ALLOWED[exp]["targets_allowed"]:
            tctx.sub("id").fail(f"target {tid!r} does not apply to {exp} scenarios")
        mode = t.get("mode", "match")
        if mode not in ("match", "upper", "faster", "bound"):
            tctx.sub("mode").fail("mode must be match, upper, faster or bound")
        default = {"identity": 1e-6, "mass": 1e-10, "Laplace:k1": 1e-8}.get(tid, default_tol)
        sc.targets.append(TargetSpec(
            tid, _num(tctx, t, "tolerance", default, positive=True),
            _window(tctx.sub("window"), t.get("window")) or sc.window, mode,
            _num(tctx, t, "p", None) if "p" in t else None,
            bool(t.get("centered", False)), bool(t.get("endpoint", False))))
    return sc


def load_config(path) -> List[Scenario]:
    """Parse and validate a config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
        lines = _line_map(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    ctx = _Ctx(lines)
    if not isinstance(data, dict):
        ctx.fail("top level must be a mapping with a 'scenarios' list")
    extra = set(data) - {"scenarios", "tolerance"}
    if extra:
        ctx.fail(f"unknown fields {sorted(extra)}")
    tol = _num(ctx, data, "tolerance", DEFAULT_TOL, positive=True)
    scen = data.get("scenarios")
    if not isinstance(scen, list) or not scen:
        ctx.sub("scenarios").fail("expected a nonempty list")
    out = [_parse_scenario(ctx.sub("scenarios", i), s, tol) for i, s in enumerate(scen)]
    names = [s.name for s in out]
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        ctx.sub("scenarios").fail(f"duplicate scenario names {dup}")
    return out


# execution


def _field(grid: SpectralGrid, d: dict) -> Field:
    kind = d["kind"]
    if kind == "gaussian":
        return Field.gaussian(grid, d.get("std", 1.0), d.get("mass", 1.0))
    if kind == "delta":
        return Field.gaussian(grid, d.get("std", 2.0 * grid.dx), d.get("mass", 1.0))
    return Field.cosine(grid, int(d.get("mode", 1)), d.get("amplitude", 1.0))


def _write_csv(path: Path, header: List[str], rows: np.ndarray):
    np.savetxt(path, rows, fmt=FLOAT_FMT, delimiter=",", header=",".join(header),
               comments="")


def _rate_verdict(sc, ts, norms, target: RateTarget, tspec: TargetSpec, scale, note="",
                  optimal=False):
    tol = tspec.tolerance * scale
    try:
        fit = decay.fit_for_target(ts, norms, target, tspec.window)
    except ValueError as exc:
        return decay.verdict(sc.name, target, None, tol, tspec.mode, note=f"fit failed: {exc}")
    return decay.verdict(sc.name, target, fit.slope, tol, tspec.mode, fit.residual, note,
                         optimal=optimal)


def _run_relaxation(sc: Scenario, outdir: Path, scale: float) -> List[Verdict]:
    tg = TimeGrid(sc.t_end, sc.n_steps)
    table = build_relaxation_table(sc.kernel, sc.mus, tg, eps=sc.eps)
    t = tg.nodes
    rows = []
    for j, mu in enumerate(table.mus):
        rows.append(np.column_stack([t, np.full(t.size, mu), table.s_values[:, j],
                                     table.r_values[:, j]]))
    _write_csv(outdir / "relaxation.csv", ["t", "mu", "s", "r"], np.vstack(rows))
    out = []
    for ts in sc.targets:
        err = float(np.max(np.abs(table.mus * table.r_int1 + table.s_values - 1.0)))
        tol = ts.tolerance * scale
        out.append(Verdict(sc.name, ts.id, "identity", 0.0, err, tol, err <= tol,
                           mode="upper"))
    return out


def _norm_table(run, sc, want_grad):
    ts = run.times
    sel = ts > 0
    ts = ts[sel]
    cols = {"t": ts, "L1": run.norms(1.0)[sel], "L2": run.norms(2.0)[sel],
            "Lr": run.norms(sc.r)[sel]}
    if want_grad:
        cols["grad_Lr"] = run.gradient_norms(sc.r)[sel]
    return cols


def _checkpoints(sc, tg):
    return geometric_checkpoints(tg, sc.t_first, sc.per_decade)


def _run_homogeneous(sc: Scenario, outdir: Path, scale: float) -> List[Verdict]:
    grid = SpectralGrid(sc.dim, sc.L, sc.M)
    tg = TimeGrid(sc.t_end, sc.n_steps)
    u0 = _field(grid, sc.initial)
    run = evolve_homogeneous(sc.kernel, sc.rho, u0, tg, _checkpoints(sc, tg),
                             prune=sc.prune, eps=sc.eps)
    want_grad = any(t.id == "Theo:Grad:Sol" for t in sc.targets) or sc.rho >= 1
    cols = _norm_table(run, sc, want_grad)
    _write_csv(outdir / "norms.csv", list(cols), np.column_stack(list(cols.values())))
    out = []
    mean_zero = abs(u0.mass) <= 1e-12 * max(float(np.abs(u0.values).sum() * grid.cell_volume), 1e-300)
    for ts in sc.targets:
        t = cols["t"]
        if ts.id in ("Theo:Up:L2", "Theo:Low:L2"):
            upper, lower, optimal = decay.l2_rate_targets(sc.kernel, sc.rho, sc.dim)
            norms = run.norms(2.0, centered=ts.centered)[run.times > 0]
            if ts.id == "Theo:Up:L2":
                out.append(_rate_verdict(sc, t, norms, upper, ts, scale,
                                         "optimal" if optimal else "", optimal=optimal))
            elif mean_zero:
                faster = TargetSpec(ts.id, ts.tolerance, ts.window, "faster")
                v = _rate_verdict(sc, t, norms, upper, faster, scale,
                                  "mean-zero data: must decay faster than the upper law")
                v.target_id = ts.id
                out.append(v)
            elif lower is None:
                raise ValueError("no lower bound is available for this kernel")
            else:
                out.append(_rate_verdict(sc, t, norms, lower, ts, scale, optimal=optimal))
        elif ts.id == "Theo:Lr:Est:u0":
            p = ts.p if ts.p is not None else sc.r
            target = decay.lr_rate_target_homogeneous(sc.kernel, sc.rho, sc.dim, p,
                                                      endpoint=ts.endpoint)
            norms = run.norms(sc.r, centered=ts.centered)[run.times > 0]
            out.append(_rate_verdict(sc, t, norms, target, ts, scale))
        elif ts.id == "Theo:Grad:Sol":
            p = ts.p if ts.p is not None else sc.r
            target = decay.gradient_rate_target(sc.kernel, sc.rho, sc.dim, p)
            out.append(_rate_verdict(sc, t, cols["grad_Lr"], target, ts, scale))
    return out


def _run_forced(sc: Scenario, outdir: Path, scale: float) -> List[Verdict]:
    grid = SpectralGrid(sc.dim, sc.L, sc.M)
    tg = TimeGrid(sc.t_end, sc.n_steps)
    forcing = SeparableForcing(sc.forcing["gamma"], _field(grid, sc.forcing))
    run = evolve_forced(sc.kernel, sc.rho, forcing, tg, _checkpoints(sc, tg),
                        path=sc.path, prune=sc.prune, eps=sc.eps)
    want_grad = any(t.id == "Theo:Ex:decay:3" for t in sc.targets) or sc.rho >= 1
    cols = _norm_table(run, sc, want_grad)
    _write_csv(outdir / "norms.csv", list(cols), np.column_stack(list(cols.values())))
    out = []
    for ts in sc.targets:
        p = ts.p if ts.p is not None else 1.0
        grad = ts.id == "Theo:Ex:decay:3"
        target = decay.forced_rate_target(sc.kernel, sc.rho, sc.dim, p, forcing.gamma,
                                          gradient=grad)
        norms = cols["grad_Lr"] if grad else cols["Lr"]
        out.append(_rate_verdict(sc, cols["t"], norms, target, ts, scale))
    return out


def _run_karamata(sc: Scenario, outdir: Path, scale: float) -> List[Verdict]:
    tg = TimeGrid(sc.t_end, sc.n_steps)
    out = []
    ids = {t.id: t for t in sc.targets}
    tk = ids.get("Karamata")
    rep = decay.karamata_check(sc.kernel, tg, window=tk.window if tk else sc.window,
                               tolerance=(tk.tolerance if tk else DEFAULT_TOL) * scale)
    if rep.values is not None:
        _write_csv(outdir / "growth.csv", ["t", "one_star_ell"],
                   np.column_stack([tg.nodes, rep.values]))
    if tk is not None:
        fitted = rep.fit.slope if rep.fit is not None else None
        ok = fitted is not None and abs(fitted - rep.target.value) <= rep.tolerance
        out.append(Verdict(sc.name, "Karamata", rep.target.kind, rep.target.value, fitted,
                           rep.tolerance, bool(ok),
                           rep.fit.residual if rep.fit is not None else None,
                           note=rep.note))
    tl = ids.get("Laplace:k1")
    if tl is not None:
        lap = decay.laplace_check(sc.kernel)
        tol = tl.tolerance * scale
        out.append(Verdict(sc.name, "Laplace:k1", "identity", 0.0, lap["max_error"], tol,
                           lap["max_error"] <= tol, mode="upper"))
    return out


def _run_fundamental(sc: Scenario, outdir: Path, scale: float) -> List[Verdict]:
    grid = SpectralGrid(sc.dim, sc.L, sc.M)
    rows = []
    masses = []
    coords = [c.ravel() for c in grid.coords]
    for t in sc.times:
        z = fundamental_solution_field(sc.kernel, sc.rho, t, grid, n_steps=sc.n_steps,
                                       eps=sc.eps)
        masses.append(z.mass)
        rows.append(np.column_stack([np.full(grid.shape, t).ravel(), *coords,
                                     z.values.ravel()]))
    header = ["t"] + [f"x{j + 1}" for j in range(grid.dim)] + ["Z"]
    _write_csv(outdir / "fundamental.csv", header, np.vstack(rows))
    out = []
    for ts in sc.targets:
        err = float(np.max(np.abs(np.array(masses) - 1.0)))
        tol = ts.tolerance * scale
        out.append(Verdict(sc.name, "mass", "identity", 0.0, err, tol, err <= tol,
                           mode="upper"))
    return out


RUNNERS = {"relaxation": _run_relaxation, "homogeneous": _run_homogeneous,
           "forced": _run_forced, "karamata": _run_karamata,
           "fundamental": _run_fundamental}


def run_scenario(sc: Scenario, out: Path, scale: float = 1.0) -> Dict[str, Any]:
    """Run one scenario; errors are caught and recorded."""
    outdir = out / sc.name
    outdir.mkdir(parents=True, exist_ok=True)
    if sc.rho is not None and sc.r >= decay.sigma1(sc.rho, sc.dim):
        log.warning("scenario %s: r=%g >= sigma1=%g; |Z(t)|_r is expected to diverge "
                    "under refinement and is not a meaningful decay measure",
                    sc.name, sc.r, decay.sigma1(sc.rho, sc.dim))
    try:
        verdicts = RUNNERS[sc.experiment](sc, outdir, scale)
        status = "ok" if all(v.passed for v in verdicts) else "failed"
        return {"scenario": sc.name, "status": status,
                "verdicts": [v.to_dict() for v in verdicts]}
    except Exception as exc:  # scenario marked errored, run continues
        log.error("scenario %s errored: %s", sc.name, exc)
        return {"scenario": sc.name, "status": "error",
                "error": f"{type(exc).__name__}: {exc}", "verdicts": []}


def run(config, out="sonine-out", parallel: bool = False,
        tolerance_scale: float = 1.0) -> int:
    """Run every scenario of ``config`` and write the report; returns the exit code."""
    try:
        scenarios = load_config(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if parallel and len(scenarios) > 1:
        with ThreadPoolExecutor() as ex:
            results = list(ex.map(lambda s: run_scenario(s, out, tolerance_scale), scenarios))
    else:
        results = [run_scenario(s, out, tolerance_scale) for s in scenarios]
    report = {"config": str(config), "tolerance_scale": tolerance_scale,
              "scenarios": results}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for res in results:
        for v in res["verdicts"]:
            fv = "n/a" if v["fitted_value"] is None else f"{v['fitted_value']:.6g}"
            print(f"{'PASS' if v['pass'] else 'FAIL'}  {res['scenario']}  {v['target_id']}  "
                  f"target={v['target_value']:.6g} fitted={fv} tol={v['tolerance']:.3g}")
        if res["status"] == "error":
            print(f"ERROR {res['scenario']}  {res['error']}")
    if any(r["status"] == "error" for r in results):
        return 1
    if any(r["status"] == "failed" for r in results):
        return 2
    return 0


def list_targets() -> str:
    items = all_targets()
    width = max(len(k) for k in items)
    return "\n".join(f"{k.ljust(width)}  {items[k]}" for k in sorted(items))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sonine",
                                     description="Relaxation and decay experiments for Sonine kernels.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the scenarios of a YAML config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default="sonine-out", help="output directory")
    p_run.add_argument("--parallel", action="store_true", help="run scenarios concurrently")
    p_run.add_argument("--tolerance-scale", type=float, default=1.0,
                       help="multiply every tolerance by this factor")
    sub.add_parser("list-targets", help="print the known target identifiers")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "list-targets":
        print(list_targets())
        return 0
    if not args.tolerance_scale > 0:
        print("config error: --tolerance-scale must be positive", file=sys.stderr)
        return 1
    return run(args.config, args.out, args.parallel, args.tolerance_scale)


if __name__ == "__main__":
    sys.exit(main())
