"""Command-line front end: loci, Lyapunov, continuation, diagrams, portraits.

Every run is driven by a resolved configuration (JSON config file merged
with command-line flags, flags winning).  Outputs are deterministic for a
fixed configuration and embed the resolved config for provenance.  Exit
codes: 0 success, 1 numerical failure (partial output), 2 usage/config
error.
"""

from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import click
import numpy as np

from .model import DomainError, ModelParams, State
from .equilibria import discriminant, equilibrium_cubic, find_equilibria
from . import loci as loci_mod
from .lyapunov import NotAHopfError, ell1_sign_oracle, first_lyapunov
from . import continuation as cont
from . import dynamics as dyn
from .svg import Scene, write_svg

DEFAULT_PARAMS = {"lambda1": 0.01, "lambda2": 0.006672,
                  "alpha1": 0.297312, "alpha2": 0.00318, "xc": 2500.0}

_PARAM_KEYS = tuple(DEFAULT_PARAMS)


@dataclass
class RunConfig:
    """Resolved run configuration: model parameters plus options."""

    params: ModelParams
    options: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {"params": self.params.to_dict(), "options": self.options}
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        payload = json.loads(text)
        return cls(params=ModelParams.from_dict(payload["params"]),
                   options=dict(payload.get("options", {})))


def _resolve(config_path, flag_params: dict, flag_options: dict) -> RunConfig:
    """Merge defaults <- config file <- flags into a RunConfig."""
    pvals = dict(DEFAULT_PARAMS)
    options: dict = {}
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                payload = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise click.UsageError(f"cannot read config: {exc}")
        if not isinstance(payload, dict):
            raise click.UsageError("config must be a JSON object")
        pvals.update(payload.get("params", {}))
        options.update(payload.get("options", {}))
    pvals.update({k: v for k, v in flag_params.items() if v is not None})
    options.update({k: v for k, v in flag_options.items() if v is not None})
    try:
        params = ModelParams(**{k: float(pvals[k]) for k in _PARAM_KEYS})
    except (KeyError, TypeError, ValueError) as exc:
        raise click.UsageError(f"invalid model parameters: {exc}")
    for key, val in options.items():
        if key.endswith("_tol") and not (isinstance(val, (int, float))
                                         and val > 0):
            raise click.UsageError(f"tolerance {key} must be positive")
    return RunConfig(params=params, options=options)


def _g17(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _write_csv(path, header, rows, cfg: RunConfig) -> None:
    lines = [f"# config {cfg.to_json()}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_g17(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path, payload, cfg: RunConfig) -> None:
    payload = dict(payload)
    payload["config"] = json.loads(cfg.to_json())
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _n_workers() -> int:
    try:
        return max(1, int(os.environ.get("DELISI_THREADS", "1")))
    except ValueError:
        return 1


def _param_options(fn):
    for key in reversed(_PARAM_KEYS):
        fn = click.option(f"--{key}", type=float, default=None,
                          help=f"model parameter {key}")(fn)
    fn = click.option("--config", "config_path", type=click.Path(),
                      default=None, help="JSON config file")(fn)
    return fn


def _flag_params(kw) -> dict:
    return {k: kw.pop(k) for k in _PARAM_KEYS}


class _NumericalFailure(click.ClickException):
    exit_code = 1


def _guard(fn):
    """Map domain errors to exit 2 and numerical failures to exit 1."""
    def wrapped(*a, **kw):
        try:
            return fn(*a, **kw)
        except (DomainError, NotAHopfError) as exc:
            raise click.UsageError(str(exc))
        except (cont.ContinuationError, dyn.StiffnessError) as exc:
            raise _NumericalFailure(str(exc))
    wrapped.__name__ = fn.__name__
    wrapped.__doc__ = fn.__doc__
    return wrapped


@click.group()
def main():
    """Bifurcation-analysis toolkit for the avascular tumor-immune model."""


# ---------------------------------------------------------------------------


@main.command()
@_param_options
@click.option("--fold-tol", type=float, default=None,
              help="relative discriminant slack for double-root recovery")
@click.option("--out", type=click.Path(), default=None, help="CSV output")
@_guard
def equilibria(config_path, out, fold_tol, **kw):
    """List equilibria with spectrum and classification."""
    cfg = _resolve(config_path, _flag_params(kw), {"fold_tol": fold_tol})
    tol = cfg.options.get("fold_tol")
    kwargs = {"fold_tol": tol} if tol is not None else {}
    eqs = find_equilibria(cfg.params, **kwargs)
    rows = [(e.x, e.y, e.trace, e.det, e.kind.value) for e in eqs]
    if out:
        _write_csv(out, ("x", "y", "trace", "det", "kind"), rows, cfg)
    payload = [{"x": e.x, "y": e.y, "trace": e.trace, "det": e.det,
                "kind": e.kind.value} for e in eqs]
    click.echo(json.dumps({"equilibria": payload,
                           "config": json.loads(cfg.to_json())},
                          sort_keys=True))


@main.command()
@_param_options
@click.option("--kinds", default="bt,bautin",
              help="comma list from {bt, bautin, saddle_node}")
@click.option("--lam-min", type=float, default=None)
@click.option("--lam-max", type=float, default=None)
@click.option("--n-grid", type=int, default=None)
@click.option("--out", type=click.Path(), default=None, help="CSV output")
@_guard
def loci(config_path, kinds, lam_min, lam_max, n_grid, out, **kw):
    """Closed-form bifurcation loci in the (alpha1, alpha2, xc) gauge."""
    cfg = _resolve(config_path, _flag_params(kw),
                   {"kinds": kinds, "lam_min": lam_min, "lam_max": lam_max,
                    "n_grid": n_grid})
    p = cfg.params
    names = [k for k in cfg.options.get("kinds", "").split(",") if k]
    rows = []
    for name in names:
        if name == "bt":
            lp = loci_mod.bt_point(p.alpha1, p.alpha2, p.xc)
            rows.append(("bt", lp.diagnostics["lam"], lp.diagnostics["psi"],
                         lp.params.lambda1, lp.params.lambda2,
                         lp.equilibrium.x, lp.equilibrium.y,
                         discriminant(lp.params)))
        elif name == "bautin":
            lp = loci_mod.bautin_point(p.alpha1, p.alpha2, p.xc)
            rows.append(("bautin", lp.diagnostics["lam"],
                         lp.diagnostics["psi"], lp.params.lambda1,
                         lp.params.lambda2, lp.equilibrium.x,
                         lp.equilibrium.y, discriminant(lp.params)))
        elif name == "saddle_node":
            lo = cfg.options.get("lam_min") or 0.1
            hi = cfg.options.get("lam_max") or 1.0
            n = cfg.options.get("n_grid") or 100
            grid = np.linspace(lo, hi, int(n))
            for lp in loci_mod.saddle_node_curve(p.alpha1, p.alpha2, p.xc,
                                                 grid):
                rows.append((lp.kind.value, lp.diagnostics["lam"],
                             lp.diagnostics["psi"], lp.params.lambda1,
                             lp.params.lambda2, lp.equilibrium.x,
                             lp.equilibrium.y, lp.diagnostics["delta"]))
        else:
            raise click.UsageError(f"unknown locus kind {name!r}")
    header = ("kind", "lam", "psi", "lambda1", "lambda2", "x0", "y0",
              "delta")
    if out:
        _write_csv(out, header, rows, cfg)
    click.echo(json.dumps({"count": len(rows)}))


@main.command()
@_param_options
@click.option("--psi", type=float, default=None,
              help="composite psi of the Hopf point (default: from params)")
@click.option("--lam", type=float, default=None,
              help="composite lam of the Hopf point (default: from params)")
@click.option("--oracle/--no-oracle", default=False,
              help="cross-check the ell1 sign with the return-map oracle")
@click.option("--out", type=click.Path(), default=None, help="JSON output")
@_guard
def lyapunov(config_path, psi, lam, oracle, out, **kw):
    """First Lyapunov coefficient at a Hopf point."""
    cfg = _resolve(config_path, _flag_params(kw),
                   {"psi": psi, "lam": lam, "oracle": oracle})
    p = cfg.params
    psi_v = cfg.options.get("psi") or p.psi
    lam_v = cfg.options.get("lam") or p.lam
    lp = loci_mod.hopf_point(psi_v, lam_v, p.alpha1, p.alpha2, p.xc)
    if lp.kind is not loci_mod.LocusKind.HOPF:
        raise DomainError("the trace-zero point is a neutral saddle, "
                          "not a Hopf point")
    nf = first_lyapunov(lp.params, lp.equilibrium)
    payload = {
        "lambda1": lp.params.lambda1, "lambda2": lp.params.lambda2,
        "x0": lp.equilibrium.x, "y0": lp.equilibrium.y,
        "omega": lp.diagnostics["omega"],
        "g20": [nf.g20.real, nf.g20.imag],
        "g11": [nf.g11.real, nf.g11.imag],
        "g02": [nf.g02.real, nf.g02.imag],
        "g21": [nf.g21.real, nf.g21.imag],
        "c1": [nf.c1.real, nf.c1.imag],
        "ell1": nf.ell1,
    }
    if cfg.options.get("oracle"):
        payload["oracle_sign"] = ell1_sign_oracle(lp.params, lp.equilibrium)
    if out:
        _write_json(out, payload, cfg)
    click.echo(json.dumps({k: v for k, v in payload.items()}, sort_keys=True))


# ---------------------------------------------------------------------------
# continuation plumbing shared by `continue` and `diagram`


def _branch_rows(branch: cont.Branch):
    keys = sorted({k for p in branch.points for k in p.values})
    tags = {i: t for i, t in branch.special_points}
    header = tuple(keys) + ("tag",)
    rows = [tuple(p.values.get(k, "") for k in keys) + (tags.get(i, ""),)
            for i, p in enumerate(branch.points)]
    return header, rows


def _emit_branch(branch: cont.Branch, stem: str, cfg: RunConfig) -> None:
    header, rows = _branch_rows(branch)
    _write_csv(f"{stem}.csv", header, rows, cfg)
    special = [{"index": i, "tag": t,
                "values": {k: v for k, v in branch.points[i].values.items()
                           if isinstance(v, (int, float))}}
               for i, t in branch.special_points]
    _write_json(f"{stem}_special.json",
                {"kind": branch.kind, "special_points": special,
                 "diagnostics": {k: v for k, v in branch.diagnostics.items()
                                 if k != "cycles"}}, cfg)


def _hopf_start(params: ModelParams, lambda1_window=(1e-4, 1.0)):
    """Hopf locus point at the params' lambda2, found on the equilibrium
    branch in lambda1."""
    br = cont.continue_equilibria(params, "lambda1", lambda1_window)
    hs = br.tagged("H")
    if not hs:
        raise cont.ContinuationError("no Hopf point on the lambda1 branch")
    hp = hs[0]
    pp = params.replace(lambda1=hp.values["lambda1"])
    from .equilibria import classify
    eq = classify(pp, State(hp.values["x"], hp.values["y"]))
    return loci_mod.LocusPoint(loci_mod.LocusKind.HOPF, pp, eq,
                               {"trace": eq.trace, "det": eq.det})


def _cycles_and_lpc(params: ModelParams, *, n_steps=120, run_lpc=True,
                    gh=None):
    """Cycle family at fixed lambda2 plus (optionally) the LPC curve."""
    start = _hopf_start(params)
    cyc = cont.continue_cycles(start, "lambda1", n_steps=n_steps)
    lpc = None
    if run_lpc and cyc.tagged("LPC"):
        cp, u_ref = cont.refine_lpc(cyc, start.params, "lambda1")
        hint = None
        if gh is not None:
            hint = (gh.params.lambda1, gh.params.lambda2)
        lpc = cont.lpc_curve(u_ref, cp.params, gh_hint=hint)
    return cyc, lpc


@main.command("continue")
@_param_options
@click.option("--branch", "branch_kind", required=True,
              type=click.Choice(["equilibrium", "fold", "hopf", "cycles",
                                 "lpc"]))
@click.option("--free", default="lambda1",
              type=click.Choice(["lambda1", "lambda2", "alpha1", "alpha2"]))
@click.option("--window", default=None,
              help="parameter window lo:hi for equilibrium branches")
@click.option("--steps", type=int, default=None)
@click.option("--out", "stem", required=True,
              help="output stem (writes <stem>.csv and <stem>_special.json)")
@_guard
def continue_cmd(config_path, branch_kind, free, window, steps, stem, **kw):
    """Run one continuation and emit the branch CSV + special-point index."""
    cfg = _resolve(config_path, _flag_params(kw),
                   {"branch": branch_kind, "free": free, "window": window,
                    "steps": steps})
    p = cfg.params
    n_steps = cfg.options.get("steps")
    if branch_kind == "equilibrium":
        w = cfg.options.get("window") or "0.0001:1.0"
        lo, hi = (float(s) for s in w.split(":"))
        kwargs = {"n_steps": n_steps} if n_steps else {}
        branch = cont.continue_equilibria(p, free, (lo, hi), **kwargs)
    elif branch_kind == "fold":
        bt = loci_mod.bt_point(p.alpha1, p.alpha2, p.xc)
        kwargs = {"n_steps": n_steps} if n_steps else {}
        branch = cont.continue_fold_curve(bt, **kwargs)
    elif branch_kind == "hopf":
        bt = loci_mod.bt_point(p.alpha1, p.alpha2, p.xc)
        kwargs = {"n_steps": n_steps} if n_steps else {}
        branch = cont.continue_hopf_curve(bt, **kwargs)
    elif branch_kind == "cycles":
        branch, _ = _cycles_and_lpc(p, n_steps=n_steps or 120,
                                    run_lpc=False)
    else:  # lpc
        gh = loci_mod.bautin_point(p.alpha1, p.alpha2, p.xc)
        cyc, branch = _cycles_and_lpc(p, n_steps=n_steps or 120, gh=gh)
        if branch is None:
            raise cont.ContinuationError(
                "no LPC tag on the cycle family at these parameters")
    _emit_branch(branch, stem, cfg)
    click.echo(json.dumps({"points": len(branch.points),
                           "special": branch.special_points}))


@main.command()
@_param_options
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--cycle-lambda2", type=float, default=None,
              help="lambda2 for the cycle/LPC runs (default: just below GH)")
@click.option("--cycle-steps", type=int, default=120)
@_guard
def diagram(config_path, out_dir, cycle_lambda2, cycle_steps, **kw):
    """Two-parameter bifurcation diagram: fold, Hopf, LPC, BT/GH markers."""
    cfg = _resolve(config_path, _flag_params(kw),
                   {"cycle_lambda2": cycle_lambda2,
                    "cycle_steps": cycle_steps})
    p = cfg.params
    os.makedirs(out_dir, exist_ok=True)
    bt = loci_mod.bt_point(p.alpha1, p.alpha2, p.xc)
    gh = loci_mod.bautin_point(p.alpha1, p.alpha2, p.xc)

    warnings = []
    with ThreadPoolExecutor(max_workers=_n_workers()) as pool:
        fut_fold = pool.submit(cont.continue_fold_curve, bt)
        fut_hopf = pool.submit(cont.continue_hopf_curve, bt)
        fold_branch = fut_fold.result()
        hopf_branch = fut_hopf.result()

    lam2 = cfg.options.get("cycle_lambda2")
    if lam2 is None:
        lam2 = 0.95 * gh.params.lambda2  # inside the two-cycle wedge
    lpc_branch = None
    try:
        _, lpc_branch = _cycles_and_lpc(
            p.replace(lambda2=lam2), gh=gh,
            n_steps=int(cfg.options.get("cycle_steps", 120)))
    except (cont.ContinuationError, dyn.StiffnessError) as exc:
        warnings.append(f"LPC continuation failed: {exc}")

    _emit_branch(fold_branch, os.path.join(out_dir, "fold"), cfg)
    _emit_branch(hopf_branch, os.path.join(out_dir, "hopf"), cfg)
    if lpc_branch is not None:
        _emit_branch(lpc_branch, os.path.join(out_dir, "lpc"), cfg)

    scene = Scene(title="bifurcation diagram", xlabel="lambda1",
                  ylabel="lambda2")
    scene.add_comment(f"config {cfg.to_json()}")

    def curve_pts(branch):
        return [(pt.values["lambda1"], pt.values["lambda2"])
                for pt in branch.points]

    scene.add_curve(curve_pts(fold_branch), "black", width=2.0)
    scene.add_curve(curve_pts(hopf_branch), "green", width=2.0)
    if lpc_branch is not None:
        scene.add_curve(curve_pts(lpc_branch), "red", width=2.0)
    scene.add_marker(bt.params.lambda1, bt.params.lambda2, "black", "BT")
    scene.add_marker(gh.params.lambda1, gh.params.lambda2, "green", "GH")
    write_svg(scene, os.path.join(out_dir, "diagram.svg"))

    index = {
        "BT": {"lambda1": bt.params.lambda1, "lambda2": bt.params.lambda2},
        "GH": {"lambda1": gh.params.lambda1, "lambda2": gh.params.lambda2,
               "ell1": gh.diagnostics["ell1"]},
        "warnings": warnings,
    }
    _write_json(os.path.join(out_dir, "index.json"), index, cfg)
    click.echo(json.dumps(index["BT"] | {"warnings": warnings}))
    if warnings:
        sys.exit(1)


@main.command()
@_param_options
@click.option("--seed", "seeds", multiple=True,
              help="initial state x,y (repeatable)")
@click.option("--t-max", type=float, default=5e3)
@click.option("--threshold/--no-threshold", default=False,
              help="overlay the elimination threshold curve")
@click.option("--out", required=True, type=click.Path(), help="SVG output")
@_guard
def portrait(config_path, seeds, t_max, threshold, out, **kw):
    """Phase portrait SVG from a list of seeds."""
    cfg = _resolve(config_path, _flag_params(kw),
                   {"seeds": list(seeds), "t_max": t_max,
                    "threshold": threshold})
    p = cfg.params
    parsed = []
    for s in cfg.options.get("seeds", []):
        try:
            x, y = (float(v) for v in s.split(","))
        except ValueError:
            raise click.UsageError(f"seed {s!r} is not 'x,y'")
        if not (0 < x < p.xc and 0 < y):
            raise click.UsageError(f"seed {s!r} outside the ROI")
        parsed.append((x, y))
    pp = dyn.phase_portrait(p, parsed, cfg.options.get("t_max", 5e3),
                            threshold=cfg.options.get("threshold", False))
    scene = Scene(title="phase portrait", xlabel="x", ylabel="y")
    scene.add_comment(f"config {cfg.to_json()}")
    for tr in pp.trajectories:
        scene.add_curve(tr.states, "steelblue", width=1.0)
    for e in pp.equilibria:
        color = "black" if e.det < 0 else (
            "blue" if e.trace < 0 else "orange")
        scene.add_marker(e.x, e.y, color, e.kind.value)
    if pp.threshold is not None:
        scene.add_curve(np.column_stack([pp.threshold.xs, pp.threshold.ys]),
                        "crimson", width=1.5, dash="6 3")
    write_svg(scene, out)
    click.echo(json.dumps({"trajectories": len(pp.trajectories),
                           "terminal": [t.terminal.value
                                        for t in pp.trajectories]}))


@main.command()
@_param_options
@click.option("--out", type=click.Path(), default=None, help="CSV output")
@_guard
def threshold(config_path, out, **kw):
    """Elimination threshold curve y = h(x) and the ordinate y_c = h(xc)."""
    cfg = _resolve(config_path, _flag_params(kw), {})
    curve = dyn.threshold_curve(cfg.params)
    if out:
        rows = list(zip(curve.xs.tolist(), curve.ys.tolist()))
        _write_csv(out, ("x", "h"), rows, cfg)
    click.echo(json.dumps({"y_c": curve.y_c, "n_points": len(curve.xs)}))


@main.command("infinity-check")
@_param_options
@click.option("--n-grid", type=int, default=100)
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(), default=None, help="JSON output")
@_guard
def infinity_check(config_path, n_grid, seed, out, **kw):
    """Diagnostics of the chart at infinity, both published and exact forms."""
    cfg = _resolve(config_path, _flag_params(kw),
                   {"n_grid": n_grid, "seed": seed})
    p = cfg.params
    n = int(cfg.options.get("n_grid", 100))

    J = dyn.infinity_chart_linearization(p)
    J_expected = np.diag([-p.xc**2 * p.alpha1, -p.xc * p.lambda2])
    lin_err = float(np.max(np.abs(J - J_expected)))

    theta = np.linspace(0, np.pi / 2, n + 2)[1:-1]
    flow = dyn.origin_sector_flow(p, theta)

    rng = np.random.default_rng(int(cfg.options.get("seed", 0)))
    max_push_err = 0.0
    max_form_gap = 0.0
    from .model import eval_polynomial_field
    for _ in range(n):
        x = rng.uniform(0.1, 0.9) * p.xc
        y = 10.0 ** rng.uniform(3, 6)
        v = x / y
        fx, fy = eval_polynomial_field(p, np.array([x, y]))
        dv_affine = (fx * y - x * fy) / y**2
        chart = np.array([fx * v**2, dv_affine * v**2])
        c = dyn.InfinityChartState(x, v)
        push = dyn.infinity_chart_pushforward(p, c)
        printed = dyn.infinity_chart_field(p, c)
        scale = max(1.0, float(np.max(np.abs(chart))))
        max_push_err = max(max_push_err,
                           float(np.max(np.abs(push - chart))) / scale)
        max_form_gap = max(max_form_gap,
                           float(np.max(np.abs(printed - push))) / scale)
    payload = {
        "linearization": J.tolist(),
        "linearization_expected": J_expected.tolist(),
        "linearization_max_abs_err": lin_err,
        "angular_flow_max": float(np.max(flow)),
        "angular_flow_all_negative": bool(np.all(flow < 0)),
        "pushforward_max_rel_err": max_push_err,
        "published_vs_pushforward_max_gap": max_form_gap,
    }
    if out:
        _write_json(out, payload, cfg)
    click.echo(json.dumps(payload, sort_keys=True))


if __name__ == "__main__":
    main()
