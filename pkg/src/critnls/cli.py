"""Command-line front end: ``python -m critnls <command> [flags]``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 acceptance-suite failure.  ``--config file.json`` supplies any flag by
its long name (dashes or underscores); flags given on the command line win.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .errors import DomainError, InsufficientData, NoBracket, NoConvergence, StepFailure
from .evolution import EvolveControls, propagate, verdict_json
from .fields import ComplexField, ModelParams, RadialGrid, grad_norm_sq, load_field, mass_sq, save_field
from .groundstate import find_ground_state, minimization_report
from .pseudoconformal import initial_distance, lifespan, rate_check, self_similar

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3

DEFAULTS = {
    "dim": 1,
    "b": 0.5,
    "omega": 1.0,
    "r_max": None,          # 20 / omega
    "M": 4096,
    "dt0": 1e-3,
    "dt_min": 1e-10,
    "c_dt": 0.1,
    "tmax": 1.0,
    "blowup_factor": 1e3,
    "output_stride": 1,
    "resolution_cells": 64.0,
    "init": None,
    "a": 1.0,
    "times": [0.0],
    "a_values": [0.1, 0.05, 0.025],
    "c_values": None,
    "c_range": None,
    "workers": 1,
    "trials": 1000,
    "seed": 0,
    "criteria": None,
    "out_dir": ".",
    "verbose": False,
}

COMMANDS = ("groundstate", "constants", "evolve", "selfsim", "distances", "rates", "verify", "scan")


class ConfigError(ValueError):
    pass


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _ints(text):
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    return [int(x) for x in str(text).split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", help="JSON file mirroring the flags")
    common.add_argument("--dim", type=int, help="space dimension N")
    common.add_argument("--b", type=float, help="inhomogeneity exponent, 0 <= b < min(2, N)")
    common.add_argument("--omega", type=float, help="frequency of the stationary equation")
    common.add_argument("--r-max", dest="r_max", type=float, help="outer radius (default 20/omega)")
    common.add_argument("--M", type=int, help="number of radial cells")
    common.add_argument("--dt0", type=float)
    common.add_argument("--dt-min", dest="dt_min", type=float)
    common.add_argument("--c-dt", dest="c_dt", type=float)
    common.add_argument("--tmax", type=float)
    common.add_argument("--blowup-factor", dest="blowup_factor", type=float)
    common.add_argument("--output-stride", dest="output_stride", type=int)
    common.add_argument("--resolution-cells", dest="resolution_cells", type=float)
    common.add_argument("--out-dir", dest="out_dir", help="directory for written artifacts")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="critnls", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("groundstate", parents=[common], argument_default=S, help="solve the stationary equation")
    sub.add_parser("constants", parents=[common], argument_default=S, help="critical mass and best constant")
    ev = sub.add_parser("evolve", parents=[common], argument_default=S, help="propagate initial data")
    ev.add_argument("--init", help="file:<path> | ground:<c> | selfsim:<a>")
    ss = sub.add_parser("selfsim", parents=[common], argument_default=S, help="closed-form blow-up solution")
    ss.add_argument("--a", type=float)
    ss.add_argument("--times", type=_floats, help="comma-separated times")
    di = sub.add_parser("distances", parents=[common], argument_default=S, help="initial H1 distance over a-values")
    di.add_argument("--a-values", dest="a_values", type=_floats)
    ra = sub.add_parser("rates", parents=[common], argument_default=S, help="self-similar run and rate fit")
    ra.add_argument("--a", type=float)
    sc = sub.add_parser("scan", parents=[common], argument_default=S, help="verdicts over mass multipliers")
    sc.add_argument("--c-values", dest="c_values", type=_floats)
    sc.add_argument("--c-range", dest="c_range", type=_floats, help="start,stop,count")
    sc.add_argument("--workers", type=int)
    ve = sub.add_parser("verify", parents=[common], argument_default=S, help="run the acceptance suite")
    ve.add_argument("--criteria", type=_ints, help="comma-separated criterion numbers")
    ve.add_argument("--trials", type=int)
    ve.add_argument("--seed", type=int)
    return p


def resolve_config(argv=None) -> dict:
    """Defaults, then ``--config``, then explicit flags."""
    ns = vars(build_parser().parse_args(argv))
    cfg = dict(DEFAULTS)
    path = ns.pop("config", None)
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for k, v in data.items():
            key = k.replace("-", "_")
            if key == "command":
                continue
            if key not in cfg:
                raise ConfigError(f"unknown config key {k!r}")
            cfg[key] = v
    cfg.update(ns)
    for key in ("times", "a_values", "c_values", "c_range"):
        if cfg[key] is not None:
            cfg[key] = _floats(cfg[key])
    if cfg["criteria"] is not None:
        cfg["criteria"] = _ints(cfg["criteria"])
    return cfg


def _params(cfg) -> ModelParams:
    return ModelParams(int(cfg["dim"]), float(cfg["b"]), omega=float(cfg["omega"]))


def _grid(cfg, params: ModelParams) -> RadialGrid:
    r_max = cfg["r_max"] if cfg["r_max"] is not None else 20.0 / params.omega
    return RadialGrid(float(r_max), int(cfg["M"]), params.N)


def _controls(cfg) -> EvolveControls:
    return EvolveControls(
        dt0=float(cfg["dt0"]),
        dt_min=float(cfg["dt_min"]),
        c_dt=float(cfg["c_dt"]),
        t_max=float(cfg["tmax"]),
        blowup_factor=float(cfg["blowup_factor"]),
        output_stride=int(cfg["output_stride"]),
        resolution_cells=float(cfg["resolution_cells"]),
    )


def _out(cfg) -> Path:
    d = Path(cfg["out_dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _ground(cfg, params=None):
    params = params or _params(cfg)
    return find_ground_state(params, grid=_grid(cfg, params))


def cmd_groundstate(cfg) -> int:
    gs = _ground(cfg)
    _write_json(_out(cfg) / "groundstate.json", gs.to_json())
    d = gs.diagnostics
    print(json.dumps({"alpha": gs.alpha, "mass_sq": d.mass, "energy": d.energy, "J": d.J,
                      "residual": d.residual}))
    return EXIT_OK


def cmd_constants(cfg) -> int:
    params = _params(cfg)
    p1 = params.with_omega(1.0)
    gs = find_ground_state(p1, grid=_grid(cfg, p1))
    rep = minimization_report(p1, ground=gs)
    out = {k: v for k, v in rep.to_json().items() if k != "j_numeric"}
    _write_json(_out(cfg) / "constants.json", out)
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def _initial_data(cfg, params: ModelParams):
    spec = cfg["init"]
    if not spec or ":" not in str(spec):
        raise ConfigError("evolve needs --init file:<path>, ground:<c> or selfsim:<a>")
    kind, arg = str(spec).split(":", 1)
    if kind == "file":
        f, _ = load_field(arg)
        if f.grid.N != params.N:
            raise ConfigError("field dimension does not match --dim")
        return ComplexField(f.grid, np.asarray(f.values, dtype=complex))
    try:
        x = float(arg)
    except ValueError as exc:
        raise ConfigError(f"bad init value {arg!r}") from exc
    gs = _ground(cfg, params.with_omega(1.0))
    if kind == "ground":
        return ComplexField(gs.grid, x * gs.profile.values.astype(complex))
    if kind == "selfsim":
        return self_similar(gs, x, 0.0)
    raise ConfigError(f"unknown init kind {kind!r}")


def cmd_evolve(cfg) -> int:
    params = _params(cfg).with_omega(1.0)
    phi0 = _initial_data(cfg, params)
    tr = propagate(phi0, params, _controls(cfg))
    out = _out(cfg)
    (out / "trajectory.csv").write_text(tr.to_csv())
    _write_json(out / "verdict.json", tr.summary())
    if tr.snapshots:
        _write_json(out / "snapshots.json", tr.snapshots_json())
    print(verdict_json(tr))
    return EXIT_OK


def cmd_selfsim(cfg) -> int:
    params = _params(cfg).with_omega(1.0)
    gs = _ground(cfg, params)
    a = float(cfg["a"])
    out = _out(cfg)
    rows = []
    for t in cfg["times"]:
        f = self_similar(gs, a, t)
        save_field(out / f"selfsim_t{t:g}.json", f, params, extra={"a": a, "t": t})
        rows.append({"t": t, "mass_sq": mass_sq(f), "grad_norm_sq": grad_norm_sq(f)})
    print(json.dumps({"a": a, "T": lifespan(a, math.inf), "fields": rows}))
    return EXIT_OK


def cmd_distances(cfg) -> int:
    params = _params(cfg).with_omega(1.0)
    gs = _ground(cfg, params)
    rows = [initial_distance(gs, a).__dict__ for a in cfg["a_values"]]
    _write_json(_out(cfg) / "distances.json", {"distances": rows})
    print(json.dumps({"distances": rows}))
    return EXIT_OK


def cmd_rates(cfg) -> int:
    params = _params(cfg).with_omega(1.0)
    gs = _ground(cfg, params)
    a = float(cfg["a"])
    ctl = _controls(cfg)
    if ctl.t_max < 1.0 / a:
        ctl = EvolveControls(**{**ctl.__dict__, "t_max": 2.0 / a})
    tr = propagate(self_similar(gs, a, 0.0), params, ctl)
    rep = rate_check(tr, a)
    rep.distances = [initial_distance(gs, x) for x in cfg["a_values"]]
    out = _out(cfg)
    (out / "trajectory.csv").write_text(tr.to_csv())
    _write_json(out / "rates.json", rep.to_json())
    print(json.dumps(rep.to_json()))
    return EXIT_OK


def _c_values(cfg):
    if cfg["c_values"]:
        return list(cfg["c_values"])
    if cfg["c_range"]:
        lo, hi, n = cfg["c_range"]
        return [float(x) for x in np.linspace(lo, hi, int(n))]
    raise ConfigError("scan needs --c-values or --c-range")


def cmd_scan(cfg) -> int:
    params = _params(cfg).with_omega(1.0)
    gs = _ground(cfg, params)
    ctl = _controls(cfg)
    cs = _c_values(cfg)

    def run(c):
        phi0 = ComplexField(gs.grid, c * gs.profile.values.astype(complex))
        return dict(c=c, **propagate(phi0, params, ctl).summary())

    with ThreadPoolExecutor(max_workers=max(1, int(cfg["workers"]))) as pool:
        rows = list(pool.map(run, cs))       # map keeps the input order
    _write_json(_out(cfg) / "scan.json", {"critical_mass": math.sqrt(gs.diagnostics.mass), "runs": rows})
    for r in rows:
        print(json.dumps(r))
    return EXIT_OK


def cmd_verify(cfg) -> int:
    from . import acceptance

    selected = cfg["criteria"] or sorted(acceptance.CRITERIA)
    results = []
    for k in selected:
        if k not in acceptance.CRITERIA:
            raise ConfigError(f"no criterion {k}")
        fn = acceptance.CRITERIA[k]
        res = fn(trials=int(cfg["trials"]), seed=int(cfg["seed"])) if k == 4 else fn()
        print(res.line(), flush=True)
        results.append(res)
    _write_json(_out(cfg) / "verify.json", [r.to_json() for r in results])
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


HANDLERS = {
    "groundstate": cmd_groundstate,
    "constants": cmd_constants,
    "evolve": cmd_evolve,
    "selfsim": cmd_selfsim,
    "distances": cmd_distances,
    "rates": cmd_rates,
    "scan": cmd_scan,
    "verify": cmd_verify,
}


def _fail(code: int, kind: str, exc: Exception) -> int:
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        argv = sys.argv[1:] if argv is None else list(argv)
        command = next((a for a in argv if a in COMMANDS), None)
        cfg = resolve_config(argv)
    except SystemExit as exc:          # argparse usage errors
        return EXIT_CONFIG if exc.code else EXIT_OK
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    logging.basicConfig(level=logging.INFO if cfg["verbose"] else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return HANDLERS[command](cfg)
    except (ConfigError, DomainError) as exc:
        return _fail(EXIT_CONFIG, "config", exc)
    except (NoConvergence, NoBracket, StepFailure, InsufficientData, FloatingPointError) as exc:
        return _fail(EXIT_NUMERIC, "numerical", exc)
    except OSError as exc:
        return _fail(EXIT_CONFIG, "io", exc)


if __name__ == "__main__":
    sys.exit(main())
