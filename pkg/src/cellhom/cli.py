"""Configuration-driven command-line driver.

A run is described by a JSON config with a ``command`` field and the inputs
of that command; ``--fixture NAME`` loads one of the bundled configs instead.
Every run writes ``results.csv``, ``summary.json`` and ``manifest.txt`` into
the output directory (plus command-specific extras).

Exit codes: 0 success, 1 configuration error, 2 solver failure, 3 failed
acceptance check (only with ``--check``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import scipy

from cellhom import __version__
from cellhom.cellsolver import CellProblemSpec, SolverParams, quasiconvexify, solve_cell_problem
from cellhom.errors import BallOutsideRegion, ConfigError, ProblemTooLarge
from cellhom.gammacheck import GammaExperiment, gamma_experiment
from cellhom.homog import (
    Component,
    check_subadditivity,
    compute_lhom,
    compute_lhom_piecewise,
    periodic_limit_check,
    xi_key,
)
from cellhom.integrand import integrand_from_config, validate_growth
from cellhom.oracles import reference_lhom
from cellhom.structure import (
    CellDomain,
    as_region,
    lattice_cover,
    structure_from_config,
    validate_structure,
)

log = logging.getLogger("cellhom")

COMMANDS = (
    "validate",
    "cell",
    "quasiconvexify",
    "homogenize",
    "homogenize-piecewise",
    "subadd-check",
    "periodic-check",
    "gamma",
    "cover",
)

REQUIRED = {
    "validate": ("structure",),
    "cell": ("structure", "integrand", "xi", "resolution"),
    "quasiconvexify": ("structure", "integrand", "xi", "x", "rho_schedule"),
    "homogenize": ("structure", "integrand", "xi", "k_list", "resolutions"),
    "homogenize-piecewise": ("components", "xi", "k_list", "resolutions"),
    "subadd-check": ("structure", "integrand", "xi", "k_list", "resolutions"),
    "periodic-check": ("structure", "integrand", "xi", "x", "rho", "t_schedule"),
    "gamma": ("structure", "integrand", "xi", "region", "t_schedule"),
    "cover": ("structure", "region", "t_schedule"),
}

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3
FAILED_STATUSES = ("degenerate", "failed")


class SolverFailure(Exception):
    pass


@dataclass
class RunResult:
    exit_code: int
    out_dir: Path | None = None
    summary: dict = field(default_factory=dict)
    message: str = ""


# -- config ----------------------------------------------------------------------


def list_fixtures() -> list[str]:
    root = resources.files("cellhom") / "fixtures"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_fixture(name: str) -> dict:
    path = resources.files("cellhom") / "fixtures" / f"{name}.json"
    if not path.is_file():
        raise ConfigError(f"unknown fixture {name!r}; available: {', '.join(list_fixtures())}")
    return json.loads(path.read_text())


def parse_xi(v) -> np.ndarray:
    """A number, a row (m = 1) or an m x N nested list."""
    arr = np.asarray(v, float)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(1, -1)
    if arr.ndim == 2:
        return arr
    raise ConfigError(f"xi entries must be scalars, rows or matrices, got shape {arr.shape}")


def validate_config(cfg: dict) -> dict:
    cmd = cfg.get("command")
    if cmd not in COMMANDS:
        raise ConfigError(f"field 'command' must be one of {COMMANDS}, got {cmd!r}")
    missing = [k for k in REQUIRED[cmd] if k not in cfg]
    if missing:
        raise ConfigError(f"command {cmd!r} is missing required field(s): {', '.join(missing)}")
    if "seed" not in cfg or cfg["seed"] is None:
        raise ConfigError("field 'seed' is required (set it in the config or pass --seed)")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("field 'seed' must be a nonnegative integer")
    if "xi" in REQUIRED[cmd] and not isinstance(cfg["xi"], list):
        raise ConfigError("field 'xi' must be a list of xi values")
    return cfg


def _solver(cfg: dict) -> SolverParams:
    return SolverParams.from_dict({**cfg.get("solver", {}), "seed": cfg["seed"]})


def _within(value: float, ref: float, check: dict) -> bool:
    rtol = float(check.get("rtol", 0.0))
    atol = float(check.get("atol", 0.0))
    return abs(value - ref) <= max(rtol * abs(ref), atol)


def _rel_dev(value: float, ref: float) -> float:
    return abs(value - ref) / abs(ref) if ref != 0 else abs(value - ref)


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\r\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


# -- commands --------------------------------------------------------------------
# Each returns (csv text, summary dict, check passed or None, extra files).


def _cmd_validate(cfg, tasks):
    s = structure_from_config(cfg["structure"])
    rep = validate_structure(s, seed=cfg["seed"], samples=int(cfg.get("samples", 64)))
    rows = [["structure", name, ok, detail] for name, ok, detail in rep.entries]
    summary = {"structure": rep.as_dict()}
    passed = rep.passed
    if "integrand" in cfg:
        L = integrand_from_config(cfg["integrand"])
        g = validate_growth(L, int(cfg.get("samples", 1000)), cfg["seed"])
        rows.append(["integrand", "alpha", g.alpha_ok, f"alpha_hat={g.alpha_hat!r}"])
        rows.append(["integrand", "beta", g.beta_ok, f"beta_hat={g.beta_hat!r}"])
        summary["growth"] = {
            "alpha_hat": g.alpha_hat,
            "beta_hat": g.beta_hat,
            "passed": g.passed,
            "coercivity_warning": g.coercivity_warning,
        }
        if g.coercivity_warning:
            log.warning("integrand has alpha = 0: coercivity warning")
        passed = passed and g.passed
    return _csv(["target", "check", "passed", "detail"], rows), summary, passed, {}


def _cmd_cell(cfg, tasks):
    s = structure_from_config(cfg["structure"])
    L = integrand_from_config(cfg["integrand"])
    d = dict(cfg.get("domain", {"kind": "cell", "k": 1}))
    kind = d.get("kind", "cell")
    if kind == "cell":
        domain = CellDomain.scaled_cell(s, int(d.get("k", 1)), d.get("offset"))
    elif kind == "ball":
        domain = CellDomain.ball(s, d["center"], float(d["radius"]))
    elif kind == "box":
        domain = CellDomain.box(s, d["lower"], d["upper"])
    else:
        raise ConfigError(f"domain kind must be cell, ball or box, got {kind!r}")
    solver = _solver(cfg)
    rows, out = [], []
    for xi in cfg["xi"]:
        xi = parse_xi(xi)
        o = solve_cell_problem(CellProblemSpec(L, xi, domain, int(cfg["resolution"]), solver))
        if o.status in FAILED_STATUSES:
            raise SolverFailure(f"cell solve at xi={xi_key(xi)} ended with status {o.status}")
        ref = reference_lhom(cfg["oracle"], L, xi) if "oracle" in cfg else None
        rows.append([*xi_key(xi), o.value, o.zero_value, o.status, sum(o.iterations)])
        out.append({"xi": list(xi_key(xi)), "value": o.value, "status": o.status, "oracle": ref})
    nxi = len(rows[0]) - 4
    head = [f"xi{j}" for j in range(nxi)] + ["value", "zero_bound", "status", "iterations"]
    passed = None
    if "oracle" in cfg:
        passed = all(_within(r["value"], r["oracle"], cfg.get("check", {})) for r in out)
    return _csv(head, rows), {"solves": out}, passed, {}


def _cmd_quasiconvexify(cfg, tasks):
    s = structure_from_config(cfg["structure"])
    L = integrand_from_config(cfg["integrand"])
    solver = _solver(cfg)
    rows, out = [], []
    for xi in cfg["xi"]:
        xi = parse_xi(xi)
        r = quasiconvexify(
            s, L, cfg["x"], xi, cfg["rho_schedule"], int(cfg.get("elements_per_radius", 64)), solver
        )
        ref = reference_lhom(cfg["oracle"], L, xi) if "oracle" in cfg else None
        for rho, res, v in zip(r.radii, r.resolutions, r.values):
            rows.append([*xi_key(xi), rho, res, v])
        out.append(
            {
                "xi": list(xi_key(xi)),
                "estimate": r.estimate,
                "stabilization": r.stabilization,
                "oracle": ref,
                "passed": None if ref is None else _within(r.estimate, ref, cfg.get("check", {})),
            }
        )
    nxi = len(rows[0]) - 3
    head = [f"xi{j}" for j in range(nxi)] + ["rho", "resolution", "value"]
    passed = None if "oracle" not in cfg else all(o["passed"] for o in out)
    return _csv(head, rows), {"estimates": out}, passed, {}


def _lhom_table(cfg, tasks):
    s = structure_from_config(cfg["structure"])
    L = integrand_from_config(cfg["integrand"])
    xis = [parse_xi(x) for x in cfg["xi"]]
    tab = compute_lhom(s, L, xis, cfg["k_list"], cfg["resolutions"], _solver(cfg), tasks)
    bad = [r for r in tab.rows if r.status.startswith(FAILED_STATUSES)]
    if bad:
        raise SolverFailure(f"{len(bad)} cell solve(s) failed, first: k={bad[0].k} status={bad[0].status}")
    return L, xis, tab


def _cmd_homogenize(cfg, tasks):
    L, xis, tab = _lhom_table(cfg, tasks)
    summary = tab.summary()
    extra = {}
    passed = None
    if "oracle" in cfg:
        rows = []
        for xi in xis:
            key = xi_key(xi)
            ref = reference_lhom(cfg["oracle"], L, xi)
            ok = _within(tab.lhom[key], ref, cfg.get("check", {}))
            rows.append([*key, tab.lhom[key], tab.error[key], tab.best_k[key], ref,
                         _rel_dev(tab.lhom[key], ref), ok])
            passed = ok if passed is None else (passed and ok)
        head = [f"xi{j}" for j in range(len(xis[0].ravel()))]
        head += ["lhom", "error", "best_k", "oracle", "deviation", "passed"]
        extra["lhom.csv"] = _csv(head, rows)
        summary["oracle"] = {"id": cfg["oracle"], "passed": passed}
    return tab.to_csv(), summary, passed, extra


def _cmd_subadd(cfg, tasks):
    _, _, tab = _lhom_table(cfg, tasks)
    rep = check_subadditivity(tab)
    rows = []
    for c in rep.checks:
        if c["kind"] == "subadditive":
            rows.append([*c["xi"], c["kind"], c["k"], c["ik"], c["s_k"], c["s_ik"], c["tol"], c["passed"]])
        else:
            rows.append([*c["xi"], c["kind"], c["k"], "", c["s_k"], c["bound"], 1e-10, c["passed"]])
    nxi = len(rep.checks[0]["xi"])
    head = [f"xi{j}" for j in range(nxi)] + ["kind", "k", "ik", "lhs", "rhs", "tol", "passed"]
    return _csv(head, rows), {**tab.summary(), "subadditivity_passed": rep.passed}, rep.passed, {
        "table.csv": tab.to_csv()
    }


def _cmd_periodic(cfg, tasks):
    s = structure_from_config(cfg["structure"])
    L = integrand_from_config(cfg["integrand"])
    out, rows = [], []
    passed = True
    for xi in cfg["xi"]:
        xi = parse_xi(xi)
        r = periodic_limit_check(
            s, L, cfg["x"], float(cfg["rho"]), xi, cfg["t_schedule"],
            int(cfg.get("elements_per_period", 8)), _solver(cfg), tasks,
        )
        for t, v in zip(r.ts, r.values):
            rows.append([*xi_key(xi), t, v])
        out.append({"xi": list(xi_key(xi)), "values": r.values, "spread": r.spread,
                    "mean": r.mean, "passed": r.passed})
        passed = passed and r.passed
    head = [f"xi{j}" for j in range(len(out[0]["xi"]))] + ["t", "value"]
    return _csv(head, rows), {"checks": out}, passed, {}


def _cmd_gamma(cfg, tasks):
    s = structure_from_config(cfg["structure"])
    L = integrand_from_config(cfg["integrand"])
    solver = _solver(cfg)
    if len(cfg["xi"]) != 1:
        raise ConfigError("gamma takes exactly one xi")
    xi = parse_xi(cfg["xi"][0])
    if "oracle" in cfg:
        lhom, err = reference_lhom(cfg["oracle"], L, xi), 0.0
    else:
        ref = cfg.get("reference", {"k_list": [1, 2, 4], "resolutions": [64, 128]})
        tab = compute_lhom(s, L, [xi], ref["k_list"], ref["resolutions"], solver, tasks)
        lhom, err = tab.lhom[xi_key(xi)], tab.error[xi_key(xi)]
    exp = GammaExperiment(
        s, L, xi, as_region(cfg["region"]), cfg["t_schedule"],
        int(cfg.get("elements_per_period", 16)), lhom, err,
    )
    rep = gamma_experiment(exp, solver, tasks)
    if any(st in FAILED_STATUSES for st in rep.statuses):
        raise SolverFailure(f"gamma solve failed: statuses {rep.statuses}")
    return rep.to_csv(), rep.summary(), rep.passed, {"deviation.dat": rep.plot_data()}


def _cmd_piecewise(cfg, tasks):
    comps, refs = [], []
    for c in cfg["components"]:
        for k in ("structure", "integrand", "weight"):
            if k not in c:
                raise ConfigError(f"component is missing required field {k!r}")
        comps.append(
            Component(
                structure_from_config(c["structure"]),
                integrand_from_config(c["integrand"]),
                float(c["weight"]),
                None if c.get("embed") is None else np.asarray(c["embed"], float),
            )
        )
        refs.append(c.get("oracle"))
    if len(cfg["xi"]) != 1:
        raise ConfigError("homogenize-piecewise takes exactly one xi")
    xi = parse_xi(cfg["xi"][0])
    r = compute_lhom_piecewise(comps, xi, cfg["k_list"], cfg["resolutions"], _solver(cfg), tasks)
    rows, oracle_vals = [], []
    for j, (c, v, e, oid) in enumerate(zip(comps, r.per_component, r.errors, refs)):
        xi_j = xi if c.embed is None else xi @ np.atleast_2d(c.embed)
        ref = reference_lhom(oid, c.integrand, xi_j) if oid else None
        oracle_vals.append(ref)
        rows.append([j, c.structure.name, c.weight, v, e, "" if ref is None else ref])
    rows.append(["aggregate", "", sum(c.weight for c in comps), r.aggregate, "", ""])
    summary = {"per_component": r.per_component, "errors": r.errors, "aggregate": r.aggregate}
    passed = None
    if all(v is not None for v in oracle_vals):
        expected = float(sum(c.weight * v for c, v in zip(comps, oracle_vals)))
        summary["expected"] = expected
        passed = _within(r.aggregate, expected, cfg.get("check", {}))
    head = ["component", "structure", "weight", "lhom", "error", "oracle"]
    return _csv(head, rows), summary, passed, {}


def _cmd_cover(cfg, tasks):
    s = structure_from_config(cfg["structure"])
    region = as_region(cfg["region"])
    k = int(cfg.get("k", 1))
    rows, gaps = [], []
    for t in cfg["t_schedule"]:
        c = lattice_cover(s, region, float(t), k)
        rows.append([float(t), k, len(c.inner), len(c.outer), c.gap_ratio])
        gaps.append(c.gap_ratio)
    decreasing = all(b < a for a, b in zip(gaps, gaps[1:]))
    return (
        _csv(["t", "k", "inner", "outer", "gap_ratio"], rows),
        {"gap_ratio": gaps, "strictly_decreasing": decreasing},
        decreasing,
        {},
    )


HANDLERS = {
    "validate": _cmd_validate,
    "cell": _cmd_cell,
    "quasiconvexify": _cmd_quasiconvexify,
    "homogenize": _cmd_homogenize,
    "homogenize-piecewise": _cmd_piecewise,
    "subadd-check": _cmd_subadd,
    "periodic-check": _cmd_periodic,
    "gamma": _cmd_gamma,
    "cover": _cmd_cover,
}


# -- driver ----------------------------------------------------------------------


def _manifest(cfg: dict, argv: list[str], wall: float) -> str:
    lines = [
        f"cellhom {__version__}",
        f"python {platform.python_version()}",
        f"numpy {np.__version__}",
        f"scipy {scipy.__version__}",
        f"command {cfg['command']}",
        f"seed {cfg['seed']}",
        f"argv {' '.join(argv)}",
        f"wall_time_s {wall:.3f}",
        "config:",
        json.dumps(cfg, indent=2, sort_keys=True),
    ]
    return "\n".join(lines) + "\n"


def run(
    cfg: dict,
    out_dir: str | Path | None = None,
    tasks: int | None = None,
    check: bool = False,
    argv: list[str] | None = None,
) -> RunResult:
    """Validate ``cfg``, dispatch its command and write the artifacts."""
    t0 = time.perf_counter()
    try:
        cfg = validate_config(dict(cfg))
        ntasks = int(tasks or cfg.get("tasks") or os.cpu_count() or 1)
        text, summary, passed, extra = HANDLERS[cfg["command"]](cfg, ntasks)
    except (SolverFailure, ProblemTooLarge, BallOutsideRegion) as exc:
        log.error("solver failure: %s", exc)
        return RunResult(EXIT_SOLVER, message=str(exc))
    except (KeyError, TypeError, ValueError, OSError) as exc:
        # CellhomError subclasses raised on bad input land here too
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        log.error("configuration error: %s", msg)
        return RunResult(EXIT_CONFIG, message=str(msg))
    wall = time.perf_counter() - t0
    summary = {"command": cfg["command"], "seed": cfg["seed"], "check_passed": passed, **summary}
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "results.csv", "w", newline="") as fh:
            fh.write(text)
        for name, body in extra.items():
            with open(out / name, "w", newline="") as fh:
                fh.write(body)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=_jsonable) + "\n")
        (out / "manifest.txt").write_text(_manifest(cfg, argv or [], wall))
    if check and passed is False:
        log.error("acceptance check failed for %s", cfg["command"])
        return RunResult(EXIT_CHECK, out, summary, "check failed")
    if check and passed is None:
        log.warning("--check given but command %s has no acceptance criterion configured", cfg["command"])
    return RunResult(EXIT_OK, out, summary)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON serializable: {type(v).__name__}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cellhom", description=__doc__.splitlines()[0])
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="JSON run configuration")
    src.add_argument("--fixture", help="name of a bundled configuration")
    p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    p.add_argument("--out", type=Path, default=None, help="output directory (default runs/<command>)")
    p.add_argument("--tasks", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--check", action="store_true", help="exit 3 if the configured acceptance check fails")
    p.add_argument("--list-fixtures", action="store_true", help="print bundled fixture names and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    if args.list_fixtures:
        print("\n".join(list_fixtures()))
        return EXIT_OK
    try:
        if args.fixture:
            cfg = load_fixture(args.fixture)
        elif args.config:
            cfg = json.loads(args.config.read_text())
        else:
            raise ConfigError("one of --config or --fixture is required")
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = args.out or Path("runs") / str(cfg.get("command", "run"))
    res = run(cfg, out, args.tasks, args.check, argv)
    if res.exit_code == EXIT_OK:
        print(f"{cfg['command']}: ok, artifacts in {res.out_dir}")
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
