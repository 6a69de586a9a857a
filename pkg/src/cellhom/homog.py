"""Homogenized integrands from cell problems on growing scaled cells.

``compute_lhom`` tabulates s_k = (mean cell energy on h_k(U)) over k and
mesh resolution and takes L_hom(xi) as the minimum over the finest-resolution
values. ``check_subadditivity`` verifies the chain s_{ik} <= s_k that makes
the truncated infimum meaningful; ``periodic_limit_check`` tracks ball values
of the oscillating integrand as the oscillation scale grows.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from cellhom.cellsolver import CellProblemSpec, SolverParams, hmu_ball, solve_cell_problem
from cellhom.errors import InsufficientPairs, ProblemTooLarge
from cellhom.integrand import rescale_integrand
from cellhom.parallel import run_tasks, task_seed
from cellhom.structure import CellDomain, PeriodicStructure, nearest_graph_point

SOLVER_FLOOR = 1e-10


def xi_key(xi) -> tuple[float, ...]:
    return tuple(float(v) for v in np.asarray(xi, float).ravel())


@dataclass
class HomogRow:
    xi: tuple[float, ...]
    k: int
    resolution: int
    s: float
    zero_bound: float
    status: str
    iterations: int


@dataclass
class HomogTable:
    rows: list[HomogRow]
    xi_shape: tuple[int, int]
    lhom: dict = field(default_factory=dict)
    error: dict = field(default_factory=dict)
    best_k: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def xis(self) -> list[tuple[float, ...]]:
        out = []
        for r in self.rows:
            if r.xi not in out:
                out.append(r.xi)
        return out

    def value(self, xi, k: int, resolution: int | None = None) -> float:
        key = xi_key(xi)
        res = resolution or self.finest(key)
        for r in self.rows:
            if r.xi == key and r.k == k and r.resolution == res:
                return r.s
        raise KeyError((key, k, res))

    def finest(self, xi) -> int:
        return max(r.resolution for r in self.rows if r.xi == xi_key(xi))

    def resolution_gap(self, xi, k: int) -> float:
        key = xi_key(xi)
        vals = sorted((r.resolution, r.s) for r in self.rows if r.xi == key and r.k == k)
        if len(vals) < 2:
            return 0.0
        return abs(vals[-1][1] - vals[-2][1])

    def zero_bound(self, xi) -> float:
        key = xi_key(xi)
        res = self.finest(key)
        return min(r.zero_bound for r in self.rows if r.xi == key and r.resolution == res)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\r\n")
        nxi = len(self.rows[0].xi) if self.rows else 0
        wr.writerow(
            [f"xi{j}" for j in range(nxi)] + ["k", "resolution", "s", "zero_bound", "status"]
        )
        for r in self.rows:
            wr.writerow(
                [repr(v) for v in r.xi] + [r.k, r.resolution, repr(r.s), repr(r.zero_bound), r.status]
            )
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def summary(self) -> dict:
        return {
            "xi_shape": list(self.xi_shape),
            "lhom": [
                {"xi": list(x), "lhom": self.lhom[x], "error": self.error[x], "best_k": self.best_k[x]}
                for x in self.xis()
            ],
            "meta": self.meta,
        }


def _solve_row(args):
    structure, L, xi, k, res, solver = args
    spec = CellProblemSpec(L, xi, CellDomain.scaled_cell(structure, k), res, solver)
    try:
        out = solve_cell_problem(spec)
    except ProblemTooLarge as exc:
        # a failed row is recorded, the rest of the table still stands
        return math.nan, math.nan, f"failed:{type(exc).__name__}", 0
    return out.value, out.zero_value, out.status, int(sum(out.iterations))


def compute_lhom(
    structure: PeriodicStructure,
    L,
    xis,
    k_list=(1, 2, 4),
    resolutions=(64,),
    solver: SolverParams | None = None,
    tasks: int = 1,
) -> HomogTable:
    """Tabulate s_k over (xi, k, resolution) and extract L_hom per xi.

    ``resolutions`` are elements per unit length, so the cost grows with k.
    Rows are independent tasks with seeds derived from (seed, xi, k, res).
    """
    solver = solver or SolverParams()
    ks = [int(k) for k in k_list]
    res_list = [int(r) for r in resolutions]
    if not ks:
        raise ValueError("k_list must be nonempty")
    if any(b <= a for a, b in zip(res_list, res_list[1:])):
        raise ValueError("resolutions must be increasing")
    xis = [np.atleast_2d(np.asarray(x, float)) for x in _as_xi_list(xis)]
    jobs, keys = [], []
    for ix, xi in enumerate(xis):
        for k in ks:
            for res in res_list:
                prm = SolverParams(**{**solver.__dict__, "seed": task_seed(solver.seed, ix, k, res)})
                jobs.append((structure, L, xi, k, res, prm))
                keys.append((xi_key(xi), k, res))
    results = run_tasks(_solve_row, jobs, tasks)
    rows = [
        HomogRow(key[0], key[1], key[2], val, zb, status, nit)
        for key, (val, zb, status, nit) in zip(keys, results)
    ]
    table = HomogTable(
        rows,
        xis[0].shape,
        meta={
            "structure": structure.name,
            "integrand": L.catalog_id,
            "params": L.params,
            "k_list": ks,
            "resolutions": res_list,
            "seed": solver.seed,
        },
    )
    finest = res_list[-1]
    for xi in xis:
        key = xi_key(xi)
        fin = {r.k: r.s for r in rows if r.xi == key and r.resolution == finest}
        ok = {k: v for k, v in fin.items() if math.isfinite(v)}
        kstar = min(ok, key=lambda k: (ok[k], k)) if ok else ks[0]
        table.lhom[key] = ok.get(kstar, math.inf)
        table.best_k[key] = kstar
        kgap = 0.0
        if 2 * kstar in ok:
            kgap = abs(ok[kstar] - ok[2 * kstar])
        elif kstar % 2 == 0 and kstar // 2 in ok:
            kgap = abs(ok[kstar] - ok[kstar // 2])
        table.error[key] = table.resolution_gap(key, kstar) + kgap
    return table


def _as_xi_list(xis):
    if np.ndim(xis) == 0:
        return [np.array([[float(xis)]])]
    return list(xis)


@dataclass
class SubadditivityReport:
    checks: list[dict]
    passed: bool


def check_subadditivity(table: HomogTable, floor: float = SOLVER_FLOOR) -> SubadditivityReport:
    """s_{ik} <= s_k + tol on every available (k, ik) pair, and s_k <= the w = 0 bound."""
    checks = []
    pairs = 0
    for key in table.xis():
        res = table.finest(key)
        ks = sorted({r.k for r in table.rows if r.xi == key and r.resolution == res})
        vals = {k: table.value(key, k, res) for k in ks}
        zb = {
            r.k: r.zero_bound for r in table.rows if r.xi == key and r.resolution == res
        }
        for k in ks:
            for kk in ks:
                if kk > k and kk % k == 0:
                    pairs += 1
                    tol = 2 * max(table.resolution_gap(key, k), table.resolution_gap(key, kk)) + floor
                    checks.append(
                        {
                            "xi": list(key),
                            "kind": "subadditive",
                            "k": k,
                            "ik": kk,
                            "s_k": vals[k],
                            "s_ik": vals[kk],
                            "tol": tol,
                            "passed": bool(vals[kk] <= vals[k] + tol),
                        }
                    )
            checks.append(
                {
                    "xi": list(key),
                    "kind": "zero_bound",
                    "k": k,
                    "s_k": vals[k],
                    "bound": zb[k],
                    "passed": bool(vals[k] <= zb[k] + floor),
                }
            )
    if pairs == 0:
        raise InsufficientPairs("table has no (k, ik) pair at a common resolution")
    return SubadditivityReport(checks, all(c["passed"] for c in checks))


@dataclass
class PeriodicLimitReport:
    ts: list[float]
    values: list[float]
    tail_min: float
    tail_max: float
    spread: float
    mean: float
    passed: bool


def _ball_value_at_scale(args):
    structure, L, x, rho, xi, t, ept, solver = args
    if structure.is_graph:
        # change of variables: the ball of radius t rho in the unscaled graph
        center = nearest_graph_point(structure, np.asarray(x, float) * t)
        return hmu_ball(structure, L, center, t * rho, xi, ept, solver)
    res = int(math.ceil(ept * t - 1e-9))
    return hmu_ball(structure, rescale_integrand(L, t), x, rho, xi, res, solver)


def periodic_limit_check(
    structure: PeriodicStructure,
    L,
    x,
    rho: float,
    xi,
    t_list,
    elements_per_period: int = 8,
    solver: SolverParams | None = None,
    tasks: int = 1,
    rtol: float = 0.05,
) -> PeriodicLimitReport:
    """Ball values of L_t = L(t .) along increasing t; pass if the tail settles.

    The tail is the last half of ``t_list``; it passes when its spread is at
    most ``rtol`` times its mean.
    """
    ts = [float(t) for t in t_list]
    if len(ts) < 3 or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("t_list must be increasing with >= 3 entries")
    solver = solver or SolverParams()
    xi = np.atleast_2d(np.asarray(xi, float))
    jobs = [
        (structure, L, x, rho, xi, t, elements_per_period,
         SolverParams(**{**solver.__dict__, "seed": task_seed(solver.seed, j)}))
        for j, t in enumerate(ts)
    ]
    if L.x_independent:
        # L_t = L for every t, so one solve at the finest resolution serves all
        vals = [float(_ball_value_at_scale(jobs[-1]))] * len(ts)
    else:
        vals = [float(v) for v in run_tasks(_ball_value_at_scale, jobs, tasks)]
    tail = vals[len(vals) // 2:]
    lo, hi = min(tail), max(tail)
    mean = float(np.mean(tail))
    spread = hi - lo
    return PeriodicLimitReport(ts, vals, lo, hi, spread, mean, bool(spread <= rtol * abs(mean)))


@dataclass
class Component:
    structure: PeriodicStructure
    integrand: object
    weight: float
    embed: np.ndarray | None = None


@dataclass
class PiecewiseResult:
    per_component: list[float]
    errors: list[float]
    aggregate: float


def compute_lhom_piecewise(
    components: list[Component],
    xi,
    k_list=(1, 2, 4),
    resolutions=(64,),
    solver: SolverParams | None = None,
    tasks: int = 1,
) -> PiecewiseResult:
    """Per-component L_hom^i(xi) and the weighted sum over components."""
    if not components:
        raise ValueError("components must be nonempty")
    xi = np.atleast_2d(np.asarray(xi, float))
    per, errs = [], []
    for c in components:
        if c.weight < 0:
            raise ValueError("component weights must be nonnegative")
        xi_i = xi if c.embed is None else xi @ np.atleast_2d(np.asarray(c.embed, float))
        tab = compute_lhom(c.structure, c.integrand, [xi_i], k_list, resolutions, solver, tasks)
        per.append(tab.lhom[xi_key(xi_i)])
        errs.append(tab.error[xi_key(xi_i)])
    agg = float(sum(c.weight * v for c, v in zip(components, per)))
    return PiecewiseResult(per, errs, agg)
