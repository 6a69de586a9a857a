"""Boundary-value experiment for the oscillating energies E_t.

For affine data u = xi . x on a fixed domain Q the minimal mean energy

    e_t = min_w avg_Q L(t y, xi + grad w)

should approach L_hom(xi) as t grows. Euclidean structures are solved on Q
with the rescaled integrand at ``elements_per_period * t`` elements per unit
length. Graph structures use the equivalent problem on h_t(Q) with the base
integrand, so that the graph geometry stays at its natural scale.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from cellhom.cellsolver import CellProblemSpec, SolveOutcome, SolverParams, solve_cell_problem
from cellhom.integrand import rescale_integrand
from cellhom.parallel import run_tasks, task_seed
from cellhom.structure import Ball, Box, CellDomain, PeriodicStructure, as_region

MIN_ELEMENTS_PER_PERIOD = 8


@dataclass
class GammaExperiment:
    structure: PeriodicStructure
    integrand: object
    xi: np.ndarray
    region: Box | Ball
    t_schedule: list
    elements_per_period: int = 16
    lhom: float | None = None
    lhom_error: float = 0.0

    def __post_init__(self):
        self.xi = np.atleast_2d(np.asarray(self.xi, float))
        self.region = as_region(self.region)
        self.t_schedule = [float(t) for t in self.t_schedule]
        if self.elements_per_period < MIN_ELEMENTS_PER_PERIOD:
            raise ValueError(
                f"need >= {MIN_ELEMENTS_PER_PERIOD} elements per period, got {self.elements_per_period}"
            )

    def domain(self, t: float) -> tuple[CellDomain, object, int]:
        """Domain, integrand and resolution of the solve at scale t."""
        if self.structure.is_graph:
            return (
                CellDomain(self.structure, self.region.scaled(t)),
                self.integrand,
                self.elements_per_period,
            )
        res = int(math.ceil(self.elements_per_period * t - 1e-9))
        return CellDomain(self.structure, self.region), rescale_integrand(self.integrand, t), res


@dataclass
class GammaReport:
    ts: list[float]
    energies: list[float]
    deviations: list[float]
    statuses: list[str]
    lhom: float
    lhom_error: float
    final_ok: bool
    monotone_ok: bool
    boundary_ok: bool
    outcomes: list[SolveOutcome] = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.final_ok and self.monotone_ok and self.boundary_ok

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\r\n")
        wr.writerow(["t", "e_t", "deviation", "status"])
        for row in zip(self.ts, self.energies, self.deviations, self.statuses):
            wr.writerow([repr(row[0]), repr(row[1]), repr(row[2]), row[3]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def plot_data(self) -> str:
        """Two columns, t and deviation, for a log-log plot."""
        return "".join(f"{t!r} {d!r}\n" for t, d in zip(self.ts, self.deviations))

    def summary(self) -> dict:
        return {
            "t": self.ts,
            "e_t": self.energies,
            "deviation": self.deviations,
            "lhom": self.lhom,
            "lhom_error": self.lhom_error,
            "final_ok": self.final_ok,
            "monotone_ok": self.monotone_ok,
            "boundary_ok": self.boundary_ok,
            "passed": self.passed,
        }


def _solve_at_scale(args) -> SolveOutcome:
    exp, t, solver = args
    domain, L, res = exp.domain(t)
    return solve_cell_problem(CellProblemSpec(L, exp.xi, domain, res, solver))


def boundary_matches_affine(out: SolveOutcome) -> bool:
    bd = out.space.boundary
    return bool(np.array_equal(out.solution[bd], out.space.affine_nodal(out.xi)[bd]))


def gamma_experiment(
    exp: GammaExperiment,
    solver: SolverParams | None = None,
    tasks: int = 1,
    atol: float = 1e-10,
) -> GammaReport:
    """Solve the affine boundary-value problem along the t schedule.

    Passes when the final deviation from ``exp.lhom`` is at most
    max(2% relative, lhom_error, atol) and the last three deviations are
    nonincreasing up to tol = max(lhom_error, 1e-8 (1 + |lhom|)). ``atol``
    only matters when lhom is zero.
    """
    ts = exp.t_schedule
    if len(ts) < 3 or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("t schedule must be increasing with >= 3 entries")
    if exp.lhom is None:
        raise ValueError("experiment needs a reference lhom value")
    solver = solver or SolverParams()
    jobs = [
        (exp, t, SolverParams(**{**solver.__dict__, "seed": task_seed(solver.seed, j)}))
        for j, t in enumerate(ts)
    ]
    outs = run_tasks(_solve_at_scale, jobs, tasks)
    e = [o.value for o in outs]
    lh = float(exp.lhom)
    dev = [abs(v - lh) for v in e]
    tol = max(exp.lhom_error, 1e-8 * (1.0 + abs(lh)))
    final_ok = dev[-1] <= max(0.02 * abs(lh), exp.lhom_error, atol)
    tail = dev[-3:]
    monotone_ok = all(b <= a + tol for a, b in zip(tail, tail[1:]))
    boundary_ok = all(boundary_matches_affine(o) for o in outs)
    return GammaReport(
        ts, e, dev, [o.status for o in outs], lh, exp.lhom_error,
        bool(final_ok), bool(monotone_ok), boundary_ok, list(outs),
    )
