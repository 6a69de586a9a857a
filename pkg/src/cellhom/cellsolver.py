"""Cell-problem minimization over the zero-boundary subspace.

The discrete infimum of avg_Q L(y, xi + grad w) is computed by preconditioned
L-BFGS from w = 0 and from ``multistart - 1`` seeded random perturbations. The
preconditioner is the factorized stiffness matrix of the domain mesh, which
makes iteration counts essentially independent of the mesh size for
p-growth energies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from cellhom.errors import BallOutsideRegion, ProblemTooLarge
from cellhom.fespace import CellEnergy, DofSpace, discretize_cell
from cellhom.optimize import lbfgs
from cellhom.structure import Ball, Box, CellDomain, PeriodicStructure


@dataclass(frozen=True)
class SolverParams:
    max_iter: int = 5000
    gtol: float = 1e-9
    multistart: int = 8
    seed: int = 0
    amplitude: float = 1.0
    max_dofs: int | None = None

    def __post_init__(self):
        if self.multistart < 1:
            raise ValueError("multistart must be >= 1")
        if not (self.gtol > 0 and self.max_iter > 0):
            raise ValueError("tolerances and iteration limits must be positive")

    @classmethod
    def from_dict(cls, d: dict | None) -> SolverParams:
        d = dict(d or {})
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


@dataclass(frozen=True, eq=False)
class CellProblemSpec:
    integrand: object
    xi: np.ndarray
    domain: CellDomain
    resolution: int
    solver: SolverParams = field(default_factory=SolverParams)

    @property
    def structure(self) -> PeriodicStructure:
        return self.domain.structure


@dataclass(eq=False)
class SolveOutcome:
    value: float
    argmin: np.ndarray
    per_start: list[float]
    iterations: list[int]
    gnorm: float
    status: str
    zero_value: float
    space: DofSpace = field(repr=False, default=None)
    xi: np.ndarray = field(repr=False, default=None)

    @property
    def solution(self) -> np.ndarray:
        """Nodal values of xi x + w at the minimizer, shape (n, m)."""
        return self.space.affine_nodal(self.xi) + self.argmin


def _dof_cap(space: DofSpace) -> int:
    return 300_000 if (not space.domain.structure.is_graph and space.gdim == 2) else 1_000_000


def stiffness_preconditioner(E: CellEnergy):
    K = E.stiffness()
    solve = spla.factorized(K)
    m = E.space.m

    def apply(g):
        G = g.reshape(-1, m)
        return np.column_stack([solve(G[:, j]) for j in range(m)]).ravel()

    return apply


def solve_cell_problem(spec: CellProblemSpec, space: DofSpace | None = None) -> SolveOutcome:
    """Best local minimum over all starts of the discretized cell energy."""
    L = spec.integrand
    xi = np.atleast_2d(np.asarray(spec.xi, float))
    if space is None:
        space = discretize_cell(spec.domain, spec.resolution, m=L.m)
    cap = spec.solver.max_dofs or _dof_cap(space)
    if space.n_free * space.m > cap:
        raise ProblemTooLarge(f"{space.n_free * space.m} unknowns exceed the cap of {cap}")
    E = CellEnergy(space, L, xi)
    zero = np.zeros(E.size)
    f0, _ = E(zero)
    if not math.isfinite(f0):
        return SolveOutcome(
            math.inf, E.full(zero), [math.inf], [0], math.inf, "degenerate", f0, space, xi
        )
    if E.size == 0:
        return SolveOutcome(f0, E.full(zero), [f0], [0], 0.0, "converged", f0, space, xi)

    P = stiffness_preconditioner(E)
    prm = spec.solver
    amp = prm.amplitude * (float(np.linalg.norm(xi)) + 1.0) * space.h
    results = []
    for j in range(prm.multistart):
        if j == 0:
            x0 = zero
        else:
            rng = np.random.default_rng([prm.seed, j])
            x0 = rng.uniform(-amp, amp, size=E.size)
        results.append(lbfgs(E, x0, precond=P, gtol=prm.gtol, max_iter=prm.max_iter))

    values = [r.fun if math.isfinite(r.fun) else math.inf for r in results]
    best = 0
    for j, v in enumerate(values):
        # later starts must win by more than rounding to displace an earlier one
        if v < values[best] - 1e-13 * (1.0 + abs(values[best])):
            best = j
    r = results[best]
    status = r.status
    if not math.isfinite(values[best]):
        status = "degenerate"
    return SolveOutcome(
        value=float(values[best]),
        argmin=E.full(r.x),
        per_start=[float(v) for v in values],
        iterations=[r.nit for r in results],
        gnorm=float(r.gnorm),
        status=status,
        zero_value=float(f0),
        space=space,
        xi=xi,
    )


def solve_quadratic_direct(space: DofSpace, L, xi) -> tuple[float, np.ndarray]:
    """Exact discrete minimum for L(x, z) = c(x)|z|^2 by one sparse linear solve."""
    E = CellEnergy(space, L, xi)
    c = L.quadratic_coeff(space.qpoints)
    if c is None:
        raise ValueError("integrand is not quadratic in xi")
    if E.size == 0:
        return E.value(np.zeros(0)), E.full(np.zeros(0))
    K = E.stiffness(c)
    d, m = space.gdim, space.m
    wq = np.repeat(E.nu * c, d)
    lift = E.lift.transpose(0, 2, 1).reshape(-1, m)
    rhs = -(E.Gf.T @ (wq[:, None] * lift))
    solve = spla.factorized(K)
    W = np.column_stack([solve(rhs[:, j]) for j in range(m)])
    return E.value(W.ravel()), E.full(W.ravel())


def hmu_ball(
    structure: PeriodicStructure,
    L,
    x,
    rho: float,
    xi,
    resolution: int,
    solver: SolverParams | None = None,
    region: Box | None = None,
) -> float:
    """Discrete value of the ball cell problem on Q_rho(x)."""
    domain = CellDomain.ball(structure, x, rho)
    if region is not None:
        lo, hi = region.bounds()
        blo, bhi = domain.region.bounds()
        if np.any(blo < lo) or np.any(bhi > hi):
            raise BallOutsideRegion(f"ball {domain.region} leaves the working region {region}")
    spec = CellProblemSpec(L, np.atleast_2d(xi), domain, resolution, solver or SolverParams())
    return solve_cell_problem(spec).value


@dataclass
class QuasiconvexResult:
    radii: list[float]
    resolutions: list[int]
    values: list[float]
    estimate: float
    stabilization: float


def quasiconvexify(
    structure: PeriodicStructure,
    L,
    x,
    xi,
    rho_schedule,
    elements_per_radius: int = 64,
    solver: SolverParams | None = None,
) -> QuasiconvexResult:
    """Ball values along a shrinking radius schedule at fixed elements per radius."""
    rhos = [float(r) for r in rho_schedule]
    if len(rhos) < 3 or any(b >= a for a, b in zip(rhos, rhos[1:])):
        raise ValueError("rho schedule must be strictly decreasing with >= 3 entries")
    res = [max(2, int(math.ceil(elements_per_radius / r - 1e-9))) for r in rhos]
    vals = [hmu_ball(structure, L, x, r, xi, n, solver) for r, n in zip(rhos, res)]
    return QuasiconvexResult(rhos, res, vals, vals[-1], abs(vals[-1] - vals[-2]))
