"""Preconditioned limited-memory BFGS with backtracking line search."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

_EPS = np.finfo(float).eps


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    jac: np.ndarray
    nit: int
    gnorm: float
    status: str  # "converged" | "max-iter" | "stalled" | "degenerate"


def lbfgs(
    fun_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    precond: Callable[[np.ndarray], np.ndarray] | None = None,
    gtol: float = 1e-9,
    max_iter: int = 5000,
    memory: int = 12,
) -> MinimizeResult:
    """Minimize a smooth function.

    ``precond`` applies an SPD approximation of the inverse Hessian; it is the
    base matrix of the two-loop recursion. The stopping test is on the
    preconditioned gradient norm sqrt(g . P g) <= gtol * (1 + |f|).

    The Armijo test tolerates increases at the rounding level of ``f`` so that
    the iteration can drive the gradient below the resolution of ``f`` itself.
    """
    P = precond if precond is not None else (lambda g: g)
    x = np.array(x0, dtype=float)
    f, g = fun_grad(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        return MinimizeResult(x, f, g, 0, np.inf, "degenerate")
    S: deque = deque(maxlen=memory)
    Y: deque = deque(maxlen=memory)
    R: deque = deque(maxlen=memory)
    gamma = 1.0
    it = 0
    Pg = P(g)
    gnorm = float(np.sqrt(max(np.dot(g, Pg), 0.0)))
    while True:
        if gnorm <= gtol * (1.0 + abs(f)):
            return MinimizeResult(x, f, g, it, gnorm, "converged")
        if it >= max_iter:
            return MinimizeResult(x, f, g, it, gnorm, "max-iter")
        d = -_two_loop(g, S, Y, R, P, gamma)
        slope = float(np.dot(g, d))
        if not slope < 0:
            S.clear(), Y.clear(), R.clear()
            gamma = 1.0
            d = -Pg
            slope = -gnorm**2
        step, fn, gn = _backtrack(fun_grad, x, f, d, slope)
        if step is None and len(S):
            # retry along the preconditioned steepest-descent direction
            S.clear(), Y.clear(), R.clear()
            d = -Pg
            slope = -gnorm**2
            step, fn, gn = _backtrack(fun_grad, x, f, d, slope)
        if step is None:
            if not np.isfinite(fn):
                return MinimizeResult(x, f, g, it, gnorm, "degenerate")
            status = "converged" if gnorm <= 1e-6 * (1.0 + abs(f)) else "stalled"
            return MinimizeResult(x, f, g, it, gnorm, status)
        s = step * d
        y = gn - g
        sy = float(np.dot(s, y))
        x = x + s
        f, g = fn, gn
        Pg = P(g)
        gnorm = float(np.sqrt(max(np.dot(g, Pg), 0.0)))
        it += 1
        if sy > 1e-12 * np.sqrt(np.dot(s, s) * np.dot(y, y)):
            S.append(s)
            Y.append(y)
            R.append(1.0 / sy)
            Py = P(y)
            gamma = sy / float(np.dot(y, Py))


def _two_loop(g, S, Y, R, P, gamma):
    q = g.copy()
    alphas = []
    for s, y, r in zip(reversed(S), reversed(Y), reversed(R)):
        a = r * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    q = gamma * P(q)
    for (s, y, r), a in zip(zip(S, Y, R), reversed(alphas)):
        b = r * np.dot(y, q)
        q += (a - b) * s
    return q


def _backtrack(fun_grad, x, f, d, slope, c1=1e-4, max_halvings=50):
    step = 1.0
    slack = 8 * _EPS * abs(f)
    fn = np.nan
    for _ in range(max_halvings):
        fn, gn = fun_grad(x + step * d)
        if np.isfinite(fn) and fn <= f + c1 * step * slope + slack:
            return step, fn, gn
        if np.isfinite(fn):
            # safeguarded quadratic interpolation
            denom = 2.0 * (fn - f - step * slope)
            trial = -slope * step * step / denom if denom > 0 else 0.5 * step
            step = min(max(trial, 0.1 * step), 0.5 * step)
        else:
            step *= 0.25
    return None, fn, None
