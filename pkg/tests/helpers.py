"""Independent oracles shared by the unit and acceptance tests."""

import itertools
from fractions import Fraction

import numpy as np
import pytest

from cellhom.fespace import CellEnergy
from cellhom.structure import Box

ACCEPTANCE = pytest.StashKey[list]()


def brute_cover(region, t, k):
    """Exact enumeration with rational arithmetic.

    The half-open cube z + [0, k)^N lies in the open convex set tA iff z is in
    tA and every corner lies in its closure; it meets tA iff the closed cube
    does.
    """
    t, k = Fraction(t), Fraction(k)
    if isinstance(region, Box):
        lo = [Fraction(v) * t for v in region.lower]
        hi = [Fraction(v) * t for v in region.upper]

        def inside_open(p):
            return all(a < x < b for x, a, b in zip(p, lo, hi))

        def inside_closed(p):
            return all(a <= x <= b for x, a, b in zip(p, lo, hi))

        def meets(z):
            return all(zz < b and zz + k > a for zz, a, b in zip(z, lo, hi))

        span = list(zip(lo, hi))
    else:
        c = [Fraction(v) * t for v in region.center]
        r2 = (Fraction(region.radius) * t) ** 2

        def d2(p):
            return sum((x - y) ** 2 for x, y in zip(p, c))

        def inside_open(p):
            return d2(p) < r2

        def inside_closed(p):
            return d2(p) <= r2

        def meets(z):
            near = [min(max(cc, zz), zz + k) for cc, zz in zip(c, z)]
            return d2(near) < r2

        rr = Fraction(region.radius) * t
        span = [(cc - rr, cc + rr) for cc in c]
    ranges = [range(int(a // k) - 2, int(b // k) + 3) for a, b in span]
    inner, outer = [], []
    for n in itertools.product(*ranges):
        z = [k * v for v in n]
        corners = itertools.product(*[(zz, zz + k) for zz in z])
        if inside_open(z) and all(inside_closed(q) for q in corners):
            inner.append(tuple(int(v) for v in z))
        if meets(z):
            outer.append(tuple(int(v) for v in z))
    return sorted(inner), sorted(outer)


def fd_worst_error(E: CellEnergy, xi, samples: int = 200, seed: int = 2024, spread: float = 0.3) -> float:
    """Worst relative error of single gradient entries against central differences.

    Each sample draws a random state and a random coordinate; the step scales
    with |xi| and the error is taken relative to max(|g_j|, 1e-3).
    """
    rng = np.random.default_rng(seed)
    h = 1e-6 * (1 + np.linalg.norm(xi))
    worst = 0.0
    for _ in range(samples):
        x = rng.uniform(-spread, spread, size=E.size)
        _, g = E(x)
        j = rng.integers(E.size)
        e = np.zeros(E.size)
        e[j] = h
        fd = (E.value(x + e) - E.value(x - e)) / (2 * h)
        worst = max(worst, abs(fd - g[j]) / max(abs(g[j]), 1e-3))
    return worst
