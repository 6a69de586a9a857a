"""Closed-form and quadrature references for homogenized integrands.

These are independent of the finite-element machinery: one-dimensional
effective coefficients come from adaptive quadrature of 1/a, laminates from
the harmonic/arithmetic mean rule, and the scalar double well from its convex
envelope.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

ORACLES = ("harmonic_mean", "laminate", "convex_envelope", "constant", "square_lattice")


def harmonic_mean(a, lo: float = 0.0, hi: float = 1.0, breakpoints=None) -> float:
    """(avg 1/a)^-1 over [lo, hi] by adaptive quadrature."""
    val, _ = quad(lambda y: 1.0 / a(y), lo, hi, epsabs=1e-14, epsrel=1e-13, points=breakpoints, limit=200)
    return (hi - lo) / val


def arithmetic_mean(a, lo: float = 0.0, hi: float = 1.0, breakpoints=None) -> float:
    val, _ = quad(a, lo, hi, epsabs=1e-14, epsrel=1e-13, points=breakpoints, limit=200)
    return val / (hi - lo)


def sine_coefficient(a0: float, a1: float):
    return lambda y: a0 + a1 * math.sin(2 * math.pi * y)


def two_phase(a1: float, a2: float):
    return lambda y: a1 if (y - math.floor(y)) < 0.5 else a2


def laminate_lhom(a1: float, a2: float, xi) -> float:
    """Quadratic laminate layered in y_1: harmonic mean across, arithmetic along."""
    xi = np.asarray(xi, float).ravel()
    ah = harmonic_mean(two_phase(a1, a2), breakpoints=[0.5])
    aa = arithmetic_mean(two_phase(a1, a2), breakpoints=[0.5])
    return float(ah * xi[0] ** 2 + aa * float(np.sum(xi[1:] ** 2)))


def double_well_envelope(xi: float) -> float:
    """Convex envelope of (xi^2 - 1)^2: zero on [-1, 1]."""
    return 0.0 if abs(xi) <= 1.0 else (xi * xi - 1.0) ** 2


def sawtooth(xi: float, n: int, periods: int = 1) -> np.ndarray:
    """Nodal perturbation on a uniform grid of [0, 1] whose slopes make xi + w' = +-1.

    For |xi| < 1 each period spends a fraction (1 + xi) / 2 at slope +1; the
    fraction is rounded to the grid, so the energy is zero when it is exact.
    """
    if abs(xi) > 1:
        raise ValueError("sawtooth competitors need |xi| <= 1")
    if n % periods:
        raise ValueError("n must be a multiple of periods")
    per = n // periods
    up = int(round(per * (1.0 + xi) / 2.0))
    slope = np.where(np.arange(per) < up, 1.0, -1.0)
    slope = np.tile(slope, periods)
    u = np.concatenate([[0.0], np.cumsum(slope) / n])
    w = u - xi * np.linspace(0.0, 1.0, n + 1)
    w[-1] = 0.0 if abs(w[-1]) < 1e-12 else w[-1]
    return w


def reference_lhom(oracle: str, integrand, xi) -> float:
    """Reference L_hom(xi) for a catalog integrand under the named oracle."""
    prm = integrand.params
    xi = np.asarray(xi, float).ravel()
    if oracle == "harmonic_mean":
        if integrand.catalog_id == "p_dirichlet_coeff":
            a = sine_coefficient(float(prm["a0"]), float(prm["a1"]))
            brk = None
        elif integrand.catalog_id == "laminate_2d":
            a = two_phase(float(prm["a1"]), float(prm["a2"]))
            brk = [0.5]
        else:
            raise ValueError(f"harmonic_mean oracle does not cover {integrand.catalog_id}")
        if integrand.N != 1 or integrand.p != 2:
            raise ValueError("harmonic_mean oracle is one-dimensional and quadratic")
        return harmonic_mean(a, breakpoints=brk) * float(xi[0] ** 2)
    if oracle == "laminate":
        return laminate_lhom(float(prm["a1"]), float(prm["a2"]), xi)
    if oracle == "convex_envelope":
        return double_well_envelope(float(xi[0]))
    if oracle == "constant":
        # x-independent convex integrand: the corrector is zero
        if not integrand.x_independent:
            raise ValueError("constant oracle needs an x-independent integrand")
        z = xi.reshape(1, integrand.m, integrand.N)
        return float(integrand.value(np.zeros((1, integrand.xdim)), z)[0])
    if oracle == "square_lattice":
        a0, a1 = float(prm.get("a0", 1.0)), float(prm.get("a1", 0.0))
        # each edge direction carries half the mass and sees one component of xi
        ah = harmonic_mean(lambda y: a0 - a1 * math.cos(2 * math.pi * y))
        return ah * float(np.sum(xi**2)) / 2.0
    raise ValueError(f"unknown oracle {oracle!r}; expected one of {ORACLES}")
