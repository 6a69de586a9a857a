"""Catalog of periodic integrands L(x, xi) with p-growth metadata.

All integrands are vectorized over quadrature points: ``x`` has shape
(n, xdim) and ``z`` has shape (n, m, N); ``value`` returns (n,) and ``deriv``
returns the xi-derivative with the shape of ``z``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cellhom.errors import MissingParameter, NonpositiveScale, UnknownCatalogId

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Integrand:
    """Base class. Subclasses implement :meth:`value` and :meth:`deriv`."""

    p: float
    m: int
    N: int
    alpha: float
    beta: float
    xdim: int
    periodic: bool = True
    catalog_id: str = ""
    params: dict = field(default_factory=dict, compare=False)

    @property
    def coercivity_warning(self) -> bool:
        return self.alpha == 0

    @property
    def x_independent(self) -> bool:
        return False

    def value(self, x, z) -> np.ndarray:
        raise NotImplementedError

    def deriv(self, x, z) -> np.ndarray:
        raise NotImplementedError

    def quadratic_coeff(self, x) -> np.ndarray | None:
        """c(x) if L(x, z) = c(x)|z|^2, otherwise None."""
        return None

    def __call__(self, x, z):
        return self.value(x, z)


def _sqnorm(z):
    return np.sum(z * z, axis=(-2, -1))


@dataclass(frozen=True)
class CoefficientPower(Integrand):
    """L(x, z) = a(x) |z|^p for a periodic scalar coefficient a."""

    def coeff(self, x) -> np.ndarray:
        raise NotImplementedError

    def value(self, x, z):
        z = np.asarray(z, float)
        return self.coeff(x) * _sqnorm(z) ** (self.p / 2)

    def deriv(self, x, z):
        z = np.asarray(z, float)
        r2 = _sqnorm(z)
        if self.p == 2:
            fac = 2.0 * self.coeff(x)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                fac = self.coeff(x) * self.p * np.where(r2 > 0, r2 ** (self.p / 2 - 1), 0.0)
        return fac[:, None, None] * z

    def quadratic_coeff(self, x):
        return self.coeff(x) if self.p == 2 else None


@dataclass(frozen=True)
class SineCoefficient(CoefficientPower):
    """a(y) = a0 + a1 sin(2 pi y_1)."""

    a0: float = 2.0
    a1: float = 1.0

    @property
    def x_independent(self) -> bool:
        return self.a1 == 0

    def coeff(self, x):
        x = np.asarray(x, float)
        return self.a0 + self.a1 * np.sin(TWO_PI * x[:, 0])


@dataclass(frozen=True)
class Laminate(CoefficientPower):
    """a(y) = a1 on {frac(y_1) < 1/2}, a2 otherwise."""

    a1: float = 1.0
    a2: float = 3.0

    @property
    def x_independent(self) -> bool:
        return self.a1 == self.a2

    def coeff(self, x):
        y = np.asarray(x, float)[:, 0]
        return np.where(y - np.floor(y) < 0.5, self.a1, self.a2)


@dataclass(frozen=True)
class Checkerboard(CoefficientPower):
    """a(y) = a1 on the even squares of the half-cell checkerboard, a2 on odd ones."""

    a1: float = 1.0
    a2: float = 3.0

    def coeff(self, x):
        x = np.asarray(x, float)
        parity = (np.floor(2 * x[:, 0]) + np.floor(2 * x[:, 1])) % 2
        return np.where(parity == 0, self.a1, self.a2)


@dataclass(frozen=True)
class DoubleWell(Integrand):
    """L(z) = (|z|^2 - 1)^2, independent of x."""

    @property
    def x_independent(self) -> bool:
        return True

    def value(self, x, z):
        return (_sqnorm(np.asarray(z, float)) - 1.0) ** 2

    def deriv(self, x, z):
        z = np.asarray(z, float)
        return (4.0 * (_sqnorm(z) - 1.0))[:, None, None] * z


@dataclass(frozen=True)
class GraphEdgeQuadratic(CoefficientPower):
    """Edge energy (a0 + a1 cos(2 pi x_1) cos(2 pi x_2)) |z|^2 on the tangential derivative."""

    a0: float = 1.0
    a1: float = 0.0

    @property
    def x_independent(self) -> bool:
        return self.a1 == 0

    def coeff(self, x):
        x = np.asarray(x, float)
        return self.a0 + self.a1 * np.cos(TWO_PI * x[:, 0]) * np.cos(TWO_PI * x[:, 1])


@dataclass(frozen=True)
class RescaledIntegrand(Integrand):
    """L_t(x, z) = L(t x, z)."""

    base: Integrand = None
    t: float = 1.0

    @property
    def x_independent(self) -> bool:
        return self.base.x_independent

    def value(self, x, z):
        return self.base.value(self._map(x), z)

    def deriv(self, x, z):
        return self.base.deriv(self._map(x), z)

    def quadratic_coeff(self, x):
        return self.base.quadratic_coeff(self._map(x))

    def _map(self, x):
        return x if self.t == 1 else self.t * np.asarray(x, float)


@dataclass(frozen=True)
class TranslatedIntegrand(Integrand):
    """x -> L(x + g, z) for a fixed shift g."""

    base: Integrand = None
    shift: tuple = ()

    @property
    def x_independent(self) -> bool:
        return self.base.x_independent

    def value(self, x, z):
        return self.base.value(np.asarray(x, float) + np.asarray(self.shift), z)

    def deriv(self, x, z):
        return self.base.deriv(np.asarray(x, float) + np.asarray(self.shift), z)

    def quadratic_coeff(self, x):
        return self.base.quadratic_coeff(np.asarray(x, float) + np.asarray(self.shift))


def _meta(base: Integrand, **extra) -> dict:
    return dict(
        p=base.p,
        m=base.m,
        N=base.N,
        alpha=base.alpha,
        beta=base.beta,
        xdim=base.xdim,
        periodic=base.periodic,
        catalog_id=base.catalog_id,
        params=base.params,
        **extra,
    )


def rescale_integrand(L: Integrand, t: float) -> Integrand:
    if not t > 0:
        raise NonpositiveScale(f"scale must be positive, got {t}")
    if isinstance(L, RescaledIntegrand):
        return rescale_integrand(L.base, L.t * t)
    return RescaledIntegrand(**_meta(L), base=L, t=float(t))


def translate_integrand(L: Integrand, shift) -> Integrand:
    return TranslatedIntegrand(**_meta(L), base=L, shift=tuple(float(v) for v in shift))


# -- catalog -----------------------------------------------------------------

CATALOG = {
    "p_dirichlet_coeff": ("a0", "a1"),
    "laminate_2d": ("a1", "a2"),
    "checkerboard_2d": ("a1", "a2"),
    "double_well_1d": ("p",),
    "graph_edge_quadratic": (),
}


def make_integrand(catalog_id: str, params: dict | None = None) -> Integrand:
    """Build a catalog integrand.

    ``p_dirichlet_coeff``: a(y) |xi|^p with a = a0 + a1 sin(2 pi y_1); params
    ``a0, a1, p`` and optional ``dim`` (default 1).
    ``laminate_2d``: two-phase layered coefficient in y_1; params ``a1, a2``,
    optional ``p`` (2) and ``dim`` (2; ``dim=1`` gives the half/half 1-D cell).
    ``checkerboard_2d``: params ``a1, a2``.
    ``double_well_1d``: (xi^2 - 1)^2; param ``p`` must be 4.
    ``graph_edge_quadratic``: tangential edge energy; optional ``a0`` (1), ``a1`` (0).
    """
    params = dict(params or {})
    if catalog_id not in CATALOG:
        raise UnknownCatalogId(catalog_id)
    missing = [k for k in CATALOG[catalog_id] if k not in params]
    if catalog_id == "p_dirichlet_coeff" and "p" not in params:
        missing.append("p")
    if missing:
        raise MissingParameter(f"{catalog_id} needs parameters {missing}")
    m = int(params.get("m", 1))

    if catalog_id == "p_dirichlet_coeff":
        a0, a1, p = float(params["a0"]), float(params["a1"]), float(params["p"])
        dim = int(params.get("dim", 1))
        lo, hi = a0 - abs(a1), a0 + abs(a1)
        if lo <= 0:
            raise ValueError("coefficient must stay positive: need a0 > |a1|")
        return SineCoefficient(
            p=p, m=m, N=dim, alpha=lo, beta=hi, xdim=dim,
            catalog_id=catalog_id, params=params, a0=a0, a1=a1,
        )
    if catalog_id == "laminate_2d":
        a1, a2 = float(params["a1"]), float(params["a2"])
        dim = int(params.get("dim", 2))
        return Laminate(
            p=float(params.get("p", 2)), m=m, N=dim, alpha=min(a1, a2), beta=max(a1, a2),
            xdim=dim, catalog_id=catalog_id, params=params, a1=a1, a2=a2,
        )
    if catalog_id == "checkerboard_2d":
        a1, a2 = float(params["a1"]), float(params["a2"])
        return Checkerboard(
            p=float(params.get("p", 2)), m=m, N=2, alpha=min(a1, a2), beta=max(a1, a2),
            xdim=2, catalog_id=catalog_id, params=params, a1=a1, a2=a2,
        )
    if catalog_id == "double_well_1d":
        if float(params["p"]) != 4:
            raise ValueError("double_well_1d has quartic growth: p must be 4")
        return DoubleWell(
            p=4.0, m=m, N=int(params.get("dim", 1)), alpha=0.0, beta=1.0,
            xdim=int(params.get("dim", 1)), catalog_id=catalog_id, params=params,
        )
    a0, a1 = float(params.get("a0", 1.0)), float(params.get("a1", 0.0))
    if a0 - abs(a1) <= 0:
        raise ValueError("edge coefficient must stay positive: need a0 > |a1|")
    return GraphEdgeQuadratic(
        p=2.0, m=m, N=1, alpha=a0 - abs(a1), beta=a0 + abs(a1), xdim=2,
        catalog_id=catalog_id, params=params, a0=a0, a1=a1,
    )


def integrand_from_config(desc) -> Integrand:
    if isinstance(desc, Integrand):
        return desc
    return make_integrand(desc["id"], desc.get("params", {}))


# -- growth check --------------------------------------------------------------


@dataclass
class GrowthReport:
    alpha_hat: float
    beta_hat: float
    alpha_ok: bool
    beta_ok: bool
    coercivity_warning: bool

    @property
    def passed(self) -> bool:
        return self.alpha_ok and self.beta_ok


def sample_points(L: Integrand, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Seeded (x, z) samples: x in [0, 1)^xdim, |z| log-uniform over [0.1, 10]."""
    x = rng.uniform(0.0, 1.0, size=(n, L.xdim))
    z = rng.standard_normal(size=(n, L.m, L.N))
    nz = np.sqrt(_sqnorm(z))[:, None, None]
    r = 10.0 ** rng.uniform(-1.0, 1.0, size=(n, 1, 1))
    return x, z / nz * r


def validate_growth(L: Integrand, sample_count: int, seed: int) -> GrowthReport:
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    x, z = sample_points(L, sample_count, rng)
    v = L.value(x, z)
    r = np.sqrt(_sqnorm(z))
    alpha_hat = float(np.min(v / r**L.p))
    beta_hat = float(np.max(v / (1.0 + r**L.p)))
    warn = L.alpha == 0
    alpha_ok = warn or alpha_hat >= L.alpha * (1 - 1e-12)
    beta_ok = beta_hat <= L.beta * (1 + 1e-12)
    return GrowthReport(alpha_hat, beta_hat, alpha_ok, beta_ok, warn)
