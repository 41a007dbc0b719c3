"""The coupling-parametrized energy, its first and second variations,
concentration test functions (bubbles), and concentration measures.

The functional is

    I(u) = 1/2 int |grad u|^2 + (lam/area) int u - lam log int K~ e^u

on the set where the weighted mass ``int K~ e^u`` is positive.  All
exponential integrals are computed in max-subtracted form so that fields
with large amplitude never overflow.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadOrder,
    DomainViolation,
    ResolutionWarning,
    SingularOverlap,
)
from .singular import ConicalConfig
from .surface import Field, Grid, dirichlet_energy, integrate, laplacian

__all__ = [
    "EnergyContext",
    "EnergyValue",
    "Barycenter",
    "energy",
    "gradient",
    "hessian_apply",
    "cutoff_chi",
    "bubble",
    "bubble_singular",
    "concentration_measure",
    "mass_in_ball",
    "weighted_mass",
]


@dataclass(frozen=True)
class EnergyContext:
    """Everything the functional needs: the coupling ``lam``, the effective
    potential on its grid, and (optionally) the cone configuration used by
    bubble preconditions."""

    grid: Grid
    lam: float
    weight: Field  # effective potential K~
    cones: ConicalConfig = ConicalConfig()

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("coupling must be positive")
        if self.weight.grid != self.grid:
            raise ValueError("weight field lives on a different grid")
        if not self.weight.is_finite():
            raise ValueError("weight field must be finite")

    def at(self, lam: float) -> "EnergyContext":
        """Same data at a different coupling."""
        return EnergyContext(self.grid, lam, self.weight, self.cones)

    @property
    def area(self) -> float:
        return self.grid.torus.area


@dataclass(frozen=True)
class EnergyValue:
    dirichlet: float
    linear: float
    log_term: float

    @property
    def total(self) -> float:
        return self.dirichlet + self.linear + self.log_term


def _log_weighted_mass(ctx: EnergyContext, u: np.ndarray):
    """(log s, shifted exponential e^{u - max u}) with s = int K~ e^u;
    raises DomainViolation when s <= 0."""
    m = float(u.max())
    em = np.exp(u - m)
    s_shift = ctx.grid.weight * float((ctx.weight.values * em).sum())
    if not np.isfinite(s_shift) or s_shift <= 0.0:
        raise DomainViolation(
            "weighted exponential mass is non-positive (state left the domain)"
        )
    return m + np.log(s_shift), em, s_shift


def weighted_mass(ctx: EnergyContext, u: Field) -> float:
    """``int K~ e^u`` (may be of either sign; no domain guard)."""
    m = float(u.values.max())
    em = np.exp(u.values - m)
    return float(np.exp(m) * ctx.grid.weight * (ctx.weight.values * em).sum())


def energy(ctx: EnergyContext, u: Field) -> EnergyValue:
    """All three terms of the functional; Dirichlet term is spectral."""
    logs, _, _ = _log_weighted_mass(ctx, u.values)
    return EnergyValue(
        dirichlet=dirichlet_energy(u),
        linear=ctx.lam / ctx.area * integrate(u),
        log_term=-ctx.lam * logs,
    )


def gradient(ctx: EnergyContext, u: Field) -> Field:
    """L2 representative of the first variation, projected to zero mean:
    ``-lap u - lam (K~ e^u / s - 1/area)``.  Vanishes exactly at critical
    points."""
    _, em, s_shift = _log_weighted_mass(ctx, u.values)
    g = (
        laplacian(u).values * (-1.0)
        - ctx.lam * (ctx.weight.values * em / s_shift - 1.0 / ctx.area)
    )
    return Field(ctx.grid, g - g.mean())


def hessian_apply(ctx: EnergyContext, u: Field, v: Field) -> Field:
    """Second variation applied to ``v``, projected to zero mean."""
    _, em, s_shift = _log_weighted_mass(ctx, u.values)
    e = ctx.weight.values * em  # K~ e^u up to the constant e^{max u}
    t = ctx.grid.weight * float((e * v.values).sum())
    h = (
        laplacian(v).values * (-1.0)
        - ctx.lam * (e * v.values / s_shift - e * t / s_shift**2)
    )
    return Field(ctx.grid, h - h.mean())


def cutoff_chi(gamma: float, t):
    """Monotone C^1 cutoff: identity on [0, gamma], constant ``2 gamma``
    from ``2 gamma`` on, cubic Hermite in between (slope 1 then 0).

    The derivative stays in [0, 4/3]; no C^1 interpolant with these endpoint
    values and slopes can keep it below 1.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("cutoff argument must be nonnegative")
    s = np.clip((t - gamma) / gamma, 0.0, 1.0)
    hermite = (
        gamma * (2 * s**3 - 3 * s**2 + 1)
        + gamma * (s**3 - 2 * s**2 + s)
        + 2 * gamma * (-2 * s**3 + 3 * s**2)
    )
    out = np.where(t <= gamma, t, np.where(t >= 2 * gamma, 2 * gamma, hermite))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Barycenter:
    """Finitely supported unit measure: weights ``t_i`` in [0, 1] summing
    to one on pairwise distinct points."""

    weights: tuple[float, ...]
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.weights) != len(self.points) or not self.weights:
            raise ValueError("need matching, nonempty weights and points")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")
        for a in range(len(self.points)):
            for b in range(a + 1, len(self.points)):
                if (
                    abs(self.points[a][0] - self.points[b][0]) < 1e-12
                    and abs(self.points[a][1] - self.points[b][1]) < 1e-12
                ):
                    raise ValueError("support points must be pairwise distinct")

    @staticmethod
    def single(x1: float, x2: float) -> "Barycenter":
        return Barycenter((1.0,), ((x1, x2),))


def default_gamma(grid: Grid) -> float:
    return min(grid.torus.L1, grid.torus.L2) / 16.0


def _resolution_check(grid: Grid, mu: float, gamma: float):
    n = min(grid.n1, grid.n2)
    if mu > n / (2 * np.pi * gamma):
        warnings.warn(
            f"bubble core (mu={mu:g}) is sharper than the grid resolves; "
            "quadratures of it are under-resolved",
            ResolutionWarning,
            stacklevel=3,
        )


def bubble(ctx: EnergyContext, sigma: Barycenter, mu: float, gamma: float | None = None) -> Field:
    """Mean-normalized concentration profile

        log sum_i t_i (mu / (1 + (mu chi_gamma(d(x, x_i)))^2))^2

    peaked at the supported points with the prescribed weights.  Support
    must stay at least ``4 gamma`` away from positive-region cone points.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if gamma is None:
        gamma = default_gamma(ctx.grid)
    torus = ctx.grid.torus
    for (x1, x2) in sigma.points:
        for p in ctx.cones.positive_points:
            if torus.distance(x1 - p.x1, x2 - p.x2) < 4 * gamma:
                raise SingularOverlap(
                    "bubble support within 4 gamma of a positive-region cone point"
                )
    _resolution_check(ctx.grid, mu, gamma)
    acc = np.zeros(ctx.grid.shape)
    for w, (x1, x2) in zip(sigma.weights, sigma.points):
        d = torus.distance(ctx.grid.x1 - x1, ctx.grid.x2 - x2)
        c = cutoff_chi(gamma, d)
        acc += w * (mu / (1 + (mu * c) ** 2)) ** 2
    phi = np.log(acc)
    return Field(ctx.grid, phi - phi.mean())


def bubble_raw_value(sigma: Barycenter, mu: float, gamma: float, torus, x1, x2) -> float:
    """Un-normalized profile value at one point (test hook)."""
    acc = 0.0
    for w, (p1, p2) in zip(sigma.weights, sigma.points):
        d = float(torus.distance(x1 - p1, x2 - p2))
        c = float(cutoff_chi(gamma, d))
        acc += w * (mu / (1 + (mu * c) ** 2)) ** 2
    return float(np.log(acc))


def admissible_order_interval(ctx: EnergyContext) -> tuple[float, float]:
    """Open interval of admissible concentration orders for the singular
    profile: lower end is the largest positive-region cone order whose point
    is not mass-forbidden at this coupling (0 if none), upper end is
    ``lam/(8 pi) - 1``."""
    lam = ctx.lam
    free = [
        p.alpha
        for p in ctx.cones.positive_points
        if not lam < 8 * np.pi * (1 + p.alpha)
    ]
    lower = max(free) if free else 0.0
    return lower, lam / (8 * np.pi) - 1.0


def singular_profile(grid: Grid, point, alpha: float, mu: float, gamma: float) -> Field:
    """Raw anisotropic concentration profile (no admissibility guard):
    ``2 log( mu^(1+alpha) / (1 + (mu chi_gamma(d))^(2(1+alpha))) )``,
    mean-normalized."""
    x1, x2 = float(point[0]), float(point[1])
    d = grid.torus.distance(grid.x1 - x1, grid.x2 - x2)
    c = cutoff_chi(gamma, d)
    a1 = 1.0 + alpha
    phi = 2 * (a1 * np.log(mu) - np.log1p((mu * c) ** (2 * a1)))
    return Field(grid, phi - phi.mean())


def bubble_singular(
    ctx: EnergyContext, point, alpha: float, mu: float, gamma: float | None = None
) -> Field:
    """Mean-normalized profile concentrating at prescribed order ``alpha``;
    the order must lie strictly inside the admissible interval."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    if gamma is None:
        gamma = default_gamma(ctx.grid)
    lo, hi = admissible_order_interval(ctx)
    if not (lo < alpha < hi):
        raise BadOrder(
            f"order {alpha} outside the admissible interval ({lo}, {hi})"
        )
    _resolution_check(ctx.grid, mu, gamma)
    return singular_profile(ctx.grid, point, alpha, mu, gamma)


def concentration_measure(ctx: EnergyContext, u: Field) -> Field:
    """Normalized positive-part density ``K~+ e^u / int K~+ e^u``."""
    kp = np.maximum(ctx.weight.values, 0.0)
    m = float(u.values.max())
    em = np.exp(u.values - m)
    tot = ctx.grid.weight * float((kp * em).sum())
    if tot <= 0.0:
        raise DomainViolation("positive part of the weight carries no mass")
    return Field(ctx.grid, kp * em / tot)


def mass_in_ball(ctx: EnergyContext, u: Field, center, r: float) -> float:
    """Concentration-measure mass of the periodic ball around ``center``."""
    dens = concentration_measure(ctx, u)
    d = ctx.grid.torus.distance(
        ctx.grid.x1 - float(center[0]), ctx.grid.x2 - float(center[1])
    )
    return ctx.grid.weight * float(dens.values[d <= r].sum())
