"""Exact reduced Betti numbers (Z/2 coefficients) of barycenter spaces over
disjoint unions of circle bouquets and points, the closed-form dimension
counts, and the multiplicity lower bounds built from them.

Two independent routes are provided and must agree entrywise:

* ``bar_betti_oracle`` peels one component at a time with the disjoint-union
  splitting of barycenter spaces (wedge / suspension / join arithmetic on
  Betti vectors) down to single-component base cases;
* ``d_q_closed`` evaluates the closed two-branch formula directly.

All arithmetic is exact (Python integers never wrap).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .errors import LambdaCritical
from .singular import SurfaceTopology

__all__ = [
    "BettiVector",
    "wedge",
    "suspension",
    "smash_join",
    "s",
    "bar_betti_base",
    "bar_betti_oracle",
    "d_q_closed",
    "betti_closed",
    "multiplicity_general",
    "multiplicity_8pi16pi",
    "existence_gate",
]


class BettiVector:
    """Finitely supported map degree -> nonnegative integer (reduced Betti
    numbers by degree)."""

    __slots__ = ("_d",)

    def __init__(self, entries: dict[int, int] | None = None):
        d = {}
        for q, v in (entries or {}).items():
            if q < 0:
                raise ValueError("degrees are nonnegative")
            if v < 0:
                raise ValueError("Betti numbers are nonnegative")
            if v:
                d[int(q)] = int(v)
        self._d = d

    def __getitem__(self, q: int) -> int:
        return self._d.get(q, 0)

    def degrees(self):
        return sorted(self._d)

    def items(self):
        return sorted(self._d.items())

    @property
    def total(self) -> int:
        return sum(self._d.values())

    def __eq__(self, other):
        return isinstance(other, BettiVector) and self._d == other._d

    def __hash__(self):
        return hash(tuple(sorted(self._d.items())))

    def __repr__(self):
        inner = ", ".join(f"{q}: {v}" for q, v in self.items())
        return f"BettiVector({{{inner}}})"

    def __bool__(self):
        return bool(self._d)


ZERO = BettiVector()


def wedge(a: BettiVector, b: BettiVector) -> BettiVector:
    """One-point union: degreewise sum."""
    out = dict(a._d)
    for q, v in b._d.items():
        out[q] = out.get(q, 0) + v
    return BettiVector(out)


def suspension(a: BettiVector) -> BettiVector:
    """Unreduced suspension: shift every degree up by one."""
    return BettiVector({q + 1: v for q, v in a._d.items()})


def smash_join(a: BettiVector, b: BettiVector) -> BettiVector:
    """Join of spaces / smash of suspensions: shifted convolution
    ``c_q = sum_{i+j=q-1} a_i b_j`` (tensor dimension over a field)."""
    out: dict[int, int] = {}
    for i, va in a._d.items():
        for j, vb in b._d.items():
            q = i + j + 1
            out[q] = out.get(q, 0) + va * vb
    return BettiVector(out)


def s(a: int, g: int) -> int:
    """``binom(a + g - 1, g - 1)`` with the convention that a binomial with
    larger lower index vanishes; exact integer."""
    if a < 0 or g < 1:
        raise ValueError("need a >= 0 and g >= 1")
    if a + g - 1 < g - 1:
        return 0
    return comb(a + g - 1, g - 1)


def bar_betti_base(atom, k: int) -> BettiVector:
    """Base cases for a single atom: a point contributes nothing; a bouquet
    of ``g`` circles contributes ``s(k, g)`` in degree ``2k - 1``; ``M``
    disjoint points give the skeleton count ``binom(M-1, k)`` in degree
    ``k - 1``."""
    if k < 1:
        raise ValueError("barycenter order must be >= 1")
    kind, size = atom
    if kind == "point":
        return ZERO
    if kind == "bouquet":
        return BettiVector({2 * k - 1: s(k, size)})
    if kind == "points":
        m = size
        if m < 1:
            raise ValueError("need at least one point")
        return BettiVector({k - 1: comb(m - 1, k)}) if m - 1 >= k else ZERO
    raise ValueError(f"unknown atom {atom!r}")


@lru_cache(maxsize=None)
def _oracle(gs: tuple[int, ...], m: int, k: int) -> BettiVector:
    """Reduced Betti vector of the order-k barycenter space over a disjoint
    union of bouquets ``gs`` and ``m`` points; memoized on the canonical
    key (sorted bouquet multiset, point count, order)."""
    atoms = [("bouquet", g) for g in gs] + [("point", 1)] * m
    if not atoms:
        raise ValueError("need at least one component")
    if k == 1:
        # order-1 barycenters are the space itself
        return BettiVector({0: len(atoms) - 1, 1: sum(gs)})
    if len(atoms) == 1:
        return bar_betti_base(atoms[0], k)
    # peel the last component D (points first, then bouquets)
    if m > 0:
        rest_gs, rest_m, d_atom = gs, m - 1, ("point", 1)
    else:
        rest_gs, rest_m, d_atom = gs[:-1], 0, ("bouquet", gs[-1])

    def rest(order: int) -> BettiVector:
        if rest_gs or rest_m:
            return _oracle(rest_gs, rest_m, order)
        raise AssertionError("rest is empty")

    def dpart(order: int) -> BettiVector:
        return bar_betti_base(d_atom, order)

    out = wedge(rest(k), suspension(rest(k - 1)))
    out = wedge(out, dpart(k))
    if k - 1 >= 1:
        out = wedge(out, suspension(dpart(k - 1)))
    for l in range(1, k):
        out = wedge(out, smash_join(rest(k - l), dpart(l)))
    for l in range(2, k):
        out = wedge(out, smash_join(suspension(rest(k - l)), dpart(l - 1)))
    return out


def bar_betti_oracle(topology: SurfaceTopology, k: int) -> BettiVector:
    """Recursive route: split the disjoint union one component at a time."""
    if k < 1:
        raise ValueError("barycenter order must be >= 1")
    return _oracle(tuple(sorted(topology.g)), topology.M, k)


def _s_product_sum(gs: tuple[int, ...], h: int) -> int:
    """``sum over a_1+...+a_N = h of prod s(a_i, g_i)``; equals 1 at h = 0
    (and 0 otherwise) when there are no bouquets."""
    if h < 0:
        return 0
    n = len(gs)
    if n == 0:
        return 1 if h == 0 else 0
    total = 0
    for cut in itertools.combinations(range(h + n - 1), n - 1):
        parts = []
        prev = -1
        for c in cut:
            parts.append(c - prev - 1)
            prev = c
        parts.append(h + n - 2 - prev)
        prod = 1
        for a, g in zip(parts, gs):
            prod *= s(a, g)
        total += prod
    return total


def _closed_first_branch(k: int, N: int, M: int, gs: tuple[int, ...], q: int) -> int:
    # applies when k + 1 - M <= N: band q = 2k - p, 1 <= p <= k + 1
    p = 2 * k - q
    if 1 <= p <= k + 1:
        if N + M - p < 0:
            return 0
        return comb(N + M - 1, N + M - p) * _s_product_sum(gs, k - p + 1)
    return 0


def _closed_second_branch(k: int, N: int, M: int, gs: tuple[int, ...], q: int) -> int:
    # applies when k + 1 - M >= N: bouquet band plus point band.  The
    # point-band coefficient is binom(N+M-1, M-s): this is the unique choice
    # under which the point-absorption recursion closes and the two branches
    # coincide on their common domain (both are required invariants).
    p = 2 * k - q
    if 1 <= p <= N:
        return comb(N + M - 1, N + M - p) * _s_product_sum(gs, k - p + 1)
    sdx = 2 * k - N - q
    if 1 <= sdx <= M:
        return comb(N + M - 1, M - sdx) * _s_product_sum(gs, k - N - sdx + 1)
    return 0


def d_q_closed(k: int, topology: SurfaceTopology, q: int) -> int:
    """Closed-form dimension of the degree-q reduced homology of the
    order-k barycenter space; exact integer."""
    if k < 1:
        raise ValueError("barycenter order must be >= 1")
    if q < 0:
        return 0
    N, M, gs = topology.N, topology.M, tuple(topology.g)
    if k + 1 - M <= N:
        return _closed_first_branch(k, N, M, gs, q)
    return _closed_second_branch(k, N, M, gs, q)


def betti_closed(k: int, topology: SurfaceTopology) -> BettiVector:
    """Closed-formula route packaged as a Betti vector (degrees up to
    ``2k - 1`` can be nonzero)."""
    return BettiVector({q: d_q_closed(k, topology, q) for q in range(2 * k)})


def multiplicity_general(k: int, topology: SurfaceTopology) -> int:
    """Lower bound for the number of critical points in the band
    ``(8 k pi, 8 (k+1) pi)``: total of the closed-form dimensions."""
    return sum(d_q_closed(k, topology, q) for q in range(2 * k))


def multiplicity_8pi16pi(topology: SurfaceTopology, j_count: int) -> int:
    """Lower bound in the band ``(8 pi, 16 pi)`` driven by mass-forbidden
    cone points: ``(N + M - 1) + sum g_i + |J|``."""
    if j_count < 0:
        raise ValueError("j_count must be nonnegative")
    return (topology.N + topology.M - 1) + topology.total_g + j_count


@dataclass(frozen=True)
class GateVerdict:
    general: bool
    eight_sixteen: bool


def existence_gate(
    lam: float,
    k: int,
    topology: SurfaceTopology,
    j_points,
    critical_values,
) -> GateVerdict:
    """Hypothesis gates of the two existence regimes.

    ``general`` needs ``lam`` inside the k-th band, off the critical set,
    and either more components than ``k`` or a non-contractible component.
    ``eight_sixteen`` needs ``lam`` in (8 pi, 16 pi) off the critical set,
    all positive-region orders in (0, 1], and a mass-forbidden cone point.
    """
    crit = np.asarray(critical_values, dtype=float)
    if crit.size and float(np.min(np.abs(crit - lam))) <= 1e-9:
        raise LambdaCritical(f"lam = {lam!r} lies on the critical mass set")
    in_band = 8 * np.pi * k < lam < 8 * np.pi * (k + 1)
    general = in_band and (topology.n_plus > k or topology.N >= 1)
    j_points = tuple(j_points)
    orders_ok = all(0 < p.alpha <= 1 for p in j_points) if j_points else True
    eight_sixteen = (
        8 * np.pi < lam < 16 * np.pi and orders_ok and len(j_points) >= 1
    )
    return GateVerdict(general=general, eight_sixteen=eight_sixteen)
