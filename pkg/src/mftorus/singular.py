"""Conical singularity data, the effective potential, critical coupling
values, and sign-region topology extracted from the potential.

A cone point of order ``alpha`` enters the flattened problem through the
weight ``exp(-h)`` with ``h(x) = 4 pi sum_j alpha_j G(x, p_j)``; the
effective potential ``K exp(-h)`` then vanishes like ``d(x, p_j)^(2 alpha_j)``
at positive-order points.  Sign regions of ``K`` are classified by periodic
flood fill plus cell-complex Euler characteristics and boundary-loop
tracing, yielding the bouquet sizes of each non-contractible component.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CoincidentPoints,
    HypothesisViolation,
    Overflow,
    ResolutionTooCoarse,
)
from .surface import Field, Grid, Torus

__all__ = [
    "ConicalPoint",
    "ConicalConfig",
    "Potential",
    "SurfaceTopology",
    "SignRegions",
    "singular_weight",
    "effective_potential_field",
    "critical_set",
    "j_lambda",
    "geometric_lambda",
    "classify_sign_regions",
]


@dataclass(frozen=True)
class ConicalPoint:
    """Cone point ``p`` with order ``alpha > -1``."""

    x1: float
    x2: float
    alpha: float

    def __post_init__(self):
        if not self.alpha > -1.0:
            raise ValueError(f"cone order must exceed -1, got {self.alpha}")

    @property
    def location(self):
        return np.array([self.x1, self.x2])


@dataclass(frozen=True)
class ConicalConfig:
    """Ordered cone points with the split index ``ell``: points ``1..ell``
    lie in the positive region, the rest in the negative one."""

    points: tuple[ConicalPoint, ...] = ()
    ell: int = 0

    def __post_init__(self):
        if not 0 <= self.ell <= len(self.points):
            raise ValueError("split index out of range")

    @property
    def positive_points(self) -> tuple[ConicalPoint, ...]:
        return self.points[: self.ell]

    @property
    def negative_points(self) -> tuple[ConicalPoint, ...]:
        return self.points[self.ell:]

    def validate_for_solver(self):
        """Solver restriction: orders of points in the positive region
        must be nonnegative."""
        for p in self.positive_points:
            if p.alpha < 0:
                raise HypothesisViolation(
                    "negative cone order inside the positive region is "
                    "outside the solver's scope"
                )


def singular_weight(config: ConicalConfig, torus: Torus, x1, x2):
    """``h(x) = 4 pi sum_j alpha_j G(x, p_j)``; diverges to +inf at
    positive-order cone points and to -inf at negative-order ones."""
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    out = np.zeros(np.broadcast(x1, x2).shape)
    G = torus.green
    for p in config.points:
        d = torus.distance(x1 - p.x1, x2 - p.x2)
        if np.any(d < 1e-12):
            raise CoincidentPoints("weight evaluated at a cone point")
        out = out + 4 * np.pi * p.alpha * G.at_displacement(x1 - p.x1, x2 - p.x2)
    return out if out.size > 1 else float(out[0])


def effective_potential_at(config: ConicalConfig, torus: Torus, K, x1, x2):
    """Pointwise effective potential ``K exp(-h)``, with the continuous
    extension (value 0) at positive-order cone points."""
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    h = np.zeros(np.broadcast(x1, x2).shape)
    at_pole = np.zeros(h.shape, dtype=bool)
    G = torus.green
    for p in config.points:
        d = torus.distance(x1 - p.x1, x2 - p.x2)
        hit = d < 1e-12
        if np.any(hit):
            if p.alpha < 0:
                raise Overflow("effective potential at a negative-order cone point")
            at_pole |= hit
        g = G.at_displacement(x1 - p.x1, x2 - p.x2)
        h = h + 4 * np.pi * p.alpha * np.where(hit, 0.0, g)
    kv = np.asarray(K(x1, x2), dtype=float) if callable(K) else np.asarray(K)
    out = np.where(at_pole, 0.0, kv * np.exp(-h))
    return out if out.size > 1 else float(out[0])


def effective_potential_field(config: ConicalConfig, K, grid: Grid) -> Field:
    """Effective potential sampled on a grid.  ``K`` is a callable sampler
    or a Field on the same grid."""
    if isinstance(K, Field):
        if K.grid != grid:
            raise ValueError("potential field lives on a different grid")
        kv = K.values
    else:
        kv = np.asarray(K(grid.x1, grid.x2), dtype=float)
    vals = effective_potential_at(
        config, grid.torus, kv.ravel(), grid.x1.ravel(), grid.x2.ravel()
    )
    return Field(grid, np.asarray(vals).reshape(grid.shape))


def critical_set(alphas, lam_max: float) -> np.ndarray:
    """All values ``8 pi r + sum_j 8 pi (1 + alpha_j) n_j`` with integer
    ``r >= 0`` and ``n_j`` in {0, 1}, excluding 0, deduplicated to 1e-9,
    at most ``lam_max``; sorted ascending."""
    if lam_max <= 0:
        raise ValueError("lam_max must be positive")
    alphas = [float(a) for a in alphas]
    if any(a <= -1 for a in alphas):
        raise ValueError("cone orders must exceed -1")
    vals = []
    for picks in itertools.product((0, 1), repeat=len(alphas)):
        base = sum(8 * np.pi * (1 + a) * n for a, n in zip(alphas, picks))
        r = 0
        while base + 8 * np.pi * r <= lam_max + 1e-12:
            v = base + 8 * np.pi * r
            if v > 1e-12:
                vals.append(v)
            r += 1
    vals.sort()
    out = []
    for v in vals:
        if not out or v - out[-1] > 1e-9:
            out.append(v)
    return np.array(out)


def j_lambda(config: ConicalConfig, lam: float) -> tuple[ConicalPoint, ...]:
    """Cone points in the positive region whose mass ``8 pi (1 + alpha)``
    strictly exceeds ``lam`` (bubbling there is energetically forbidden)."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    return tuple(p for p in config.positive_points if lam < 8 * np.pi * (1 + p.alpha))


def geometric_lambda(chi: int, alphas) -> float:
    """Coupling fixed by the total-curvature constraint:
    ``4 pi (chi + sum alpha_j)``."""
    return 4 * np.pi * (chi + float(np.sum(np.asarray(list(alphas), dtype=float))))


@dataclass(frozen=True)
class SurfaceTopology:
    """Homotopy data of the positive region: ``N`` non-contractible
    components with bouquet sizes ``g``, and ``M`` contractible ones."""

    N: int
    M: int
    g: tuple[int, ...] = ()

    def __post_init__(self):
        if self.N < 0 or self.M < 0 or self.N + self.M < 1:
            raise ValueError("need N, M >= 0 with at least one component")
        if len(self.g) != self.N:
            raise ValueError("need one bouquet size per non-contractible component")
        if any(gi < 1 for gi in self.g):
            raise ValueError("bouquet sizes must be >= 1")

    @property
    def n_plus(self) -> int:
        return self.N + self.M

    @property
    def total_g(self) -> int:
        return sum(self.g)


@dataclass
class Potential:
    """Sign-changing potential with its nodal-band tolerance.  ``sampler``
    is an optional closed form used to evaluate off-grid."""

    field: Field
    band_tol: float = 0.0  # 0 means the default 1e-3 * max|K|
    sampler: object = None

    def __post_init__(self):
        if self.band_tol <= 0:
            self.band_tol = 1e-3 * float(np.max(np.abs(self.field.values)))

    def band_mask(self) -> np.ndarray:
        return np.abs(self.field.values) <= self.band_tol

    def validate(self, config: ConicalConfig | None = None) -> float:
        """Check the structural hypotheses; returns the gradient floor
        ``beta = min |grad K|`` over the nodal band.

        The nodal line must be nondegenerate (``beta`` at least
        1e-3 * max|grad K|, finite differences) and no cone point may lie
        inside the band.
        """
        K = self.field.values
        if not (np.any(K > self.band_tol) and np.any(K < -self.band_tol)):
            raise HypothesisViolation("potential does not change sign")
        g = self.field.grid
        h1, h2 = g.spacing
        d1 = (np.roll(K, -1, axis=0) - np.roll(K, 1, axis=0)) / (2 * h1)
        d2 = (np.roll(K, -1, axis=1) - np.roll(K, 1, axis=1)) / (2 * h2)
        gradnorm = np.hypot(d1, d2)
        band = self.band_mask()
        if not np.any(band):
            beta = float("inf")
        else:
            beta = float(gradnorm[band].min())
            if beta < 1e-3 * float(gradnorm.max()):
                raise HypothesisViolation(
                    f"nodal line is degenerate: min |grad K| on the band is "
                    f"{beta:.3e} < 1e-3 * max |grad K|"
                )
        if config is not None:
            for j, p in enumerate(config.points):
                kx = self._sample_at(p.x1, p.x2)
                if abs(kx) <= self.band_tol:
                    raise HypothesisViolation(
                        f"cone point {j} lies on the nodal band"
                    )
                in_pos = kx > 0
                should_pos = j < config.ell
                if in_pos != should_pos:
                    raise HypothesisViolation(
                        f"cone point {j} is on the wrong side of the nodal "
                        f"line for split index {config.ell}"
                    )
        return beta

    def _sample_at(self, x1, x2):
        if self.sampler is not None:
            return float(self.sampler(np.atleast_1d(x1), np.atleast_1d(x2))[0])
        g = self.field.grid
        i = int(round(x1 / g.torus.L1 * g.n1)) % g.n1
        j = int(round(x2 / g.torus.L2 * g.n2)) % g.n2
        return float(self.field.values[i, j])


@dataclass
class SignRegions:
    """Classification result: per-node component labels (0 outside the
    positive region) and per-component topology."""

    topology: SurfaceTopology
    labels: np.ndarray
    components: list = field(default_factory=list)  # (chi, boundaries, genus, g, contractible)


def classify_sign_regions(potential: Potential, min_width: int = 4) -> SignRegions:
    """Connected components of ``{K > 0}`` by periodic flood fill; per
    component the Euler characteristic from cell counts, boundary loops
    traced along the pixel boundary, and the bouquet size
    ``g = 2 genus + boundaries - 1``.

    Raises ResolutionTooCoarse when a component or gap is thinner than
    ``min_width`` cells or the pixel boundary has a corner tangency.
    """
    K = potential.field.values
    pos = K > 0
    neg = ~pos
    _check_corner_tangency(pos)
    labels, ncomp = _periodic_label(pos)
    if ncomp == 0:
        raise HypothesisViolation("positive region is empty")
    if not np.any(neg):
        raise HypothesisViolation("negative region is empty")
    # thinness guards: every component and every gap must contain a node
    # at Chebyshev depth >= min_width // 2 from its complement
    neg_labels, nneg = _periodic_label(neg)
    for c in range(1, nneg + 1):
        _check_thickness(neg_labels == c, min_width, "gap")

    comps = []
    gs = []
    N = M = 0
    for c in range(1, ncomp + 1):
        mask = labels == c
        _check_thickness(mask, min_width, "component")
        chi = _euler_characteristic(mask)
        b = _boundary_loops(mask)
        if b == 0:
            raise HypothesisViolation("a component covers the whole torus")
        if (2 - chi - b) % 2:
            raise ResolutionTooCoarse(
                f"component {c}: inconsistent cell topology (chi={chi}, b={b})"
            )
        genus = (2 - chi - b) // 2
        if genus < 0:
            raise ResolutionTooCoarse(
                f"component {c}: negative genus from pixel counts"
            )
        g = 2 * genus + b - 1
        contractible = genus == 0 and b == 1
        comps.append((chi, b, genus, g, contractible))
        if contractible:
            M += 1
        else:
            N += 1
            gs.append(g)
    topo = SurfaceTopology(N=N, M=M, g=tuple(sorted(gs)))
    return SignRegions(topology=topo, labels=labels, components=comps)


def _periodic_label(mask: np.ndarray):
    """4-connected component labels with periodic wrap: plain labeling,
    then union-find across the two seams."""
    from scipy.ndimage import label as nd_label

    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    lab, n = nd_label(mask, structure=structure)
    if n == 0:
        return lab, 0
    parent = np.arange(n + 1)

    def find(a):
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    for a_row, b_row in ((lab[-1, :], lab[0, :]), (lab[:, -1], lab[:, 0])):
        touching = (a_row > 0) & (b_row > 0)
        for a, b in zip(a_row[touching], b_row[touching]):
            ra, rb = find(int(a)), find(int(b))
            if ra != rb:
                parent[rb] = ra

    remap = np.zeros(n + 1, dtype=int)
    nxt = 0
    for c in range(1, n + 1):
        r = find(c)
        if remap[r] == 0:
            nxt += 1
            remap[r] = nxt
        remap[c] = remap[r]
    return remap[lab], nxt


def _euler_characteristic(mask: np.ndarray) -> int:
    """V - E + F of the closed pixel complex of ``mask`` on the torus."""
    m = mask
    up = np.roll(m, 1, axis=0)
    left = np.roll(m, 1, axis=1)
    upleft = np.roll(up, 1, axis=1)
    F = int(m.sum())
    E = int((m | up).sum()) + int((m | left).sum())
    V = int((m | up | left | upleft).sum())
    return V - E + F


def _boundary_loops(mask: np.ndarray) -> int:
    """Number of boundary curves of the pixel region.

    Builds the graph of boundary edges (edges with exactly one adjacent
    pixel inside); every corner must have degree 0 or 2, a degree-4 corner
    is a checkerboard tangency and is rejected.
    """
    n1, n2 = mask.shape
    m = mask
    # vertical edges between pixel (i-1,j) and (i,j): corner (i,j)-(i,j+1)
    vb = m ^ np.roll(m, 1, axis=0)
    # horizontal edges between pixel (i,j-1) and (i,j): corner (i,j)-(i+1,j)
    hb = m ^ np.roll(m, 1, axis=1)

    # corner (i, j) touches vertical edges (i, j), (i, j-1) and horizontal
    # edges (i, j), (i-1, j)
    deg = np.zeros((n1, n2), dtype=int)
    deg += vb
    deg += np.roll(vb, 1, axis=1)
    deg += hb
    deg += np.roll(hb, 1, axis=0)
    if np.any(deg == 4):
        raise ResolutionTooCoarse(
            "pixel boundary passes twice through a corner (tangency); "
            "refine the grid or adjust the potential"
        )
    if np.any(deg % 2):
        raise ResolutionTooCoarse("open boundary curve in pixel complex")

    # count cycles: union-find on corners over boundary edges
    parent = np.arange(n1 * n2)

    def find(a):
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    edges = 0
    for bmask, axis in ((vb, 1), (hb, 0)):
        ii, jj = np.nonzero(bmask)
        if axis == 1:
            i2, j2 = ii, (jj + 1) % n2
        else:
            i2, j2 = (ii + 1) % n1, jj
        edges += ii.size
        for a, b in zip(ii * n2 + jj, i2 * n2 + j2):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[rb] = ra

    corners = np.flatnonzero(deg > 0)
    return len({find(int(c)) for c in corners})


def _check_corner_tangency(mask: np.ndarray) -> None:
    """Reject sign partitions where two like-signed pixels meet only
    diagonally across a corner: the region topology at such a tangency is
    ambiguous at this resolution."""
    a = mask
    b = np.roll(mask, 1, axis=0)
    c = np.roll(mask, 1, axis=1)
    d = np.roll(np.roll(mask, 1, axis=0), 1, axis=1)
    checker = (a & d & ~b & ~c) | (b & c & ~a & ~d)
    if np.any(checker):
        raise ResolutionTooCoarse(
            "sign regions touch diagonally across a pixel corner (tangency); "
            "refine the grid or adjust the potential"
        )


def _check_thickness(mask: np.ndarray, min_width: int, what: str) -> None:
    """Reject regions with no interior node at Chebyshev depth
    ``min_width // 2 - 1`` (hairline components and gaps); corner
    tangencies are caught separately by the boundary tracer."""
    depth = max(1, min_width // 2 - 1)
    core = mask.copy()
    for _ in range(depth):
        nxt = core.copy()
        for ax in (0, 1):
            for sh in (1, -1):
                nxt &= np.roll(core, sh, axis=ax)
        # 8-neighborhood erosion: include diagonals
        nxt &= np.roll(np.roll(core, 1, axis=0), 1, axis=1)
        nxt &= np.roll(np.roll(core, 1, axis=0), -1, axis=1)
        nxt &= np.roll(np.roll(core, -1, axis=0), 1, axis=1)
        nxt &= np.roll(np.roll(core, -1, axis=0), -1, axis=1)
        core = nxt
    if not np.any(core):
        raise ResolutionTooCoarse(
            f"a {what} of the sign partition is thinner than {min_width} cells"
        )
