"""Run configuration: strict `[section] key = value` text files.

Unknown sections or keys are errors (no silent typo tolerance); repeated
keys are allowed only where a list is meaningful (cone points).  The
potential is given either as a closed-form expression in ``x1, x2`` (with
``cos``, ``sin``, ``exp`` and the periodic distance ``d(c1, c2)`` to a
fixed point) or as a field dump path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .singular import ConicalConfig, ConicalPoint, Potential, SurfaceTopology
from .surface import Field, Grid, Torus, load_field

__all__ = ["RunConfig", "parse_config", "parse_config_text", "make_potential_sampler"]

_KNOWN = {
    "torus": {"l1", "l2", "n1", "n2"},
    "potential": {"formula", "file", "band_tol"},
    "singular": {"point"},
    "topology": {"n", "m", "g"},
    "run": {
        "lambda",
        "lambda_from",
        "lambda_to",
        "steps",
        "k",
        "mu",
        "radii",
        "seed",
        "gamma",
        "initial",
        "barycenter",
        "alpha",
    },
    "solver": {
        "residual_tol",
        "max_newton",
        "krylov_tol",
        "max_flow_steps",
        "blowup_threshold",
        "coarse_first",
        "compute_index",
    },
    "verify": {"kmax", "nmax", "mmax", "gmax"},
}

_MULTI = {("singular", "point")}


@dataclass
class RunConfig:
    """Parsed and lightly validated configuration."""

    torus: Torus = field(default_factory=Torus)
    n1: int = 256
    n2: int = 256
    potential_formula: str | None = None
    potential_file: str | None = None
    band_tol: float = 0.0
    cone_rows: tuple[tuple[float, float, float], ...] = ()
    topology_override: SurfaceTopology | None = None
    run: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    source: str = "<memory>"

    def grid(self) -> Grid:
        return Grid(self.torus, self.n1, self.n2)

    def has_potential(self) -> bool:
        return self.potential_formula is not None or self.potential_file is not None

    def potential(self, grid: Grid | None = None) -> Potential:
        grid = grid or self.grid()
        if self.potential_formula is not None:
            sampler = make_potential_sampler(self.potential_formula, grid.torus)
            f = Field(grid, sampler(grid.x1, grid.x2))
            return Potential(field=f, band_tol=self.band_tol, sampler=sampler)
        if self.potential_file is not None:
            f = load_field(self.potential_file)
            if f.grid != grid:
                f = f.interpolate_to(grid)
            return Potential(field=f, band_tol=self.band_tol)
        raise ConfigError(f"{self.source}: no potential given")

    def cones(self, potential: Potential | None = None) -> ConicalConfig:
        """Cone points ordered positive-region-first, with the split index
        derived from the potential's sign at each point."""
        pts = [ConicalPoint(x1, x2, a) for (x1, x2, a) in self.cone_rows]
        if potential is None:
            return ConicalConfig(points=tuple(pts), ell=len(pts))
        pos, neg = [], []
        for p in pts:
            k = potential._sample_at(p.x1, p.x2)
            (pos if k > 0 else neg).append(p)
        return ConicalConfig(points=tuple(pos + neg), ell=len(pos))


def parse_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config_text(fh.read(), source=str(path))


def parse_config_text(text: str, source: str = "<memory>") -> RunConfig:
    sections: dict[str, list[tuple[int, str, str]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current not in _KNOWN:
                raise ConfigError(f"{source}:{lineno}: unknown section [{current}]")
            sections.setdefault(current, [])
            continue
        if current is None:
            raise ConfigError(f"{source}:{lineno}: entry before any [section]")
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if key not in _KNOWN[current]:
            raise ConfigError(
                f"{source}:{lineno}: unknown key {key!r} in section [{current}]"
            )
        if (current, key) not in _MULTI and any(
            k == key for (_, k, _) in sections[current]
        ):
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        sections[current].append((lineno, key, value))

    cfg = RunConfig(source=source)

    def fetch(section, key, default=None):
        for (_, k, v) in sections.get(section, []):
            if k == key:
                return v
        return default

    def as_float(section, key, value):
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{source}: [{section}] {key}: not a number: {value!r}")

    def as_int(section, key, value):
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{source}: [{section}] {key}: not an integer: {value!r}")

    L1 = as_float("torus", "l1", fetch("torus", "l1", "1.0"))
    L2 = as_float("torus", "l2", fetch("torus", "l2", "1.0"))
    cfg.torus = Torus(L1, L2)
    cfg.n1 = as_int("torus", "n1", fetch("torus", "n1", "256"))
    cfg.n2 = as_int("torus", "n2", fetch("torus", "n2", str(cfg.n1)))

    cfg.potential_formula = fetch("potential", "formula")
    cfg.potential_file = fetch("potential", "file")
    if cfg.potential_formula is not None and cfg.potential_file is not None:
        raise ConfigError(f"{source}: give either a formula or a file, not both")
    bt = fetch("potential", "band_tol")
    cfg.band_tol = as_float("potential", "band_tol", bt) if bt is not None else 0.0

    rows = []
    for (lineno, key, value) in sections.get("singular", []):
        parts = value.split()
        if len(parts) != 3:
            raise ConfigError(
                f"{source}:{lineno}: point needs 'x1 x2 alpha', got {value!r}"
            )
        rows.append(tuple(float(p) for p in parts))
    cfg.cone_rows = tuple(rows)

    if "topology" in sections:
        n = as_int("topology", "n", fetch("topology", "n", "0"))
        m = as_int("topology", "m", fetch("topology", "m", "0"))
        gtxt = fetch("topology", "g", "")
        g = tuple(int(x) for x in gtxt.split()) if gtxt.strip() else ()
        try:
            cfg.topology_override = SurfaceTopology(N=n, M=m, g=g)
        except ValueError as err:
            raise ConfigError(f"{source}: [topology]: {err}")

    cfg.run = {k: v for (_, k, v) in sections.get("run", [])}
    cfg.solver = {k: v for (_, k, v) in sections.get("solver", [])}
    cfg.verify = {k: v for (_, k, v) in sections.get("verify", [])}
    return cfg


def make_potential_sampler(formula: str, torus: Torus):
    """Compile a closed-form potential; the expression sees ``x1``, ``x2``,
    ``pi``, ``cos``, ``sin``, ``exp``, ``sqrt``, ``abs`` and the periodic
    distance helper ``d(c1, c2)``."""
    code = compile(formula, "<potential>", "eval")
    for name in code.co_names:
        if name not in {"x1", "x2", "pi", "cos", "sin", "exp", "sqrt", "abs", "d"}:
            raise ConfigError(f"potential formula uses unknown name {name!r}")

    def sampler(x1, x2):
        def dist(c1, c2):
            return torus.distance(x1 - c1, x2 - c2)

        env = {
            "x1": x1,
            "x2": x2,
            "pi": np.pi,
            "cos": np.cos,
            "sin": np.sin,
            "exp": np.exp,
            "sqrt": np.sqrt,
            "abs": np.abs,
            "d": dist,
        }
        out = eval(code, {"__builtins__": {}}, env)
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(x1)).copy()

    return sampler
