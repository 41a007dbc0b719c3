"""Critical-point computation: energy minimization in the coercive regime,
damped inexact Newton with Levenberg fallback for saddles, coupling
continuation with blow-up classification, Morse indices, and the
compactness diagnostics recorded along branches.

Saddles are located by root-finding on the residual of the Euler-Lagrange
equation rather than by a min-max construction; concentration profiles from
the energy module serve as initializers.  The additive-constant gauge is
removed by projecting every iterate to zero mean.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg, eigsh, minres

from .energy import (
    EnergyContext,
    EnergyValue,
    concentration_measure,
    energy,
    gradient,
    hessian_apply,
    mass_in_ball,
    weighted_mass,
)
from .errors import (
    DomainExit,
    DomainViolation,
    MaskTouchesNodalBand,
    MaxIterations,
    NearDegenerate,
    NoBlowUp,
    Stagnation,
)
from .singular import critical_set
from .surface import Field, Grid, inner, integrate, solve_poisson

__all__ = [
    "SolverOptions",
    "KatoStats",
    "ConcentrationReport",
    "SolutionRecord",
    "BranchRecord",
    "minimize",
    "newton_solve",
    "continue_branch",
    "morse_index",
    "kato_diagnostics",
    "subdomain_integral",
    "quantization_check",
    "find_multiple",
    "branch_csv_rows",
]


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and budgets.

    ``residual_tol`` is in the grid max norm.  Note the attainable floor:
    spectral residual evaluation carries rounding of order
    ``macheps * max|k|^2 * max|u|``, about 1e-9 at n = 256 for unit-size
    solutions and four times that at n = 512; sweeps into the blow-up
    regime should relax the tolerance accordingly.
    """

    residual_tol: float = 1e-9
    max_newton: int = 50
    krylov_tol: float = 1e-4
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_flow_steps: int = 50_000
    blowup_threshold: float = 25.0
    compute_index: bool = True
    coarse_first: bool = False
    coarse_resolution: int = 64
    lm_max_steps: int = 400
    flow_switch_tol: float = 1e-4

    def __post_init__(self):
        if min(self.residual_tol, self.krylov_tol, self.armijo_c) <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")


@dataclass(frozen=True)
class KatoStats:
    """Statistics of the centered negative part
    ``v = min(u, 0) - mean(min(u, 0))``."""

    min_v: float
    l1: float
    l3: float


@dataclass(frozen=True)
class ConcentrationReport:
    peak: tuple[float, float]
    mass_small_ball: float  # at radius 0.05 * min period
    nearest_critical: float
    relative_gap: float


@dataclass(frozen=True)
class SolutionRecord:
    lam: float
    field: Field
    residual: float
    energy: EnergyValue
    morse_index: int | None
    kato: KatoStats
    concentration: ConcentrationReport
    iterations: int = 0
    energy_history: tuple[float, ...] = ()
    residual_history: tuple[float, ...] = ()

    @property
    def max_u(self) -> float:
        return float(self.field.values.max())

    @property
    def min_u(self) -> float:
        return float(self.field.values.min())


@dataclass
class BranchRecord:
    records: list[SolutionRecord] = field(default_factory=list)
    termination: str = "converged"  # converged | blow-up | domain-exit
    detail: str = ""

    @property
    def lams(self):
        return [r.lam for r in self.records]


def _zero_mean(u: Field) -> Field:
    return Field(u.grid, u.values - u.values.mean())


def _max_norm(f: Field) -> float:
    return float(np.max(np.abs(f.values)))


def kato_diagnostics(u: Field) -> KatoStats:
    """Bounds on the negative part that stay tame while the positive part
    blows up."""
    neg = np.minimum(u.values, 0.0)
    v = neg - neg.mean()
    w = u.grid.weight
    return KatoStats(
        min_v=float(v.min()),
        l1=w * float(np.abs(v).sum()),
        l3=(w * float((np.abs(v) ** 3).sum())) ** (1.0 / 3.0),
    )


def _nearest_critical(ctx: EnergyContext, value: float) -> tuple[float, float]:
    alphas = [p.alpha for p in ctx.cones.positive_points]
    lam_max = max(abs(value), ctx.lam) * 1.5 + 16 * np.pi
    crit = critical_set(alphas, lam_max)
    j = int(np.argmin(np.abs(crit - value)))
    nearest = float(crit[j])
    return nearest, abs(value - nearest) / nearest


def _concentration(ctx: EnergyContext, u: Field) -> ConcentrationReport:
    i, j = np.unravel_index(int(np.argmax(u.values)), u.values.shape)
    peak = (float(ctx.grid.x1[i, j]), float(ctx.grid.x2[i, j]))
    r = 0.05 * min(ctx.grid.torus.L1, ctx.grid.torus.L2)
    mass = mass_in_ball(ctx, u, peak, r)
    # normalized total mass is lam by construction; report where it sits
    shift = np.log(ctx.lam / weighted_mass(ctx, u)) if _in_domain(ctx, u) else 0.0
    w = Field(ctx.grid, u.values + shift)
    dens_mass = _ball_mass_unnormalized(ctx, w, peak, 3 * r)
    nearest, gap = _nearest_critical(ctx, dens_mass)
    return ConcentrationReport(
        peak=peak, mass_small_ball=mass, nearest_critical=nearest, relative_gap=gap
    )


def _in_domain(ctx: EnergyContext, u: Field) -> bool:
    return weighted_mass(ctx, u) > 0


def _ball_mass_unnormalized(ctx: EnergyContext, w: Field, center, r: float) -> float:
    d = ctx.grid.torus.distance(
        ctx.grid.x1 - center[0], ctx.grid.x2 - center[1]
    )
    vals = ctx.weight.values * np.exp(w.values)
    return ctx.grid.weight * float(vals[d <= r].sum())


def _make_record(ctx, u, res, its, opts, energy_history=(), residual_history=()):
    idx = morse_index(ctx, u) if opts.compute_index else None
    return SolutionRecord(
        lam=ctx.lam,
        field=u,
        residual=res,
        energy=energy(ctx, u),
        morse_index=idx,
        kato=kato_diagnostics(u),
        concentration=_concentration(ctx, u),
        iterations=its,
        energy_history=tuple(energy_history),
        residual_history=tuple(residual_history),
    )


# ---------------------------------------------------------------------------
# minimization (coercive regime)

def minimize(ctx: EnergyContext, opts: SolverOptions, u0: Field) -> SolutionRecord:
    """Armijo-backtracked gradient descent preconditioned by the inverse
    Laplacian, followed by an energy-guarded Newton polish.  Energy never
    increases across accepted steps; terminates when the residual max norm
    reaches the tolerance."""
    u = _zero_mean(u0)
    I = energy(ctx, u).total  # DomainViolation here means u0 is inadmissible
    history = [I]
    t = 1.0
    for _ in range(opts.max_flow_steps):
        g = gradient(ctx, u)
        if _max_norm(g) <= max(opts.flow_switch_tol, opts.residual_tol):
            break
        d = solve_poisson(g)
        slope = inner(g, d)
        t = min(2 * t, 1.0)
        accepted = False
        while t > 1e-15:
            trial = Field(ctx.grid, u.values - t * d.values)
            trial = _zero_mean(trial)
            try:
                It = energy(ctx, trial).total
            except DomainViolation:
                t *= opts.backtrack
                continue
            if It <= I - opts.armijo_c * t * slope:
                u, I = trial, It
                history.append(I)
                accepted = True
                break
            t *= opts.backtrack
        if not accepted:
            if not _in_domain(ctx, u):
                raise DomainExit("descent cannot be backtracked into the domain")
            break  # no descent progress possible; hand over to the polish
    else:
        raise MaxIterations("descent budget exhausted before the switch tolerance")

    u, res, its, rhist = _damped_newton(
        ctx, opts, u, guard_energy=True, energy_now=I, history=history
    )
    if res > opts.residual_tol:
        raise MaxIterations(
            f"polish stalled at residual {res:.3e} > {opts.residual_tol:.1e}"
        )
    return _make_record(ctx, u, res, its, opts, history, rhist)


# ---------------------------------------------------------------------------
# Newton machinery

def _krylov_ops(ctx: EnergyContext, u: Field):
    g = ctx.grid
    n2 = g.n1 * g.n2

    def hess_mv(v):
        vv = v.reshape(g.shape)
        f = Field(g, vv - vv.mean())
        return hessian_apply(ctx, u, f).values.ravel()

    def prec_mv(v):
        vv = v.reshape(g.shape)
        f = Field(g, vv - vv.mean())
        return solve_poisson(f).values.ravel()

    A = LinearOperator((n2, n2), matvec=hess_mv)
    M = LinearOperator((n2, n2), matvec=prec_mv)
    return A, M


def _newton_direction(ctx, u, F, eta, maxiter=400):
    A, M = _krylov_ops(ctx, u)
    d, _ = minres(A, -F.values.ravel(), rtol=eta, M=M, maxiter=maxiter)
    d = d.reshape(ctx.grid.shape)
    return Field(ctx.grid, d - d.mean())


def _damped_newton(ctx, opts, u, guard_energy=False, energy_now=None, history=None):
    """Damped inexact Newton on the residual; with ``guard_energy`` every
    accepted step must also not increase the energy (used by the polish
    phase of ``minimize``)."""
    history = history if history is not None else []
    F = gradient(ctx, u)
    res = _max_norm(F)
    rl2 = np.sqrt(inner(F, F))
    rhist = [res]
    eta = min(1e-2, opts.krylov_tol * 100)
    window: list[float] = []
    for it in range(opts.max_newton):
        if res <= opts.residual_tol:
            return u, res, it, rhist
        window.append(res)
        if len(window) > 5:
            window.pop(0)
            if window[-1] > 0.99 * window[0]:
                raise Stagnation(
                    f"residual reduction below 1% over 5 steps (at {res:.3e})"
                )
        accepted = False
        trial_eta = eta
        while not accepted and trial_eta >= 1e-8:
            d = _newton_direction(ctx, u, F, trial_eta)
            t = 1.0
            while t > 1e-12:
                trial = _zero_mean(Field(ctx.grid, u.values + t * d.values))
                try:
                    Ft = gradient(ctx, trial)
                except DomainViolation:
                    t *= opts.backtrack
                    continue
                rl2t = np.sqrt(inner(Ft, Ft))
                ok = rl2t <= (1 - opts.armijo_c * t) * rl2
                if ok and guard_energy:
                    It = energy(ctx, trial).total
                    ok = It <= energy_now + 1e-12 * max(1.0, abs(energy_now))
                    if ok:
                        energy_now = It
                        history.append(It)
                if ok:
                    # forcing term follows the achieved contraction
                    ratio = rl2t / max(rl2, 1e-300)
                    eta = min(1e-2, max(opts.krylov_tol, 0.9 * ratio**2))
                    u, F, rl2 = trial, Ft, rl2t
                    res = _max_norm(F)
                    rhist.append(res)
                    accepted = True
                    break
                t *= opts.backtrack
            if not accepted:
                trial_eta *= 0.1
        if not accepted:
            raise Stagnation(f"no descent step found at residual {res:.3e}")
    if res <= opts.residual_tol:
        return u, res, opts.max_newton, rhist
    raise MaxIterations(f"newton budget exhausted at residual {res:.3e}")


def _levenberg(ctx, opts, u, tol):
    """Levenberg iteration on half the squared residual norm; descends
    monotonically, tolerant of indefinite second variations far from a
    root.  Uses the same second-variation operator inside CG."""
    g = ctx.grid
    n2 = g.n1 * g.n2
    u = _zero_mean(u)
    F = gradient(ctx, u)
    phi = 0.5 * inner(F, F)
    nu = 1e-2
    rhist = [_max_norm(F)]
    for it in range(opts.lm_max_steps):
        if _max_norm(F) <= tol:
            return u, it, rhist, "ok"
        HF = hessian_apply(ctx, u, F)

        def mv(v, _nu=nu):
            vv = v.reshape(g.shape)
            f = Field(g, vv - vv.mean())
            return (
                hessian_apply(ctx, u, hessian_apply(ctx, u, f)).values + _nu * f.values
            ).ravel()

        def pc(v):
            vv = v.reshape(g.shape)
            f = Field(g, vv - vv.mean())
            return solve_poisson(solve_poisson(f)).values.ravel()

        A = LinearOperator((n2, n2), matvec=mv)
        M = LinearOperator((n2, n2), matvec=pc)
        # tighten the inner solves near convergence (Gauss-Newton endgame)
        rtol = float(np.clip(np.sqrt(rhist[-1]), 1e-4, 1e-2))
        d, _ = cg(A, -HF.values.ravel(), rtol=rtol, M=M, maxiter=80)
        d = d.reshape(g.shape)
        trial = _zero_mean(Field(g, u.values + (d - d.mean())))
        try:
            Ft = gradient(ctx, trial)
            phit = 0.5 * inner(Ft, Ft)
        except DomainViolation:
            phit = np.inf
        if phit < phi:
            u, F, phi = trial, Ft, phit
            rhist.append(_max_norm(F))
            nu = max(nu / 3, 1e-10)
        else:
            nu = min(nu * 5, 1e8)
            if nu >= 1e8:
                return u, it, rhist, "stuck"
    return u, opts.lm_max_steps, rhist, "budget"


def _restrict(u: Field, n: int) -> Field:
    """Spectral restriction onto a coarser grid of the same torus."""
    g = u.grid
    n2_coarse = max(2, 2 * int(round(n * g.n2 / (2 * g.n1))))
    coarse = Grid(g.torus, n, n2_coarse)
    c = u.coefficients
    h1, h2 = coarse.n1 // 2, coarse.n2 // 2
    sub = np.zeros(coarse.shape, dtype=complex)
    sub[:h1, :h2] = c[:h1, :h2]
    sub[:h1, -h2:] = c[:h1, -h2:]
    sub[-h1:, :h2] = c[-h1:, :h2]
    sub[-h1:, -h2:] = c[-h1:, -h2:]
    scale = (coarse.n1 * coarse.n2) / (g.n1 * g.n2)
    return Field(coarse, np.real(np.fft.ifft2(sub)) * scale)


def newton_solve(ctx: EnergyContext, opts: SolverOptions, u0: Field) -> SolutionRecord:
    """Inexact Newton on the zero-mean residual map, Krylov inner solves
    with the second variation, damped by a residual-norm line search.

    When the damped iteration stagnates the solver falls back to a
    Levenberg pass on the squared residual (same operator), then re-enters
    the damped iteration for the quadratic endgame.  ``coarse_first``
    additionally warm-starts from a coarse-grid solve, which widens the
    basin around saddle points considerably.
    """
    u = _zero_mean(u0)
    gradient(ctx, u)  # raises DomainViolation if the start is inadmissible

    if opts.coarse_first and ctx.grid.n1 > opts.coarse_resolution:
        coarse_u = _restrict(u, opts.coarse_resolution)
        coarse_ctx = EnergyContext(
            coarse_u.grid,
            ctx.lam,
            _restrict(ctx.weight, opts.coarse_resolution),
            ctx.cones,
        )
        try:
            cu, _, _, status = _levenberg(
                coarse_ctx, opts, coarse_u, tol=max(opts.residual_tol, 1e-8)
            )
            if status in ("ok", "budget"):
                u = _zero_mean(cu.interpolate_to(ctx.grid))
        except DomainViolation:
            pass  # keep the fine-grid start

    total_hist: list[float] = []
    its = 0
    try:
        u2, res, nits, rhist = _damped_newton(ctx, opts, u)
        return _make_record(ctx, u2, res, nits, opts, residual_history=rhist)
    except (Stagnation, MaxIterations) as first_err:
        # recover the best iterate implicitly: restart Levenberg from u
        u_lm, lm_its, lm_hist, status = _levenberg(ctx, opts, u, opts.residual_tol)
        total_hist.extend(lm_hist)
        its += lm_its
        res = _max_norm(gradient(ctx, u_lm))
        if res <= opts.residual_tol:
            return _make_record(ctx, u_lm, res, its, opts, residual_history=total_hist)
        try:
            u3, res3, nits3, rhist3 = _damped_newton(ctx, opts, u_lm)
            total_hist.extend(rhist3)
            return _make_record(
                ctx, u3, res3, its + nits3, opts, residual_history=total_hist
            )
        except (Stagnation, MaxIterations):
            raise Stagnation(
                f"stalled at residual {res:.3e} (first pass: {first_err})"
            ) from first_err


# ---------------------------------------------------------------------------
# Morse index

def _index_operator(ctx: EnergyContext, u: Field):
    """Congruent transform of the second variation with the same inertia:
    P^(1/2) H P^(1/2) with P the inverse Laplacian on zero-mean fields.
    The additive-constant gauge mode is shifted to +1."""
    g = ctx.grid
    n2 = g.n1 * g.n2
    inv_k = np.zeros_like(g.k_sq)
    nz = g.k_sq > 0
    inv_k[nz] = 1.0 / np.sqrt(g.k_sq[nz])

    def mv(v):
        vv = v.reshape(g.shape)
        mean = vv.mean()
        w = np.real(np.fft.ifft2(np.fft.fft2(vv) * inv_k))
        hv = hessian_apply(ctx, u, Field(g, w)).values
        out = np.real(np.fft.ifft2(np.fft.fft2(hv) * inv_k))
        return (out + mean).ravel()

    return LinearOperator((n2, n2), matvec=mv)


def morse_index(ctx: EnergyContext, u: Field) -> int:
    """Count of negative eigenvalues of the zero-mean-restricted second
    variation.  Inertia is preserved under the congruent inverse-Laplacian
    scaling, whose clustered spectrum the Lanczos iteration resolves
    quickly.  Warns NearDegenerate when an eigenvalue sits within
    1e-8 * (norm estimate) of zero."""
    B = _index_operator(ctx, u)
    top = float(
        eigsh(B, k=1, which="LA", return_eigenvectors=False, tol=1e-6)[0]
    )
    thresh = 1e-8 * max(1.0, abs(top))
    k = 8
    while True:
        k = min(k, B.shape[0] - 2)
        vals = np.sort(
            eigsh(B, k=k, which="SA", return_eigenvectors=False, tol=1e-9)
        )
        if vals[-1] >= -thresh or k >= min(64, B.shape[0] - 2):
            break
        k *= 2
    if np.any((np.abs(vals) < thresh) & (np.abs(vals - 1.0) > 0.5)):
        warnings.warn(
            "second variation is numerically near-degenerate; Morse index "
            "may be unreliable",
            NearDegenerate,
            stacklevel=2,
        )
    return int(np.sum(vals < -thresh))


# ---------------------------------------------------------------------------
# branch continuation and diagnostics

def continue_branch(
    ctx_template: EnergyContext,
    seed: SolutionRecord,
    lam_to: float,
    steps: int,
    opts: SolverOptions,
) -> BranchRecord:
    """March the coupling from the seed's value to ``lam_to``, warm-starting
    each solve from the previous solution.  Stops early, with the reason
    recorded, when the iterate blows up (max u beyond the threshold, or the
    solver stalls while mass concentrates) or leaves the domain."""
    if steps < 1:
        raise ValueError("need at least one step")
    lams = np.linspace(seed.lam, lam_to, steps + 1)[1:]
    branch = BranchRecord(records=[seed])
    u = seed.field
    for lam in lams:
        ctx = ctx_template.at(float(lam))
        try:
            rec = newton_solve(ctx, opts, u)
        except (Stagnation, MaxIterations) as err:
            conc = _concentration(ctx, u)
            if conc.mass_small_ball > 0.5:
                branch.termination = "blow-up"
                branch.detail = f"solver stalled with concentrating mass: {err}"
            else:
                branch.termination = "stagnation"
                branch.detail = str(err)
            return branch
        except (DomainViolation, DomainExit) as err:
            branch.termination = "domain-exit"
            branch.detail = str(err)
            return branch
        branch.records.append(rec)
        u = rec.field
        if rec.max_u > opts.blowup_threshold:
            branch.termination = "blow-up"
            branch.detail = (
                f"max u = {rec.max_u:.2f} exceeded threshold "
                f"{opts.blowup_threshold:g}"
            )
            return branch
    branch.termination = "converged"
    return branch


def subdomain_integral(ctx: EnergyContext, u: Field, mask, band_mask) -> float:
    """``int_mask K~ e^u`` for a mask at least two cells away from the
    nodal band."""
    mask = np.asarray(mask, dtype=bool)
    band = np.asarray(band_mask, dtype=bool)
    if mask.shape != ctx.grid.shape or band.shape != ctx.grid.shape:
        raise ValueError("masks must match the grid shape")
    grown = band.copy()
    for _ in range(2):
        out = grown.copy()
        for ax in (0, 1):
            for sh in (1, -1):
                out |= np.roll(grown, sh, axis=ax)
        out |= np.roll(np.roll(grown, 1, axis=0), 1, axis=1)
        out |= np.roll(np.roll(grown, 1, axis=0), -1, axis=1)
        out |= np.roll(np.roll(grown, -1, axis=0), 1, axis=1)
        out |= np.roll(np.roll(grown, -1, axis=0), -1, axis=1)
        grown = out
    if np.any(mask & grown):
        raise MaskTouchesNodalBand(
            "subdomain mask comes within two cells of the nodal band"
        )
    vals = ctx.weight.values[mask] * np.exp(u.values[mask])
    return ctx.grid.weight * float(vals.sum())


@dataclass(frozen=True)
class QuantizationReport:
    lam: float
    shift: float
    peak: tuple[float, float]
    masses: tuple[tuple[float, float], ...]  # (radius, mass)
    nearest_critical: float
    relative_gap: float


def quantization_check(
    ctx_template: EnergyContext, branch: BranchRecord, radii
) -> QuantizationReport:
    """For the last record of a blown-up branch: shift the solution so its
    total weighted mass equals the coupling, then report the mass captured
    in balls around the maximum point and the nearest critical value."""
    if branch.termination != "blow-up":
        raise NoBlowUp(f"branch terminated with reason {branch.termination!r}")
    rec = branch.records[-1]
    ctx = ctx_template.at(rec.lam)
    s = weighted_mass(ctx, rec.field)
    if s <= 0:
        raise DomainViolation("cannot normalize: weighted mass non-positive")
    c = float(np.log(rec.lam / s))
    w = Field(ctx.grid, rec.field.values + c)
    i, j = np.unravel_index(int(np.argmax(w.values)), w.values.shape)
    peak = (float(ctx.grid.x1[i, j]), float(ctx.grid.x2[i, j]))
    masses = tuple(
        (float(r), _ball_mass_unnormalized(ctx, w, peak, float(r))) for r in radii
    )
    main = masses[-1][1] if masses else rec.lam
    nearest, gap = _nearest_critical(ctx, main)
    return QuantizationReport(
        lam=rec.lam,
        shift=c,
        peak=peak,
        masses=masses,
        nearest_critical=nearest,
        relative_gap=gap,
    )


# ---------------------------------------------------------------------------
# deflation

def find_multiple(
    ctx: EnergyContext,
    opts: SolverOptions,
    starts,
    max_solutions: int = 8,
    distinct_tol: float = 1e-4,
) -> list[SolutionRecord]:
    """Collect distinct critical points from several initializers using a
    multiplicative shifted-norm deflation of already-found solutions.  The
    count reported is what was found, with no completeness claim."""
    found: list[SolutionRecord] = []

    def deflation_scale(u: Field, d: Field) -> float:
        # step scaling from the rank-one structure of the deflated Jacobian
        sigma = 0.0
        for rec in found:
            diff = Field(u.grid, u.values - rec.field.values)
            n2 = inner(diff, diff)
            if n2 < 1e-30:
                return 0.0
            m_i = 1.0 / n2 + 1.0
            grad_log_m = -2.0 / (n2**2) / m_i
            sigma += grad_log_m * inner(diff, d)
        denom = 1.0 + sigma
        if denom <= 0.05:
            return 10.0
        return min(1.0 / denom, 10.0)

    for start in starts:
        if len(found) >= max_solutions:
            break
        u = _zero_mean(start)
        try:
            F = gradient(ctx, u)
        except DomainViolation:
            continue
        converged = False
        for _ in range(opts.max_newton):
            res = _max_norm(F)
            if res <= opts.residual_tol:
                converged = True
                break
            try:
                d = _newton_direction(ctx, u, F, 1e-4)
            except Exception:
                break
            tau = deflation_scale(u, d)
            if tau == 0.0:
                break
            t = tau
            stepped = False
            for _ in range(40):
                trial = _zero_mean(Field(ctx.grid, u.values + t * d.values))
                try:
                    Ft = gradient(ctx, trial)
                except DomainViolation:
                    t *= opts.backtrack
                    continue
                if np.sqrt(inner(Ft, Ft)) <= np.sqrt(inner(F, F)) * (1 + 1e-8) or t < 1e-8:
                    u, F = trial, Ft
                    stepped = True
                    break
                t *= opts.backtrack
            if not stepped:
                break
        if converged and all(
            _max_norm(Field(u.grid, u.values - r.field.values)) > distinct_tol
            for r in found
        ):
            found.append(_make_record(ctx, u, _max_norm(F), 0, opts))
    return found


# ---------------------------------------------------------------------------
# branch CSV

BRANCH_CSV_HEADER = (
    "lambda,energy,residual,max_u,min_u,morse_index,"
    "kato_min_v,kato_l3,nearest_critical,mass_ball"
)


def _fmt(x) -> str:
    return repr(float(x))


def branch_csv_rows(branch: BranchRecord) -> list[str]:
    rows = [BRANCH_CSV_HEADER]
    for r in branch.records:
        idx = "" if r.morse_index is None else str(r.morse_index)
        rows.append(
            ",".join(
                [
                    _fmt(r.lam),
                    _fmt(r.energy.total),
                    _fmt(r.residual),
                    _fmt(r.max_u),
                    _fmt(r.min_u),
                    idx,
                    _fmt(r.kato.min_v),
                    _fmt(r.kato.l3),
                    _fmt(r.concentration.nearest_critical),
                    _fmt(r.concentration.mass_small_ball),
                ]
            )
        )
    return rows
