"""Norms and measured inequality constants.

Ball L^p norms are quasi-Monte Carlo estimates over scrambled Sobol points
(8 independent scrambles give a standard error).  On top of those sit the
decoupling-ratio checker (L^p norm of a slab sum against the l2 aggregate of
the slab norms), the empirical restriction-constant scan with a growth
exponent fit, the Strichartz admissibility predicate, and the exact
translation-averaging identity tying the continuum wave extension of a torus
density to its lattice counterpart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import DomainError, PreconditionError
from .extension import (
    DEFAULT_PLAN,
    Density,
    QuadraturePlan,
    _panel_nodes,
    extend_curve_batch,
    extend_surface_batch,
)
from .finitetype import (
    CurveSpec,
    Region,
    Slab,
    SurfaceSpec,
    decompose_interval,
    decompose_mixed_square,
    decompose_square,
    monomial_phase,
    slab_cover,
)
from .lattice import LatticeField, TorusGrid, forward_dft

__all__ = [
    "BallNormPlan",
    "ConstantEstimate",
    "AdmissiblePair",
    "DecouplingResult",
    "TranslationCheckResult",
    "ball_lp_norm",
    "ball_samples",
    "mixed_norm",
    "fourier_lebesgue_norm",
    "is_admissible",
    "dnls_exponent_region",
    "l2_aggregate",
    "decoupling_check",
    "decoupling_scan_case",
    "decoupling_draw_scan",
    "restriction_scan",
    "random_slab_densities",
    "decoupling_geometry",
    "measure_decoupling_over_balls",
    "parallel_combine_check",
    "restriction_families",
    "estimate_restriction_constant",
    "fit_growth_exponent",
    "translation_average_check",
]

N_SCRAMBLES = 8


def l2_aggregate(values) -> float:
    """sqrt of the sum of squares, reduced pairwise via hypot.

    Exact on a single value; overflow-safe and deterministic regardless of
    the execution environment's thread count.
    """
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        return 0.0
    return float(np.hypot.reduce(np.abs(arr)))


@dataclass(frozen=True)
class BallNormPlan:
    """Sampling plan for the L^p norm over a centered ball."""

    p: float
    radius: float
    samples: int = 1 << 12
    seed: int = 0
    dim: int = 3
    center: tuple = None

    def __post_init__(self):
        if self.samples < (1 << 10):
            raise DomainError("ball norm plans need at least 2^10 samples")
        if self.samples & (self.samples - 1):
            raise DomainError("sample count must be a power of two (Sobol)")
        if self.dim not in (2, 3):
            raise DomainError("ball dimension must be 2 or 3")


def _ball_volume(dim: int, radius: float) -> float:
    return math.pi * radius**2 if dim == 2 else 4.0 / 3.0 * math.pi * radius**3


def ball_samples(dim: int, radius: float, n: int, seed, center=None) -> np.ndarray:
    """Low-discrepancy points filling a ball, via radial inverse transform."""
    u = qmc.Sobol(d=dim, scramble=True, seed=seed).random_base2(int(math.log2(n)))
    if dim == 2:
        r = radius * np.sqrt(u[:, 0])
        th = 2.0 * np.pi * u[:, 1]
        pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    else:
        z = 1.0 - 2.0 * u[:, 0]
        th = 2.0 * np.pi * u[:, 1]
        rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        r = radius * u[:, 2] ** (1.0 / 3.0)
        pts = np.column_stack([r * rho * np.cos(th), r * rho * np.sin(th), r * z])
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return pts


def _scramble_seeds(seed: int) -> list:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(N_SCRAMBLES)]


def ball_lp_norm(field: Callable, plan: BallNormPlan) -> tuple[float, float]:
    """QMC estimate of the L^p(ball) norm of a point evaluator.

    ``field`` maps an (n, dim) point array to complex values.  Returns
    (value, standard error) where the value averages 8 independent
    scrambles; p = inf takes the max over all samples (a lower bound of the
    true sup).
    """
    vol = _ball_volume(plan.dim, plan.radius)
    per_scramble = []
    for rng in _scramble_seeds(plan.seed):
        pts = ball_samples(plan.dim, plan.radius, plan.samples, rng, plan.center)
        vals = np.abs(np.asarray(field(pts)))
        if plan.p == math.inf:
            per_scramble.append(float(vals.max(initial=0.0)))
        else:
            per_scramble.append(float((vol * np.mean(vals**plan.p)) ** (1.0 / plan.p)))
    value = float(np.mean(per_scramble))
    stderr = float(np.std(per_scramble, ddof=1) / math.sqrt(N_SCRAMBLES))
    return value, stderr


def mixed_norm(path, q: float, r: float, interval: tuple) -> float:
    """L^q-in-time of the l^r spatial norms along a solution path.

    ``path`` needs ``times`` (increasing array) and ``fields`` (LatticeField
    per node); time integration is composite trapezoid on the stored grid,
    with linear interpolation of the l^r norm at non-node endpoints.
    """
    times = np.asarray(path.times, dtype=float)
    t0, t1 = interval
    if t0 < times[0] - 1e-12 or t1 > times[-1] + 1e-12:
        raise DomainError(f"interval {interval} outside the stored grid")
    if t1 < t0:
        raise DomainError("empty time interval")
    norms = np.array([f.lp_norm(r) for f in path.fields])
    if q == math.inf:
        inside = (times >= t0 - 1e-12) & (times <= t1 + 1e-12)
        return float(np.max(norms[inside], initial=0.0))
    powers = norms**q
    knots = np.concatenate([[t0], times[(times > t0) & (times < t1)], [t1]])
    kvals = np.interp(knots, times, powers)
    integral = float(np.trapezoid(kvals, knots))
    return integral ** (1.0 / q)


def _conjugate(p: float) -> float:
    if p == 1:
        return math.inf
    if p == math.inf:
        return 1.0
    return p / (p - 1.0)


def _auto_grid(f: LatticeField) -> TorusGrid:
    need = 2 * f.radius + 2
    m = 64
    while m < need:
        m *= 2
    return TorusGrid(f.dim, m)


def fourier_lebesgue_norm(f: LatticeField, p: float, grid: Optional[TorusGrid] = None) -> float:
    """Norm of the transform in L^{p'} of the torus with normalized measure.

    For p = 2 this equals the l2 norm of the field exactly (grid Parseval).
    """
    if grid is None:
        grid = _auto_grid(f)
    v = forward_dft(f, grid).values
    mags = np.abs(v.ravel())
    pp = _conjugate(p)
    if pp == math.inf:
        return float(mags.max(initial=0.0))
    return float((np.mean(mags**pp)) ** (1.0 / pp))


@dataclass(frozen=True)
class AdmissiblePair:
    """Strichartz exponent pair for the lattice flow in dimension d."""

    q: float
    r: float
    d: int

    @property
    def admissible(self) -> bool:
        return is_admissible(self.q, self.r, self.d)


def is_admissible(q: float, r: float, d: int) -> bool:
    """q, r >= 2, (q, r, d) != (2, inf, 3), and 1/q + d/(3r) <= d/6."""
    if q < 2 or r < 2:
        return False
    if (q, r, d) == (2, math.inf, 3):
        return False
    inv_q = 0.0 if q == math.inf else 1.0 / q
    inv_r = 0.0 if r == math.inf else 1.0 / r
    return inv_q + d * inv_r / 3.0 <= d / 6.0 + 1e-12


def dnls_exponent_region(p: float, q: float, d: int) -> bool:
    """Exponent pairs with a space-time bound on the Fourier-Lebesgue data.

    d = 1: 1/p < 1/4 and 1/q + 4/p <= 1 (boundary of the second constraint
    included); d = 2: q >= 2 with 1/p below the line 7/22 - (13/55)/q,
    boundary included only at q = 2 where 1/p <= 1/5.
    """
    if q < 2:
        return False
    inv_p = 0.0 if p == math.inf else 1.0 / p
    inv_q = 0.0 if q == math.inf else 1.0 / q
    if d == 1:
        return inv_p < 0.25 and inv_q + 4.0 * inv_p <= 1.0 + 1e-12
    if d == 2:
        if abs(inv_q - 0.5) <= 1e-12:
            return inv_p <= 0.2 + 1e-12
        return inv_p < 7.0 / 22.0 - (13.0 / 55.0) * inv_q - 1e-12
    raise DomainError(f"d must be 1 or 2, got {d}")


# ---------------------------------------------------------------------------
# Decoupling


@dataclass(frozen=True)
class DecouplingGeometry:
    """What to extend over the slabs: a model curve or split surface."""

    kind: str
    ambient: object  # CurveSpec or SurfaceSpec
    dim: int


def decoupling_geometry(kind: str, sign: int = 1) -> DecouplingGeometry:
    if kind == "curve":
        return DecouplingGeometry("curve", CurveSpec(monomial_phase(3), (0.0, 1.0)), 2)
    if kind == "surface":
        surf = SurfaceSpec(
            monomial_phase(3, (0.0, 1.0)),
            monomial_phase(3, (0.0, 1.0)),
            sign,
            ((0.0, 1.0), (0.0, 1.0)),
        )
        return DecouplingGeometry("surface", surf, 3)
    if kind == "mixed":
        surf = SurfaceSpec(
            monomial_phase(2, (0.0, 1.0)),
            monomial_phase(3, (0.0, 1.0)),
            1,
            ((0.0, 1.0), (0.0, 1.0)),
        )
        return DecouplingGeometry("mixed", surf, 3)
    raise DomainError(f"unknown geometry kind {kind!r}")


def random_slab_densities(slabs: Sequence[Slab], rng: np.random.Generator) -> list[Density]:
    """Unimodular random-phase constant data on each slab footprint."""
    out = []
    for slab in slabs:
        phase = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
        fp = slab.footprint()
        if slab.kind == "curve":
            out.append(Density.constant(fp, phase, label="slab"))
        else:
            g1 = Density.constant(fp[0], phase, label="slab")
            g2 = Density.constant(fp[1], 1.0, label="slab")
            out.append(Density.separable(g1, g2, label="slab"))
    return out


@dataclass(frozen=True)
class DecouplingResult:
    lhs: float
    rhs: float
    ratio: float
    slab_norms: tuple
    lhs_power: float
    slab_powers: tuple
    p: float
    scale_k: float
    lam: Optional[float]
    kind: str


def _slab_field(geometry: DecouplingGeometry, g: Density, plan: QuadraturePlan):
    if geometry.kind == "curve":
        return lambda pts: extend_curve_batch(geometry.ambient, g, pts, plan)
    return lambda pts: extend_surface_batch(geometry.ambient, g, pts, plan)


def decoupling_check(
    slab_densities: Sequence[Density],
    lam: Optional[float],
    scale_k: float,
    p: float,
    geometry: DecouplingGeometry,
    ball_radius: Optional[float] = None,
    center=None,
    samples: int = 1 << 12,
    seed: int = 0,
    plan: QuadraturePlan = DEFAULT_PLAN,
) -> DecouplingResult:
    """Measure lhs = ||sum E g_slab||_{L^p(ball)} against the l2 aggregate.

    All slab extensions share the same sample points, so the reported ratio
    is insensitive to the QMC noise common to both sides.  The ball defaults
    to radius K at the origin.
    """
    if len(slab_densities) == 0:
        raise DomainError("need at least one slab density")
    if not 2.0 <= p <= 6.0:
        raise DomainError(f"p must lie in [2, 6], got {p}")
    radius = scale_k if ball_radius is None else ball_radius
    vol = _ball_volume(geometry.dim, radius)
    fields = [_slab_field(geometry, g, plan) for g in slab_densities]
    lhs_pow = 0.0
    slab_pows = np.zeros(len(fields))
    for rng in _scramble_seeds(seed):
        pts = ball_samples(geometry.dim, radius, samples, rng, center)
        vals = np.stack([np.asarray(f(pts)) for f in fields])
        lhs_pow += vol * float(np.mean(np.abs(np.sum(vals, axis=0)) ** p))
        slab_pows += vol * np.mean(np.abs(vals) ** p, axis=1)
    lhs_pow /= N_SCRAMBLES
    slab_pows /= N_SCRAMBLES
    lhs = lhs_pow ** (1.0 / p)
    slab_norms = slab_pows ** (1.0 / p)
    rhs = l2_aggregate(slab_norms)
    ratio = 0.0 if rhs == 0.0 and lhs == 0.0 else lhs / rhs
    return DecouplingResult(
        lhs,
        rhs,
        ratio,
        tuple(slab_norms),
        lhs_pow,
        tuple(slab_pows),
        p,
        scale_k,
        lam,
        geometry.kind,
    )


def measure_decoupling_over_balls(
    slab_densities: Sequence[Density],
    lam: Optional[float],
    scale_k: float,
    p: float,
    geometry: DecouplingGeometry,
    centers: Sequence,
    radius: float,
    samples: int = 1 << 12,
    seed: int = 0,
    plan: QuadraturePlan = DEFAULT_PLAN,
) -> tuple[list[DecouplingResult], DecouplingResult]:
    """Per-ball decoupling data over a disjoint family, plus the exact union.

    The union's L^p integrals are the sums of the per-ball integrals, so the
    combined result is consistent with the parts by construction and the
    union-vs-max inequality is a genuine check.
    """
    centers = [np.asarray(c, dtype=float) for c in centers]
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            if np.linalg.norm(centers[i] - centers[j]) < 2.0 * radius - 1e-9:
                raise PreconditionError("balls overlap")
    per_ball = []
    for i, c in enumerate(centers):
        per_ball.append(
            decoupling_check(
                slab_densities,
                lam,
                scale_k,
                p,
                geometry,
                ball_radius=radius,
                center=c,
                samples=samples,
                seed=seed + i,
                plan=plan,
            )
        )
    lhs_pow = float(np.sum([r.lhs_power for r in per_ball]))
    slab_pows = np.sum([r.slab_powers for r in per_ball], axis=0)
    lhs = lhs_pow ** (1.0 / p)
    slab_norms = slab_pows ** (1.0 / p)
    rhs = l2_aggregate(slab_norms)
    ratio = 0.0 if rhs == 0.0 and lhs == 0.0 else lhs / rhs
    union = DecouplingResult(
        lhs,
        rhs,
        ratio,
        tuple(slab_norms),
        lhs_pow,
        tuple(slab_pows),
        p,
        scale_k,
        lam,
        geometry.kind,
    )
    return per_ball, union


def parallel_combine_check(
    per_ball: Sequence[DecouplingResult], union: DecouplingResult, tol: float = 1e-6
) -> bool:
    """Union ratio never exceeds the worst per-ball ratio (within tol)."""
    worst = max((r.ratio for r in per_ball), default=0.0)
    return union.ratio <= worst + tol


# ---------------------------------------------------------------------------
# Restriction constants


@dataclass(frozen=True)
class ConstantEstimate:
    """Empirical lower bound for an extension-inequality constant."""

    scale: float
    value: float
    stderr: float
    family: str
    seed: int
    samples: int
    member_values: tuple = field(default=())


def restriction_families(
    kind: str,
    radius: float,
    seed: int,
    sign_draws: int = 8,
    sign_grid: int = 16,
    region_scale: float = 64.0,
) -> list[tuple[str, Density]]:
    """The standard probe densities for a constant scan at ball radius R.

    Constants, Knapp caps of side R^{-1/3} (anchored at the degenerate
    corner and at interior offsets), random +-1 dyadic sign grids, and
    single dyadic-region indicators.
    """
    rng = np.random.default_rng(seed)
    cap = radius ** (-1.0 / 3.0)
    members: list[tuple[str, Density]] = []
    if kind == "curve":
        dom = (-1.0, 1.0)
        members.append(("constant", Density.constant(dom)))
        for anchor in (0.0, 0.25, 0.5):
            members.append(
                (f"cap@{anchor}", Density.cap(dom, (anchor, min(1.0, anchor + cap))))
            )
        e = np.linspace(dom[0], dom[1], sign_grid + 1)
        for k in range(sign_draws):
            signs = rng.choice([-1.0, 1.0], size=sign_grid).astype(complex)
            members.append(
                (
                    f"signs{k}",
                    Density(
                        dom,
                        _piecewise_1d(e, signs),
                        1.0,
                        edges=tuple(e[1:-1]),
                        label=f"signs{k}",
                    ),
                )
            )
        for reg in decompose_interval(region_scale):
            if reg.label == "dyadic_pos":
                members.append(
                    (f"dyadic@{reg.lam:g}", Density.cap(dom, reg.rect[0]))
                )
        return members
    dom2 = ((0.0, 1.0), (0.0, 1.0))
    members.append(("constant", Density.constant(dom2)))
    for anchor in (0.0, 0.25, 0.5):
        box = ((anchor, min(1.0, anchor + cap)), (0.0, cap))
        members.append((f"cap@{anchor}", Density.cap(dom2, box)))
    for k in range(sign_draws):
        members.append((f"signs{k}", Density.dyadic_signs(dom2, sign_grid, rng, f"signs{k}")))
    for reg in decompose_square(region_scale):
        if reg.label == "dyadic_x1":
            members.append((f"dyadic@{reg.lam:g}", Density.cap(dom2, reg.rect)))
    return members


def _piecewise_1d(edges: np.ndarray, values: np.ndarray) -> Callable:
    def func(t):
        i = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(values) - 1)
        return values[i]

    return func


def estimate_restriction_constant(
    geometry,
    p: float,
    q: float,
    radius: float,
    families: Sequence[tuple[str, Density]],
    samples: int = 1 << 12,
    seed: int = 0,
    plan: QuadraturePlan = DEFAULT_PLAN,
) -> ConstantEstimate:
    """Max over the families of ||E g||_{L^p(B_R)} / ||g||_{L^q}.

    A finite family only lower-bounds the true optimal constant; outputs
    record the achieving member so scans are reproducible.
    """
    if len(families) == 0:
        raise DomainError("need at least one family member")
    dim = 2 if isinstance(geometry, CurveSpec) else 3
    best = (-math.inf, "", 0.0)
    member_values = []
    for name, g in families:
        gnorm = g.lq_norm(q)
        if gnorm == 0.0:
            member_values.append((name, 0.0, 0.0))
            continue
        if isinstance(geometry, CurveSpec):
            fld = lambda pts, g=g: extend_curve_batch(geometry, g, pts, plan)
        else:
            fld = lambda pts, g=g: extend_surface_batch(geometry, g, pts, plan)
        plan_b = BallNormPlan(p, radius, samples, seed, dim)
        val, err = ball_lp_norm(fld, plan_b)
        ratio = val / gnorm
        member_values.append((name, ratio, err / gnorm))
        if ratio > best[0]:
            best = (ratio, name, err / gnorm)
    value, name, stderr = best
    return ConstantEstimate(
        radius, max(value, 0.0), stderr, name, seed, samples, tuple(member_values)
    )


def _shell_bounds(radius: float, r_min: float = 4.0) -> list[tuple[float, float]]:
    """Dyadic radial shells [R/2, R], [R/4, R/2], ..., plus the core ball."""
    bounds = []
    hi = radius
    while hi > r_min * 2.0:
        bounds.append((hi / 2.0, hi))
        hi /= 2.0
    bounds.append((0.0, hi))
    return bounds


def _shell_samples(dim: int, r_lo: float, r_hi: float, n: int, seed) -> np.ndarray:
    """Low-discrepancy points uniform in a spherical shell."""
    u = qmc.Sobol(d=dim, scramble=True, seed=seed).random_base2(int(math.log2(n)))
    if dim == 2:
        r = np.sqrt(r_lo**2 + u[:, 0] * (r_hi**2 - r_lo**2))
        th = 2.0 * np.pi * u[:, 1]
        return np.column_stack([r * np.cos(th), r * np.sin(th)])
    z = 1.0 - 2.0 * u[:, 0]
    th = 2.0 * np.pi * u[:, 1]
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    r = (r_lo**3 + u[:, 2] * (r_hi**3 - r_lo**3)) ** (1.0 / 3.0)
    return np.column_stack([r * rho * np.cos(th), r * rho * np.sin(th), r * z])


def _axis_cell_integrals(
    phase, interval, edges, pts_a, pts_b, rate, plan
) -> np.ndarray:
    """U[p, cell] = int_cell exp(i (a_p t + b_p phi(t))) dt, chunked over points.

    Panels never cross cell edges, so each cell is a contiguous node range
    and the per-cell sums are a single reduceat pass (deterministic order).
    """
    nodes, weights = _panel_nodes(interval[0], interval[1], tuple(edges[1:-1]), rate, plan)
    starts = np.searchsorted(nodes, edges[:-1], side="left")
    phi = np.asarray(phase(nodes), dtype=float)
    out = np.empty((len(pts_a), len(edges) - 1), dtype=complex)
    chunk = 192
    for start in range(0, len(pts_a), chunk):
        a = pts_a[start : start + chunk]
        b = pts_b[start : start + chunk]
        e = np.exp(1j * (a[:, None] * nodes[None, :] + b[:, None] * phi[None, :]))
        e *= weights[None, :]
        out[start : start + chunk] = np.add.reduceat(e, starts, axis=1)
    return out


def restriction_scan(
    kind: str,
    sign: int,
    radii: Sequence[float],
    p: float,
    q: float,
    samples: int = 1 << 12,
    seed: int = 7,
    sign_draws: int = 8,
    sign_grid: int = 16,
    plan: Optional[QuadraturePlan] = None,
) -> tuple[list[ConstantEstimate], tuple[float, float, float]]:
    """Constant scan over ball radii, sharing quadrature across the family.

    Measures the same family as restriction_families: the grid-aligned
    members (constant, sign draws, dyadic indicators) are linear
    combinations of per-cell extension integrals, evaluated once per sample
    cloud; Knapp caps are integrated directly over their own small support.
    Returns the per-radius estimates and the growth-exponent fit.
    """
    from .extension import FAST_PLAN, extend_curve_batch as _ecb, extend_surface_batch as _esb

    if plan is None:
        plan = FAST_PLAN
    rng = np.random.default_rng(seed)
    if kind == "curve":
        dim = 2
        lo, hi = -1.0, 1.0
        geometry = CurveSpec(monomial_phase(3), (lo, hi))
        cell_area = (hi - lo) / sign_grid
    elif kind == "surface":
        dim = 3
        lo, hi = 0.0, 1.0
        geometry = SurfaceSpec(
            monomial_phase(3, (0.0, 1.0)),
            monomial_phase(3, (0.0, 1.0)),
            sign,
            ((0.0, 1.0), (0.0, 1.0)),
        )
        cell_area = (1.0 / sign_grid) ** 2
    else:
        raise DomainError(f"unknown scan kind {kind!r}")
    edges = np.linspace(lo, hi, sign_grid + 1)

    # Grid-aligned members: name -> cell coefficient array.
    grid_members: list[tuple[str, np.ndarray]] = []
    if kind == "curve":
        grid_members.append(("constant", np.ones(sign_grid, dtype=complex)))
        for k in range(sign_draws):
            grid_members.append((f"signs{k}", rng.choice([-1.0, 1.0], sign_grid).astype(complex)))
        for reg in decompose_interval(64.0):
            if reg.label == "dyadic_pos":
                a, b = reg.rect[0]
                coeff = ((edges[:-1] >= a - 1e-12) & (edges[1:] <= b + 1e-12)).astype(complex)
                grid_members.append((f"dyadic@{reg.lam:g}", coeff))
    else:
        grid_members.append(("constant", np.ones((sign_grid, sign_grid), dtype=complex)))
        for k in range(sign_draws):
            grid_members.append(
                (f"signs{k}", rng.choice([-1.0, 1.0], (sign_grid, sign_grid)).astype(complex))
            )
        for reg in decompose_square(64.0):
            if reg.label == "dyadic_x1":
                (a, b), (c, d) = reg.rect
                in1 = (edges[:-1] >= a - 1e-12) & (edges[1:] <= b + 1e-12)
                in2 = (edges[:-1] >= c - 1e-12) & (edges[1:] <= d + 1e-12)
                grid_members.append(
                    (f"dyadic@{reg.lam:g}", np.outer(in1, in2).astype(complex))
                )

    def member_lq(coeffs: np.ndarray) -> float:
        if q == math.inf:
            return float(np.max(np.abs(coeffs)))
        return float((np.sum(np.abs(coeffs) ** q) * cell_area) ** (1.0 / q))

    estimates = []
    for radius in radii:
        cap = radius ** (-1.0 / 3.0)
        cap_members: list[tuple[str, Density]] = []
        if kind == "curve":
            for anchor in (0.0, 0.25, 0.5):
                cap_members.append(
                    (f"cap@{anchor}", Density.cap((lo, hi), (anchor, min(hi, anchor + cap))))
                )
        else:
            for anchor in (0.0, 0.25, 0.5):
                box = ((anchor, min(1.0, anchor + cap)), (0.0, cap))
                cap_members.append((f"cap@{anchor}", Density.cap(((0.0, 1.0), (0.0, 1.0)), box)))
        sup_d = 3.0 * max(abs(lo), abs(hi)) ** 2
        acc = {name: 0.0 for name, _ in grid_members}
        acc.update({name: 0.0 for name, _ in cap_members})
        # Radial shell stratification: the integrand concentrates near the
        # dual directions, so plain ball QMC wastes nearly all samples at
        # large R.  Each dyadic shell gets its own scrambled clouds.
        n_shell = max(256, samples // 8)
        for shell_idx, (r_lo, r_hi) in enumerate(_shell_bounds(radius)):
            vol_shell = _ball_volume(dim, r_hi) - _ball_volume(dim, r_lo)
            shell = {name: 0.0 for name in acc}
            for rng_s in _scramble_seeds([seed, shell_idx]):
                pts = _shell_samples(dim, r_lo, r_hi, n_shell, rng_s)
                rate1 = 1.0 + r_hi + 3.0 * r_hi * sup_d
                if kind == "curve":
                    u = _axis_cell_integrals(
                        geometry.phase, (lo, hi), edges, pts[:, 0], pts[:, 1], rate1, plan
                    )
                    for name, coeff in grid_members:
                        vals = np.einsum("pa,a->p", u, coeff)
                        shell[name] += float(np.mean(np.abs(vals) ** p))
                    for name, g in cap_members:
                        vals = _ecb(geometry, g, pts, plan)
                        shell[name] += float(np.mean(np.abs(vals) ** p))
                else:
                    u = _axis_cell_integrals(
                        geometry.phase1, (lo, hi), edges, pts[:, 0], pts[:, 2], rate1, plan
                    )
                    v = _axis_cell_integrals(
                        geometry.phase2, (lo, hi), edges, pts[:, 1], sign * pts[:, 2], rate1, plan
                    )
                    for name, coeff in grid_members:
                        vals = np.einsum("pa,ab,pb->p", u, coeff, v)
                        shell[name] += float(np.mean(np.abs(vals) ** p))
                    for name, g in cap_members:
                        vals = _esb(geometry, g, pts, plan)
                        shell[name] += float(np.mean(np.abs(vals) ** p))
            for name in acc:
                acc[name] += vol_shell * shell[name] / N_SCRAMBLES
        member_values = []
        for name, coeff in grid_members:
            member_values.append((name, acc[name] ** (1.0 / p) / member_lq(coeff)))
        for name, g in cap_members:
            member_values.append((name, acc[name] ** (1.0 / p) / g.lq_norm(q)))
        best = max(member_values, key=lambda kv: kv[1])
        estimates.append(
            ConstantEstimate(
                radius, best[1], 0.0, best[0], seed, samples,
                tuple((n, v, 0.0) for n, v in member_values),
            )
        )
    fit = (
        fit_growth_exponent([(e.scale, e.value) for e in estimates])
        if len(estimates) >= 3
        else (math.nan, math.nan, math.nan)
    )
    return estimates, fit


def fit_growth_exponent(points: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """Least-squares slope of log(value) against log(scale).

    Returns (slope, intercept, rms residual); a flat scan gives slope 0.
    """
    if len(points) < 3:
        raise DomainError("need at least 3 points to fit a growth exponent")
    scales = np.array([s for s, _ in points], dtype=float)
    values = np.array([v for _, v in points], dtype=float)
    if np.any(np.diff(scales) <= 0):
        raise DomainError("scales must be strictly increasing")
    if np.any(values <= 0):
        raise DomainError("values must be positive for a log fit")
    x = np.log(scales)
    y = np.log(values)
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2)))


# ---------------------------------------------------------------------------
# Translation-averaging identity


@dataclass(frozen=True)
class TranslationCheckResult:
    continuum: float
    averaged: float
    rel_gap: float
    oracle: Optional[float]
    p: float
    time_window: float
    space_window: int


def _wave_values(
    F: Density, pts: np.ndarray, order: int, budget: float
) -> np.ndarray:
    """A(x, t) = int F(xi) exp(i (x xi - t omega(xi))) dxi over the density domain."""
    plan = QuadraturePlan(nodes_per_panel=order, phase_budget=budget)
    rate = (
        1.0
        + float(np.max(np.abs(pts[:, 0]), initial=0.0))
        + 2.0 * float(np.max(np.abs(pts[:, 1]), initial=0.0))
    )
    xi, w = _panel_nodes(F.domain[0], F.domain[1], F.edges, rate, plan)
    om = 2.0 - 2.0 * np.cos(xi)
    gw = F(xi) * w
    out = np.empty(len(pts), dtype=complex)
    chunk = 256
    for start in range(0, len(pts), chunk):
        blk = pts[start : start + chunk]
        phase = blk[:, 0, None] * xi[None, :] - blk[:, 1, None] * om[None, :]
        out[start : start + chunk] = np.einsum("ij,j->i", np.exp(1j * phase), gw)
    return out


def _gl_points(lo: float, hi: float, panels: int, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    h = (hi - lo) / panels
    nodes = (edges[:-1, None] + 0.5 * h * (x[None, :] + 1.0)).ravel()
    weights = np.broadcast_to(0.5 * h * w, (panels, order)).ravel()
    return nodes, weights


def translation_average_check(
    F: Density,
    p: float,
    time_window: float,
    space_window: int,
    oracle: bool = True,
) -> TranslationCheckResult:
    """Both sides of the exact continuum-vs-lattice L^p identity, truncated.

    The continuum side integrates |A|^p over [-T, T] x the union of unit
    cells k + [0, 1], |k| <= N; the averaged side integrates the lattice
    samples A(k + s, t) over the cell offset s in [0, 1] with an independent
    quadrature layout.  Per fixed truncation the two agree exactly, so the
    reported gap measures quadrature error only.  For p = 2 a Plancherel
    closed form (valid up to the lattice tail beyond N) is also returned.
    """
    if F.dim != 1:
        raise PreconditionError("translation averaging is implemented for d = 1")
    T, N = float(time_window), int(space_window)
    ks = np.arange(-N, N + 1)

    # Continuum side: per unit cell, 8th-order GL in x; composite GL in t.
    x_off_l, x_w_l = _gl_points(0.0, 1.0, 2, 8)
    t_nodes_l, t_w_l = _gl_points(-T, T, max(8, int(4 * T)), 12)
    xs = (ks[:, None] + x_off_l[None, :]).ravel()
    xw = np.tile(x_w_l, len(ks))
    pts = np.column_stack(
        [
            np.repeat(xs, len(t_nodes_l)),
            np.tile(t_nodes_l, len(xs)),
        ]
    )
    vals = np.abs(_wave_values(F, pts, order=14, budget=4.0)) ** p
    vals = vals.reshape(len(xs), len(t_nodes_l))
    continuum_pow = float(np.einsum("x,xt,t->", xw, vals, t_w_l))

    # Averaged lattice side: offsets in [0,1] with a different GL layout,
    # lattice sum over |k| <= N, and its own t panels.
    s_nodes, s_w = _gl_points(0.0, 1.0, 3, 16)
    t_nodes_r, t_w_r = _gl_points(-T, T, max(10, int(5 * T)), 10)
    total = 0.0
    for s, ws in zip(s_nodes, s_w):
        pts_r = np.column_stack(
            [
                np.repeat(ks + s, len(t_nodes_r)),
                np.tile(t_nodes_r, len(ks)),
            ]
        )
        # E^disc carries the (2pi)^{-d} normalization; the identity weights
        # it back by (2pi)^{dp}, which cancels against |A|^p exactly.
        a = np.abs(_wave_values(F, pts_r, order=18, budget=3.0)) ** p
        total += ws * float(np.einsum("kt,t->", a.reshape(len(ks), -1), t_w_r))
    averaged_pow = total

    continuum = continuum_pow ** (1.0 / p)
    averaged = averaged_pow ** (1.0 / p)
    rel_gap = abs(continuum - averaged) / max(continuum, averaged, 1e-300)
    oracle_val = None
    if oracle and p == 2.0:
        x01, w01 = np.polynomial.legendre.leggauss(64)
        lo, hi = F.domain
        xi = 0.5 * (hi - lo) * (x01 + 1.0) + lo
        f2 = float(np.sum(0.5 * (hi - lo) * w01 * np.abs(F(xi)) ** 2))
        oracle_val = math.sqrt(2.0 * T * 2.0 * math.pi * f2)
    return TranslationCheckResult(continuum, averaged, rel_gap, oracle_val, p, T, N)


# Convenience: build the dyadic-strip slabs and matching random data used by
# the decoupling scans.

def decoupling_scan_case(
    kind: str,
    scale_k: float,
    seed: int = 0,
    lam: Optional[float] = None,
) -> tuple[list[Slab], Optional[float]]:
    """Slabs for one decoupling measurement at scale K.

    kind 'curve'/'surface' tile the outermost dyadic region by default (the
    one with the most slabs; pass ``lam`` for a specific scale); 'mixed'
    tiles the two-phase strip.
    """
    if kind == "mixed":
        region = decompose_mixed_square(scale_k)[1]
        return slab_cover(region, scale_k, "mixed"), None
    if kind == "curve":
        regions = [r for r in decompose_interval(scale_k) if r.label == "dyadic_pos"]
    else:
        regions = [r for r in decompose_square(scale_k) if r.label == "dyadic_x1"]
    if lam is not None:
        regions = [r for r in regions if abs(r.lam - lam) < 1e-12]
        if not regions:
            raise DomainError(f"no dyadic region at lam={lam} for K={scale_k}")
    region = max(regions, key=lambda r: r.lam)
    return slab_cover(region, scale_k, kind), region.lam


def decoupling_draw_scan(
    kind: str,
    scale_k: float,
    p_list: Sequence[float],
    draws: int,
    samples: int = 1 << 12,
    seed: int = 0,
    lam: Optional[float] = None,
    plan: QuadraturePlan = DEFAULT_PLAN,
) -> list[DecouplingResult]:
    """Decoupling ratios over several unimodular random draws, sharing work.

    The slab extensions are evaluated once per sample cloud; each draw only
    rotates the slab data by unit phases, which multiplies the cached field
    values and leaves the per-slab norms unchanged.  Equivalent to calling
    decoupling_check on freshly built densities, at a fraction of the cost.
    """
    geometry = decoupling_geometry(kind)
    slabs, lam = decoupling_scan_case(kind, scale_k, seed, lam)
    base = random_slab_densities(slabs, np.random.default_rng(0))
    radius = scale_k
    vol = _ball_volume(geometry.dim, radius)
    fields = [_slab_field(geometry, g, plan) for g in base]
    cached = []
    for rng in _scramble_seeds(seed):
        pts = ball_samples(geometry.dim, radius, samples, rng)
        cached.append(np.stack([np.asarray(f(pts)) for f in fields]))
    rng_draws = np.random.default_rng(seed + 1)
    phase_sets = [
        np.exp(1j * rng_draws.uniform(0.0, 2.0 * np.pi, len(slabs)))
        for _ in range(draws)
    ]
    results = []
    for p in p_list:
        if not 2.0 <= p <= 6.0:
            raise DomainError(f"p must lie in [2, 6], got {p}")
        slab_pows = np.zeros(len(slabs))
        for vals in cached:
            slab_pows += vol * np.mean(np.abs(vals) ** p, axis=1)
        slab_pows /= N_SCRAMBLES
        slab_norms = slab_pows ** (1.0 / p)
        rhs = l2_aggregate(slab_norms)
        for phases in phase_sets:
            lhs_pow = 0.0
            for vals in cached:
                mixed = np.einsum("s,sn->n", phases, vals)
                lhs_pow += vol * float(np.mean(np.abs(mixed) ** p))
            lhs_pow /= N_SCRAMBLES
            lhs = lhs_pow ** (1.0 / p)
            ratio = 0.0 if rhs == 0.0 and lhs == 0.0 else lhs / rhs
            results.append(
                DecouplingResult(
                    lhs,
                    rhs,
                    ratio,
                    tuple(slab_norms),
                    lhs_pow,
                    tuple(slab_pows),
                    p,
                    scale_k,
                    lam,
                    kind,
                )
            )
    return results
