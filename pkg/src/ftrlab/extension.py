"""Oscillatory-integral extension operators and their rescaling identities.

The extension of a density g on a curve (t, phi(t)) is
E g(y) = int g(t) exp(i (y1 t + y2 phi(t))) dt, and on a split graph surface
E g(x) = int int g exp(i (x1 xi1 + x2 xi2 + x3 (phi1(xi1) +- phi2(xi2)))).
Integrals are evaluated by composite Gauss-Legendre panels whose width
shrinks with the phase derivative, so each panel sees a bounded number of
oscillations.  The module also builds the exact changes of variables that
turn a dyadic piece of a degenerate curve/surface into a unit-scale
non-degenerate one, as executable maps whose intertwining identity can be
checked pointwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, PreconditionError, ResolutionError
from .finitetype import (
    CurveSpec,
    Phase1D,
    PhaseScaling,
    RescalingMap,
    Slab,
    SurfaceSpec,
    apply_scaling,
    classify_finite_type,
    finite_type_closure_rescale,
    monomial_phase,
    phase_from_tag,
    rescale_taylor,
    rescaled_phase_polynomial,
)
from .lattice import TorusFunction

__all__ = [
    "QuadraturePlan",
    "Density",
    "FieldSample",
    "extend_curve",
    "extend_curve_batch",
    "extend_curve_checked",
    "extend_surface",
    "extend_surface_batch",
    "discrete_extend",
    "rescale_curve",
    "rescale_surface_slab",
    "rescale_mixed_slab",
    "reduce_lattice_symbol",
    "SymbolPiece",
    "verify_curve_intertwining",
    "verify_surface_intertwining",
    "verify_mixed_intertwining",
]

_CHUNK = 192  # evaluation points per phase-matrix block


@dataclass(frozen=True)
class QuadraturePlan:
    """Composite Gauss-Legendre plan with a phase-proportional panel rule.

    Panel width along an axis is min(1/16, phase_budget / rate) with
    rate = 1 + |y1| + 3 |y2| sup|phi'|; 16 nodes per panel then resolve a
    bounded number of radians per panel to far below 1e-9.  ``refine``
    multiplies the panel count (used by doubled-resolution self-checks).
    """

    nodes_per_panel: int = 16
    phase_budget: float = 4.0
    max_panels: int = 1 << 17
    refine: int = 1

    def panel_width(self, rate: float) -> float:
        return min(1.0 / 16.0, self.phase_budget / rate)

    def doubled(self) -> "QuadraturePlan":
        return replace(self, refine=2 * self.refine)


DEFAULT_PLAN = QuadraturePlan()
# Scan profile: ~24 radians per 16-node panel still leaves per-panel error
# below 1e-9; used by the large-R constant scans where 1e-6 accuracy suffices.
FAST_PLAN = QuadraturePlan(phase_budget=24.0)


@lru_cache(maxsize=8)
def _gl_rule(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _panel_nodes(lo: float, hi: float, breaks: tuple, rate: float, plan: QuadraturePlan):
    """Nodes and weights tiling [lo, hi], split at interior breakpoints."""
    x01, w01 = _gl_rule(plan.nodes_per_panel)
    width = plan.panel_width(rate)
    pieces = sorted({lo, hi, *(b for b in breaks if lo < b < hi)})
    nodes, weights = [], []
    total_panels = 0
    for a, b in zip(pieces[:-1], pieces[1:]):
        m = max(1, math.ceil((b - a) / width)) * plan.refine
        total_panels += m
        if total_panels > plan.max_panels:
            raise ResolutionError(
                f"panel rule needs more than {plan.max_panels} panels on "
                f"[{lo}, {hi}] at oscillation rate {rate:.3g}",
                required=total_panels,
            )
        edges = np.linspace(a, b, m + 1)
        h = (b - a) / m
        nodes.append((edges[:-1, None] + h * x01[None, :]).ravel())
        weights.append(np.broadcast_to(h * w01, (m, len(w01))).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def _interval_intersection(a: tuple, b: tuple) -> Optional[tuple]:
    lo, hi = max(a[0], b[0]), min(a[1], b[1])
    return (lo, hi) if lo < hi else None


def _sup_abs_derivative(phase: Phase1D, interval: tuple, samples: int = 512) -> float:
    t = np.linspace(interval[0], interval[1], samples)
    return 1.2 * float(np.max(np.abs(phase(t, 1)))) + 1e-12


@dataclass(frozen=True)
class FieldSample:
    """A single extension-operator evaluation, with its crude a-priori bound."""

    point: tuple
    value: complex
    bound: float

    def __post_init__(self):
        if abs(self.value) > self.bound * (1.0 + 1e-12) + 1e-300:
            raise DomainError("sample exceeds the sup-norm x measure bound")


@dataclass(frozen=True)
class Density:
    """Bounded complex density on an interval or rectangle.

    ``func`` is a vectorized evaluator (one array argument in 1D, two in 2D).
    ``edges`` lists known discontinuity locations per axis so the quadrature
    can split panels there.  Optional structure for fast paths:
    ``factors`` (a pair of 1D densities whose product this is) and
    ``cells`` ((edges1, edges2, values) of a piecewise-constant grid).
    """

    domain: tuple
    func: Callable
    sup_bound: float
    edges: tuple = ()
    factors: Optional[tuple] = None
    cells: Optional[tuple] = None
    label: str = ""

    @property
    def dim(self) -> int:
        return 2 if isinstance(self.domain[0], tuple) else 1

    def __call__(self, *args):
        return np.asarray(self.func(*args), dtype=complex)

    def measure(self) -> float:
        if self.dim == 1:
            return self.domain[1] - self.domain[0]
        (a1, b1), (a2, b2) = self.domain
        return (b1 - a1) * (b2 - a2)

    def axis_edges(self, axis: int) -> tuple:
        if self.dim == 1:
            return self.edges
        return self.edges[axis] if self.edges else ()

    def lq_norm(self, q: float, nodes: int = 96) -> float:
        """L^q norm over the domain (sup bound for q = inf)."""
        if q == math.inf:
            return self.sup_bound
        x01, w01 = _gl_rule(32)
        if self.dim == 1:
            lo, hi = self.domain
            pieces = sorted({lo, hi, *(e for e in self.edges if lo < e < hi)})
            total = 0.0
            for a, b in zip(pieces[:-1], pieces[1:]):
                t = a + (b - a) * x01
                total += (b - a) * float(np.sum(w01 * np.abs(self(t)) ** q))
            return total ** (1.0 / q)
        (a1, b1), (a2, b2) = self.domain
        e1 = sorted({a1, b1, *(e for e in self.axis_edges(0) if a1 < e < b1)})
        e2 = sorted({a2, b2, *(e for e in self.axis_edges(1) if a2 < e < b2)})
        total = 0.0
        for p1, q1 in zip(e1[:-1], e1[1:]):
            t1 = p1 + (q1 - p1) * x01
            for p2, q2 in zip(e2[:-1], e2[1:]):
                t2 = p2 + (q2 - p2) * x01
                vals = np.abs(self(t1[:, None], t2[None, :])) ** q
                total += (q1 - p1) * (q2 - p2) * float(w01 @ vals @ w01)
        return total ** (1.0 / q)

    # -- constructors -------------------------------------------------------

    @staticmethod
    def constant(domain, value=1.0, label="constant") -> "Density":
        value = complex(value)
        if isinstance(domain[0], tuple):
            func = lambda x1, x2: np.full(np.broadcast(x1, x2).shape, value)
        else:
            func = lambda t: np.full(np.shape(t), value)
        return Density(domain, func, abs(value), label=label)

    @staticmethod
    def cap(domain, cap_box, modulation=None, label="cap") -> "Density":
        """Indicator of a sub-box, optionally modulated by exp(i a . xi).

        The integration domain is the box itself (the density vanishes
        outside), so narrow caps cost only nodes proportional to their size.
        """
        if isinstance(domain[0], tuple):
            (c1, d1), (c2, d2) = cap_box
            a = (0.0, 0.0) if modulation is None else modulation
            box1 = _interval_intersection(domain[0], (c1, d1))
            box2 = _interval_intersection(domain[1], (c2, d2))
            if box1 is None or box2 is None:
                raise DomainError("cap box does not meet the ambient domain")
            g1 = Density.cap(domain[0], box1, a[0], label)
            g2 = Density.cap(domain[1], box2, a[1], label)
            return Density.separable(g1, g2, label=label)
        c1, d1 = cap_box
        box = _interval_intersection(domain, (c1, d1))
        if box is None:
            raise DomainError("cap interval does not meet the ambient domain")
        a = 0.0 if modulation is None else float(modulation)

        def func(t):
            t = np.asarray(t)
            inside = (t >= box[0] - 1e-15) & (t <= box[1] + 1e-15)
            return np.where(inside, np.exp(1j * a * t), 0.0)

        return Density(box, func, 1.0, label=label)

    @staticmethod
    def dyadic_signs(domain, n: int, rng: np.random.Generator, label="signs") -> "Density":
        """Random +-1 signs on an n x n grid over a rectangle domain."""
        (a1, b1), (a2, b2) = domain
        e1 = np.linspace(a1, b1, n + 1)
        e2 = np.linspace(a2, b2, n + 1)
        signs = rng.choice([-1.0, 1.0], size=(n, n))

        def func(x1, x2):
            i = np.clip(np.searchsorted(e1, x1, side="right") - 1, 0, n - 1)
            j = np.clip(np.searchsorted(e2, x2, side="right") - 1, 0, n - 1)
            return signs[i, j] + 0.0j

        return Density(
            domain,
            func,
            1.0,
            edges=(tuple(e1[1:-1]), tuple(e2[1:-1])),
            cells=(e1, e2, signs.astype(complex)),
            label=label,
        )

    @staticmethod
    def separable(g1: "Density", g2: "Density", label="separable") -> "Density":
        def func(x1, x2):
            return g1(x1) * g2(x2)

        return Density(
            (g1.domain, g2.domain),
            func,
            g1.sup_bound * g2.sup_bound,
            edges=(g1.edges, g2.edges),
            factors=(g1, g2),
            label=label,
        )

    @staticmethod
    def from_grid(domain, samples: np.ndarray, sup_bound=None, label="grid") -> "Density":
        """Grid samples with (bi)linear interpolation on the domain."""
        samples = np.asarray(samples, dtype=complex)
        if isinstance(domain[0], tuple):
            (a1, b1), (a2, b2) = domain
            g1 = np.linspace(a1, b1, samples.shape[0])
            g2 = np.linspace(a2, b2, samples.shape[1])

            def func(x1, x2):
                x1b, x2b = np.broadcast_arrays(x1, x2)
                i = np.clip(np.searchsorted(g1, x1b) - 1, 0, len(g1) - 2)
                j = np.clip(np.searchsorted(g2, x2b) - 1, 0, len(g2) - 2)
                s = (x1b - g1[i]) / (g1[i + 1] - g1[i])
                t = (x2b - g2[j]) / (g2[j + 1] - g2[j])
                return (
                    samples[i, j] * (1 - s) * (1 - t)
                    + samples[i + 1, j] * s * (1 - t)
                    + samples[i, j + 1] * (1 - s) * t
                    + samples[i + 1, j + 1] * s * t
                )

        else:
            a1, b1 = domain
            g1 = np.linspace(a1, b1, samples.shape[0])

            def func(t):
                i = np.clip(np.searchsorted(g1, t) - 1, 0, len(g1) - 2)
                s = (t - g1[i]) / (g1[i + 1] - g1[i])
                return samples[i] * (1 - s) + samples[i + 1] * s

        bound = float(np.max(np.abs(samples))) if sup_bound is None else sup_bound
        return Density(domain, func, bound, label=label)

    def modulated(self, a) -> "Density":
        """Multiply by exp(i a t) (1D) or exp(i a . xi) (2D)."""
        if self.dim == 1:
            a = float(a)
            func = lambda t: self.func(t) * np.exp(1j * a * np.asarray(t))
        else:
            a1, a2 = a
            func = lambda x1, x2: self.func(x1, x2) * np.exp(
                1j * (a1 * np.asarray(x1) + a2 * np.asarray(x2))
            )
        return Density(self.domain, func, self.sup_bound, self.edges, None, None, self.label)

    def restricted(self, sub) -> "Density":
        """Restrict the integration domain (fast-path metadata is dropped)."""
        if self.dim == 1:
            new = _interval_intersection(self.domain, sub)
            if new is None:
                raise DomainError("restriction is empty")
            return Density(new, self.func, self.sup_bound, self.edges, label=self.label)
        d1 = _interval_intersection(self.domain[0], sub[0])
        d2 = _interval_intersection(self.domain[1], sub[1])
        if d1 is None or d2 is None:
            raise DomainError("restriction is empty")
        return Density((d1, d2), self.func, self.sup_bound, self.edges, label=self.label)


# ---------------------------------------------------------------------------
# Curve extension


def _curve_quadrature(curve: CurveSpec, g: Density, rate: float, plan: QuadraturePlan):
    interval = _interval_intersection(curve.domain, g.domain)
    if interval is None:
        return None
    t, w = _panel_nodes(interval[0], interval[1], g.edges, rate, plan)
    return t, w


def extend_curve_batch(
    curve: CurveSpec, g: Density, points: np.ndarray, plan: QuadraturePlan = DEFAULT_PLAN
) -> np.ndarray:
    """E g at many points (n, 2); the panel rule uses the batch maximum."""
    if g.dim != 1:
        raise PreconditionError("curve extension needs a 1D density")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    interval = _interval_intersection(curve.domain, g.domain)
    if interval is None:
        return np.zeros(len(points), dtype=complex)
    sup_d = _sup_abs_derivative(curve.phase, interval)
    rate = 1.0 + np.max(np.abs(points[:, 0]), initial=0.0) + 3.0 * np.max(
        np.abs(points[:, 1]), initial=0.0
    ) * sup_d
    t, w = _panel_nodes(interval[0], interval[1], g.edges, rate, plan)
    gw = g(t) * w
    phi_t = np.asarray(curve.phase(t), dtype=float)
    out = np.empty(len(points), dtype=complex)
    for start in range(0, len(points), _CHUNK):
        blk = points[start : start + _CHUNK]
        phase = blk[:, 0, None] * t[None, :] + blk[:, 1, None] * phi_t[None, :]
        out[start : start + _CHUNK] = np.einsum(
            "ij,j->i", np.exp(1j * phase), gw
        )
    return out


def extend_curve(
    curve: CurveSpec, g: Density, y, plan: QuadraturePlan = DEFAULT_PLAN
) -> complex:
    """Oscillatory integral int g(t) exp(i (y1 t + y2 phi(t))) dt."""
    return complex(extend_curve_batch(curve, g, np.asarray(y, dtype=float)[None, :], plan)[0])


def extend_curve_checked(
    curve: CurveSpec, g: Density, y, plan: QuadraturePlan = DEFAULT_PLAN
) -> tuple[complex, float]:
    """Value plus a doubled-resolution error estimate."""
    v1 = extend_curve(curve, g, y, plan)
    v2 = extend_curve(curve, g, y, plan.doubled())
    return v2, abs(v2 - v1)


# ---------------------------------------------------------------------------
# Surface extension


def _surface_axis_nodes(surface: SurfaceSpec, g: Density, points, plan):
    (a1, b1), (a2, b2) = g.domain
    d1 = _interval_intersection(surface.domain[0], (a1, b1))
    d2 = _interval_intersection(surface.domain[1], (a2, b2))
    if d1 is None or d2 is None:
        return None
    sup1 = _sup_abs_derivative(surface.phase1, d1)
    sup2 = _sup_abs_derivative(surface.phase2, d2)
    m1 = np.max(np.abs(points[:, 0]), initial=0.0)
    m2 = np.max(np.abs(points[:, 1]), initial=0.0)
    m3 = np.max(np.abs(points[:, 2]), initial=0.0)
    t1, w1 = _panel_nodes(d1[0], d1[1], g.axis_edges(0), 1.0 + m1 + 3.0 * m3 * sup1, plan)
    t2, w2 = _panel_nodes(d2[0], d2[1], g.axis_edges(1), 1.0 + m2 + 3.0 * m3 * sup2, plan)
    return (t1, w1), (t2, w2)


def extend_surface_batch(
    surface: SurfaceSpec,
    g: Density,
    points: np.ndarray,
    plan: QuadraturePlan = DEFAULT_PLAN,
    force_tensor: bool = False,
) -> np.ndarray:
    """E g at many points (n, 3).

    Separable densities factor into two curve extensions (same tolerance
    contract as the tensor quadrature); piecewise-constant grids use
    per-cell 1D integrals; everything else runs the full tensor rule.
    """
    if g.dim != 2:
        raise PreconditionError("surface extension needs a 2D density")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if g.factors is not None and not force_tensor:
        g1, g2 = g.factors
        c1 = CurveSpec(surface.phase1, surface.domain[0])
        c2 = CurveSpec(surface.phase2, surface.domain[1])
        y1 = points[:, [0, 2]]
        y2 = np.column_stack([points[:, 1], surface.sign * points[:, 2]])
        return extend_curve_batch(c1, g1, y1, plan) * extend_curve_batch(c2, g2, y2, plan)
    axes = _surface_axis_nodes(surface, g, points, plan)
    if axes is None:
        return np.zeros(len(points), dtype=complex)
    (t1, w1), (t2, w2) = axes
    phi1 = np.asarray(surface.phase1(t1), dtype=float)
    phi2 = np.asarray(surface.phase2(t2), dtype=float)
    out = np.empty(len(points), dtype=complex)
    if g.cells is not None:
        e1, e2, vals = g.cells
        i1 = np.clip(np.searchsorted(e1, t1, side="right") - 1, 0, len(e1) - 2)
        i2 = np.clip(np.searchsorted(e2, t2, side="right") - 1, 0, len(e2) - 2)
        u_basis = np.zeros((len(e1) - 1, len(t1)))
        u_basis[i1, np.arange(len(t1))] = w1
        v_basis = np.zeros((len(e2) - 1, len(t2)))
        v_basis[i2, np.arange(len(t2))] = w2
        for start in range(0, len(points), _CHUNK):
            blk = points[start : start + _CHUNK]
            a = np.exp(1j * (blk[:, 0, None] * t1[None, :] + blk[:, 2, None] * phi1[None, :]))
            b = np.exp(
                1j
                * (
                    blk[:, 1, None] * t2[None, :]
                    + surface.sign * blk[:, 2, None] * phi2[None, :]
                )
            )
            u = np.einsum("pj,aj->pa", a, u_basis)
            v = np.einsum("pj,bj->pb", b, v_basis)
            out[start : start + _CHUNK] = np.einsum("pa,ab,pb->p", u, vals, v)
        return out
    g_nodes = g(t1[:, None], t2[None, :]) * w1[:, None] * w2[None, :]
    for start in range(0, len(points), _CHUNK):
        blk = points[start : start + _CHUNK]
        a = np.exp(1j * (blk[:, 0, None] * t1[None, :] + blk[:, 2, None] * phi1[None, :]))
        b = np.exp(
            1j
            * (blk[:, 1, None] * t2[None, :] + surface.sign * blk[:, 2, None] * phi2[None, :])
        )
        inner = np.einsum("ij,pj->pi", g_nodes, b)
        out[start : start + _CHUNK] = np.einsum("pi,pi->p", a, inner)
    return out


def extend_surface(
    surface: SurfaceSpec,
    g: Density,
    x,
    plan: QuadraturePlan = DEFAULT_PLAN,
    force_tensor: bool = False,
) -> complex:
    return complex(
        extend_surface_batch(surface, g, np.asarray(x, dtype=float)[None, :], plan, force_tensor)[0]
    )


# ---------------------------------------------------------------------------
# Discrete extension


def discrete_extend(v: TorusFunction, k, t: float) -> complex:
    """Mean over grid nodes of v(xi) exp(i k xi - i t omega(xi)).

    Agrees with propagating the inverse transform of v and sampling at k.
    """
    grid = v.grid
    k_arr = np.atleast_1d(np.asarray(k, dtype=int))
    if k_arr.size != grid.dim:
        raise PreconditionError("lattice point dimension does not match the grid")
    need = 2 * (int(np.max(np.abs(k_arr))) + math.ceil(2.0 * abs(t))) + 8
    if grid.modes < need:
        raise ResolutionError(
            f"grid M={grid.modes} too coarse for (k={k}, t={t}); need M >= {need}",
            required=need,
        )
    nodes = grid.nodes()
    if grid.dim == 1:
        integrand = v.values * np.exp(1j * k_arr[0] * nodes - 1j * t * grid.omega())
        return complex(np.mean(integrand))
    phase = (
        k_arr[0] * nodes[:, None] + k_arr[1] * nodes[None, :]
    )
    integrand = v.values * np.exp(1j * phase - 1j * t * grid.omega())
    return complex(np.mean(integrand))


# ---------------------------------------------------------------------------
# Rescaling identities


def rescale_curve(lam: float, f: Density, phi: Phase1D):
    """Zoom a dyadic curve piece [lam, 2 lam] to unit scale.

    Returns (f_new, gamma, rmap): f_new(u) = lam f(lam u + lam) on [0, 1],
    gamma(u) the rescaled phase with constant and linear parts removed, and
    the rescaling map whose space matrix sends y to the evaluation point of
    the unit-scale operator:  |E f (y)| = |E^gamma f_new (L y)|.
    """
    if not 0.0 < lam <= 0.5:
        raise DomainError(f"lam must lie in (0, 1/2], got {lam}")
    lo, hi = f.domain
    if lo < lam - 1e-12 or hi > 2 * lam + 1e-12:
        raise PreconditionError(
            f"density support [{lo}, {hi}] is not inside [{lam}, {2 * lam}]"
        )
    r = rescale_taylor(phi, lam)
    gamma = rescaled_phase_polynomial(r, (0.0, 1.0))
    new_dom = ((lo - lam) / lam, (hi - lam) / lam)
    edges = tuple((e - lam) / lam for e in f.edges)

    def func(u):
        return lam * f.func(lam * np.asarray(u) + lam)

    f_new = Density(new_dom, func, lam * f.sup_bound, edges=edges, label=f.label)
    space = np.array([[lam, lam**3 * r[0]], [0.0, lam**3]])
    rmap = RescalingMap((lam,), (lam,), space, lam, gamma)
    return f_new, gamma, rmap


def rescale_surface_slab(tau: Slab, lam: float, scale_k: float, sign: int = 1):
    """Unit-scale change of variables for one slab of a dyadic strip.

    For the prototype surface (cubes on both axes, relative sign +-1) and a
    slab anchored at a in [lam, 2 lam): frequency map
    xi1 = a + lam^{-1/2} K^{-1/2} eta1, xi2 = K^{-1/3} eta2, density weight
    lam^{-1/2} K^{-5/6}, space matrix mapping x to the evaluation point, and
    the unit-scale phase (3 a / lam) eta1^2 + lam^{-3/2} K^{-1/2} eta1^3 on
    the first axis with eta2^3 (signed) on the second.

    Returns (transform, rmap) where transform maps the ambient density g to
    the transported one and rmap.new_phase is the unit-scale surface.
    """
    if tau.kind != "surface":
        raise PreconditionError("expected a slab from a surface cover")
    if tau.lam is None or abs(tau.lam - lam) > 1e-12 or abs(tau.scale_k - scale_k) > 1e-12:
        raise PreconditionError(
            f"slab built at (lam={tau.lam}, K={tau.scale_k}) does not match "
            f"(lam={lam}, K={scale_k})"
        )
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    w = lam ** (-0.5) * scale_k ** (-0.5)
    h = scale_k ** (-1.0 / 3.0)
    a = tau.anchor[0]
    quad = 3.0 * a / lam
    cubic = lam ** (-1.5) * scale_k ** (-0.5)
    phase1 = Phase1D((0.0, 0.0, quad, cubic), (0.0, 1.0))
    phase2 = monomial_phase(3, (0.0, 1.0))
    gamma = SurfaceSpec(phase1, phase2, sign, ((0.0, 1.0), (0.0, 1.0)))
    space = np.array(
        [
            [w, 0.0, 3.0 * a**2 * w],
            [0.0, h, 0.0],
            [0.0, 0.0, 1.0 / scale_k],
        ]
    )
    weight = w * h
    rmap = RescalingMap((w, h), (a, tau.anchor[1]), space, weight, gamma)
    (f1, f2) = tau.footprint()

    def transform(g: Density) -> Density:
        def func(e1, e2):
            return weight * g.func(a + w * np.asarray(e1), tau.anchor[1] + h * np.asarray(e2))

        dom = ((0.0, (f1[1] - f1[0]) / w), (0.0, (f2[1] - f2[0]) / h))
        return Density(dom, func, weight * g.sup_bound, label=g.label)

    return transform, rmap


def rescale_mixed_slab(tau: Slab, scale_k: float, phi1: Phase1D, phi2: Phase1D):
    """Unit-scale change of variables for a slab of the two-phase strip.

    phi1 must be of finite type 2 and phi2 of finite type 3; the slab sides
    are K^{-1/2} x K^{-1/3}.  At the origin anchor the new phases are
    K phi1(K^{-1/2} .) and K phi2(K^{-1/3} .), the density weight K^{-5/6},
    and the space map diag(K^{-1/2}, K^{-1/3}, K^{-1}); a nonzero anchor on
    the first axis adds the absorbed linear term to the space matrix.
    """
    if tau.kind != "mixed":
        raise PreconditionError("expected a slab from a mixed cover")
    if abs(tau.scale_k - scale_k) > 1e-12:
        raise PreconditionError(
            f"slab built at K={tau.scale_k} does not match K={scale_k}"
        )
    if classify_finite_type(phi1) != 2:
        raise PreconditionError("first phase must be of finite type 2")
    if classify_finite_type(phi2) != 3:
        raise PreconditionError("second phase must be of finite type 3")
    w1 = scale_k ** (-0.5)
    w2 = scale_k ** (-1.0 / 3.0)
    a1 = tau.anchor[0]
    if abs(tau.anchor[1]) > 1e-12:
        raise PreconditionError("mixed slabs sit on the degenerate strip's bottom row")
    if a1 == 0.0:
        phase1 = finite_type_closure_rescale(phi1, 2, scale_k)
        lin1 = 0.0
    else:
        # Taylor recentering at the anchor; constant/linear parts absorbed.
        d = phi1.degree
        c = np.asarray(phi1.coeffs)
        recentered = np.zeros(d + 1)
        for m in range(d + 1):
            recentered[m] = sum(
                c[k] * math.comb(k, m) * a1 ** (k - m) for k in range(m, d + 1)
            )
        coeffs = np.zeros(d + 1)
        for m in range(2, d + 1):
            coeffs[m] = scale_k * w1**m * recentered[m]
        phase1 = Phase1D(tuple(coeffs), (0.0, 1.0))
        lin1 = float(phi1(a1, 1))
    phase2 = finite_type_closure_rescale(phi2, 3, scale_k)
    gamma = SurfaceSpec(phase1, phase2, 1, ((0.0, 1.0), (0.0, 1.0)))
    space = np.array(
        [
            [w1, 0.0, w1 * lin1],
            [0.0, w2, 0.0],
            [0.0, 0.0, 1.0 / scale_k],
        ]
    )
    weight = w1 * w2
    rmap = RescalingMap((w1, w2), (a1, 0.0), space, weight, gamma)
    (f1, f2) = tau.footprint()

    def transform(g: Density) -> Density:
        def func(e1, e2):
            return weight * g.func(a1 + w1 * np.asarray(e1), w2 * np.asarray(e2))

        dom = ((0.0, (f1[1] - f1[0]) / w1), (0.0, (f2[1] - f2[0]) / w2))
        return Density(dom, func, weight * g.sup_bound, label=g.label)

    return transform, rmap


# ---------------------------------------------------------------------------
# Reduction of the lattice dispersion surface to finite-type pieces


@dataclass(frozen=True)
class SymbolPiece:
    """One tile of the negated dispersion symbol, reduced to a model phase.

    On the tile, -omega restricted to the window centered at ``center``
    equals amplitude * base(u) + linear * u + constant with u the offset
    from the center and base one of the two model phases; ``order`` is the
    finite-type certificate of the signed amplitude * base phase.
    """

    window: tuple
    center: float
    local_interval: tuple
    tag: str
    amplitude: float
    linear: float
    constant: float
    order: int

    def phase(self) -> Phase1D:
        base = phase_from_tag(self.tag, (-math.pi / 4, math.pi / 4))
        sign = 1 if self.amplitude > 0 else -1
        return apply_scaling(base, PhaseScaling(sign, abs(self.amplitude), 1.0))

    def curve(self) -> CurveSpec:
        return CurveSpec(self.phase(), self.local_interval)


def _symbol_pieces_1d() -> list[SymbolPiece]:
    # -omega(xi) = 2 cos(xi) - 2; windows of quarter length pi/2 centered at
    # multiples of pi/2 reduce to +-2 cos(u) or +-2 sin(u); splitting each
    # window at its center yields 8 tiles covering the torus.
    pieces = []
    specs = [
        (-math.pi, "cos-minus-one", -2.0, 0.0, -4.0),
        (-math.pi / 2, "sin-minus-linear", 2.0, 2.0, -2.0),
        (0.0, "cos-minus-one", 2.0, 0.0, 0.0),
        (math.pi / 2, "sin-minus-linear", -2.0, -2.0, -2.0),
    ]
    for center, tag, amp, lin, const in specs:
        order = 2 if tag == "cos-minus-one" else 3
        for half in ((-math.pi / 4, 0.0), (0.0, math.pi / 4)):
            window = (center + half[0], center + half[1])
            pieces.append(
                SymbolPiece(window, center, half, tag, amp, lin, const, order)
            )
    return pieces


@dataclass(frozen=True)
class SymbolSurfacePiece:
    """Tensor tile for d = 2 with its per-axis reductions."""

    axis1: SymbolPiece
    axis2: SymbolPiece

    @property
    def orders(self) -> tuple:
        return (self.axis1.order, self.axis2.order)

    @property
    def family(self) -> str:
        pair = tuple(sorted(self.orders))
        return {(3, 3): "type33", (2, 3): "type23", (2, 2): "type22"}[pair]

    def surface(self) -> SurfaceSpec:
        dom = (self.axis1.local_interval, self.axis2.local_interval)
        return SurfaceSpec(self.axis1.phase(), self.axis2.phase(), 1, dom)


def reduce_lattice_symbol(d: int):
    """Finite-type pieces of the graph of the negated dispersion symbol.

    d = 1 returns 8 curve tiles (two phase classes, orders 3 and 2); d = 2
    returns the 64 tensor tiles grouped into the three class families,
    including the mixed type (2, 3) case.
    """
    if d == 1:
        return _symbol_pieces_1d()
    if d == 2:
        pieces = _symbol_pieces_1d()
        return [SymbolSurfacePiece(p1, p2) for p1 in pieces for p2 in pieces]
    raise DomainError(f"d must be 1 or 2, got {d}")


# ---------------------------------------------------------------------------
# Intertwining checks (shared by tests and the CLI rescale experiment)


def _halton(n: int, dim: int, seed: int) -> np.ndarray:
    from scipy.stats import qmc

    return qmc.Halton(d=dim, scramble=True, seed=seed).random(n)


def verify_curve_intertwining(
    phi: Phase1D,
    lam: float,
    f: Density,
    n_points: int = 50,
    radius: float = 100.0,
    seed: int = 2024,
    plan: QuadraturePlan = DEFAULT_PLAN,
) -> float:
    """Max relative gap of |E f(y)| vs |E^gamma f~(L y)| at seeded points."""
    f_new, gamma, rmap = rescale_curve(lam, f, phi)
    pts = (2.0 * _halton(n_points, 2, seed) - 1.0) * radius
    curve = CurveSpec(phi, (lam, 2 * lam))
    unit = CurveSpec(gamma, (0.0, 1.0))
    lhs = np.abs(extend_curve_batch(curve, f, pts, plan))
    mapped = pts @ rmap.space_map.T
    rhs = np.abs(extend_curve_batch(unit, f_new, mapped, plan))
    scale = np.maximum(np.maximum(lhs, rhs), 1e-14)
    return float(np.max(np.abs(lhs - rhs) / scale))


def verify_surface_intertwining(
    tau: Slab,
    lam: float,
    scale_k: float,
    sign: int,
    g: Density,
    n_points: int = 30,
    radius: float = 20.0,
    seed: int = 2024,
    plan: QuadraturePlan = DEFAULT_PLAN,
) -> float:
    transform, rmap = rescale_surface_slab(tau, lam, scale_k, sign)
    surface = SurfaceSpec(
        monomial_phase(3, (0.0, 1.0)),
        monomial_phase(3, (0.0, 1.0)),
        sign,
        ((0.0, 1.0), (0.0, 1.0)),
    )
    g_slab = g.restricted(tau.footprint())
    g_new = transform(g)
    pts = (2.0 * _halton(n_points, 3, seed) - 1.0) * radius
    lhs = np.abs(extend_surface_batch(surface, g_slab, pts, plan))
    mapped = pts @ rmap.space_map.T
    rhs = np.abs(extend_surface_batch(rmap.new_phase, g_new, mapped, plan))
    scale = np.maximum(np.maximum(lhs, rhs), 1e-14)
    return float(np.max(np.abs(lhs - rhs) / scale))


def verify_mixed_intertwining(
    tau: Slab,
    scale_k: float,
    phi1: Phase1D,
    phi2: Phase1D,
    g: Density,
    n_points: int = 30,
    radius: float = 20.0,
    seed: int = 2024,
    plan: QuadraturePlan = DEFAULT_PLAN,
) -> float:
    transform, rmap = rescale_mixed_slab(tau, scale_k, phi1, phi2)
    surface = SurfaceSpec(phi1, phi2, 1, ((0.0, 1.0), (0.0, 1.0)))
    g_slab = g.restricted(tau.footprint())
    g_new = transform(g)
    pts = (2.0 * _halton(n_points, 3, seed) - 1.0) * radius
    lhs = np.abs(extend_surface_batch(surface, g_slab, pts, plan))
    mapped = pts @ rmap.space_map.T
    rhs = np.abs(extend_surface_batch(rmap.new_phase, g_new, mapped, plan))
    scale = np.maximum(np.maximum(lhs, rhs), 1e-14)
    return float(np.max(np.abs(lhs - rhs) / scale))
