"""Finite-type phase functions and the scale decompositions they induce.

A phase here is a smooth function on a subinterval of [-1, 1] vanishing to
first order at 0.  Its *type* is the order of the first non-vanishing
derivative at 0; type 2 means non-degenerate curvature, type 3 is the
degenerate regime this package is built around.  The module provides the
classification, the normalizations and scale changes that keep the type
stable, and the dyadic region / slab decompositions of the parameter square
used by the decoupling and restriction experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, PreconditionError

__all__ = [
    "Phase1D",
    "CurveSpec",
    "SurfaceSpec",
    "Region",
    "Slab",
    "RescalingMap",
    "PhaseScaling",
    "classify_finite_type",
    "normalize_phase",
    "apply_scaling",
    "rescale_taylor",
    "finite_type_closure_rescale",
    "decompose_square",
    "decompose_interval",
    "decompose_mixed_square",
    "slab_cover",
    "phase_from_tag",
    "monomial_phase",
    "save_phase_corpus",
    "load_phase_corpus",
    "standard_phase_corpus",
]

DEFAULT_DEGREE = 12
ZERO_DERIV_TOL = 1e-9

# Closed forms available by tag: derivative tables up to order 5.
_CLOSED_FORMS: dict[str, Callable] = {}


def _cubic(t, order):
    t = np.asarray(t, dtype=float)
    table = [t**3, 3.0 * t**2, 6.0 * t, 6.0 * np.ones_like(t)]
    return table[order] if order < 4 else np.zeros_like(t)


def _quartic(t, order):
    t = np.asarray(t, dtype=float)
    table = [t**4, 4.0 * t**3, 12.0 * t**2, 24.0 * t, 24.0 * np.ones_like(t)]
    return table[order] if order < 5 else np.zeros_like(t)


def _sin_minus_linear(t, order):
    t = np.asarray(t, dtype=float)
    cycle = [np.sin, np.cos, lambda s: -np.sin(s), lambda s: -np.cos(s)]
    out = cycle[order % 4](t)
    if order == 0:
        out = out - t
    elif order == 1:
        out = out - 1.0
    return out


def _cos_minus_one(t, order):
    t = np.asarray(t, dtype=float)
    cycle = [np.cos, lambda s: -np.sin(s), lambda s: -np.cos(s), np.sin]
    out = cycle[order % 4](t)
    if order == 0:
        out = out - 1.0
    return out


_CLOSED_FORMS["cubic"] = _cubic
_CLOSED_FORMS["quartic"] = _quartic
_CLOSED_FORMS["sin-minus-linear"] = _sin_minus_linear
_CLOSED_FORMS["cos-minus-one"] = _cos_minus_one


def _tag_taylor(tag: str, degree: int) -> np.ndarray:
    c = np.zeros(degree + 1)
    if tag == "cubic":
        c[3] = 1.0
    elif tag == "quartic":
        c[4] = 1.0
    elif tag == "sin-minus-linear":
        for k in range(3, degree + 1, 2):
            c[k] = (-1.0) ** ((k - 1) // 2) / math.factorial(k)
    elif tag == "cos-minus-one":
        for k in range(2, degree + 1, 2):
            c[k] = (-1.0) ** (k // 2) / math.factorial(k)
    else:
        raise DomainError(f"unknown closed-form tag {tag!r}")
    return c


@dataclass(frozen=True)
class ClosedForm:
    """Closed-form evaluator a * base(b * t), with exact derivatives."""

    tag: str
    outer: float = 1.0
    inner: float = 1.0

    def __call__(self, t, order: int = 0):
        base = _CLOSED_FORMS[self.tag]
        return self.outer * self.inner**order * base(self.inner * np.asarray(t), order)

    def rescaled(self, outer: float, inner: float) -> "ClosedForm":
        return ClosedForm(self.tag, self.outer * outer, self.inner * inner)


@dataclass(frozen=True)
class Phase1D:
    """Phase on an interval of [-1, 1], given by Maclaurin data.

    ``coeffs[k]`` multiplies t^k; the first two entries are zero by
    construction.  When ``closed`` is present it is used for evaluation and
    must agree with the truncated series on the domain (checked in tests,
    not at every call).
    """

    coeffs: tuple
    domain: tuple = (-1.0, 1.0)
    closed: Optional[ClosedForm] = None

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.size < 3:
            raise DomainError("phase needs Maclaurin data up to degree >= 2")
        if abs(c[0]) > ZERO_DERIV_TOL or abs(c[1]) > ZERO_DERIV_TOL:
            raise DomainError("phase must vanish to first order at 0")
        lo, hi = self.domain
        if not (-1.0 - 1e-12 <= lo < hi <= 1.0 + 1e-12):
            raise DomainError(f"phase domain {self.domain} must sit inside [-1, 1]")
        object.__setattr__(self, "coeffs", tuple(float(x) for x in c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, t, order: int = 0):
        if self.closed is not None:
            return self.closed(t, order)
        return self.taylor_eval(t, order)

    def taylor_eval(self, t, order: int = 0):
        c = np.asarray(self.coeffs)
        if order > 0:
            c = np.polynomial.polynomial.polyder(c, order)
        return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), c)

    def derivative_at_zero(self, order: int) -> float:
        if order > self.degree:
            return 0.0
        return self.coeffs[order] * math.factorial(order)

    def sup_derivative(self, samples: int = 512) -> float:
        """Crude upper estimate of sup |phi'| on the domain (for panel rules)."""
        t = np.linspace(self.domain[0], self.domain[1], samples)
        return 1.2 * float(np.max(np.abs(self(t, 1)))) + 1e-12


def monomial_phase(n: int, domain=(-1.0, 1.0), degree: int = DEFAULT_DEGREE) -> Phase1D:
    c = np.zeros(degree + 1)
    c[n] = 1.0
    tag = {3: "cubic", 4: "quartic"}.get(n)
    closed = ClosedForm(tag) if tag else None
    return Phase1D(tuple(c), domain, closed)


def phase_from_tag(tag: str, domain=(-1.0, 1.0), degree: int = DEFAULT_DEGREE) -> Phase1D:
    return Phase1D(tuple(_tag_taylor(tag, degree)), domain, ClosedForm(tag))


@dataclass(frozen=True)
class CurveSpec:
    """Parametrized plane curve t -> (t, phase(t)) over ``domain``."""

    phase: Phase1D
    domain: tuple

    def __post_init__(self):
        lo, hi = self.domain
        plo, phi_ = self.phase.domain
        if lo < plo - 1e-12 or hi > phi_ + 1e-12:
            raise DomainError("curve domain must sit inside the phase domain")


@dataclass(frozen=True)
class SurfaceSpec:
    """Graph surface (x1, x2, phase1(x1) + sign * phase2(x2)) over a rectangle."""

    phase1: Phase1D
    phase2: Phase1D
    sign: int = 1
    domain: tuple = ((0.0, 1.0), (0.0, 1.0))

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise DomainError("sign must be +1 or -1")

    def height(self, x1, x2):
        return self.phase1(x1) + self.sign * self.phase2(x2)


@dataclass(frozen=True)
class Region:
    """Axis-aligned piece of the parameter square (or interval).

    ``rect`` is ((u1, u2), (v1, v2)) with the second pair None for interval
    regions.  Labels record the role: 'interior' / 'corner' for the square
    pieces away from / near both degenerate axes, 'dyadic_x1' / 'dyadic_x2'
    for the dyadic strips along one axis, 'mixed_interior' / 'mixed_strip'
    for the two-phase square, and 'center' / 'dyadic_pos' / 'dyadic_neg' for
    interval decompositions.
    """

    rect: tuple
    label: str
    scale_k: float
    lam: Optional[float] = None
    clamped: bool = False

    def __post_init__(self):
        (u1, u2), second = self.rect
        if not u1 < u2:
            raise DomainError("region must be nonempty")
        if second is not None and not second[0] < second[1]:
            raise DomainError("region must be nonempty")

    @property
    def is_interval(self) -> bool:
        return self.rect[1] is None

    def measure(self) -> float:
        (u1, u2), second = self.rect
        m = u2 - u1
        if second is not None:
            m *= second[1] - second[0]
        return m


@dataclass(frozen=True)
class Slab:
    """Anisotropic frequency rectangle adapted to a curve/surface at scale K.

    ``anchor`` and ``sides`` describe the parameter footprint; for curve
    slabs the footprint is 1D and ``sides[1]`` records the K^{-1}
    neighborhood thickness instead.
    """

    anchor: tuple
    sides: tuple
    lam: Optional[float]
    scale_k: float
    kind: str
    clamped: bool = False

    def __post_init__(self):
        if any(s <= 0 for s in self.sides):
            raise DomainError("slab side lengths must be positive")

    def footprint(self) -> tuple:
        """Parameter-space footprint: (lo, hi) or ((lo1, hi1), (lo2, hi2))."""
        if self.kind == "curve":
            return (self.anchor[0], self.anchor[0] + self.sides[0])
        return (
            (self.anchor[0], self.anchor[0] + self.sides[0]),
            (self.anchor[1], self.anchor[1] + self.sides[1]),
        )


@dataclass(frozen=True)
class RescalingMap:
    """Change of variables intertwining two extension operators.

    ``freq_scale`` / ``freq_shift`` give the parameter map xi = s * eta + b
    (per axis); ``space_map`` is the invertible matrix acting on the
    evaluation variables; ``weight`` multiplies the transported density.
    """

    freq_scale: tuple
    freq_shift: tuple
    space_map: np.ndarray
    weight: float
    new_phase: object

    def __post_init__(self):
        m = np.asarray(self.space_map, dtype=float)
        if abs(np.linalg.det(m)) < 1e-300:
            raise DomainError("space map must be invertible")
        object.__setattr__(self, "space_map", m)

    def map_point(self, y) -> np.ndarray:
        return self.space_map @ np.asarray(y, dtype=float)

    def map_parameters(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        return np.asarray(self.freq_scale) * eta + np.asarray(self.freq_shift)


def classify_finite_type(
    phi: Phase1D, max_order: Optional[int] = None, tol: float = ZERO_DERIV_TOL
) -> Optional[int]:
    """Order of the first non-vanishing derivative at 0, or None.

    Returns the smallest n >= 2 with |phi^(n)(0)| > tol while every lower
    derivative stays below tol; derivatives of order 0 and 1 vanish by the
    phase invariant.  ``max_order`` defaults to min(6, stored degree).
    """
    if max_order is None:
        max_order = min(6, phi.degree)
    if max_order > phi.degree:
        raise PreconditionError(
            f"max_order {max_order} exceeds stored Maclaurin degree {phi.degree}"
        )
    for n in range(2, max_order + 1):
        if abs(phi.derivative_at_zero(n)) > tol:
            return n
    return None


@dataclass(frozen=True)
class PhaseScaling:
    """Record of phi~ = sign * amplitude * phi(argument * t)."""

    sign: int
    amplitude: float
    argument: float = 1.0

    def inverse(self) -> "PhaseScaling":
        return PhaseScaling(self.sign, 1.0 / self.amplitude, 1.0 / self.argument)


def apply_scaling(phi: Phase1D, scaling: PhaseScaling) -> Phase1D:
    s = scaling.sign * scaling.amplitude
    b = scaling.argument
    coeffs = tuple(s * c * b**k for k, c in enumerate(phi.coeffs))
    lo, hi = phi.domain
    dom = (max(-1.0, min(lo, hi) / b if b != 0 else lo), min(1.0, max(lo, hi) / b))
    closed = phi.closed.rescaled(s, b) if phi.closed is not None else None
    return Phase1D(coeffs, (max(-1.0, dom[0]), min(1.0, dom[1])), closed)


def normalize_phase(phi: Phase1D, n: int) -> tuple[Phase1D, PhaseScaling]:
    """Rescale so the n-th derivative at 0 falls in [1/2, 2].

    Flips the sign when phi^(n)(0) < 0 and divides by |phi^(n)(0)| when it
    lies outside [1/2, 2] (landing exactly at 1); the returned record undoes
    the change.  The finite-type order is untouched.
    """
    if classify_finite_type(phi, min(max(n, 6), phi.degree)) != n:
        raise PreconditionError(f"phase is not of finite type {n}")
    deriv = phi.derivative_at_zero(n)
    sign = 1 if deriv > 0 else -1
    mag = abs(deriv)
    amplitude = 1.0 if 0.5 <= mag <= 2.0 else 1.0 / mag
    scaling = PhaseScaling(sign, amplitude, 1.0)
    return apply_scaling(phi, scaling), scaling


def rescale_taylor(phi: Phase1D, lam: float) -> np.ndarray:
    """Maclaurin data of lam^{-3} phi(lam u + lam), linear term included.

    Returns r with r[m-1] the coefficient of u^m for m = 1..D.  For a phase
    with cubic coefficient a3 and small tail these are a3 * C(3, m) plus a
    tail shrinking like lam^{k-3}.
    """
    if not 0.0 < lam <= 0.5:
        raise DomainError(f"lam must lie in (0, 1/2], got {lam}")
    if classify_finite_type(phi) != 3:
        raise PreconditionError("rescale_taylor expects a phase of finite type 3")
    d = phi.degree
    c = np.asarray(phi.coeffs)
    r = np.zeros(d)
    for m in range(1, d + 1):
        total = c[3] * math.comb(3, m) if m <= 3 else 0.0
        for k in range(4, d + 1):
            total += lam ** (k - 3) * c[k] * math.comb(k, m)
        r[m - 1] = total
    return r


def rescaled_phase_polynomial(r: np.ndarray, domain=(0.0, 1.0)) -> Phase1D:
    """Phase gamma(u) = sum_{m>=2} R_m u^m built from rescale_taylor output."""
    coeffs = np.zeros(len(r) + 1)
    coeffs[2:] = r[1:]
    return Phase1D(tuple(coeffs), domain)


def finite_type_closure_rescale(phi: Phase1D, n: int, scale_k: float) -> Phase1D:
    """The zoomed phase K * phi(K^{-1/n} eta); same finite type.

    Fixed point on the pure monomial t^n; tail coefficients contract by
    K^{1 - k/n} < 1 for k > n.
    """
    if classify_finite_type(phi, min(max(n, 6), phi.degree)) != n:
        raise PreconditionError(f"phase is not of finite type {n}")
    b = scale_k ** (-1.0 / n)
    coeffs = tuple(scale_k * c * b**k for k, c in enumerate(phi.coeffs))
    closed = phi.closed.rescaled(scale_k, b) if phi.closed is not None else None
    lo, hi = phi.domain
    dom = (max(-1.0, lo / b), min(1.0, hi / b))
    return Phase1D(coeffs, dom, closed)


def _dyadic_scales(scale_k: float) -> list[float]:
    c = scale_k ** (-1.0 / 3.0)
    j_max = math.floor(math.log2(scale_k) / 3.0 + 1e-12)
    return [2 ** (j - 1) * c for j in range(1, j_max + 1)]


def decompose_square(scale_k: float) -> list[Region]:
    """Split [0,1]^2 by distance to the two degenerate axes at scale K.

    Pieces: the interior square [K^{-1/3}, 1]^2, the corner [0, K^{-1/3}]^2,
    and dyadic strips [lam, 2 lam] x [0, K^{-1/3}] (and the transpose) with
    lam = 2^{j-1} K^{-1/3}.  When K is not a power of 8 the outermost strip
    is clamped so the union is exactly the square.
    """
    if scale_k < 8:
        raise DomainError(f"K must be >= 8, got {scale_k}")
    c = scale_k ** (-1.0 / 3.0)
    regions = [
        Region(((c, 1.0), (c, 1.0)), "interior", scale_k),
        Region(((0.0, c), (0.0, c)), "corner", scale_k),
    ]
    scales = _dyadic_scales(scale_k)
    for i, lam in enumerate(scales):
        hi = 2 * lam
        clamped = i == len(scales) - 1 and hi < 1.0 - 1e-12
        if clamped:
            hi = 1.0
        regions.append(Region(((lam, hi), (0.0, c)), "dyadic_x1", scale_k, lam, clamped))
        regions.append(Region(((0.0, c), (lam, hi)), "dyadic_x2", scale_k, lam, clamped))
    return regions


def decompose_interval(scale_k: float) -> list[Region]:
    """Split [-1,1] into the center [-K^{-1/3}, K^{-1/3}] and dyadic pieces."""
    if scale_k < 8:
        raise DomainError(f"K must be >= 8, got {scale_k}")
    c = scale_k ** (-1.0 / 3.0)
    regions = [Region(((-c, c), None), "center", scale_k)]
    scales = _dyadic_scales(scale_k)
    for i, lam in enumerate(scales):
        hi = 2 * lam
        clamped = i == len(scales) - 1 and hi < 1.0 - 1e-12
        if clamped:
            hi = 1.0
        regions.append(Region(((lam, hi), None), "dyadic_pos", scale_k, lam, clamped))
        regions.append(Region(((-hi, -lam), None), "dyadic_neg", scale_k, lam, clamped))
    return regions


def decompose_mixed_square(scale_k: float) -> list[Region]:
    """Split [0,1]^2 for a type-2 x type-3 pair: strip near the degenerate axis.

    The second factor degenerates at x2 = 0 only, so the pieces are
    [0,1] x [K^{-1/3}, 1] (non-degenerate) and the strip [0,1] x [0, K^{-1/3}].
    """
    if scale_k < 8:
        raise DomainError(f"K must be >= 8, got {scale_k}")
    c = scale_k ** (-1.0 / 3.0)
    return [
        Region(((0.0, 1.0), (c, 1.0)), "mixed_interior", scale_k),
        Region(((0.0, 1.0), (0.0, c)), "mixed_strip", scale_k),
    ]


def _tile(lo: float, hi: float, width: float) -> list[tuple[float, float, bool]]:
    count = max(1, math.ceil((hi - lo) / width - 1e-9))
    out = []
    for i in range(count):
        a = lo + i * width
        b = min(a + width, hi)
        out.append((a, b, b == hi and (hi - a) < width - 1e-12))
    return out


def slab_cover(region: Region, scale_k: float, kind: str) -> list[Slab]:
    """Tile a dyadic region with slabs of the scale-adapted side lengths.

    kind 'curve':   width lam^{-1/2} K^{-1/2} along the parameter interval
                    (K^{-1} neighborhood thickness recorded);
    kind 'surface': lam^{-1/2} K^{-1/2} x K^{-1/3} over the dyadic strip;
    kind 'mixed':   K^{-1/2} x K^{-1/3} over the two-phase strip.
    Adjacent slabs share boundaries only; a trailing slab is clamped to the
    region when the widths do not divide evenly.
    """
    if abs(region.scale_k - scale_k) > 1e-12:
        raise PreconditionError(
            f"region built at K={region.scale_k} but cover requested at K={scale_k}"
        )
    if kind == "curve":
        if region.lam is None or not region.is_interval:
            raise PreconditionError("curve slabs need a dyadic interval region")
        lam = region.lam
        width = lam ** (-0.5) * scale_k ** (-0.5)
        lo, hi = region.rect[0]
        return [
            Slab((a,), (b - a, 1.0 / scale_k), lam, scale_k, "curve", cl)
            for a, b, cl in _tile(lo, hi, width)
        ]
    if kind == "surface":
        if region.lam is None or region.is_interval:
            raise PreconditionError("surface slabs need a dyadic strip region")
        lam = region.lam
        w1 = lam ** (-0.5) * scale_k ** (-0.5)
        w2 = scale_k ** (-1.0 / 3.0)
    elif kind == "mixed":
        if region.label != "mixed_strip":
            raise PreconditionError("mixed slabs tile the two-phase strip region")
        lam = None
        w1 = scale_k ** (-0.5)
        w2 = scale_k ** (-1.0 / 3.0)
    else:
        raise DomainError(f"unknown slab kind {kind!r}")
    (lo1, hi1), (lo2, hi2) = region.rect
    slabs = []
    for a1, b1, cl1 in _tile(lo1, hi1, w1):
        for a2, b2, cl2 in _tile(lo2, hi2, w2):
            slabs.append(
                Slab((a1, a2), (b1 - a1, b2 - a2), lam, scale_k, kind, cl1 or cl2)
            )
    return slabs


# ---------------------------------------------------------------------------
# Phase corpus files: one record per line, "name|tag|c0 c1 ...|lo hi".

def save_phase_corpus(path, phases: dict[str, Phase1D]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# ftrlab phase corpus v1\n")
        for name, phi in phases.items():
            tag = phi.closed.tag if phi.closed is not None else "-"
            coeffs = " ".join(repr(c) for c in phi.coeffs)
            fh.write(f"{name}|{tag}|{coeffs}|{phi.domain[0]} {phi.domain[1]}\n")


def load_phase_corpus(path) -> dict[str, Phase1D]:
    phases = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("|")
            if len(parts) != 4:
                raise DomainError(f"{path}:{line_no}: expected 4 '|'-separated fields")
            name, tag, coeffs_s, dom_s = parts
            coeffs = tuple(float(x) for x in coeffs_s.split())
            lo, hi = (float(x) for x in dom_s.split())
            closed = ClosedForm(tag) if tag != "-" else None
            phases[name] = Phase1D(coeffs, (lo, hi), closed)
    return phases


def standard_phase_corpus(count: int = 20, seed: int = 7) -> dict[str, Phase1D]:
    """Named reference phases plus seeded small-tail perturbations.

    Every member has a definite finite type in {2, 3, 4} with tails small
    enough that classification and the scale-closure property are stable.
    """
    rng = np.random.default_rng(seed)
    corpus: dict[str, Phase1D] = {
        "cubic": monomial_phase(3),
        "quartic": monomial_phase(4),
        "square": monomial_phase(2),
        "sin-minus-linear": phase_from_tag("sin-minus-linear"),
        "cos-minus-one": phase_from_tag("cos-minus-one"),
    }
    i = 0
    while len(corpus) < count:
        i += 1
        n = int(rng.integers(2, 5))
        coeffs = np.zeros(DEFAULT_DEGREE + 1)
        coeffs[n] = rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])
        for k in range(n + 1, DEFAULT_DEGREE + 1):
            coeffs[k] = rng.uniform(-1.0, 1.0) * 1e-3 / math.factorial(k - n)
        corpus[f"perturbed-{n}-{i}"] = Phase1D(tuple(coeffs))
    return corpus
