"""Batch experiment runner (the ``ftrlab`` console script).

Configs are flat ``key = value`` text files with one ``[experiment-id]``
section per experiment; unknown keys are rejected with the nearest valid
name.  Every run is deterministic given (config, seed): outputs are CSV
files with a ``# schema=1`` header line plus a JSON manifest echoing the
resolved configuration and the per-file checksums.

Exit codes: 0 success, 1 invalid config, 2 precondition/resolution error,
3 inconclusive result (e.g. a scattering tail that is still too large).
"""

from __future__ import annotations

import argparse
import difflib
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .errors import DomainError, PreconditionError, ResolutionError

SCHEMA_LINE = "# schema=1"


# ---------------------------------------------------------------------------
# Config parsing


class ConfigError(Exception):
    pass


def _parse_scalar(raw: str, kind: str, path: str, line_no: int):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            if raw == "inf":
                return math.inf
            if "/" in raw:
                num, den = raw.split("/")
                return float(num) / float(den)
            return float(raw)
        if kind == "bool":
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if kind == "str":
            return raw
        if kind == "int-list":
            return [int(x) for x in raw.split(",") if x.strip()]
        if kind == "float-list":
            return [
                _parse_scalar(x, "float", path, line_no)
                for x in raw.split(",")
                if x.strip()
            ]
        if kind == "str-list":
            return [x.strip() for x in raw.split(",") if x.strip()]
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{path}:{line_no}: cannot parse {raw!r} as {kind}")
    raise ConfigError(f"{path}:{line_no}: unknown schema kind {kind}")


def parse_config(path: str) -> dict:
    """Sections of flat key = value pairs; remembers source line numbers."""
    sections: dict[str, dict] = {}
    current = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if stripped.startswith("[") and stripped.endswith("]"):
                current = stripped[1:-1].strip()
                if current in sections:
                    raise ConfigError(f"{path}:{line_no}: duplicate section [{current}]")
                sections[current] = {}
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
            if current is None:
                raise ConfigError(f"{path}:{line_no}: key outside any [section]")
            key, _, value = stripped.partition("=")
            key = key.strip()
            if key in sections[current]:
                raise ConfigError(f"{path}:{line_no}: duplicate key {key!r}")
            sections[current][key] = (value.strip(), line_no)
    return sections


def resolve_section(
    raw: dict, schema: dict, path: str, experiment: str
) -> dict:
    """Type-check one section against its schema, filling defaults."""
    resolved = {}
    for key, (value, line_no) in raw.items():
        if key not in schema:
            hint = difflib.get_close_matches(key, schema.keys(), n=1)
            suffix = f"; nearest valid key is {hint[0]!r}" if hint else ""
            raise ConfigError(
                f"{path}:{line_no}: unknown key {key!r} for {experiment}{suffix}"
            )
        kind, _ = schema[key]
        resolved[key] = _parse_scalar(value, kind, path, line_no)
    for key, (kind, default) in schema.items():
        if key not in resolved:
            if default is None:
                raise ConfigError(f"{path}: missing required key {key!r} ({kind})")
            resolved[key] = default
    return resolved


# ---------------------------------------------------------------------------
# Output helpers


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, complex):
        return f"{x.real!r}{x.imag:+}j"
    return str(x)


def write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(SCHEMA_LINE + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Experiment runners. Each returns (files, status) where files maps a CSV
# name to (header, rows) and status is 0 or 3 (inconclusive).


def _phase_by_name(name: str):
    from . import finitetype as ft

    if name in ("cubic", "quartic", "sin-minus-linear", "cos-minus-one"):
        return ft.phase_from_tag(name, degree=20)
    if name == "square":
        return ft.monomial_phase(2)
    raise DomainError(f"unknown phase {name!r}")


def _run_omega_table(cfg, seed, rng):
    from .lattice import symbol_omega

    d, n = cfg["d"], cfg["nodes"]
    xi = np.linspace(-math.pi, math.pi, n)
    rows = []
    if d == 1:
        for v in xi:
            rows.append([v, symbol_omega(v)])
        return {"results.csv": (["xi", "omega"], rows)}, 0
    for v1 in xi:
        for v2 in xi:
            rows.append([v1, v2, symbol_omega((v1, v2))])
    return {"results.csv": (["xi1", "xi2", "omega"], rows)}, 0


def _bessel_series(n: int, z: float, terms: int = 60) -> float:
    # power series sum_m (-1)^m (z/2)^{n+2m} / (m! (n+m)!)
    n = abs(n)
    if z == 0.0:
        return 1.0 if n == 0 else 0.0
    log_t0 = n * math.log(z / 2.0) - math.lgamma(n + 1)
    if log_t0 < -745.0:
        return 0.0
    term = math.exp(log_t0)
    total = term
    for m in range(1, terms):
        term *= -(z / 2.0) ** 2 / (m * (n + m))
        total += term
    return total


def _run_propagate(cfg, seed, rng):
    from .lattice import TorusGrid, delta_field, propagate

    d, n, m = cfg["d"], cfg["n"], cfg["m"]
    grid = TorusGrid(d, m)
    f = delta_field(d, n)
    rows = []
    for t in cfg["times"]:
        out = propagate(f, t, grid)
        coords = out.coordinates()
        if d == 1:
            for i, x in enumerate(coords):
                row = [t, int(x), out.values[i].real, out.values[i].imag]
                if cfg["compare_bessel"]:
                    exact = (
                        np.exp(-2j * t) * (1j ** int(x)) * _bessel_series(int(x), 2.0 * t)
                    )
                    row.append(abs(out.values[i] - exact))
                rows.append(row)
        else:
            for i, x1 in enumerate(coords):
                for j, x2 in enumerate(coords):
                    rows.append(
                        [t, int(x1), int(x2), out.values[i, j].real, out.values[i, j].imag]
                    )
    header = ["t", "x", "re", "im"] + (["bessel_abs_err"] if cfg["compare_bessel"] and d == 1 else [])
    if d == 2:
        header = ["t", "x1", "x2", "re", "im"]
    return {"results.csv": (header, rows)}, 0


def _run_extend(cfg, seed, rng):
    from .extension import Density, extend_curve_batch, extend_surface_batch
    from .finitetype import CurveSpec, SurfaceSpec, monomial_phase
    from scipy.stats import qmc

    kind = cfg["kind"]
    n_pts = cfg["points"]
    radius = cfg["radius"]
    if kind == "curve":
        phase = _phase_by_name(cfg["phase"])
        geom = CurveSpec(phase, (0.0, 1.0))
        g = Density.constant((0.0, 1.0))
        pts = (2.0 * qmc.Halton(2, scramble=True, seed=seed).random(n_pts) - 1.0) * radius
        vals = extend_curve_batch(geom, g, pts)
        header = ["y1", "y2", "re", "im", "abs"]
        rows = [[p[0], p[1], v.real, v.imag, abs(v)] for p, v in zip(pts, vals)]
    else:
        geom = SurfaceSpec(
            monomial_phase(3, (0.0, 1.0)),
            monomial_phase(3, (0.0, 1.0)),
            cfg["sign"],
            ((0.0, 1.0), (0.0, 1.0)),
        )
        g = Density.constant(((0.0, 1.0), (0.0, 1.0)))
        pts = (2.0 * qmc.Halton(3, scramble=True, seed=seed).random(n_pts) - 1.0) * radius
        vals = extend_surface_batch(geom, g, pts)
        header = ["x1", "x2", "x3", "re", "im", "abs"]
        rows = [[p[0], p[1], p[2], v.real, v.imag, abs(v)] for p, v in zip(pts, vals)]
    return {"results.csv": (header, rows)}, 0


def _run_rescale_check(cfg, seed, rng):
    from .extension import (
        Density,
        verify_curve_intertwining,
        verify_mixed_intertwining,
        verify_surface_intertwining,
    )
    from .finitetype import (
        decompose_mixed_square,
        decompose_square,
        normalize_phase,
        phase_from_tag,
        slab_cover,
    )

    rows = []
    kinds = cfg["kinds"]
    if "curve" in kinds:
        sin_phase, _ = normalize_phase(phase_from_tag("sin-minus-linear", degree=20), 3)
        for lam in cfg["lams"]:
            for name, phi in (("cubic", _phase_by_name("cubic")), ("sin-norm", sin_phase)):
                f = Density.constant((lam, 2 * lam), 1.0)
                gap = verify_curve_intertwining(
                    phi, lam, f, cfg["points"], cfg["radius"], seed
                )
                rows.append(["curve", name, lam, cfg["k"], 0, gap])
    if "surface" in kinds:
        k = cfg["k"]
        region = [r for r in decompose_square(k) if r.label == "dyadic_x1"][0]
        tau = slab_cover(region, k, "surface")[0]
        g = Density.constant(((0.0, 1.0), (0.0, 1.0)))
        for sign in (1, -1):
            gap = verify_surface_intertwining(
                tau, region.lam, k, sign, g, cfg["points"], 20.0, seed
            )
            rows.append(["surface", "cubic", region.lam, k, sign, gap])
    if "mixed" in kinds:
        k = cfg["k"]
        strip = decompose_mixed_square(k)[1]
        tau = slab_cover(strip, k, "mixed")[0]
        g = Density.constant(((0.0, 1.0), (0.0, 1.0)))
        phi1, _ = normalize_phase(phase_from_tag("cos-minus-one", degree=20), 2)
        phi2, _ = normalize_phase(phase_from_tag("sin-minus-linear", degree=20), 3)
        gap = verify_mixed_intertwining(tau, k, phi1, phi2, g, cfg["points"], 20.0, seed)
        rows.append(["mixed", "cos+sin-norm", 0.0, k, 0, gap])
    header = ["kind", "phase", "lam", "k", "sign", "max_rel_diff"]
    return {"results.csv": (header, rows)}, 0


def _run_decoupling_check(cfg, seed, rng):
    from .analysis import (
        decoupling_check,
        decoupling_geometry,
        decoupling_scan_case,
        fit_growth_exponent,
        measure_decoupling_over_balls,
        parallel_combine_check,
        random_slab_densities,
    )

    rows = []
    fit_rows = []
    parallel_rows = []
    for kind in cfg["kinds"]:
        geometry = decoupling_geometry(kind)
        for p in cfg["p_list"]:
            maxima = []
            for k in cfg["k_list"]:
                slabs, lam = decoupling_scan_case(kind, k, seed)
                worst = 0.0
                for draw in range(cfg["draws"]):
                    draw_rng = np.random.default_rng(
                        np.random.SeedSequence([seed, int(k), draw]).entropy % (2**32)
                    )
                    densities = random_slab_densities(slabs, draw_rng)
                    res = decoupling_check(
                        densities,
                        lam,
                        k,
                        p,
                        geometry,
                        samples=cfg["samples"],
                        seed=seed + draw,
                    )
                    bound = 4.0 * k**0.15
                    rows.append(
                        [kind, k, p, draw, len(slabs), res.lhs, res.rhs, res.ratio, bound, res.ratio <= bound]
                    )
                    worst = max(worst, res.ratio)
                maxima.append((k, worst))
            if len(maxima) >= 3:
                slope, intercept, resid = fit_growth_exponent(maxima)
                fit_rows.append([kind, p, slope, intercept, resid])
    if cfg["balls"] > 1:
        geometry = decoupling_geometry("curve")
        k = cfg["k_list"][-1]
        slabs, lam = decoupling_scan_case("curve", k, seed)
        densities = random_slab_densities(slabs, np.random.default_rng(seed))
        radius = k / 4.0
        centers = [(3.0 * radius * i, 0.0) for i in range(cfg["balls"])]
        per_ball, union = measure_decoupling_over_balls(
            densities, lam, k, cfg["p_list"][0], geometry, centers, radius,
            samples=cfg["samples"], seed=seed,
        )
        ok = parallel_combine_check(per_ball, union)
        for i, r in enumerate(per_ball):
            parallel_rows.append([i, r.lhs, r.rhs, r.ratio])
        parallel_rows.append(["union", union.lhs, union.rhs, union.ratio])
        parallel_rows.append(["holds", "", "", ok])
    files = {
        "results.csv": (
            ["kind", "k", "p", "draw", "n_slabs", "lhs", "rhs", "ratio", "bound", "within_bound"],
            rows,
        )
    }
    if fit_rows:
        files["growth.csv"] = (["kind", "p", "exponent", "intercept", "residual"], fit_rows)
    if parallel_rows:
        files["parallel.csv"] = (["ball", "lhs", "rhs", "ratio"], parallel_rows)
    return files, 0


def _run_restriction_scan(cfg, seed, rng):
    from .analysis import estimate_restriction_constant, fit_growth_exponent, restriction_families
    from .extension import DEFAULT_PLAN, FAST_PLAN
    from .finitetype import CurveSpec, SurfaceSpec, monomial_phase

    kind = cfg["kind"]
    plan = FAST_PLAN if cfg["fast"] else DEFAULT_PLAN
    if kind == "curve":
        geometry = CurveSpec(monomial_phase(3), (-1.0, 1.0))
    else:
        geometry = SurfaceSpec(
            monomial_phase(3, (0.0, 1.0)),
            monomial_phase(3, (0.0, 1.0)),
            cfg["sign"],
            ((0.0, 1.0), (0.0, 1.0)),
        )
    rows = []
    points = []
    for radius in cfg["radii"]:
        families = restriction_families(kind, radius, seed, cfg["sign_draws"])
        est = estimate_restriction_constant(
            geometry, cfg["p"], cfg["q"], radius, families,
            samples=cfg["samples"], seed=seed, plan=plan,
        )
        rows.append([radius, est.value, est.stderr, est.family, seed])
        points.append((radius, est.value))
    slope, intercept, resid = fit_growth_exponent(points)
    fit = [["fitted_exponent", slope, resid, "", seed]]
    return {
        "results.csv": (["radius", "qhat", "stderr", "family", "seed"], rows + fit)
    }, 0


def _run_equi_check(cfg, seed, rng):
    from .analysis import translation_average_check
    from .extension import Density

    rows = []
    case_rng = np.random.default_rng(seed)
    for case in range(cfg["cases"]):
        center = case_rng.uniform(-1.2, 1.2)
        width = case_rng.uniform(0.8, 2.0)
        amp = case_rng.uniform(0.5, 2.0)

        def bump(xi, c=center, w=width, a=amp):
            s = np.clip((np.asarray(xi) - c) / w, -1.0, 1.0)
            out = np.zeros_like(s)
            inside = np.abs(s) < 1.0
            out[inside] = a * np.exp(-1.0 / (1.0 - s[inside] ** 2))
            return out

        F = Density((-math.pi, math.pi), bump, amp * math.exp(-1.0), label=f"bump{case}")
        for p in cfg["p_list"]:
            res = translation_average_check(F, p, cfg["t_window"], cfg["n_window"])
            oracle_gap = ""
            if res.oracle is not None:
                oracle_gap = abs(res.continuum - res.oracle) / res.oracle
            rows.append([case, p, res.continuum, res.averaged, res.rel_gap, oracle_gap])
    header = ["case", "p", "continuum", "averaged", "rel_gap", "oracle_rel_gap"]
    return {"results.csv": (header, rows)}, 0


def _make_problem(cfg):
    from .dnls import DnlsProblem
    from .lattice import delta_field

    data = delta_field(cfg["d"], cfg.get("data_radius", 0))
    data = type(data)(data.dim, data.radius, data.values * cfg["data_scale"])
    return DnlsProblem(cfg["d"], cfg["alpha"], cfg["mu"], data, cfg["p"], cfg["q"])


def _run_dnls_solve(cfg, seed, rng):
    from .dnls import SolveConfig, picard_solve, splitstep_solve

    problem = _make_problem(cfg)
    config = SolveConfig(cfg["horizon"], cfg["steps"], cfg["tol"], cfg["max_iter"])
    path, log = picard_solve(problem, config)
    rows = []
    radius = min(cfg["write_radius"], path.window_radius())
    for n, t in enumerate(path.times):
        f = path.fields[n]
        for x in range(-radius, radius + 1):
            v = f.value_at(x) if problem.dim == 1 else f.value_at((x, 0))
            rows.append([float(t), x, v.real, v.imag])
    norm_rows = [
        [float(t), path.fields[n].l2_norm()] for n, t in enumerate(path.times)
    ]
    iter_rows = [[k, d] for k, d in enumerate(log.distances, 1)]
    iter_rows.append(["converged", log.converged])
    files = {
        "path.csv": (["t", "x", "re", "im"], rows),
        "results.csv": (["t", "l2"], norm_rows),
        "iterations.csv": (["iteration", "distance"], iter_rows),
    }
    if cfg["cross_validate"]:
        alt = splitstep_solve(problem, config)
        gap = max(
            float(np.linalg.norm(a.values - b.values))
            for a, b in zip(path.fields, alt.fields)
        )
        files["crosscheck.csv"] = (["sup_l2_gap"], [[gap]])
    return files, 0 if log.converged else 3


def _run_contraction(cfg, seed, rng):
    from .dnls import SolveConfig, contraction_report, picard_solve

    problem = _make_problem(cfg)
    config = SolveConfig(cfg["horizon"], cfg["steps"], cfg["tol"], cfg["max_iter"])
    ratios = contraction_report(problem, config, cfg["trials"], seed, cfg["eta"])
    _, log = picard_solve(problem, config)
    rows = [[k, r] for k, r in enumerate(ratios)]
    rows.append(["max", max(ratios)])
    iter_rows = [[k, d] for k, d in enumerate(log.distances, 1)]
    files = {
        "results.csv": (["trial", "ratio"], rows),
        "iterations.csv": (["iteration", "distance"], iter_rows),
    }
    return files, 0


def _run_scatter(cfg, seed, rng):
    from .dnls import SolveConfig, picard_solve, scattering_states

    problem = _make_problem(cfg)
    config = SolveConfig(cfg["horizon"], cfg["steps"], cfg["tol"], cfg["max_iter"])
    path, log = picard_solve(problem, config)
    report = scattering_states(path, problem, "+", cfg["tail_tol"])
    rows = [
        [t, dev, tail]
        for (t, dev), (_, tail) in zip(report.deviations, report.tail_bounds)
    ]
    files = {"results.csv": (["t", "deviation", "tail_bound"], rows)}
    status = 0 if (report.conclusive and log.converged) else 3
    return files, status


def _run_strichartz_scan(cfg, seed, rng):
    from .analysis import is_admissible, mixed_norm
    from .dnls import SolveConfig, picard_solve

    rows = []
    for d in cfg["d_list"]:
        for q in cfg["q_list"]:
            for r in cfg["r_list"]:
                rows.append([d, q, r, is_admissible(q, r, d)])
    files = {"results.csv": (["d", "q", "r", "admissible"], rows)}
    if cfg["measure"]:
        from .lattice import delta_field
        from .dnls import DnlsProblem

        measure_rows = []
        for d in cfg["d_list"]:
            data = delta_field(d, 0)
            problem = DnlsProblem(d, 8.0, 1, data, 8.0 if d == 1 else 4.0, 2.0)
            config = SolveConfig(cfg["horizon"], cfg["steps"], 1e-9, 8)
            path, _ = picard_solve(problem, config)
            for q in cfg["q_list"]:
                for r in cfg["r_list"]:
                    if is_admissible(q, r, d) and q != 2:
                        c = mixed_norm(path, q, r, (0.0, cfg["horizon"]))
                        measure_rows.append([d, q, r, c])
        files["constants.csv"] = (["d", "q", "r", "mixed_norm_delta"], measure_rows)
    return files, 0


def _run_decay_fit(cfg, seed, rng):
    from .dnls import decay_exponent

    band = None
    if cfg["band"] == "nondegenerate":
        band = (math.pi / 4.0, math.pi / 2.0)
    elif cfg["band"] != "none":
        flat, supp = (float(x) for x in cfg["band"].split(":"))
        band = (flat, supp)
    fit = decay_exponent(cfg["d"], (cfg["t_min"], cfg["t_max"]), band=band, n_samples=cfg["samples"])
    rows = [[t, s] for t, s in fit.samples]
    rows.append(["slope", fit.slope])
    rows.append(["residual", fit.residual])
    return {"results.csv": (["t", "sup_norm"], rows)}, 0


@dataclass(frozen=True)
class ExperimentSpec:
    schema: dict
    runner: Callable


_SOLVER_KEYS = {
    "d": ("int", 1),
    "alpha": ("float", 8.0),
    "mu": ("int", 1),
    "p": ("float", 8.0),
    "q": ("float", 2.0),
    "data_scale": ("float", 0.01),
    "horizon": ("float", 1.0),
    "steps": ("int", 64),
    "tol": ("float", 1e-10),
    "max_iter": ("int", 16),
}

EXPERIMENTS: dict[str, ExperimentSpec] = {
    "omega-table": ExperimentSpec({"d": ("int", 1), "nodes": ("int", 9)}, _run_omega_table),
    "propagate": ExperimentSpec(
        {
            "d": ("int", 1),
            "n": ("int", 16),
            "m": ("int", 256),
            "times": ("float-list", [0.5, 1.0, 2.0]),
            "compare_bessel": ("bool", True),
        },
        _run_propagate,
    ),
    "extend": ExperimentSpec(
        {
            "kind": ("str", "curve"),
            "phase": ("str", "cubic"),
            "sign": ("int", 1),
            "points": ("int", 32),
            "radius": ("float", 10.0),
        },
        _run_extend,
    ),
    "rescale-check": ExperimentSpec(
        {
            "kinds": ("str-list", ["curve", "surface", "mixed"]),
            "lams": ("float-list", [0.25, 0.5]),
            "k": ("float", 64.0),
            "points": ("int", 30),
            "radius": ("float", 100.0),
        },
        _run_rescale_check,
    ),
    "decoupling-check": ExperimentSpec(
        {
            "kinds": ("str-list", ["curve", "surface", "mixed"]),
            "k_list": ("float-list", [8.0, 16.0, 32.0, 64.0]),
            "p_list": ("float-list", [2.0, 22.0 / 7.0, 6.0]),
            "draws": ("int", 8),
            "samples": ("int", 1 << 12),
            "balls": ("int", 1),
        },
        _run_decoupling_check,
    ),
    "restriction-scan": ExperimentSpec(
        {
            "kind": ("str", "surface"),
            "sign": ("int", 1),
            "radii": ("float-list", [16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0]),
            "p": ("float", 22.0 / 7.0),
            "q": ("float", math.inf),
            "samples": ("int", 1 << 12),
            "sign_draws": ("int", 8),
            "fast": ("bool", True),
        },
        _run_restriction_scan,
    ),
    "equi-check": ExperimentSpec(
        {
            "cases": ("int", 10),
            "p_list": ("float-list", [2.0, 4.0]),
            "t_window": ("float", 10.0),
            "n_window": ("int", 30),
        },
        _run_equi_check,
    ),
    "dnls-solve": ExperimentSpec(
        {**_SOLVER_KEYS, "write_radius": ("int", 32), "cross_validate": ("bool", True)},
        _run_dnls_solve,
    ),
    "contraction": ExperimentSpec(
        {**_SOLVER_KEYS, "trials": ("int", 20), "eta": ("float", 0.1)},
        _run_contraction,
    ),
    "scatter": ExperimentSpec(
        {**_SOLVER_KEYS, "tail_tol": ("float", 1e-4)},
        _run_scatter,
    ),
    "strichartz-scan": ExperimentSpec(
        {
            "d_list": ("int-list", [1, 2, 3]),
            "q_list": ("float-list", [2.0, 4.0, 6.0, 8.0, math.inf]),
            "r_list": ("float-list", [2.0, 4.0, 6.0, 8.0, math.inf]),
            "measure": ("bool", False),
            "horizon": ("float", 4.0),
            "steps": ("int", 64),
        },
        _run_strichartz_scan,
    ),
    "decay-fit": ExperimentSpec(
        {
            "d": ("int", 1),
            "t_min": ("float", 10.0),
            "t_max": ("float", 200.0),
            "band": ("str", "none"),
            "samples": ("int", 25),
        },
        _run_decay_fit,
    ),
}


# ---------------------------------------------------------------------------
# Run and validate


def run(experiment: str, config_path: str, seed: Optional[int], out_dir: str) -> int:
    if experiment not in EXPERIMENTS:
        hint = difflib.get_close_matches(experiment, EXPERIMENTS.keys(), n=1)
        suffix = f"; nearest is {hint[0]!r}" if hint else ""
        print(f"error: unknown experiment {experiment!r}{suffix}", file=sys.stderr)
        return 1
    spec = EXPERIMENTS[experiment]
    try:
        sections = parse_config(config_path)
        if experiment not in sections:
            raise ConfigError(
                f"{config_path}: missing section [{experiment}] "
                f"(found {sorted(sections) or 'none'})"
            )
        raw = dict(sections[experiment])
        seed_cfg = None
        if "seed" in raw:
            seed_cfg = _parse_scalar(raw.pop("seed")[0], "int", config_path, 0)
        cfg = resolve_section(raw, spec.schema, config_path, experiment)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if seed is None:
        seed = seed_cfg if seed_cfg is not None else 0
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    rng = np.random.default_rng(seed)
    try:
        files, status = spec.runner(cfg, seed, rng)
    except (PreconditionError, ResolutionError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    checksums = {}
    for name, (header, rows) in files.items():
        path = out / name
        write_csv(path, header, rows)
        checksums[name] = _sha256(path)
    config_echo = {k: (str(v) if v in (math.inf,) else v) for k, v in cfg.items()}
    run_id = hashlib.sha256(
        json.dumps([experiment, sorted(config_echo.items(), key=str), seed], default=str).encode()
    ).hexdigest()[:12]
    manifest = {
        "run_id": run_id,
        "experiment": experiment,
        "config": config_echo,
        "seed": seed,
        "version": __version__,
        "wall_time_s": round(time.time() - started, 3),
        "status": status,
        "outputs": checksums,
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=str)
        fh.write("\n")
    print(f"{experiment}: run {run_id} -> {out} (status {status})")
    return status


def validate(config_path: str) -> int:
    """Schema-check a config without executing; print resolved defaults."""
    try:
        sections = parse_config(config_path)
        if not sections:
            print(
                "error: empty config; add an [experiment] section with keys from: "
                + ", ".join(sorted(EXPERIMENTS)),
                file=sys.stderr,
            )
            return 1
        for name, raw in sections.items():
            if name not in EXPERIMENTS:
                hint = difflib.get_close_matches(name, EXPERIMENTS.keys(), n=1)
                suffix = f"; nearest is {hint[0]!r}" if hint else ""
                raise ConfigError(f"unknown experiment section [{name}]{suffix}")
            raw = dict(raw)
            raw.pop("seed", None)
            cfg = resolve_section(raw, EXPERIMENTS[name].schema, config_path, name)
            print(f"[{name}] valid; resolved values:")
            for key in sorted(cfg):
                print(f"  {key} = {cfg[key]}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ftrlab",
        description="Deterministic experiment runner for the ftrlab library.",
    )
    parser.add_argument("experiment", help="experiment id or 'validate'")
    parser.add_argument("--config", required=True, help="path to the config file")
    parser.add_argument("--seed", type=int, default=None, help="override the seed")
    parser.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)
    if args.experiment == "validate":
        return validate(args.config)
    out = args.out if args.out is not None else f"ftrlab-out/{args.experiment}"
    return run(args.experiment, args.config, args.seed, out)


if __name__ == "__main__":
    sys.exit(main())
