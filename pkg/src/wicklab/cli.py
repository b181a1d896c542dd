"""Command-line front end: configs in, deterministic report files out.

Subcommands drive the library against its built-in cross-checks (diagram
counts, quadrature oracles, operator composition, dual-path mode flows) and
write plot-ready JSON/CSV tables.  Every artifact embeds the tool version,
the fully resolved configuration, the conventions in force, and the seed, so
identical configs produce byte-identical files.

Exit codes: 0 on success, 1 when a numerical check inside a report fails,
2 for configuration errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .chaos import (
    ChaosState,
    chaos_to_polynomial,
    inner_product,
    poly_eval,
    polynomial_to_chaos,
    wick_monomial,
    wick_product,
    wick_recursion_coefficients,
)
from .cosmo import (
    constant_background,
    de_sitter_background,
    dual_path_report,
    evolve_mode_heisenberg,
    evolve_mode_schrodinger,
    lambda_grid_flat,
    mode_parameters,
    particle_spectrum,
    power_law_background,
    tabulated_background,
    tanh_background,
    write_mode_json,
    write_spectrum_csv,
)
from .diagrams import enumerate_diagrams, wick_moment
from .gaussian import Covariance, GaussianMeasure, quadrature_expectation, sample
from .kahler import (
    ComplexStructureBlocks,
    ConstraintError,
    complete_blocks,
    null_shift_structure,
    random_compatible_blocks,
    transform_identities_check,
)
from .quantize import (
    REPRESENTATIONS,
    WeylWord,
    commutator_covariance,
    conjugate_poly,
    interior_indices,
    ladder_operators,
    moyal_product,
    quantize_word,
    weyl_quantize,
    wick_star,
)
from .symtensor import SymTensor, sorted_indices
from .transforms import verify_web

CONVENTIONS = {
    "covariance": "E[phi_x phi_y] = Delta_xy (convention scale 1); degree-n chaos norms carry n! Delta^n",
    "commutator": "[a_x, adag_y] = Delta_xy on the truncated interior; [phi, pi] = +i per mode",
    "delta_weight": "expanding-background modes pair with weight a**3 * comoving_volume, folded into delta_q",
}


class ConfigError(Exception):
    """Bad or missing configuration; maps to exit code 2."""


# ---------------------------------------------------------------------------
# plumbing


def _jsonify(obj):
    """Recursively convert report payloads to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return _jsonify(obj.item())
    if isinstance(obj, np.ndarray):
        return _jsonify(obj.tolist())
    raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def _write_report(path, command, seed, config, results):
    doc = {
        "tool_version": __version__,
        "command": command,
        "seed": seed,
        "config": config,
        "conventions": CONVENTIONS,
        "results": results,
    }
    path.write_text(json.dumps(_jsonify(doc), indent=2, sort_keys=True) + "\n")


def load_config(path) -> dict:
    """Parse a TOML or JSON config file into a flat dict of settings."""
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    suffix = p.suffix.lower()
    if suffix == ".json":
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
    elif suffix == ".toml":
        try:
            data = tomllib.loads(p.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{p}: invalid TOML: {exc}") from exc
    else:
        raise ConfigError(f"{p}: unsupported config format (use .toml or .json)")
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a table/object")
    return data


def _resolve_outdir(args) -> Path:
    out = args.out or os.environ.get("WICKLAB_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _matrix(value, key) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key '{key}' is not numeric: {exc}") from exc
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigError(f"config key '{key}' must be a square matrix")
    return arr


def _positive_int(value, key, low=1, high=None) -> int:
    try:
        n = int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key '{key}' must be an integer") from exc
    if n < low or (high is not None and n > high):
        bound = f"{low}..{high}" if high is not None else f">= {low}"
        raise ConfigError(f"config key '{key}' must lie in {bound}, got {n}")
    return n


def _as_fraction(value, key) -> Fraction:
    try:
        if isinstance(value, bool):
            raise ValueError("boolean is not a number")
        if isinstance(value, int):
            return Fraction(value)
        if isinstance(value, float):
            return Fraction(str(value))
        if isinstance(value, str):
            return Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"config key '{key}' is not a rational number: {value!r}") from exc
    raise ConfigError(f"config key '{key}' is not a rational number: {value!r}")


# ---------------------------------------------------------------------------
# chaos report


def _coeff_text(c) -> str:
    if isinstance(c, Fraction):
        return str(c)
    f = float(c)
    if f.is_integer() and abs(f) < 1e15:
        return str(int(f))
    return repr(f)


def _poly_text(coeffs, label) -> str:
    """Render an ascending coefficient list as a monomial sum, high degree first."""
    terms = []
    for power in range(len(coeffs) - 1, -1, -1):
        c = coeffs[power]
        if c == 0:
            continue
        negative = c < 0
        mag = _coeff_text(-c if negative else c)
        if power == 0:
            body = mag
        else:
            var = label if power == 1 else f"{label}^{power}"
            body = var if mag == "1" else f"{mag}*{var}"
        terms.append(("-" if negative else "+", body))
    if not terms:
        return "0"
    sign, body = terms[0]
    text = ("-" if sign == "-" else "") + body
    for sign, body in terms[1:]:
        text += f" {sign} {body}"
    return text


def _raw_fraction_matrix(raw, d):
    if isinstance(raw, (int, float, str)):
        return [[_as_fraction(raw, "delta")]]
    try:
        return [[_as_fraction(raw[i][j], "delta") for j in range(d)] for i in range(d)]
    except (TypeError, IndexError, KeyError) as exc:
        raise ConfigError("config key 'delta' must be a scalar or a square matrix") from exc


def _conversion_rows(diag, d, max_degree):
    rows = []
    for coord, variance in enumerate(diag):
        label = "phi" if d == 1 else f"phi_{coord}"
        cast = Fraction if isinstance(variance, Fraction) else float
        for n in range(max_degree + 1):
            coeffs = [cast(c) for c in wick_recursion_coefficients(variance, n)]
            rows.append(
                {
                    "coordinate": coord,
                    "degree": n,
                    "text": f":{label}^{n}: = " + _poly_text(coeffs, label),
                    "coefficients": list(coeffs),
                }
            )
    return rows


def _closure_section(cov_arg, d, max_degree, exact, rng):
    """Round-trip chaos <-> monomial conversion on seeded coefficient tensors."""
    worst = Fraction(0) if exact else 0.0
    for n in range(max_degree + 1):
        if exact:
            entries = {
                k: Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 7)))
                for k in sorted_indices(d, n)
            }
        else:
            entries = {k: float(rng.normal()) for k in sorted_indices(d, n)}
        seed = SymTensor(n, d, {k: v for k, v in entries.items() if v != 0})
        there = polynomial_to_chaos(cov_arg, chaos_to_polynomial(cov_arg, {n: seed}))
        again = chaos_to_polynomial(cov_arg, polynomial_to_chaos(cov_arg, {n: seed}))
        for rt in (there, again):
            for degree, tensor in rt.items():
                if degree == n:
                    continue
                for value in tensor.coeffs.values():
                    worst = max(worst, abs(value))
            got = rt.get(n, SymTensor.zero(d, n))
            for key in set(got.coeffs) | set(seed.coeffs):
                worst = max(worst, abs(got[key] - seed[key]))
    passed = worst == 0 if exact else float(worst) < 1e-10
    return {
        "max_residual": worst,
        "exact": bool(exact),
        "max_degree": max_degree,
        "tolerance": 0 if exact else 1e-10,
        "passed": bool(passed),
    }


def _orthogonality_section(cov, measure, max_degree, order):
    polys = [wick_monomial(cov, n) for n in range(max_degree + 1)]
    g = float(cov.matrix[0, 0])
    worst = 0.0
    for n in range(max_degree + 1):
        for m in range(n, max_degree + 1):
            val = quadrature_expectation(
                measure,
                lambda p, a=polys[n], b=polys[m]: poly_eval(a, p) * poly_eval(b, p),
                order=order,
            )
            want = math.factorial(n) * g**n if n == m else 0.0
            worst = max(worst, abs(val - want) / max(1.0, abs(want)))
    return {
        "max_residual": worst,
        "max_degree": max_degree,
        "quadrature_order": order,
        "tolerance": 1e-8,
        "passed": bool(worst < 1e-8),
    }


def _product_section(cov, measure, d, max_degree, order):
    """Product-formula coefficients vs cross-diagram counts and quadrature."""
    top = min(max_degree, 4 if d <= 2 else 3)
    polys = [wick_monomial(cov, n) for n in range(2 * top + 1)]
    g = float(cov.matrix[0, 0])
    count_worst = 0.0
    quad_worst = 0.0
    pairs = []
    for n in range(1, top + 1):
        for m in range(n, top + 1):
            out = wick_product(cov, n, m)
            for k in range(min(n, m) + 1):
                low = n + m - 2 * k
                cval = complex(out[low][(0,) * low]) if low in out else 0.0j
                cross = sum(
                    1
                    for diag in enumerate_diagrams(n + m, k)
                    if all((i < n) != (j < n) for i, j in diag.half_edges)
                )
                count_worst = max(count_worst, abs(cval - cross * g**k))
                coeff = cval.real
                val = quadrature_expectation(
                    measure,
                    lambda p, a=polys[n], b=polys[m], c=polys[low]: poly_eval(a, p)
                    * poly_eval(b, p)
                    * poly_eval(c, p),
                    order=order,
                )
                want = coeff * math.factorial(low) * g**low
                quad_worst = max(quad_worst, abs(val - want) / max(1.0, abs(want)))
            pairs.append([n, m])
    return {
        "pairs": pairs,
        "count_max_residual": count_worst,
        "quadrature_max_residual": quad_worst,
        "tolerance": 1e-8,
        "passed": bool(count_worst < 1e-8 and quad_worst < 1e-8),
    }


def cmd_chaos(args) -> int:
    cfg = load_config(args.config)
    if args.config and "delta" not in cfg:
        raise ConfigError("config is missing required key 'delta' (the covariance matrix)")
    raw_delta = cfg.get("delta", [[1.0]])
    delta = _matrix(raw_delta, "delta")
    scale = max(1.0, float(np.max(np.abs(delta))))
    if np.max(np.abs(delta - delta.T)) > 1e-12 * scale:
        raise ConfigError("covariance 'delta' must be symmetric")
    if np.linalg.eigvalsh(delta).min() <= 0:
        raise ConfigError("covariance 'delta' must be positive definite")
    d = delta.shape[0]
    if d > 3:
        raise ConfigError(f"chaos report uses quadrature oracles (dimension <= 3), got d={d}")

    max_degree = args.cutoff if args.cutoff is not None else _positive_int(cfg.get("max_degree", 6), "max_degree")
    if not 1 <= max_degree <= 12:
        raise ConfigError(f"max degree must lie in 1..12, got {max_degree}")
    exact = bool(args.exact or cfg.get("exact", False))
    seed = args.seed if args.seed is not None else _positive_int(cfg.get("seed", 0), "seed", low=0)
    order = min(64, max(20, 2 * max_degree + 8))

    cov = Covariance(delta, np.linalg.inv(delta))
    measure = GaussianMeasure(cov)
    rng = np.random.default_rng(seed)

    if exact:
        frac_delta = _raw_fraction_matrix(raw_delta, d)
        diag = [frac_delta[i][i] for i in range(d)]
        closure = _closure_section(frac_delta, d, min(max_degree, 8), True, rng)
    else:
        diag = [float(delta[i, i]) for i in range(d)]
        closure = _closure_section(cov, d, min(max_degree, 8), False, rng)

    conversion = _conversion_rows(diag, d, max_degree)
    orthogonality = _orthogonality_section(cov, measure, max_degree, order)
    products = _product_section(cov, measure, d, max_degree, order)

    results = {
        "dimension": d,
        "conversion_table": conversion,
        "closure": closure,
        "orthogonality": orthogonality,
        "product_formula": products,
    }
    effective = {
        "delta": delta,
        "dimension": d,
        "max_degree": max_degree,
        "exact": exact,
        "quadrature_order": order,
    }
    outdir = _resolve_outdir(args)
    report = outdir / "chaos_report.json"
    _write_report(report, "chaos", seed, effective, results)

    ok = closure["passed"] and orthogonality["passed"] and products["passed"]
    print(f"chaos: wrote {report}")
    print(
        "chaos: closure={} orthogonality={:.3e} products(count)={:.3e} products(quad)={:.3e} -> {}".format(
            "exact" if exact and closure["passed"] else f"{float(closure['max_residual']):.3e}",
            orthogonality["max_residual"],
            products["count_max_residual"],
            products["quadrature_max_residual"],
            "pass" if ok else "FAIL",
        )
    )
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# transform web report


def _parse_sweep(text) -> list:
    try:
        values = sorted({int(x) for x in str(text).split(",") if str(x).strip()})
    except ValueError as exc:
        raise ConfigError(f"bad cutoff sweep {text!r}: {exc}") from exc
    if not values or any(v < 3 for v in values):
        raise ConfigError(f"cutoff sweep needs integers >= 3, got {text!r}")
    return values


def _build_blocks(cfg, seed):
    if "theta" in cfg or "lapse" in cfg:
        if "theta" not in cfg or "lapse" not in cfg:
            raise ConfigError("zero-shift blocks need both 'theta' and 'lapse'")
        theta = _matrix(cfg["theta"], "theta")
        lapse = _matrix(cfg["lapse"], "lapse")
        if theta.shape != lapse.shape:
            raise ConfigError("'theta' and 'lapse' must share a shape")
        return null_shift_structure(theta, lapse), "zero-shift"
    if cfg.get("random"):
        # phase-series conjugations shed amplitude across the cutoff at a rate
        # set by ||K A||, so the web is checked in the small-mixing regime
        dim = _positive_int(cfg.get("dim", 2), "dim", high=6)
        strength = float(cfg.get("mixing", 0.02))
        if not 0.0 <= strength < 0.2:
            raise ConfigError(f"'mixing' strength must lie in [0, 0.2), got {strength}")
        rng = np.random.default_rng(seed)
        base = rng.normal(size=(dim, dim))
        delta = 0.05 * (base @ base.T) + 0.45 * np.eye(dim)
        s = rng.normal(size=(dim, dim))
        s = 0.5 * (s + s.T)
        norm = np.linalg.norm(s, 2)
        a = delta @ (strength * s / norm) if norm > 0 else np.zeros_like(delta)
        return complete_blocks(a, delta), f"random(dim={dim}, mixing={strength})"
    dim = _positive_int(cfg.get("dim", 2), "dim", high=8)
    delta = _matrix(cfg.get("delta", np.eye(dim)), "delta")
    a = _matrix(cfg.get("a", np.zeros_like(delta)), "a")
    if a.shape != delta.shape:
        raise ConfigError("'a' and 'delta' must share a shape")
    return complete_blocks(a, delta), "explicit"


def cmd_transform_check(args) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else _positive_int(cfg.get("seed", 0), "seed", low=0)
    cutoff = args.cutoff if args.cutoff is not None else _positive_int(cfg.get("cutoff", 8), "cutoff", low=3)
    corrupt = bool(args.corrupt_d or cfg.get("corrupt_d", False))
    sweep = [cutoff]
    if args.sweep is not None:
        sweep = _parse_sweep(args.sweep)
    elif "sweep" in cfg:
        sweep = _parse_sweep(",".join(str(v) for v in cfg["sweep"]))

    outdir = _resolve_outdir(args)
    report_path = outdir / "transform_report.json"
    effective = {"cutoff": cutoff, "sweep": sweep, "corrupt_d": corrupt}

    try:
        blocks, source = _build_blocks(cfg, seed)
        if corrupt:
            bump = 0.05 * (1.0 + float(np.max(np.abs(blocks.d))))
            blocks = ComplexStructureBlocks(
                blocks.a, blocks.delta, blocks.d + bump * np.eye(blocks.d.shape[0]), blocks.k
            )
    except ConstraintError as exc:
        results = {
            "blocks": {"source": "corrupted" if corrupt else "explicit"},
            "constraint_error": str(exc),
            "passed": False,
        }
        _write_report(report_path, "transform-check", seed, effective, results)
        print(f"transform-check: wrote {report_path}")
        print(f"transform-check: block constraints violated ({exc}) -> FAIL")
        return 1

    identities = transform_identities_check(blocks)
    sweep_rows = []
    all_pass = True
    for c in sweep:
        reports = verify_web(blocks, c)
        all_pass = all_pass and all(r.passed for r in reports)
        sweep_rows.append(
            {
                "cutoff": c,
                "reports": [
                    {"label": r.label, "max_residual": r.max_residual, "passed": r.passed}
                    for r in reports
                ],
            }
        )
    ident_worst = max(float(v) for v in identities.residuals.values())
    all_pass = all_pass and ident_worst < 1e-10

    results = {
        "blocks": {"source": source, "dim": blocks.delta.shape[0]},
        "block_identities": {"residuals": identities.residuals, "max_residual": ident_worst},
        "web": sweep_rows,
        "passed": all_pass,
    }
    _write_report(report_path, "transform-check", seed, effective, results)
    web_worst = max(r["max_residual"] for row in sweep_rows for r in row["reports"])
    print(f"transform-check: wrote {report_path}")
    print(
        f"transform-check: identities={ident_worst:.3e} web={web_worst:.3e}"
        f" over cutoffs {sweep} -> {'pass' if all_pass else 'FAIL'}"
    )
    return 0 if all_pass else 1


# ---------------------------------------------------------------------------
# quantize suite


def _random_bipoly(rng, dim, max_degree):
    poly = {}
    for n in range(max_degree + 1):
        for m in range(max_degree + 1 - n):
            dense = rng.normal(size=(dim,) * (n + m)) + 1j * rng.normal(size=(dim,) * (n + m))
            poly[(n, m)] = dense
    return poly


def _unit_ball_draw(rng, dim):
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return vec * rng.uniform(0.2, 1.0) / np.linalg.norm(vec)


def cmd_quantize_check(args) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else _positive_int(cfg.get("seed", 0), "seed", low=0)
    cutoff = args.cutoff if args.cutoff is not None else _positive_int(cfg.get("cutoff", 5), "cutoff", low=3)
    dim = _positive_int(cfg.get("dim", 2), "dim", high=4)
    trials = _positive_int(cfg.get("trials", 3), "trials", high=50)
    star_pairs = _positive_int(cfg.get("star_pairs", 2), "star_pairs", high=50)
    star_cutoff = _positive_int(cfg.get("star_cutoff", 12), "star_cutoff", low=11, high=20)
    rng = np.random.default_rng(seed)

    block_sets = [random_compatible_blocks(rng, dim) for _ in range(trials)]

    ccr_rows = []
    idx = interior_indices(dim, cutoff, 2)
    eye = np.eye(len(idx))
    for trial, blocks in enumerate(block_sets):
        for rep in REPRESENTATIONS:
            ann, cre = ladder_operators(rep, blocks, cutoff)
            g = commutator_covariance(rep, blocks)
            worst = 0.0
            for x in range(dim):
                for y in range(dim):
                    comm = ann[x].matrix @ cre[y].matrix - cre[y].matrix @ ann[x].matrix
                    worst = max(worst, float(np.max(np.abs(comm[np.ix_(idx, idx)] - g[x, y] * eye))))
            ccr_rows.append({"trial": trial, "representation": rep, "max_residual": worst})
    ccr_worst = max(r["max_residual"] for r in ccr_rows)

    # adjoints mix truncation error from the boundary rows into the raw
    # matrices, so the involution identity is also an interior statement
    inv_rows = []
    inv_idx = interior_indices(dim, cutoff + 1, 2)
    for trial, blocks in enumerate(block_sets):
        poly = _random_bipoly(rng, dim, 2)
        for rep in REPRESENTATIONS:
            op = weyl_quantize(poly, blocks, cutoff + 1, rep=rep)
            conj_op = weyl_quantize(conjugate_poly(poly), blocks, cutoff + 1, rep=rep)
            norm = max(1.0, float(np.max(np.abs(op.matrix))))
            diff = (conj_op.matrix - op.matrix.conj().T)[np.ix_(inv_idx, inv_idx)]
            resid = float(np.max(np.abs(diff))) / norm
            inv_rows.append({"trial": trial, "representation": rep, "max_residual": resid})
    inv_worst = max(r["max_residual"] for r in inv_rows)

    # star-product homomorphism on the documented scalar regime: covariance
    # 0.5 keeps the truncation leak below 1e-9 inside a margin of 10 levels
    sblocks = complete_blocks(np.array([[0.0]]), np.array([[0.5]]))
    sidx = interior_indices(1, star_cutoff, 10)
    star_rows = []
    for pair in range(star_pairs):
        rho = _unit_ball_draw(rng, 1)
        alpha = _unit_ball_draw(rng, 1)
        for flavor in ("moyal", "wick"):
            ordered = flavor == "wick"
            wr = WeylWord.exponential(rho, wick_ordered=ordered)
            wa = WeylWord.exponential(alpha, wick_ordered=ordered)
            combine = wick_star if ordered else moyal_product
            left = quantize_word(wr, sblocks, star_cutoff, tail_tol=1e-4).matrix
            right = quantize_word(wa, sblocks, star_cutoff, tail_tol=1e-4).matrix
            direct = quantize_word(combine(wr, wa, sblocks), sblocks, star_cutoff, tail_tol=1e-4).matrix
            resid = float(np.max(np.abs((left @ right - direct)[np.ix_(sidx, sidx)])))
            star_rows.append({"pair": pair, "star": flavor, "max_residual": resid})
    star_worst = max(r["max_residual"] for r in star_rows)

    ok = ccr_worst < 1e-10 and inv_worst < 1e-10 and star_worst < 1e-8
    results = {
        "ccr": {"rows": ccr_rows, "max_residual": ccr_worst, "tolerance": 1e-10},
        "involution": {"rows": inv_rows, "max_residual": inv_worst, "tolerance": 1e-10},
        "star": {"rows": star_rows, "max_residual": star_worst, "tolerance": 1e-8},
        "passed": ok,
    }
    effective = {
        "dim": dim,
        "trials": trials,
        "cutoff": cutoff,
        "star_pairs": star_pairs,
        "star_cutoff": star_cutoff,
    }
    outdir = _resolve_outdir(args)
    report = outdir / "quantize_report.json"
    _write_report(report, "quantize-check", seed, effective, results)
    print(f"quantize-check: wrote {report}")
    print(
        f"quantize-check: ccr={ccr_worst:.3e} involution={inv_worst:.3e}"
        f" star={star_worst:.3e} -> {'pass' if ok else 'FAIL'}"
    )
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# cosmology runs


_BACKGROUND_FACTORIES = {
    "constant": constant_background,
    "de_sitter": de_sitter_background,
    "power_law": power_law_background,
    "tanh": tanh_background,
}


def _read_profile_csv(path):
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"background table not found: {p}")
    times, values = [], []
    header_allowed = True
    for line in p.read_text().splitlines():
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = [x.strip() for x in s.split(",")]
        if len(parts) < 2:
            raise ConfigError(f"{p}: each row needs 't,a' columns")
        try:
            t, a = float(parts[0]), float(parts[1])
        except ValueError:
            if header_allowed:
                header_allowed = False
                continue  # single header row
            raise ConfigError(f"{p}: non-numeric row {s!r}") from None
        header_allowed = False
        times.append(t)
        values.append(a)
    if len(times) < 4:
        raise ConfigError(f"{p}: need at least 4 samples of t,a")
    return np.array(times), np.array(values)


def _build_background(cfg):
    raw = cfg.get("background", {"preset": "tanh"})
    if not isinstance(raw, dict):
        raise ConfigError("'background' must be a table of preset parameters")
    preset = raw.get("preset", "tanh")
    params = {k: v for k, v in raw.items() if k not in ("preset", "path")}
    try:
        if preset == "tabulated":
            times, values = _read_profile_csv(raw.get("path") or "")
            bg = tabulated_background(times, values, **params)
        elif preset in _BACKGROUND_FACTORIES:
            bg = _BACKGROUND_FACTORIES[preset](**params)
        else:
            known = ", ".join(sorted(_BACKGROUND_FACTORIES) + ["tabulated"])
            raise ConfigError(f"unknown background preset {preset!r} (choose from {known})")
    except TypeError as exc:
        raise ConfigError(f"bad parameters for background preset {preset!r}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"invalid background profile: {exc}") from exc
    return bg, dict(raw)


def _build_lambdas(cfg):
    if "lambdas" in cfg:
        try:
            lams = [float(x) for x in cfg["lambdas"]]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"'lambdas' must be a list of numbers: {exc}") from exc
        if not lams:
            raise ConfigError("'lambdas' must not be empty")
        return sorted(lams)
    grid = cfg.get("grid", {"k_max": 3.0, "count": 8})
    if not isinstance(grid, dict):
        raise ConfigError("'grid' must be a table with k_max and count")
    try:
        return list(
            lambda_grid_flat(
                float(grid.get("k_max", 3.0)),
                int(grid.get("count", 8)),
                k_min=float(grid["k_min"]) if "k_min" in grid else None,
            )
        )
    except ValueError as exc:
        raise ConfigError(f"bad eigenvalue grid: {exc}") from exc


def _wave_initial_state(background, lam, t0, cutoff, amplitudes):
    params = mode_parameters(background, lam, t0)
    dq = params.delta_q
    total = 0.0
    coeffs = {}
    for j, amp in enumerate(amplitudes):
        degree = 2 * j
        if degree > cutoff:
            raise ConfigError("wave amplitudes exceed the degree cutoff")
        amp = float(amp)
        if amp == 0.0:
            continue
        coeffs[degree] = SymTensor(degree, 1, {(0,) * degree: amp})
        total += math.factorial(degree) * dq**degree * amp * amp
    if not coeffs:
        raise ConfigError("wave amplitudes must not all vanish")
    root = math.sqrt(total)
    coeffs = {k: t.map_values(lambda v: v / root) for k, t in coeffs.items()}
    cov = Covariance(np.array([[dq]]))
    return ChaosState("holomorphic", cov, cutoff, coeffs)


_SOLVER_KEYS = ("method", "rtol", "atol", "path", "substeps")


def cmd_cosmo_run(args) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else _positive_int(cfg.get("seed", 0), "seed", low=0)
    background, bg_cfg = _build_background(cfg)
    lambdas = _build_lambdas(cfg)
    t_span = cfg.get("t_span", [-8.0, 8.0])
    try:
        t0, t1 = float(t_span[0]), float(t_span[-1])
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"'t_span' must be a pair of times: {exc}") from exc
    if not t1 > t0:
        raise ConfigError(f"'t_span' must increase, got [{t0}, {t1}]")
    try:
        background.scale(t0)
        background.scale(t1)
    except ValueError as exc:
        raise ConfigError(f"background cannot cover t_span: {exc}") from exc
    n_out = _positive_int(cfg.get("n_out", 65), "n_out", low=2, high=100_000)
    workers = args.workers if args.workers is not None else cfg.get("workers")
    if workers is not None:
        workers = _positive_int(workers, "workers", high=64)

    solver = cfg.get("solver", {})
    if not isinstance(solver, dict):
        raise ConfigError("'solver' must be a table")
    unknown = set(solver) - set(_SOLVER_KEYS)
    if unknown:
        raise ConfigError(f"unknown solver keys: {sorted(unknown)} (allowed: {list(_SOLVER_KEYS)})")
    solver_kwargs = dict(solver)

    wave_cfg = cfg.get("wave", {})
    if not isinstance(wave_cfg, dict):
        raise ConfigError("'wave' must be a table")
    wave_enabled = bool(wave_cfg.get("enabled", True))
    wave_cutoff = args.cutoff if args.cutoff is not None else _positive_int(wave_cfg.get("cutoff", 10), "wave.cutoff", low=4)
    wave_amplitudes = wave_cfg.get("amplitudes", [1.0, 0.25, 0.1])
    wave_lambda = wave_cfg.get("lambda")

    outdir = _resolve_outdir(args)
    effective = {
        "background": bg_cfg,
        "lambdas": lambdas,
        "t_span": [t0, t1],
        "n_out": n_out,
        "workers": workers,
        "solver": solver_kwargs,
        "wave": {
            "enabled": wave_enabled,
            "cutoff": wave_cutoff,
            "lambda": wave_lambda,  # null: median of the surviving grid
            "amplitudes": list(wave_amplitudes),
        },
    }

    table = particle_spectrum(
        background, lambdas, (t0, t1), workers=workers, n_out=n_out, **solver_kwargs
    )
    table.metadata["command"] = "cosmo run"
    table.metadata["seed"] = seed
    table.metadata["config"] = _jsonify(effective)
    csv_path = outdir / "spectrum.csv"
    write_spectrum_csv(table, csv_path)

    modes_dir = outdir / "modes"
    modes_dir.mkdir(exist_ok=True)
    failed = {f["lambda"] for f in table.metadata["failures"]}
    ok_lambdas = [lam for lam in lambdas if lam not in failed]
    written = 0
    for k, lam in enumerate(lambdas):
        if lam in failed:
            continue
        run = evolve_mode_heisenberg(background, lam, (t0, t1), n_out=n_out, **solver_kwargs)
        write_mode_json(
            run,
            modes_dir / f"mode_{k:03d}.json",
            extra_metadata={"command": "cosmo run", "seed": seed, "config": _jsonify(effective)},
        )
        written += 1

    times = np.linspace(t0, t1, 9)
    consistency = dual_path_report(background, ok_lambdas, times) if ok_lambdas else None
    wave_summary = None
    if wave_enabled and ok_lambdas:
        wave_lam = float(wave_lambda) if wave_lambda is not None else ok_lambdas[len(ok_lambdas) // 2]
        state0 = _wave_initial_state(background, wave_lam, t0, wave_cutoff, wave_amplitudes)
        modified = evolve_mode_schrodinger(background, wave_lam, state0, (t0, t1))
        control = evolve_mode_schrodinger(
            background, wave_lam, state0, (t0, t1), connection="none"
        )
        drift = float(modified.diagnostics["max_norm_drift"])
        control_drift = float(control.diagnostics["max_norm_drift"])
        wave_summary = {
            "lambda": wave_lam,
            "cutoff": wave_cutoff,
            "max_norm_drift": drift,
            "control_max_norm_drift": control_drift,
            "control_ratio": control_drift / drift if drift > 0 else float("inf"),
            "max_truncation_fraction": float(modified.diagnostics["max_truncation_fraction"]),
            "leak_flag": bool(modified.diagnostics["leak_flag"]),
        }
    _write_report(
        outdir / "consistency.json",
        "cosmo run",
        seed,
        effective,
        {"dual_path": consistency, "wave_norm": wave_summary},
    )

    ok = not table.metadata["partial"]
    absv2 = [row["absv2"] for row in table.rows]
    print(f"cosmo run: wrote {csv_path} ({len(table.rows)} modes), {written} mode files, "
          f"{outdir / 'consistency.json'}")
    if absv2 and consistency is not None:
        print(f"cosmo run: max |v|^2 = {max(absv2):.6e}, paths agree: {consistency['agrees']}")
    if wave_summary:
        print(
            "cosmo run: wave norm drift {:.3e} (control {:.3e})".format(
                wave_summary["max_norm_drift"], wave_summary["control_max_norm_drift"]
            )
        )
    if not ok:
        for failure in table.metadata["failures"]:
            print(f"cosmo run: mode {failure['lambda']} failed: {failure['error']}", file=sys.stderr)
        print("cosmo run: FAIL (some modes did not integrate)", file=sys.stderr)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# oracle cross-checks


def _random_measure(rng, d):
    a = rng.normal(size=(d, d))
    delta = (a @ a.T + d * np.eye(d)) / d
    cov = Covariance(delta, np.linalg.inv(delta))
    return cov, GaussianMeasure(cov)


def _moment_section(rng, d, instances, rank_max, order, mc, mc_count, seed):
    rows = []
    quad_worst = 0.0
    sigma_worst = 0.0
    for i in range(instances):
        cov, measure = _random_measure(rng, d)
        rank = 2 * int(rng.integers(1, rank_max // 2 + 1))
        vectors = [rng.normal(size=d) for _ in range(rank)]

        def product(phi, vecs=tuple(vectors)):
            out = 1.0
            for v in vecs:
                out *= v @ phi
            return out

        pairing = wick_moment(vectors, cov)
        quad = quadrature_expectation(measure, product, order=order)
        resid = abs(pairing - quad) / max(1.0, abs(quad))
        quad_worst = max(quad_worst, resid)
        row = {"instance": i, "rank": rank, "pairing": pairing, "quadrature": quad, "residual": resid}
        if mc:
            draws = sample(measure, seed + 1000 + i, mc_count)
            vals = np.ones(len(draws))
            for v in vectors:
                vals *= draws @ v
            mean = float(vals.mean())
            stderr = float(vals.std(ddof=1) / math.sqrt(len(vals)))
            sigmas = abs(pairing - mean) / stderr if stderr > 0 else 0.0
            sigma_worst = max(sigma_worst, sigmas)
            row.update({"mc_mean": mean, "mc_stderr": stderr, "mc_sigmas": sigmas})
        rows.append(row)

    odd_cov, _ = _random_measure(rng, d)
    odd_value = wick_moment([rng.normal(size=d) for _ in range(9)], odd_cov)
    rows.append(
        {
            "instance": instances,
            "rank": 9,
            "pairing": odd_value,
            "note": "odd rank admits no complete pairing",
            "exact_zero": odd_value == 0.0,
        }
    )
    passed = quad_worst < 1e-8 and odd_value == 0.0 and (not mc or sigma_worst < 5.0)
    section = {
        "rows": rows,
        "quadrature_max_residual": quad_worst,
        "tolerance": 1e-8,
        "passed": bool(passed),
    }
    if mc:
        section["mc_max_sigmas"] = sigma_worst
        section["mc_count"] = mc_count
    return section


def _random_chaos_state(rng, cov, cutoff, degrees):
    d = cov.matrix.shape[0]
    coeffs = {}
    for n in degrees:
        entries = {k: float(rng.normal()) for k in sorted_indices(d, n)}
        coeffs[n] = SymTensor(n, d, entries)
    return ChaosState("real", cov, cutoff, coeffs)


def _inner_product_section(rng, d, order):
    worst = 0.0
    rows = []
    for i in range(3):
        cov, measure = _random_measure(rng, d)
        a = _random_chaos_state(rng, cov, 6, (0, 1, 2, 3))
        b = _random_chaos_state(rng, cov, 6, (1, 2, 3))
        formula = inner_product(a, b)
        pa = chaos_to_polynomial(cov, a.coeffs)
        pb = chaos_to_polynomial(cov, b.coeffs)
        quad = quadrature_expectation(
            measure, lambda p: poly_eval(pa, p) * poly_eval(pb, p), order=order
        )
        resid = abs(formula - quad) / max(1.0, abs(quad))
        worst = max(worst, resid)
        rows.append({"instance": i, "formula": formula, "quadrature": quad, "residual": resid})
    return {"rows": rows, "max_residual": worst, "tolerance": 1e-8, "passed": bool(worst < 1e-8)}


def _star_section(rng, pairs):
    sblocks = complete_blocks(np.array([[0.0]]), np.array([[0.5]]))
    cutoff = 12
    idx = interior_indices(1, cutoff, 10)
    worst = 0.0
    rows = []
    for pair in range(pairs):
        rho = _unit_ball_draw(rng, 1)
        alpha = _unit_ball_draw(rng, 1)
        for flavor in ("moyal", "wick"):
            ordered = flavor == "wick"
            wr = WeylWord.exponential(rho, wick_ordered=ordered)
            wa = WeylWord.exponential(alpha, wick_ordered=ordered)
            combine = wick_star if ordered else moyal_product
            left = quantize_word(wr, sblocks, cutoff, tail_tol=1e-4).matrix
            right = quantize_word(wa, sblocks, cutoff, tail_tol=1e-4).matrix
            direct = quantize_word(combine(wr, wa, sblocks), sblocks, cutoff, tail_tol=1e-4).matrix
            resid = float(np.max(np.abs((left @ right - direct)[np.ix_(idx, idx)])))
            worst = max(worst, resid)
            rows.append({"pair": pair, "star": flavor, "max_residual": resid})
    return {"rows": rows, "max_residual": worst, "tolerance": 1e-8, "passed": bool(worst < 1e-8)}


def cmd_oracle(args) -> int:
    cfg = load_config(args.config)
    d = _positive_int(cfg.get("dimension", 2), "dimension")
    if d > 3:
        raise ConfigError(f"quadrature oracles support dimension <= 3, got {d}")
    seed = args.seed if args.seed is not None else _positive_int(cfg.get("seed", 0), "seed", low=0)
    instances = _positive_int(cfg.get("instances", 5), "instances", high=200)
    rank_max = _positive_int(cfg.get("rank_max", 6), "rank_max", low=2, high=8)
    mc = bool(args.mc or cfg.get("mc", False))
    mc_count = _positive_int(cfg.get("mc_count", 200_000), "mc_count", low=1000)
    star_pairs = _positive_int(cfg.get("star_pairs", 2), "star_pairs", high=50)
    order = min(64, max(24, rank_max * 2 + 8))
    rng = np.random.default_rng(seed)

    moments = _moment_section(rng, d, instances, rank_max, order, mc, mc_count, seed)
    inner = _inner_product_section(rng, min(d, 2), order)
    star = _star_section(rng, star_pairs)

    ok = moments["passed"] and inner["passed"] and star["passed"]
    results = {"moments": moments, "inner_products": inner, "star_products": star, "passed": ok}
    effective = {
        "dimension": d,
        "instances": instances,
        "rank_max": rank_max,
        "mc": mc,
        "mc_count": mc_count if mc else None,
        "star_pairs": star_pairs,
        "quadrature_order": order,
    }
    outdir = _resolve_outdir(args)
    report = outdir / "oracle_report.json"
    _write_report(report, "oracle", seed, effective, results)
    print(f"oracle: wrote {report}")
    line = (
        f"oracle: moments={moments['quadrature_max_residual']:.3e}"
        f" inner={inner['max_residual']:.3e} star={star['max_residual']:.3e}"
    )
    if mc:
        line += f" mc_sigmas={moments['mc_max_sigmas']:.2f}"
    print(line + f" -> {'pass' if ok else 'FAIL'}")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# argument parsing


def _common_flags(p):
    p.add_argument("--config", metavar="PATH", help="TOML or JSON config file")
    p.add_argument("--cutoff", type=int, metavar="N", help="degree/level cutoff override")
    p.add_argument("--seed", type=int, metavar="S", help="seed for random draws (default 0)")
    p.add_argument("--exact", action="store_true", help="rational arithmetic where supported")
    p.add_argument("--workers", type=int, metavar="W", help="bounded worker count for mode fans")
    p.add_argument("--out", metavar="DIR", help="output directory (default: $WICKLAB_OUT or .)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wicklab",
        description="Finite-mode Gaussian analysis laboratory: reports and spectra as plot-ready tables",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("chaos", help="Wick conversion tables, product formula, orthogonality residuals")
    _common_flags(p)
    p.set_defaults(func=cmd_chaos)

    p = sub.add_parser("transform-check", help="integral-transform web and block-identity report")
    _common_flags(p)
    p.add_argument("--corrupt-d", action="store_true", help="negative control: perturb the D block")
    p.add_argument("--sweep", metavar="LIST", help="comma-separated cutoffs for a residual-vs-cutoff table")
    p.set_defaults(func=cmd_transform_check)

    p = sub.add_parser("quantize-check", help="ladder commutators, involution, star-product homomorphism")
    _common_flags(p)
    p.set_defaults(func=cmd_quantize_check)

    p = sub.add_parser("cosmo", help="mode evolution on expanding backgrounds")
    cosmo_sub = p.add_subparsers(dest="cosmo_command", required=True)
    run = cosmo_sub.add_parser("run", help="particle spectrum, per-mode series, dual-path consistency")
    _common_flags(run)
    run.set_defaults(func=cmd_cosmo_run)

    p = sub.add_parser("oracle", help="pairing formulas vs quadrature and Monte-Carlo oracles")
    _common_flags(p)
    p.add_argument("--mc", action="store_true", help="add Monte-Carlo columns to the moment table")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
