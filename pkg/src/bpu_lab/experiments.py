"""Configuration-driven experiments with deterministic artifacts.

Each experiment kind consumes a single JSON configuration document,
produces a CSV data table (columns k, l, r, value_re, value_im), a JSON
manifest carrying the configuration hash, the calibrated convention
constants, the fits and the PASS/FAIL verdicts, and reports an overall
verdict.  Given identical configurations the emitted bytes are identical.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from . import asymptotics, bpu, calibration, leaf
from .errors import ConfigError
from .geometry import (
    fs_distance,
    horizontal_lift,
    latitude_loop,
    perturbed_latitude,
)
from .leaf import HalfWeight, LeafTangent, project_constraints

__all__ = [
    "EXPERIMENT_KINDS",
    "ExperimentConfig",
    "RunResult",
    "run_experiment",
    "emit_report",
]

EXPERIMENT_KINDS = (
    "norm-sweep",
    "theorem-check",
    "derivative-crosscheck",
    "profile",
    "decay",
    "identity-suite",
)

_DEFAULT_TOLERANCES = {
    "leading_rel": 0.01,        # norm sweep leading coefficient
    "pair_rel": 0.03,           # theorem check per-pair deviation
    "ladder_band": 0.25,        # residual slope band
    "fd_rel": 1e-3,             # derivative cross-check
    "gaussian_abs": 0.02,       # transverse profile deviation
    "decay_slope": -10.0,       # super-polynomial decay threshold
    "identity_abs": 1e-9,       # algebraic identity suite
}


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def _parse_fraction(raw: Any) -> Fraction:
    if isinstance(raw, str):
        try:
            frac = Fraction(raw)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"cannot parse rational parameter {raw!r}") from exc
    elif isinstance(raw, (list, tuple)) and len(raw) == 2:
        try:
            frac = Fraction(int(raw[0]), int(raw[1]))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"cannot parse rational parameter {raw!r}") from exc
    else:
        raise ConfigError(f"rational parameter must be 'p/q' or [p, q], got {raw!r}")
    return frac


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    c: Fraction
    n: int
    l_max: int
    seed: int
    halfweight: dict
    tangents: list[dict]
    pairs: list[tuple[int, int]]
    k_values: list[int]
    points: list[dict]
    tolerances: dict[str, float]
    raw: dict = field(repr=False)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
        kind = raw.get("kind")
        if kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {kind!r}; "
                              f"choose one of {', '.join(EXPERIMENT_KINDS)}")
        c = _parse_fraction(raw.get("c", "1/2"))
        if not 0 < c < 1:
            raise ConfigError(f"circle parameter must lie in (0, 1), got {c}")
        if c.denominator > 64:
            raise ConfigError(f"circle parameter denominator {c.denominator} exceeds 64")
        n = int(raw.get("n", 256))
        if n < 64 or n & (n - 1):
            raise ConfigError(f"node count must be a power of two >= 64, got {n}")
        l_max = int(raw.get("l_max", 40))
        if l_max < 5:
            raise ConfigError("l_max must be at least 5")
        seed = int(raw.get("seed", 1))
        tolerances = dict(_DEFAULT_TOLERANCES)
        for key, val in dict(raw.get("tolerances", {})).items():
            if key not in _DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance {key!r}")
            tolerances[key] = float(val)
        for key, val in tolerances.items():
            if key != "decay_slope" and val <= 0:
                raise ConfigError(f"tolerance {key} must be positive")
        pairs = [tuple(int(i) for i in p) for p in raw.get("pairs", [])]
        tangents = list(raw.get("tangents", []))
        for i, j in pairs:
            if not (0 <= i < len(tangents) and 0 <= j < len(tangents)):
                raise ConfigError(f"pair ({i}, {j}) indexes outside the tangent list")
        return cls(
            kind=kind,
            c=c,
            n=n,
            l_max=l_max,
            seed=seed,
            halfweight=dict(raw.get("halfweight", {"type": "constant"})),
            tangents=tangents,
            pairs=pairs,
            k_values=[int(k) for k in raw.get("k_values", [])],
            points=list(raw.get("points", [])),
            tolerances=tolerances,
            raw=raw,
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunResult:
    kind: str
    rows: list[tuple[int, int, int, float, float]]
    fits: dict[str, Any]
    verdicts: dict[str, bool]
    config: ExperimentConfig

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())


# ---------------------------------------------------------------------------
# Descriptor realization
# ---------------------------------------------------------------------------

def _fourier_samples(terms: list[dict], phi: np.ndarray) -> np.ndarray:
    out = np.zeros_like(phi)
    for term in terms:
        mode = int(term.get("mode", 1))
        amp = float(term.get("amplitude", 1.0))
        kind = term.get("kind", "cos")
        if kind == "cos":
            out = out + amp * np.cos(mode * phi)
        elif kind == "sin":
            out = out + amp * np.sin(mode * phi)
        else:
            raise ConfigError(f"unknown Fourier term kind {kind!r}")
    return out


def _build_halfweight(loop, descriptor: dict) -> HalfWeight:
    kind = descriptor.get("type", "constant")
    if kind == "constant":
        return HalfWeight.constant(loop)
    if kind == "fourier":
        phi = loop.phi
        raw = 1.0 + _fourier_samples(descriptor.get("terms", []), phi)
        if np.min(raw) <= 0:
            raise ConfigError("half-weight descriptor must stay positive")
        return HalfWeight.from_samples(loop, raw)
    raise ConfigError(f"unknown half-weight descriptor type {kind!r}")


def _build_tangent(loop, hw: HalfWeight, descriptor: dict) -> LeafTangent:
    phi = loop.phi
    f = _fourier_samples(descriptor.get("f", []), phi)
    s_ell = _fourier_samples(descriptor.get("s_ell", []), phi) * hw.s_lambda
    return project_constraints(loop, f, s_ell, hw)


def _random_tangent(loop, hw: HalfWeight, rng: np.random.Generator) -> LeafTangent:
    phi = loop.phi
    f = np.zeros(loop.n)
    s = np.zeros(loop.n)
    for m in rng.integers(1, 4, size=2):
        f = f + rng.uniform(0.5, 1.5) * np.cos(int(m) * phi + rng.uniform(0, 2 * np.pi))
    for m in rng.integers(1, 4, size=2):
        s = s + rng.uniform(0.5, 1.5) * np.cos(int(m) * phi + rng.uniform(0, 2 * np.pi))
    return project_constraints(loop, f, s * hw.s_lambda, hw)


def _point_from_descriptor(descriptor: dict) -> np.ndarray:
    c = float(descriptor.get("c", 0.9))
    psi = float(descriptor.get("psi", 0.0))
    if not 0.0 <= c <= 1.0:
        raise ConfigError(f"point area coordinate must lie in [0, 1], got {c}")
    return np.array([math.sqrt(c) * np.exp(1j * psi), math.sqrt(1.0 - c)],
                    dtype=np.complex128)


# ---------------------------------------------------------------------------
# Experiment runners
# ---------------------------------------------------------------------------

def _setup(config: ExperimentConfig):
    loop = latitude_loop(float(config.c), config.n)
    lift = horizontal_lift(loop)
    hw = _build_halfweight(loop, config.halfweight)
    return loop, lift, hw


def _run_norm_sweep(config: ExperimentConfig) -> RunResult:
    loop, lift, hw = _setup(config)
    r = lift.winding
    ks = [r * l for l in range(1, config.l_max + 1)]
    table = bpu.norm_sweep(lift, hw, ks)
    rows = [(row["k"], row["l"], row["r"], row["norm_sq"], 0.0) for row in table]
    samples = [(row["k"], row["norm_sq"]) for row in table]
    fit = asymptotics.fit_leading(samples, alpha=0.5, m=3)
    ladder = asymptotics.ladder_residual_check(samples, alpha=0.5, m=1,
                                               band=config.tolerances["ladder_band"])
    target = math.sqrt(2.0 / math.pi) * r * r
    deviation = abs(fit.leading / target - 1.0)
    smallest = min((row["k"] for row in table if row["admissible"]), default=None)
    fits = {
        "leading": fit.to_dict(),
        "target": target,
        "deviation": deviation,
        "ladder": ladder.to_dict(),
        "smallest_admissible_k": smallest,
    }
    verdicts = {
        "leading_coefficient": deviation < config.tolerances["leading_rel"],
        "ladder_residual": ladder.consistent or ladder.inconclusive,
    }
    return RunResult("norm-sweep", rows, fits, verdicts, config)


def _pair_deviation(fitted: float, constant: float, target: float, scale: float) -> float:
    denom = abs(constant) * max(abs(target), 0.1 * scale)
    return abs(fitted - constant * target) / denom


def _run_theorem_check(config: ExperimentConfig) -> RunResult:
    loop, lift, hw = _setup(config)
    r = lift.winding
    if not config.tangents or not config.pairs:
        raise ConfigError("theorem-check requires tangents and pairs")
    tangents = [_build_tangent(loop, hw, d) for d in config.tangents]
    consts = calibration.measured_constants()
    ks = [r * l for l in range(1, config.l_max + 1)]
    rows = []
    fits: dict[str, Any] = {"c_omega": consts.c_omega, "c_g": consts.c_g, "pairs": []}
    verdicts: dict[str, bool] = {}
    for idx, (i, j) in enumerate(config.pairs):
        w, wp = tangents[i], tangents[j]
        omega_target = leaf.omega(w, wp, hw)
        g_target = leaf.metric_g(w, wp, hw)
        scale = math.sqrt(leaf.metric_g(w, w, hw) * leaf.metric_g(wp, wp, hw))
        sweep = bpu.pullback_sweep(lift, hw, w, wp, ks)
        for p in sweep:
            rows.append((p.k, p.k // r, r, p.g_value, p.omega_value))
        im_samples = [(p.k, p.omega_value) for p in sweep]
        re_samples = [(p.k, p.g_value) for p in sweep]
        im_fit = asymptotics.fit_leading(im_samples, alpha=2.0, m=3)
        re_fit = asymptotics.fit_leading(re_samples, alpha=2.0, m=3)
        # Pullback values are Gram ratios of k^2-sized products; cancellation
        # noise below this scale supports no ladder-slope estimate.
        noise_floor = 1e-10 * scale * max(ks) ** 2
        im_ladder = asymptotics.ladder_residual_check(im_samples, alpha=2.0, m=1,
                                                      band=config.tolerances["ladder_band"],
                                                      floor=noise_floor)
        re_ladder = asymptotics.ladder_residual_check(re_samples, alpha=2.0, m=1,
                                                      band=config.tolerances["ladder_band"],
                                                      floor=noise_floor)
        dev_omega = _pair_deviation(im_fit.leading, consts.c_omega, omega_target, scale)
        dev_g = _pair_deviation(re_fit.leading, consts.c_g, g_target, scale)
        fits["pairs"].append({
            "pair": [i, j],
            "omega_target": omega_target,
            "g_target": g_target,
            "omega_fit": im_fit.to_dict(),
            "g_fit": re_fit.to_dict(),
            "omega_deviation": dev_omega,
            "g_deviation": dev_g,
            "omega_ladder": im_ladder.to_dict(),
            "g_ladder": re_ladder.to_dict(),
        })
        tol = config.tolerances["pair_rel"]
        verdicts[f"pair{idx}_omega"] = dev_omega < tol
        verdicts[f"pair{idx}_g"] = dev_g < tol
        verdicts[f"pair{idx}_omega_ladder"] = im_ladder.consistent or im_ladder.inconclusive
        verdicts[f"pair{idx}_g_ladder"] = re_ladder.consistent or re_ladder.inconclusive
    return RunResult("theorem-check", rows, fits, verdicts, config)


def _run_derivative_crosscheck(config: ExperimentConfig) -> RunResult:
    loop, lift, hw = _setup(config)
    r = lift.winding
    ks = config.k_values or [4 * r, 8 * r, 16 * r]
    rng = np.random.default_rng(config.seed)
    if config.tangents:
        tangents = [_build_tangent(loop, hw, d) for d in config.tangents]
    else:
        tangents = [_random_tangent(loop, hw, rng) for _ in range(5)]
    rows = []
    errors = []
    for t_idx, w in enumerate(tangents):
        gamma = leaf.gamma_flow(loop, w.f)
        for k in ks:
            if k % r:
                raise ConfigError(f"cross-check level {k} must be divisible by r = {r}")
            analytic = bpu.d_bpu(lift, hw, w, k, rescale=True, gamma=gamma)
            oracle = bpu.fd_d_bpu(lift, hw, w, k, rescale=True)
            denom = float(np.linalg.norm(oracle.coefficients))
            rel = float(np.linalg.norm(analytic.coefficients - oracle.coefficients)) / denom
            errors.append(rel)
            rows.append((k, k // r, r, rel, 0.0))
    worst = max(errors)
    cal = calibration.calibrated_signs()
    fits = {
        "relative_errors": errors,
        "worst": worst,
        "calibration": cal.to_dict(),
    }
    verdicts = {"derivative_agreement": worst < config.tolerances["fd_rel"]}
    return RunResult("derivative-crosscheck", rows, fits, verdicts, config)


def _run_profile(config: ExperimentConfig) -> RunResult:
    loop, lift, hw = _setup(config)
    r = lift.winding
    k = config.k_values[0] if config.k_values else 40 * r
    if k % r:
        raise ConfigError(f"profile level {k} must be divisible by r = {r}")
    state = bpu.bpu_map(lift, hw, k)
    from .geometry import normal_frame
    samples = np.linspace(0.0, 1.5, 16)
    table = bpu.pointwise_profile(state, lift.points[0], normal_frame(loop)[0], samples)
    rows = [(k, k // r, r, float(ratio), float(wn))
            for wn, ratio in zip(table.w_norm, table.ratio)]
    deviation = table.max_abs_deviation()
    fits = {
        "k": k,
        "w_norm": [float(v) for v in table.w_norm],
        "ratio": [float(v) for v in table.ratio],
        "gaussian": [float(v) for v in table.gaussian],
        "max_abs_deviation": deviation,
    }
    verdicts = {"gaussian_profile": deviation < config.tolerances["gaussian_abs"]}
    return RunResult("profile", rows, fits, verdicts, config)


def _run_decay(config: ExperimentConfig) -> RunResult:
    loop, lift, hw = _setup(config)
    r = lift.winding
    k_max = config.k_values[0] if config.k_values else 80
    ks = [k for k in range(r, k_max + 1) if k % r == 0]
    points = config.points or [{"c": 0.9, "psi": 0.0}, {"c": 0.88, "psi": 2.0},
                               {"c": 0.92, "psi": 4.0}]
    rows = []
    fits: dict[str, Any] = {"points": []}
    verdicts = {}
    for p_idx, desc in enumerate(points):
        x = _point_from_descriptor(desc)
        report = bpu.decay_check(lift, hw, x, ks,
                                 min_distance=0.2 * bpu.SPHERE_DIAMETER)
        for k, v in zip(report.ks, report.values):
            rows.append((int(k), int(k) // r, r, float(v), 0.0))
        dist = float(np.min(fs_distance(x[None, :], loop.points)))
        fits["points"].append({"descriptor": desc, "distance": dist,
                               "report": report.to_dict()})
        verdicts[f"point{p_idx}_decay"] = bool(report.passed and not report.inconclusive)
    return RunResult("decay", rows, fits, verdicts, config)


def _run_identity_suite(config: ExperimentConfig) -> RunResult:
    tol = config.tolerances["identity_abs"]
    rng = np.random.default_rng(config.seed)
    loops = [latitude_loop(float(config.c), config.n),
             perturbed_latitude(float(config.c), config.n, amplitude=0.04,
                                seed=config.seed)]
    worst: dict[str, float] = {}

    def record(name: str, value: float):
        worst[name] = max(worst.get(name, 0.0), abs(value))

    for loop in loops:
        hw = _build_halfweight(loop, config.halfweight)
        pairs = [( _random_tangent(loop, hw, rng), _random_tangent(loop, hw, rng))
                 for _ in range(10)]
        for w, wp in pairs:
            jw, jwp = leaf.j_map(w, hw), leaf.j_map(wp, hw)
            jjw = leaf.j_map(jw, hw)
            record("j_involution", float(np.max(np.abs(jjw.f + w.f))))
            record("j_involution", float(np.max(np.abs(jjw.s_ell + w.s_ell))))
            record("compatibility", leaf.omega(w, jwp, hw) - leaf.metric_g(w, wp, hw))
            record("psi_naturality",
                   leaf.omega(w, wp, hw)
                   - leaf.omega_weinstein(leaf.psi_pushforward(w, hw),
                                          leaf.psi_pushforward(wp, hw)))
            record("omega_antisymmetry", leaf.omega(w, wp, hw) + leaf.omega(wp, w, hw))
            record("g_symmetry", leaf.metric_g(w, wp, hw) - leaf.metric_g(wp, w, hw))
            for res in w.constraint_residuals(hw) + wp.constraint_residuals(hw):
                record("constraints", res)
            for res in jw.constraint_residuals(hw):
                record("j_preserves_constraints", res)
            f_fwd = bpu.f_integrand(w, wp, hw)
            f_bwd = bpu.f_integrand(wp, w, hw)
            record("f_hermitian", abs(f_fwd - np.conj(f_bwd)))
    rows = []
    fits = {"worst_defects": {k: float(v) for k, v in sorted(worst.items())}}
    verdicts = {name: bool(v < tol) for name, v in sorted(worst.items())}
    return RunResult("identity-suite", rows, fits, verdicts, config)


_RUNNERS = {
    "norm-sweep": _run_norm_sweep,
    "theorem-check": _run_theorem_check,
    "derivative-crosscheck": _run_derivative_crosscheck,
    "profile": _run_profile,
    "decay": _run_decay,
    "identity-suite": _run_identity_suite,
}


def run_experiment(config: ExperimentConfig) -> RunResult:
    return _RUNNERS[config.kind](config)


# ---------------------------------------------------------------------------
# Artifact emission
# ---------------------------------------------------------------------------

def _format_float(x: float) -> str:
    return format(float(x), ".17g")


def emit_report(result: RunResult, outdir: Path | str) -> tuple[Path, Path]:
    """Write the CSV table and JSON manifest; byte-stable given equal inputs."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"{result.kind}.csv"
    json_path = outdir / f"{result.kind}.json"

    lines = ["k,l,r,value_re,value_im"]
    for k, l, r, re, im in result.rows:
        lines.append(f"{k},{l},{r},{_format_float(re)},{_format_float(im)}")
    csv_path.write_text("\n".join(lines) + "\n")

    cal = calibration.calibrated_signs()
    consts = calibration.measured_constants()
    manifest = {
        "config": result.config.raw,
        "config_sha256": result.config.config_hash(),
        "kind": result.kind,
        "calibrated_signs": cal.to_dict(),
        "c_omega": consts.c_omega,
        "c_g": consts.c_g,
        "tolerances": result.config.tolerances,
        "fits": result.fits,
        "verdicts": result.verdicts,
        "passed": result.passed,
    }
    json_path.write_text(json.dumps(manifest, sort_keys=True, indent=2,
                                    default=_json_default) + "\n")
    return csv_path, json_path


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Fraction):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj)!r}")
