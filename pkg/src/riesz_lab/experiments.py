"""Experiment configs, runners and result persistence.

A run is fully determined by its config (including the seed), so the run id
is a hash of the canonical config and re-running a config overwrites the
same run directory with byte-identical CSV output.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import laguerre, spectral, weighted
from .cache import ArtifactCache, default_root
from .transform import random_expansion, synthesize

CSV_VERSION = "riesz-lab-results v1"
CSV_COLUMNS = ["experiment", "parameters", "measured", "reference", "verdict"]

EXIT_PASS = 0
EXIT_FAIL = 2
EXIT_CONFIG = 3

Kind = Literal[
    "trace_slope",
    "moment_slope",
    "square_fn",
    "wave_support",
    "riesz_converge",
    "sharpness_radial",
    "sharpness_weighted",
    "karadzhov_sup",
    "weyl_identity",
]

DESCRIPTIONS = {
    "trace_slope": "log-log slope of the weighted band-projection norm (or box mass) against k",
    "moment_slope": "log-log slope of ∫h_k²(1+|x|)^{±α} against k, checked as a lower bound",
    "square_fn": "square-function ratio ‖𝔖_δf‖²_w / (δ^{1-ε}‖f‖²_w) over random bandlimited f",
    "wave_support": "kernel mass of the truncated cos(t√H) outside |x-y| <= t + margin as K grows",
    "riesz_converge": "Bochner-Riesz means of a bandlimited f converging as R grows",
    "sharpness_radial": "normalized radial counterexample quantity against k",
    "sharpness_weighted": "necessary Riesz order implied by the g_k, G_k family",
    "karadzhov_sup": "sup of the level-k projection kernel diagonal against k",
    "weyl_identity": "Weyl-derivative reconstruction of F(H) against the direct multiplier",
}


class ConfigError(ValueError):
    """Invalid experiment configuration, with dotted field paths in the message."""


class Range(BaseModel):
    """Geometric integer range base**start .. base**stop."""

    model_config = ConfigDict(extra="forbid")
    base: int = 2
    start: int
    stop: int

    @model_validator(mode="after")
    def _ordered(self):
        if self.stop < self.start:
            raise ValueError("stop must be >= start")
        if self.base < 2:
            raise ValueError("base must be >= 2")
        return self

    def values(self) -> list[int]:
        return [self.base**j for j in range(self.start, self.stop + 1)]


class ExperimentSection(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: Kind
    n: int = Field(1, ge=1, le=3)
    seed: int = 0


class Parameters(BaseModel):
    model_config = ConfigDict(extra="forbid")
    k: list[int] | Range | None = None
    K: list[int] | Range | int | None = None
    delta: list[float] | Range | None = None
    alpha: float | None = Field(None, ge=0)
    sign: Literal[-1, 1] = -1
    lam: float | None = Field(None, ge=0)
    p: float | None = None
    eps: float = Field(0.05, gt=0, le=0.5)
    t: float | None = Field(None, ge=0)
    margin: float = Field(0.1, gt=0)
    M: float | None = Field(None, gt=0)
    samples: int = Field(10, ge=1)
    radii: list[float] | None = None
    center: float | None = None
    radius: float = Field(1.0, gt=0)
    quantity: Literal["weighted_norm", "box_mass"] = "weighted_norm"
    threshold: float | None = Field(None, gt=0)

    @field_validator("k", "K", "delta", "radii")
    @classmethod
    def _non_empty(cls, v):
        if isinstance(v, list) and not v:
            raise ValueError("range must be non-empty")
        return v


class Quadrature(BaseModel):
    model_config = ConfigDict(extra="forbid")
    order: int = Field(24, ge=4, le=64)


class Output(BaseModel):
    model_config = ConfigDict(extra="forbid")
    dir: str | None = None


class Tolerance(BaseModel):
    model_config = ConfigDict(extra="forbid")
    slope: float | None = Field(None, gt=0)
    value: float | None = Field(None, gt=0)


_REQUIRED = {
    "trace_slope": ["k", "alpha"],
    "moment_slope": ["k", "alpha"],
    "square_fn": ["delta", "alpha", "K"],
    "wave_support": ["K", "t"],
    "riesz_converge": ["K", "lam", "radii"],
    "sharpness_radial": ["k", "p"],
    "sharpness_weighted": ["k", "alpha"],
    "karadzhov_sup": ["k"],
    "weyl_identity": ["K", "center"],
}


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    experiment: ExperimentSection
    parameters: Parameters = Parameters()
    quadrature: Quadrature = Quadrature()
    output: Output = Output()
    tolerance: Tolerance = Tolerance()

    @model_validator(mode="after")
    def _kind_requirements(self):
        kind, prm = self.experiment.kind, self.parameters
        missing = [f"parameters.{name}" for name in _REQUIRED[kind] if getattr(prm, name) is None]
        if missing:
            raise ValueError(f"{kind} requires {', '.join(missing)}")
        if kind == "sharpness_radial" and not prm.p > 2:
            raise ValueError("parameters.p must exceed 2 for sharpness_radial")
        if kind == "square_fn":
            for d in _as_list(prm.delta, float):
                if not 0 < d <= 0.5:
                    raise ValueError("parameters.delta entries must lie in (0, 1/2]")
        if kind in ("sharpness_weighted",) and self.experiment.n not in (1, 2):
            raise ValueError("experiment.n must be 1 or 2 for sharpness_weighted")
        if kind == "weyl_identity" and prm.center - prm.radius < 0:
            raise ValueError("parameters.center - parameters.radius must be >= 0 (support in [0, ∞))")
        return self

    def canonical(self) -> str:
        body = self.model_dump(mode="json", exclude={"output"})
        return json.dumps(body, sort_keys=True, separators=(",", ":"))

    def run_id(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def _as_list(v, cast=int) -> list:
    if v is None:
        return []
    if isinstance(v, Range):
        return [cast(x) for x in v.values()]
    if isinstance(v, list):
        return [cast(x) for x in v]
    return [cast(v)]


def _format_loc(loc) -> str:
    return ".".join(str(p) for p in loc if not (isinstance(p, str) and p in {"list[int]", "int", "Range"}))


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            path = _format_loc(err["loc"]) or "<root>"
            lines.append(f"{path}: {err['msg']}")
        raise ConfigError("; ".join(sorted(set(lines)))) from None


def load_config(path: str | Path) -> ExperimentConfig:
    import tomli

    try:
        data = tomli.loads(Path(path).read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data)


# ------------------------------------------------------------------- results


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    parameters: tuple[tuple[str, float], ...]
    measured: float
    reference: float | None
    verdict: Literal["pass", "fail", "informational"]

    def sort_key(self):
        return tuple(v for _, v in self.parameters)

    def csv_fields(self) -> list[str]:
        params = ";".join(f"{k}={_fmt(v)}" for k, v in self.parameters)
        ref = "" if self.reference is None else _fmt(self.reference)
        return [self.experiment, params, _fmt(self.measured), ref, self.verdict]


def _fmt(v: float) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


@dataclass
class RunResult:
    config: ExperimentConfig
    rows: list[ResultRow]
    summary: dict[str, Any]

    @property
    def run_id(self) -> str:
        return self.config.run_id()

    @property
    def verdict(self) -> str:
        return self.summary["verdict"]

    @property
    def exit_code(self) -> int:
        return EXIT_FAIL if self.verdict == "fail" else EXIT_PASS

    def csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {CSV_VERSION}\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for row in sorted(self.rows, key=ResultRow.sort_key):
            wr.writerow(row.csv_fields())
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary, sort_keys=True, indent=2)


def _row(kind, params: dict, measured, reference=None, verdict="informational") -> ResultRow:
    return ResultRow(kind, tuple(params.items()), float(measured), None if reference is None else float(reference), verdict)


def _summary(kind: str, verdict: str, extra: dict | None = None, **more) -> dict:
    out = dict(extra or {})
    out.update(more)
    out.update(kind=kind, verdict=verdict)
    return out


def _pass(ok: bool) -> str:
    return "pass" if ok else "fail"


# ------------------------------------------------------------------- runners


def _run_trace_slope(cfg: ExperimentConfig, cache: ArtifactCache) -> RunResult:
    prm, n, kind = cfg.parameters, cfg.experiment.n, cfg.experiment.kind
    ks = _as_list(prm.k)
    if prm.quantity == "box_mass":
        M = prm.M if prm.M is not None else 1.0
        vals = [weighted.local_band_mass(k, n, M) for k in ks]
        target, tol = -0.5, cfg.tolerance.slope or 0.05
    else:
        vals = [weighted.band_projection_weighted_norm(k, n, prm.alpha, -1).value for k in ks]
        target = -0.25 if prm.alpha > 1 else -min(prm.alpha, 1) / 4
        tol = cfg.tolerance.slope or (0.05 if n == 1 else 0.07)
    rep = weighted.fit_slope(ks, vals)
    informational = prm.quantity == "weighted_norm" and prm.alpha <= 1
    verdict = "informational" if informational else _pass(rep.within(target, tol))
    rows = [_row(kind, {"k": k}, v) for k, v in zip(ks, vals)]
    return RunResult(cfg, rows, _summary(kind, verdict, rep.summary(target, tol), quantity=prm.quantity))


def _run_moment_slope(cfg, cache) -> RunResult:
    prm, kind = cfg.parameters, cfg.experiment.kind
    ks = _as_list(prm.k)
    vals = [weighted.hermite_weighted_moment(k, prm.alpha, prm.sign) for k in ks]
    rep = weighted.fit_slope(ks, vals)
    tol = cfg.tolerance.slope or 0.05
    lower = prm.alpha / 2 if prm.sign == 1 else -min(prm.alpha, 1) / 2
    ok = rep.slope >= lower - tol
    verdict = "informational" if (prm.sign == -1 and prm.alpha == 1) else _pass(ok)
    rows = [_row(kind, {"k": k}, v) for k, v in zip(ks, vals)]
    summ = rep.summary()
    summ.update(lower_bound=lower, tolerance=tol)
    return RunResult(cfg, rows, _summary(kind, verdict, summ))


def _run_square_fn(cfg, cache) -> RunResult:
    prm, n, kind = cfg.parameters, cfg.experiment.n, cfg.experiment.kind
    if n != 1:
        raise ConfigError("experiment.n: square_fn runs in dimension 1")
    K = _as_list(prm.K)[0]
    deltas = sorted(_as_list(prm.delta, float), reverse=True)
    rng = np.random.default_rng(cfg.experiment.seed)
    rule = cache.rule(K, prm.alpha, cfg.quadrature.order)
    eigs = 2 * np.arange(K + 1) + n
    kernels = {d: spectral.square_function_kernel(eigs, d) for d in deltas}
    rows, ratios, logs = [], [], []
    for s in range(prm.samples):
        f = random_expansion(n, K, rng)
        G = spectral.weighted_level_gram(f, rule, prm.alpha, -1)
        for d in deltas:
            norms = spectral.square_function_weighted_norms(f, d, prm.alpha, rule, kernel=kernels[d], gram=G)
            ratio = norms.total / (d ** (1 - prm.eps) * norms.f_norm_sq)
            rows.append(_row(kind, {"delta": d, "sample": s}, ratio))
            ratios.append(ratio)
            logs.append(math.log(1 / d))
    spread = max(ratios) / min(ratios)
    # slope of log ratio against log δ^{-1}; a clean bound leaves no upward trend
    slope = float(np.polyfit(logs, np.log(ratios), 1)[0]) if len(set(logs)) > 1 else 0.0
    ok = spread < 100 and slope <= 0.1
    return RunResult(cfg, rows, _summary(kind, _pass(ok), spread=spread, slope_vs_log_inv_delta=slope, spread_limit=100, slope_limit=0.1))


def _run_wave_support(cfg, cache) -> RunResult:
    prm, kind = cfg.parameters, cfg.experiment.kind
    if cfg.experiment.n != 1:
        raise ConfigError("experiment.n: wave_support runs in dimension 1")
    Ks = sorted(_as_list(prm.K))
    masses = [float(spectral.wave_outside_mass(prm.t, K, prm.margin).relative) for K in Ks]
    threshold = prm.threshold or 1e-3
    monotone = all(b <= 1.1 * a for a, b in zip(masses, masses[1:]))
    below = masses[-1] < threshold
    rows = [_row(kind, {"K": K}, m) for K, m in zip(Ks, masses)]
    return RunResult(
        cfg, rows, _summary(kind, _pass(monotone and below), monotone=monotone, final=masses[-1], threshold=threshold)
    )


def _run_riesz_converge(cfg, cache) -> RunResult:
    prm, n, kind = cfg.parameters, cfg.experiment.n, cfg.experiment.kind
    K = _as_list(prm.K)[0]
    rng = np.random.default_rng(cfg.experiment.seed)
    f = random_expansion(n, K, rng, decay=1.0)
    radii = sorted(prm.radii)
    x = np.linspace(-3, 3, 61)
    pts = x[:, None] if n == 1 else np.stack(np.meshgrid(*([x] * n), indexing="ij"), -1).reshape(-1, n)
    base = synthesize(f, pts if n > 1 else x)
    rows, errs, ok = [], [], True
    Emax = 2 * K + n
    for R in radii:
        s = spectral.bochner_riesz(f, prm.lam, R)
        err = float(np.max(np.abs(synthesize(s, pts if n > 1 else x) - base)))
        l2 = float(np.linalg.norm(s.coeffs - f.coeffs))
        rate = 1 - (1 - Emax / R**2) ** prm.lam if R**2 > Emax else 1.0
        good = l2 <= rate * f.norm() * (1 + 1e-12) + 1e-14
        ok &= good
        rows.append(_row(kind, {"R": R}, err, None, _pass(good)))
        errs.append(err)
    tail = [e for R, e in zip(radii, errs) if R**2 > Emax]
    ok &= all(b <= a * (1 + 1e-9) + 1e-13 for a, b in zip(tail, tail[1:]))
    if prm.lam == 0 and tail:
        ok &= tail[-1] < 1e-10
    mx = spectral.riesz_maximal(f, prm.lam, np.array(radii + [math.sqrt(Emax) * 1e4]), pts if n > 1 else x)
    dominates = bool(np.all(mx >= np.abs(base) * (1 - 1e-12))) if prm.lam == 0 else True
    ok &= dominates
    return RunResult(cfg, rows, _summary(kind, _pass(ok), final_error=errs[-1], maximal_dominates=dominates))


def _run_sharpness_radial(cfg, cache) -> RunResult:
    prm, n, kind = cfg.parameters, cfg.experiment.n, cfg.experiment.kind
    ks = _as_list(prm.k)
    res = [laguerre.counterexample_fk(prm.p, n, k) for k in ks]
    rep = weighted.fit_slope(ks, [r.quantity for r in res])
    target, tol = res[0].reference_exponent, cfg.tolerance.slope or 0.05
    rows = [_row(kind, {"k": r.k}, r.quantity, target) for r in res]
    return RunResult(cfg, rows, _summary(kind, _pass(rep.within(target, tol)), rep.summary(target, tol)))


def _run_sharpness_weighted(cfg, cache) -> RunResult:
    prm, n, kind = cfg.parameters, cfg.experiment.n, cfg.experiment.kind
    ks = _as_list(prm.k)
    res = [laguerre.counterexample_gk(k, prm.alpha, n) for k in ks]
    implied = weighted.fit_slope(ks, [r.level_weighted_norm / r.g_weighted_norm for r in res])
    growth = weighted.fit_slope(ks, [r.level_weighted_norm / r.level_norm for r in res])
    capture = weighted.fit_slope(ks, [r.level_norm / r.g_weighted_norm for r in res])
    target, tol = max((prm.alpha - 1) / 4, 0.0), cfg.tolerance.slope or 0.1
    nonzero = all(abs(r.diagonal_coefficient) > 0 for r in res)
    rows = []
    for r in res:
        rows.append(_row(kind, {"k": r.k, "quantity": 0}, r.level_weighted_norm / r.g_weighted_norm, None))
        rows.append(_row(kind, {"k": r.k, "quantity": 1}, r.diagonal_coefficient, None))
    return RunResult(
        cfg,
        rows,
        _summary(
            kind,
            _pass(implied.within(target, tol) and nonzero),
            implied_lambda=implied.slope,
            target=target,
            tolerance=tol,
            weighted_to_plain_slope=growth.slope,
            level_capture_slope=capture.slope,
            coefficients_nonzero=nonzero,
        ),
    )


def _run_karadzhov_sup(cfg, cache) -> RunResult:
    prm, n, kind = cfg.parameters, cfg.experiment.n, cfg.experiment.kind
    ks = _as_list(prm.k)
    res = [weighted.restriction_sup_norm(k, n, prm.M) for k in ks]
    vals = [r.value for r in res]
    rows = [_row(kind, {"k": k}, v) for k, v in zip(ks, vals)]
    if n >= 2:
        target = n / 4 - 0.5
        if target == 0:
            med = float(np.median(vals))
            ok = max(vals) <= 3 * med and min(vals) >= med / 3
            return RunResult(cfg, rows, _summary(kind, _pass(ok), median=med, max=max(vals), min=min(vals)))
        rep = weighted.fit_slope(ks, vals)
        tol = cfg.tolerance.slope or 0.05
        return RunResult(cfg, rows, _summary(kind, _pass(rep.within(target, tol)), rep.summary(target, tol)))
    rep = weighted.fit_slope(ks, vals)
    tol = cfg.tolerance.slope or 0.05
    if prm.M is None:
        return RunResult(cfg, rows, _summary(kind, "informational", rep.summary()))
    return RunResult(cfg, rows, _summary(kind, _pass(rep.within(-0.25, tol)), rep.summary(-0.25, tol)))


def _run_weyl_identity(cfg, cache) -> RunResult:
    prm, n, kind = cfg.parameters, cfg.experiment.n, cfg.experiment.kind
    K = _as_list(prm.K)[0]
    rng = np.random.default_rng(cfg.experiment.seed)
    f = random_expansion(n, K, rng)
    F = spectral.shifted_bump(prm.center, prm.radius)
    a = spectral.riesz_from_weyl(F, f)
    b = spectral.apply_multiplier(f, F)
    mismatch = float(np.max(np.abs(a.coeffs - b.coeffs)))
    tol = cfg.tolerance.value or 1e-6
    rows = [_row(kind, {"level": k}, float(np.max(np.abs((a.coeffs - b.coeffs)[f.levels == k]), initial=0.0)), None) for k in range(K + 1)]
    return RunResult(cfg, rows, _summary(kind, _pass(mismatch < tol), mismatch=mismatch, tolerance=tol))


RUNNERS: dict[str, Callable[[ExperimentConfig, ArtifactCache], RunResult]] = {
    "trace_slope": _run_trace_slope,
    "moment_slope": _run_moment_slope,
    "square_fn": _run_square_fn,
    "wave_support": _run_wave_support,
    "riesz_converge": _run_riesz_converge,
    "sharpness_radial": _run_sharpness_radial,
    "sharpness_weighted": _run_sharpness_weighted,
    "karadzhov_sup": _run_karadzhov_sup,
    "weyl_identity": _run_weyl_identity,
}


class ExperimentError(RuntimeError):
    """Numerical failure inside a run, tagged with the experiment it came from."""


def run_experiment(cfg: ExperimentConfig, cache: ArtifactCache | None = None) -> RunResult:
    cache = ArtifactCache() if cache is None else cache
    kind = cfg.experiment.kind
    try:
        result = RUNNERS[kind](cfg, cache)
    except ConfigError:
        raise
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise ExperimentError(f"{kind} (run {cfg.run_id()}): {exc}") from exc
    result.summary["run_id"] = cfg.run_id()
    result.summary["rows"] = len(result.rows)
    return result


# ------------------------------------------------------------------ run store


class RunStore:
    """Directory of finished runs: <root>/<run-id>/{results.csv, summary.json, config.json}."""

    def __init__(self, root: str | Path | None = None):
        env = os.environ.get("RIESZ_LAB_RUNS")
        self.root = Path(root) if root is not None else Path(env) if env else default_root() / "runs"

    def save(self, result: RunResult) -> Path:
        target = Path(result.config.output.dir) if result.config.output.dir else self.root / result.run_id
        target.mkdir(parents=True, exist_ok=True)
        (target / "results.csv").write_text(result.csv_text())
        (target / "summary.json").write_text(result.summary_json() + "\n")
        (target / "config.json").write_text(result.config.model_dump_json(indent=2) + "\n")
        if target != self.root / result.run_id:
            # keep the id lookup working for runs written to a custom directory
            link = self.root / result.run_id
            link.mkdir(parents=True, exist_ok=True)
            for name in ("results.csv", "summary.json", "config.json"):
                (link / name).write_bytes((target / name).read_bytes())
        return target

    def _dir(self, run_id: str) -> Path:
        if not run_id or any(c not in "0123456789abcdef" for c in run_id):
            raise KeyError(run_id)
        d = self.root / run_id
        if not (d / "summary.json").exists():
            raise KeyError(run_id)
        return d

    def summary(self, run_id: str) -> dict:
        return json.loads((self._dir(run_id) / "summary.json").read_text())

    def csv(self, run_id: str) -> str:
        return (self._dir(run_id) / "results.csv").read_text()

    def list(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(p.name for p in self.root.iterdir() if (p / "summary.json").exists())
