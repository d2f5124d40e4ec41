"""Seeded Monte Carlo harness: covariance family, data generation, ROC curves.

A run is a pure function of its configuration.  Per-trial randomness comes
from seed streams derived as SeedSequence([seed, stream, trial, hypothesis]),
so results are bit-identical regardless of how many worker threads execute
the trials (each trial writes into its own preallocated slot).
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr

from .detectors import (
    DetectorKind,
    bs96_score,
    cq10_score,
    hotelling_score,
    lappw_score,
    lw_score,
    mahalanobis_score,
)
from .errors import DomainError, StructuralError
from .spectral import (
    DataMatrix,
    SamplePair,
    SymMatrix,
    _readonly,
    pooled_scm,
    spectral_decompose,
)

SQRT3 = math.sqrt(3.0)
SPIKE_BLOCK = 40

# Stream tags for SeedSequence derivation; fixed forever for reproducibility.
_MODEL_STREAM = 1
_TRIAL_STREAM = 2

_ALL_DETECTORS = tuple(DetectorKind)

_BASE_DISTS = ("uniform", "gaussian")


@dataclass(frozen=True)
class CovarianceModel:
    """Diagonal population covariance: a decaying spike block then exact ones."""

    diag: np.ndarray
    order: int
    seed: object = None

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        if d.ndim != 1 or d.size == 0:
            raise StructuralError("covariance diagonal must be a nonempty vector")
        if np.any(d <= 0.0) or not np.all(np.isfinite(d)):
            raise DomainError("covariance diagonal must be finite and positive")
        object.__setattr__(self, "diag", _readonly(d))

    @property
    def p(self) -> int:
        return self.diag.size

    def dense(self) -> np.ndarray:
        return np.diag(self.diag)

    def sym(self) -> SymMatrix:
        return SymMatrix(self.dense())


def make_covariance(order: int, p: int, rng: np.random.Generator, *, seed=None) -> CovarianceModel:
    """Build the order-P diagonal model.

    diag_j = 10**((41-j)*P/40) + eps_j for j = 1..40 with eps_j iid U[0,1],
    and exactly 1.0 beyond the block.  For p <= 40 the spike block is
    truncated to p (with a warning); the eps draw is sized to the truncated
    block.
    """
    if p < 1:
        raise StructuralError(f"dimension must be >= 1, got {p}")
    if order < 0:
        raise DomainError(f"covariance order must be >= 0, got {order}")
    k = min(p, SPIKE_BLOCK)
    if p <= SPIKE_BLOCK:
        warnings.warn(
            f"spike block truncated from {SPIKE_BLOCK} to p={p}", stacklevel=2
        )
    eps = rng.uniform(0.0, 1.0, size=k)
    j = np.arange(1, k + 1)
    head = 10.0 ** ((SPIKE_BLOCK + 1 - j) * order / SPIKE_BLOCK) + eps
    diag = np.concatenate([head, np.ones(p - k)])
    return CovarianceModel(diag, int(order), seed)


def sample_sphere(p: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the sphere of the given radius (normalized Gaussian)."""
    if p < 1:
        raise StructuralError(f"dimension must be >= 1, got {p}")
    if radius < 0.0:
        raise DomainError(f"radius must be >= 0, got {radius}")
    if radius == 0.0:
        return np.zeros(p)
    while True:
        v = rng.standard_normal(p)
        norm = float(np.linalg.norm(v))
        if norm > 0.0:
            return (radius / norm) * v


def generate_sample(
    model: CovarianceModel,
    mean: np.ndarray,
    n: int,
    rng: np.random.Generator,
    base_dist: str = "uniform",
) -> DataMatrix:
    """Color iid mean-0 variance-1 noise by the model and shift by the mean.

    The default base distribution is uniform on [-sqrt(3), sqrt(3)]; the
    gaussian variant draws standard normals instead.
    """
    mean = np.asarray(mean, dtype=float)
    if mean.shape != (model.p,):
        raise StructuralError(
            f"mean must have shape ({model.p},), got {mean.shape}"
        )
    if base_dist == "uniform":
        u = rng.uniform(-SQRT3, SQRT3, size=(model.p, n))
    elif base_dist == "gaussian":
        u = rng.standard_normal(size=(model.p, n))
    else:
        raise StructuralError(f"unknown base distribution {base_dist!r}")
    entries = mean[:, None] + np.sqrt(model.diag)[:, None] * u
    return DataMatrix(entries)


@dataclass(frozen=True)
class SimulationConfig:
    """Full description of a Monte Carlo run; the seed makes it reproducible."""

    p: int = 200
    n1: int = 150
    n2: int = 150
    cov_order: int = 0
    trials: int = 2000
    seed: int = 0
    radius: float = 1.0
    detectors: tuple = _ALL_DETECTORS
    base_dist: str = "uniform"

    def __post_init__(self):
        if self.p < 1:
            raise StructuralError(f"p must be >= 1, got {self.p}")
        if self.n1 < 2 or self.n2 < 2:
            raise StructuralError("n1 and n2 must both be >= 2")
        if self.trials < 1:
            raise StructuralError(f"trials must be >= 1, got {self.trials}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise StructuralError("seed must be a non-negative integer")
        if self.radius < 0.0:
            raise StructuralError(f"radius must be >= 0, got {self.radius}")
        if self.cov_order < 0:
            raise StructuralError(f"cov order must be >= 0, got {self.cov_order}")
        if self.base_dist not in _BASE_DISTS:
            raise StructuralError(f"base_dist must be one of {_BASE_DISTS}")
        kinds = tuple(
            k if isinstance(k, DetectorKind) else DetectorKind.from_name(k)
            for k in self.detectors
        )
        if not kinds:
            raise StructuralError("at least one detector is required")
        object.__setattr__(self, "detectors", kinds)

    @property
    def n(self) -> int:
        return self.n1 + self.n2 - 2

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "n1": self.n1,
            "n2": self.n2,
            "cov_order": self.cov_order,
            "trials": self.trials,
            "seed": self.seed,
            "radius": self.radius,
            "detectors": [k.value for k in self.detectors],
            "base_dist": self.base_dist,
        }


def trial_seed(seed: int, trial: int, hypothesis: int) -> list:
    """Entropy words for the given trial's stream; the derivation contract."""
    return [seed, _TRIAL_STREAM, trial, hypothesis]


def _trial_rng(seed: int, trial: int, hypothesis: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(trial_seed(seed, trial, hypothesis)))


def model_seed(seed: int) -> list:
    return [seed, _MODEL_STREAM]


def thread_count() -> int:
    """Worker-thread cap: HDTEST_THREADS if set, else machine parallelism."""
    env = os.environ.get("HDTEST_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            warnings.warn(f"ignoring invalid HDTEST_THREADS={env!r}", stacklevel=2)
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ScoreTable:
    """Scores for both hypotheses, one column per surviving detector."""

    config: SimulationConfig
    model: CovarianceModel
    h0: dict
    h1: dict
    absent: dict = field(default_factory=dict)

    def present(self) -> tuple:
        return tuple(k for k in self.config.detectors if k in self.h0)


_DECOMP_KINDS = frozenset(
    {DetectorKind.HOTELLING, DetectorKind.PROPOSED_LW, DetectorKind.LAPPW}
)
_SCM_KINDS = _DECOMP_KINDS | {DetectorKind.BS96}


def _score_pair(pair: SamplePair, kinds, model: CovarianceModel, pop_sym: SymMatrix) -> dict:
    """Score one sample pair with every requested detector.

    Precondition failures (DomainError family) are recorded as the exception
    so the caller can drop that detector's column; anything else propagates.
    """
    scm = decomp = None
    if any(k in _SCM_KINDS for k in kinds):
        scm = pooled_scm(pair)
    if any(k in _DECOMP_KINDS for k in kinds):
        decomp = spectral_decompose(scm)
    out = {}
    for kind in kinds:
        try:
            if kind is DetectorKind.HOTELLING:
                if pair.p > pair.n:
                    res = hotelling_score(pair)  # raises the precondition error
                else:
                    res = hotelling_score(pair, decomp=decomp)
            elif kind is DetectorKind.PROPOSED_LW:
                res = lw_score(pair, decomp=decomp)
            elif kind is DetectorKind.BS96:
                res = bs96_score(pair, scm=scm)
            elif kind is DetectorKind.CQ10:
                res = cq10_score(pair)
            elif kind is DetectorKind.LAPPW:
                res = lappw_score(pair, model, decomp=decomp)
            elif kind is DetectorKind.MAHALANOBIS_ORACLE:
                res = mahalanobis_score(pair, pop_sym)
            else:  # pragma: no cover - enum is closed
                raise StructuralError(f"unhandled detector {kind}")
            out[kind] = res.score
        except DomainError as exc:
            out[kind] = exc
    return out


def run_trials(config: SimulationConfig) -> ScoreTable:
    """Run the full two-hypothesis Monte Carlo described by the config.

    Each trial draws an independent H0 pair (both means zero) and an
    independent H1 pair (group 1 mean drawn fresh from the radius sphere).
    The covariance model's eps draws are fixed once per run.
    """
    model = make_covariance(
        config.cov_order,
        config.p,
        np.random.default_rng(np.random.SeedSequence(model_seed(config.seed))),
        seed=tuple(model_seed(config.seed)),
    )
    pop_sym = model.sym()
    zeros = np.zeros(config.p)
    kinds = config.detectors

    def one_trial(t: int):
        rng0 = _trial_rng(config.seed, t, 0)
        pair0 = SamplePair(
            generate_sample(model, zeros, config.n1, rng0, config.base_dist),
            generate_sample(model, zeros, config.n2, rng0, config.base_dist),
        )
        rng1 = _trial_rng(config.seed, t, 1)
        mu = sample_sphere(config.p, config.radius, rng1)
        pair1 = SamplePair(
            generate_sample(model, mu, config.n1, rng1, config.base_dist),
            generate_sample(model, zeros, config.n2, rng1, config.base_dist),
        )
        return (
            _score_pair(pair0, kinds, model, pop_sym),
            _score_pair(pair1, kinds, model, pop_sym),
        )

    results = [None] * config.trials
    workers = min(thread_count(), config.trials)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for t, res in enumerate(pool.map(one_trial, range(config.trials))):
                results[t] = res
    else:
        for t in range(config.trials):
            results[t] = one_trial(t)

    # Aggregate in trial order; a detector that failed its precondition on any
    # trial is dropped entirely, with the first failure as the reason.
    absent = {}
    h0 = {k: np.empty(config.trials) for k in kinds}
    h1 = {k: np.empty(config.trials) for k in kinds}
    for t, (r0, r1) in enumerate(results):
        for kind in kinds:
            for scores, r in ((h0, r0), (h1, r1)):
                v = r[kind]
                if isinstance(v, Exception):
                    absent.setdefault(kind, str(v))
                else:
                    scores[kind][t] = v
    for kind in absent:
        h0.pop(kind, None)
        h1.pop(kind, None)
    for kind in list(h0):
        h0[kind] = _readonly(h0[kind])
        h1[kind] = _readonly(h1[kind])
    return ScoreTable(config=config, model=model, h0=h0, h1=h1, absent={k: v for k, v in absent.items()})


@dataclass(frozen=True)
class RocCurve:
    """Empirical ROC from threshold sweeping, plus its trapezoidal AUC."""

    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    def __post_init__(self):
        fpr = _readonly(self.fpr)
        tpr = _readonly(self.tpr)
        if fpr.shape != tpr.shape or fpr.ndim != 1 or fpr.size < 2:
            raise StructuralError("inconsistent ROC point arrays")
        if np.any(np.diff(fpr) < 0.0) or np.any(np.diff(tpr) < 0.0):
            raise StructuralError("ROC points must be monotone non-decreasing")
        if not (fpr[0] == 0.0 and tpr[0] == 0.0 and fpr[-1] == 1.0 and tpr[-1] == 1.0):
            raise StructuralError("ROC must run from (0,0) to (1,1)")
        if abs(self.auc - _trapezoid(fpr, tpr)) > 1e-12:
            raise StructuralError("stored AUC disagrees with the trapezoid rule")
        object.__setattr__(self, "fpr", fpr)
        object.__setattr__(self, "tpr", tpr)


def _trapezoid(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum((x[1:] - x[:-1]) * (y[1:] + y[:-1]) * 0.5))


def roc_curve(h0_scores: np.ndarray, h1_scores: np.ndarray) -> RocCurve:
    """Sweep thresholds over the union of scores; point = fraction strictly above.

    Tied scores collapse to a single threshold step, and the endpoints (0,0)
    and (1,1) are always present.
    """
    h0 = np.asarray(h0_scores, dtype=float)
    h1 = np.asarray(h1_scores, dtype=float)
    if h0.size == 0 or h1.size == 0:
        raise StructuralError("both score samples must be nonempty")
    if not (np.all(np.isfinite(h0)) and np.all(np.isfinite(h1))):
        raise StructuralError("scores must be finite")
    thresholds = np.unique(np.concatenate([h0, h1]))[::-1]
    h0s = np.sort(h0)
    h1s = np.sort(h1)
    fpr = (h0.size - np.searchsorted(h0s, thresholds, side="right")) / h0.size
    tpr = (h1.size - np.searchsorted(h1s, thresholds, side="right")) / h1.size
    fpr = np.concatenate([[0.0], fpr, [1.0]])
    tpr = np.concatenate([[0.0], tpr, [1.0]])
    keep = np.ones(fpr.size, dtype=bool)
    keep[1:] = (np.diff(fpr) != 0.0) | (np.diff(tpr) != 0.0)
    fpr, tpr = fpr[keep], tpr[keep]
    return RocCurve(fpr, tpr, _trapezoid(fpr, tpr))


class NormalitySummary(NamedTuple):
    mean: float
    variance: float
    ks_statistic: float


def normality_check(z: np.ndarray) -> NormalitySummary:
    """Sample mean, sample variance, and the KS distance to a standard normal.

    KS is the sup over sample points of both one-sided gaps between the
    empirical CDF and the standard normal CDF.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size < 2:
        raise StructuralError("need at least 2 values")
    if not np.all(np.isfinite(z)):
        raise StructuralError("values must be finite")
    mean = float(z.mean())
    variance = float(z.var(ddof=1))
    zs = np.sort(z)
    cdf = ndtr(zs)
    i = np.arange(1, zs.size + 1)
    d_plus = float(np.max(i / zs.size - cdf))
    d_minus = float(np.max(cdf - (i - 1) / zs.size))
    return NormalitySummary(mean, variance, max(d_plus, d_minus))


def null_z_samples(config: SimulationConfig) -> np.ndarray:
    """Z scores of the shrinkage detector over H0-only trials.

    Uses the same per-trial H0 seed streams as run_trials, so a null check is
    consistent with the matching simulate run.
    """
    model = make_covariance(
        config.cov_order,
        config.p,
        np.random.default_rng(np.random.SeedSequence(model_seed(config.seed))),
        seed=tuple(model_seed(config.seed)),
    )
    zeros = np.zeros(config.p)

    def one(t: int) -> float:
        rng = _trial_rng(config.seed, t, 0)
        pair = SamplePair(
            generate_sample(model, zeros, config.n1, rng, config.base_dist),
            generate_sample(model, zeros, config.n2, rng, config.base_dist),
        )
        return lw_score(pair).score

    out = np.empty(config.trials)
    workers = min(thread_count(), config.trials)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for t, z in enumerate(pool.map(one, range(config.trials))):
                out[t] = z
    else:
        for t in range(config.trials):
            out[t] = one(t)
    return out


def write_scores_csv(table: ScoreTable, path) -> None:
    """Write (trial, hypothesis, detector, score) rows at full precision."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("trial,hypothesis,detector,score\n")
        for t in range(table.config.trials):
            for tag, scores in (("h0", table.h0), ("h1", table.h1)):
                for kind in table.config.detectors:
                    if kind in scores:
                        fh.write(
                            f"{t},{tag},{kind.value},{repr(float(scores[kind][t]))}\n"
                        )


def write_roc_csv(curve: RocCurve, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("fpr,tpr\n")
        for x, y in zip(curve.fpr, curve.tpr):
            fh.write(f"{repr(float(x))},{repr(float(y))}\n")
