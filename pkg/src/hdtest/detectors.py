"""Two-sample mean-shift test statistics.

Every detector consumes a SamplePair and returns a ScoreResult whose score is
oriented so that larger means more evidence of a mean difference.  Exact
prefactor conventions:

  mahalanobis:  (xbar1-xbar2)' R^{-1} (xbar1-xbar2)            (no prefactor)
  hotelling:    (xbar1-xbar2)' S_n^{-1} (xbar1-xbar2)          (no prefactor)
  lw:           Z = (T2 - p)/sqrt(2p), T2 = k*(diff)' Rhat^{-1} (diff)
  bs96:         [k*||diff||^2 - tr S_n] / sqrt((2(n+1)/n) * B_n)
  cq10:         cross-product U-statistic on the raw (uncentered) columns
  lappw:        k*(diff)' (S_n + lambda* I)^{-1} (diff)

with k = n1*n2/(n1+n2) and n = n1+n2-2.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DegenerateVarianceError,
    DomainError,
    SingularCovarianceError,
    StructuralError,
)
from .shrinkage import ShrinkageEstimate, optimize_loading, shrink_eigenvalues
from .spectral import (
    SamplePair,
    SpectralDecomposition,
    SymMatrix,
    pooled_scm,
    quad_form_inverse,
    spectral_decompose,
)

# Relative eigenvalue floor below which the plain sample covariance is
# declared numerically singular for the classical statistic.
HOTELLING_SINGULARITY_TOL = 1e-12


class DetectorKind(enum.Enum):
    """Detector identities; values are the stable CLI / serialization names."""

    HOTELLING = "hotelling"
    PROPOSED_LW = "lw"
    BS96 = "bs96"
    CQ10 = "cq10"
    LAPPW = "lappw"
    MAHALANOBIS_ORACLE = "oracle"

    @classmethod
    def from_name(cls, name: str) -> "DetectorKind":
        for kind in cls:
            if kind.value == name:
                return kind
        known = ", ".join(k.value for k in cls)
        raise StructuralError(f"unknown detector {name!r} (known: {known})")


@dataclass(frozen=True)
class ScoreResult:
    """A detector decision value plus auxiliary diagnostics."""

    kind: DetectorKind
    score: float
    aux: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise DomainError(f"{self.kind.value} produced a non-finite score")


def _inv_quad(cov, v: np.ndarray) -> float:
    """v' C^{-1} v for a PD matrix-like or ShrinkageEstimate."""
    if isinstance(cov, ShrinkageEstimate):
        return cov.inverse_quad(v)
    m = np.asarray(getattr(cov, "entries", cov), dtype=float)
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError("covariance is not positive definite") from exc
    y = solve_triangular(chol, v, lower=True)
    return float(y @ y)


def mahalanobis_score(pair: SamplePair, pop_cov) -> ScoreResult:
    """Clairvoyant detector using the true population covariance."""
    score = _inv_quad(pop_cov, pair.mean_diff)
    return ScoreResult(DetectorKind.MAHALANOBIS_ORACLE, score)


def hotelling_score(
    pair: SamplePair,
    *,
    decomp: SpectralDecomposition | None = None,
    estimator_override=None,
) -> ScoreResult:
    """Classical statistic on the inverse pooled sample covariance.

    Requires p <= n and a numerically nonsingular S_n.  `estimator_override`
    is a test hook replacing S_n by an arbitrary PD matrix.
    """
    if estimator_override is not None:
        score = _inv_quad(estimator_override, pair.mean_diff)
        return ScoreResult(DetectorKind.HOTELLING, score)
    if pair.p > pair.n:
        raise SingularCovarianceError(
            f"sample covariance is singular for p={pair.p} > n={pair.n}"
        )
    if decomp is None:
        decomp = spectral_decompose(pooled_scm(pair))
    lam = decomp.eigenvalues
    if lam[0] <= 0.0 or lam[-1] < HOTELLING_SINGULARITY_TOL * lam[0]:
        raise SingularCovarianceError("pooled sample covariance is numerically singular")
    score = quad_form_inverse(decomp, lam, pair.mean_diff)
    return ScoreResult(DetectorKind.HOTELLING, score)


def lw_score(
    pair: SamplePair,
    *,
    decomp: SpectralDecomposition | None = None,
    estimator_override=None,
) -> ScoreResult:
    """Shrinkage statistic, centered and scaled to a standard-normal-like Z.

    aux carries the raw quadratic form 't2_lw'.  `estimator_override` is a
    test hook replacing the shrunk covariance estimate.
    """
    if decomp is None and estimator_override is None:
        decomp = spectral_decompose(pooled_scm(pair))
    if estimator_override is not None:
        t2 = pair.diff_scale * _inv_quad(estimator_override, pair.mean_diff)
    else:
        dhat = shrink_eigenvalues(decomp, pair.n, pair.p)
        t2 = pair.diff_scale * quad_form_inverse(decomp, dhat, pair.mean_diff)
    z = (t2 - pair.p) / math.sqrt(2.0 * pair.p)
    return ScoreResult(DetectorKind.PROPOSED_LW, z, aux={"t2_lw": t2})


def bs96_score(pair: SamplePair, *, scm: SymMatrix | None = None) -> ScoreResult:
    """Euclidean-norm statistic standardized by the trace-based variance estimate.

    B_n = n^2/((n+2)(n-1)) * (tr(S^2) - (tr S)^2 / n); the whole product
    (2(n+1)/n) * B_n sits under the square root.
    """
    n = pair.n
    if scm is None:
        scm = pooled_scm(pair)
    s = scm.entries
    tr = float(np.trace(s))
    tr2 = float(np.sum(s * s))
    bn = n * n / ((n + 2.0) * (n - 1.0)) * (tr2 - tr * tr / n)
    if bn <= 0.0:
        raise DegenerateVarianceError(f"variance estimate B_n = {bn} is not positive")
    diff = pair.mean_diff
    numerator = pair.diff_scale * float(diff @ diff) - tr
    score = numerator / math.sqrt((2.0 * (n + 1.0) / n) * bn)
    return ScoreResult(
        DetectorKind.BS96, score, aux={"b_n": bn, "numerator": numerator}
    )


def cq10_score(pair: SamplePair) -> ScoreResult:
    """Cross-product U-statistic; unbiased for ||mu1 - mu2||^2.

    Works on raw uncentered columns.  The diagonal-free sums are computed in
    O(p*(n1+n2)) via sum_{i != j} x_i' x_j = ||sum_i x_i||^2 - sum_i ||x_i||^2.
    """
    x1, x2 = pair.x1.entries, pair.x2.entries
    n1, n2 = pair.n1, pair.n2
    s1 = x1.sum(axis=1)
    s2 = x2.sum(axis=1)
    q1 = (float(s1 @ s1) - float(np.sum(x1 * x1))) / (n1 * (n1 - 1.0))
    q2 = (float(s2 @ s2) - float(np.sum(x2 * x2))) / (n2 * (n2 - 1.0))
    cross = 2.0 * float(s1 @ s2) / (n1 * n2)
    return ScoreResult(DetectorKind.CQ10, q1 + q2 - cross)


def lappw_score(
    pair: SamplePair,
    pop,
    *,
    decomp: SpectralDecomposition | None = None,
) -> ScoreResult:
    """Diagonal-loading statistic with the clairvoyantly optimized loading.

    The loading maximizes the SNR proxy against the true (diagonal) population
    covariance, so this detector is simulation-only and its performance is an
    upper bound for any data-driven choice.  aux carries 'loading'.
    """
    if decomp is None:
        decomp = spectral_decompose(pooled_scm(pair))
    res = optimize_loading(decomp, pop)
    d = decomp.eigenvalues + res.lambda_star
    score = pair.diff_scale * quad_form_inverse(decomp, d, pair.mean_diff)
    return ScoreResult(
        DetectorKind.LAPPW,
        score,
        aux={"loading": res.lambda_star, "snr_at_optimum": res.snr_at_optimum},
    )
