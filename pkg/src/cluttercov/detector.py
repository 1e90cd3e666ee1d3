"""Low-rank adaptive normalized matched filter: statistic, thresholds, detection laws.

The detector projects the estimated clutter subspace out of the test snapshot
and matched-filters what remains. The statistic is calibrated so that under
the null it follows a chi-squared law with one complex degree of freedom:

    T = 2 |s^H P y|^2 / (sigma2_hat * ||P s||^2)

with P the projection off the top-rank sample eigenvectors. T / 2 is then a
unit-mean exponential under the null, so the threshold for a false-alarm
probability p_fa is simply -log(p_fa), and detection compares T / 2 against
it. The uncalibrated |s^H P y|^2 / ||P s||^2 value is reported alongside for
transparency.

Only the sample eigenvectors enter the statistic, so shrinkage and clipping
estimates that share eigenvectors drive identical detectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .rmt import AspectRatio, EigenDecomposition
from .scenario import DataCube, SteeringSpec, steering_vector
from .shrinkage import NoiseEstimate, SpikedModel, cosine2, estimate_noise
from . import rmt

PD_SERIES_RTOL = 1e-12
PD_SERIES_MAX_TERMS = 10_000


@dataclass(frozen=True)
class DetectorConfig:
    """Detection setup: clutter rank for the projection, target false-alarm rate.

    ``rank`` None means "estimate it": the detector counts the training
    eigenvalues above the spike-detection edge, the same count the shrinkage
    estimator reports. ``noise`` may carry a precomputed noise power; when
    None it too is estimated from the training snapshots.
    """

    rank: int | None
    p_fa: float
    noise: NoiseEstimate | None = None

    def __post_init__(self):
        if self.rank is not None and self.rank < 0:
            raise ValueError("rank must be nonnegative")
        if not 0.0 < self.p_fa < 1.0:
            raise ValueError("p_fa must lie in (0, 1)")

    @property
    def threshold(self) -> float:
        return threshold_for_pfa(self.p_fa)


@dataclass(frozen=True)
class DetectionReport:
    """One detection decision with its calibrated statistic and laws.

    ``statistic`` is the exponential-calibrated value (T / 2) compared against
    ``threshold`` = -log(p_fa); ``chi2_statistic`` is the chi-squared-scaled T
    and ``raw_statistic`` the unwhitened matched-filter value.
    """

    statistic: float
    threshold: float
    decision: bool
    theoretical_pfa: float
    theoretical_pd: float | None = None
    chi2_statistic: float | None = None
    raw_statistic: float | None = None

    def __post_init__(self):
        if self.statistic < 0:
            raise ValueError("statistic must be nonnegative")
        if self.decision != (self.statistic > self.threshold):
            raise ValueError("decision must equal statistic > threshold")
        if abs(self.theoretical_pfa - np.exp(-self.threshold)) > 1e-12:
            raise ValueError("theoretical_pfa must equal exp(-threshold)")

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "threshold": self.threshold,
            "decision": bool(self.decision),
            "theoretical_pfa": self.theoretical_pfa,
            "theoretical_pd": self.theoretical_pd,
            "chi2_statistic": self.chi2_statistic,
            "raw_statistic": self.raw_statistic,
        }


def clutter_projection(decomp: EigenDecomposition, rank: int) -> np.ndarray:
    """Projection off the span of the top-``rank`` sample eigenvectors.

    Hermitian and idempotent with trace p - rank; rank 0 returns the identity.
    """
    if not 0 <= rank < decomp.p:
        raise ValueError("rank must satisfy 0 <= rank < p")
    v = decomp.eigenvectors[:, :rank]
    return np.eye(decomp.p, dtype=complex) - v @ v.conj().T


def test_statistic(
    y: np.ndarray, target: SteeringSpec, proj: np.ndarray, noise: NoiseEstimate
) -> float:
    """Chi-squared-calibrated matched-filter statistic of one test snapshot.

    T = 2 |s^H P y|^2 / (sigma2_hat ||P s||^2); under the null with the true
    clutter rank this converges to a chi-squared law with one complex degree
    of freedom (mean 2).
    """
    s = steering_vector(target)
    ps = proj @ s
    denom = float(np.real(np.vdot(ps, ps)))
    if denom <= 1e-12 * target.p:
        raise ValueError("target in clutter subspace")
    num = abs(np.vdot(ps, y)) ** 2  # s^H P y with P Hermitian idempotent
    return float(2.0 * num / (noise.sigma2_hat * denom))


def threshold_for_pfa(p_fa: float) -> float:
    """Detection threshold -log(p_fa) for the exponential-calibrated statistic."""
    if not 0.0 < p_fa < 1.0:
        raise ValueError("p_fa must lie in (0, 1)")
    return float(-np.log(p_fa))


def _pd_series(mean: float, delta_threshold: float) -> float:
    """P(statistic > threshold) for the noncentral law, by Poisson-mixture series.

    The detection statistic under the alternative is |z|^2 with z a unit
    complex Gaussian of squared mean ``mean``; the tail is
    sum_k e^{-mean} mean^k / k! * Q(k + 1, threshold) with Q the regularized
    upper incomplete gamma. Terms are accumulated until they fall below
    PD_SERIES_RTOL of the running sum, capped at PD_SERIES_MAX_TERMS.
    """
    if mean < 0:
        raise ValueError("noncentrality must be nonnegative")
    if mean == 0.0:
        return float(np.exp(-delta_threshold))
    if mean > 0.25 * PD_SERIES_MAX_TERMS:
        # The Poisson mode approaches the term cap; every term retained there
        # has Q(k + 1, threshold) = 1 to working precision for any sane
        # threshold, so the tail is 1.
        if delta_threshold < mean - 20.0 * np.sqrt(mean):
            return 1.0
        raise ValueError("noncentrality too large for the series cap")
    total = 0.0
    log_pmf = -mean  # log of Poisson pmf at k = 0
    for k in range(PD_SERIES_MAX_TERMS):
        if k > 0:
            log_pmf += np.log(mean) - np.log(k)
        term = np.exp(log_pmf) * special.gammaincc(k + 1, delta_threshold)
        total += term
        # once past the Poisson mode the terms decay monotonically
        if k > mean and term < PD_SERIES_RTOL * max(total, 1e-300):
            break
    return float(min(total, 1.0))


def theoretical_pd(
    model: SpikedModel,
    target: SteeringSpec,
    amplitude: complex,
    p_fa: float,
    gamma: float,
    eigvecs_truth: np.ndarray | None = None,
) -> float:
    """Asymptotic detection probability for a target of the given amplitude.

    The leakage-corrected deflection uses the true clutter eigvectors u_i and
    the eigenvector alignment c^2(ell_i), all in unit-noise (whitened) units:

        A  = ||P s_w||^2 + sum_i (1 - c^2_i) |s_w^H u_i|^2
        nu = 1 / A + sum_i (ell_i - 1)(1 - c^2_i) |s_w^H u_i|^2 / A^2

    and the exponential-calibrated statistic is noncentral with squared mean
    |amplitude|^2 / nu, which for a clutter-free scene reduces exactly to the
    injected SNR |amplitude|^2 ||s||^2 / sigma2. The probability of detection
    is the Poisson-mixture series over the regularized upper incomplete gamma
    at threshold -log(p_fa).
    """
    if not 0.0 < p_fa < 1.0:
        raise ValueError("p_fa must lie in (0, 1)")
    ells = model.whitened_spikes()
    edge = 1.0 + np.sqrt(gamma)
    if np.any(ells <= edge):
        raise ValueError("sub-critical spike")
    s_w = steering_vector(target) / np.sqrt(model.sigma2)
    if ells.size:
        if eigvecs_truth is None:
            raise ValueError("eigvecs_truth required when the model has spikes")
        u = np.asarray(eigvecs_truth)
        if u.shape != (model.p, ells.size):
            raise ValueError("eigvecs_truth must be p x r")
        overlap = np.abs(u.conj().T @ s_w) ** 2
        proj_norm2 = float(np.real(np.vdot(s_w, s_w)) - overlap.sum())
        c2 = np.array([cosine2(ell, gamma) for ell in ells])
        a_val = proj_norm2 + float(((1.0 - c2) * overlap).sum())
        nu = 1.0 / a_val + float(((ells - 1.0) * (1.0 - c2) * overlap).sum()) / a_val**2
    else:
        nu = 1.0 / float(np.real(np.vdot(s_w, s_w)))
    if not np.isfinite(nu) or nu <= 0:
        raise ValueError("divergent deflection")
    mean = abs(amplitude) ** 2 / nu
    return _pd_series(mean, threshold_for_pfa(p_fa))


def detect(cube: DataCube, target: SteeringSpec, config: DetectorConfig) -> DetectionReport:
    """Full detection pass on a data cube with a designated test snapshot.

    Training snapshots (everything but the test column) yield the sample
    covariance, its eigenvectors the clutter projection, and (unless supplied
    in the config) the noise power estimate.
    """
    y = cube.test_snapshot()
    train = cube.training()
    if cube.test_index is None:
        train = train[:, :-1]  # last column doubles as the test snapshot
    if train.shape[1] < cube.p:
        raise ValueError("insufficient samples")
    scm = rmt.sample_covariance(train)
    decomp = rmt.eigh(scm.matrix)
    ratio = AspectRatio(cube.p, train.shape[1])
    noise = config.noise
    if noise is None:
        noise = estimate_noise(decomp, ratio)
    rank = config.rank
    if rank is None:
        edge2 = (1.0 + np.sqrt(ratio.gamma)) ** 2
        rank = int(np.count_nonzero(decomp.eigenvalues / noise.sigma2_hat > edge2))
    proj = clutter_projection(decomp, rank)
    t_chi2 = test_statistic(y, target, proj, noise)
    statistic = t_chi2 / 2.0
    thr = config.threshold
    s = steering_vector(target)
    ps = proj @ s
    raw = abs(np.vdot(ps, y)) ** 2 / float(np.real(np.vdot(ps, ps)))
    return DetectionReport(
        statistic=statistic,
        threshold=thr,
        decision=bool(statistic > thr),
        theoretical_pfa=float(np.exp(-thr)),
        chi2_statistic=t_chi2,
        raw_statistic=float(raw),
    )
