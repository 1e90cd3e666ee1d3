"""Synthetic radar scenes: steering vectors, clutter covariances, snapshot sampling.

A scene is an N-channel, K-pulse space-time configuration (dimension
p = N * K) with white noise of power sigma2 and one of three clutter
descriptions:

* ``ScattererClutter``: a set of uncorrelated point scatterers, each
  contributing |amplitude|^2 v v^H along its space-time steering vector.
  Clutter rank equals the scatterer count, which keeps scenes spiked by
  construction.
* ``ToeplitzClutter``: a scalar-channel impulse response h convolved with a
  pulse of length q; the clutter covariance is H H^H for the p x q Toeplitz
  convolution matrix H (white unit-power waveform), or the rank-one outer
  product of H @ waveform when a deterministic waveform is supplied. Long
  impulse responses can exceed the spiked-rank budget, which is flagged.
* ``SpikedModel``: direct spectral synthesis of the target spectrum in a
  seeded random unitary basis.

Snapshots are circularly-symmetric complex Gaussian draws with the scene
covariance, reproducible per (seed, stream) and byte-identical across runs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .rmt import SPIKE_FRACTION_BUDGET, ModelOrderWarning, eigh
from .rng import substream
from .shrinkage import SpikedModel


@dataclass(frozen=True)
class SteeringSpec:
    """Angle/Doppler pair defining a space-time steering vector.

    theta is the cone angle in radians, doppler the normalized Doppler
    frequency in [-1/2, 1/2].
    """

    theta: float
    doppler: float
    N: int
    K: int

    def __post_init__(self):
        if self.N < 1 or self.K < 1:
            raise ValueError("N and K must be positive")
        if not -0.5 <= self.doppler <= 0.5:
            raise ValueError("normalized Doppler must lie in [-1/2, 1/2]")

    @property
    def p(self) -> int:
        return self.N * self.K


def steering_vector(spec: SteeringSpec) -> np.ndarray:
    """Kronecker product of the angle and Doppler phase ramps.

    Angle ramp exp(-j pi i sin(theta)) for i = 1..N, Doppler ramp
    exp(-j 2 pi i f_d) for i = 1..K; every entry has unit modulus so the
    squared norm is always N * K.
    """
    i_n = np.arange(1, spec.N + 1)
    i_k = np.arange(1, spec.K + 1)
    a_theta = np.exp(-1j * np.pi * i_n * np.sin(spec.theta))
    a_dopp = np.exp(-2j * np.pi * i_k * spec.doppler)
    return np.kron(a_theta, a_dopp)


@dataclass(frozen=True)
class Scatterer:
    """Point clutter scatterer: complex power |amplitude|^2 along its steering vector."""

    amplitude: float
    theta: float
    doppler: float


@dataclass(frozen=True)
class ScattererClutter:
    """Uncorrelated point scatterers; clutter rank = number of scatterers."""

    scatterers: tuple[Scatterer, ...]

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))

    @property
    def rank(self) -> int:
        return len(self.scatterers)


@dataclass(frozen=True)
class ToeplitzClutter:
    """Scalar-channel impulse response convolved with a length-q pulse.

    With a white unit-power waveform the clutter covariance is H H^H for the
    p x q Toeplitz matrix H built from the taps. Passing ``waveform`` (length
    q) instead computes (H w)(H w)^H for that fixed pulse, a rank-one clutter
    component.
    """

    taps: np.ndarray
    pulse_len: int
    waveform: np.ndarray | None = None

    def __post_init__(self):
        taps = np.atleast_1d(np.asarray(self.taps, dtype=complex))
        if self.pulse_len < 1:
            raise ValueError("pulse_len must be positive")
        if self.waveform is not None:
            w = np.asarray(self.waveform, dtype=complex)
            if w.shape != (self.pulse_len,):
                raise ValueError("waveform must have length pulse_len")
            object.__setattr__(self, "waveform", w)
        object.__setattr__(self, "taps", taps)


ClutterSpec = ScattererClutter | ToeplitzClutter | SpikedModel | None


@dataclass(frozen=True)
class ScenarioConfig:
    """Full synthetic scene: dimensions, noise floor, clutter, seed."""

    N: int
    K: int
    n: int
    sigma2: float
    clutter: ClutterSpec = None
    q: int = 1
    seed: int = 0
    name: str = "custom"

    def __post_init__(self):
        if self.N < 1 or self.K < 1:
            raise ValueError("N and K must be positive")
        if self.n < 1:
            raise ValueError("n must be positive")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")

    @property
    def p(self) -> int:
        return self.N * self.K


@dataclass(frozen=True)
class DataCube:
    """Clutter-plus-noise snapshots (p x n), optionally with ground truth attached.

    ``test_index`` designates the snapshot held out for detection; the
    remaining columns are the training data. ``truth`` carries the true
    covariance (matrix or spiked spectrum) for oracle metrics.
    """

    snapshots: np.ndarray
    truth: np.ndarray | SpikedModel | None = None
    test_index: int | None = None

    def __post_init__(self):
        snaps = np.asarray(self.snapshots, dtype=complex)
        if snaps.ndim != 2:
            raise ValueError("snapshots must be a p x n matrix")
        if not np.all(np.isfinite(snaps)):
            raise ValueError("snapshots must be finite")
        if self.test_index is not None and not 0 <= self.test_index < snaps.shape[1]:
            raise ValueError("test_index out of range")
        object.__setattr__(self, "snapshots", snaps)

    @property
    def p(self) -> int:
        return self.snapshots.shape[0]

    @property
    def n_snapshots(self) -> int:
        return self.snapshots.shape[1]

    def training(self) -> np.ndarray:
        """All snapshots except the designated test column."""
        if self.test_index is None:
            return self.snapshots
        return np.delete(self.snapshots, self.test_index, axis=1)

    def test_snapshot(self) -> np.ndarray:
        """The designated test column (defaults to the last one)."""
        idx = self.n_snapshots - 1 if self.test_index is None else self.test_index
        return self.snapshots[:, idx]


def _toeplitz_response(taps: np.ndarray, p: int, q: int) -> np.ndarray:
    h = np.zeros(p, dtype=complex)
    m = min(taps.size, p)
    h[:m] = taps[:m]
    cols = np.arange(q)
    rows = np.arange(p)[:, None]
    idx = rows - cols[None, :]
    out = np.zeros((p, q), dtype=complex)
    valid = (idx >= 0) & (idx < p)
    out[valid] = h[idx[valid]]
    return out


def synthesize_clutter_covariance(config: ScenarioConfig) -> np.ndarray:
    """True clutter-plus-noise covariance R = R_c + sigma2 * I for a scene.

    Emits ModelOrderWarning when the clutter construction yields rank above
    0.1 * p, in which case the scene is no longer spiked in the modeled sense.
    """
    p = config.p
    r_c = np.zeros((p, p), dtype=complex)
    clutter_rank = 0
    clutter = config.clutter
    if clutter is None:
        pass
    elif isinstance(clutter, SpikedModel):
        if clutter.p != p or clutter.sigma2 != config.sigma2:
            raise ValueError("spiked shortcut must match scene dimension and noise power")
        rng = substream(config.seed, 0xBA515)
        z = rng.standard_normal((p, p)) + 1j * rng.standard_normal((p, p))
        basis, _ = np.linalg.qr(z)
        excess = clutter.spikes - clutter.sigma2
        u = basis[:, : clutter.r]
        r_c = (u * excess) @ u.conj().T
        clutter_rank = clutter.r
    elif isinstance(clutter, ScattererClutter):
        for sc in clutter.scatterers:
            v = steering_vector(SteeringSpec(sc.theta, sc.doppler, config.N, config.K))
            r_c += (abs(sc.amplitude) ** 2) * np.outer(v, v.conj())
        clutter_rank = clutter.rank
    elif isinstance(clutter, ToeplitzClutter):
        h_mat = _toeplitz_response(clutter.taps, p, config.q)
        if clutter.waveform is None:
            r_c = h_mat @ h_mat.conj().T
        else:
            ret = h_mat @ clutter.waveform
            r_c = np.outer(ret, ret.conj())
        clutter_rank = int(np.linalg.matrix_rank(r_c, hermitian=True))
    else:
        raise TypeError(f"unsupported clutter description: {type(clutter).__name__}")
    if clutter_rank > int(SPIKE_FRACTION_BUDGET * p):
        warnings.warn(
            f"clutter rank {clutter_rank} exceeds the 0.1*p = "
            f"{int(SPIKE_FRACTION_BUDGET * p)} spiked-model budget",
            ModelOrderWarning,
            stacklevel=2,
        )
    r_c = (r_c + r_c.conj().T) / 2.0
    return r_c + config.sigma2 * np.eye(p)


def truth_spiked_model(config: ScenarioConfig, covariance: np.ndarray | None = None) -> SpikedModel:
    """Exact spiked description of a scene's true covariance.

    Eigenvalues above sigma2 (to 1e-6 relative) are the spikes; for scenes
    built from scatterers or a spiked shortcut the cut is exact.
    """
    if isinstance(config.clutter, SpikedModel):
        return config.clutter
    if covariance is None:
        covariance = synthesize_clutter_covariance(config)
    lam = eigh(covariance).eigenvalues
    spikes = lam[lam > config.sigma2 * (1.0 + 1e-6)]
    return SpikedModel(p=config.p, sigma2=config.sigma2, spikes=spikes)


class SnapshotSampler:
    """Factored sampler for repeated draws from one true covariance.

    The spectral square root is computed once; each draw uses an independent,
    order-insensitive substream of the seed.
    """

    def __init__(self, covariance: np.ndarray, truth=None):
        covariance = np.asarray(covariance)
        decomp = eigh(covariance)
        lam = decomp.eigenvalues
        tol = 1e-10 * max(lam.max(), 0.0) if lam.size else 0.0
        if lam.min() < -max(tol, 1e-30):
            raise ValueError("covariance is not positive semi-definite")
        # eigenvalues below numerical-rank dust are exact zeros of the model
        lam = np.where(lam > 1e-13 * max(lam.max(), 0.0), lam, 0.0)
        self._factor = decomp.eigenvectors * np.sqrt(lam)
        self._truth = covariance if truth is None else truth
        self.p = covariance.shape[0]

    def draw(self, n: int, seed: int, stream: int = 0) -> DataCube:
        """n circular complex Gaussian snapshots with the factored covariance."""
        if n < 1:
            raise ValueError("n must be positive")
        rng = substream(seed, stream)
        w = rng.standard_normal((self.p, n)) + 1j * rng.standard_normal((self.p, n))
        snaps = self._factor @ (w / np.sqrt(2.0))
        return DataCube(snapshots=snaps, truth=self._truth)


def sample_snapshots(covariance: np.ndarray, n: int, seed: int) -> DataCube:
    """n independent draws of CN(0, R): real and imaginary parts of variance 1/2.

    The covariance is factored through its spectral square root, so
    rank-deficient R is handled cleanly. Identical (covariance, n, seed)
    always reproduces the same cube.
    """
    return SnapshotSampler(covariance).draw(n, seed)


def inject_target(cube: DataCube, spec: SteeringSpec, amplitude: complex) -> DataCube:
    """Add amplitude * steering_vector(spec) to the designated test snapshot.

    Training snapshots are untouched. If the cube has no designated test
    snapshot the last column is designated. Returns a new cube.
    """
    if spec.p != cube.p:
        raise ValueError("steering dimension does not match cube")
    idx = cube.n_snapshots - 1 if cube.test_index is None else cube.test_index
    snaps = cube.snapshots.copy()
    snaps[:, idx] += amplitude * steering_vector(spec)
    return DataCube(snapshots=snaps, truth=cube.truth, test_index=idx)


def amplitude_for_snr(snr_db: float, sigma2: float, N: int, K: int) -> float:
    """Target amplitude giving |h|^2 * N * K / sigma2 = 10^(snr_db / 10)."""
    return float(np.sqrt(10.0 ** (snr_db / 10.0) * sigma2 / (N * K)))


def challenge_synthetic(n: int | None = None, seed: int | None = None) -> ScenarioConfig:
    """Synthetic stand-in for the 512-dimensional coastal-scene recording.

    Mirrors the published scene dimensions: 8 concatenated channels of 64
    pulses (p = 512), pulse length 1000, noise power 5e-14, and a clutter
    ridge of 25 ground scatterers whose Doppler tracks sin(theta)/2. Snapshot
    synthesis is covariance-domain, so no convolution alignment choice is
    involved; amplitudes are log-spaced to span roughly 10 to 10^4 times the
    noise floor, matching a strongly spiked spectrum.
    """
    n_eff = 2335 if n is None else n
    seed_eff = 0x5D512 if seed is None else seed
    sigma2 = 5e-14
    m = 25
    thetas = np.linspace(-np.pi / 3, np.pi / 3, m)
    dopplers = np.sin(thetas) / 2.0
    strengths = np.logspace(4, 1, m)  # whitened clutter power per scatterer
    scatterers = tuple(
        Scatterer(amplitude=float(np.sqrt(s * sigma2)), theta=float(t), doppler=float(fd))
        for s, t, fd in zip(strengths, thetas, dopplers)
    )
    return ScenarioConfig(
        N=8,
        K=64,
        n=n_eff,
        sigma2=sigma2,
        clutter=ScattererClutter(scatterers),
        q=1000,
        seed=seed_eff,
        name="challenge-synthetic",
    )


PRESETS = {"challenge-synthetic": challenge_synthetic}


def preset(name: str, n: int | None = None, seed: int | None = None) -> ScenarioConfig:
    """Look up a named preset scene."""
    try:
        builder = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown scenario preset: {name!r}") from None
    return builder(n=n, seed=seed)


def with_samples(config: ScenarioConfig, n: int) -> ScenarioConfig:
    """Copy of a scene with a different training-sample count."""
    return replace(config, n=n)
