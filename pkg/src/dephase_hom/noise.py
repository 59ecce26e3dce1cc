"""
Gaussian statistics of time-integrated stochastic phases.

A phase window is the integral of the frequency noise from an anchor time
(the pulse that started the emission) over an elapsed span. Two noise
sources are modelled: white phonon noise with rate ``gamma_ph`` and
colored spectral-diffusion noise whose correlation between anchors decays
as ``exp(-(d / tau_c)**2)``.

Window covariances use the aligned-window reading of the kernel: the
anchor-difference factor multiplies the overlap of the two windows measured
from their own anchors, ``min(elapsed_1, elapsed_2)``.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import kernels
from .errors import ConsistencyError, DomainError

PSD_RTOL = 1e-10


@dataclass(frozen=True)
class PhaseWindow:
    anchor: float
    elapsed: float

    def __post_init__(self):
        if not self.elapsed >= 0:
            raise DomainError(f"elapsed must be >= 0, got {self.elapsed}")


@dataclass(frozen=True)
class NoiseKernelParams:
    gamma_ph: float = 0.0
    gamma_sd_max: float = 0.0
    tau_c: float = 1.0

    def __post_init__(self):
        if self.gamma_ph < 0 or self.gamma_sd_max < 0:
            raise DomainError("noise strengths must be >= 0")
        if self.gamma_sd_max > 0 and not self.tau_c > 0:
            raise DomainError("tau_c must be > 0 when colored noise is present")

    @classmethod
    def from_emitter(cls, params, temp=None):
        from .model import phonon_dephasing_rate

        return cls(gamma_ph=phonon_dephasing_rate(temp, params.phonon),
                   gamma_sd_max=params.gamma_sd_max, tau_c=params.tau_c)


@dataclass(frozen=True)
class CovarianceMatrix:
    entries: np.ndarray

    @property
    def dim(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class SignedPhaseCombo:
    """X = sum(sign * phase(window)) over ``terms``."""

    terms: Tuple[Tuple[PhaseWindow, int], ...]

    def __post_init__(self):
        if not self.terms:
            raise DomainError("a phase combination needs at least one term")
        for _, sign in self.terms:
            if sign not in (1, -1):
                raise DomainError(f"signs must be +1 or -1, got {sign}")

    @property
    def windows(self):
        return [w for w, _ in self.terms]

    @property
    def signs(self):
        return np.array([s for _, s in self.terms], dtype=float)


def hom_combo(t_d, tau, delta_t):
    """Phase combination entering the two-photon interference term.

    Photon one is anchored at 0, photon two at ``delta_t``; the detection
    times are ``t_d`` and ``t_d + tau`` after the respective anchors.
    """
    return SignedPhaseCombo((
        (PhaseWindow(0.0, t_d), 1),
        (PhaseWindow(0.0, t_d + tau), -1),
        (PhaseWindow(delta_t, t_d), -1),
        (PhaseWindow(delta_t, t_d + tau), 1),
    ))


def anchor_kernel(diff, k):
    """Covariance rate between two anchors ``diff`` ns apart."""
    out = 0.0
    if k.gamma_sd_max > 0:
        out += k.gamma_sd_max * float(np.exp(-(diff / k.tau_c) ** 2))
    if k.gamma_ph > 0 and diff == 0:
        out += k.gamma_ph
    return out


def phase_covariance(w1, w2, k):
    return anchor_kernel(w1.anchor - w2.anchor, k) * min(w1.elapsed, w2.elapsed)


def _window_arrays(windows):
    anchors = np.array([w.anchor for w in windows], dtype=float)
    elapsed = np.array([w.elapsed for w in windows], dtype=float)
    return anchors, elapsed


def check_psd(entries, rtol=PSD_RTOL):
    """Smallest eigenvalue, after checking it against ``-rtol * trace``."""
    entries = np.asarray(entries, dtype=float)
    if entries.size == 0:
        return 0.0
    lam_min = float(np.linalg.eigvalsh(entries)[0])
    floor = -rtol * max(float(np.trace(entries)), 0.0)
    if lam_min < floor:
        raise ConsistencyError(
            f"covariance is not PSD: smallest eigenvalue {lam_min:.3e} < {floor:.3e}")
    return lam_min


def build_covariance_matrix(windows, k, check=True):
    if len(windows) < 1:
        raise DomainError("need at least one window")
    anchors, elapsed = _window_arrays(windows)
    entries = kernels.phase_cov_matrix(anchors, elapsed, float(k.gamma_ph),
                                       float(k.gamma_sd_max), float(k.tau_c))
    if check:
        check_psd(entries)
    return CovarianceMatrix(entries)


def factorize(cov):
    """Return F with F @ F.T == cov, tolerating PSD round-off.

    Uses a diagonally pivoted Cholesky decomposition that stops at the
    numerical rank, so singular (e.g. duplicated-window) covariances are
    handled without perturbation.
    """
    entries = cov.entries if isinstance(cov, CovarianceMatrix) else np.asarray(cov, float)
    check_psd(entries)
    trace = max(float(np.trace(entries)), 0.0)
    tol = PSD_RTOL * trace if trace > 0 else 0.0
    lower, _rank = kernels.pivoted_cholesky(np.ascontiguousarray(entries), tol)
    return lower


def sample_joint_phases(cov, rng_seed, n):
    """Draw ``n`` zero-mean jointly Gaussian phase vectors with covariance ``cov``.

    The stream is a fixed function of the seed: standard normals of shape
    ``(n, dim)`` from ``numpy.random.default_rng(rng_seed)`` mapped through
    the pivoted-Cholesky factor.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    factor = factorize(cov)
    rng = np.random.default_rng(rng_seed)
    z = rng.standard_normal((n, factor.shape[0]))
    return z @ factor.T


def combo_variance(x, k):
    windows = x.windows
    signs = x.signs
    entries = build_covariance_matrix(windows, k, check=False).entries
    return float(signs @ entries @ signs)


def interference_factor_analytic(x, k):
    """<exp(iX)> = exp(-Var(X)/2) by the Gaussian moment theorem."""
    return float(np.exp(-0.5 * combo_variance(x, k)))


def interference_factor_mc(x, k, seed, n):
    """Monte-Carlo estimate of <cos X> and its standard error."""
    if n < 100:
        raise DomainError("interference_factor_mc needs n >= 100")
    cov = build_covariance_matrix(x.windows, k)
    samples = sample_joint_phases(cov, seed, n)
    phases = np.ascontiguousarray(samples @ x.signs)
    total, total2 = kernels.cos_moments(phases)
    mean = total / n
    var = max(total2 / n - mean * mean, 0.0)
    return mean, float(np.sqrt(var / (n - 1)))


def hom_variance_rate(delta_t, k):
    """Var(X) / tau for the two-photon combination; independent of t_d and tau."""
    return combo_variance(hom_combo(0.0, 1.0, delta_t), k)
