"""
Two-photon correlation after noise averaging, and a Monte-Carlo visibility
estimator that uses the phase-noise model as an independent route.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._accel import thread_hint
from .errors import DomainError, UnsupportedConfigurationError
from .model import BeamsplitterParams, PulseSequence, phonon_dephasing_rate
from .noise import NoiseKernelParams, hom_variance_rate

BALANCED = BeamsplitterParams(0.5, 0.5)


@dataclass(frozen=True)
class G2Point:
    t_d: float
    tau: float
    value: float


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n: int
    seed: int

    def to_dict(self):
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n, "seed": self.seed}


def g2_unnormalized(t_d, tau, gamma_rad, gamma_prime, bs=BALANCED):
    """Noise-averaged coincidence rate at detection times t_d and t_d + tau.

    The overall constant of the field amplitudes is dropped, so only ratios
    between values are meaningful.
    """
    if tau < 0 or t_d < 0:
        raise DomainError("t_d and tau must be >= 0")
    r, t = bs.refl, bs.trans
    direct = (t * t + r * r) * np.exp(-gamma_rad * tau)
    cross = 2.0 * r * t * np.exp(-(gamma_prime + gamma_rad) * tau)
    return float(np.exp(-2.0 * gamma_rad * t_d) * (direct - cross))


def g2_time_integrated(gamma_rad, gamma_prime, bs=BALANCED):
    """Normalised time-integrated coincidence probability (g2 bar)."""
    if not gamma_rad > 0:
        raise DomainError(f"gamma_rad must be > 0, got {gamma_rad}")
    two_rt = 2.0 * bs.refl * bs.trans
    return 1.0 - two_rt / (1.0 - two_rt) * gamma_rad / (gamma_prime + gamma_rad)


def visibility_general_bs(gamma_rad, gamma_prime, bs=BALANCED):
    """Visibility 1 - g2 bar for an arbitrary lossless beamsplitter."""
    if not gamma_rad > 0:
        raise DomainError(f"gamma_rad must be > 0, got {gamma_rad}")
    if bs.refl == 0 or bs.trans == 0:
        return 0.0
    two_rt = 2.0 * bs.refl * bs.trans
    return two_rt / (1.0 - two_rt) * (1.0 - gamma_prime / (gamma_prime + gamma_rad))


def _shard_sizes(n, shards):
    base, extra = divmod(n, shards)
    return [base + (1 if i < extra else 0) for i in range(shards)]


def _run_shard(seed_seq, size, gamma_rad, rate):
    rng = np.random.default_rng(seed_seq)
    s1 = rng.exponential(1.0 / gamma_rad, size)
    s2 = rng.exponential(1.0 / gamma_rad, size)
    z = rng.standard_normal(size)
    return kernels.mc_cos_moments(s1, s2, z, rate)


def mc_visibility(params, seq, temp, bs=BALANCED, seed=0, n=100_000, shards=1,
                  workers=None):
    """Monte-Carlo estimate of the two-photon interference visibility.

    Each trial draws two independent exponential emission delays, takes
    ``tau = |s1 - s2|`` and a Gaussian phase difference with variance
    ``rate * tau``, where ``rate`` is the variance per unit delay of the
    four-window phase combination evaluated from the noise kernels. The
    coincidence probability of the trial is ``(1 - cos X) / 2``; the
    visibility estimate is one minus twice its mean.

    ``n`` is split into ``shards`` chunks seeded from
    ``SeedSequence(seed).spawn(shards)`` and combined by count-weighted
    averaging, so the result depends on (seed, shards) but never on the
    worker count.
    """
    if n < 1000:
        raise DomainError("mc_visibility needs n >= 1000")
    if not bs.balanced:
        raise UnsupportedConfigurationError(
            "mc_visibility is derived for a balanced beamsplitter (R = T = 1/2)")
    if not params.gamma_rad > 0:
        raise DomainError("gamma_rad must be > 0")
    delta_t = seq.delta_t if isinstance(seq, PulseSequence) else float(seq)
    k = NoiseKernelParams(gamma_ph=phonon_dephasing_rate(temp, params.phonon),
                          gamma_sd_max=params.gamma_sd_max, tau_c=params.tau_c)
    rate = hom_variance_rate(delta_t, k)

    shards = max(1, int(shards))
    children = np.random.SeedSequence(seed).spawn(shards)
    sizes = _shard_sizes(n, shards)
    workers = thread_hint() if workers is None else max(1, int(workers))
    jobs = [(c, s, params.gamma_rad, rate) for c, s in zip(children, sizes) if s > 0]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _run_shard(*a), jobs))
    else:
        parts = [_run_shard(*a) for a in jobs]

    total = sum(p[0] for p in parts)
    total2 = sum(p[1] for p in parts)
    mean = total / n
    var = max(total2 / n - mean * mean, 0.0)
    # V = 1 - mean(p) / (1/2) with p = (1 - cos X) / 2 reduces to mean(cos X)
    return McEstimate(mean=float(mean), stderr=float(np.sqrt(var / (n - 1))),
                      n=int(n), seed=int(seed))
