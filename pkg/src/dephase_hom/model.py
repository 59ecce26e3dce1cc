"""
Emitter parameters and the closed-form dephasing and visibility formulas.

Units throughout: rates in 1/ns (numerically GHz), times in ns, temperatures
in kelvin.
"""

import math
from dataclasses import dataclass
from typing import Optional

from .errors import DomainError

#: Laser repetition period (80 MHz) in ns.
REP_PERIOD_NS = 12.5
#: Overall detector timing resolution (FWHM) in ns.
IRF_FWHM_NS = 0.35


@dataclass(frozen=True)
class PhononModel:
    """Phonon-induced pure dephasing: a fixed rate or a temperature law.

    Exactly one of ``gamma_ph`` or the pair (``gamma0``, ``alpha``) is set.
    """

    gamma_ph: Optional[float] = None
    gamma0: Optional[float] = None
    alpha: Optional[float] = None

    def __post_init__(self):
        fixed = self.gamma_ph is not None
        law = self.gamma0 is not None or self.alpha is not None
        if fixed == law:
            raise DomainError("PhononModel needs either gamma_ph or (gamma0, alpha)")
        if fixed and not self.gamma_ph >= 0:
            raise DomainError(f"gamma_ph must be >= 0, got {self.gamma_ph}")
        if law:
            if self.gamma0 is None or self.alpha is None:
                raise DomainError("temperature law needs both gamma0 and alpha")
            if not self.gamma0 >= 0:
                raise DomainError(f"gamma0 must be >= 0, got {self.gamma0}")
            if not self.alpha > 0:
                raise DomainError(f"alpha must be > 0, got {self.alpha}")

    @classmethod
    def fixed(cls, gamma_ph):
        return cls(gamma_ph=gamma_ph)

    @classmethod
    def thermal(cls, gamma0, alpha):
        return cls(gamma0=gamma0, alpha=alpha)

    @property
    def is_fixed(self):
        return self.gamma_ph is not None


@dataclass(frozen=True)
class EmitterParams:
    gamma_rad: float
    gamma_sd_max: float
    tau_c: float
    phonon: PhononModel = PhononModel(gamma_ph=0.0)
    omega_e: float = 0.0  # phase reference only

    def __post_init__(self):
        if not self.gamma_rad >= 0:
            raise DomainError(f"gamma_rad must be >= 0, got {self.gamma_rad}")
        if not self.gamma_sd_max >= 0:
            raise DomainError(f"gamma_sd_max must be >= 0, got {self.gamma_sd_max}")
        if not self.tau_c > 0:
            raise DomainError(f"tau_c must be > 0, got {self.tau_c}")
        if not math.isfinite(self.omega_e):
            raise DomainError("omega_e must be finite")


@dataclass(frozen=True)
class PulseSequence:
    delta_t: float
    rep_period: float = REP_PERIOD_NS

    def __post_init__(self):
        if not (0 < self.delta_t <= self.rep_period):
            raise DomainError(
                f"need 0 < delta_t <= rep_period, got {self.delta_t}, {self.rep_period}")


@dataclass(frozen=True)
class BeamsplitterParams:
    refl: float = 0.5
    trans: float = 0.5

    def __post_init__(self):
        if self.refl < 0 or self.trans < 0:
            raise DomainError("beamsplitter coefficients must be >= 0")
        if abs(self.refl + self.trans - 1.0) > 1e-12:
            raise DomainError(f"refl + trans must be 1, got {self.refl + self.trans!r}")

    @classmethod
    def from_refl(cls, refl):
        return cls(refl=refl, trans=1.0 - refl)

    @property
    def balanced(self):
        return abs(self.refl - 0.5) <= 1e-12 and abs(self.trans - 0.5) <= 1e-12


@dataclass(frozen=True)
class DephasingRates:
    gamma_sd: float
    gamma_ph: float

    @property
    def gamma_prime(self):
        return self.gamma_sd + self.gamma_ph


def mean_phonon_number(temp, alpha):
    """Bose-Einstein occupation ``1 / (exp(alpha/temp) - 1)`` of the effective mode."""
    if temp is None or not temp > 0:
        raise DomainError(f"temperature must be > 0 K, got {temp}")
    if not alpha > 0:
        raise DomainError(f"alpha must be > 0 K, got {alpha}")
    x = alpha / temp
    if x > 700.0:
        return 0.0
    return 1.0 / math.expm1(x)


def phonon_dephasing_rate(temp, model):
    """Phonon dephasing rate gamma(T) = gamma0 * n (n + 1), or the fixed rate."""
    if model.is_fixed:
        return model.gamma_ph
    n = mean_phonon_number(temp, model.alpha)
    return model.gamma0 * n * (n + 1.0)


def diffusion_dephasing_rate(delta_t, gamma_sd_max, tau_c):
    """Spectral-diffusion dephasing accumulated over a pulse separation.

    ``gamma_sd_max * (1 - exp(-(delta_t / tau_c)**2))``; zero at ``delta_t = 0``
    and saturating at ``gamma_sd_max`` once the noise memory has decayed.
    """
    if not tau_c > 0:
        raise DomainError(f"tau_c must be > 0, got {tau_c}")
    if not delta_t >= 0:
        raise DomainError(f"delta_t must be >= 0, got {delta_t}")
    return -gamma_sd_max * math.expm1(-(delta_t / tau_c) ** 2)


def dephasing_rates(delta_t, temp, params):
    gsd = diffusion_dephasing_rate(delta_t, params.gamma_sd_max, params.tau_c)
    gph = phonon_dephasing_rate(temp, params.phonon)
    return DephasingRates(gamma_sd=gsd, gamma_ph=gph)


def visibility_from_rates(gamma_rad, gamma_prime):
    if not gamma_rad > 0:
        raise DomainError(f"visibility undefined for gamma_rad={gamma_rad}")
    return gamma_rad / (gamma_prime + gamma_rad)


def tpi_visibility(seq, temp, params):
    """Two-photon interference visibility for photons emitted ``seq.delta_t`` apart.

    Parameters
    ----------
    seq : PulseSequence or float
        Pulse sequence; a bare float is read as the pulse separation in ns
        (this also admits ``delta_t = 0``).
    temp : float or None
        Temperature in K. Only consulted by a temperature-law phonon model.
    params : EmitterParams

    Returns
    -------
    float
        ``Gamma / (Gamma' + gamma(T) + Gamma)``.
    """
    delta_t = seq.delta_t if isinstance(seq, PulseSequence) else float(seq)
    rates = dephasing_rates(delta_t, temp, params)
    return visibility_from_rates(params.gamma_rad, rates.gamma_prime)


def coherence_time(gamma_rad, gamma_sd, gamma_ph):
    """T2 = 1 / (Gamma/2 + Gamma' + gamma) in ns."""
    if not gamma_rad > 0:
        raise DomainError(f"gamma_rad must be > 0, got {gamma_rad}")
    return 1.0 / (0.5 * gamma_rad + gamma_sd + gamma_ph)


def coherence_time_limit(params, temp=None):
    """T2 in the infinite pulse-separation limit (spectral diffusion saturated)."""
    return coherence_time(params.gamma_rad, params.gamma_sd_max,
                          phonon_dephasing_rate(temp, params.phonon))


def visibility_temperature_curve(temp, gamma0, alpha):
    """V(T) = 1 / (1 + gamma0 n (n + 1)) with all other dephasing normalised away."""
    n = mean_phonon_number(temp, alpha)
    return 1.0 / (1.0 + gamma0 * n * (n + 1.0))


# Reference emitter lines (neutral exciton at 7 K, positive trion at 10 K and 30 K).
REFERENCE_EMITTERS = {
    "X0_7K": EmitterParams(0.85, 1.02, 12.0, PhononModel.fixed(0.0)),
    "X+_10K": EmitterParams(0.91, 1.03, 15.3, PhononModel.fixed(0.0)),
    "X+_30K": EmitterParams(0.96, 1.55, 3.1, PhononModel.fixed(0.29)),
}

#: Fitted temperature-law constants for the X+ line.
THERMAL_GAMMA0 = 3.75
THERMAL_ALPHA_K = 44.0
