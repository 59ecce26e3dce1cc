"""
Visibility extraction from coincidence histograms and parameter fits to
visibility and fringe-contrast data.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from . import kernels
from .errors import DomainError, FitError, ParseError, UnsupportedConfigurationError
from .fitting import (FitResult, bootstrap_sigmas, profile_interval,
                      weighted_least_squares)
from .histogram import (ESTIMATORS, OverlapMap, PeakShape, cluster_overlap_map,
                        shape_bin_matrix)

_CENTRAL = ("A2'", "A1'", "A0", "A1", "A2")
_REGIME_SCALE = {"A1": 1.0, "A2": 2.0 / 3.0, "A3": 0.5}


# --------------------------------------------------------------------------
# peak areas
# --------------------------------------------------------------------------

@dataclass
class PeakAreas:
    """Fitted peak areas with the derived normalisation areas.

    ``a_bar``, ``overlap_mean`` and ``side_cluster_mean`` are linear
    combinations of the fitted areas; ``coefficients`` holds those
    combinations so uncertainties propagate through the full covariance.
    """

    names: List[str]
    delays: np.ndarray
    weights: np.ndarray
    areas: np.ndarray
    covariance: np.ndarray
    width: float
    delta_t: float
    rep_period: float
    coefficients: Dict[str, np.ndarray] = field(default_factory=dict)
    width_sigma: float = 0.0
    chi2: float = float("nan")
    dof: int = 0
    normalization: str = "all_clusters"

    def value(self, key):
        c = self.coefficients.get(key)
        return None if c is None else float(c @ self.areas)

    def sigma(self, key):
        c = self.coefficients.get(key)
        return None if c is None else float(math.sqrt(max(c @ self.covariance @ c, 0.0)))

    @property
    def central(self):
        return {k: self.value(k) for k in _CENTRAL if k in self.coefficients}

    @property
    def a0(self):
        return self.value("A0")

    @property
    def a_bar(self):
        return self.value("a_bar")

    @property
    def overlap_mean(self):
        return self.value("overlap_mean")

    @property
    def side_cluster_mean(self):
        return self.value("side_cluster_mean")

    def to_dict(self):
        out = {"width_ns": self.width, "width_sigma_ns": self.width_sigma,
               "chi2": self.chi2, "dof": self.dof, "normalization": self.normalization,
               "named": {k: [self.value(k), self.sigma(k)] for k in self.coefficients}}
        return out


def _basis(n, i):
    e = np.zeros(n)
    e[i] = 1.0
    return e


def _fit_design(h, pattern, width):
    """Design matrix over the in-range peaks; out-of-range tails are folded in.

    Peaks outside the histogram window are tied to the mean per-weight area
    of the in-range non-zero-delay peaks, so their Lorentzian tails are
    modelled without adding poorly determined parameters.
    """
    delays = pattern.delays
    weights = pattern.weights
    lo, hi = h.t_min, h.t_max
    inside = (delays >= lo) & (delays <= hi)
    if isinstance(width, PeakShape):
        full = shape_bin_matrix(width, h.edges, delays)
    else:
        full = kernels.lorentzian_bin_matrix(np.ascontiguousarray(h.edges),
                                             np.ascontiguousarray(delays), float(width))
    cols = full[:, inside].copy()
    if (~inside).any():
        nonzero_in = (delays[inside] != 0.0)
        w_s = weights[inside][nonzero_in].sum()
        if w_s > 0:
            tail = full[:, ~inside] @ weights[~inside]
            cols[:, nonzero_in] += tail[:, None] / w_s
    return cols, inside


def _linear_areas(cols, y, sigma):
    a = cols / sigma[:, None]
    b = y / sigma
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    return sol


def _count_sigma(y):
    return np.sqrt(np.maximum(y, 1.0))


def fit_reference_width(h, pattern, width0=1.5):
    """Best shared Lorentzian FWHM for ``h`` (areas profiled out)."""
    y = np.asarray(h.counts, dtype=float)
    sigma = _count_sigma(y)

    def model(_x, p):
        cols, _ = _fit_design(h, pattern, p[0])
        return cols @ _linear_areas(cols, y, sigma)

    res = weighted_least_squares(model, [width0], ([h.bin_width / 4], [pattern.rep_period]),
                                 (None, y, sigma), names=["width"])
    if not res.converged:
        raise FitError(f"width fit did not converge: {res.message}", res)
    return res.params["width"], res.sigmas["width"]


def fit_peak_areas(h, pattern, width="fit", normalization="all_clusters",
                   overlap_tol=None):
    """Fit a sum of fixed-position Lorentzians and collect the labelled areas.

    Parameters
    ----------
    h : CoincidenceHistogram
    pattern : ClusterPattern
        Supplies peak positions and the relative weights used for
        normalisation; its visibility is not used.
    width : "fit", float or PeakShape
        ``"fit"`` determines the shared Lorentzian FWHM on this histogram
        (use it on the reference ``delta_t = rep_period`` measurement); a
        float fixes it. A ``PeakShape`` replaces the Lorentzians by that
        fixed profile, which removes the shape-mismatch bias when the true
        peak shape is known.
    normalization : {"all_clusters", "local"}
        ``"all_clusters"`` derives the normalisation areas from every
        non-zero-delay peak in range, weighted by the enumerated ratios;
        ``"local"`` uses only A1, A1' and their overlap partners.
    """
    y = np.asarray(h.counts, dtype=float)
    if y.size == 0 or not np.any(y > 0):
        raise FitError("empty histogram")
    if h.t_min > -pattern.delta_t or h.t_max < pattern.delta_t:
        raise DomainError("histogram does not cover the central cluster")
    if normalization not in ("all_clusters", "local"):
        raise DomainError(f"unknown normalization {normalization!r}")
    width_sigma = 0.0
    if isinstance(width, str):
        if width != "fit":
            raise DomainError(f"unknown width policy {width!r}")
        width, width_sigma = fit_reference_width(h, pattern)
    shape = width if isinstance(width, PeakShape) else None
    width = shape.width if shape is not None else float(width)
    if not width > 0:
        raise DomainError("width must be > 0")

    sigma = _count_sigma(y)
    cols, inside = _fit_design(h, pattern, shape if shape is not None else width)
    n = cols.shape[1]
    start = np.maximum(_linear_areas(cols, y, sigma), 0.0)
    res = weighted_least_squares(lambda _x, p: cols @ p, start, (0.0, np.inf),
                                 (None, y, sigma), jac=lambda _x, p: cols,
                                 names=[f"a{i}" for i in range(n)])
    if not res.converged and "degenerate" not in res.message:
        raise FitError(f"peak-area fit did not converge: {res.message}", res)
    areas = res.values
    cov = res.covariance

    entries = [e for e, ok in zip(pattern.entries, inside) if ok]
    names = [e.name for e in entries]
    delays = np.array([e.delay for e in entries])
    weights = np.array([e.weight for e in entries])
    coefs = {}
    index = {}
    for i, e in enumerate(entries):
        for nm in e.names:
            index[nm] = i
    for nm in _CENTRAL:
        if nm in index and len(entries[index[nm]].labels) == 1:
            coefs[nm] = _basis(n, index[nm])
    if "A0" not in index:
        raise DomainError("pattern has no zero-delay peak inside the histogram")
    coefs["A0"] = _basis(n, index["A0"])

    side = np.array([d != 0.0 for d in delays])
    unit = np.where(side, 1.0, 0.0) / weights[side].sum()
    omap = cluster_overlap_map(pattern.delta_t, pattern.rep_period,
                               **({} if overlap_tol is None else {"tol": overlap_tol}))

    if "A1" in coefs and "A1'" in coefs:
        w_pair = weights[index["A1"]] + weights[index["A1'"]]
        if normalization == "all_clusters":
            coefs["a_bar"] = unit * w_pair / 2.0
        else:
            coefs["a_bar"] = (coefs["A1"] + coefs["A1'"]) / 2.0
        if omap.regime == "A2":
            partners = [omap.overlaps["A1"][0], omap.overlaps["A1'"][0]]
            if all(p in index for p in partners):
                local = (coefs["A1"] + coefs["A1'"]
                         + _basis(n, index[partners[0]]) + _basis(n, index[partners[1]])) / 2.0
                w_tot = w_pair + weights[index[partners[0]]] + weights[index[partners[1]]]
                coefs["overlap_mean"] = (unit * w_tot / 2.0
                                         if normalization == "all_clusters" else local)
    outer = np.abs(delays) > pattern.rep_period * (1.0 + 1e-9)
    if omap.regime == "A3" and outer.any():
        coefs["side_cluster_mean"] = np.where(outer, 1.0, 0.0) / outer.sum()

    return PeakAreas(names=names, delays=delays, weights=weights, areas=areas,
                     covariance=cov, width=width, delta_t=pattern.delta_t,
                     rep_period=pattern.rep_period, coefficients=coefs,
                     width_sigma=width_sigma, chi2=res.chi2, dof=res.dof,
                     normalization=normalization)


# --------------------------------------------------------------------------
# visibility
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class VisibilityPoint:
    x: float
    v: float
    sigma: float
    flagged: bool = False
    regime: str = ""

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")
        if not (-3 * self.sigma <= self.v <= 1 + 3 * self.sigma):
            raise DomainError(f"visibility {self.v} outside [-3 sigma, 1 + 3 sigma]")
        if not (0.0 <= self.v <= 1.0) and not self.flagged:
            object.__setattr__(self, "flagged", True)


_DENOMINATOR = {"A1": "a_bar", "A2": "overlap_mean", "A3": "side_cluster_mean"}


def _unsupported(regime, reason=""):
    valid = "; ".join(f"{k}: {v}" for k, v in ESTIMATORS.items())
    msg = f"unsupported peak layout ({regime}{': ' + reason if reason else ''}). " \
          f"Valid estimators are {valid}"
    return UnsupportedConfigurationError(msg)


def visibility_estimate(areas, regime=None):
    """Visibility from labelled peak areas with first-order uncertainty.

    The estimator follows the layout: ``A1`` uses ``1 - A0/Abar``, ``A2``
    uses ``1 - A0/(2 Atilde/3)`` and ``A3`` uses ``1 - A0/(A_S/2)``. The
    uncertainty is propagated through the full area covariance.
    """
    if regime is None:
        regime = cluster_overlap_map(areas.delta_t, areas.rep_period)
    reason = ""
    if isinstance(regime, OverlapMap):
        reason = regime.reason
        regime = regime.regime
    if regime not in _DENOMINATOR:
        raise _unsupported(regime, reason)
    key = _DENOMINATOR[regime]
    if key not in areas.coefficients:
        raise _unsupported(regime, f"areas lack {key}")
    c0 = areas.coefficients["A0"]
    cd = areas.coefficients[key] * _REGIME_SCALE[regime]
    num = float(c0 @ areas.areas)
    den = float(cd @ areas.areas)
    if den == 0.0:
        raise DomainError("zero normalisation area")
    v = 1.0 - num / den
    grad = -c0 / den + num * cd / den ** 2
    sigma = math.sqrt(max(float(grad @ areas.covariance @ grad), 0.0))
    if sigma == 0.0:
        sigma = float(np.finfo(float).tiny)
    return VisibilityPoint(x=areas.delta_t, v=v, sigma=sigma,
                           flagged=not (0.0 <= v <= 1.0), regime=regime)


def visibility_sigma_first_order(a0, abar, sigma_a0, sigma_abar):
    """Uncorrelated first-order error of ``1 - a0/abar``."""
    return math.sqrt((a0 / abar ** 2) ** 2 * sigma_abar ** 2 + (1 / abar) ** 2 * sigma_a0 ** 2)


# --------------------------------------------------------------------------
# model fits
# --------------------------------------------------------------------------

def dt_model(gamma_rad, gamma_ph=None):
    """Visibility vs pulse separation; params (Gamma'_0, tau_c[, gamma])."""
    def model(x, p):
        x = np.asarray(x, dtype=float)
        g_ph = p[2] if gamma_ph is None else gamma_ph
        gsd = -p[0] * np.expm1(-(x / p[1]) ** 2)
        return gamma_rad / (gsd + g_ph + gamma_rad)
    return model


def temperature_model(x, p):
    """V(T) = 1 / (1 + gamma0 n (n + 1)) for params (gamma0, alpha)."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        n = 1.0 / np.expm1(p[1] / x)
    return 1.0 / (1.0 + p[0] * n * (n + 1.0))


def exponential_model(x, p):
    return p[0] * np.exp(-np.asarray(x, dtype=float) / p[1])


def _arrays(points):
    x = np.array([p.x for p in points], dtype=float)
    v = np.array([p.v for p in points], dtype=float)
    s = np.array([p.sigma for p in points], dtype=float)
    return x, v, s


def _dt_initial(x, v, gamma_rad, gamma_ph):
    order = np.argsort(x)
    xs, vs = x[order], v[order]
    v_far = min(max(vs[-1], 1e-3), 1.0)
    gsd0 = max(gamma_rad / v_far - gamma_rad - gamma_ph, 1e-3)
    mid = 0.5 * (vs.max() + vs.min())
    tau0 = float(np.median(xs))
    for i in range(len(xs) - 1):
        if (vs[i] - mid) * (vs[i + 1] - mid) <= 0 and vs[i] != vs[i + 1]:
            frac = (vs[i] - mid) / (vs[i] - vs[i + 1])
            tau0 = float(xs[i] + frac * (xs[i + 1] - xs[i]))
            break
    return gsd0, max(tau0, 1e-3)


def fit_visibility_vs_dt(points, gamma_rad, gamma_ph=0.0, bootstrap=0, seed=0):
    """Fit (Gamma'_0, tau_c) and optionally gamma to visibility vs pulse separation.

    ``gamma_ph`` is a fixed phonon dephasing rate or ``"free"``.
    """
    free = isinstance(gamma_ph, str)
    if free and gamma_ph != "free":
        raise DomainError(f"gamma_ph must be a number or 'free', got {gamma_ph!r}")
    need = 4 if free else 3
    if len(points) < need:
        raise FitError(f"need at least {need} points, got {len(points)}")
    x, v, s = _arrays(points)
    if len(np.unique(x)) < (3 if free else 2):
        raise FitError("under-determined: too few distinct pulse separations")
    if free:
        gsd0, tau0 = _dt_initial(x, v, gamma_rad, 0.0)
        p0 = [0.8 * gsd0, tau0, 0.2 * gsd0]
        names = ["gamma_sd_max", "tau_c", "gamma_ph"]
        bounds = ([0.0, 1e-6, 0.0], [np.inf, np.inf, np.inf])
        model = dt_model(gamma_rad)
    else:
        gsd0, tau0 = _dt_initial(x, v, gamma_rad, float(gamma_ph))
        p0 = [gsd0, tau0]
        names = ["gamma_sd_max", "tau_c"]
        bounds = ([0.0, 1e-6], [np.inf, np.inf])
        model = dt_model(gamma_rad, float(gamma_ph))
    data = (x, v, s)
    res = weighted_least_squares(model, p0, bounds, data, names=names)
    _attach_extras(res, model, bounds, data, bootstrap, seed,
                   profile_names=["gamma_ph"] if free else [])
    return res


def fit_visibility_vs_temperature(points, bootstrap=0, seed=0, p0=(1.0, 50.0)):
    if len(points) < 3:
        raise FitError(f"need at least 3 points, got {len(points)}")
    x, v, s = _arrays(points)
    if len(np.unique(x)) < 2:
        raise FitError("under-determined: all points at one temperature")
    if np.any(x <= 0):
        raise DomainError("temperatures must be > 0 K")
    bounds = ([0.0, 1e-6], [np.inf, np.inf])
    data = (x, v, s)
    res = weighted_least_squares(temperature_model, list(p0), bounds, data,
                                 names=["gamma0", "alpha"])
    _attach_extras(res, temperature_model, bounds, data, bootstrap, seed)
    return res


def fit_exponential_contrast(points, bootstrap=0, seed=0):
    """Fit ``c0 exp(-tau / T2)`` to (delay, contrast, sigma) triples."""
    pts = [tuple(map(float, p)) for p in points]
    if len(pts) < 2:
        raise FitError("need at least 2 points")
    x = np.array([p[0] for p in pts])
    c = np.array([p[1] for p in pts])
    s = np.array([p[2] for p in pts])
    if np.any(x < 0):
        raise DomainError("path delays must be >= 0")
    if not np.any(c != 0):
        raise FitError("all contrasts are zero")
    if len(np.unique(x)) < 2:
        raise FitError("under-determined: need two distinct delays")
    pos = c > 0
    if pos.sum() >= 2 and len(np.unique(x[pos])) >= 2:
        slope, icpt = np.polyfit(x[pos], np.log(c[pos]), 1, w=c[pos] / s[pos])
        t2 = -1.0 / slope if slope < 0 else float(np.ptp(x)) or 1.0
        c0 = float(np.exp(icpt))
    else:
        t2, c0 = float(np.ptp(x)) or 1.0, float(c.max())
    bounds = ([0.0, 1e-9], [np.inf, np.inf])
    data = (x, c, s)
    res = weighted_least_squares(exponential_model, [c0, t2], bounds, data,
                                 names=["c0", "t2"])
    _attach_extras(res, exponential_model, bounds, data, bootstrap, seed)
    return res


def _attach_extras(res, model, bounds, data, bootstrap, seed, profile_names=()):
    degenerate = "degenerate" in res.message
    wanted = list(res.names) if degenerate else list(profile_names)
    if wanted:
        res.profile = {nm: profile_interval(model, res, bounds, data, nm) for nm in wanted}
    if bootstrap:
        res.bootstrap_sigmas = bootstrap_sigmas(model, res, bounds, data,
                                                n_boot=int(bootstrap), seed=seed)


# --------------------------------------------------------------------------
# CSV / JSON interfaces
# --------------------------------------------------------------------------

def _read_csv(path, columns):
    rows = []
    with open(path, newline="") as fh:
        lines = [(i, ln) for i, ln in enumerate(fh, start=1)
                 if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ParseError("empty file", None, path)
    head_no, head = lines[0]
    found = [h.strip() for h in head.strip().split(",")]
    if found != list(columns):
        raise ParseError(f"expected header {','.join(columns)}, got {head.strip()!r}",
                         head_no, path)
    for lineno, ln in lines[1:]:
        parts = next(csv.reader([ln]))
        if len(parts) != len(columns):
            raise ParseError(f"expected {len(columns)} fields", lineno, path)
        try:
            rows.append(tuple(float(p) for p in parts))
        except ValueError:
            raise ParseError(f"non-numeric entry {ln.strip()!r}", lineno, path) from None
    return rows


def read_visibility_csv(path):
    return [VisibilityPoint(x, v, s) for x, v, s in _read_csv(path, ("x", "v", "sigma"))]


def write_visibility_csv(path, points, comments=()):
    with open(path, "w", newline="\n") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write("x,v,sigma\n")
        for p in points:
            fh.write(f"{p.x!r},{p.v!r},{p.sigma!r}\n")


def read_contrast_csv(path):
    return _read_csv(path, ("delay_ns", "contrast", "sigma"))


def write_fit_result(path, result, extra=None):
    d = result.to_dict()
    if extra:
        d.update(extra)
    with open(path, "w") as fh:
        json.dump(d, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_fit_result(path):
    with open(path) as fh:
        return FitResult.from_dict(json.load(fh))


def synthetic_temperature_points(temps, gamma0, alpha, noise=0.02, seed=0):
    """Visibility-vs-temperature points with additive Gaussian noise of ``noise``."""
    rng = np.random.default_rng(seed)
    temps = np.asarray(temps, dtype=float)
    v = temperature_model(temps, [gamma0, alpha])
    v_obs = v + noise * rng.standard_normal(temps.size)
    return [VisibilityPoint(float(t), float(vo), noise) for t, vo in zip(temps, v_obs)]


def synthetic_contrast_points(delays, t2, c0=1.0, rel_noise=0.02, seed=0):
    """Fringe contrasts ``c0 exp(-delay/t2)`` with Gaussian noise of ``rel_noise`` relative size."""
    rng = np.random.default_rng(seed)
    delays = np.asarray(delays, dtype=float)
    c = c0 * np.exp(-delays / t2)
    s = rel_noise * c
    obs = c + s * rng.standard_normal(delays.size)
    return [(float(d), float(o), float(si)) for d, o, si in zip(delays, obs, s)]
