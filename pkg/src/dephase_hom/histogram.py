"""
Coincidence-peak patterns and synthetic coincidence histograms.

Geometry: the laser fires a two-pulse sequence (pulses at 0 and ``delta_t``)
every ``rep_period``; with ``delta_t == rep_period`` this degenerates to one
pulse per period. Each photon passes an unbalanced interferometer whose long
arm adds ``delta_t`` and is routed to detector A or B. Coincidence delays are
``t_B - t_A``. Pairs reaching the second beamsplitter simultaneously
(zero delay) interfere, and their weight is scaled by ``1 - V``.

Peaks are labelled by cluster index ``k`` (letter A, B, C, ... by ``|k|``,
a leading ``-`` for ``k < 0``) and offset ``j`` in units of ``delta_t``
(digit ``|j|``, a trailing prime for ``j < 0``): the central cluster reads
``A2' A1' A0 A1 A2``.
"""

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Dict, List, Tuple

import numpy as np
from scipy import special

from . import kernels
from .errors import DomainError, ParseError
from .model import IRF_FWHM_NS, BeamsplitterParams

FORMAT_TAG = "dephase_hom histogram v1"
DEFAULT_BIN_WIDTH = 0.128
DEFAULT_OVERLAP_TOL = 1.5

_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


def peak_name(k, j):
    letter = chr(ord("A") + abs(k)) if abs(k) < 26 else f"K{abs(k)}"
    return ("-" if k < 0 else "") + letter + str(abs(j)) + ("'" if j < 0 else "")


@dataclass(frozen=True)
class PatternPeak:
    delay: float
    weight: float
    exact_delay: Fraction
    exact_weight: Fraction
    labels: Tuple[Tuple[int, int], ...]
    interfering: bool = False

    @property
    def names(self):
        return tuple(peak_name(k, j) for k, j in self.labels)

    @property
    def name(self):
        return "+".join(self.names)


@dataclass(frozen=True)
class ClusterPattern:
    entries: Tuple[PatternPeak, ...]
    delta_t: float
    rep_period: float
    n_periods: int
    visibility: float
    bs: BeamsplitterParams
    zero_weight_distinguishable: Fraction

    @property
    def delays(self):
        return np.array([e.delay for e in self.entries])

    @property
    def weights(self):
        return np.array([e.weight for e in self.entries])

    @property
    def single_pulse(self):
        return Fraction(self.delta_t) == Fraction(self.rep_period)

    def find(self, name):
        """Entry containing the peak labelled ``name`` (e.g. ``"A1'"``), or None."""
        for e in self.entries:
            if name in e.names:
                return e
        return None

    def exact_ratios(self, names):
        """Exact weights of the named peaks divided by their greatest common divisor."""
        ws = []
        for nm in names:
            e = self.find(nm)
            if e is None:
                raise KeyError(nm)
            if len(e.labels) != 1:
                raise ValueError(f"{nm} coincides with other peaks")
            ws.append(e.exact_weight)
        nonzero = [w for w in ws if w != 0]
        if not nonzero:
            return ws
        num = math.gcd(*[w.numerator for w in nonzero]) if len(nonzero) > 1 else nonzero[0].numerator
        den = math.lcm(*[w.denominator for w in nonzero]) if len(nonzero) > 1 else nonzero[0].denominator
        unit = Fraction(num, den)
        return [w / unit for w in ws]

    def metadata(self):
        return {"delta_t_ns": self.delta_t, "rep_period_ns": self.rep_period,
                "n_periods": self.n_periods, "visibility": self.visibility,
                "refl": self.bs.refl}

    def to_dict(self):
        return {
            "metadata": self.metadata(),
            "entries": [{"delay_ns": e.delay, "weight": e.weight,
                         "weight_exact": str(e.exact_weight), "labels": list(e.names),
                         "interfering": e.interfering} for e in self.entries],
            "overlaps": cluster_overlap_map(self.delta_t, self.rep_period).to_dict(),
        }


def _routes(bs):
    r, t = Fraction(bs.refl), Fraction(bs.trans)
    # (arm delay in units of delta_t, detector, weight)
    return [(0, "A", t * t), (0, "B", t * r), (1, "A", r * r), (1, "B", r * t)]


def enumerate_coincidence_pattern(delta_t, rep_period, n_periods, v, bs=None):
    """Relative coincidence areas from every two-photon pathway.

    Photon pairs are (photon in period 0 at detector A, another photon in
    period ``d`` at detector B). Each photon contributes the product of its
    arm and routing weights; areas are accumulated per distinct delay in
    exact rational arithmetic (``Fraction`` of the binary floats given), so
    ratios such as 1:4:6:4:1 come out exact.
    """
    if bs is None:
        bs = BeamsplitterParams()
    if n_periods < 1:
        raise DomainError("n_periods must be >= 1")
    if not (0 < delta_t <= rep_period):
        raise DomainError(f"need 0 < delta_t <= rep_period, got {delta_t}, {rep_period}")
    if not (0.0 <= v <= 1.0):
        raise DomainError(f"visibility must lie in [0, 1], got {v}")
    dt = Fraction(delta_t)
    period = Fraction(rep_period)
    single = dt == period
    offsets = [0] if single else [0, 1]  # emission offsets in units of delta_t
    routes = _routes(bs)
    route_a = [(arm, w) for arm, det, w in routes if det == "A"]
    route_b = [(arm, w) for arm, det, w in routes if det == "B"]

    acc: Dict[Fraction, Fraction] = {}
    labels: Dict[Fraction, set] = {}
    dist_zero = Fraction(0)
    reach = n_periods + 2
    for d in range(-reach, reach + 1):
        for ea, eb in product(offsets, offsets):
            if d == 0 and ea == eb:
                continue
            for (arm_a, wa), (arm_b, wb) in product(route_a, route_b):
                j = (eb + arm_b) - (ea + arm_a)
                delay = d * period + j * dt
                if single:
                    n = int(delay / period)
                    if abs(n) > n_periods:
                        continue
                    label = (n, 0)
                else:
                    if abs(d) > n_periods:
                        continue
                    label = (d, j)
                w = wa * wb
                if delay == 0:
                    dist_zero += w
                acc[delay] = acc.get(delay, Fraction(0)) + w
                labels.setdefault(delay, set()).add(label)

    entries = []
    for delay in sorted(acc):
        w_exact = acc[delay]
        interfering = delay == 0
        if interfering:
            w_exact = w_exact * (1 - Fraction(v))
        entries.append(PatternPeak(
            delay=float(delay), weight=float(w_exact), exact_delay=delay,
            exact_weight=w_exact, labels=tuple(sorted(labels[delay])),
            interfering=interfering))
    return ClusterPattern(entries=tuple(entries), delta_t=float(delta_t),
                          rep_period=float(rep_period), n_periods=int(n_periods),
                          visibility=float(v), bs=bs, zero_weight_distinguishable=dist_zero)


@dataclass(frozen=True)
class OverlapMap:
    delta_t: float
    rep_period: float
    tol: float
    overlaps: Dict[str, List[str]]
    regime: str
    reason: str = ""

    def to_dict(self):
        return {"delta_t_ns": self.delta_t, "rep_period_ns": self.rep_period,
                "tol_ns": self.tol, "regime": self.regime, "reason": self.reason,
                "overlaps": {k: list(v) for k, v in self.overlaps.items()}}


ESTIMATORS = {
    "A1": "V = 1 - A0 / Abar (no overlaps, e.g. delta_t = 2 ns)",
    "A2": "V = 1 - A0 / (2 Atilde / 3) (A1, A1' each overlap one outer peak, e.g. 4 or 8 ns)",
    "A3": "V = 1 - A0 / (A_S / 2) (delta_t equal to the repetition period)",
}


def cluster_overlap_map(delta_t, rep_period, tol=DEFAULT_OVERLAP_TOL, n_periods=3):
    """Which neighbouring-cluster peaks sit on top of central-cluster peaks.

    Two peaks overlap when their centres are closer than ``tol`` (ns), the
    scale of an emission peak's width. The resulting layout selects the
    visibility estimator: ``A1`` without overlaps, ``A2`` when A1 and A1'
    each overlap exactly one outermost (|j| = 2) peak, ``A3`` when
    ``delta_t == rep_period``; anything else is ``unsupported``.
    """
    if not (0 < delta_t <= rep_period):
        raise DomainError(f"need 0 < delta_t <= rep_period, got {delta_t}, {rep_period}")
    if Fraction(delta_t) == Fraction(rep_period):
        return OverlapMap(delta_t, rep_period, tol, {}, "A3",
                          "single pulse per period; clusters coincide")
    central = {j: j * delta_t for j in range(-2, 3)}
    overlaps: Dict[str, List[str]] = {}
    for j, pos in central.items():
        hits = []
        for k in range(-n_periods - 1, n_periods + 2):
            if k == 0:
                continue
            for jj in range(-2, 3):
                other = k * rep_period + jj * delta_t
                if abs(other - pos) < tol:
                    hits.append(((k, jj), abs(other - pos)))
        if hits:
            hits.sort(key=lambda h: h[1])
            overlaps[peak_name(0, j)] = [peak_name(*h[0]) for h in hits]
    # central peaks overlapping each other (delta_t below tol)
    if delta_t < tol:
        return OverlapMap(delta_t, rep_period, tol, overlaps, "unsupported",
                          "central-cluster peaks closer than the overlap tolerance")
    if "A0" in overlaps:
        return OverlapMap(delta_t, rep_period, tol, overlaps, "unsupported",
                          "the zero-delay peak overlaps " + ", ".join(overlaps["A0"]))
    a1 = overlaps.get("A1", [])
    a1p = overlaps.get("A1'", [])
    if not a1 and not a1p:
        return OverlapMap(delta_t, rep_period, tol, overlaps, "A1")

    def outer_single(hits):
        return len(hits) == 1 and hits[0].rstrip("'")[-1] == "2"

    if outer_single(a1) and outer_single(a1p):
        return OverlapMap(delta_t, rep_period, tol, overlaps, "A2")
    return OverlapMap(delta_t, rep_period, tol, overlaps, "unsupported",
                      "A1/A1' overlap a pattern no estimator covers")


# --------------------------------------------------------------------------
# peak shapes and synthesis
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PeakShape:
    """Shape of one coincidence peak.

    ``kind`` is ``"lorentzian"`` (``width`` = FWHM) or
    ``"two_sided_exponential"`` (``width`` = 1/Gamma decay constant); both
    are convolved with a Gaussian instrument response of FWHM ``irf_fwhm``.
    """

    kind: str = "two_sided_exponential"
    width: float = 1.0 / 0.85
    irf_fwhm: float = IRF_FWHM_NS

    def __post_init__(self):
        if self.kind not in ("lorentzian", "two_sided_exponential"):
            raise DomainError(f"unknown peak shape {self.kind!r}")
        if not self.width > 0:
            raise DomainError("peak width must be > 0")
        if not self.irf_fwhm >= 0:
            raise DomainError("irf_fwhm must be >= 0")

    @classmethod
    def lorentzian(cls, fwhm):
        """Pure Lorentzian (no instrument response), as used by the area fits."""
        return cls("lorentzian", fwhm, 0.0)

    @classmethod
    def emission(cls, gamma_rad, irf_fwhm=IRF_FWHM_NS):
        return cls("two_sided_exponential", 1.0 / gamma_rad, irf_fwhm)

    def to_dict(self):
        return {"kind": self.kind, "width_ns": self.width, "irf_fwhm_ns": self.irf_fwhm}


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _voigt_bin_matrix(edges, centers, fwhm, irf_fwhm):
    sigma = irf_fwhm * _FWHM_TO_SIGMA
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    out = np.empty((lo.size, centers.size))
    for k, c in enumerate(centers):
        dens = special.voigt_profile(pts - c, sigma, 0.5 * fwhm)
        out[:, k] = half * (dens @ _GL_WEIGHTS)
    return out


def shape_bin_matrix(shape, edges, centers):
    """Fraction of each unit-area peak falling in each bin, shape ``(n_bins, n_peaks)``."""
    edges = np.ascontiguousarray(edges, dtype=float)
    centers = np.ascontiguousarray(centers, dtype=float)
    if shape.kind == "lorentzian":
        if shape.irf_fwhm == 0:
            return kernels.lorentzian_bin_matrix(edges, centers, float(shape.width))
        return _voigt_bin_matrix(edges, centers, shape.width, shape.irf_fwhm)
    return kernels.laplace_gauss_bin_matrix(edges, centers, float(shape.width),
                                            float(shape.irf_fwhm * _FWHM_TO_SIGMA))


@dataclass
class CoincidenceHistogram:
    bin_width: float
    t_min: float
    counts: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if not self.bin_width > 0:
            raise DomainError("bin_width must be > 0")
        if self.counts.ndim != 1:
            raise DomainError("counts must be one-dimensional")
        if np.any(self.counts < 0):
            raise DomainError("counts must be >= 0")

    @property
    def n_bins(self):
        return int(self.counts.size)

    @property
    def edges(self):
        return self.t_min + self.bin_width * np.arange(self.n_bins + 1)

    @property
    def centers(self):
        return self.t_min + self.bin_width * (np.arange(self.n_bins) + 0.5)

    @property
    def t_max(self):
        return self.t_min + self.bin_width * self.n_bins

    def scaled(self, factor):
        return CoincidenceHistogram(self.bin_width, self.t_min, self.counts * factor,
                                    dict(self.meta))


def _bin_count(bin_width, t_range):
    lo, hi = t_range
    if not hi > lo:
        raise DomainError("histogram range must have hi > lo")
    n = (hi - lo) / bin_width
    n_round = int(round(n))
    if n_round < 1:
        raise DomainError("histogram range shorter than one bin")
    if abs(n - n_round) > 1e-6 * max(1.0, n):
        n_round = int(math.ceil(n - 1e-9))
    return n_round


def default_range(rep_period, n_rep=3):
    return (-n_rep * rep_period, n_rep * rep_period)


def expected_counts(pattern, shape, total_counts, bin_width, t_range):
    """Noiseless bin contents; they sum to ``total_counts`` over the range."""
    n_bins = _bin_count(bin_width, t_range)
    edges = t_range[0] + bin_width * np.arange(n_bins + 1)
    design = shape_bin_matrix(shape, edges, pattern.delays)
    profile = design @ pattern.weights
    norm = profile.sum()
    if not norm > 0:
        raise DomainError("pattern has no weight inside the histogram range")
    return total_counts * profile / norm


def synthesize_histogram(pattern, shape, total_counts, bin_width=DEFAULT_BIN_WIDTH,
                         t_range=None, seed=0, noise="poisson"):
    """Synthetic coincidence histogram for ``pattern``.

    Parameters
    ----------
    noise : {"poisson", "multinomial", None}
        ``"poisson"`` draws every bin independently; ``"multinomial"`` keeps
        the realised total fixed at ``total_counts``; ``None`` returns the
        expected (float) bin contents.
    """
    if total_counts < 1:
        raise DomainError("total_counts must be >= 1")
    if t_range is None:
        t_range = default_range(pattern.rep_period)
    t_range = (float(t_range[0]), float(t_range[1]))
    mean = expected_counts(pattern, shape, total_counts, bin_width, t_range)
    rng = np.random.default_rng(seed)
    if noise == "poisson":
        counts = rng.poisson(mean).astype(np.int64)
    elif noise == "multinomial":
        counts = rng.multinomial(int(total_counts), mean / mean.sum()).astype(np.int64)
    elif noise is None:
        counts = mean
    else:
        raise DomainError(f"unknown noise model {noise!r}")
    meta = dict(pattern.metadata())
    meta.update({"shape": shape.kind, "width_ns": shape.width, "irf_fwhm_ns": shape.irf_fwhm,
                 "total_counts": total_counts, "seed": seed,
                 "noise": noise if noise is not None else "none"})
    outside = [e.delay for e in pattern.entries if not (t_range[0] <= e.delay <= t_range[1])]
    if outside:
        meta["peaks_outside_range"] = len(outside)
    return CoincidenceHistogram(bin_width=float(bin_width), t_min=t_range[0],
                                counts=counts, meta=meta)


# --------------------------------------------------------------------------
# file format
# --------------------------------------------------------------------------

_RESERVED = ("bin_width_ns", "t_min_ns", "n_bins")


def _fmt_count(c):
    if isinstance(c, (int, np.integer)):
        return str(int(c))
    return repr(float(c))


def format_histogram(h):
    lines = [f"# {FORMAT_TAG}",
             f"# bin_width_ns={json.dumps(float(h.bin_width))}",
             f"# t_min_ns={json.dumps(float(h.t_min))}",
             f"# n_bins={h.n_bins}"]
    for key in sorted(h.meta):
        if key in _RESERVED:
            continue
        if "=" in key or "\n" in key:
            raise DomainError(f"invalid metadata key {key!r}")
        lines.append(f"# {key}={json.dumps(h.meta[key], sort_keys=True)}")
    lines.append("delay_ns,counts")
    integer = np.issubdtype(h.counts.dtype, np.integer)
    for c, n in zip(h.centers, h.counts):
        lines.append(f"{float(c)!r},{_fmt_count(int(n) if integer else float(n))}")
    return "\n".join(lines) + "\n"


def write_histogram(path, h):
    with open(path, "w", newline="\n") as fh:
        fh.write(format_histogram(h))


def parse_histogram(text, path=None):
    meta = {}
    header = {}
    counts = []
    integer = True
    seen_columns = False
    last_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        last_line = lineno
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body == FORMAT_TAG or "=" not in body:
                continue
            key, _, value = body.partition("=")
            try:
                parsed = json.loads(value)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad metadata value for {key!r}: {exc}", lineno, path)
            if key in _RESERVED:
                header[key] = parsed
            else:
                meta[key] = parsed
            continue
        if not seen_columns:
            if line.replace(" ", "") != "delay_ns,counts":
                raise ParseError(f"expected header 'delay_ns,counts', got {line!r}", lineno, path)
            seen_columns = True
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 'delay_ns,counts', got {line!r}", lineno, path)
        try:
            float(parts[0])
            if any(ch in parts[1] for ch in ".eEn"):
                value = float(parts[1])
                integer = False
            else:
                value = int(parts[1])
        except ValueError:
            raise ParseError(f"non-numeric entry {line!r}", lineno, path) from None
        if value < 0:
            raise ParseError("negative count", lineno, path)
        counts.append(value)
    for key in ("bin_width_ns", "t_min_ns"):
        if key not in header:
            raise ParseError(f"missing metadata key {key}", None, path)
    if not seen_columns:
        raise ParseError("missing data header", last_line + 1, path)
    expected = header.get("n_bins")
    if expected is not None and len(counts) != expected:
        raise ParseError(f"truncated or padded data: expected {expected} bins, found "
                         f"{len(counts)}", last_line + 1, path)
    if not counts:
        raise ParseError("no data rows", last_line + 1, path)
    arr = np.array(counts, dtype=np.int64 if integer else float)
    return CoincidenceHistogram(bin_width=float(header["bin_width_ns"]),
                                t_min=float(header["t_min_ns"]), counts=arr, meta=meta)


def read_histogram(path):
    with open(path) as fh:
        return parse_histogram(fh.read(), path=str(path))
