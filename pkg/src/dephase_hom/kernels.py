"""
Inner-loop kernels.

Every kernel exists twice: an explicit-loop version compiled with numba and a
vectorised numpy version. The module-level names point at whichever backend
``_accel`` selected; both variants stay importable for cross-checks and the
benchmark script.
"""

import math

import numpy as np
from scipy import special

from ._accel import BACKEND, njit

_SQRT2 = math.sqrt(2.0)


# --------------------------------------------------------------------------
# peak shapes integrated over histogram bins
# --------------------------------------------------------------------------

@njit
def _lorentzian_bin_matrix_nb(edges, centers, fwhm):
    nb = edges.shape[0] - 1
    npk = centers.shape[0]
    hw = 0.5 * fwhm
    out = np.empty((nb, npk))
    for k in range(npk):
        c = centers[k]
        lo = math.atan((edges[0] - c) / hw)
        for i in range(nb):
            hi = math.atan((edges[i + 1] - c) / hw)
            out[i, k] = (hi - lo) / math.pi
            lo = hi
    return out


def _lorentzian_bin_matrix_np(edges, centers, fwhm):
    hw = 0.5 * fwhm
    cdf = np.arctan((edges[:, None] - centers[None, :]) / hw)
    return np.diff(cdf, axis=0) / np.pi


@njit
def _laplace_gauss_cdf_nb(x, decay, sigma):
    if sigma == 0.0:
        if x < 0.0:
            return 0.5 * math.exp(x / decay)
        return 1.0 - 0.5 * math.exp(-x / decay)
    r = sigma / decay
    s = 0.5 * r * r
    base = 0.5 * math.erfc(-(x / sigma) / _SQRT2)
    pa = 0.5 * math.erfc(-(x / sigma - r) / _SQRT2)
    pb = 0.5 * math.erfc((x / sigma + r) / _SQRT2)
    ta = 0.0
    tb = 0.0
    if pa > 0.0:
        ta = math.exp(-x / decay + s + math.log(pa))
    if pb > 0.0:
        tb = math.exp(x / decay + s + math.log(pb))
    return base - 0.5 * ta + 0.5 * tb


@njit
def _laplace_gauss_bin_matrix_nb(edges, centers, decay, sigma):
    nb = edges.shape[0] - 1
    npk = centers.shape[0]
    out = np.empty((nb, npk))
    for k in range(npk):
        c = centers[k]
        lo = _laplace_gauss_cdf_nb(edges[0] - c, decay, sigma)
        for i in range(nb):
            hi = _laplace_gauss_cdf_nb(edges[i + 1] - c, decay, sigma)
            out[i, k] = hi - lo
            lo = hi
    return out


def _laplace_gauss_cdf_np(x, decay, sigma):
    x = np.asarray(x, dtype=float)
    if sigma == 0.0:
        return np.where(x < 0.0, 0.5 * np.exp(np.minimum(x, 0.0) / decay),
                        1.0 - 0.5 * np.exp(-np.maximum(x, 0.0) / decay))
    r = sigma / decay
    s = 0.5 * r * r
    base = 0.5 * special.erfc(-(x / sigma) / _SQRT2)
    pa = 0.5 * special.erfc(-(x / sigma - r) / _SQRT2)
    pb = 0.5 * special.erfc((x / sigma + r) / _SQRT2)
    with np.errstate(divide="ignore", over="ignore"):
        ta = np.where(pa > 0.0, np.exp(-x / decay + s + np.log(pa)), 0.0)
        tb = np.where(pb > 0.0, np.exp(x / decay + s + np.log(pb)), 0.0)
    return base - 0.5 * ta + 0.5 * tb


def _laplace_gauss_bin_matrix_np(edges, centers, decay, sigma):
    cdf = _laplace_gauss_cdf_np(edges[:, None] - centers[None, :], decay, sigma)
    return np.diff(cdf, axis=0)


# --------------------------------------------------------------------------
# phase covariance and its factorisation
# --------------------------------------------------------------------------

@njit
def _phase_cov_matrix_nb(anchors, elapsed, gamma_ph, gamma_sd_max, tau_c):
    n = anchors.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            d = anchors[i] - anchors[j]
            k = 0.0
            if gamma_sd_max > 0.0:
                k += gamma_sd_max * math.exp(-(d / tau_c) ** 2)
            if gamma_ph > 0.0 and d == 0.0:
                k += gamma_ph
            v = k * min(elapsed[i], elapsed[j])
            out[i, j] = v
            out[j, i] = v
    return out


def _phase_cov_matrix_np(anchors, elapsed, gamma_ph, gamma_sd_max, tau_c):
    d = anchors[:, None] - anchors[None, :]
    k = np.zeros_like(d)
    if gamma_sd_max > 0.0:
        k = k + gamma_sd_max * np.exp(-(d / tau_c) ** 2)
    if gamma_ph > 0.0:
        k = k + np.where(d == 0.0, gamma_ph, 0.0)
    return k * np.minimum(elapsed[:, None], elapsed[None, :])


@njit
def _pivoted_cholesky_nb(a, tol):
    n = a.shape[0]
    work = a.copy()
    lower = np.zeros((n, n))
    perm = np.arange(n)
    rank = 0
    for k in range(n):
        # largest remaining diagonal entry
        p = k
        best = work[perm[k], perm[k]]
        for m in range(k + 1, n):
            if work[perm[m], perm[m]] > best:
                best = work[perm[m], perm[m]]
                p = m
        if best <= tol:
            break
        tmp = perm[k]
        perm[k] = perm[p]
        perm[p] = tmp
        piv = math.sqrt(best)
        pk = perm[k]
        lower[pk, k] = piv
        for m in range(k + 1, n):
            pm = perm[m]
            lower[pm, k] = work[pm, pk] / piv
        for m in range(k + 1, n):
            pm = perm[m]
            for q in range(k + 1, n):
                pq = perm[q]
                work[pm, pq] -= lower[pm, k] * lower[pq, k]
        rank += 1
    return lower, rank


def _pivoted_cholesky_np(a, tol):
    n = a.shape[0]
    work = np.array(a, dtype=float, copy=True)
    lower = np.zeros((n, n))
    perm = np.arange(n)
    rank = 0
    for k in range(n):
        rest = perm[k:]
        diag = work[rest, rest]
        p = int(np.argmax(diag))
        if diag[p] <= tol:
            break
        perm[k], perm[k + p] = perm[k + p], perm[k]
        pk = perm[k]
        piv = math.sqrt(work[pk, pk])
        lower[pk, k] = piv
        tail = perm[k + 1:]
        col = work[tail, pk] / piv
        lower[tail, k] = col
        work[np.ix_(tail, tail)] -= np.outer(col, col)
        rank += 1
    return lower, rank


# --------------------------------------------------------------------------
# Monte-Carlo accumulation
# --------------------------------------------------------------------------

@njit
def _mc_cos_moments_nb(s1, s2, z, rate):
    n = s1.shape[0]
    acc = 0.0
    acc2 = 0.0
    for i in range(n):
        c = math.cos(z[i] * math.sqrt(rate * abs(s1[i] - s2[i])))
        acc += c
        acc2 += c * c
    return acc, acc2


def _mc_cos_moments_np(s1, s2, z, rate):
    c = np.cos(z * np.sqrt(rate * np.abs(s1 - s2)))
    return float(c.sum()), float((c * c).sum())


@njit
def _cos_moments_nb(x):
    acc = 0.0
    acc2 = 0.0
    for i in range(x.shape[0]):
        c = math.cos(x[i])
        acc += c
        acc2 += c * c
    return acc, acc2


def _cos_moments_np(x):
    c = np.cos(x)
    return float(c.sum()), float((c * c).sum())


NUMBA_KERNELS = {
    "lorentzian_bin_matrix": _lorentzian_bin_matrix_nb,
    "laplace_gauss_bin_matrix": _laplace_gauss_bin_matrix_nb,
    "phase_cov_matrix": _phase_cov_matrix_nb,
    "pivoted_cholesky": _pivoted_cholesky_nb,
    "mc_cos_moments": _mc_cos_moments_nb,
    "cos_moments": _cos_moments_nb,
}

NUMPY_KERNELS = {
    "lorentzian_bin_matrix": _lorentzian_bin_matrix_np,
    "laplace_gauss_bin_matrix": _laplace_gauss_bin_matrix_np,
    "phase_cov_matrix": _phase_cov_matrix_np,
    "pivoted_cholesky": _pivoted_cholesky_np,
    "mc_cos_moments": _mc_cos_moments_np,
    "cos_moments": _cos_moments_np,
}

_ACTIVE = NUMBA_KERNELS if BACKEND == "numba" else NUMPY_KERNELS

lorentzian_bin_matrix = _ACTIVE["lorentzian_bin_matrix"]
laplace_gauss_bin_matrix = _ACTIVE["laplace_gauss_bin_matrix"]
phase_cov_matrix = _ACTIVE["phase_cov_matrix"]
pivoted_cholesky = _ACTIVE["pivoted_cholesky"]
mc_cos_moments = _ACTIVE["mc_cos_moments"]
cos_moments = _ACTIVE["cos_moments"]
laplace_gauss_cdf = _laplace_gauss_cdf_np
