import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from dephase_hom import kernels
from dephase_hom._accel import HAS_NUMBA, thread_hint

rng = np.random.default_rng(123)
EDGES = np.linspace(-40.0, 40.0, 626)
CENTERS = np.array([-12.5, -4.0, 0.0, 0.5, 4.0, 37.0])
SPD = (lambda a: a @ a.T)(rng.standard_normal((7, 4)))

CASES = {
    "lorentzian_bin_matrix": (EDGES, CENTERS, 1.6),
    "laplace_gauss_bin_matrix": (EDGES, CENTERS, 1.0 / 0.85, 0.35 / 2.3548),
    "phase_cov_matrix": (np.array([0.0, 0.0, 4.0, 4.0]), np.array([1.0, 2.0, 1.0, 2.0]),
                         0.3, 1.02, 12.0),
    "pivoted_cholesky": (SPD, 1e-12),
    "mc_cos_moments": (rng.exponential(1.0, 500), rng.exponential(1.0, 500),
                       rng.standard_normal(500), 0.5),
    "cos_moments": (rng.standard_normal(500),),
}


@pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("name", sorted(CASES))
def test_backends_agree(name):
    a = kernels.NUMBA_KERNELS[name](*CASES[name])
    b = kernels.NUMPY_KERNELS[name](*CASES[name])
    if isinstance(a, tuple):
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12)
    else:
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_lorentzian_bins_match_arctan_cdf():
    m = kernels.NUMPY_KERNELS["lorentzian_bin_matrix"](EDGES, np.array([0.3]), 1.6)
    cdf = 0.5 + np.arctan((EDGES - 0.3) / 0.8) / np.pi
    np.testing.assert_allclose(m[:, 0], np.diff(cdf), atol=1e-15)


def _laplace_gauss_cdf_quad(x, b, s):
    # P(U + G <= x) = E_U[Phi((x - U) / s)] with U ~ Laplace(b)
    f = lambda u: mp.exp(-abs(u) / b) / (2 * b) * mp.ncdf((x - u) / s)  # noqa: E731
    lo, hi = min(0.0, x), max(0.0, x)
    return float(mp.quad(f, [-mp.inf, lo - 0.5, lo, hi, hi + 0.5, mp.inf]))


@pytest.mark.parametrize("x", [-5.0, -1.0, -0.2, 0.0, 0.3, 2.0, 6.0])
@pytest.mark.parametrize("b, s", [(1.0 / 0.85, 0.35 / 2.3548), (0.3, 1.0), (2.0, 0.01)])
def test_laplace_gauss_cdf_against_quadrature(x, b, s):
    ref = _laplace_gauss_cdf_quad(x, b, s)
    assert kernels.laplace_gauss_cdf(np.array([x]), b, s)[0] == pytest.approx(ref, abs=1e-9)


def test_laplace_gauss_cdf_zero_sigma_is_laplace():
    x = np.linspace(-5, 5, 11)
    b = 1.3
    ref = np.where(x < 0, 0.5 * np.exp(x / b), 1 - 0.5 * np.exp(-x / b))
    np.testing.assert_allclose(kernels.laplace_gauss_cdf(x, b, 0.0), ref, atol=1e-15)


def test_laplace_gauss_cdf_extreme_ratio_is_stable():
    x = np.linspace(-30, 30, 61)
    c = kernels.laplace_gauss_cdf(x, 0.01, 5.0)
    assert np.all(np.isfinite(c))
    np.testing.assert_allclose(c, special.ndtr(x / 5.0), atol=1e-4)
    assert np.all(np.diff(c) >= 0)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 8), k=st.integers(1, 8), seed=st.integers(0, 2**31))
def test_pivoted_cholesky_reconstructs_psd(n, k, seed):
    g = np.random.default_rng(seed).standard_normal((n, k))
    a = g @ g.T
    tol = 1e-12 * max(np.trace(a), 1e-300)
    lower, rank = kernels.pivoted_cholesky(np.ascontiguousarray(a), tol)
    assert rank <= min(n, k)
    np.testing.assert_allclose(lower @ lower.T, a, atol=1e-9 * max(np.trace(a), 1.0))


def test_thread_hint(monkeypatch):
    monkeypatch.delenv("DEPHASE_HOM_THREADS", raising=False)
    assert thread_hint() == 1
    monkeypatch.setenv("DEPHASE_HOM_THREADS", "4")
    assert thread_hint() == 4
    monkeypatch.setenv("DEPHASE_HOM_THREADS", "lots")
    assert thread_hint(2) == 2
    monkeypatch.setenv("DEPHASE_HOM_THREADS", "0")
    assert thread_hint() == 1


def test_disable_flag_selects_numpy_backend():
    import subprocess
    import sys
    env = {"DEPHASE_HOM_DISABLE_NUMBA": "1", "PATH": ""}
    out = subprocess.run([sys.executable, "-c", "import dephase_hom; print(dephase_hom.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "numpy"
