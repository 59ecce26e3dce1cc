"""
Weighted nonlinear least squares with box bounds.

The engine is a damped Gauss-Newton (Levenberg-Marquardt) iteration. The
first trial step of every iteration is undamped, so problems that are linear
in their parameters converge in a single step. Parameters sitting on a bound
whose gradient points outward are frozen for that iteration (active set),
which keeps the returned point KKT-consistent.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .errors import DomainError, FitError

_logger = logging.getLogger(__name__)

MAX_ITER = 200
XTOL = 1e-8
FTOL = 1e-10
COND_LIMIT = 1e12


@dataclass
class FitResult:
    params: Dict[str, float]
    sigmas: Dict[str, float]
    covariance: np.ndarray
    chi2: float
    n_iter: int
    converged: bool
    dof: int = 0
    at_bound: List[str] = field(default_factory=list)
    message: str = ""
    bootstrap_sigmas: Optional[Dict[str, float]] = None
    profile: Optional[Dict[str, List[float]]] = None

    @property
    def names(self):
        return list(self.params)

    @property
    def values(self):
        return np.array([self.params[k] for k in self.params])

    @property
    def reduced_chi2(self):
        return self.chi2 / self.dof if self.dof > 0 else float("nan")

    def sigma_disagreement(self, threshold=0.3):
        """Names whose bootstrap and covariance sigmas differ by more than ``threshold``."""
        if not self.bootstrap_sigmas:
            return []
        out = []
        for name, s in self.sigmas.items():
            b = self.bootstrap_sigmas.get(name)
            if b is None:
                continue
            ref = max(s, b)
            if ref > 0 and abs(s - b) / ref > threshold:
                out.append(name)
        return out

    def to_dict(self):
        d = {
            "params": dict(self.params),
            "sigmas": dict(self.sigmas),
            "covariance": np.asarray(self.covariance, dtype=float).tolist(),
            "chi2": float(self.chi2),
            "dof": int(self.dof),
            "n_iter": int(self.n_iter),
            "converged": bool(self.converged),
            "at_bound": list(self.at_bound),
            "message": self.message,
        }
        if self.bootstrap_sigmas is not None:
            d["bootstrap_sigmas"] = dict(self.bootstrap_sigmas)
            d["sigma_disagreement"] = self.sigma_disagreement()
        if self.profile is not None:
            d["profile"] = {k: list(v) for k, v in self.profile.items()}
        return d

    def to_json(self, **kw):
        kw.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        return cls(params=dict(d["params"]), sigmas=dict(d["sigmas"]),
                   covariance=np.array(d["covariance"], dtype=float),
                   chi2=float(d["chi2"]), n_iter=int(d["n_iter"]),
                   converged=bool(d["converged"]), dof=int(d.get("dof", 0)),
                   at_bound=list(d.get("at_bound", [])), message=d.get("message", ""),
                   bootstrap_sigmas=d.get("bootstrap_sigmas"), profile=d.get("profile"))


def _fd_jacobian(model, x, p, f0, upper):
    jac = np.empty((f0.size, p.size))
    for i in range(p.size):
        h = max(1e-6, 1e-6 * abs(p[i]))
        q = p.copy()
        if p[i] + h > upper[i]:
            h = -h
        q[i] = p[i] + h
        jac[:, i] = (np.asarray(model(x, q), dtype=float) - f0) / h
    return jac


def _as_bounds(bounds, n):
    if bounds is None:
        return np.full(n, -np.inf), np.full(n, np.inf)
    lo, hi = bounds
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy()
    if np.any(lo > hi):
        raise DomainError("lower bound above upper bound")
    return lo, hi


def _chi2(res):
    return float(res @ res)


def weighted_least_squares(model, params0, bounds, data, names=None, jac=None,
                           max_iter=MAX_ITER, xtol=XTOL, ftol=FTOL):
    """Minimise ``sum(((model(x, p) - y) / sigma)**2)`` subject to box bounds.

    Parameters
    ----------
    model : callable
        ``model(x, p) -> ndarray`` with ``p`` a 1-D float array.
    params0 : sequence of float
        Starting point; must be finite and inside ``bounds``.
    bounds : (lower, upper) or None
        Scalars or per-parameter arrays; use ``np.inf`` for open sides.
    data : (x, y, sigma)
        ``sigma`` may be None for unit weights.
    names : sequence of str, optional
        Parameter names for the result; defaults to ``p0, p1, ...``.
    jac : callable, optional
        ``jac(x, p) -> (n_data, n_params)`` Jacobian of the model. Forward
        differences with step ``max(1e-6, 1e-6 |p|)`` are used otherwise.

    Returns
    -------
    FitResult
        ``converged`` is False when the iteration cap is reached or the
        curvature matrix is singular at the solution; the last iterate is
        returned in both cases.
    """
    x, y, sigma = data
    y = np.asarray(y, dtype=float)
    sigma = np.ones_like(y) if sigma is None else np.asarray(sigma, dtype=float)
    if np.any(~(sigma > 0)):
        raise DomainError("all sigmas must be > 0")
    p = np.array(params0, dtype=float)
    n = p.size
    names = list(names) if names is not None else [f"p{i}" for i in range(n)]
    lo, hi = _as_bounds(bounds, n)
    if not np.all(np.isfinite(p)):
        raise DomainError("initial parameters must be finite")
    if np.any(p < lo) or np.any(p > hi):
        raise DomainError("initial parameters outside bounds")

    def evaluate(q):
        f = np.asarray(model(x, q), dtype=float)
        return f, (f - y) / sigma

    def jacobian(q, f):
        if jac is not None:
            return np.asarray(jac(x, q), dtype=float)
        return _fd_jacobian(model, x, q, f, hi)

    f, res = evaluate(p)
    chi2 = _chi2(res)
    if not np.isfinite(chi2):
        raise FitError("model is not finite at the starting point")
    lam = 0.0
    converged = False
    message = "iteration cap reached"
    it = 0
    jw = None
    while it < max_iter:
        it += 1
        jw = jacobian(p, f) / sigma[:, None]
        grad = jw.T @ res
        jtj = jw.T @ jw
        free = np.ones(n, dtype=bool)
        free &= ~((p <= lo) & (grad > 0))
        free &= ~((p >= hi) & (grad < 0))
        if not free.any():
            converged, message = True, "all parameters pinned at bounds"
            break
        a = jtj[np.ix_(free, free)]
        g = grad[free]
        scale = np.maximum(np.diag(a), 1e-30)
        accepted = False
        while True:
            try:
                step_free = np.linalg.solve(a + lam * np.diag(scale), -g)
            except np.linalg.LinAlgError:
                step_free = np.linalg.lstsq(a + lam * np.diag(scale), -g, rcond=None)[0]
            step = np.zeros(n)
            step[free] = step_free
            p_new = np.clip(p + step, lo, hi)
            f_new, res_new = evaluate(p_new)
            chi2_new = _chi2(res_new)
            dp = np.abs(p_new - p)
            rel_step = float(np.max(dp / np.maximum(np.abs(p), 1e-12)))
            if np.isfinite(chi2_new) and chi2_new <= chi2:
                accepted = True
                break
            if rel_step < xtol or lam > 1e16:
                break
            lam = max(lam * 10.0, 1e-3)
        if not accepted:
            converged, message = True, "no further decrease at step resolution"
            break
        rel_chi2 = (chi2 - chi2_new) / max(chi2, 1e-300)
        p, f, res, chi2 = p_new, f_new, res_new, chi2_new
        lam = lam / 10.0 if lam > 1e-7 else 0.0
        if chi2 <= 1e-28 * max(y.size, 1):
            converged, message = True, "exact fit"
            break
        if rel_step < xtol:
            converged, message = True, "relative parameter step below tolerance"
            break
        if rel_chi2 < ftol:
            converged, message = True, "relative chi2 change below tolerance"
            break

    jw = jacobian(p, f) / sigma[:, None]
    grad = jw.T @ res
    pinned = ((p <= lo) & (grad >= 0)) | ((p >= hi) & (grad <= 0))
    cov = np.zeros((n, n))
    free = ~pinned
    degenerate = False
    if free.any():
        a = (jw.T @ jw)[np.ix_(free, free)]
        try:
            cond = np.linalg.cond(a)
        except np.linalg.LinAlgError:
            cond = np.inf
        if not np.isfinite(cond) or cond > COND_LIMIT:
            degenerate = True
            cov_free = np.linalg.pinv(a)
        else:
            cov_free = np.linalg.inv(a)
        cov[np.ix_(free, free)] = cov_free
    if degenerate:
        converged = False
        message = "degenerate curvature (parameters not identifiable); " + message
    sig = np.sqrt(np.maximum(np.diag(cov), 0.0))
    at_bound = [names[i] for i in range(n) if pinned[i]]
    n_free = int(free.sum())
    return FitResult(params={k: float(v) for k, v in zip(names, p)},
                     sigmas={k: float(v) for k, v in zip(names, sig)},
                     covariance=cov, chi2=float(chi2), n_iter=it, converged=converged,
                     dof=int(y.size - n_free), at_bound=at_bound, message=message)


def profile_interval(model, result, bounds, data, name, delta_chi2=1.0, span=None,
                     n_grid=61):
    """Profile-likelihood interval for one parameter.

    The named parameter is stepped over a grid while the others are refitted;
    the interval is where the profiled chi2 stays within ``delta_chi2`` of
    its minimum. Returns ``[lower, upper, best]``; an edge of the scanned
    range is returned when the profile does not cross the threshold.
    """
    names = result.names
    idx = names.index(name)
    p_best = result.values
    lo, hi = _as_bounds(bounds, len(names))
    if span is None:
        s = result.sigmas[name]
        width = 5 * s if s > 0 else max(abs(p_best[idx]), 1.0)
        span = (max(lo[idx], p_best[idx] - width), min(hi[idx], p_best[idx] + width))
    grid = np.linspace(span[0], span[1], n_grid)
    others = [i for i in range(len(names)) if i != idx]
    chi = np.empty(n_grid)
    for g_i, val in enumerate(grid):
        def sub_model(x, q, val=val):
            full = np.empty(len(names))
            full[idx] = val
            full[others] = q
            return model(x, full)
        if others:
            start = np.clip(p_best[others], lo[others], hi[others])
            sub = weighted_least_squares(sub_model, start, (lo[others], hi[others]), data,
                                         max_iter=100)
            chi[g_i] = sub.chi2
        else:
            xx, yy, ss = data
            ss = np.ones_like(yy) if ss is None else ss
            r = (np.asarray(sub_model(xx, np.empty(0))) - yy) / ss
            chi[g_i] = float(r @ r)
    best = float(grid[int(np.argmin(chi))])
    floor = min(float(chi.min()), result.chi2)
    inside = grid[chi <= floor + delta_chi2]
    if inside.size == 0:
        return [best, best, best]
    return [float(inside.min()), float(inside.max()), best]


def bootstrap_sigmas(model, result, bounds, data, n_boot=500, seed=0):
    """Parametric bootstrap: refit ``n_boot`` synthetic datasets drawn around the fit."""
    x, y, sigma = data
    y = np.asarray(y, dtype=float)
    sigma = np.ones_like(y) if sigma is None else np.asarray(sigma, dtype=float)
    p_hat = result.values
    f_hat = np.asarray(model(x, p_hat), dtype=float)
    rng = np.random.default_rng(seed)
    draws = []
    for _ in range(n_boot):
        y_star = f_hat + sigma * rng.standard_normal(y.size)
        try:
            r = weighted_least_squares(model, p_hat, bounds, (x, y_star, sigma),
                                       names=result.names)
        except FitError:
            continue
        draws.append(r.values)
    if len(draws) < 2:
        raise FitError("bootstrap produced fewer than two successful refits")
    spread = np.std(np.array(draws), axis=0, ddof=1)
    return {k: float(v) for k, v in zip(result.names, spread)}
