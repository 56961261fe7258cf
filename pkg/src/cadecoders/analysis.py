"""Fits of the logical error rate ansatz and the derived qubit-count planner.

The single-noise ansatz is ``eps_L = A * n * (B * eps) ** gamma_n`` with one
exponent per system size. In log space it is bilinear, so it is solved by
alternating two weighted linear least-squares problems. The two-noise ansatz
``eps_L = A_n * (eps_d + eps_m / m) ** gamma_n`` reuses the exponents and fits
the per-size prefactor and a shared measurement weight ``m``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.optimize import minimize_scalar

Z95 = 1.959963984540054


class FitError(ValueError):
    """Not enough usable points to determine the parameters."""


class AboveThreshold(ValueError):
    """The physical error rate is at or above the fitted threshold scale."""


class UnreachableTarget(ValueError):
    """No system size up to the search limit reaches the target."""


@dataclass(frozen=True)
class FitPoint:
    n: int
    eps: float
    eps_L: float
    ci_low: float
    ci_high: float
    censored: bool = False

    @property
    def log_sigma(self) -> float:
        """Standard deviation of ``ln eps_L`` implied by the 95% interval."""
        return (math.log(self.ci_high) - math.log(self.ci_low)) / (2 * Z95)

    def usable(self) -> bool:
        if self.censored or self.eps_L <= 0 or self.ci_low <= 0 or self.ci_high <= self.ci_low:
            return False
        return math.log10(self.ci_high / self.ci_low) < 1.0


def as_points(points: Iterable) -> list[FitPoint]:
    """Accept :class:`FitPoint`, dicts with the same keys, or ``(n, eps, eps_L, ci_low, ci_high)`` tuples."""
    out = []
    for p in points:
        if isinstance(p, FitPoint):
            out.append(p)
        elif isinstance(p, Mapping):
            out.append(FitPoint(int(p["n"]), float(p["eps"]), float(p["eps_L"]), float(p["ci_low"]),
                                float(p["ci_high"]), bool(p.get("censored", False))))
        else:
            n, eps, el, lo, hi = p[:5]
            out.append(FitPoint(int(n), float(eps), float(el), float(lo), float(hi)))
    return out


@dataclass
class FitResult:
    A: float
    B: float
    gamma: dict
    gamma_se: dict
    B_inv: float
    B_inv_se: float
    residuals: np.ndarray
    covariance: np.ndarray  # over (ln A, ln B, gamma_n for n in sorted order)
    chi2: float
    dof: int
    iterations: int
    converged: bool
    points: list = field(default_factory=list)
    excluded: list = field(default_factory=list)

    @property
    def sizes(self) -> list[int]:
        return sorted(self.gamma)

    def predict(self, n: int, eps) -> np.ndarray:
        return self.A * n * (self.B * np.asarray(eps, dtype=float)) ** self.gamma[n]

    def gamma_monotone(self) -> bool:
        g = [self.gamma[n] for n in self.sizes]
        return all(b >= a for a, b in zip(g, g[1:]))

    def as_dict(self) -> dict:
        return {
            "A": self.A, "B": self.B, "B_inv": self.B_inv, "B_inv_se": self.B_inv_se,
            "gamma": {str(k): v for k, v in self.gamma.items()},
            "gamma_se": {str(k): v for k, v in self.gamma_se.items()},
            "chi2": self.chi2, "dof": self.dof, "iterations": self.iterations, "converged": self.converged,
        }


def mwpm_gamma(n: int) -> float:
    """Effective distance of minimum-weight matching on the repetition code."""
    return (n + 1) / 2


def fit_ansatz(points: Iterable, tol: float = 1e-8, max_iter: int = 100_000) -> FitResult:
    """Weighted least-squares fit of ``ln eps_L = ln A + ln n + gamma_n (ln eps + ln B)``.

    Points whose 95% interval spans a decade or more, censored points and
    zero estimates are excluded. Weights are the inverse variances of
    ``ln eps_L`` read off the intervals. The two linear sub-problems, over
    ``(ln A, ln B)`` and over the exponents, are solved in turn; an update that
    increases the residual is halved.
    """
    pts = as_points(points)
    used = [p for p in pts if p.usable()]
    excluded = [p for p in pts if not p.usable()]
    sizes = sorted({p.n for p in used})
    if len(sizes) < 2:
        raise FitError("need usable points at two or more system sizes")
    for n in sizes:
        if len({p.eps for p in used if p.n == n}) < 2:
            raise FitError(f"need two or more distinct eps at n = {n}")
    idx = np.array([sizes.index(p.n) for p in used])
    y = np.array([math.log(p.eps_L) for p in used]) - np.log([p.n for p in used])
    le = np.log([p.eps for p in used])
    w = 1.0 / np.array([p.log_sigma for p in used]) ** 2
    K = len(sizes)

    def resid(a, b, g):
        return y - a - g[idx] * (le + b)

    def cost(a, b, g):
        r = resid(a, b, g)
        return float(np.sum(w * r * r))

    # start: slopes per size from a plain regression, common B from the first solve
    g = np.empty(K)
    for k in range(K):
        m = idx == k
        g[k] = np.polyfit(le[m], y[m], 1, w=np.sqrt(w[m]))[0]
    g = np.maximum(g, 1e-3)
    a, b = _solve_ab(y, le, w, g[idx])
    c = cost(a, b, g)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g_new = _solve_gamma(y - a, le + b, w, idx, K)
        a_new, b_new = _solve_ab(y, le, w, g_new[idx])
        c_new = cost(a_new, b_new, g_new)
        step = 1.0
        while c_new > c * (1 + 1e-12) and step > 1e-6:
            step *= 0.5
            g_try = g + step * (g_new - g)
            a_try, b_try = a + step * (a_new - a), b + step * (b_new - b)
            c_new = cost(a_try, b_try, g_try)
            g_new, a_new, b_new = g_try, a_try, b_try
        old = np.concatenate([[a, b], g])
        new = np.concatenate([[a_new, b_new], g_new])
        a, b, g, c = a_new, b_new, g_new, c_new
        if np.max(np.abs(new - old) / np.maximum(np.abs(new), 1e-12)) < tol:
            converged = True
            break
    r = resid(a, b, g)
    J = np.zeros((len(y), 2 + K))
    J[:, 0] = 1.0
    J[:, 1] = g[idx]
    J[np.arange(len(y)), 2 + idx] = le + b
    dof = len(y) - (2 + K)
    chi2 = float(np.sum(w * r * r))
    H = J.T @ (w[:, None] * J)
    cov = np.linalg.pinv(H) * (max(1.0, chi2 / dof) if dof > 0 else 1.0)
    se = np.sqrt(np.maximum(np.diag(cov), 0))
    gamma = {n: float(g[k]) for k, n in enumerate(sizes)}
    gamma_se = {n: float(se[2 + k]) for k, n in enumerate(sizes)}
    B = math.exp(b)
    return FitResult(math.exp(a), B, gamma, gamma_se, 1.0 / B, se[1] / B, r, cov, chi2, dof, it, converged,
                     used, excluded)


def _solve_ab(y, le, w, gi):
    # y - gi*le = a + gi*b
    X = np.column_stack([np.ones_like(gi), gi])
    rhs = y - gi * le
    sw = np.sqrt(w)
    sol, *_ = np.linalg.lstsq(X * sw[:, None], rhs * sw, rcond=None)
    return float(sol[0]), float(sol[1])


def _solve_gamma(ya, x, w, idx, K):
    num = np.bincount(idx, weights=w * x * ya, minlength=K)
    den = np.bincount(idx, weights=w * x * x, minlength=K)
    return num / den


def synthetic_points(A: float, B_inv: float, gamma: Mapping[int, float], eps_values, rel_ci: float = 0.1) -> list[FitPoint]:
    """Points lying exactly on the ansatz, with a symmetric relative interval in log space."""
    out = []
    for n, g in gamma.items():
        for e in eps_values:
            v = A * n * (e / B_inv) ** g
            out.append(FitPoint(n, e, v, v * math.exp(-rel_ci), v * math.exp(rel_ci)))
    return out


# -- two noise parameters ------------------------------------------------------------


@dataclass
class TwoNoiseFit:
    A: dict  # n -> A_n
    m_scale: float
    gamma: dict
    residual: float

    def predict(self, n: int, eps_d, eps_m) -> np.ndarray:
        eff = np.asarray(eps_d, dtype=float) + (np.asarray(eps_m, dtype=float) / self.m_scale if math.isfinite(self.m_scale) else 0.0)
        return self.A[n] * eff ** self.gamma[n]

    def contour(self, n: int, level: float, eps_d) -> np.ndarray:
        """``eps_m`` along the iso-``eps_L`` line at ``level`` (``nan`` where none exists)."""
        eps_d = np.asarray(eps_d, dtype=float)
        total = (level / self.A[n]) ** (1.0 / self.gamma[n])
        em = self.m_scale * (total - eps_d)
        return np.where(em >= 0, em, np.nan)


def fit_two_noise(points: Iterable, gamma, m_bounds: tuple[float, float] = (1e-3, 1e3)) -> TwoNoiseFit:
    """Fit ``A_n`` and the measurement weight ``m`` with the exponents held fixed.

    ``points`` are ``(n, eps_d, eps_m, eps_L[, sigma_log])`` tuples or dicts;
    ``gamma`` maps ``n`` to ``gamma_n`` (a :class:`FitResult` works too). For a
    fixed ``m`` the best ``ln A_n`` is a weighted mean, so only ``ln m`` is
    searched numerically. Without any ``eps_m > 0`` the weight is undefined and
    returned as ``nan``.
    """
    if isinstance(gamma, FitResult):
        gamma = gamma.gamma
    rows = []
    for p in points:
        if isinstance(p, Mapping):
            rows.append((int(p["n"]), float(p["eps_d"]), float(p["eps_m"]), float(p["eps_L"]), float(p.get("sigma_log", 1.0))))
        else:
            p = tuple(p)
            rows.append((int(p[0]), float(p[1]), float(p[2]), float(p[3]), float(p[4]) if len(p) > 4 else 1.0))
    rows = [r for r in rows if r[3] > 0]
    if not rows:
        raise FitError("no usable points")
    missing = {r[0] for r in rows} - set(gamma)
    if missing:
        raise FitError(f"no exponent supplied for n in {sorted(missing)}")
    n = np.array([r[0] for r in rows])
    ed = np.array([r[1] for r in rows])
    em = np.array([r[2] for r in rows])
    ly = np.log([r[3] for r in rows])
    w = 1.0 / np.array([r[4] for r in rows]) ** 2
    g = np.array([gamma[k] for k in n])
    sizes = sorted(set(n.tolist()))

    def solve(m):
        eff = ed + (em / m if math.isfinite(m) else 0.0)
        if np.any(eff <= 0):
            return math.inf, {}
        z = ly - g * np.log(eff)
        A = {}
        res = 0.0
        for k in sizes:
            s = n == k
            la = float(np.sum(w[s] * z[s]) / np.sum(w[s]))
            A[k] = math.exp(la)
            res += float(np.sum(w[s] * (z[s] - la) ** 2))
        return res, A

    if not np.any(em > 0):
        res, A = solve(math.inf)
        return TwoNoiseFit(A, math.nan, {k: gamma[k] for k in sizes}, res)
    opt = minimize_scalar(lambda lm: solve(math.exp(lm))[0], bounds=tuple(map(math.log, m_bounds)),
                          method="bounded", options={"xatol": 1e-10})
    m = math.exp(opt.x)
    res, A = solve(m)
    return TwoNoiseFit(A, m, {k: gamma[k] for k in sizes}, res)


# -- qubit planner ------------------------------------------------------------------


@dataclass(frozen=True)
class QubitEstimate:
    n: int
    gamma: float
    predicted: float
    extrapolated: bool


def gamma_at(fit: FitResult, n: float) -> tuple[float, bool]:
    """Exponent at any size: monotone piecewise-linear inside the fitted range, linear continuation beyond it.

    The fitted values are first made non-decreasing (running maximum). Beyond the
    largest fitted size the last segment's slope is continued; it is clipped
    at zero so the continuation never decreases.
    """
    ns = np.array(fit.sizes, dtype=float)
    gs = np.maximum.accumulate(np.array([fit.gamma[k] for k in fit.sizes]))
    if ns[0] <= n <= ns[-1]:
        return float(np.interp(n, ns, gs)), False
    if n > ns[-1]:
        slope = max(0.0, (gs[-1] - gs[-2]) / (ns[-1] - ns[-2]))
        return float(gs[-1] + slope * (n - ns[-1])), True
    slope = max(0.0, (gs[1] - gs[0]) / (ns[1] - ns[0]))
    return float(max(gs[0] - slope * (ns[0] - n), 1e-9)), True


def required_qubits(target_eps_L: float, eps: float, fit: FitResult, n_max: int = 1_000_000) -> QubitEstimate:
    """Smallest ``n`` (not below the smallest fitted size) with ``A n (B eps)^gamma_n <= target``."""
    if not target_eps_L > 0:
        raise ValueError("target must be positive")
    base = fit.B * eps
    if base >= 1.0:
        raise AboveThreshold(f"eps = {eps} is above threshold (1/B = {fit.B_inv:.4g})")
    n0 = fit.sizes[0]
    lb = math.log(base)

    def pred(n):
        g, ext = gamma_at(fit, n)
        return fit.A * n * math.exp(g * lb), g, ext

    tgt = target_eps_L * (1 + 1e-12)
    n = n0
    step = 1
    # exponential search for an upper bracket, then scan back linearly in blocks
    while n <= n_max:
        v, g, ext = pred(n)
        if v <= tgt:
            lo = max(n0, n - step)
            for k in range(lo, n + 1):
                vk, gk, ek = pred(k)
                if vk <= tgt:
                    return QubitEstimate(k, gk, vk, ek)
        step = max(1, step * 2) if n > fit.sizes[-1] else 1
        n += step
    raise UnreachableTarget(f"no n <= {n_max} reaches eps_L <= {target_eps_L} at eps = {eps}")


# -- stack survival --------------------------------------------------------------------


@dataclass(frozen=True)
class SurvivalFit:
    slope: float
    intercept: float
    r2: float
    m: np.ndarray
    monotone: bool


def survival_log_fit(m, survival, min_m: int = 1) -> SurvivalFit:
    """Least-squares line through ``ln S(m)`` over the observed range ``m >= min_m`` with ``S(m) > 0``.

    ``monotone`` reports whether ``S`` is strictly decreasing over that range.
    """
    m = np.asarray(m, dtype=float)
    s = np.asarray(survival, dtype=float)
    keep = (m >= min_m) & (s > 0)
    if keep.sum() < 3:
        raise FitError("need at least three observed stack heights")
    x, y = m[keep], np.log(s[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / tot if tot > 0 else 1.0
    return SurvivalFit(float(slope), float(intercept), r2, x.astype(int), bool(np.all(np.diff(y) < 0)))
