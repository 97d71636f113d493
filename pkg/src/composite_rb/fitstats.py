"""Zero-order RB decay fits ``F(L) = A0 p^L + B0`` with a two-pass weighting scheme."""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import least_squares, lsq_linear, minimize_scalar

__all__ = [
    "DEFAULT_SPAM",
    "InsufficientDataError",
    "FitError",
    "LengthAggregate",
    "DecayFit",
    "aggregate",
    "decay_model",
    "fit_decay",
    "fit_report",
]

DEFAULT_SPAM = (0.47, 0.517)
MAX_ITERATIONS = 200
STEP_TOL = 1e-10
P_FLAG_MAX = 1.05
P_START_MIN, P_START_MAX = 1e-3, 1 - 1e-6
PIN_TOL = 1e-9


class InsufficientDataError(ValueError):
    pass


class FitError(RuntimeError):
    """The optimizer did not converge; ``diagnostics`` holds what it reported."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class LengthAggregate:
    L: int
    mean_survival: float
    variance_bound: float
    n_sequences: int
    shots: int = 0


def aggregate(records: Iterable) -> list[LengthAggregate]:
    """Per-length mean survival and an upper-bound variance of that mean.

    The bound adds the spread across sequences (sample variance over the
    number of sequences) to the binomial shot term
    ``mean (1 - mean) / (shots n)``.
    """
    groups: dict[int, list] = defaultdict(list)
    for r in records:
        groups[int(r.L)].append(r)
    out = []
    for L in sorted(groups):
        rs = groups[L]
        n = len(rs)
        if n < 2:
            raise InsufficientDataError(f"length {L} has {n} sequence(s); need at least 2")
        s = np.array(sorted(r.survival for r in rs), dtype=float)
        shots = min(int(r.shots) for r in rs)
        mean = math.fsum(s) / n
        spread = math.fsum((s - mean) ** 2) / (n - 1) / n
        shot_term = max(mean * (1 - mean), 0.0) / (shots * n)
        out.append(LengthAggregate(L, mean, spread + shot_term, n, shots))
    return out


def decay_model(L, A0: float, B0: float, p: float):
    return A0 * np.power(p, np.asarray(L, dtype=float)) + B0


@dataclass
class DecayFit:
    A0: float
    B0: float
    p: float
    covariance: np.ndarray
    lengths: np.ndarray
    means: np.ndarray
    sigmas: np.ndarray
    p_first_pass: float
    iterations: int
    flagged: bool = False
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def avg_error(self) -> float:
        return (1.0 - self.p) / 2.0

    @property
    def stderr_avg_error(self) -> float:
        return math.sqrt(max(self.covariance[2, 2], 0.0)) / 2.0

    @property
    def stderr_p(self) -> float:
        return math.sqrt(max(self.covariance[2, 2], 0.0))

    def predict(self, L):
        return decay_model(L, self.A0, self.B0, self.p)

    @property
    def residuals(self) -> np.ndarray:
        return self.means - self.predict(self.lengths)


def _jacobian_p(L, A0, p):
    L = np.asarray(L, dtype=float)
    pL = np.power(p, L)
    dp = A0 * L * np.power(p, L - 1)
    return np.column_stack([pL, np.ones_like(L), dp])


def _pass_one(L, y, spam):
    A0, B0 = spam
    ratio = min(max((np.mean(y) - B0) / A0, P_START_MIN), P_START_MAX)
    start = min(max(ratio ** (1 / np.mean(L)), P_START_MIN), P_START_MAX)

    def resid(x):
        return decay_model(L, A0, B0, x[0]) - y

    def jac(x):
        return _jacobian_p(L, A0, x[0])[:, 2:]

    sol = least_squares(
        resid, [start], jac=jac, bounds=([0.0], [1.0]),
        xtol=STEP_TOL, ftol=1e-15, gtol=1e-15, max_nfev=MAX_ITERATIONS,
    )  # fmt: skip
    return float(sol.x[0]), sol


def _weights_from(aggs):
    """Variance per length for the weighted pass, and whether it is informative.

    Zero bounds (perfectly flat data at some lengths) borrow the smallest
    positive bound. If every bound is zero the weights are uniform and the
    covariance is later scaled by the residual variance instead.
    """
    v = np.array([a.variance_bound for a in aggs], dtype=float)
    positive = v[v > 0]
    if positive.size:
        return np.where(v > 0, v, positive.min()), True
    return np.ones_like(v), False


def _linear_spam(L, y, sigma, p):
    """Best bounded ``(A0 + B0, B0)`` for a fixed ``p`` and its weighted cost."""
    pL = np.power(p, L)
    M = np.column_stack([pL, 1.0 - pL]) / sigma[:, None]
    sol = lsq_linear(M, y / sigma, bounds=(0.0, 1.0), method="bvls")
    return sol.x, float(np.sum(sol.fun**2))


def _profile_start(L, y, sigma, p_hint):
    """Starting point for the joint fit from a 1-D search over ``p``.

    ``A0`` and ``B0`` enter linearly, so they are solved exactly for each
    trial ``p``; this avoids the long, flat ``A0``-``p`` valley that appears
    when ``A0 (1 - p)`` is the only well-determined combination.
    """
    Lmax = float(np.max(L))
    # u = log(1 - p); from decays far below one part in 1e9 over the longest
    # sequence up to full contrast loss per step
    grid = np.linspace(math.log(1e-12 / Lmax), math.log(1 - P_START_MIN), 121)
    grid = np.append(grid, math.log1p(-p_hint))

    def cost(u):
        return _linear_spam(L, y, sigma, -math.expm1(u))[1]

    costs = [cost(u) for u in grid]
    k = int(np.argmin(costs))
    order = np.sort(grid)
    j = int(np.searchsorted(order, grid[k]))
    lo, hi = order[max(j - 1, 0)], order[min(j + 1, len(order) - 1)]
    best = grid[k]
    if hi > lo:
        res = minimize_scalar(cost, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        if res.fun <= costs[k]:
            best = float(res.x)
    p = -math.expm1(best)
    (F0, B0), _ = _linear_spam(L, y, sigma, p)
    return [F0, B0, p]


def _normal_inverse(Jw):
    """``(Jw^T Jw)^+`` with columns equilibrated first.

    The columns differ by many orders of magnitude near ``p = 1``; a
    pseudo-inverse of the raw normal matrix would cut the weakly determined
    direction and understate its variance.
    """
    norms = np.linalg.norm(Jw, axis=0)
    norms[norms == 0] = 1.0
    C = np.linalg.pinv((Jw / norms).T @ (Jw / norms), hermitian=True) / np.outer(norms, norms)
    return 0.5 * (C + C.T)


def _newton_polish(x, resid, jac, steps=3):
    """A few Gauss-Newton steps from a converged interior point.

    The trust-region stop is on step size; near ``p = 1`` the curvature in
    ``p`` is large enough that a few more ulps still matter for stationarity.
    """
    x = np.asarray(x, dtype=float)
    cost = float(np.sum(resid(x) ** 2))
    for _ in range(steps):
        dx = np.linalg.lstsq(jac(x), -resid(x), rcond=None)[0]
        trial = x + dx
        if np.any(trial < 0.0) or np.any(trial > 1.0):
            break
        c = float(np.sum(resid(trial) ** 2))
        # near the optimum the decrease is below rounding; allow that much
        if not c <= cost * (1 + 1e-12):
            break
        x, cost = trial, c
    return x


def fit_decay(
    aggregates: Sequence[LengthAggregate], spam_init: tuple[float, float] = DEFAULT_SPAM
) -> DecayFit:
    """Two-pass fit of ``A0 p^L + B0``.

    Pass 1 fits ``p`` alone, unweighted, with ``A0, B0`` held at
    ``spam_init``. Pass 2 floats all three parameters with weights
    ``1/variance``, seeded from a profile search over ``p`` that includes
    the pass-1 estimate, in a bounded trust region that keeps ``p``,
    ``B0`` and ``A0 + B0`` inside ``[0, 1]``. The covariance is the inverse
    weighted normal matrix in ``(A0, B0, p)`` at the optimum, so
    ``stderr_avg_error`` is a 1-sigma value.

    When the free fit is pinned at a probability bound or its ``p`` is not
    resolved, the lengths are too short to separate ``A0`` from ``p``. The
    result is then flagged and refitted with ``B0`` held at ``spam_init``;
    the free-fit numbers are kept in ``extra["free_fit"]``.
    """
    aggs = sorted(aggregates, key=lambda a: a.L)
    if len({a.L for a in aggs}) < 4:
        raise InsufficientDataError("need at least 4 distinct lengths to fit 3 parameters")
    L = np.array([a.L for a in aggs], dtype=float)
    y = np.array([a.mean_survival for a in aggs], dtype=float)

    p1, _ = _pass_one(L, y, spam_init)
    var, informative = _weights_from(aggs)
    sigma = np.sqrt(var)

    # x = (A0 + B0, B0, p): survival at L=0 and the asymptote are probabilities
    def resid(x):
        return (decay_model(L, x[0] - x[1], x[1], x[2]) - y) / sigma

    def jac(x):
        J = _jacobian_p(L, x[0] - x[1], x[2])
        return np.column_stack([J[:, 0], J[:, 1] - J[:, 0], J[:, 2]]) / sigma[:, None]

    x0 = _profile_start(L, y, sigma, min(max(p1, P_START_MIN), P_START_MAX))
    sol = least_squares(
        resid, x0, jac=jac, bounds=([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]),
        x_scale="jac", xtol=STEP_TOL, ftol=1e-15, gtol=1e-15, max_nfev=MAX_ITERATIONS,
    )  # fmt: skip
    if sol.status == 0:
        raise FitError(
            f"decay fit did not converge within {MAX_ITERATIONS} evaluations",
            {"x": sol.x.tolist(), "cost": float(sol.cost), "message": sol.message},
        )
    x = _newton_polish(sol.x, resid, jac)
    A0, B0, p = float(x[0] - x[1]), float(x[1]), float(x[2])
    cov = _normal_inverse(_jacobian_p(L, A0, p) / sigma[:, None])
    if not informative:
        cov *= float(np.sum(sol.fun**2)) / (len(L) - 3)

    flagged, message, extra = False, "", {}
    degenerate = False
    if not (0 < p <= P_FLAG_MAX):
        flagged, message = True, f"p={p} outside (0, {P_FLAG_MAX}]"
    elif not np.all(np.isfinite(cov)):
        flagged, message = True, "non-finite covariance"
    elif min(B0, 1.0 - B0, A0 + B0) < PIN_TOL:
        flagged, message = True, "SPAM parameters pinned at a probability bound"
        degenerate = True
    elif math.sqrt(max(cov[2, 2], 0.0)) > 1.0 - p:
        flagged, message = True, "decay not resolved: 1-sigma uncertainty exceeds the estimated error"
        degenerate = True
    if degenerate:
        extra["free_fit"] = {"A0": A0, "B0": B0, "p": p, "covariance": cov.tolist()}
        B0 = float(spam_init[1])
        A0, p, cov = _fixed_asymptote_fit(L, y, sigma, B0, p, informative)
        message += f"; estimate holds B0 at {B0} (free fit in extra)"
    return DecayFit(
        A0=A0, B0=B0, p=p, covariance=cov, lengths=L, means=y, sigmas=sigma,
        p_first_pass=p1, iterations=int(sol.nfev), flagged=flagged, message=message, extra=extra,
    )  # fmt: skip


def _fixed_asymptote_fit(L, y, sigma, B0, p_hint, informative):
    """Weighted fit of ``(A0, p)`` with ``B0`` held fixed.

    Used when the free fit cannot separate ``A0`` from ``p`` (lengths too
    short for the decay to show curvature): with the asymptote fixed the
    intercept sets ``A0`` and the slope sets ``p``. The returned covariance
    has zero row and column for ``B0``.
    """
    top = max(1.0 - B0, 0.0)

    def resid(x):
        return (decay_model(L, x[0], B0, x[1]) - y) / sigma

    def jac(x):
        return _jacobian_p(L, x[0], x[1])[:, [0, 2]] / sigma[:, None]

    A_start = min(max(float(y[0]) - B0, 0.0), top)
    sol = least_squares(
        resid, [A_start, min(max(p_hint, 0.0), 1.0)], jac=jac, bounds=([0.0, 0.0], [top, 1.0]),
        x_scale="jac", xtol=STEP_TOL, ftol=1e-15, gtol=1e-15, max_nfev=MAX_ITERATIONS,
    )  # fmt: skip
    if sol.status == 0:
        raise FitError(
            f"fixed-asymptote fit did not converge within {MAX_ITERATIONS} evaluations",
            {"x": sol.x.tolist(), "cost": float(sol.cost), "message": sol.message},
        )
    A0, p = (float(v) for v in sol.x)
    sub = _normal_inverse(jac(sol.x))
    if not informative and len(L) > 2:
        sub *= float(np.sum(sol.fun**2)) / (len(L) - 2)
    cov = np.zeros((3, 3))
    cov[np.ix_([0, 2], [0, 2])] = 0.5 * (sub + sub.T)
    return A0, p, cov


def fit_report(fit: DecayFit, version: str = "") -> dict:
    """JSON-ready summary of a fit; uncertainties are 1-sigma."""
    return {
        "model": "A0 * p**L + B0",
        "A0": fit.A0,
        "B0": fit.B0,
        "p": fit.p,
        "avg_error": fit.avg_error,
        "stderr": fit.stderr_avg_error,
        "stderr_convention": "1-sigma from the weighted-fit covariance",
        "covariance": fit.covariance.tolist(),
        "covariance_order": ["A0", "B0", "p"],
        "p_first_pass": fit.p_first_pass,
        "flagged": fit.flagged,
        "message": fit.message,
        **({"free_fit": fit.extra["free_fit"]} if "free_fit" in fit.extra else {}),
        "residuals": [
            {"L": int(L), "mean": m, "fit": f, "residual": m - f, "sigma": s}
            for L, m, f, s in zip(fit.lengths, fit.means, fit.predict(fit.lengths), fit.sigmas)
        ],
        "version": version,
    }


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=True) + "\n"
