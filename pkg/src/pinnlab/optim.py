"""Minimizers over flat parameter vectors: SGD, ADAM and L-BFGS."""

import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "NumericError",
    "LineSearchWarning",
    "sgd_step",
    "AdamState",
    "adam_step",
    "LbfgsState",
    "lbfgs_direction",
    "LineSearchResult",
    "line_search",
    "bfgs_inverse_update",
    "SKIP",
]


class NumericError(ArithmeticError):
    """Non-finite value where a finite one is required."""


class LineSearchWarning(RuntimeWarning):
    pass


def _check_finite(g, what="gradient"):
    g = np.asarray(g, dtype=float)
    bad = np.flatnonzero(~np.isfinite(g))
    if bad.size:
        raise NumericError(f"non-finite {what} component at index {int(bad[0])}")
    return g


def sgd_step(params, grad_fn, batch, gamma):
    """theta <- theta - gamma * mean over the batch of grad_fn(theta, point)."""
    if not gamma > 0:
        raise ValueError("learning rate gamma must be positive")
    batch = list(batch)
    if not batch:
        raise ValueError("batch must be nonempty")
    params = np.asarray(params, dtype=float)
    g = np.zeros_like(params)
    for point in batch:  # fixed-order reduction
        g = g + np.asarray(grad_fn(params, point), dtype=float)
    return params - gamma * (g / len(batch))


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    delta: float = 1e-8

    @classmethod
    def zeros(cls, n, **kw):
        return cls(np.zeros(n), np.zeros(n), **kw)

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


def adam_step(state, params, grad):
    """One ADAM update; returns (new params, new state)."""
    params = np.asarray(params, dtype=float)
    g = _check_finite(grad)
    if g.shape != params.shape or state.m.shape != params.shape:
        raise ValueError("parameter, gradient and moment lengths differ")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new = params - state.alpha * m_hat / (np.sqrt(v_hat) + state.delta)
    st = AdamState(m, v, t, state.alpha, state.beta1, state.beta2, state.delta)
    return new, st


@dataclass
class LbfgsState:
    """Ring buffer of curvature pairs.

    A pair is kept only if y.s > rel_tol * |y| |s|, which bounds the
    angle between s and y away from 90 degrees.
    """

    m: int = 50
    c1: float = 1e-4
    c2: float = 0.9
    rel_tol: float = 1e-10
    history: deque = field(default=None)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("history size m must be at least 1")
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("line-search constants need 0 < c1 < c2 < 1")
        if self.history is None:
            self.history = deque(maxlen=self.m)

    def add_pair(self, s, y):
        """Store (s, y); returns False when the safeguard rejects it."""
        s = np.asarray(s, dtype=float)
        y = np.asarray(y, dtype=float)
        ys = float(y @ s)
        if not np.isfinite(ys) or ys <= self.rel_tol * np.linalg.norm(y) * np.linalg.norm(s):
            return False
        self.history.append((s, y, 1.0 / ys))
        return True

    def __len__(self):
        return len(self.history)


def lbfgs_direction(state, grad):
    """Two-loop recursion; H0 = (s.y / y.y) I from the newest pair."""
    q = _check_finite(grad).copy()
    if not state.history:
        return -q
    alphas = []
    for s, y, rho in reversed(state.history):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    s, y, rho = state.history[-1]
    q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(state.history, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


class LineSearchResult(NamedTuple):
    alpha: float
    value: float
    grad: np.ndarray
    evals: int
    converged: bool
    message: str


def line_search(loss_fn, params, p, c1=1e-4, c2=0.9, f0=None, g0=None, max_halvings=50, max_zoom=30):
    """Armijo backtracking from alpha = 1 followed by a strong-Wolfe zoom.

    ``loss_fn(theta)`` returns ``(value, gradient)``.  Backtracking halves
    alpha until sufficient decrease holds.  If the curvature condition then
    fails and a bracket is known (a larger trial that failed Armijo), the
    bracket is refined by bisection-safeguarded cubic interpolation.  When
    alpha = 1 already satisfies Armijo there is no upper bracket and it is
    accepted as is.
    """
    if not 0 < c1 < c2 < 1:
        raise ValueError("line-search constants need 0 < c1 < c2 < 1")
    params = np.asarray(params, dtype=float)
    p = np.asarray(p, dtype=float)
    evals = 0
    if f0 is None or g0 is None:
        f0, g0 = loss_fn(params)
        evals += 1
    d0 = float(np.dot(g0, p))
    if not d0 < 0:
        raise ValueError(f"p is not a descent direction (p.grad = {d0:.3g})")

    def phi(a):
        f, g = loss_fn(params + a * p)
        return float(f), np.asarray(g, dtype=float), float(np.dot(g, p))

    def armijo(a, f):
        return np.isfinite(f) and f <= f0 + c1 * a * d0

    def wolfe(d):
        return abs(d) <= c2 * abs(d0)

    a, hi = 1.0, None
    for _ in range(max_halvings + 1):
        f, g, d = phi(a)
        evals += 1
        if armijo(a, f):
            break
        hi = (a, f, d)
        a *= 0.5
    else:
        warnings.warn("line search: halvings exhausted", LineSearchWarning, stacklevel=2)
        return LineSearchResult(a * 2.0, f, g, evals, False, "halvings exhausted")

    if wolfe(d) or hi is None:
        return LineSearchResult(a, f, g, evals, wolfe(d), "ok" if wolfe(d) else "armijo only")
    if d > 0 or not np.isfinite(hi[1]):
        # minimizer lies between 0 and a; zoom there with a as the upper end
        lo, up = (0.0, f0, d0), (a, f, d)
        if d <= 0:
            lo, up = (a, f, d), hi
    else:
        lo, up = (a, f, d), hi
    best = (a, f, g, d)
    for _ in range(max_zoom):
        aj = _interpolate(lo, up)
        fj, gj, dj = phi(aj)
        evals += 1
        if not armijo(aj, fj) or fj >= lo[1]:
            up = (aj, fj, dj)
        else:
            best = (aj, fj, gj, dj)
            if wolfe(dj):
                return LineSearchResult(aj, fj, gj, evals, True, "ok")
            if dj * (up[0] - lo[0]) >= 0:
                up = lo
            lo = (aj, fj, dj)
        if abs(up[0] - lo[0]) < 1e-12 * max(1.0, abs(lo[0])):
            break
    a, f, g, d = best
    if not armijo(a, f):
        return LineSearchResult(a, f, g, evals, False, "zoom failed")
    return LineSearchResult(a, f, g, evals, wolfe(d), "ok" if wolfe(d) else "armijo only")


def _interpolate(lo, up):
    """Cubic minimizer through two (alpha, f, f') triples, kept inside the bracket."""
    a0, f0, d0 = lo
    a1, f1, d1 = up
    left, right = min(a0, a1), max(a0, a1)
    width = right - left
    a = 0.5 * (a0 + a1)
    if np.isfinite(f1) and np.isfinite(d1):
        e = d0 + d1 - 3.0 * (f0 - f1) / (a0 - a1)
        disc = e * e - d0 * d1
        if disc >= 0:
            root = np.sign(a1 - a0) * np.sqrt(disc)
            cand = a1 - (a1 - a0) * (d1 + root - e) / (d1 - d0 + 2.0 * root)
            if np.isfinite(cand) and left + 0.1 * width <= cand <= right - 0.1 * width:
                a = cand
    return float(a)


SKIP = None


def bfgs_inverse_update(Hinv, s, y):
    """(I - rho s y^T) H (I - rho y s^T) + rho s s^T; returns SKIP if y.s <= 0."""
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    ys = float(y @ s)
    if not ys > 0:
        return SKIP
    rho = 1.0 / ys
    n = s.size
    V = np.eye(n) - rho * np.outer(s, y)
    return V @ Hinv @ V.T + rho * np.outer(s, s)
