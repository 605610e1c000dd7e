"""Small optimization helpers: golden-section search, Richardson limits and
batched projected gradient descent."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10,
                   max_iter: int = 500) -> tuple[float, float, tuple[float, float]]:
    """Minimize a unimodal ``f`` on ``[lo, hi]``.

    Returns ``(x, f(x), (a, b))`` with the final bracket ``b - a <= tol``
    (or after ``max_iter`` shrinks).  The endpoints are compared too, so a
    boundary minimum is returned exactly.
    """
    a, b = float(lo), float(hi)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    best = min(((fc, c), (fd, d), (f(lo), float(lo)), (f(hi), float(hi))))
    return best[1], best[0], (a, b)


def coordinate_golden(f: Callable[[np.ndarray], float], x0: np.ndarray, lo: np.ndarray,
                      hi: np.ndarray, step: np.ndarray, tol: float = 1e-9,
                      sweeps: int = 50) -> tuple[np.ndarray, float]:
    """Coordinate-wise golden-section refinement inside a shrinking box around ``x0``.

    Each sweep line-searches every coordinate within ``+-step`` (clipped to
    ``[lo, hi]``); the step halves after each sweep.
    """
    x = np.array(x0, dtype=float)
    fx = f(x)
    step = np.array(step, dtype=float)
    for _ in range(sweeps):
        for i in range(len(x)):
            a = max(lo[i], x[i] - step[i])
            b = min(hi[i], x[i] + step[i])

            def line(v, i=i):
                y = x.copy()
                y[i] = v
                return f(y)

            v, fv, _ = golden_section(line, a, b, tol=tol)
            if fv < fx:
                x[i], fx = v, fv
        step = step / 2.0
        if np.all(step < tol):
            break
    return x, fx


# weights cancelling the O(h) and O(h^2) terms of g(h), g(2h), g(4h)
RICHARDSON_WEIGHTS = (8.0 / 3.0, -2.0, 1.0 / 3.0)


def richardson_limit(values) -> tuple[float, float]:
    """Limit of ``g(h) = L + c1 h + c2 h^2 + ...`` from ``g(h), g(2h), g(4h)``.

    With a fourth value ``g(8h)`` the error estimate is the difference to
    the same extrapolation one level coarser (``|R(h) - R(2h)|``, about
    7x the leading error); otherwise the difference to the first-order
    extrapolation ``2 g(h) - g(2h)`` is used.
    """
    vals = [float(v) for v in values]
    w = np.array(RICHARDSON_WEIGHTS)
    limit = float(w @ vals[:3])
    if len(vals) >= 4:
        coarse = float(w @ vals[1:4])
        return limit, abs(limit - coarse)
    return limit, abs(limit - (2.0 * vals[0] - vals[1]))


@dataclass
class DescentResult:
    x: np.ndarray          # (n, k) final points
    value: np.ndarray      # (n,)
    iterations: np.ndarray # (n,)
    converged: np.ndarray  # (n,) bool


def projected_descent(fun: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
                      project: Callable[[np.ndarray], np.ndarray], x0: np.ndarray,
                      gtol: float = 1e-10, xtol: float = 1e-14, max_iter: int = 10000,
                      armijo: float = 1e-4, shrink: float = 0.5,
                      max_backtracks: int = 60) -> DescentResult:
    """Batched projected gradient descent with Armijo backtracking.

    ``fun(x)`` maps ``(n, k)`` points to values ``(n,)`` and gradients
    ``(n, k)``.  Trial steps start from the Barzilai-Borwein length and are
    halved until ``f(P(x - a g)) <= f(x) + armijo * g.(P(x - a g) - x)``.
    A point stops when its projected-gradient step ``|P(x - g) - x|`` falls
    below ``gtol`` or its accepted move falls below ``xtol``.
    """
    x = project(np.atleast_2d(np.asarray(x0, dtype=float)))
    n = len(x)
    val, grad = fun(x)
    alpha = np.ones(n)
    iters = np.zeros(n, dtype=int)
    done = np.zeros(n, dtype=bool)
    converged = np.zeros(n, dtype=bool)

    def pg_norm(xs, gs):
        return np.linalg.norm(project(xs - gs) - xs, axis=1)

    stat = pg_norm(x, grad)
    converged |= stat < gtol
    done |= converged
    for _ in range(max_iter):
        active = np.flatnonzero(~done)
        if len(active) == 0:
            break
        xa, ga, va = x[active], grad[active], val[active]
        step = alpha[active].copy()
        accepted = np.zeros(len(active), dtype=bool)
        new_x = xa.copy()
        new_v = va.copy()
        new_g = ga.copy()
        pending = np.arange(len(active))
        for _ in range(max_backtracks):
            if len(pending) == 0:
                break
            trial = project(xa[pending] - step[pending, None] * ga[pending])
            tv, tg = fun(trial)
            dec = np.sum(ga[pending] * (trial - xa[pending]), axis=1)
            ok = tv <= va[pending] + armijo * dec
            idx = pending[ok]
            new_x[idx], new_v[idx], new_g[idx] = trial[ok], tv[ok], tg[ok]
            accepted[idx] = True
            step[pending[~ok]] *= shrink
            pending = pending[~ok]
        moved = np.linalg.norm(new_x - xa, axis=1)
        # Barzilai-Borwein step for the next iteration
        s = new_x - xa
        yv = new_g - ga
        sy = np.sum(s * yv, axis=1)
        ss = np.sum(s * s, axis=1)
        bb = np.where(sy > 0, ss / np.where(sy > 0, sy, 1.0), step * 2.0)
        alpha[active] = np.clip(bb, 1e-12, 1e6)
        x[active], val[active], grad[active] = new_x, new_v, new_g
        iters[active] += 1
        stat = pg_norm(new_x, new_g)
        conv = stat < gtol
        stalled = (~accepted) | (moved < xtol)
        converged[active] |= conv
        done[active] |= conv | stalled
    return DescentResult(x, val, iters, converged)
