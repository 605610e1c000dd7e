"""Batched lattice sums over Gram matrices.

These kernels take a stack of Gram matrices ``(n, d, d)`` and return lattice
sums (and optionally their gradient with respect to the Gram entries, as a
full symmetric matrix ``dS/dA_ij``).  They are the fast path behind energies,
family sweeps and threshold grids.

Epstein zeta values use the theta splitting

    pi^{-s/2} Gamma(s/2) zeta_A(s)
        = sum_{m != 0} int_tau^inf  t^{s/2-1} exp(-pi t Q(m)) dt
        + V^{-1} sum_{k != 0} int_{1/tau}^inf u^{(d-s)/2-1} exp(-pi u Q*(k)) du
        + V^{-1} tau^{(s-d)/2} 2/(s-d) - tau^{s/2} 2/s

(``Q*`` the dual form ``A^{-1}``, ``V = sqrt(det A)``), which holds for every
``tau > 0``; we take ``tau = V^{-2/d}`` so both sums decay like
``exp(-pi x)`` in covolume-normalised squared length ``x``.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import special

from .lattice import box_points

# normalised squared-length cutoff; terms beyond it are below ~1e-17
DEFAULT_CUTOFF = 13.0


def upper_gamma(a: float, x) -> np.ndarray:
    """Non-regularised upper incomplete gamma ``Gamma(a, x)`` for real ``a``, x > 0."""
    x = np.asarray(x, dtype=float)
    if a > 0 and float(a).is_integer():
        n = int(a)
        term = np.ones_like(x)
        acc = np.ones_like(x)
        for k in range(1, n):
            term = term * x / k
            acc = acc + term
        return math.factorial(n - 1) * np.exp(-x) * acc
    if a > 0 and float(2 * a).is_integer():
        g = math.sqrt(math.pi) * special.erfc(np.sqrt(x))
        cur = 0.5
        while cur < a:
            g = cur * g + x**cur * np.exp(-x)
            cur += 1.0
        return g
    if a > 0:
        return special.gammaincc(a, x) * special.gamma(a)
    steps = math.ceil(-a)
    a0 = a + steps
    if a0 == 0:
        g = special.exp1(x)
    elif float(2 * a0).is_integer():
        g = math.sqrt(math.pi) * special.erfc(np.sqrt(x))
    else:
        g = special.gammaincc(a0, x) * special.gamma(a0)
    cur = a0
    for _ in range(steps):
        cur -= 1.0
        if cur == 0:
            g = special.exp1(x)
            continue
        g = (g - x**cur * np.exp(-x)) / cur
    return g


@lru_cache(maxsize=64)
def half_box(bounds: tuple) -> np.ndarray:
    """Nonzero box points with first nonzero coordinate positive (one of each +-pair)."""
    pts = box_points(bounds)
    nz = pts != 0
    first = np.argmax(nz, axis=1)
    lead = pts[np.arange(len(pts)), first]
    pts = pts[np.any(nz, axis=1) & (lead > 0)]
    pts.setflags(write=False)
    return pts


def _as_stack(grams) -> np.ndarray:
    grams = np.asarray(grams, dtype=float)
    if grams.ndim == 2:
        grams = grams[None]
    return grams


def _box_bounds(grams_inv, scale):
    # |m_i| <= sqrt(X * (A^{-1})_ii) covers the ellipsoid m^T A m <= X
    diag = np.diagonal(grams_inv, axis1=1, axis2=2) * scale[:, None]
    return tuple(int(k) for k in np.floor(np.sqrt(np.max(diag, axis=0)) + 1e-9))


def zeta_gram(grams, s_values, cutoff: float = DEFAULT_CUTOFF, grad: bool = False):
    """Epstein zeta ``sum_{m != 0} Q(m)^{-s/2}`` for each Gram matrix and exponent.

    Returns ``values`` of shape ``(n, k)`` for ``k = len(s_values)``, and with
    ``grad=True`` also ``(n, k, d, d)`` gradients with respect to Gram entries.
    Requires ``s > d``.
    """
    grams = _as_stack(grams)
    s_values = [float(s) for s in np.atleast_1d(s_values)]
    n, d, _ = grams.shape
    for s in s_values:
        if not s > d:
            raise ValueError(f"zeta requires s > d (s={s}, d={d})")
    inv = np.linalg.inv(grams)
    vol = np.sqrt(np.linalg.det(grams))
    tau = vol ** (-2.0 / d)

    m = half_box(_box_bounds(inv, cutoff / tau)).astype(float)
    q = np.einsum("ni,kij,nj->kn", m, grams, m)
    mask = (tau[:, None] * q) <= cutoff
    qs = np.where(mask, q, 1.0)

    k = half_box(_box_bounds(grams, cutoff * tau)).astype(float)
    qd = np.einsum("ni,kij,nj->kn", k, inv, k)
    mask_d = (qd / tau[:, None]) <= cutoff
    qds = np.where(mask_d, qd, 1.0)

    values = np.empty((n, len(s_values)))
    grads = np.empty((n, len(s_values), d, d)) if grad else None
    if grad:
        mm = np.einsum("ni,nj->nij", m, m)
        kk = np.einsum("ni,nj->nij", k, k)
    for j, s in enumerate(s_values):
        a = s / 2.0
        b = (d - s) / 2.0
        x = math.pi * tau[:, None] * qs
        y = math.pi * qds / tau[:, None]
        direct = np.where(mask, (math.pi * qs) ** (-a) * upper_gamma(a, x), 0.0)
        dual = np.where(mask_d, (math.pi * qds) ** (-b) * upper_gamma(b, y), 0.0)
        dsum = 2.0 * direct.sum(axis=1)
        wsum = 2.0 * dual.sum(axis=1)
        const_v = tau ** ((s - d) / 2) * 2.0 / (s - d) / vol
        total = dsum + wsum / vol + const_v - tau**a * 2.0 / s
        pref = math.pi**a / math.gamma(a)
        values[:, j] = pref * total
        if grad:
            hprime = np.where(mask, -math.pi * (math.pi * qs) ** (-(a + 1)) * upper_gamma(a + 1, x), 0.0)
            kprime = np.where(mask_d, -math.pi * (math.pi * qds) ** (-(b + 1)) * upper_gamma(b + 1, y), 0.0)
            g_direct = 2.0 * np.einsum("kn,nij->kij", hprime, mm)
            g_dualk = 2.0 * np.einsum("kn,nij->kij", kprime, kk)
            # dQ*/dA = -(A^{-1} k)(A^{-1} k)^T
            g_dual = -np.einsum("kia,kab,kbj->kij", inv, g_dualk, inv) / vol[:, None, None]
            g_vol = -0.5 * inv * ((wsum / vol + const_v)[:, None, None])
            grads[:, j] = pref * (g_direct + g_dual + g_vol)
    if grad:
        return values, grads
    return values


def theta_gram(grams, alpha, cutoff: float | None = None, grad: bool = False):
    """Theta series ``sum_m exp(-pi alpha Q(m))`` including the origin term.

    ``cutoff`` is a bound on ``alpha * Q`` (default 13, i.e. terms below ~1e-17).
    With ``grad=True`` also returns the Gram-entry gradient.
    """
    grams = _as_stack(grams)
    n, d, _ = grams.shape
    alpha = float(alpha)
    xcut = (DEFAULT_CUTOFF if cutoff is None else cutoff) / alpha
    inv = np.linalg.inv(grams)
    m = half_box(_box_bounds(inv, np.full(n, xcut))).astype(float)
    q = np.einsum("ni,kij,nj->kn", m, grams, m)
    w = np.where(q <= xcut, np.exp(-math.pi * alpha * q), 0.0)
    values = 1.0 + 2.0 * w.sum(axis=1)
    if grad:
        g = -2.0 * math.pi * alpha * np.einsum("kn,ni,nj->kij", w, m, m)
        return values, g
    return values


def count_bound(x, mu_min: float, d: int):
    """Upper bound on #{m != 0 : Q(m) <= x} from ``Q(m) >= mu_min |m|^2``."""
    return (2.0 * np.sqrt(np.asarray(x, dtype=float) / mu_min) + 1.0) ** d


def decreasing_tail_bound(h, start: float, step: float, mu_min: float, d: int,
                          max_terms: int = 100000) -> float:
    """Rigorous bound on ``sum_{Q(m) > start} h(Q(m))`` for decreasing ``h >= 0``.

    Points with ``Q`` in ``(start + k step, start + (k+1) step]`` number at most
    ``count_bound(start + (k+1) step)`` and each contributes at most
    ``h(start + k step)``.  Summation stops once the term ratio is below one
    and the remaining geometric tail is negligible; that tail is added.
    """
    total = 0.0
    prev = None
    for k in range(max_terms):
        term = float(count_bound(start + (k + 1) * step, mu_min, d) * h(start + k * step))
        total += term
        if prev is not None and prev > 0:
            ratio = term / prev
            if ratio < 0.9 and term * ratio / (1 - ratio) < 1e-6 * max(total, 1e-300):
                return total + term * ratio / (1 - ratio)
        if term == 0.0:
            return total
        prev = term
    return math.inf


def power_tail_bound(s: float, start: float, mu_min: float, d: int) -> float:
    """Bound on ``sum_{Q(m) > start} Q(m)^{-s/2}`` (integral comparison, s > d).

    Uses ``sum g(Q) <= int_start^inf N(x) (-g'(x)) dx`` with the polynomial
    count bound expanded in powers of ``sqrt(x)``.
    """
    total = 0.0
    c = 2.0 / math.sqrt(mu_min)
    for k in range(d + 1):
        coeff = math.comb(d, k) * c**k
        total += coeff * (s / 2) / ((s - k) / 2) * start ** ((k - s) / 2)
    return total
