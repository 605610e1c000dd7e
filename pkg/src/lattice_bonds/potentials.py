"""Interaction potentials and lattice energies.

Potentials act on squared distances: ``E_f[L] = sum_{p in L, p != 0} f(|p|^2)``.

* ``Gaussian(alpha)``: ``f(r) = exp(-pi alpha r)``, so ``E = theta_L(alpha) - 1``.
* ``InversePower(s)``: ``f(r) = r^{-s/2}``, so ``E = zeta_L(s)``.
* ``LennardJones(p, q, a, b)``: ``f(r) = a r^{-p} - b r^{-q}``, so
  ``E = a zeta_L(2p) - b zeta_L(2q)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import sums
from .errors import BudgetExceeded, NotSummable
from .families import FamilyPoint2D, FamilyPoint3D, offdiag_gradient
from .lattice import DEFAULT_BUDGET, Lattice, enumerate_vectors, estimated_count


@dataclass(frozen=True)
class Gaussian:
    alpha: float

    def validate(self, d: int) -> None:
        if not self.alpha > 0:
            raise ValueError(f"Gaussian alpha must be positive, got {self.alpha}")

    def __call__(self, r):
        return np.exp(-math.pi * self.alpha * np.asarray(r, dtype=float))

    def derivative(self, r):
        return -math.pi * self.alpha * self(r)

    def describe(self) -> str:
        return f"gauss:{self.alpha:g}"


@dataclass(frozen=True)
class InversePower:
    s: float

    def validate(self, d: int) -> None:
        if not self.s > d:
            raise NotSummable(f"inverse power s={self.s} needs s > d={d}")

    def __call__(self, r):
        return np.asarray(r, dtype=float) ** (-self.s / 2)

    def derivative(self, r):
        return -self.s / 2 * np.asarray(r, dtype=float) ** (-self.s / 2 - 1)

    def describe(self) -> str:
        return f"power:{self.s:g}"


@dataclass(frozen=True)
class LennardJones:
    p: float
    q: float
    a: float = 1.0
    b: float = 1.0

    def validate(self, d: int) -> None:
        if not (self.a > 0 and self.b > 0):
            raise ValueError("Lennard-Jones weights a, b must be positive")
        if not self.p > self.q:
            raise ValueError(f"Lennard-Jones needs p > q, got p={self.p}, q={self.q}")
        if not self.q > d / 2:
            raise NotSummable(f"Lennard-Jones needs q > d/2 (q={self.q}, d={d})")

    @property
    def exponents(self) -> tuple[float, float]:
        """Zeta exponents ``(2p, 2q)``."""
        return 2.0 * self.p, 2.0 * self.q

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.a * r ** (-self.p) - self.b * r ** (-self.q)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        return -self.p * self.a * r ** (-self.p - 1) + self.q * self.b * r ** (-self.q - 1)

    def from_zeta(self, zeta_p, zeta_q, lam=1.0):
        """Energy of ``lam L`` from ``zeta_L(2p)``, ``zeta_L(2q)``."""
        lam = np.asarray(lam, dtype=float)
        return self.a * lam ** (-2 * self.p) * zeta_p - self.b * lam ** (-2 * self.q) * zeta_q

    def describe(self) -> str:
        return f"lj:{self.p:g},{self.q:g},{self.a:g},{self.b:g}"


PotentialSpec = Union[Gaussian, InversePower, LennardJones]


@dataclass(frozen=True)
class EnergyResult:
    value: float
    tail_bound: float
    cutoff_used: float


def parse_potential(text: str) -> PotentialSpec:
    """Parse ``lj:p,q,a,b``, ``gauss:alpha`` or ``power:s``."""
    kind, _, args = text.strip().partition(":")
    try:
        nums = [float(x) for x in args.split(",")] if args else []
    except ValueError as exc:
        raise ValueError(f"bad potential parameters in {text!r}") from exc
    kind = kind.lower()
    if kind == "lj" and len(nums) in (2, 4):
        return LennardJones(*nums)
    if kind in ("gauss", "gaussian") and len(nums) == 1:
        return Gaussian(nums[0])
    if kind == "power" and len(nums) == 1:
        return InversePower(nums[0])
    raise ValueError(f"cannot parse potential {text!r}; use lj:p,q,a,b | gauss:alpha | power:s")


def _min_eig(gram) -> float:
    return float(np.linalg.eigvalsh(gram)[0])


def theta(lattice: Lattice, alpha: float, tol: float = 1e-12,
          budget: int = DEFAULT_BUDGET) -> EnergyResult:
    """``theta_L(alpha) = sum_p exp(-pi alpha |p|^2)`` with the origin term."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    gram = lattice.gram
    d = lattice.dimension
    mu = _min_eig(gram)
    step = 1.0 / (math.pi * alpha)
    r2 = max(float(np.max(np.diag(gram))), (math.log(1.0 / tol) + 5.0) * step)
    while True:
        bound = sums.decreasing_tail_bound(lambda x: math.exp(-math.pi * alpha * x), r2, step, mu, d)
        if bound <= tol:
            break
        r2 += 4.0 * step
    m, q = enumerate_vectors(gram, r2, budget=budget)
    terms = np.exp(-math.pi * alpha * q)
    # sum smallest terms first
    value = 1.0 + float(np.sum(terms[::-1]))
    return EnergyResult(value, bound, r2)


def _split_zeta_tail(gram, s, cutoff) -> float:
    d = gram.shape[0]
    vol = math.sqrt(np.linalg.det(gram))
    tau = vol ** (-2.0 / d)
    a, b = s / 2.0, (d - s) / 2.0
    pref = math.pi**a / math.gamma(a)
    inv = np.linalg.inv(gram)

    def h_direct(x):
        return float((math.pi * x) ** (-a) * sums.upper_gamma(a, math.pi * tau * x))

    def h_dual(y):
        return float((math.pi * y) ** (-b) * sums.upper_gamma(b, math.pi * y / tau))

    direct = sums.decreasing_tail_bound(h_direct, cutoff / tau, 1.0 / (math.pi * tau), _min_eig(gram), d)
    dual = sums.decreasing_tail_bound(h_dual, cutoff * tau, tau / math.pi, _min_eig(inv), d)
    return pref * (direct + dual / vol)


def epstein_zeta(lattice: Lattice, s: float, tol: float = 1e-12, method: str = "split",
                 budget: int = DEFAULT_BUDGET) -> EnergyResult:
    """``zeta_L(s) = sum_{p != 0} |p|^{-s}`` for ``s > d``.

    ``method="split"`` (default) uses the theta splitting in :mod:`sums`,
    whose truncation error decays like ``exp(-pi X)``.  ``method="direct"``
    sums shells up to a radius chosen from the integral tail bound; it is
    only practical for large ``s`` or loose ``tol``.
    """
    d = lattice.dimension
    InversePower(s).validate(d)
    gram = lattice.gram
    if method == "split":
        cutoff = sums.DEFAULT_CUTOFF
        while True:
            bound = _split_zeta_tail(gram, s, cutoff)
            if bound <= tol:
                break
            cutoff += 2.0
        value = float(sums.zeta_gram(gram, [s], cutoff=cutoff)[0, 0])
        tau = math.sqrt(np.linalg.det(gram)) ** (-2.0 / d)
        return EnergyResult(value, bound, cutoff / tau)
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    mu = _min_eig(gram)
    r2 = float(np.max(np.diag(gram)))
    while sums.power_tail_bound(s, r2, mu, d) > tol:
        r2 *= 2.0
        if estimated_count(gram, r2) > budget:
            raise BudgetExceeded(f"direct zeta sum would need more than {budget} vectors")
    m, q = enumerate_vectors(gram, r2, budget=budget)
    value = float(np.sum((q ** (-s / 2))[::-1]))
    return EnergyResult(value, sums.power_tail_bound(s, r2, mu, d), r2)


def energy(lattice: Lattice, f: PotentialSpec, tol: float = 1e-10) -> EnergyResult:
    """Lattice energy ``sum_{p != 0} f(|p|^2)`` with a rigorous truncation bound."""
    d = lattice.dimension
    f.validate(d)
    if isinstance(f, Gaussian):
        res = theta(lattice, f.alpha, tol)
        return EnergyResult(res.value - 1.0, res.tail_bound, res.cutoff_used)
    if isinstance(f, InversePower):
        return epstein_zeta(lattice, f.s, tol)
    sp, sq = f.exponents
    zp = epstein_zeta(lattice, sp, tol / (2 * f.a))
    zq = epstein_zeta(lattice, sq, tol / (2 * f.b))
    return EnergyResult(
        f.a * zp.value - f.b * zq.value,
        f.a * zp.tail_bound + f.b * zq.tail_bound,
        max(zp.cutoff_used, zq.cutoff_used),
    )


def gram_energy(grams, f: PotentialSpec, lam: float = 1.0, grad: bool = False):
    """Energies of ``lam L`` for a stack of unit-scale Gram matrices (fast path).

    Returns values of shape ``(n,)`` and, with ``grad=True``, the gradient
    with respect to the unit-scale Gram entries, shape ``(n, d, d)``.
    """
    grams = np.asarray(grams, dtype=float)
    if grams.ndim == 2:
        grams = grams[None]
    d = grams.shape[-1]
    f.validate(d)
    lam2 = lam * lam
    if isinstance(f, Gaussian):
        out = sums.theta_gram(grams, f.alpha * lam2, grad=grad)
        if grad:
            return out[0] - 1.0, out[1]
        return out - 1.0
    if isinstance(f, InversePower):
        scale = lam ** (-f.s)
        out = sums.zeta_gram(grams, [f.s], grad=grad)
        if grad:
            return scale * out[0][:, 0], scale * out[1][:, 0]
        return scale * out[:, 0]
    wp = f.a * lam ** (-2 * f.p)
    wq = -f.b * lam ** (-2 * f.q)
    out = sums.zeta_gram(grams, list(f.exponents), grad=grad)
    if grad:
        vals, grads = out
        return vals @ np.array([wp, wq]), np.einsum("nkij,k->nij", grads, np.array([wp, wq]))
    return out @ np.array([wp, wq])


def family_energy_gradient(point: FamilyPoint2D | FamilyPoint3D, lam: float, f: PotentialSpec,
                           tol: float = 1e-10) -> np.ndarray:
    """Analytic gradient of ``E_f[lam L(params)]`` with respect to the family angles.

    The Gram-entry gradient of the lattice sum is chained through the
    off-diagonal coordinates and the angle Jacobian.
    """
    _, gram_grad = gram_energy(point.gram(), f, lam, grad=True)
    dc = offdiag_gradient(gram_grad[0])
    return dc @ point.jacobian()
