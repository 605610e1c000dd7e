"""Shell moments, strong eutaxy, and constrained criticality/convexity of theta.

A shell's real second moment ``V = sum p p^T`` is a multiple of the identity
exactly when its integer-coordinate moment ``S = sum m m^T`` is a multiple
of ``A^{-1}`` (since ``V = B^T S B`` for the basis rows ``B``).  Eutaxy is
tested on ``S`` so the test is basis-covariant; both moments are reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTangent
from .lattice import BondConstraint, Lattice, enumerate_vectors, first_shells, in_constraint_class

# exp(-pi * 14) ~ 8e-20: theta-type sums truncated at alpha Q <= 14
_THETA_CUTOFF = 14.0


@dataclass(frozen=True)
class ShellMoment:
    shell_index: int
    r2: float
    count: int
    moment: np.ndarray            # real coordinates, sum p p^T
    integer_moment: np.ndarray    # integer coordinates, sum m m^T
    rho: float | None             # rho * integer_moment ~ A^{-1} when proportional
    deviation: float              # relative inf-norm residual of the best fit


@dataclass(frozen=True)
class EutaxyReport:
    is_strongly_eutactic: bool
    shells_checked: int
    max_deviation: float
    first_failing_shell: int | None


def _fit(moment: np.ndarray, target: np.ndarray) -> tuple[float, float]:
    rho = float(np.sum(moment * target) / np.sum(moment * moment))
    dev = float(np.max(np.abs(rho * moment - target)) / np.max(np.abs(target)))
    return rho, dev


def shell_moments(lattice: Lattice, n_shells: int, tol: float = 1e-8) -> list[ShellMoment]:
    if n_shells < 1:
        raise ValueError("n_shells must be >= 1")
    decomposition = first_shells(lattice, n_shells)
    inv = np.linalg.inv(lattice.gram)
    out = []
    for i, shell in enumerate(decomposition.shells[:n_shells], start=1):
        m = shell.vectors.astype(float)
        p = m @ lattice.basis
        integer_moment = m.T @ m
        rho, dev = _fit(integer_moment, inv)
        out.append(ShellMoment(i, shell.r2, shell.count, p.T @ p, integer_moment,
                               rho if dev < tol else None, dev))
    return out


def check_strong_eutaxy(lattice: Lattice, n_shells: int = 6, tol: float = 1e-8) -> EutaxyReport:
    """Every checked shell moment is proportional to ``A^{-1}`` within ``tol``."""
    if n_shells < 2:
        raise ValueError("n_shells must be >= 2")
    moments = shell_moments(lattice, n_shells, tol)
    devs = [sm.deviation for sm in moments]
    failing = [sm.shell_index for sm in moments if sm.deviation >= tol]
    worst = max(devs)
    return EutaxyReport(worst < tol, len(moments), worst, failing[0] if failing else None)


def _theta_vectors(lattice: Lattice, alpha: float):
    r2 = max(_THETA_CUTOFF / alpha, float(np.max(np.diag(lattice.gram))))
    m, q = enumerate_vectors(lattice.gram, r2)
    return m.astype(float), q


def theta_gram_gradient(lattice: Lattice, alpha: float) -> np.ndarray:
    """Direction of ``d theta / dA``: ``sum m m^T exp(-pi alpha Q(m))``.

    The true derivative carries an extra factor ``-pi alpha``, which does not
    affect membership in a linear span.
    """
    m, q = _theta_vectors(lattice, alpha)
    w = np.exp(-math.pi * alpha * q)
    return np.einsum("n,ni,nj->ij", w, m, m)


def _sym_basis(d: int) -> np.ndarray:
    """Frobenius-orthonormal basis of symmetric d x d matrices."""
    out = []
    for i in range(d):
        for j in range(i, d):
            e = np.zeros((d, d))
            if i == j:
                e[i, i] = 1.0
            else:
                e[i, j] = e[j, i] = 1.0 / math.sqrt(2.0)
            out.append(e)
    return np.array(out)


def _require_class(lattice: Lattice, constraint: BondConstraint) -> None:
    if constraint.dimension != lattice.dimension:
        raise ValueError("constraint and lattice dimensions differ")
    if not in_constraint_class(lattice, constraint, strict=False, rtol=1e-8):
        raise ValueError("lattice is not in the closure of the constraint class")


def check_critical_point(lattice: Lattice, constraint: BondConstraint, alpha: float,
                         tol: float = 1e-8) -> tuple[bool, float]:
    """Lagrange criticality of ``A -> theta_A(alpha)`` under ``Q(m) = lam^2, m in M``.

    Returns ``(critical, relative_residual)`` where the residual is the part
    of the Gram gradient outside ``span{m m^T : m in M}``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    _require_class(lattice, constraint)
    g = theta_gram_gradient(lattice, alpha)
    cons = np.asarray(constraint.vectors, dtype=float)
    span = np.einsum("ni,nj->nij", cons, cons).reshape(len(cons), -1).T
    coef, *_ = np.linalg.lstsq(span, g.ravel(), rcond=None)
    resid = float(np.linalg.norm(g.ravel() - span @ coef) / np.linalg.norm(g))
    return resid < tol, resid


def constraint_tangent(constraint: BondConstraint) -> np.ndarray:
    """Orthonormal basis (as matrices) of symmetric H with ``m^T H m = 0`` for m in M."""
    d = constraint.dimension
    basis = _sym_basis(d)
    cons = np.asarray(constraint.vectors, dtype=float)
    op = np.einsum("ni,kij,nj->nk", cons, basis, cons)
    _, sv, vt = np.linalg.svd(op)
    rank = int(np.sum(sv > 1e-10 * max(1.0, sv[0])))
    null = vt[rank:]
    return np.einsum("rk,kij->rij", null, basis)


@dataclass(frozen=True)
class HessianReport:
    positive_definite: bool
    min_eigenvalue: float
    min_probe_value: float
    tangent_dim: int


def constrained_theta_hessian_pd(lattice: Lattice, constraint: BondConstraint, alpha: float,
                                 n_probe: int = 50, seed: int = 0) -> HessianReport:
    """Hessian of ``A -> theta_A(alpha)`` restricted to the constraint tangent space.

    The quadratic form is ``pi^2 alpha^2 sum_m (m^T H m)^2 exp(-pi alpha Q(m))``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    _require_class(lattice, constraint)
    tangent = constraint_tangent(constraint)
    if len(tangent) == 0:
        raise DegenerateTangent("bond constraints determine the Gram matrix (rigid lattice)")
    m, q = _theta_vectors(lattice, alpha)
    w = (math.pi * alpha) ** 2 * np.exp(-math.pi * alpha * q)
    feats = np.einsum("ni,rij,nj->nr", m, tangent, m)
    k = np.einsum("n,na,nb->ab", w, feats, feats)
    eig = float(np.linalg.eigvalsh(k)[0])
    rng = np.random.default_rng(seed)
    probes = rng.normal(size=(n_probe, len(tangent)))
    probes /= np.linalg.norm(probes, axis=1, keepdims=True)
    vals = np.einsum("pa,ab,pb->p", probes, k, probes)
    min_probe = float(np.min(vals))
    return HessianReport(bool(eig > 0 and min_probe > 0), eig, min_probe, len(tangent))
