"""Parametrized lattice families with unit bonds.

Both families fix the basis vectors to unit length, so a lattice is fully
described by the off-diagonal Gram entries ``c`` (one in 2D, three in 3D).
The optimizers work in ``c``; angles are the user-facing coordinates.

2D: ``L_t = span{(1, 0), (cos t, sin t)}``, ``t in [pi/3, pi/2]``, ``c = cos t``.

3D: ``u = (1,0,0)``, ``v = (cos t, sin t, 0)``,
``w = (sin th cos ph, sin th sin ph, cos th)`` with
``c = (cos t, sin th cos ph, sin th cos(t - ph))``.

A unit-diagonal Gram matrix has the basis vectors among its minimal vectors
iff ``c`` lies in a convex polytope: in 2D ``|c| <= 1/2``; in 3D
``|c_ij| <= 1/2`` together with the four conditions ``Q(e1 +- e2 +- e3) >= 1``.
(In dimension <= 3 a basis whose vectors are no longer than any
``{0, +-1}``-combination already attains the successive minima.)  The 2D
family uses the half ``0 <= c <= 1/2``, which covers all rhombic shapes up
to reflection.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .lattice import BondConstraint, Lattice, build_lattice, minimal_vectors

T_MIN = math.pi / 3
T_MAX = math.pi / 2
ANGLE_SLACK = 1e-12

# index pairs of the off-diagonal coordinates, in order c12, c13, c23
PAIRS_3D = ((0, 1), (0, 2), (1, 2))


def gram_from_offdiag(c) -> np.ndarray:
    """Unit-diagonal Gram matrices from off-diagonal coordinates, shape (n, d, d)."""
    c = np.atleast_2d(np.asarray(c, dtype=float))
    k = c.shape[1]
    d = {1: 2, 3: 3}[k]
    pairs = ((0, 1),) if d == 2 else PAIRS_3D
    g = np.broadcast_to(np.eye(d), (len(c), d, d)).copy()
    for idx, (i, j) in enumerate(pairs):
        g[:, i, j] = c[:, idx]
        g[:, j, i] = c[:, idx]
    return g


def offdiag_gradient(gram_grad: np.ndarray) -> np.ndarray:
    """Chain a symmetric Gram gradient to the off-diagonal coordinates."""
    gram_grad = np.asarray(gram_grad, dtype=float)
    d = gram_grad.shape[-1]
    pairs = ((0, 1),) if d == 2 else PAIRS_3D
    return np.stack([gram_grad[..., i, j] + gram_grad[..., j, i] for i, j in pairs], axis=-1)


@dataclass(frozen=True)
class FamilyPoint2D:
    t: float

    def __post_init__(self):
        if not (T_MIN - ANGLE_SLACK <= self.t <= T_MAX + ANGLE_SLACK):
            raise ValueError(f"t={self.t} outside [pi/3, pi/2]")

    @property
    def params(self) -> tuple[float, ...]:
        return (self.t,)

    def offdiag(self) -> np.ndarray:
        return np.array([math.cos(self.t)])

    @classmethod
    def from_offdiag(cls, c) -> "FamilyPoint2D":
        c = float(np.clip(np.ravel(c)[0], 0.0, 0.5))
        return cls(math.acos(c))

    def jacobian(self) -> np.ndarray:
        """d(offdiag)/d(params), shape (1, 1)."""
        return np.array([[-math.sin(self.t)]])

    def basis(self) -> np.ndarray:
        return np.array([[1.0, 0.0], [math.cos(self.t), math.sin(self.t)]])

    def gram(self) -> np.ndarray:
        return gram_from_offdiag(self.offdiag())[0]

    def lattice(self, lam: float = 1.0) -> Lattice:
        return build_lattice(lam * self.basis())


@dataclass(frozen=True)
class FamilyPoint3D:
    t: float
    theta: float
    phi: float

    @property
    def params(self) -> tuple[float, ...]:
        return (self.t, self.theta, self.phi)

    def basis(self) -> np.ndarray:
        t, th, ph = self.params
        return np.array([
            [1.0, 0.0, 0.0],
            [math.cos(t), math.sin(t), 0.0],
            [math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)],
        ])

    def offdiag(self) -> np.ndarray:
        t, th, ph = self.params
        return np.array([math.cos(t), math.sin(th) * math.cos(ph), math.sin(th) * math.cos(t - ph)])

    @classmethod
    def from_offdiag(cls, c) -> "FamilyPoint3D":
        c12, c13, c23 = (float(x) for x in np.ravel(c))
        t = math.acos(min(1.0, max(-1.0, c12)))
        st = math.sin(t)
        ys = (c23 - c12 * c13) / st
        sin_th = math.hypot(c13, ys)
        if sin_th < 1e-8:
            return cls(t, 0.0, 0.0)
        theta = math.asin(min(1.0, sin_th))
        return cls(t, theta, math.atan2(ys, c13))

    def jacobian(self) -> np.ndarray:
        """d(c12, c13, c23)/d(t, theta, phi), shape (3, 3)."""
        t, th, ph = self.params
        st, ct = math.sin(th), math.cos(th)
        return np.array([
            [-math.sin(t), 0.0, 0.0],
            [0.0, ct * math.cos(ph), -st * math.sin(ph)],
            [-st * math.sin(t - ph), ct * math.cos(t - ph), st * math.sin(t - ph)],
        ])

    def gram(self) -> np.ndarray:
        return gram_from_offdiag(self.offdiag())[0]

    def lattice(self, lam: float = 1.0) -> Lattice:
        return build_lattice(lam * self.basis())

    def is_admissible(self, tol: float = 1e-9) -> bool:
        """Unit vectors are minimal: lambda_1 of the unit-bond lattice equals 1."""
        if abs(np.linalg.det(self.basis())) < 1e-12:
            return False
        lam1, _ = minimal_vectors(self.lattice())
        return abs(lam1 - 1.0) <= tol


def point_from_offdiag(c):
    c = np.ravel(c)
    return FamilyPoint2D.from_offdiag(c) if len(c) == 1 else FamilyPoint3D.from_offdiag(c)


class GramPolytope:
    """Convex polytope ``{c : G c >= h, E c = e}`` of admissible off-diagonal coordinates.

    ``project`` is the exact Euclidean projection: the projection onto a
    polytope is the projection onto the affine hull of some face, so we try
    every active set of at most ``dim`` inequalities (plus the equalities)
    and keep the nearest feasible candidate.
    """

    def __init__(self, ineq: np.ndarray, rhs: np.ndarray, eq: np.ndarray | None = None,
                 eq_rhs: np.ndarray | None = None):
        self.ineq = np.asarray(ineq, dtype=float)
        self.rhs = np.asarray(rhs, dtype=float)
        self.dim = self.ineq.shape[1]
        self.eq = np.zeros((0, self.dim)) if eq is None else np.atleast_2d(np.asarray(eq, dtype=float))
        self.eq_rhs = np.zeros(0) if eq_rhs is None else np.atleast_1d(np.asarray(eq_rhs, dtype=float))
        self._build_faces()

    @classmethod
    def family(cls, d: int) -> "GramPolytope":
        if d == 2:
            return cls(np.array([[1.0], [-1.0]]), np.array([0.0, -0.5]))
        if d != 3:
            raise ValueError("families exist for d = 2, 3")
        rows, rhs = [], []
        for k in range(3):
            for sgn in (1.0, -1.0):
                r = np.zeros(3)
                r[k] = -sgn
                rows.append(r)
                rhs.append(-0.5)
        # Q(e1 + s2 e2 + s3 e3) >= 1  <=>  s2 c12 + s3 c13 + s2 s3 c23 >= -1
        for s2, s3 in itertools.product((1.0, -1.0), repeat=2):
            rows.append(np.array([s2, s3, s2 * s3]))
            rhs.append(-1.0)
        return cls(np.array(rows), np.array(rhs))

    def restricted(self, constraint: BondConstraint) -> "GramPolytope":
        """Closure of the class ``L_d(M, 1)`` inside the family.

        Each bond ``m`` outside ``{+-e_i}`` adds the linear equation
        ``Q(m) = 1`` in the off-diagonal coordinates.  The constraint's own
        length is ignored: family lattices have unit bonds before scaling.
        """
        d = constraint.dimension
        pairs = ((0, 1),) if d == 2 else PAIRS_3D
        eq, eq_rhs = [], []
        for m in np.asarray(constraint.vectors):
            m = [int(x) for x in m]
            if sum(abs(x) for x in m) == 1:
                continue
            eq.append([2.0 * m[i] * m[j] for i, j in pairs])
            eq_rhs.append(1.0 - sum(x * x for x in m))
        if not eq:
            return self
        eq = np.vstack([self.eq, np.array(eq)])
        eq_rhs = np.concatenate([self.eq_rhs, np.array(eq_rhs)])
        # drop duplicated (negated) equations
        _, keep = np.unique(np.round(np.column_stack([eq, eq_rhs]), 12), axis=0, return_index=True)
        keep = np.sort(keep)
        return GramPolytope(self.ineq, self.rhs, eq[keep], eq_rhs[keep])

    def _build_faces(self):
        n_ineq = len(self.ineq)
        maps, offsets = [], []
        for k in range(0, self.dim + 1):
            for subset in itertools.combinations(range(n_ineq), k):
                a = np.vstack([self.eq, self.ineq[list(subset)]])
                b = np.concatenate([self.eq_rhs, self.rhs[list(subset)]])
                if len(a) == 0:
                    maps.append(np.eye(self.dim))
                    offsets.append(np.zeros(self.dim))
                    continue
                if np.linalg.matrix_rank(a) < len(a):
                    continue
                aat = np.linalg.inv(a @ a.T)
                maps.append(np.eye(self.dim) - a.T @ aat @ a)
                offsets.append(a.T @ aat @ b)
        self._maps = np.array(maps)
        self._offsets = np.array(offsets)
        if len(self.eq):
            _, sv, vt = np.linalg.svd(self.eq)
            rank = int(np.sum(sv > 1e-12))
            self.tangent = vt[rank:].T
        else:
            self.tangent = np.eye(self.dim)

    @property
    def free_dim(self) -> int:
        return self.tangent.shape[1]

    def violation(self, c) -> np.ndarray:
        c = np.atleast_2d(np.asarray(c, dtype=float))
        v = np.max(np.maximum(self.rhs - c @ self.ineq.T, 0.0), axis=1)
        if len(self.eq):
            v = np.maximum(v, np.max(np.abs(c @ self.eq.T - self.eq_rhs), axis=1))
        return v

    def contains(self, c, tol: float = 1e-12) -> np.ndarray:
        return self.violation(c) <= tol

    def project(self, c) -> np.ndarray:
        c = np.atleast_2d(np.asarray(c, dtype=float))
        cand = np.einsum("fij,nj->fni", self._maps, c) + self._offsets[:, None, :]
        viol = np.max(np.maximum(self.rhs[None, None, :] - cand @ self.ineq.T, 0.0), axis=2)
        dist = np.sum((cand - c[None]) ** 2, axis=2)
        dist = np.where(viol <= 1e-12, dist, np.inf)
        best = np.argmin(dist, axis=0)
        out = cand[best, np.arange(len(c))]
        # the unconstrained candidate is c itself; keep it bit-exact when feasible
        inside = self.contains(c, 0.0)
        out[inside] = c[inside]
        return out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform samples by rejection inside the affine hull."""
        base = self.project(np.zeros(self.dim))[0]
        out = []
        while sum(len(o) for o in out) < n:
            y = rng.uniform(-2.0, 2.0, size=(8 * n + 16, self.free_dim))
            c = base + y @ self.tangent.T
            out.append(c[self.contains(c, 1e-13)])
        return np.concatenate(out)[:n]
