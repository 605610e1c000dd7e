"""Bravais lattices, shell enumeration and prescribed-bond classes.

A lattice is stored through a basis (rows are the generating vectors) and
its Gram matrix ``gram[i, j] = u_i . u_j``.  All enumeration works on integer
coordinates ``m`` with squared length ``Q(m) = m^T gram m``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CutoffTooLarge, SingularBasis

DEFAULT_BUDGET = 10**7
SHELL_RTOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Lattice:
    """Full-rank lattice spanned by the rows of ``basis``."""

    basis: np.ndarray
    gram: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        basis = _readonly(self.basis)
        if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
            raise SingularBasis(f"basis must be a square matrix, got shape {basis.shape}")
        if abs(np.linalg.det(basis)) <= 1e-12:
            raise SingularBasis("basis determinant is (numerically) zero")
        object.__setattr__(self, "basis", basis)
        gram = basis @ basis.T
        object.__setattr__(self, "gram", _readonly(0.5 * (gram + gram.T)))

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]

    @property
    def covolume(self) -> float:
        return abs(float(np.linalg.det(self.basis)))

    def quadratic_form(self, m) -> np.ndarray:
        """Squared lengths ``Q(m)`` for one integer vector or a stack of them."""
        m = np.asarray(m, dtype=float)
        return np.einsum("...i,ij,...j->...", m, self.gram, m)

    def points(self, m) -> np.ndarray:
        """Real coordinates ``sum_i m_i u_i``."""
        return np.asarray(m, dtype=float) @ self.basis

    def scaled(self, lam: float) -> "Lattice":
        return Lattice(lam * self.basis)

    @classmethod
    def from_gram(cls, gram) -> "Lattice":
        """Lattice with the given Gram matrix (lower-triangular Cholesky basis)."""
        gram = np.asarray(gram, dtype=float)
        try:
            chol = np.linalg.cholesky(0.5 * (gram + gram.T))
        except np.linalg.LinAlgError as exc:
            raise SingularBasis("Gram matrix is not positive definite") from exc
        return cls(chol)


def build_lattice(basis) -> Lattice:
    return Lattice(np.asarray(basis, dtype=float))


_CANONICAL_BASES = {
    "A2": np.array([[1.0, 0.0], [0.5, math.sqrt(3) / 2]]),
    "D3": np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 0.0]]) / math.sqrt(2),
    "D3STAR": np.array([[1.0, 1.0, -1.0], [-1.0, 1.0, 1.0], [1.0, -1.0, 1.0]]) / math.sqrt(3),
}

_ALIASES = {
    "TRIANGULAR": "A2",
    "FCC": "D3",
    "BCC": "D3STAR",
    "D3*": "D3STAR",
    "SQUARE": "Z2",
}


def canonical(name: str, lam: float = 1.0) -> Lattice:
    """One of the reference lattices with minimal distance ``lam``.

    Accepted names: ``SC(d)`` / ``Zd`` (simple cubic in dimension d), ``A2``,
    ``D3`` (FCC), ``D3star`` (BCC); a few common aliases are also understood.
    """
    if not lam > 0:
        raise ValueError(f"bond length must be positive, got {lam}")
    key = name.strip().upper().replace(" ", "")
    key = _ALIASES.get(key, key)
    match = re.fullmatch(r"SC\((\d+)\)|Z(\d+)|SC", key)
    if match:
        d = int(match.group(1) or match.group(2) or 3)
        if d < 1:
            raise ValueError("dimension must be positive")
        return Lattice(lam * np.eye(d))
    if key not in _CANONICAL_BASES:
        raise ValueError(f"unknown lattice name {name!r}")
    return Lattice(lam * _CANONICAL_BASES[key])


def estimated_count(gram: np.ndarray, r2: float) -> float:
    """Volume estimate of the number of lattice points with Q <= r2."""
    d = gram.shape[0]
    ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    return ball * r2 ** (d / 2) / math.sqrt(np.linalg.det(gram))


def enumerate_vectors(gram, r2: float, budget: int = DEFAULT_BUDGET, include_zero: bool = False):
    """All integer vectors with ``Q(m) <= r2``, via a Cholesky-bounded search.

    The search fixes coordinates from the last to the first; at each level the
    admissible range of the current coordinate is an interval derived from the
    triangular factor of ``gram``.  Returns ``(m, Q)`` sorted by ``Q`` and then
    lexicographically on ``m``.
    """
    gram = np.asarray(gram, dtype=float)
    d = gram.shape[0]
    if not r2 > 0:
        raise ValueError(f"cutoff must be positive, got {r2}")
    if estimated_count(gram, r2) > budget:
        raise CutoffTooLarge(
            f"about {estimated_count(gram, r2):.3g} vectors below r2={r2:g} (budget {budget})"
        )
    try:
        upper = np.linalg.cholesky(gram).T
    except np.linalg.LinAlgError:
        return _box_enumeration(gram, r2, budget, include_zero)

    bound = r2 * (1 + 1e-9)
    partial = np.zeros((1, 0), dtype=np.int64)
    remaining = np.array([bound])
    for i in range(d - 1, -1, -1):
        rii = upper[i, i]
        center = -(partial @ upper[i, i + 1 :]) / rii if partial.shape[1] else np.zeros(len(partial))
        width = np.sqrt(np.maximum(remaining, 0.0)) / rii
        lo = np.ceil(center - width).astype(np.int64)
        hi = np.floor(center + width).astype(np.int64)
        counts = np.maximum(hi - lo + 1, 0)
        total = int(counts.sum())
        if total > budget:
            raise CutoffTooLarge(f"enumeration visits {total} partial vectors (budget {budget})")
        rows = np.repeat(np.arange(len(partial)), counts)
        offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        mi = lo[rows] + offsets
        partial = np.column_stack([mi, partial[rows]])
        remaining = remaining[rows] - (rii * (mi - center[rows])) ** 2
    return _finish(partial, gram, r2, include_zero)


def _box_enumeration(gram, r2, budget, include_zero):
    inv_diag = np.diag(np.linalg.pinv(gram))
    k = np.floor(np.sqrt(np.maximum(r2 * inv_diag, 0)) + 1e-9).astype(int)
    if np.prod(2 * k + 1, dtype=float) > budget:
        raise CutoffTooLarge(f"integer box of size {tuple(2 * k + 1)} exceeds budget {budget}")
    return _finish(box_points(k), gram, r2, include_zero)


def box_points(k: Sequence[int]) -> np.ndarray:
    """Integer points of the box ``|m_i| <= k_i`` (lexicographic order)."""
    axes = [np.arange(-int(ki), int(ki) + 1) for ki in k]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


def _finish(m, gram, r2, include_zero):
    q = np.einsum("ni,ij,nj->n", m.astype(float), gram, m.astype(float))
    keep = q <= r2 * (1 + 1e-12)
    if not include_zero:
        keep &= np.any(m != 0, axis=1)
    m, q = m[keep], q[keep]
    order = np.lexsort(tuple(m.T[::-1]) + (q,))
    return m[order], q[order]


@dataclass(frozen=True)
class Shell:
    r2: float
    vectors: np.ndarray

    @property
    def count(self) -> int:
        return len(self.vectors)


@dataclass(frozen=True)
class ShellDecomposition:
    shells: tuple
    cutoff: float

    def __len__(self):
        return len(self.shells)

    def __iter__(self):
        return iter(self.shells)

    def __getitem__(self, i) -> Shell:
        return self.shells[i]

    def signature(self, n: int | None = None) -> list[tuple[float, int]]:
        return [(s.r2, s.count) for s in self.shells[:n]]


def group_shells(m: np.ndarray, q: np.ndarray, rtol: float = SHELL_RTOL) -> list[Shell]:
    """Split vectors sorted by ``q`` into shells of (numerically) equal length."""
    shells = []
    start = 0
    for i in range(1, len(q) + 1):
        if i == len(q) or q[i] - q[start] >= rtol * max(1.0, q[start]):
            block = m[start:i]
            block = block[np.lexsort(tuple(block.T[::-1]))]
            block.setflags(write=False)
            shells.append(Shell(float(np.mean(q[start:i])), block))
            start = i
    return shells


def shells(lattice: Lattice, r2: float, budget: int = DEFAULT_BUDGET) -> ShellDecomposition:
    """Layers of nonzero lattice vectors with squared length at most ``r2``."""
    m, q = enumerate_vectors(lattice.gram, r2, budget)
    return ShellDecomposition(tuple(group_shells(m, q)), float(r2))


def first_shells(lattice: Lattice, n: int, budget: int = DEFAULT_BUDGET) -> ShellDecomposition:
    """The first ``n`` shells, growing the cutoff until enough are complete."""
    lam1 = minimal_vectors(lattice)[0]
    r2 = lam1**2 * 1.5
    while True:
        dec = shells(lattice, r2, budget)
        if len(dec) > n:
            return ShellDecomposition(dec.shells[:n], dec.shells[n].r2)
        r2 *= 1.6


def minimal_vectors(lattice: Lattice) -> tuple[float, np.ndarray]:
    """Minimal distance and all integer vectors attaining it (rel. tol 1e-9)."""
    gram = lattice.gram
    # the shortest basis vector bounds lambda_1 from above
    r2 = float(np.min(np.diag(gram))) * (1 + 1e-6)
    m, q = enumerate_vectors(gram, r2)
    qmin = q[0]
    sel = q <= qmin * (1 + 1e-9)
    vecs = m[sel]
    vecs = vecs[np.lexsort(tuple(vecs.T[::-1]))]
    return math.sqrt(qmin), vecs


@dataclass(frozen=True, eq=False)
class BondConstraint:
    """A prescribed set of minimal vectors ``M`` with common length ``lam``."""

    vectors: np.ndarray
    lam: float = 1.0

    def __post_init__(self):
        vecs = np.array(self.vectors, dtype=np.int64)
        if vecs.ndim != 2 or len(vecs) == 0:
            raise ValueError("bond constraint needs a nonempty list of integer vectors")
        if np.any(np.all(vecs == 0, axis=1)):
            raise ValueError("bond constraint may not contain the zero vector")
        keys = {tuple(v) for v in vecs}
        if len(keys) != len(vecs):
            raise ValueError("bond constraint vectors must be distinct")
        if any(tuple(-v) not in keys for v in vecs):
            raise ValueError("bond constraint must be closed under negation")
        if not self.lam > 0:
            raise ValueError("bond length must be positive")
        vecs = vecs[np.lexsort(tuple(vecs.T[::-1]))]
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    @property
    def coordination(self) -> int:
        return len(self.vectors)

    @classmethod
    def from_generators(cls, gens: Iterable[Sequence[int]], lam: float = 1.0) -> "BondConstraint":
        gens = [tuple(int(x) for x in g) for g in gens]
        both = {g for g in gens} | {tuple(-x for x in g) for g in gens}
        return cls(np.array(sorted(both)), lam)

    @classmethod
    def of(cls, lattice: Lattice) -> "BondConstraint":
        lam1, vecs = minimal_vectors(lattice)
        return cls(vecs, lam1)


def _unit(d, i):
    e = [0] * d
    e[i] = 1
    return e


def bond_set(name: str, lam: float = 1.0) -> BondConstraint:
    """Minimal-vector sets of the reference lattices, in the canonical basis of Z^d."""
    key = name.strip().upper().replace(" ", "")
    key = _ALIASES.get(key, key)
    match = re.fullmatch(r"SC\((\d+)\)|Z(\d+)", key)
    if match:
        d = int(match.group(1) or match.group(2))
        return BondConstraint.from_generators([_unit(d, i) for i in range(d)], lam)
    if key == "A2":
        return BondConstraint.from_generators([(1, 0), (0, 1), (-1, 1)], lam)
    if key == "D3":
        gens = [_unit(3, i) for i in range(3)]
        gens += [(-1, 1, 0), (-1, 0, 1), (0, -1, 1)]
        return BondConstraint.from_generators(gens, lam)
    if key == "D3STAR":
        return BondConstraint.from_generators([_unit(3, i) for i in range(3)] + [(1, 1, 1)], lam)
    raise ValueError(f"unknown bond set {name!r}")


def in_constraint_class(lattice: Lattice, constraint: BondConstraint, strict: bool = True,
                        rtol: float = 1e-9) -> bool:
    """Membership in L_d(M, lam) (strict) or in its closure (non-strict).

    Strict: every ``m`` in ``M`` has ``Q(m) = lam^2`` and every other nonzero
    vector is strictly longer.  Non-strict relaxes the second condition to
    ``>=``.  Comparisons use the relative tolerance ``rtol``.
    """
    if lattice.dimension != constraint.dimension:
        raise ValueError("lattice and constraint dimensions differ")
    lam2 = constraint.lam**2
    if not np.allclose(lattice.quadratic_form(constraint.vectors), lam2, rtol=rtol, atol=0):
        return False
    m, q = enumerate_vectors(lattice.gram, lam2 * (1 + 1e-6))
    prescribed = {tuple(v) for v in constraint.vectors}
    others = np.array([tuple(v) not in prescribed for v in m], dtype=bool)
    q_other = q[others] if len(m) else q
    if strict:
        return bool(np.all(q_other > lam2 * (1 + rtol)))
    return bool(np.all(q_other >= lam2 * (1 - rtol)))
