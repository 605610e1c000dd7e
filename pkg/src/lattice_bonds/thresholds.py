"""Bond-length thresholds for Lennard-Jones optimality of reference lattices.

With ``Dp(c) = zeta_c(2p) - zeta_ref(2p)`` and ``Dq`` alike (signs reversed
in sup mode), ``lam L_ref`` beats ``lam L_c`` for a Lennard-Jones potential
exactly when ``lam`` is below (inf mode) or above (sup mode)

    g(c) = ((a / b) * Dp(c) / Dq(c)) ** (1 / (2 (p - q))),

so the threshold is the infimum resp. supremum of ``g`` over the domain.
``g`` is 0/0 at the reference; its directional limits are obtained by
Richardson extrapolation and compete with the grid optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotConverged, SignError
from .families import GramPolytope, gram_from_offdiag, point_from_offdiag
from .lattice import bond_set
from .optimize import coordinate_golden, golden_section, richardson_limit
from .potentials import LennardJones
from .sums import zeta_gram

INF_MODE = "lambda0_inf"
SUP_MODE = "lambda1_sup"

PUNCTURE = 1e-4
RICHARDSON_H = 1e-3
# differences below this are treated as 0/0 (point equivalent to the reference)
EQUIVALENCE_ATOL = 1e-11
CHUNK = 4096


@dataclass(frozen=True)
class ThresholdQuery:
    reference: str
    potential: LennardJones
    mode: str
    domain: GramPolytope = field(repr=False)
    ref_offdiag: np.ndarray = field(repr=False)
    grid_size: int = 2048

    @property
    def dimension(self) -> int:
        return 2 if self.domain.dim == 1 else 3

    @classmethod
    def for_reference(cls, name: str, potential: LennardJones,
                      grid_size: int | None = None) -> "ThresholdQuery":
        """Queries for the reference lattices Z2, A2, Z3, D3star (inf) and D3 (sup).

        Z2 and A2 use the whole 2D family; Z3 the whole 3D family (the
        closure of the class with bonds ``+-e_i``); D3star and D3 the face
        of the 3D family where ``e1 + e2 + e3`` is also a bond.
        """
        key = name.strip().upper().replace("*", "STAR")
        if key in ("Z2", "SC(2)", "SQUARE"):
            return cls("Z2", potential, INF_MODE, GramPolytope.family(2), np.array([0.0]),
                       grid_size or 2048)
        if key in ("A2", "TRIANGULAR"):
            return cls("A2", potential, SUP_MODE, GramPolytope.family(2), np.array([0.5]),
                       grid_size or 2048)
        if key in ("Z3", "SC(3)", "SC"):
            return cls("Z3", potential, INF_MODE, GramPolytope.family(3), np.zeros(3),
                       grid_size or 64)
        face = GramPolytope.family(3).restricted(bond_set("D3STAR"))
        if key in ("D3STAR", "BCC"):
            return cls("D3star", potential, INF_MODE, face, np.full(3, -1.0 / 3.0), grid_size or 64)
        if key in ("D3", "FCC"):
            return cls("D3", potential, SUP_MODE, face, np.array([-0.5, -0.5, 0.0]), grid_size or 64)
        raise ValueError(f"no threshold query for reference {name!r}")

    def with_potential(self, potential: LennardJones) -> "ThresholdQuery":
        return ThresholdQuery(self.reference, potential, self.mode, self.domain,
                              self.ref_offdiag, self.grid_size)


@dataclass(frozen=True)
class ThresholdResult:
    lambda_star: float
    argmin_parameter: object
    offdiag: np.ndarray
    bracket: tuple[float, float]
    at_reference: bool
    grid_optimum: float
    reference_limit: float


class _Ratio:
    """Evaluates ``g`` on batches of off-diagonal points."""

    def __init__(self, query: ThresholdQuery):
        f = query.potential
        f.validate(query.dimension)
        self.query = query
        self.sign = 1.0 if query.mode == INF_MODE else -1.0
        self.exps = list(f.exponents)
        self.power = 1.0 / (2.0 * (f.p - f.q))
        self.weight = f.a / f.b
        self.ref_zeta = zeta_gram(gram_from_offdiag(query.ref_offdiag), self.exps)[0]

    def differences(self, c: np.ndarray) -> np.ndarray:
        out = np.empty((len(c), 2))
        for start in range(0, len(c), CHUNK):
            z = zeta_gram(gram_from_offdiag(c[start:start + CHUNK]), self.exps)
            out[start:start + CHUNK] = self.sign * (z - self.ref_zeta)
        return out

    def ratio(self, c: np.ndarray, check: bool = False) -> np.ndarray:
        diff = self.differences(np.atleast_2d(c))
        if check and np.any(diff <= 0):
            bad = np.atleast_2d(c)[np.any(diff <= 0, axis=1)][0]
            raise SignError(f"energy difference has the wrong sign at offdiag={bad.tolist()}; "
                            f"{self.query.reference} is not the optimizer for this mode")
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.weight * diff[:, 0] / diff[:, 1]) ** self.power

    def objective(self, c: np.ndarray) -> np.ndarray:
        """Value minimized by the search (``g`` in inf mode, ``-g`` in sup mode)."""
        return self.sign * self.ratio(c)


def _grid(domain: GramPolytope, n: int) -> np.ndarray:
    if domain.dim == 1 and domain.free_dim == 1:
        return np.linspace(0.0, 0.5, n)[:, None]
    base = domain.project(np.zeros(domain.dim))[0]
    verts = _vertices(domain)
    coords = (verts - base) @ domain.tangent
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    axes = [np.linspace(lo[i], hi[i], n) for i in range(domain.free_dim)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.free_dim)
    c = base + mesh @ domain.tangent.T
    return c[domain.contains(c, 1e-12)]


def _vertices(domain: GramPolytope) -> np.ndarray:
    pts = domain._offsets[np.all(np.abs(domain._maps) < 1e-12, axis=(1, 2))]
    return pts[domain.contains(pts, 1e-12)]


def _directions(domain: GramPolytope, ref: np.ndarray, h: float):
    """Candidate unit directions (ambient coordinates) into the domain from ``ref``."""
    k = domain.free_dim
    if k == 1:
        u = np.array([[1.0], [-1.0]])
    elif k == 2:
        ang = np.linspace(0.0, 2 * math.pi, 720, endpoint=False)
        u = np.column_stack([np.cos(ang), np.sin(ang)])
    else:
        n = 4000
        i = np.arange(n) + 0.5
        z = 1 - 2 * i / n
        r = np.sqrt(1 - z * z)
        ang = math.pi * (1 + math.sqrt(5)) * i
        u = np.column_stack([r * np.cos(ang), r * np.sin(ang), z])
    amb = u @ domain.tangent.T
    ok = domain.contains(ref + 4 * h * amb, 1e-13)
    return u[ok]


def _unit_from_angles(angles: np.ndarray, k: int) -> np.ndarray:
    if k == 2:
        return np.array([math.cos(angles[0]), math.sin(angles[0])])
    pol, az = angles
    return np.array([math.sin(pol) * math.cos(az), math.sin(pol) * math.sin(az), math.cos(pol)])


def _angles_from_unit(u: np.ndarray) -> np.ndarray:
    if len(u) == 2:
        return np.array([math.atan2(u[1], u[0])])
    return np.array([math.acos(max(-1.0, min(1.0, u[2]))), math.atan2(u[1], u[0])])


def reference_limit(query: ThresholdQuery, h: float = RICHARDSON_H,
                    ratio: _Ratio | None = None) -> tuple[float, float, np.ndarray]:
    """Optimal directional limit of ``g`` at the reference point.

    Returns ``(limit, error_estimate, direction)``; the direction is in
    ambient off-diagonal coordinates.
    """
    ratio = ratio or _Ratio(query)
    dom = query.domain
    ref = query.ref_offdiag

    def directional(u_tan: np.ndarray) -> tuple[float, float]:
        u = u_tan @ dom.tangent.T
        pts = ref + np.outer([h, 2 * h, 4 * h, 8 * h], u)
        if not np.all(dom.contains(pts[:3], 1e-13)):
            return math.inf, math.inf
        if not dom.contains(pts[3:], 1e-13)[0]:
            pts = pts[:3]
        lim, err = richardson_limit(ratio.ratio(pts))
        return ratio.sign * lim, err

    cands = _directions(dom, ref, h)
    if len(cands) == 0:
        raise NotConverged("no feasible direction at the reference point")
    # evaluate all candidate directions in one batch
    amb = cands @ dom.tangent.T
    pts = ref + (np.array([h, 2 * h, 4 * h])[None, :, None] * amb[:, None, :])
    vals = ratio.ratio(pts.reshape(-1, dom.dim)).reshape(len(cands), 3)
    w = np.array([8.0 / 3.0, -2.0, 1.0 / 3.0])
    lims = ratio.sign * (vals @ w)
    best = int(np.argmin(lims))
    u = cands[best]
    if dom.free_dim > 1:
        k = dom.free_dim
        a0 = _angles_from_unit(u)
        span = 2 * math.pi / 720 if k == 2 else 0.1
        a, _ = coordinate_golden(lambda ang: directional(_unit_from_angles(ang, k))[0], a0,
                                 a0 - 4 * span, a0 + 4 * span, np.full(len(a0), 2 * span), tol=1e-9)
        u = _unit_from_angles(a, k)
    lim, err = directional(u)
    return ratio.sign * lim, err, u @ dom.tangent.T


def threshold(query: ThresholdQuery, tol: float = 1e-6) -> ThresholdResult:
    """Infimum (inf mode) or supremum (sup mode) of the ratio ``g`` over the domain."""
    ratio = _Ratio(query)
    dom = query.domain
    ref = query.ref_offdiag
    grid = _grid(dom, query.grid_size)
    diff = ratio.differences(grid)
    dist = np.linalg.norm(grid - ref, axis=1)
    equivalent = np.all(np.abs(diff) < EQUIVALENCE_ATOL, axis=1)
    keep = (dist >= PUNCTURE) & ~equivalent
    grid, diff = grid[keep], diff[keep]
    if np.any(diff <= 0):
        bad = grid[np.any(diff <= 0, axis=1)][0]
        raise SignError(f"energy difference has the wrong sign at offdiag={bad.tolist()}; "
                        f"{query.reference} is not the optimizer for this mode")
    g = (ratio.weight * diff[:, 0] / diff[:, 1]) ** ratio.power
    obj = ratio.sign * g
    i = int(np.argmin(obj))
    best_c = grid[i]

    # refine the grid optimum in tangent coordinates
    base = best_c
    if dom.free_dim == 1 and dom.dim == 1:
        spacing = 0.5 / (query.grid_size - 1)
    else:
        coords = (_vertices(dom) - dom.project(np.zeros(dom.dim))[0]) @ dom.tangent
        spacing = float(np.max(coords.max(axis=0) - coords.min(axis=0))) / (query.grid_size - 1)

    def punctured(y: np.ndarray) -> float:
        c = base + y @ dom.tangent.T
        if not dom.contains(c, 1e-13) or np.linalg.norm(c - ref) < PUNCTURE:
            return math.inf
        d = ratio.differences(c[None])[0]
        if np.all(np.abs(d) < EQUIVALENCE_ATOL) or np.any(d <= 0):
            return math.inf
        return float(ratio.sign * (ratio.weight * d[0] / d[1]) ** ratio.power)

    k = dom.free_dim
    if k == 1:
        y, fy, _ = golden_section(lambda v: punctured(np.array([v])), -spacing, spacing, tol=1e-12)
        y = np.array([y])
    else:
        y, fy = coordinate_golden(punctured, np.zeros(k), np.full(k, -2 * spacing),
                                  np.full(k, 2 * spacing), np.full(k, spacing), tol=1e-11)
    if fy > obj[i]:
        y, fy = np.zeros(k), float(obj[i])
    grid_c = base + y @ dom.tangent.T
    grid_value = ratio.sign * fy

    lim, lim_err, _ = reference_limit(query, ratio=ratio)
    if ratio.sign * lim <= ratio.sign * grid_value:
        star, c_star, at_ref, err = lim, ref.copy(), True, lim_err
    else:
        star, c_star, at_ref = grid_value, grid_c, False
        # golden-section bracket converted to a lambda error (flat optimum)
        err = abs(punctured(y + 1e-9) - fy) if math.isfinite(punctured(y + 1e-9)) else 0.0
    if err > tol:
        raise NotConverged(f"threshold uncertainty {err:.3g} exceeds tol {tol:.3g}")
    return ThresholdResult(
        lambda_star=float(star),
        argmin_parameter=point_from_offdiag(c_star),
        offdiag=c_star,
        bracket=(float(star - err), float(star + err)),
        at_reference=at_ref,
        grid_optimum=float(grid_value),
        reference_limit=float(lim),
    )


def threshold_scaling(query: ThresholdQuery, a_ratio: float, b_ratio: float) -> float:
    """Factor by which the threshold moves when ``a -> a * a_ratio``, ``b -> b * b_ratio``."""
    f = query.potential
    return (a_ratio / b_ratio) ** (1.0 / (2.0 * (f.p - f.q)))
