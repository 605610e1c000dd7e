import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lattice_bonds.families import (FamilyPoint2D, FamilyPoint3D, GramPolytope, gram_from_offdiag,
                                    offdiag_gradient)
from lattice_bonds.lattice import Lattice, bond_set, minimal_vectors


def test_2d_point_domain():
    FamilyPoint2D(math.pi / 3)
    FamilyPoint2D(math.pi / 2)
    with pytest.raises(ValueError):
        FamilyPoint2D(1.0)


def test_2d_gram_matches_basis():
    p = FamilyPoint2D(1.2)
    b = p.basis()
    assert np.allclose(p.gram(), b @ b.T)
    assert minimal_vectors(p.lattice())[0] == pytest.approx(1.0)


def test_3d_gram_formula():
    t, th, ph = 1.4, 0.7, 0.3
    p = FamilyPoint3D(t, th, ph)
    b = p.basis()
    assert np.allclose(p.gram(), b @ b.T)
    m, n, k = 2, -1, 3
    q = (m * m + n * n + k * k + 2 * m * n * math.cos(t) + 2 * m * k * math.sin(th) * math.cos(ph)
         + 2 * n * k * math.sin(th) * math.cos(t - ph))
    assert Lattice.from_gram(p.gram()).quadratic_form([m, n, k]) == pytest.approx(q)


def test_3d_offdiag_round_trip(rng):
    poly = GramPolytope.family(3)
    for c in poly.sample(50, rng):
        p = FamilyPoint3D.from_offdiag(c)
        assert np.allclose(p.offdiag(), c, atol=1e-12)


def test_3d_jacobian_fd():
    p = FamilyPoint3D(1.9, 0.8, -0.4)
    jac = p.jacobian()
    h = 1e-6
    for i in range(3):
        up = list(p.params)
        dn = list(p.params)
        up[i] += h
        dn[i] -= h
        fd = (FamilyPoint3D(*up).offdiag() - FamilyPoint3D(*dn).offdiag()) / (2 * h)
        assert np.allclose(jac[:, i], fd, atol=1e-8)


def test_named_points():
    fcc = FamilyPoint3D(math.pi / 3, math.asin(1 / math.sqrt(3)), math.pi / 6)
    assert np.allclose(fcc.offdiag(), [0.5, 0.5, 0.5])
    bcc = FamilyPoint3D.from_offdiag([-1 / 3] * 3)
    assert math.cos(bcc.t) == pytest.approx(-1 / 3)
    assert bcc.is_admissible()


def test_sc_seed_freezes_phi():
    p = FamilyPoint3D.from_offdiag([0.0, 0.0, 0.0])
    assert p.theta == 0.0 and p.phi == 0.0


@settings(max_examples=200, deadline=None)
@given(st.tuples(*[st.floats(-0.6, 0.6)] * 3))
def test_polytope_is_admissible_set(c):
    c = np.array(c)
    g = gram_from_offdiag(c)[0]
    inside = bool(GramPolytope.family(3).contains(c, 0.0)[0])
    if np.linalg.eigvalsh(g)[0] <= 1e-9:
        assert not inside or np.linalg.eigvalsh(g)[0] > 0
        return
    lam1, _ = minimal_vectors(Lattice.from_gram(g))
    margin = np.min(GramPolytope.family(3).ineq @ c - GramPolytope.family(3).rhs)
    if abs(margin) < 1e-9:
        return
    assert inside == (abs(lam1 - 1.0) <= 1e-9)


def test_projection_is_nearest_point(rng):
    from scipy.optimize import minimize
    poly = GramPolytope.family(3)
    for x in rng.normal(scale=0.8, size=(15, 3)):
        p = poly.project(x)[0]
        res = minimize(lambda y: np.sum((y - x) ** 2), np.zeros(3), method="SLSQP",
                       constraints=[{"type": "ineq", "fun": lambda y: poly.ineq @ y - poly.rhs}],
                       options={"ftol": 1e-15, "maxiter": 500})
        assert np.sum((p - x) ** 2) <= np.sum((res.x - x) ** 2) + 1e-9
        assert poly.contains(p, 1e-12)[0]


def test_projection_keeps_interior_points():
    poly = GramPolytope.family(3)
    c = np.array([[0.1, -0.2, 0.05]])
    assert np.array_equal(poly.project(c), c)


def test_face_restriction():
    face = GramPolytope.family(3).restricted(bond_set("D3star"))
    assert face.free_dim == 2
    s = face.sample(30, np.random.default_rng(0))
    assert np.allclose(s.sum(axis=1), -1.0)
    proj = face.project(np.array([[0.3, 0.1, -0.2]]))
    assert proj.sum() == pytest.approx(-1.0)


def test_rigid_restriction():
    rigid = GramPolytope.family(2).restricted(bond_set("A2"))
    assert rigid.free_dim == 0
    assert np.allclose(rigid.project(np.array([[0.1]])), [[0.5]])


def test_offdiag_gradient_chain():
    g = np.array([[[1.0, 2.0, 3.0], [2.0, 4.0, 5.0], [3.0, 5.0, 6.0]]])
    assert np.allclose(offdiag_gradient(g), [[4.0, 6.0, 10.0]])
