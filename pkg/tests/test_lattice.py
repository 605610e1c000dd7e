import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lattice_bonds.errors import CutoffTooLarge, SingularBasis
from lattice_bonds.lattice import (BondConstraint, Lattice, bond_set, build_lattice, canonical,
                                   enumerate_vectors, first_shells, in_constraint_class,
                                   minimal_vectors, shells)

from conftest import box_vectors, brute_shells

SQRT3 = math.sqrt(3.0)


def test_identity_basis_gives_unit_gram():
    lat = build_lattice(np.eye(2))
    assert np.array_equal(lat.gram, np.eye(2))


def test_triangular_basis_gram():
    lat = build_lattice([[1, 0], [0.5, SQRT3 / 2]])
    assert np.allclose(lat.gram, [[1, 0.5], [0.5, 1]], atol=1e-15)


def test_fcc_basis_has_unit_minimal_distance():
    lat = build_lattice(np.array([[1, 0, 1], [0, 1, 1], [1, 1, 0]]) / math.sqrt(2))
    lam1, vecs = minimal_vectors(lat)
    assert lam1 == pytest.approx(1.0, abs=1e-14)
    assert len(vecs) == 12


def test_singular_basis_rejected():
    with pytest.raises(SingularBasis):
        build_lattice([[1, 2], [2, 4]])
    with pytest.raises(SingularBasis):
        build_lattice([[1, 0, 0], [0, 1, 0]])


def test_scaling_multiplies_gram(rng):
    lat = build_lattice(rng.normal(size=(3, 3)))
    assert np.allclose(lat.scaled(2.5).gram, 6.25 * lat.gram)


def test_quadratic_form_matches_points(rng):
    lat = build_lattice(rng.normal(size=(3, 3)))
    m = rng.integers(-5, 6, size=(20, 3))
    p = lat.points(m)
    assert np.allclose(lat.quadratic_form(m), np.sum(p * p, axis=1))


def test_lattice_is_immutable():
    lat = canonical("A2")
    with pytest.raises(ValueError):
        lat.basis[0, 0] = 3.0


@pytest.mark.parametrize("name,count", [("SC(2)", 4), ("SC(3)", 6), ("A2", 6), ("D3", 12),
                                        ("D3star", 8)])
def test_canonical_minimal_vector_counts(name, count):
    lam1, vecs = minimal_vectors(canonical(name))
    assert lam1 == pytest.approx(1.0, abs=1e-12)
    assert len(vecs) == count


def test_canonical_scales_bond_length():
    lam1, vecs = minimal_vectors(canonical("D3star", 2.0))
    assert lam1 == pytest.approx(2.0, abs=1e-12)
    assert len(vecs) == 8


def test_sc3_minimal_vectors_are_unit_vectors():
    _, vecs = minimal_vectors(canonical("SC(3)"))
    expected = {tuple(s * e) for e in np.eye(3, dtype=int) for s in (1, -1)}
    assert {tuple(v) for v in vecs} == expected


def test_unknown_canonical_name():
    with pytest.raises(ValueError):
        canonical("E8")


def test_shells_square_lattice():
    dec = shells(canonical("SC(2)"), 4.1)
    assert dec.signature() == [(1.0, 4), (2.0, 4), (4.0, 4)]


@pytest.mark.parametrize("name,count", [("A2", 6), ("D3", 12)])
def test_shells_first_layer(name, count):
    dec = shells(canonical(name), 1.1)
    assert len(dec) == 1
    assert dec[0].count == count
    assert dec[0].r2 == pytest.approx(1.0, abs=1e-12)


def test_shell_vectors_sorted_and_symmetric():
    dec = shells(canonical("D3star"), 5.0)
    lat = canonical("D3star")
    for shell in dec:
        keys = [tuple(v) for v in shell.vectors]
        assert keys == sorted(keys)
        assert {tuple(-v) for v in shell.vectors} == set(keys)
        assert np.allclose(lat.quadratic_form(shell.vectors), shell.r2, rtol=1e-9)
    radii = [s.r2 for s in dec]
    assert all(b > a for a, b in zip(radii, radii[1:]))


def test_first_shells_count():
    dec = first_shells(canonical("SC(3)"), 4)
    assert dec.signature() == [(1.0, 6), (2.0, 12), (3.0, 8), (4.0, 6)]


def test_budget_guard():
    with pytest.raises(CutoffTooLarge):
        shells(canonical("SC(3)"), 1e6, budget=1000)


def test_near_degenerate_basis_still_complete():
    lat = build_lattice([[1.0, 0.0], [0.999, 0.01]])
    m, q = enumerate_vectors(lat.gram, 2.0)
    expected = sum(c for _, c in brute_shells(lat.gram, 2.0, 250))
    assert len(m) == expected


def _random_gram(draw_vals, d):
    g = np.eye(d)
    idx = 0
    for i in range(d):
        for j in range(i + 1, d):
            g[i, j] = g[j, i] = draw_vals[idx]
            idx += 1
    diag = np.array(draw_vals[idx:idx + d])
    g[np.diag_indices(d)] = diag
    return g


@settings(max_examples=40, deadline=None)
@given(d=st.sampled_from([2, 3]), data=st.data())
def test_enumeration_matches_box_scan(d, data):
    n_off = d * (d - 1) // 2
    off = data.draw(st.lists(st.floats(-1, 1), min_size=n_off, max_size=n_off))
    diag = [abs(x) + sum(abs(v) for v in off) + 0.2
            for x in data.draw(st.lists(st.floats(0.1, 1.5), min_size=d, max_size=d))]
    gram = _random_gram(off + diag, d)
    r2 = data.draw(st.floats(0.5, 6.0))
    mu = np.linalg.eigvalsh(gram)[0]
    k = int(math.ceil(math.sqrt(r2 / mu))) + 1
    lat = Lattice.from_gram(gram)
    got = shells(lat, r2).signature()
    want = brute_shells(gram, r2, k)
    assert [c for _, c in got] == [c for _, c in want]
    assert np.allclose([r for r, _ in got], [r for r, _ in want], rtol=1e-9)


@settings(max_examples=40, deadline=None)
@given(d=st.sampled_from([2, 3]), seed=st.integers(0, 10**6))
def test_shell_properties(d, seed):
    rng = np.random.default_rng(seed)
    basis = rng.normal(size=(d, d))
    if abs(np.linalg.det(basis)) < 0.05:
        basis += 0.5 * np.eye(d)
    lat = build_lattice(basis)
    dec = first_shells(lat, 3)
    lam1, vecs = minimal_vectors(lat)
    counts = [s.count for s in dec]
    assert all(c % 2 == 0 for c in counts)
    assert counts[0] == len(vecs)
    assert dec[0].r2 == pytest.approx(lam1**2, rel=1e-9)
    # kissing numbers: 6 in the plane, 12 in space
    assert counts[0] <= (6 if d == 2 else 12)
    lam = 1.7
    scaled = shells(lat.scaled(lam), lam**2 * dec.cutoff * 0.999)
    plain = shells(lat, dec.cutoff * 0.999)
    assert [s.count for s in scaled] == [s.count for s in plain]
    for a, b in zip(scaled, plain):
        assert np.array_equal(a.vectors, b.vectors)
        assert a.r2 == pytest.approx(lam**2 * b.r2, rel=1e-12)


def test_bond_constraint_validation():
    with pytest.raises(ValueError):
        BondConstraint(np.array([[1, 0]]))
    with pytest.raises(ValueError):
        BondConstraint(np.array([[0, 0], [1, 0], [-1, 0]]))
    with pytest.raises(ValueError):
        BondConstraint(np.zeros((0, 2), dtype=int))
    c = bond_set("D3")
    assert c.coordination == 12 and c.coordination % 2 == 0


def test_constraint_class_membership():
    assert in_constraint_class(canonical("SC(2)"), bond_set("Z2"), strict=True)
    assert not in_constraint_class(canonical("A2"), bond_set("Z2"), strict=True)
    assert in_constraint_class(canonical("A2"), bond_set("Z2"), strict=False)
    assert in_constraint_class(canonical("D3star"), bond_set("Z3"), strict=False)
    assert not in_constraint_class(canonical("D3star"), bond_set("Z3"), strict=True)
    assert in_constraint_class(canonical("D3star"), bond_set("D3star"), strict=True)


@pytest.mark.parametrize("name", ["A2", "D3", "D3star", "SC(3)"])
def test_bond_sets_are_minimal_vectors(name):
    _, vecs = minimal_vectors(canonical(name))
    assert {tuple(v) for v in vecs} == {tuple(v) for v in bond_set(name).vectors}
