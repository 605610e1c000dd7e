import math
import warnings

import numpy as np
import pytest

from lattice_bonds.errors import NonMonotonePhases
from lattice_bonds.families import FamilyPoint2D, GramPolytope, gram_from_offdiag
from lattice_bonds.lattice import canonical
from lattice_bonds.phases import (BCC, FCC, RHOMBIC2D, RHOMBIC3D, SC, SQUARE, TRIANGULAR,
                                  _warn_non_monotone, classify, find_transitions, global_optimum,
                                  lambda_grid, minimize_over_family_2d, minimize_over_family_3d,
                                  resolve_threads, seed_rng, sweep)
from lattice_bonds.potentials import Gaussian, LennardJones, energy
from lattice_bonds.sums import zeta_gram

LJ = LennardJones(6, 3, 1, 2)


@pytest.mark.parametrize("lam,label", [(0.7, SQUARE), (0.9, RHOMBIC2D), (4.0, TRIANGULAR)])
def test_2d_examples(lam, label):
    assert minimize_over_family_2d(lam, LJ).label == label


def test_2d_minimizer_beats_grid():
    p = minimize_over_family_2d(0.9, LJ)
    ts = np.linspace(math.pi / 3, math.pi / 2, 301)
    lat = [FamilyPoint2D(t).lattice().scaled(0.9) for t in ts[::30]]
    assert all(p.energy <= energy(L, LJ).value + 1e-9 for L in lat)


def test_2d_rhombic_angle_monotone():
    pts = sweep(lambda_grid(0.77, 0.98, 0.01), LJ, 2)
    ts = [p.params.t for p in pts]
    assert all(p.label == RHOMBIC2D for p in pts)
    assert all(b <= a + 1e-9 for a, b in zip(ts, ts[1:]))


def test_2d_energy_continuous():
    # envelope theorem: dE_min/dlam is the partial derivative at the minimizer,
    # so the trapezoid rule on it must reproduce each energy step
    pts = sweep(lambda_grid(0.6, 1.2, 0.0025), LJ, 2)
    lam = np.array([p.lam for p in pts])
    e = np.array([p.energy for p in pts])
    z = zeta_gram(gram_from_offdiag(np.array([p.offdiag for p in pts])), [12.0, 6.0])
    de = -12 * LJ.a * lam**-13 * z[:, 0] + 6 * LJ.b * lam**-7 * z[:, 1]
    trap = 0.5 * (de[1:] + de[:-1]) * np.diff(lam)
    assert np.allclose(np.diff(e), trap, rtol=0, atol=1e-3 * np.max(np.abs(np.diff(e))))


def test_2d_transitions():
    with warnings.catch_warnings():
        warnings.simplefilter("error", NonMonotonePhases)
        tr = find_transitions(LJ, 2, (0.6, 1.2), step=0.01)
    assert [(t.label_a, t.label_b) for t in tr] == [(SQUARE, RHOMBIC2D), (RHOMBIC2D, TRIANGULAR)]
    assert tr[0].lambda_star == pytest.approx(0.76287, abs=2e-4)
    assert tr[1].lambda_star == pytest.approx(0.99019, abs=2e-4)
    assert all(t.bracket[1] - t.bracket[0] <= 1e-4 for t in tr)


@pytest.mark.parametrize("lam,label", [(0.70, SC), (1.0, FCC)])
def test_3d_examples(lam, label):
    assert minimize_over_family_3d(lam, LJ, n_random=50).label == label


def test_3d_minimizer_beats_bcc_at_092():
    p = minimize_over_family_3d(0.92, LJ)
    bcc = energy(canonical("D3STAR").scaled(0.92), LJ).value
    mine = energy(p.params.lattice().scaled(0.92), LJ).value
    assert mine == pytest.approx(p.energy, rel=1e-9)
    assert mine < bcc
    assert p.label == RHOMBIC3D


def test_3d_result_admissible():
    p = minimize_over_family_3d(0.85, LJ, n_random=40)
    assert GramPolytope.family(3).contains(np.array(p.offdiag), 1e-12)[0]
    assert p.params.is_admissible()


def test_3d_constraint_class_face():
    from lattice_bonds.lattice import bond_set
    p = minimize_over_family_3d(1.2, LJ, constraint_class=bond_set("D3STAR"), n_random=20)
    assert sum(p.offdiag) == pytest.approx(-1.0, abs=1e-12)
    assert p.label == FCC


def test_seed_rng_depends_on_value_not_position():
    a = seed_rng(3, 0.915).random(4)
    b = seed_rng(3, 0.915).random(4)
    c = seed_rng(4, 0.915).random(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_classify_examples():
    assert classify(FamilyPoint2D(math.pi / 2)) == SQUARE
    assert classify(FamilyPoint2D(math.pi / 3)) == TRIANGULAR
    assert classify(FamilyPoint2D(1.3)) == RHOMBIC2D
    assert classify(np.zeros(3)) == SC
    assert classify(np.full(3, -1 / 3)) == BCC
    assert classify(np.array([0.5, 0.5, 0.5])) == FCC
    assert classify(np.array([-0.5, -0.5, 0.0])) == FCC
    assert classify(np.array([0.2, 0.1, 0.0])) == RHOMBIC3D


def test_gaussian_global_optimum_at_boundary():
    lam, point, at_boundary = global_optimum(Gaussian(1.0), 2, (0.8, 1.3), tol=1e-4)
    # Gaussian energy decreases with bond length, so the minimum sits at the upper end,
    # where the square lattice has the least theta among the family
    assert at_boundary and lam == pytest.approx(1.3)
    assert point.label == SQUARE


def test_threads_match_serial(monkeypatch):
    monkeypatch.delenv("LATTICE_THREADS", raising=False)
    grid = [0.72, 0.9, 1.0]
    one = sweep(grid, LJ, 3, threads=1, n_random=10)
    two = sweep(grid, LJ, 3, threads=2, n_random=10)
    assert [(p.label, p.energy, p.offdiag) for p in one] == [(p.label, p.energy, p.offdiag) for p in two]


def test_resolve_threads_env(monkeypatch):
    monkeypatch.setenv("LATTICE_THREADS", "3")
    assert resolve_threads(8) == 3
    monkeypatch.delenv("LATTICE_THREADS")
    assert resolve_threads(2) == 2


def test_non_monotone_warning():
    with pytest.warns(NonMonotonePhases):
        _warn_non_monotone([SQUARE, RHOMBIC2D, SQUARE], 2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        _warn_non_monotone([SC, RHOMBIC3D, BCC, RHOMBIC3D, FCC], 3)


def test_sweep_records_errors():
    pts = sweep([0.9], LennardJones(1, 0.5), 2)
    assert pts[0].label == "error" and pts[0].error


def test_lambda_grid():
    assert lambda_grid(0.6, 0.62, 0.005) == [0.6, 0.605, 0.61, 0.615, 0.62]
    with pytest.raises(ValueError):
        lambda_grid(1.0, 0.5, 0.1)
    with pytest.raises(ValueError):
        sweep([1.0, 0.9], LJ, 2)


def test_global_optimum_matches_closed_form():
    # for LJ(6,3,1,2) the fixed-lattice optimum is lam^6 = zeta(12) / zeta(6)
    z = zeta_gram(gram_from_offdiag(np.array([[0.5]])), [12.0, 6.0])[0]
    lam, point, at_boundary = global_optimum(LJ, 2, (0.8, 1.3), tol=1e-6)
    assert point.label == TRIANGULAR and not at_boundary
    assert lam == pytest.approx((z[0] / z[1]) ** (1 / 6), abs=1e-8)
