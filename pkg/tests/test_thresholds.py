import math

import numpy as np
import pytest

from lattice_bonds.errors import SignError
from lattice_bonds.families import gram_from_offdiag
from lattice_bonds.phases import SQUARE, TRIANGULAR, minimize_over_family_2d
from lattice_bonds.potentials import LennardJones, gram_energy
from lattice_bonds.thresholds import (INF_MODE, SUP_MODE, ThresholdQuery, _Ratio, reference_limit,
                                      threshold, threshold_scaling)

LJ = LennardJones(6, 3, 1, 2)


@pytest.fixture(scope="module")
def z2():
    return threshold(ThresholdQuery.for_reference("Z2", LJ))


@pytest.fixture(scope="module")
def a2():
    return threshold(ThresholdQuery.for_reference("A2", LJ))


def test_square_threshold(z2):
    assert z2.lambda_star == pytest.approx(0.7628683, abs=1e-5)
    assert z2.at_reference


def test_triangular_threshold(a2):
    # the supremum is attained at the triangular end and equals the minimizing bond length
    assert a2.lambda_star == pytest.approx(0.9901936, abs=1e-6)
    assert a2.bracket[0] <= a2.lambda_star <= a2.bracket[1]


def test_sign_structure_on_grid():
    for name in ("Z2", "A2"):
        q = ThresholdQuery.for_reference(name, LJ)
        r = _Ratio(q)
        c = np.linspace(0.0, 0.5, 401)[:, None]
        c = c[np.abs(c[:, 0] - q.ref_offdiag[0]) > 1e-4]
        assert np.all(r.differences(c) > 0)


def test_wrong_mode_raises_sign_error():
    q = ThresholdQuery.for_reference("Z2", LJ)
    wrong = ThresholdQuery("Z2", LJ, SUP_MODE, q.domain, q.ref_offdiag, 256)
    with pytest.raises(SignError):
        threshold(wrong)


def test_scaling_matches_recomputation(z2):
    factor = threshold_scaling(ThresholdQuery.for_reference("Z2", LJ), 2.0, 1.0)
    assert factor == pytest.approx(2.0 ** (1 / 6), rel=1e-14)
    scaled = threshold(ThresholdQuery.for_reference("Z2", LennardJones(6, 3, 2, 2)))
    assert scaled.lambda_star == pytest.approx(z2.lambda_star * factor, rel=1e-10)


def test_limit_matches_nearby_ratio():
    for name in ("Z2", "A2"):
        q = ThresholdQuery.for_reference(name, LJ)
        lim, _, _ = reference_limit(q)
        ref = q.ref_offdiag[0]
        near = ref + (1e-3 if ref == 0.0 else -1e-3)
        g = _Ratio(q).ratio(np.array([[near]]))[0]
        assert g == pytest.approx(lim, rel=1e-3)


def test_sandwich_square(z2):
    eps = 1e-3
    below = minimize_over_family_2d(z2.lambda_star * (1 - eps), LJ)
    above = minimize_over_family_2d(z2.lambda_star * (1 + eps), LJ)
    assert below.label == SQUARE
    assert above.label != SQUARE


def test_sandwich_triangular(a2):
    eps = 1e-3
    below = minimize_over_family_2d(a2.lambda_star * (1 - eps), LJ)
    above = minimize_over_family_2d(a2.lambda_star * (1 + eps), LJ)
    assert below.label != TRIANGULAR
    assert above.label == TRIANGULAR


def test_face_queries_live_on_face():
    for name in ("D3star", "D3"):
        q = ThresholdQuery.for_reference(name, LJ)
        assert q.domain.free_dim == 2
        assert q.domain.contains(q.ref_offdiag, 1e-14)[0]
    assert ThresholdQuery.for_reference("Z3", LJ).mode == INF_MODE


def test_unknown_reference():
    with pytest.raises(ValueError):
        ThresholdQuery.for_reference("hex", LJ)


def test_bcc_threshold_is_interior():
    res = threshold(ThresholdQuery.for_reference("D3star", LJ))
    assert not res.at_reference
    assert abs(np.sum(res.offdiag) + 1.0) < 1e-12
    assert res.lambda_star < res.reference_limit
    # at the threshold the optimal face lattice and the reference have equal energy
    grams = gram_from_offdiag(np.vstack([res.offdiag, np.full(3, -1 / 3)]))
    e = gram_energy(grams, LJ, res.lambda_star)
    assert e[0] == pytest.approx(e[1], rel=1e-9)
