"""Shared independent oracles: plain integer-box sums with no shared code."""

import itertools
import math

import numpy as np
import pytest


def box_vectors(d, k):
    axis = np.arange(-k, k + 1)
    pts = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return pts[np.any(pts != 0, axis=1)]


def box_quadratic(gram, k):
    m = box_vectors(len(gram), k).astype(float)
    return np.einsum("ni,ij,nj->n", m, gram, m)


def brute_zeta(gram, s, k):
    q = np.sort(box_quadratic(np.asarray(gram, float), k))[::-1]
    return float(np.sum(q ** (-s / 2)))


def brute_theta(gram, alpha, k):
    q = np.sort(box_quadratic(np.asarray(gram, float), k))[::-1]
    return 1.0 + float(np.sum(np.exp(-math.pi * alpha * q)))


def brute_shells(gram, r2, k):
    """(r2, count) pairs of all box vectors with Q <= r2, grouped at 1e-9."""
    m = box_vectors(len(gram), k).astype(float)
    q = np.einsum("ni,ij,nj->n", m, gram, m)
    q = np.sort(q[q <= r2 * (1 + 1e-12)])
    out = []
    for x in q:
        if out and x - out[-1][0] < 1e-9 * max(1.0, out[-1][0]):
            out[-1][1] += 1
        else:
            out.append([x, 1])
    return [(a, c) for a, c in out]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
