import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from mpmath import iv

from towerdomains.errors import ValidationError
from towerdomains.intervals import contains, lo_q, precision
from towerdomains.lattice import (
    LatticeInstance,
    closest_vector,
    covering_radius_small,
    enumerate_ball,
    lll_reduce,
    lovasz_holds,
    shortest_vector_l2,
    shortest_vector_linf,
    voronoi_relevant_vectors,
)

Z2 = LatticeInstance.from_basis([[1, 0], [0, 1]])
HEX = LatticeInstance.from_gram([[2, 1], [1, 2]])
HEX1 = LatticeInstance.from_gram([[1, Fraction(1, 2)], [Fraction(1, 2), 1]])
D4 = LatticeInstance.from_basis([[1, 1, 0, 0], [1, -1, 0, 0], [0, 1, -1, 0], [0, 0, 1, -1]])


def coefficient_box(gram, radius2):
    """All x with xᵀGx ≤ R lie in |x_i| ≤ √(R·(G⁻¹)_ii)."""
    ginv = np.linalg.inv(np.array(gram, dtype=float))
    return [int(math.floor(math.sqrt(float(radius2) * ginv[i, i]) + 1e-9)) for i in range(len(gram))]


def brute_force_min(lat):
    r2 = min(lat.gram[i][i] for i in range(lat.rank))
    box = coefficient_box(lat.gram, r2)
    assume(math.prod(2 * b + 1 for b in box) <= 20_000)
    best = None
    for x in product(*[range(-b, b + 1) for b in box]):
        if any(x):
            v = lat.norm2(x)
            best = v if best is None else min(best, v)
    return best


bases = st.lists(st.lists(st.integers(-6, 6), min_size=3, max_size=3), min_size=3, max_size=3)


def test_lll_examples():
    assert lll_reduce(Z2).gram == Z2.gram
    red = lll_reduce(LatticeInstance.from_basis([[1, 0], [100, 1]]))
    assert sorted(tuple(abs(x) for x in row) for row in red.basis) == [(0, 1), (1, 0)]
    assert lll_reduce(HEX).gram == HEX.gram


@settings(max_examples=40, deadline=None)
@given(bases)
def test_lll_properties(rows):
    assume(round(np.linalg.det(np.array(rows, dtype=float))) != 0)
    lat = LatticeInstance.from_basis(rows)
    red = lll_reduce(lat)
    assert red.determinant() == lat.determinant()
    assert lovasz_holds(red)
    U = [[Fraction(x) for x in r] for r in red.transform]
    assert abs(round(np.linalg.det(np.array(U, dtype=float)))) == 1
    for i, row in enumerate(red.basis):
        assert list(row) == [sum(U[i][j] * lat.basis[j][k] for j in range(3)) for k in range(3)]


def test_indefinite_gram_rejected():
    with pytest.raises(ValidationError):
        lll_reduce(LatticeInstance.from_gram([[1, 2], [2, 1]]))


def test_svp_examples():
    assert shortest_vector_l2(Z2)[1] == 1
    assert shortest_vector_l2(HEX)[1] == 2


@settings(max_examples=40, deadline=None)
@given(bases)
def test_svp_matches_brute_force(rows):
    assume(round(np.linalg.det(np.array(rows, dtype=float))) != 0)
    lat = LatticeInstance.from_basis(rows)
    x, sq = shortest_vector_l2(lat)
    assert lat.norm2(x) == sq
    assert sq == brute_force_min(lat)


def test_enumerate_ball_counts():
    pts = {tuple(x) for x, _ in enumerate_ball(HEX.gram, [0, 0], 2)}
    assert len(pts) == 7          # origin and the six minimal vectors
    assert len({tuple(x) for x, _ in enumerate_ball(D4.gram, [0] * 4, 2)}) == 25


def test_svp_linf():
    x, linf = shortest_vector_linf(Z2, 1)
    assert sorted(abs(c) for c in x) == [0, 1] and contains(linf, 1)
    assert shortest_vector_linf(Z2.scaled(3), 1) is None
    with precision(128):
        r5 = iv.sqrt(iv.mpf(5))
        basis = ((iv.mpf(1), iv.mpf(1)), ((1 + r5) / 2, (1 - r5) / 2))
        bound = iv.mpf(5) ** iv.mpf(0.25)
    q5 = LatticeInstance.from_gram([[2, 1], [1, 3]], basis)
    res = shortest_vector_linf(q5, bound)
    assert res is not None and lo_q(res[1]) <= 1


def test_cvp_examples():
    res = closest_vector(Z2, [Fraction(3, 5), Fraction(3, 5)])
    assert res.coefficients == [1, 1] and res.squared_distance == Fraction(8, 25)
    res = closest_vector(HEX, [2, -3])
    assert res.coefficients == [2, -3] and res.squared_distance == 0
    hole = covering_radius_small(HEX).deep_hole
    assert closest_vector(HEX, hole).squared_distance == covering_radius_small(HEX).squared_upper


def test_cvp_ambient_projection():
    lat = LatticeInstance.from_basis([[1, 0, 0], [0, 1, 0]])
    res = closest_vector(lat, [Fraction(1, 5), Fraction(9, 10), 2], ambient=True)
    assert res.coefficients == [0, 1]
    assert res.squared_distance == Fraction(1, 25) + Fraction(1, 100) + 4


@settings(max_examples=30, deadline=None)
@given(bases, st.lists(st.fractions(-5, 5, max_denominator=7), min_size=3, max_size=3))
def test_cvp_is_closest(rows, target):
    assume(round(np.linalg.det(np.array(rows, dtype=float))) != 0)
    lat = LatticeInstance.from_basis(rows)
    res = closest_vector(lat, target)
    base = [round(t) for t in target]
    diff = [b - t for b, t in zip(base, target)]
    assert res.squared_distance <= lat.norm2(diff)
    for delta in product((-1, 0, 1), repeat=3):
        y = [b + d - t for b, d, t in zip(base, delta, target)]
        assert res.squared_distance <= lat.norm2(y)


def test_covering_radius_examples():
    assert covering_radius_small(Z2).squared_upper == Fraction(1, 2)
    assert covering_radius_small(HEX1).squared_upper == Fraction(1, 3)
    assert covering_radius_small(LatticeInstance.from_gram([[1]])).squared_upper == Fraction(1, 4)
    d4 = covering_radius_small(D4)
    assert d4.squared_lower == d4.squared_upper == 1
    assert len(voronoi_relevant_vectors(D4)) == 24


@pytest.mark.parametrize("lat", [Z2, HEX1, D4, LatticeInstance.from_gram([[3, 1, 0], [1, 4, 1], [0, 1, 5]])])
def test_bounds_mode_encloses_exact(lat):
    exact = covering_radius_small(lat, mode="exact")
    bounds = covering_radius_small(lat, mode="bounds")
    assert bounds.squared_lower <= exact.squared_lower <= bounds.squared_upper


def test_json_round_trip():
    lat = lll_reduce(LatticeInstance.from_basis([[1, 2, 3], [4, 5, 6], [7, 8, 10]]))
    back = LatticeInstance.from_json(lat.to_json())
    assert back.gram == lat.gram and back.basis == lat.basis
