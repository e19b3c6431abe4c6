import json
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st
from mpmath import iv

from towerdomains.domain import (
    BOUND_COLUMNS,
    DomainBasis,
    bound_report,
    build_domain,
    component_gram,
    covolume_squared,
    domain_radii,
    expected_covolume_squared,
    in_box,
    index_in_ON,
    is_block_orthogonal,
    nu2_constant,
    nuinf_constant,
    reduce_point,
    reports_to_csv,
    residue_element,
)
from towerdomains.errors import CapacityError, PrecisionError
from towerdomains.field import TowerDescriptor, norm_L_over_Q
from towerdomains.integers import is_integral
from towerdomains.intervals import contains, frac, hi, hi_q, lo, lo_q, mid, precision


def shift_element(dom, coords):
    out = dom.tower.zero()
    for (t, d), k in coords.items():
        if k:
            out = out + dom.sublattice_generator(t, d) * k
    return out


# ----------------------------------------------------------------- degenerate domains

def test_q5_domain(domain5, q5):
    assert [str(b) for b in domain5.basis_T(0)] == ["1", "1/2 + 1/2*√5"]
    assert domain5.tower.relative_degree == 1
    assert index_in_ON(domain5) == 1


def test_q5_radii(domain5):
    r = domain_radii(domain5, "vertex")
    assert r.l2_squared == 7
    assert contains(r.linf, 0) is False
    target = (3 + math.sqrt(5)) / 2
    assert float(lo(r.linf)) <= target + 1e-15 and target - 1e-15 <= float(hi(r.linf))
    assert r.linf_vertex == (1, 1)


def test_q5_vertex_values(domain5):
    b0, b1 = domain5.basis_T(0)
    from towerdomains.field import inner_product_exact
    vals = sorted(inner_product_exact(v, v) for v in (b0 * 0, b0, b1, b0 + b1))
    assert vals == [0, 2, 3, 7]


def test_rational_domain():
    dom = build_domain(TowerDescriptor(()))
    r = domain_radii(dom)
    assert r.l2_squared == 1 and contains(r.linf, 1)


def test_q5_report(domain5):
    rep = bound_report(domain5)
    assert rep.log_n_l2 == pytest.approx(math.log2(math.sqrt(7)), abs=1e-12)
    assert rep.log_n_l2 == pytest.approx(1.4037, abs=1e-4)
    assert rep.index == 1
    assert rep.target_nu2 == pytest.approx(nu2_constant() + 2 * rep.eps_hat)


def test_constants():
    assert nu2_constant() == pytest.approx(0.5 + math.log(math.sqrt(5) / 2) / math.log(2), abs=1e-15)
    assert nuinf_constant() == pytest.approx(math.log(1.5) / math.log(2), abs=1e-15)


# ----------------------------------------------------------------- fixture tower

def test_generators_integral(domain41):
    for g in domain41.g:
        assert is_integral(g) and not g.is_zero()
        assert abs(norm_L_over_Q(g)) >= 1


def test_h_linf_within_minkowski(domain41):
    with precision(128):
        bound = iv.mpf(205) ** (iv.mpf(1) / 4)
    for h in domain41.h_linf:
        assert hi_q(h) <= lo_q(bound)


def test_component_gram_matches_coordinates(tower41):
    from towerdomains.embed import component_coordinates
    from towerdomains.integers import lambda_basis
    gram = component_gram(tower41, 1)
    rows = [component_coordinates(tower41.lift(lam) * tower41.q(1), 1) for lam in lambda_basis(tower41.base)]
    with precision(128):
        for i, ri in enumerate(rows):
            for j, rj in enumerate(rows):
                assert contains(sum((x * y for x, y in zip(ri, rj)), iv.mpf(0)), gram[i][j])


def test_index_and_covolume(domain41):
    idx = index_in_ON(domain41)
    assert idx == 41
    assert covolume_squared(domain41) == expected_covolume_squared(domain41, idx)
    assert is_block_orthogonal(domain41)


def test_reduce_examples(domain41, tower41):
    res = reduce_point(domain41, tower41.zero())
    assert res.residue == tower41.zero() and not any(res.shift_coords.values())
    inside = residue_element(domain41, {(0, 1): Fraction(1, 3), (1, 2): Fraction(1, 5)})
    res = reduce_point(domain41, inside)
    assert res.residue == inside and not any(res.shift_coords.values())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_reduction_properties(domain41, tower41, seed):
    rng = random.Random(seed)
    alpha = tower41.random_element(rng, height=40, den=7)
    res = reduce_point(domain41, alpha)
    assert in_box(domain41, res.residue_coeffs)
    assert alpha == res.residue + res.shift
    assert residue_element(domain41, res.residue_coeffs) == res.residue
    assert res.shift == shift_element(domain41, res.shift_coords)
    again = reduce_point(domain41, res.residue)
    assert again.residue == res.residue and not any(again.shift_coords.values())
    omega = shift_element(domain41, {k: rng.randint(-9, 9) for k in domain41.keys()})
    moved = reduce_point(domain41, alpha + omega)
    assert moved.residue == res.residue and moved.shift == res.shift + omega


def test_numeric_reduction_agrees(domain41, tower41):
    rng = random.Random(11)
    for _ in range(10):
        alpha = tower41.random_element(rng, height=30, den=5)
        exact = reduce_point(domain41, alpha)
        with precision(domain41.bits):
            num = reduce_point(domain41, {k: frac(v) for k, v in alpha.coeffs.items()})
        assert num.shift_coords == exact.shift_coords
        for k, v in exact.residue_coeffs.items():
            assert contains(num.residue_coeffs[k], v)


def test_numeric_reduction_straddle(domain5, q5):
    with precision(64):
        point = {(0, 0): iv.mpf(["-1e-30", "1e-30"])}
    with pytest.raises(PrecisionError):
        reduce_point(domain5, point)


def test_fixture_radii(domain41):
    vert = domain_radii(domain41, "vertex")
    tri = domain_radii(domain41, "triangle")
    assert vert.l2_squared == Fraction(825, 2)
    assert float(mid(vert.linf)) == pytest.approx(18.850999894860966, abs=1e-12)
    assert hi_q(vert.l2) <= lo_q(tri.l2) and hi_q(vert.linf) <= lo_q(tri.linf)
    with pytest.raises(CapacityError):
        domain_radii(domain41, "vertex", vertex_cap=16)


def test_fixture_report(domain41):
    rep = bound_report(domain41)
    assert rep.index == 41 and rep.n == 8
    assert rep.log_n_l2 == pytest.approx(1.448041718189, abs=1e-10)
    assert rep.log_n_linf == pytest.approx(1.412189714617, abs=1e-10)
    assert rep.eps_hat == pytest.approx(1.265480931117, abs=1e-10)
    csv_text = reports_to_csv([rep])
    assert csv_text.splitlines()[0].split(",") == BOUND_COLUMNS


def test_domain_json_round_trip(domain41):
    back = DomainBasis.from_obj(json.loads(domain41.to_json()))
    assert back.g == domain41.g and back.order == domain41.order
    assert back.to_json() == domain41.to_json()
