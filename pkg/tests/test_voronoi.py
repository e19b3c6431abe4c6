import math
from fractions import Fraction

import pytest
import sympy
from mpmath import mp

from towerdomains.errors import ValidationError
from towerdomains.intervals import hi, lo, lo_q, hi_q, mid
from towerdomains.voronoi import (
    CYCLO_COLUMNS,
    FieldSpec,
    covering_radius_field,
    cyclo_log_root_disc,
    cyclo_scan,
    cyclotomic_discriminant,
    euler_phi,
    field_report,
    min_norm_check,
    mobius,
    volbound_eval,
)

Q = FieldSpec.multiquadratic()
QI = FieldSpec.multiquadratic(-1)
Q5 = FieldSpec.multiquadratic(5)
Z3 = FieldSpec.cyclotomic(3)
Z5 = FieldSpec.cyclotomic(5)


def near(x, value, tol=1e-12):
    return float(lo(x)) - tol <= value <= float(hi(x)) + tol


def test_number_theory_helpers():
    assert [euler_phi(m) for m in range(1, 13)] == [int(sympy.totient(m)) for m in range(1, 13)]
    assert [mobius(m) for m in range(1, 31)] == [int(sympy.mobius(m)) for m in range(1, 31)]


def test_field_invariants():
    assert (QI.degree, QI.r2, QI.discriminant) == (2, 1, 4)
    assert (Z5.degree, Z5.r2, Z5.discriminant) == (4, 2, 125)
    assert Q5.discriminant == 5 and Q.degree == 1
    with pytest.raises(ValidationError):
        FieldSpec.from_obj({"nothing": 1})


@pytest.mark.parametrize("fld,sq,equality", [(Q, 1, False), (QI, 1, True), (Z3, 1, True), (Q5, 2, False),
                                             (Z5, 2, True)])
def test_minimum_norm(fld, sq, equality):
    mn = min_norm_check(fld)
    assert mn.squared == sq and mn.holds
    assert mn.equality == equality
    assert mn.bound_squared == Fraction(fld.degree, 2)


def test_cm_fields_attain_half_degree():
    # ‖1‖² = n/2 on every CM field
    for m in (3, 4, 5, 7, 8, 12):
        assert min_norm_check(FieldSpec.cyclotomic(m)).equality


@pytest.mark.parametrize("fld,mu2", [(Q, Fraction(1, 4)), (QI, Fraction(1, 2)), (Z3, Fraction(1, 3))])
def test_covering_radii(fld, mu2):
    cr = covering_radius_field(fld)
    assert cr.squared_lower == cr.squared_upper == mu2
    assert hi_q(cr.interval) - lo_q(cr.interval) < Fraction(1, 10 ** 9)


def test_volume_inequality_examples():
    qi = volbound_eval(QI)
    assert qi.holds and near(qi.lhs, 1) and near(qi.rhs, math.pi / 2)
    z3 = volbound_eval(Z3)
    assert z3.holds and near(z3.lhs, math.sqrt(3) / 2, 1e-9) and near(z3.rhs, math.pi / 3, 1e-9)
    q = volbound_eval(Q)
    assert q.holds and q.exact and near(q.lhs, 1) and near(q.rhs, 1)


def test_field_report_serializes():
    obj = field_report(Q5).to_obj()
    assert obj["mu_squared"] == ["9/10", "9/10"]
    assert obj["volume_inequality"]["holds"]


def test_log_root_disc_examples():
    assert cyclo_log_root_disc(1).value() == 0
    assert near(cyclo_log_root_disc(4).value(), math.log(2))
    assert near(cyclo_log_root_disc(3).value(), 0.5 * math.log(3))
    assert cyclo_log_root_disc(4).discriminant() == 4
    assert cyclo_log_root_disc(3).discriminant() == 3


ORACLE_MS = [m for m in range(1, 31) if euler_phi(m) <= 16]


@pytest.mark.parametrize("m", ORACLE_MS)
def test_against_resultant_discriminant(m):
    x = sympy.symbols("x")
    disc = abs(int(sympy.discriminant(sympy.cyclotomic_poly(m, x), x))) if m > 2 else 1
    phi = euler_phi(m)
    lrd = cyclo_log_root_disc(m)
    assert lrd.discriminant() == disc == cyclotomic_discriminant(m)
    # exact coefficients: c_p·φ(m) is the p-adic valuation of the discriminant
    vals = sympy.factorint(disc)
    assert {p: c * phi for p, _, c in lrd.terms if c} == {p: Fraction(e) for p, e in vals.items()}
    with mp.workprec(200):
        expected = mp.log(disc) / phi
    assert near(lrd.value(256), float(expected))


def test_scan_small():
    scan = cyclo_scan(100, Fraction(1, 10))
    assert scan.exceptional == (3, 5, 6, 10, 12, 15, 21, 30, 35, 42, 45, 60, 70, 90)
    rows = {r.m: r for r in scan.rows}
    assert rows[4].holds and not rows[3].holds
    assert rows[4].e_terms[0][2] == Fraction(1, 10) * 2 - 1
    # e(2, 1) = (ε − 1) log 2 < 0
    assert rows[2].e_terms[0][2] == Fraction(1, 10) - 1
    head = scan.to_csv().splitlines()[0]
    assert head.split(",") == CYCLO_COLUMNS


def test_scan_independent_of_workers():
    a = cyclo_scan(6000, Fraction(1, 10), workers=1)
    b = cyclo_scan(6000, Fraction(1, 10), workers=3)
    assert a.to_csv() == b.to_csv()


def test_scan_rejects_bad_epsilon():
    with pytest.raises(ValidationError):
        cyclo_scan(10, 0)


def test_threshold_display_matches_value():
    row = cyclo_scan(12, Fraction(1, 10)).rows[-1]
    assert float(mid(row.threshold)) == pytest.approx(0.9 * math.log(4))
