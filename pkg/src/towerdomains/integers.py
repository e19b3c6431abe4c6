"""Integral bases, integrality tests, O_L/4O_L, square classes, Minkowski bound.

Integral bases:

* ``L``: products ``λ_D = ∏_{i∈D} ω_i`` with ``ω_i = (1+√m_i)/2`` when
  ``m_i ≡ 1 (mod 4)`` and ``ω_i = √m_i`` otherwise.  This is a Z-basis of
  ``O_L`` whenever the quadratic discriminants are pairwise coprime, i.e. at
  most one generator is ``≢ 1 (mod 4)``.
* ``N``: products ``η_T λ_D`` with ``η_T = ∏_{w∈T} (1+√w)/2``, valid when
  every ``w`` is a unit of ``O_L`` lying in ``1 + 4O_L``.

Both changes of basis are tensor products of 2×2 transforms, one per
generator, so they are applied axis by axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import factorial, isqrt

import numpy as np
from mpmath import iv, mp

from .errors import (BasisUnavailableError, CapacityError, InternalCheckError,
                     NotIntegralError, ValidationError)
from .field import FieldElement, TowerDescriptor, bits, norm_L_over_Q, popcount
from .intervals import precision

MOD4_RANK_CAP = 8


# ----------------------------------------------------------------- discriminants

def quadratic_discriminant(m: int) -> int:
    return m if m % 4 == 1 else 4 * m


def has_integral_basis_L(tower: TowerDescriptor) -> bool:
    return sum(1 for m in tower.level1_generators if m % 4 != 1) <= 1


def units_in_one_plus_4(tower: TowerDescriptor) -> bool:
    return all(is_unit(w) and in_one_plus_4OL(w) for w in tower.level2_units)


def discriminant_L(tower: TowerDescriptor) -> int:
    """``|Δ(L)| = ∏_i |d_i|^{2^{l-1}}`` for coprime quadratic discriminants ``d_i``."""
    if not has_integral_basis_L(tower):
        raise BasisUnavailableError("discriminant of L unavailable: quadratic discriminants not coprime")
    if tower.ell == 0:
        return 1
    out = 1
    for m in tower.level1_generators:
        out *= abs(quadratic_discriminant(m))
    return out ** (1 << (tower.ell - 1))


def discriminant_N(tower: TowerDescriptor) -> int:
    """``|Δ(N)| = |Δ(L)|^{[N:L]}`` for the towers this build certifies (unramified top step)."""
    if tower.s and not units_in_one_plus_4(tower):
        raise BasisUnavailableError("Δ(N) only certified for unit towers in 1+4O_L")
    return discriminant_L(tower) ** tower.relative_degree


def signature_L(tower: TowerDescriptor) -> tuple[int, int]:
    n = tower.degree_L
    return (n, 0) if tower.is_totally_real_base else (0, n // 2)


# ----------------------------------------------------------------- coordinates

@dataclass(frozen=True, eq=False)
class IntegralCoordinates:
    """Coordinates relative to the basis ``{η_T λ_D}``."""

    tower: TowerDescriptor
    coords: dict

    def __eq__(self, other):
        if not isinstance(other, IntegralCoordinates):
            return NotImplemented
        return self.tower == other.tower and _clean(self.coords) == _clean(other.coords)

    def __hash__(self):
        return hash((self.tower, tuple(sorted(_clean(self.coords).items()))))

    def get(self, t: int, d: int) -> Fraction:
        return self.coords.get((t, d), Fraction(0))

    def is_integral(self) -> bool:
        return all(c.denominator == 1 for c in self.coords.values())

    def vector(self) -> list[Fraction]:
        return [self.get(t, d) for t, d in self.tower.basis_keys()]

    def to_json(self) -> str:
        return json.dumps(self.to_obj())

    def to_obj(self):
        tl, dl = _index_lists(self.tower)
        return [[[tl[t], dl[d]], str(c)] for (t, d), c in sorted(_clean(self.coords).items())]

    @classmethod
    def from_obj(cls, tower, obj):
        coords = {}
        for (tidx, didx), c in obj:
            coords[(sum(1 << i for i in tidx), sum(1 << i for i in didx))] = Fraction(c)
        return cls(tower, coords)


def _index_lists(tower):
    tl = {t: list(bits(t)) for t in range(tower.relative_degree)}
    dl = {d: list(bits(d)) for d in range(tower.degree_L)}
    return tl, dl


def _clean(coords):
    return {k: Fraction(v) for k, v in coords.items() if v}


def _axis_forward(c: dict, axis_is_t: bool, bit: int) -> dict:
    """Rewrite ``a0 + a1·√x`` as ``(a0 - a1) + 2a1·ω`` with ``ω = (1+√x)/2``."""
    out = dict(c)
    flag = 1 << bit
    for key, a1 in c.items():
        t, d = key
        if (t if axis_is_t else d) & flag:
            base = (t ^ flag, d) if axis_is_t else (t, d ^ flag)
            out[base] = out.get(base, 0) - a1
            out[key] = 2 * a1
    return out


def _axis_backward(c: dict, axis_is_t: bool, bit: int) -> dict:
    """Inverse of :func:`_axis_forward`: ``c0 + c1·ω = (c0 + c1/2) + (c1/2)·√x``."""
    out = dict(c)
    flag = 1 << bit
    for key, c1 in c.items():
        t, d = key
        if (t if axis_is_t else d) & flag:
            base = (t ^ flag, d) if axis_is_t else (t, d ^ flag)
            out[base] = out.get(base, 0) + Fraction(c1) / 2
            out[key] = Fraction(c1) / 2
    return out


def _check_basis(tower: TowerDescriptor):
    if not has_integral_basis_L(tower):
        raise BasisUnavailableError("no certified λ-basis: quadratic discriminants are not coprime")
    if tower.s and not units_in_one_plus_4(tower):
        raise BasisUnavailableError("η-basis needs every w ∈ S0 to be a unit in 1 + 4O_L")


def _to_coords(a: FieldElement) -> dict:
    tower = a.tower
    c = {k: v for k, v in a._c.items()}
    for i, m in enumerate(tower.level1_generators):
        if m % 4 == 1:
            c = _axis_forward(c, False, i)
    for j in range(tower.s):
        c = _axis_forward(c, True, j)
    return _clean(c)


def _from_coords(tower: TowerDescriptor, coords: dict) -> FieldElement:
    c = {k: Fraction(v) for k, v in coords.items()}
    for j in range(tower.s):
        c = _axis_backward(c, True, j)
    for i, m in enumerate(tower.level1_generators):
        if m % 4 == 1:
            c = _axis_backward(c, False, i)
    return FieldElement(tower, c)


def to_integral_coordinates(a: FieldElement) -> IntegralCoordinates:
    _check_basis(a.tower)
    return IntegralCoordinates(a.tower, _to_coords(a))


def from_integral_coordinates(ic: IntegralCoordinates) -> FieldElement:
    _check_basis(ic.tower)
    return _from_coords(ic.tower, ic.coords)


def integral_basis_element(tower: TowerDescriptor, t: int, d: int) -> FieldElement:
    """``η_T λ_D``."""
    return _from_coords(tower, {(t, d): 1})


def lambda_basis(tower: TowerDescriptor) -> list[FieldElement]:
    """``B_L = [λ_D for D in 0..2^l-1]`` as elements of ``tower``."""
    if not has_integral_basis_L(tower):
        raise BasisUnavailableError("no certified λ-basis")
    return [_from_coords(tower, {(0, d): 1}) for d in range(tower.degree_L)]


def L_coordinates(a: FieldElement) -> list[Fraction]:
    """λ-coordinates of an element of ``L`` (in ``L`` or any tower over it)."""
    if not a.in_L():
        raise ValidationError("element does not lie in L")
    if not has_integral_basis_L(a.tower):
        raise BasisUnavailableError("no certified λ-basis")
    c = {(0, d): v for (_, d), v in a._c.items()}
    for i, m in enumerate(a.tower.level1_generators):
        if m % 4 == 1:
            c = _axis_forward(c, False, i)
    return [Fraction(c.get((0, d), 0)) for d in range(a.tower.degree_L)]


def from_L_coordinates(tower: TowerDescriptor, coords) -> FieldElement:
    c = {(0, d): Fraction(v) for d, v in enumerate(coords) if v}
    for i, m in enumerate(tower.level1_generators):
        if m % 4 == 1:
            c = _axis_backward(c, False, i)
    return FieldElement(tower, c)


def is_integral(a: FieldElement) -> bool:
    if a.in_L():
        return all(x.denominator == 1 for x in L_coordinates(a))
    return to_integral_coordinates(a).is_integral()


def is_unit(u: FieldElement) -> bool:
    """``u ∈ O_L*`` for ``u ∈ L``."""
    if u.is_zero() or not u.in_L():
        return False
    return is_integral(u) and abs(norm_L_over_Q(u)) == 1


def in_one_plus_4OL(u: FieldElement) -> bool:
    """``(u - 1)/4`` is integral."""
    return is_integral((u - 1) / 4)


# ----------------------------------------------------------------- O_L / 4 O_L

@dataclass(frozen=True)
class Mod4Residue:
    """λ-coordinates of an ``O_L`` element reduced mod 4."""

    residue: tuple[int, ...]

    @classmethod
    def of(cls, u: FieldElement) -> "Mod4Residue":
        coords = L_coordinates(u)
        if any(x.denominator != 1 for x in coords):
            raise NotIntegralError(f"{u} is not in O_L")
        return cls(tuple(int(x) % 4 for x in coords))

    def encode(self) -> int:
        return sum(r * 4 ** i for i, r in enumerate(self.residue))


@lru_cache(maxsize=None)
def structure_constants(base: TowerDescriptor) -> np.ndarray:
    """``C[i, j, k]``: coefficient of ``λ_k`` in ``λ_i λ_j`` (integers)."""
    lam = lambda_basis(base)
    n = len(lam)
    C = np.zeros((n, n, n), dtype=np.int64)
    for i in range(n):
        for j in range(i, n):
            coords = L_coordinates(lam[i] * lam[j])
            for k, v in enumerate(coords):
                if v.denominator != 1:
                    raise InternalCheckError("λ-basis not closed under multiplication")
                C[i, j, k] = C[j, i, k] = int(v)
    return C


@lru_cache(maxsize=None)
def square_table(base: TowerDescriptor) -> frozenset[int]:
    """Encoded residues of all squares in ``O_L/4O_L``; built once per field."""
    n = base.degree_L
    if n > MOD4_RANK_CAP:
        raise CapacityError(f"O_L/4O_L square table capped at n(L) <= {MOD4_RANK_CAP}")
    C = structure_constants(base) % 4
    total = 4 ** n
    idx = np.arange(total, dtype=np.int64)
    R = np.stack([(idx // 4 ** i) % 4 for i in range(n)], axis=1)
    sq = np.einsum("ai,aj,ijk->ak", R, R, C) % 4
    weights = 4 ** np.arange(n, dtype=np.int64)
    return frozenset(int(v) for v in np.unique(sq @ weights))


def is_square_mod4(u: FieldElement) -> bool:
    """``u`` is a square in ``O_L/4O_L``; exhaustive over ``4^{n(L)}`` residues."""
    if not u.in_L():
        raise ValidationError("u must lie in L")
    res = Mod4Residue.of(u)
    if norm_L_over_Q(u).numerator % 2 == 0:
        raise ValidationError(f"{u} is not invertible mod 2O_L")
    return res.encode() in square_table(u.tower.base)


# ----------------------------------------------------------------- squares in L

def _split_top(c: dict, top: int):
    flag = 1 << top
    a = {d: v for d, v in c.items() if not d & flag}
    b = {d ^ flag: v for d, v in c.items() if d & flag}
    return a, b


def _mulL(x: dict, y: dict, gens) -> dict:
    m_prod = _mprods(gens)
    out: dict = {}
    for d1, c1 in x.items():
        for d2, c2 in y.items():
            d = d1 ^ d2
            out[d] = out.get(d, 0) + c1 * c2 * m_prod[d1 & d2]
    return {d: v for d, v in out.items() if v}


@lru_cache(maxsize=None)
def _mprods(gens):
    out = [1] * (1 << len(gens))
    for d in range(1, len(out)):
        low = d & -d
        out[d] = out[d ^ low] * gens[low.bit_length() - 1]
    return tuple(out)


def _sub(x, y):
    out = dict(x)
    for k, v in y.items():
        out[k] = out.get(k, 0) - v
    return {k: v for k, v in out.items() if v}


def _add(x, y):
    out = dict(x)
    for k, v in y.items():
        out[k] = out.get(k, 0) + v
    return {k: v for k, v in out.items() if v}


def _scale(x, q):
    return {k: v * q for k, v in x.items() if v * q}


def _inv(x: dict, gens) -> dict:
    tower = TowerDescriptor(gens)
    return (FieldElement(tower, {(0, d): v for d, v in x.items()}) ** -1).L_part(0)


def _rational_sqrt(q: Fraction):
    if q < 0:
        return None
    n, d = q.numerator, q.denominator
    rn, rd = isqrt(n), isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def _sqrt_rec(u: dict, gens: tuple) -> dict | None:
    """Exact square root in ``Q(√gens)`` or ``None``.

    Writes ``L = K(√m)``, ``u = a + b√m`` and ``x = c + d√m``; then
    ``c² = (a ± n)/2`` where ``n² = a² - m b²`` is the relative norm.
    """
    if not u:
        return {}
    if not gens:
        r = _rational_sqrt(u.get(0, Fraction(0)))
        return None if r is None else {0: r}
    top = len(gens) - 1
    m = gens[top]
    K = gens[:top]
    a, b = _split_top(u, top)
    flag = 1 << top
    if not b:
        c = _sqrt_rec(a, K)
        if c is not None:
            return c
        d = _sqrt_rec(_scale(a, Fraction(1, m)), K)
        if d is None:
            return None
        return {k | flag: v for k, v in d.items()}
    relnorm = _sub(_mulL(a, a, K), _scale(_mulL(b, b, K), m))
    n = _sqrt_rec(relnorm, K)
    if n is None:
        return None
    for sign in (1, -1):
        c2 = _scale(_add(a, _scale(n, sign)), Fraction(1, 2))
        c = _sqrt_rec(c2, K)
        if not c:
            continue
        d = _scale(_mulL(b, _inv(c, K), K), Fraction(1, 2))
        x = _add(c, {k | flag: v for k, v in d.items()})
        if _mulL(x, x, gens) == {k: v for k, v in u.items() if v}:
            return x
    return None


def square_root_in_L(u: FieldElement) -> FieldElement | None:
    """A square root of ``u`` in ``L`` (exact), or ``None`` if ``u ∉ L*²``."""
    if not u.in_L():
        raise ValidationError("u must lie in L")
    if u.is_zero():
        return u
    nrm = norm_L_over_Q(u)
    if _rational_sqrt(abs(nrm)) is None:
        return None
    root = _sqrt_rec(u.L_part(0), u.tower.level1_generators)
    if root is None:
        return None
    x = FieldElement(u.tower, {(0, d): v for d, v in root.items()})
    if x * x != u:
        raise InternalCheckError("square root failed verification")
    return x


def is_square_in_L(u: FieldElement) -> bool:
    return square_root_in_L(u) is not None


def square_class_independent(us) -> bool:
    """No nonempty subset product of ``us`` is a square in ``L*``."""
    us = list(us)
    if not us:
        return True
    for u in us:
        if u.is_zero() or not u.in_L():
            raise ValidationError("square classes need nonzero elements of L")
    for k in range(1, len(us) + 1):
        for sub in combinations(us, k):
            prod = sub[0]
            for x in sub[1:]:
                prod = prod * x
            if is_square_in_L(prod):
                return False
    return True


# ----------------------------------------------------------------- Minkowski bound

def minkowski_bound(tower: TowerDescriptor, bits_: int = 128):
    """Certified upper bound for ``M_L = (4/π)^{r2} n!/n^n √Δ(L)`` (an mpmath mpf)."""
    base = tower.base
    n = base.degree_L
    _, r2 = signature_L(base)
    delta = discriminant_L(base)
    with precision(bits_):
        val = (iv.mpf(4) / iv.pi) ** r2 * iv.mpf(factorial(n)) / iv.mpf(n) ** n * iv.sqrt(iv.mpf(delta))
        upper = val._mpi_[1]
    return mp.make_mpf(upper)


__all__ = [
    "IntegralCoordinates", "Mod4Residue", "discriminant_L", "discriminant_N", "from_integral_coordinates",
    "in_one_plus_4OL", "integral_basis_element", "is_integral", "is_square_in_L", "is_square_mod4",
    "is_unit", "lambda_basis", "minkowski_bound", "square_class_independent", "square_root_in_L",
    "to_integral_coordinates", "popcount",
]
