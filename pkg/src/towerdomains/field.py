"""Exact arithmetic in two-step multiquadratic towers.

A tower is ``Q ⊂ L = Q(√m_1, …, √m_l) ⊂ N = L(√w : w ∈ S0)``.  Elements of
``N`` are stored as sparse maps ``(T, D) -> Fraction`` over the Q-basis
``√m_D · q_T`` where ``√m_D = ∏_{i∈D} √m_i`` and ``q_T = ∏_{w∈T} √w``.
Subsets ``T`` and ``D`` are encoded as bitmasks.

Square roots of the generators are formal symbols; the only rewrite rules are
``(√m_i)² = m_i`` and ``(√w)² = w``.  Pairwise coprimality of the ``m_i``
makes this a genuine field.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from math import gcd, isqrt

from . import _linalg
from .errors import DescriptorMismatchError, NotCMError, ValidationError


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def bits(mask: int):
    i = 0
    while mask:
        if mask & 1:
            yield i
        mask >>= 1
        i += 1


def is_squarefree(m: int) -> bool:
    m = abs(m)
    if m == 0:
        return False
    p = 2
    while p * p <= m:
        if m % (p * p) == 0:
            return False
        p += 1
    return True


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % q for q in range(2, isqrt(p) + 1))


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    return Fraction(x)


@dataclass(frozen=True, eq=False)
class TowerDescriptor:
    """Field data for ``N/L/Q``.

    ``level2_units`` are elements of ``L`` (FieldElements over the base
    descriptor).  ``hypothesis_ortho`` records that ``L`` is totally real and
    every ``w`` was certified totally negative with ``L(√w)/Q`` Galois; only
    the unramified module should set it.
    """

    level1_generators: tuple[int, ...]
    level2_units: tuple["FieldElement", ...] = ()
    hypothesis_ortho: bool = False

    def __post_init__(self):
        gens = tuple(int(m) for m in self.level1_generators)
        object.__setattr__(self, "level1_generators", gens)
        object.__setattr__(self, "level2_units", tuple(self.level2_units))
        for m in gens:
            if m in (0, 1) or not is_squarefree(m):
                raise ValidationError(f"generator {m} is not a squarefree integer != 0, 1")
        for a, b in combinations(gens, 2):
            if gcd(a, b) != 1:
                raise ValidationError(f"generators {a} and {b} are not coprime")
        for k in range(1, len(gens) + 1):
            for sub in combinations(gens, k):
                prod = 1
                for m in sub:
                    prod *= m
                if prod > 0 and isqrt(prod) ** 2 == prod:
                    raise ValidationError(f"generators {sub} multiply to a square")
        base_key = (gens, ())
        for w in self.level2_units:
            if not isinstance(w, FieldElement):
                raise ValidationError("level-2 units must be FieldElements of L")
            if w.tower.level1_generators != gens or w.tower.level2_units:
                raise DescriptorMismatchError("level-2 unit is not over the base field L")
            if w.is_zero():
                raise ValidationError("level-2 unit must be nonzero")
        object.__setattr__(self, "_key", (base_key, tuple(w._key() for w in self.level2_units)))

    # identity -------------------------------------------------------------
    def __eq__(self, other):
        return isinstance(other, TowerDescriptor) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        units = ", ".join(str(w) for w in self.level2_units)
        return f"TowerDescriptor(level1={list(self.level1_generators)}, S0=[{units}])"

    # bookkeeping ----------------------------------------------------------
    @property
    def ell(self) -> int:
        return len(self.level1_generators)

    @property
    def s(self) -> int:
        return len(self.level2_units)

    @property
    def degree_L(self) -> int:
        return 1 << self.ell

    @property
    def degree(self) -> int:
        return 1 << (self.ell + self.s)

    @property
    def relative_degree(self) -> int:
        return 1 << self.s

    @property
    def is_prime_family(self) -> bool:
        g = self.level1_generators
        return len(g) >= 1 and len(set(g)) == len(g) and all(p > 0 and p % 4 == 1 and _is_prime(p) for p in g)

    @property
    def is_totally_real_base(self) -> bool:
        return all(m > 0 for m in self.level1_generators)

    @property
    def is_cm(self) -> bool:
        if self.s == 0:
            return not self.is_totally_real_base
        return self.hypothesis_ortho

    @property
    def is_totally_real(self) -> bool:
        return self.s == 0 and self.is_totally_real_base

    @cached_property
    def base(self) -> "TowerDescriptor":
        """The descriptor of ``L`` alone."""
        if self.s == 0:
            return self
        return TowerDescriptor(self.level1_generators)

    def with_hypothesis(self) -> "TowerDescriptor":
        return TowerDescriptor(self.level1_generators, self.level2_units, hypothesis_ortho=True)

    @cached_property
    def m_prod(self) -> tuple[int, ...]:
        """``m_D`` for every bitmask ``D``."""
        out = [1] * self.degree_L
        for d in range(1, self.degree_L):
            low = d & -d
            out[d] = out[d ^ low] * self.level1_generators[low.bit_length() - 1]
        return tuple(out)

    @cached_property
    def w_prod(self) -> tuple[dict, ...]:
        """``∏_{w∈T} w`` as an L-coefficient map ``{D: Fraction}`` for every ``T``."""
        out = [{0: Fraction(1)}]
        for t in range(1, self.relative_degree):
            low = t & -t
            prev = out[t ^ low]
            w = self.level2_units[low.bit_length() - 1]
            out.append(_mul_L(prev, w.L_part(0), self.m_prod))
        return tuple(out)

    def basis_keys(self):
        """All ``(T, D)`` keys in a fixed order (T major, D minor)."""
        return [(t, d) for t in range(self.relative_degree) for d in range(self.degree_L)]

    # constructors ---------------------------------------------------------
    def element(self, coeffs=None) -> "FieldElement":
        return FieldElement(self, coeffs or {})

    def one(self) -> "FieldElement":
        return FieldElement(self, {(0, 0): 1})

    def zero(self) -> "FieldElement":
        return FieldElement(self, {})

    def rational(self, q) -> "FieldElement":
        return FieldElement(self, {(0, 0): q})

    def sqrt_m(self, dmask: int) -> "FieldElement":
        """``√m_D`` for the bitmask ``D``."""
        return FieldElement(self, {(0, dmask): 1})

    def q(self, tmask: int) -> "FieldElement":
        """``q_T = ∏_{w∈T} √w``."""
        return FieldElement(self, {(tmask, 0): 1})

    def lift(self, a: "FieldElement") -> "FieldElement":
        """Embed an element of ``L`` (over the base descriptor) into ``N``."""
        if a.tower == self:
            return a
        if a.tower != self.base:
            raise DescriptorMismatchError("element is not over the base field")
        return FieldElement(self, a.coeffs)

    def random_element(self, rng: random.Random, height: int = 5, den: int = 3, density: float = 1.0):
        coeffs = {}
        for key in self.basis_keys():
            if rng.random() <= density:
                coeffs[key] = Fraction(rng.randint(-height, height), rng.randint(1, den))
        return FieldElement(self, coeffs)

    def random_L_element(self, rng: random.Random, height: int = 5, den: int = 3):
        return FieldElement(self, {(0, d): Fraction(rng.randint(-height, height), rng.randint(1, den))
                                   for d in range(self.degree_L)})


def _mul_L(a: dict, b: dict, m_prod) -> dict:
    """Product of two L-coefficient maps ``{D: Fraction}``."""
    out: dict = {}
    for d1, c1 in a.items():
        for d2, c2 in b.items():
            d = d1 ^ d2
            out[d] = out.get(d, 0) + c1 * c2 * m_prod[d1 & d2]
    return {d: c for d, c in out.items() if c}


class FieldElement:
    """An exact element of ``N``; immutable."""

    __slots__ = ("tower", "_c", "__weakref__")

    def __init__(self, tower: TowerDescriptor, coeffs):
        self.tower = tower
        c = {}
        nT, nD = tower.relative_degree, tower.degree_L
        for key, v in dict(coeffs).items():
            t, d = key
            if not (0 <= t < nT and 0 <= d < nD):
                raise ValidationError(f"basis key {key} out of range for {tower}")
            v = _as_fraction(v)
            if v:
                c[(t, d)] = v
        self._c = c

    @property
    def coeffs(self) -> dict:
        return dict(self._c)

    def coeff(self, t: int, d: int) -> Fraction:
        return self._c.get((t, d), Fraction(0))

    def _key(self):
        return tuple(sorted(self._c.items()))

    def is_zero(self) -> bool:
        return not self._c

    def in_L(self) -> bool:
        return all(t == 0 for t, _ in self._c)

    def L_part(self, t: int) -> dict:
        """The L-coefficient map of the ``q_T`` component."""
        return {d: c for (tt, d), c in self._c.items() if tt == t}

    def components(self) -> dict:
        """``{T: L-coefficient map}`` for the nonzero ``q_T`` components."""
        out: dict = {}
        for (t, d), c in self._c.items():
            out.setdefault(t, {})[d] = c
        return out

    def restrict_to_L(self) -> "FieldElement":
        if not self.in_L():
            raise ValidationError("element does not lie in L")
        return FieldElement(self.tower.base, self._c)

    # ring operations ----------------------------------------------------------
    def _check(self, other) -> "FieldElement":
        if isinstance(other, (int, Fraction)):
            return self.tower.rational(other)
        if not isinstance(other, FieldElement):
            return NotImplemented
        if other.tower != self.tower:
            raise DescriptorMismatchError("elements live in different towers")
        return other

    def __add__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        out = dict(self._c)
        for k, v in other._c.items():
            out[k] = out.get(k, 0) + v
        return FieldElement(self.tower, out)

    __radd__ = __add__

    def __neg__(self):
        return FieldElement(self.tower, {k: -v for k, v in self._c.items()})

    def __sub__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return FieldElement(self.tower, {k: v * other for k, v in self._c.items()})
        other = self._check(other)
        if other is NotImplemented:
            return other
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return FieldElement(self.tower, {k: v / other for k, v in self._c.items()})
        return mul(self, inverse(self._check(other)))

    def __pow__(self, k: int):
        if k < 0:
            return inverse(self) ** (-k)
        result, base = self.tower.one(), self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.tower.rational(other)
        if not isinstance(other, FieldElement):
            return NotImplemented
        return self.tower == other.tower and self._c == other._c

    def __hash__(self):
        return hash((self.tower, self._key()))

    def __repr__(self):
        return f"FieldElement({self})"

    def __str__(self):
        if not self._c:
            return "0"
        parts = []
        for (t, d), c in sorted(self._c.items()):
            sym = []
            if d:
                sym.append("√" + "·".join(str(self.tower.level1_generators[i]) for i in bits(d)))
            if t:
                sym.append("q{" + ",".join(str(i) for i in bits(t)) + "}")
            parts.append(str(c) + ("*" + "*".join(sym) if sym else ""))
        return " + ".join(parts)


def mul(a: FieldElement, b: FieldElement) -> FieldElement:
    """Exact product using ``√m_D √m_D' = m_{D∩D'} √m_{DΔD'}`` and
    ``q_T q_T' = (∏_{w∈T∩T'} w) q_{TΔT'}``."""
    if a.tower != b.tower:
        raise DescriptorMismatchError("elements live in different towers")
    tower = a.tower
    m_prod = tower.m_prod
    wp = tower.w_prod if tower.s else None
    out: dict = {}
    for (t1, d1), c1 in a._c.items():
        for (t2, d2), c2 in b._c.items():
            c = c1 * c2 * m_prod[d1 & d2]
            d = d1 ^ d2
            t = t1 ^ t2
            ti = t1 & t2
            if not ti:
                out[(t, d)] = out.get((t, d), 0) + c
            else:
                for dd, wc in wp[ti].items():
                    key = (t, d ^ dd)
                    out[key] = out.get(key, 0) + c * wc * m_prod[d & dd]
    return FieldElement(tower, out)


def multiplication_matrix(a: FieldElement) -> list[list[Fraction]]:
    """Matrix of ``x ↦ a·x`` on the Q-basis ``tower.basis_keys()`` (columns = images)."""
    keys = a.tower.basis_keys()
    cols = [mul(a, FieldElement(a.tower, {k: 1})) for k in keys]
    return [[col.coeff(*k) for col in cols] for k in keys]


def inverse(a: FieldElement) -> FieldElement:
    """Solve ``M_a x = 1`` exactly."""
    if a.is_zero():
        raise ZeroDivisionError("inverse of zero")
    keys = a.tower.basis_keys()
    if len(a._c) == 1 and next(iter(a._c)) == (0, 0):
        return a.tower.rational(1 / a._c[(0, 0)])
    m = multiplication_matrix(a)
    rhs = [Fraction(int(k == (0, 0))) for k in keys]
    x = _linalg.solve(m, rhs)
    return FieldElement(a.tower, dict(zip(keys, x)))


def _conjugation_signs(tower: TowerDescriptor):
    """Sign of each basis element under complex conjugation, as ``(tsign, dsign)`` masks."""
    neg_mask = sum(1 << i for i, m in enumerate(tower.level1_generators) if m < 0)
    if tower.s == 0:
        return 0, neg_mask
    if not tower.hypothesis_ortho:
        raise NotCMError("hypothesis (totally real L, totally negative w) not certified for this tower")
    return (1 << tower.s) - 1, 0


def complex_conjugate(a: FieldElement) -> FieldElement:
    """Complex conjugation, which acts the same way under every embedding.

    Identity on totally real fields; flips ``√m_i`` with ``m_i < 0`` when
    ``S0 = ∅``; flips every ``√w`` under the tower hypothesis.
    """
    tmask, dmask = _conjugation_signs(a.tower)
    out = {}
    for (t, d), c in a._c.items():
        sign = popcount(t & tmask) + popcount(d & dmask)
        out[(t, d)] = -c if sign & 1 else c
    return FieldElement(a.tower, out)


def apply_iota(a: FieldElement) -> FieldElement:
    """The CM involution ``ι``; ``ι(√m_D q_T) = (-1)^{#T} √m_D q_T`` under the hypothesis."""
    if not a.tower.is_cm:
        raise NotCMError("ι is only defined on CM fields")
    return complex_conjugate(a)


def trace_over_Q(a: FieldElement) -> Fraction:
    return a.tower.degree * a.coeff(0, 0)


def norm_over_Q(a: FieldElement) -> Fraction:
    """Determinant of the multiplication-by-``a`` matrix."""
    if a.is_zero():
        return Fraction(0)
    return _linalg.det(multiplication_matrix(a))


def norm_L_over_Q(a: FieldElement) -> Fraction:
    """Norm from ``L`` to ``Q`` of an element of ``L``."""
    return norm_over_Q(a.restrict_to_L()) if a.tower.s else norm_over_Q(a)


def inner_product_exact(a: FieldElement, b: FieldElement) -> Fraction:
    """Exact Minkowski inner product.

    ``½·Tr(a·ι(b))`` on CM fields (each conjugate pair counted once) and
    ``Tr(a·b)`` on totally real fields.
    """
    if a.tower != b.tower:
        raise DescriptorMismatchError("elements live in different towers")
    tower = a.tower
    if tower.is_totally_real:
        return trace_over_Q(mul(a, b))
    if not tower.is_cm:
        raise NotCMError("inner product needs a totally real or CM field")
    # only the (0, 0) coefficient of a·ι(b) is needed
    return Fraction(tower.degree, 2) * mul(a, complex_conjugate(b)).coeff(0, 0)


def gram_matrix(elements) -> list[list[Fraction]]:
    return [[inner_product_exact(x, y) for y in elements] for x in elements]


def galois_flip(a: FieldElement, i: int) -> FieldElement:
    """The automorphism of ``L`` sending ``√m_i ↦ -√m_i`` (elements of ``L`` only)."""
    if not a.in_L():
        raise ValidationError("galois_flip acts on elements of L")
    out = {}
    for (t, d), c in a._c.items():
        out[(t, d)] = -c if (d >> i) & 1 else c
    return FieldElement(a.tower, out)


@dataclass(frozen=True)
class SubsetOrder:
    """A total order on subsets of ``S0`` that extends inclusion.

    The default sorts by ``(#T, bitmask)``.  A custom order is given as the
    full list of bitmasks, smallest first.
    """

    s: int
    order: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not self.order:
            default = sorted(range(1 << self.s), key=lambda t: (popcount(t), t))
            object.__setattr__(self, "order", tuple(default))
        order = self.order
        if sorted(order) != list(range(1 << self.s)):
            raise ValidationError("subset order must list every subset exactly once")
        pos = {t: i for i, t in enumerate(order)}
        for t in order:
            for sub in range(1 << self.s):
                if sub != t and sub & t == sub and pos[sub] > pos[t]:
                    raise ValidationError("subset order does not extend inclusion")

    def descending(self):
        return tuple(reversed(self.order))

    def key(self, t: int) -> int:
        return self.order.index(t)


# ----------------------------------------------------------------- serialization

def tower_to_obj(tower: TowerDescriptor) -> dict:
    obj = {"level1": list(tower.level1_generators)}
    if tower.s:
        obj["S0"] = [element_to_obj(w)["coeffs"] for w in tower.level2_units]
    if tower.hypothesis_ortho:
        obj["hypothesis_ortho"] = True
    return obj


def tower_from_obj(obj) -> TowerDescriptor:
    if isinstance(obj, str):
        import json
        obj = json.loads(obj)
    gens = tuple(int(m) for m in obj.get("level1", ()))
    base = TowerDescriptor(gens)
    units = tuple(_coeffs_from_list(base, c) for c in obj.get("S0", ()))
    return TowerDescriptor(gens, units, bool(obj.get("hypothesis_ortho", False)))


def element_to_obj(a: FieldElement) -> dict:
    """``{"tower": …, "coeffs": [[T, D, "p/q"], …]}`` in sorted key order."""
    return {"tower": tower_to_obj(a.tower),
            "coeffs": [[t, d, str(c)] for (t, d), c in sorted(a._c.items())]}


def _coeffs_from_list(tower, rows) -> FieldElement:
    return FieldElement(tower, {(int(t), int(d)): Fraction(c) for t, d, c in rows})


def element_from_obj(obj, tower: TowerDescriptor | None = None) -> FieldElement:
    tower = tower or tower_from_obj(obj["tower"])
    return _coeffs_from_list(tower, obj["coeffs"])


def parse_element(text: str, tower: TowerDescriptor) -> FieldElement:
    """Parse expressions like ``(1+sqrt(5))/2`` or ``3*q(0) - sqrt(-15)``.

    ``sqrt(k)`` needs ``k`` to be a square times some ``m_D``; ``q(j)`` is
    ``√w_j``.  Only ``+ - * / **`` and integer literals are accepted.
    """
    import ast

    def sqrt_of(k: int) -> FieldElement:
        if k == 0:
            return tower.zero()
        for d, m in enumerate(tower.m_prod):
            if k % m == 0 and k // m > 0:
                r = isqrt(k // m)
                if r * r == k // m:
                    return FieldElement(tower, {(0, d): r})
        raise ValidationError(f"sqrt({k}) does not lie in L")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int):
            return tower.rational(node.value)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            left, right = ev(node.left), node.right
            if isinstance(node.op, ast.Pow):
                if not (isinstance(right, ast.Constant) and isinstance(right.value, int)):
                    raise ValidationError("exponents must be integer literals")
                return left ** right.value
            r = ev(right)
            ops = {ast.Add: lambda x, y: x + y, ast.Sub: lambda x, y: x - y,
                   ast.Mult: lambda x, y: x * y, ast.Div: lambda x, y: x / y}
            for k, f in ops.items():
                if isinstance(node.op, k):
                    return f(left, r)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and len(node.args) == 1:
            arg = ev(node.args[0])
            if not arg.in_L() or set(arg._c) - {(0, 0)}:
                raise ValidationError("sqrt()/q() take an integer argument")
            k = arg.coeff(0, 0)
            if k.denominator != 1:
                raise ValidationError("sqrt()/q() take an integer argument")
            if node.func.id == "sqrt":
                return sqrt_of(int(k))
            if node.func.id == "q" and 0 <= k < tower.s:
                return tower.q(1 << int(k))
        raise ValidationError(f"cannot parse element expression {text!r}")

    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValidationError(f"cannot parse element expression {text!r}") from exc
    return ev(tree)
