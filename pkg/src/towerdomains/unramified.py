"""Unramified quadratic steps, qualifying units, and tower assembly.

``L(√w)/L`` is unramified at every finite prime iff some ``β ∈ L*`` has
``β²w ∈ 1 + 4O_L`` with ``β²w·O_L = 𝒜²`` for an integral ideal ``𝒜``; then
``O_{L(√w)} = O_L + O_L·(1+ρ)/2 + 𝒜⁻¹ρ`` with ``ρ = β√w``.

Ideal-square tests are only attempted where they can be decided without
general ideal factorisation: units, rational numbers, and quadratic ``L``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import isqrt

from . import _linalg
from .embed import all_embeddings, is_totally_negative, real_embedding_sign
from .errors import (BudgetExhaustedError, DependentUnitsError, HypothesisOrthoError,
                     InternalCheckError, NotPrimeFamilyError, UndecidableError, UnitClassError,
                     UnitNotInLError, UnitResidueError, ValidationError)
from .field import (FieldElement, TowerDescriptor, _is_prime, element_from_obj, element_to_obj,
                    galois_flip, norm_L_over_Q, trace_over_Q)
from .integers import (L_coordinates, discriminant_L, discriminant_N, from_L_coordinates,
                       in_one_plus_4OL, is_integral, is_square_in_L,
                       is_square_mod4, is_unit, lambda_basis, square_class_independent,
                       square_root_in_L)

TRIAL_DIVISION_CAP = 10 ** 7
ROOT_SEARCH_CAP = 10 ** 6

UNIT_GROUP_NOTE = ("units drawn from the 2-saturation of the subgroup generated by quadratic-subfield "
                   "fundamental units; exact for biquadratic L, possibly a proper subgroup beyond that")


# ----------------------------------------------------------------- ideals of O_L

def _factor(n: int) -> dict[int, int]:
    n = abs(n)
    out: dict[int, int] = {}
    p = 2
    while p * p <= n:
        if p > TRIAL_DIVISION_CAP:
            raise UndecidableError("undecidable in this build: norm too large to factor")
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


@dataclass(frozen=True)
class Ideal:
    """A fractional ideal of ``O_L``: HNF rows of λ-coordinates of a Z-basis."""

    tower: TowerDescriptor
    rows: tuple

    @classmethod
    def generated_by(cls, tower: TowerDescriptor, gens) -> "Ideal":
        lam = lambda_basis(tower)
        rows = [L_coordinates(g * b) for g in gens for b in lam]
        basis = _linalg.integer_row_basis(rows)
        if len(basis) != tower.degree_L:
            raise ValidationError("ideal generators must not all vanish")
        return cls(tower, tuple(tuple(r) for r in basis))

    def elements(self) -> list[FieldElement]:
        return [from_L_coordinates(self.tower, r) for r in self.rows]

    def __mul__(self, other: "Ideal") -> "Ideal":
        gens = [a * b for a in self.elements() for b in other.elements()]
        lam = lambda_basis(self.tower)
        rows = [L_coordinates(g) for g in gens] + [L_coordinates(g * b) for g in gens for b in lam[1:]]
        return Ideal(self.tower, tuple(tuple(r) for r in _linalg.integer_row_basis(rows)))

    def __pow__(self, k: int) -> "Ideal":
        out = Ideal.generated_by(self.tower, [self.tower.one()])
        for _ in range(k):
            out = out * self
        return out

    def __contains__(self, x: FieldElement) -> bool:
        coords = L_coordinates(x)
        sol = _linalg.solve(_linalg.transpose([list(r) for r in self.rows]), coords)
        return all(c.denominator == 1 for c in sol)

    def norm(self) -> Fraction:
        return abs(_linalg.det([list(r) for r in self.rows]))

    def scaled(self, c: FieldElement) -> "Ideal":
        return Ideal.generated_by(self.tower, [c * e for e in self.elements()])


def _omega(tower: TowerDescriptor) -> FieldElement:
    return lambda_basis(tower)[1]


def _omega_poly(m: int) -> tuple[int, int]:
    """``X² + bX + c`` with root ``ω`` (``(1+√m)/2`` or ``√m``)."""
    return (-1, -(m - 1) // 4) if m % 4 == 1 else (0, -m)


def _primes_above(tower: TowerDescriptor, p: int) -> list[Ideal]:
    m = tower.level1_generators[0]
    b, c = _omega_poly(m)
    if p > ROOT_SEARCH_CAP:
        raise UndecidableError("undecidable in this build: prime too large for residue root search")
    roots = [r for r in range(p) if (r * r + b * r + c) % p == 0]
    if not roots:
        return [Ideal.generated_by(tower, [tower.rational(p)])]
    om = _omega(tower)
    return [Ideal.generated_by(tower, [tower.rational(p), om - r]) for r in roots]


def _valuation(x: FieldElement, P: Ideal, cap: int) -> int:
    k, power = 0, P
    while k < cap and x in power:
        k += 1
        power = power * P
    return k


@dataclass(frozen=True)
class IdealSquare:
    is_square: bool
    root: Ideal | None
    regime: str
    description: str


def ideal_square_root(x: FieldElement) -> IdealSquare:
    """Decide whether ``x·O_L`` is the square of an integral ideal, and find ``𝒜``."""
    tower = x.tower
    if x.is_zero() or not x.in_L():
        raise ValidationError("ideal-square test needs a nonzero element of L")
    if not is_integral(x):
        return IdealSquare(False, None, "non-integral", "x is not in O_L")
    if is_unit(x):
        return IdealSquare(True, Ideal.generated_by(tower, [tower.one()]), "unit", "unit ideal")
    if tower.ell == 0:
        q = x.coeff(0, 0).numerator
        r = isqrt(abs(q))
        ok = r * r == abs(q)
        return IdealSquare(ok, Ideal.generated_by(tower, [tower.rational(r)]) if ok else None,
                           "rational", f"|x| = {abs(q)}")
    if tower.ell == 1:
        nrm = norm_L_over_Q(x).numerator
        root = Ideal.generated_by(tower, [tower.one()])
        parts = []
        for p, e in sorted(_factor(nrm).items()):
            for P in _primes_above(tower, p):
                v = _valuation(x, P, e)
                if v % 2:
                    return IdealSquare(False, None, "quadratic", f"odd valuation {v} above {p}")
                if v:
                    root = root * P ** (v // 2)
                    parts.append(f"P{p}^{v}")
        if root * root != Ideal.generated_by(tower, [x]):
            raise InternalCheckError("ideal square root failed verification")
        return IdealSquare(True, root, "quadratic", " ".join(parts) or "unit ideal")
    if x.in_L() and set(x._c) == {(0, 0)}:
        q = x.coeff(0, 0).numerator
        disc = discriminant_L(tower)
        bad = [p for p, e in _factor(q).items() if e % 2 and disc % p]
        return IdealSquare(not bad, None, "rational",
                           "odd valuations only at ramified primes" if not bad else f"odd valuation at {bad[0]}")
    raise UndecidableError("undecidable in this build: ideal-square test needs a unit, a rational, "
                           "or a quadratic field")


# ----------------------------------------------------------------- certificates

@dataclass(frozen=True)
class UnramifiedCertificate:
    w: FieldElement
    beta: FieldElement
    beta2w_in_1_plus_4OL: bool
    ideal_is_square: bool
    ideal_sqrt_description: str | None = None
    module_generators: tuple | None = None
    relative_discriminant_norm: Fraction | None = None

    @property
    def valid(self) -> bool:
        return self.beta2w_in_1_plus_4OL and self.ideal_is_square

    def to_obj(self) -> dict:
        obj = {
            "valid": self.valid,
            "w": element_to_obj(self.w),
            "beta": element_to_obj(self.beta),
            "verified_facts": {
                "beta2w_in_1_plus_4OL": self.beta2w_in_1_plus_4OL,
                "ideal_is_square": self.ideal_is_square,
                "ideal_sqrt_description": self.ideal_sqrt_description,
            },
        }
        if self.module_generators is not None:
            obj["OLprime_generators"] = [[[str(c) for c in L_coordinates(x)], [str(c) for c in L_coordinates(y)]]
                                         for x, y in self.module_generators]
            obj["relative_discriminant_norm"] = str(self.relative_discriminant_norm)
        return obj

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True)

    @classmethod
    def from_obj(cls, obj) -> "UnramifiedCertificate":
        """Re-verify a serialized certificate from its witness alone."""
        if isinstance(obj, str):
            obj = json.loads(obj)
        w = element_from_obj(obj["w"])
        beta = element_from_obj(obj["beta"], w.tower)
        return check_unramified_witness(w, beta)


def _trace_form_det(tower, pairs, wprime) -> Fraction:
    """``det Tr_{L'/Q}(e_i e_j)`` for ``e = x + yρ`` with ``ρ² = w'``."""
    def tr(a, b):
        x1, y1 = a
        x2, y2 = b
        return 2 * trace_over_Q(x1 * x2 + y1 * y2 * wprime)
    return _linalg.det([[tr(a, b) for b in pairs] for a in pairs])


def olprime_basis(w: FieldElement, beta: FieldElement, root: Ideal):
    """Z-basis of ``O_L + O_L(1+ρ)/2 + 𝒜⁻¹ρ`` as pairs ``(x, y)`` meaning ``x + yρ``.

    Also returns ``N(𝔡) = |disc| / Δ(L)²``, the norm of the relative
    discriminant of the module (``1`` iff it is ``O_L``).
    """
    tower = w.tower
    wp = beta * beta * w
    lam = lambda_basis(tower)
    half = Fraction(1, 2)
    inv_root = [a / wp for a in root.elements()]          # 𝒜⁻¹ = w'⁻¹·𝒜
    gens = [(b, tower.zero()) for b in lam] + [(b * half, b * half) for b in lam] + \
           [(tower.zero(), a) for a in inv_root]
    n = tower.degree_L
    rows = [L_coordinates(x) + L_coordinates(y) for x, y in gens]
    basis = _linalg.integer_row_basis(rows)
    if len(basis) != 2 * n:
        raise InternalCheckError("O_L' module does not have full rank")
    pairs = [(from_L_coordinates(tower, r[:n]), from_L_coordinates(tower, r[n:])) for r in basis]
    for x, y in pairs:
        # z = x + yρ is integral iff its relative trace and norm are
        if not (is_integral(2 * x) and is_integral(x * x - y * y * wp)):
            raise InternalCheckError("emitted O_L' generator is not integral")
    d = abs(_trace_form_det(tower, pairs, wp))
    return pairs, d / Fraction(discriminant_L(tower)) ** 2


def check_unramified_witness(w: FieldElement, beta: FieldElement) -> UnramifiedCertificate:
    """Decide condition (β²w ∈ 1+4O_L, β²w·O_L a square ideal) exactly."""
    if not (w.in_L() and beta.in_L()) or w.tower.s or beta.tower != w.tower:
        raise ValidationError("w and β must be elements of the same field L")
    if w.is_zero() or beta.is_zero():
        raise ValidationError("w and β must be nonzero")
    x = beta * beta * w
    fact1 = is_integral(x) and in_one_plus_4OL(x)
    sq = ideal_square_root(x)
    gens, rel = None, None
    if fact1 and sq.is_square and sq.root is not None:
        gens, rel = olprime_basis(w, beta, sq.root)
        if rel != 1:
            raise InternalCheckError(f"valid witness but relative discriminant has norm {rel}")
    return UnramifiedCertificate(w, beta, fact1, sq.is_square, sq.description,
                                 tuple(gens) if gens else None, rel)


# ----------------------------------------------------------------- units

def fundamental_unit(d: int) -> tuple[Fraction, Fraction]:
    """``(x, y)`` with ``ε = x + y√d > 1`` the fundamental unit of ``Q(√d)``.

    Uses the continued fraction of ``ω``; the first convergent ``p/q`` with
    ``|N(p − qω)| = 1`` gives ``ε = p − q·ω̄``.
    """
    if d <= 1 or isqrt(d) ** 2 == d:
        raise ValidationError("fundamental units need a real quadratic field")
    r = isqrt(d)
    if d % 4 == 1:
        P, Q, c = 1, 2, (d - 1) // 4
        norm = lambda p, q: p * p - p * q - c * q * q
        to_xy = lambda p, q: (Fraction(2 * p - q, 2), Fraction(q, 2))
    else:
        P, Q = 0, 1
        norm = lambda p, q: p * p - d * q * q
        to_xy = lambda p, q: (Fraction(p), Fraction(q))
    p0, p1, q0, q1 = 1, 0, 0, 1
    for _ in range(100000):
        a = (P + r) // Q
        p0, p1 = a * p0 + p1, p0
        q0, q1 = a * q0 + q1, q0
        if abs(norm(p0, q0)) == 1:
            return to_xy(p0, q0)
        P = a * Q - P
        Q = (d - P * P) // Q
    raise InternalCheckError("continued fraction did not reach a unit")


def subfield_units(tower: TowerDescriptor) -> list[FieldElement]:
    """``ε_D`` for every nonempty ``D`` (fundamental unit of ``Q(√m_D)``)."""
    base = tower.base
    if not base.is_totally_real_base:
        raise ValidationError("unit search needs a totally real L")
    out = []
    for dmask in range(1, base.degree_L):
        x, y = fundamental_unit(base.m_prod[dmask])
        out.append(FieldElement(base, {(0, 0): x, (0, dmask): y}))
    return out


def saturated_unit_basis(tower: TowerDescriptor, rounds: int | None = None) -> list[FieldElement]:
    """Subfield units with square roots adjoined until no product is ``±`` a square.

    Each round replaces one factor of a square product by its square root, so
    the generated group only grows.  For ``[L:Q] = 2^l`` the full unit group
    is reached after at most ``l − 1`` doublings of any element.
    """
    base = tower.base
    basis = subfield_units(base)
    spec = all_embeddings(base)[0]
    rounds = max(base.ell - 1, 0) if rounds is None else rounds
    for _ in range(rounds * len(basis)):
        found = None
        for mask in range(1, 1 << len(basis)):
            prod = base.one()
            for k in range(len(basis)):
                if mask >> k & 1:
                    prod = prod * basis[k]
            for sgn in (1, -1):
                root = square_root_in_L(prod * sgn)
                if root is not None:
                    found = (mask, root)
                    break
            if found:
                break
        if not found:
            break
        mask, root = found
        if real_embedding_sign(root, spec) < 0:
            root = -root
        basis[(mask & -mask).bit_length() - 1] = root
    return basis


def check_hypothesis_ortho(w: FieldElement) -> bool:
    """``w`` totally negative and ``g(w)/w ∈ L*²`` for every generator flip ``g``."""
    tower = w.tower
    if tower.s or not tower.is_totally_real_base:
        raise ValidationError("hypothesis check needs w in a totally real L")
    if not is_unit(w):
        raise ValidationError("hypothesis check needs a unit of O_L")
    if not is_totally_negative(w):
        return False
    return all(is_square_in_L(galois_flip(w, i) / w) for i in range(tower.ell))


@dataclass(frozen=True)
class SearchBudget:
    exponent_bound: int = 3
    max_candidates: int = 1_000_000
    residue_height: int = 2


@dataclass(frozen=True)
class UnitSearchResult:
    units: tuple
    candidates: int
    passed: dict = field(default_factory=dict)
    exponents: tuple = ()
    note: str = UNIT_GROUP_NOTE

    def __iter__(self):
        return iter(self.units)

    def __len__(self):
        return len(self.units)


def _exponent_vectors(k: int, bound: int):
    vecs = list(product(range(-bound, bound + 1), repeat=k))
    vecs.sort(key=lambda e: (sum(abs(x) for x in e), tuple(abs(x) for x in e), e))
    return vecs


def unit_search(tower: TowerDescriptor, budget: SearchBudget = SearchBudget()) -> UnitSearchResult:
    """Greedy ``S0`` among ``±∏ u_k^{e_k}`` (``|e_k| ≤ bound``) in canonical order.

    ``u_k`` are the subfield fundamental units ``ε_D`` after 2-saturation
    (see :func:`saturated_unit_basis`).

    Filters in order: total negativity, ``1 + 4O_L``, Galois condition,
    square-class independence.
    """
    base = tower.base
    if not base.is_prime_family:
        raise NotPrimeFamilyError("unit search needs distinct primes ≡ 1 mod 4")
    eps = saturated_unit_basis(base)
    embs = all_embeddings(base)
    # signs of ε_D under every real embedding, so negativity costs nothing
    sign_table = [[real_embedding_sign(e, spec) for spec in embs] for e in eps]
    vecs = _exponent_vectors(len(eps), budget.exponent_bound)
    total = 2 * len(vecs)
    chosen: list[FieldElement] = []
    exps: list = []
    passed = {"totally_negative": 0, "one_plus_4": 0, "galois": 0, "independent": 0}
    count = 0
    inv = [e ** -1 for e in eps]
    for e in vecs:
        for sgn in (-1, 1):
            count += 1
            if count > budget.max_candidates:
                raise BudgetExhaustedError(f"candidate budget {budget.max_candidates} exhausted "
                                           f"of {total}", partial=tuple(chosen))
            signs = [sgn] * len(embs)
            for k, ek in enumerate(e):
                if ek % 2:
                    signs = [a * b for a, b in zip(signs, sign_table[k])]
            if any(s > 0 for s in signs):
                continue
            passed["totally_negative"] += 1
            w = base.rational(sgn)
            for k, ek in enumerate(e):
                if ek:
                    w = w * (eps[k] if ek > 0 else inv[k]) ** abs(ek)
            if not in_one_plus_4OL(w):
                continue
            passed["one_plus_4"] += 1
            if not all(is_square_in_L(galois_flip(w, i) / w) for i in range(base.ell)):
                continue
            passed["galois"] += 1
            if not square_class_independent(chosen + [w]):
                continue
            passed["independent"] += 1
            chosen.append(w)
            exps.append((sgn, e))
    return UnitSearchResult(tuple(chosen), count, passed, tuple(exps))


def search_witness(w: FieldElement, budget: SearchBudget = SearchBudget()) -> UnramifiedCertificate | None:
    """First ``β`` (units first, then ``unit × residue`` by height) giving a valid certificate.

    Returns ``None`` when the whole candidate set was searched without
    success; raises :class:`BudgetExhaustedError` when the budget ran out first.
    """
    tower = w.tower
    if w.tower.s or not w.in_L() or w.is_zero():
        raise ValidationError("w must be a nonzero element of L")
    if is_integral(w):
        pre = ideal_square_root(w)
        if not pre.is_square:
            return None
    units = [tower.one()]
    if tower.ell and tower.is_totally_real_base:
        eps = subfield_units(tower)
        for e in _exponent_vectors(len(eps), budget.exponent_bound):
            if any(e):
                u = tower.one()
                for k, ek in enumerate(e):
                    u = u * eps[k] ** ek
                units.append(u)
    units = [s * u for u in units for s in (1, -1)]
    h = budget.residue_height
    residues = [c for c in product(range(-h + 1, h + 1), repeat=tower.degree_L) if any(c)]
    residues.sort(key=lambda c: (sum(abs(x) for x in c), tuple(abs(x) for x in c), tuple(-x for x in c)))
    residues = [from_L_coordinates(tower, c) for c in residues]
    tried = 0
    for r in [tower.one()] + [r for r in residues if r != tower.one()]:
        for u in units:
            beta = r * u
            tried += 1
            if tried > budget.max_candidates:
                raise BudgetExhaustedError(f"β budget {budget.max_candidates} exhausted")
            x = beta * beta * w
            if not (is_integral(x) and in_one_plus_4OL(x)):
                continue
            cert = check_unramified_witness(w, beta)
            if cert.valid:
                return cert
    return None


# ----------------------------------------------------------------- towers

def build_tower(primes, S0=()) -> TowerDescriptor:
    """Validated tower ``N = L(√w : w ∈ S0)`` over ``L = Q(√p : p ∈ primes)``."""
    primes = tuple(int(p) for p in primes)
    if not primes or len(set(primes)) != len(primes) or not all(p % 4 == 1 and _is_prime(p) for p in primes):
        raise NotPrimeFamilyError(f"{list(primes)} is not a set of distinct primes ≡ 1 mod 4")
    base = TowerDescriptor(primes)
    S0 = tuple(S0)
    for w in S0:
        if not isinstance(w, FieldElement) or w.tower != base:
            raise UnitNotInLError("each w must be an element of L")
        if not is_unit(w):
            raise UnitNotInLError(f"{w} is not a unit of O_L")
    for w in S0:
        if not in_one_plus_4OL(w):
            if not is_square_mod4(w):
                raise UnitClassError(f"unit class not square mod 4: {w}")
            raise UnitResidueError(f"{w} is a square mod 4 but not in 1 + 4O_L")
    for w in S0:
        if not check_hypothesis_ortho(w):
            raise HypothesisOrthoError(f"{w} is not totally negative with L(√w)/Q Galois")
    if not square_class_independent(S0):
        raise DependentUnitsError("units are dependent in O_L*/(O_L*)²")
    tower = TowerDescriptor(primes, S0, hypothesis_ortho=bool(S0))
    return tower


def root_discriminant_data(tower: TowerDescriptor) -> dict:
    """``δ(N) = δ(L) = (∏ p)^{1/2}`` recorded as exact integers."""
    P = 1
    for p in tower.level1_generators:
        P *= p
    return {"prod_primes": P, "exponent": "1/2", "Delta_N": discriminant_N(tower), "n": tower.degree}


__all__ = [
    "Ideal", "IdealSquare", "SearchBudget", "UNIT_GROUP_NOTE", "UnitSearchResult", "UnramifiedCertificate",
    "build_tower", "check_hypothesis_ortho", "check_unramified_witness", "fundamental_unit",
    "ideal_square_root", "olprime_basis", "root_discriminant_data", "saturated_unit_basis", "search_witness",
    "subfield_units",
    "unit_search",
]
