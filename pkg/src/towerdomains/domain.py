"""Finite-index sublattices ``O_{N,ε} ⊂ O_N`` and their box fundamental domains.

For each ``T ⊆ S0`` a short ``h_T ∈ O_L·q_T`` gives ``B_T = {h_T λ_D}``;
``O_{N,ε}`` is spanned by ``g_T λ_D η_T`` with ``g_T = h_T/q_T ∈ O_L`` and the
domain ``F_{N,ε}`` is the direct sum of the half-open boxes
``{Σ r_b b : 0 ≤ r_b < 2^{-#T}}``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from mpmath import iv, mp

from . import _linalg
from .embed import component_coordinates, evaluate, slots
from .errors import (CapacityError, InternalCheckError, NotCMError, PrecisionError,
                     ValidationError)
from .field import (FieldElement, SubsetOrder, TowerDescriptor, element_to_obj, gram_matrix,
                    inner_product_exact, multiplication_matrix, inverse, norm_L_over_Q,
                    popcount, tower_to_obj, trace_over_Q)
from .integers import (L_coordinates, discriminant_L, discriminant_N, has_integral_basis_L,
                       integral_basis_element, lambda_basis, to_integral_coordinates,
                       units_in_one_plus_4)
from .intervals import frac, hi_q, lo_q, mid, precision, to_strs
from .lattice import LatticeInstance, shortest_vector_linf

VERTEX_CAP = 2 ** 20
LATTICE_RANK_CAP = 10

NU2_CONSTANT_EXPR = "1/2 + log2(sqrt(5)/2)"
NUINF_CONSTANT_EXPR = "log2(3/2)"


def nu2_constant() -> float:
    return 0.5 + math.log(math.sqrt(5) / 2) / math.log(2)


def nuinf_constant() -> float:
    return math.log(1.5) / math.log(2)


@dataclass(frozen=True)
class DomainBasis:
    """``h_T`` (as ``g_T = h_T/q_T ∈ O_L``) for every ``T``, plus the subset order."""

    tower: TowerDescriptor
    g: tuple                      # g[T] ∈ L, over the base descriptor
    order: SubsetOrder
    h_linf: tuple = ()            # certified ‖h_T‖∞ intervals
    minkowski: object = None      # certified Δ(L)^{1/(2n(L))}
    slack: Fraction = Fraction(0)
    bits: int = 128

    @property
    def n(self) -> int:
        return self.tower.degree

    def h(self, t: int) -> FieldElement:
        return self.tower.lift(self.g[t]) * self.tower.q(t)

    def basis_T(self, t: int) -> list[FieldElement]:
        """``B_T = [h_T λ_D]``."""
        h = self.h(t)
        return [h * self.tower.lift(lam) for lam in lambda_basis(self.tower.base)]

    def sublattice_generator(self, t: int, d: int) -> FieldElement:
        """``(h_T λ_D) q_T^{-1} η_T = g_T λ_D η_T``."""
        tower = self.tower
        lam = lambda_basis(tower.base)[d]
        return tower.lift(self.g[t] * lam) * integral_basis_element(tower, t, 0)

    def keys(self):
        return [(t, d) for t in range(self.tower.relative_degree) for d in range(self.tower.degree_L)]

    def sublattice_basis(self) -> list[FieldElement]:
        return [self.sublattice_generator(t, d) for t, d in self.keys()]

    def to_obj(self) -> dict:
        return {
            "tower": tower_to_obj(self.tower),
            "order": list(self.order.order),
            "g": [[str(c) for c in L_coordinates(gt)] for gt in self.g],
            "h_linf": [to_strs(x) for x in self.h_linf],
            "slack": str(self.slack),
            "bits": self.bits,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True)

    @classmethod
    def from_obj(cls, obj, tower: TowerDescriptor | None = None) -> "DomainBasis":
        from .field import tower_from_obj
        from .integers import from_L_coordinates
        if isinstance(obj, str):
            obj = json.loads(obj)
        tower = tower or tower_from_obj(obj["tower"])
        g = tuple(from_L_coordinates(tower.base, [Fraction(c) for c in row]) for row in obj["g"])
        bits_ = int(obj.get("bits", 128))
        h_linf, bound = _certify_h(tower, g, bits_)
        dom = cls(tower, g, SubsetOrder(tower.s, tuple(obj["order"])), h_linf, bound,
                  Fraction(obj.get("slack", 0)), bits_)
        _validate(dom)
        return dom


def _certify_h(tower: TowerDescriptor, g, bits_: int):
    """Certified ``‖h_T‖∞`` for every ``T`` and the bound ``Δ(L)^{1/(2n(L))}``."""
    from .embed import norms_certified
    with precision(bits_):
        bound = iv.mpf(discriminant_L(tower)) ** (iv.mpf(1) / (2 * tower.degree_L))
    h_linf = tuple(norms_certified(tower.lift(gt) * tower.q(t), bits_).linf for t, gt in enumerate(g))
    return h_linf, bound


def _validate(dom: DomainBasis):
    for t, gt in enumerate(dom.g):
        if gt.is_zero() or any(c.denominator != 1 for c in L_coordinates(gt)):
            raise ValidationError(f"h_T/q_T must be a nonzero element of O_L (T={t})")
    if dom.g[0] != dom.tower.base.one():
        raise ValidationError("h_∅ must be 1")


def _check_tower(tower: TowerDescriptor):
    if not has_integral_basis_L(tower):
        raise ValidationError("domain needs the λ-basis of O_L")
    if tower.s:
        if not tower.hypothesis_ortho:
            raise NotCMError("towers with S0 ≠ ∅ must satisfy the tower hypothesis")
        if not units_in_one_plus_4(tower):
            raise ValidationError("every w must be a unit in 1 + 4O_L")
    elif not (tower.is_totally_real or tower.is_cm):
        raise NotCMError("domain needs a totally real or CM field")


def component_gram(tower: TowerDescriptor, t: int) -> list[list[Fraction]]:
    """Exact Gram of ``{λ_D q_T}`` in the real coordinates over ``Ψ_L``.

    ``Σ_σ y_σ(a) y_σ(b) = (−1)^{#T}·Tr_{L/Q}(a b q_T²)`` since ``σ(q_T²) < 0``
    exactly when ``#T`` is odd.
    """
    base = tower.base
    lam = lambda_basis(base)
    q2 = FieldElement(base, {(0, dd): c for dd, c in tower.w_prod[t].items()})
    sgn = -1 if popcount(t) % 2 else 1
    return [[sgn * trace_over_Q(a * b * q2) for b in lam] for a in lam]


def build_domain(tower: TowerDescriptor, order: SubsetOrder | None = None, bits_: int = 128) -> DomainBasis:
    """``h_∅ = 1``; for ``T ≠ ∅`` an L∞-shortest nonzero vector of ``O_L q_T``."""
    _check_tower(tower)
    if tower.degree_L > LATTICE_RANK_CAP:
        raise CapacityError(f"lattice rank cap: n(L) = {tower.degree_L} > {LATTICE_RANK_CAP}")
    order = order or SubsetOrder(tower.s)
    base = tower.base
    n_L = tower.degree_L
    with precision(bits_):
        bound = iv.mpf(discriminant_L(tower)) ** (iv.mpf(1) / (2 * n_L))
    g = [base.one()]
    lam = lambda_basis(base)
    for t in range(1, tower.relative_degree):
        rows = [component_coordinates(tower.lift(l) * tower.q(t), t, bits_) for l in lam]
        lat = LatticeInstance(tuple(tuple(r) for r in component_gram(tower, t)), tuple(tuple(r) for r in rows))
        found = shortest_vector_linf(lat, bound, bits_)
        if found is None:
            raise InternalCheckError(f"no lattice vector within the Minkowski bound for T={t}")
        gt = base.zero()
        for xd, l in zip(found[0], lam):
            gt = gt + l * xd
        g.append(gt)
    h_linf, bound = _certify_h(tower, g, bits_)
    dom = DomainBasis(tower, tuple(g), order, h_linf, bound, Fraction(0), bits_)
    _validate(dom)
    return dom


# ----------------------------------------------------------------- reduction

@dataclass(frozen=True)
class ReductionResult:
    """``input = residue + shift``; residue coefficients ``r[(T, D)]`` on ``B_T``.

    ``shift_coords[(T, D)]`` are integer coordinates of the shift on the
    ``O_{N,ε}`` generators ``g_T λ_D η_T``.
    """

    residue_coeffs: dict
    shift_coords: dict
    exact: bool
    residue: FieldElement | None = None
    shift: FieldElement | None = None

    def to_obj(self) -> dict:
        def ser(v):
            return str(v) if isinstance(v, Fraction) else to_strs(v)
        return {
            "exact": self.exact,
            "residue_coeffs": [[t, d, ser(v)] for (t, d), v in sorted(self.residue_coeffs.items())],
            "shift_coords": [[t, d, int(v)] for (t, d), v in sorted(self.shift_coords.items())],
            "residue": element_to_obj(self.residue) if self.residue is not None else None,
        }


class _Reducer:
    """Per-domain rational matrices: ``s = A_T · (Q-basis coefficients of a_T)``."""

    def __init__(self, dom: DomainBasis):
        self.dom = dom
        tower = dom.tower
        base = tower.base
        n_L = tower.degree_L
        lam_to_std = [L_coordinates(FieldElement(base, {(0, d): 1})) for d in range(n_L)]
        C = _linalg.transpose(lam_to_std)           # λ-coords = C · std
        self.A = []
        self.gen = {}
        for t in range(tower.relative_degree):
            Minv = multiplication_matrix(inverse(dom.g[t]))
            A = _linalg.matmul(C, Minv)
            scale = 2 ** popcount(t)
            self.A.append([[scale * x for x in row] for row in A])
        for t, d in dom.keys():
            self.gen[(t, d)] = dom.sublattice_generator(t, d)
        with precision(dom.bits):
            self.A_iv = [[[frac(x) for x in row] for row in A] for A in self.A]


def _reducer(dom: DomainBasis) -> _Reducer:
    cache = dom.__dict__.get("_reducer_cache")
    if cache is None:
        cache = _Reducer(dom)
        object.__setattr__(dom, "_reducer_cache", cache)
    return cache


def reduce_point(dom: DomainBasis, alpha) -> ReductionResult:
    """Move ``alpha`` into ``F_{N,ε}`` by a translate in ``O_{N,ε}``.

    ``alpha`` is a FieldElement (exact) or a mapping ``(T, D) -> interval``
    of coefficients on ``√m_D q_T`` (numeric; floors that cannot be decided
    raise :class:`PrecisionError`).
    """
    tower = dom.tower
    red = _reducer(dom)
    n_L = tower.degree_L
    exact = isinstance(alpha, FieldElement)
    if exact:
        if alpha.tower != tower:
            raise ValidationError("point is not in this tower")
        cur = {k: v for k, v in alpha._c.items()}
        zero = Fraction(0)
    else:
        cur = dict(alpha)
        zero = iv.mpf(0)
    residue, shift = {}, {}
    total_shift = tower.zero()
    with precision(dom.bits):
        for t in reversed(red_order(dom)):
            vec = [cur.get((t, d), zero) for d in range(n_L)]
            A = red.A[t] if exact else red.A_iv[t]
            s = [sum((A[i][j] * vec[j] for j in range(n_L)), zero) for i in range(n_L)]
            scale = Fraction(1, 2 ** popcount(t))
            tau = tower.zero()
            for d, sd in enumerate(s):
                if exact:
                    fl = math.floor(sd)
                    r = scale * (sd - fl)
                else:
                    fl = math.floor(lo_q(sd))
                    if math.floor(hi_q(sd)) != fl:
                        raise PrecisionError(f"coefficient s_(T={t},D={d}) straddles an integer; raise precision")
                    r = (sd - fl) * frac(scale)
                residue[(t, d)] = r
                shift[(t, d)] = fl
                if fl:
                    tau = tau + red.gen[(t, d)] * fl
            total_shift = total_shift + tau
            for k, v in tau._c.items():
                cur[k] = cur.get(k, zero) - (v if exact else frac(v))
    if exact:
        res_el = alpha - total_shift
        return ReductionResult(residue, shift, True, res_el, total_shift)
    return ReductionResult(residue, shift, False, None, total_shift)


def red_order(dom: DomainBasis):
    return dom.order.order


def residue_element(dom: DomainBasis, coeffs: dict) -> FieldElement:
    """``Σ r_b b`` over all ``T`` and ``b ∈ B_T``."""
    out = dom.tower.zero()
    for t in range(dom.tower.relative_degree):
        for d, b in enumerate(dom.basis_T(t)):
            r = coeffs.get((t, d), 0)
            if r:
                out = out + b * r
    return out


def in_box(dom: DomainBasis, coeffs: dict) -> bool:
    return all(0 <= v < Fraction(1, 2 ** popcount(t)) for (t, _), v in coeffs.items())


# ----------------------------------------------------------------- index & covolume

def index_in_ON(dom: DomainBasis) -> int:
    """``[O_N : O_{N,ε}]`` two ways: ``∏ |N(g_T)|`` and a change-of-basis determinant."""
    by_norm = 1
    for gt in dom.g:
        v = abs(norm_L_over_Q(gt))
        if v.denominator != 1:
            raise InternalCheckError("g_T is not integral")
        by_norm *= int(v)
    rows = [to_integral_coordinates(x).vector() for x in dom.sublattice_basis()]
    if any(c.denominator != 1 for r in rows for c in r):
        raise InternalCheckError("O_{N,ε} generator outside O_N")
    by_det = abs(_linalg.det(rows))
    if by_det != by_norm:
        raise InternalCheckError(f"index mismatch: norms {by_norm} vs determinant {by_det}")
    return by_norm


def covolume_squared(dom: DomainBasis) -> Fraction:
    """``det Gram(O_{N,ε})`` under the exact Minkowski inner product."""
    return _linalg.det(gram_matrix(dom.sublattice_basis()))


def expected_covolume_squared(dom: DomainBasis, index: int | None = None) -> Fraction:
    """``(covol(O_N)·index)²`` with ``covol(O_N)² = 2^{-2r₂} Δ(N)``."""
    tower = dom.tower
    index = index_in_ON(dom) if index is None else index
    r2 = 0 if tower.is_totally_real else tower.degree // 2
    return Fraction(discriminant_N(tower), 2 ** (2 * r2)) * index ** 2


def is_block_orthogonal(dom: DomainBasis) -> bool:
    basis = {k: dom.sublattice_generator(*k) for k in dom.keys()}
    blocks = {t: dom.basis_T(t) for t in range(dom.tower.relative_degree)}
    for t1, b1 in blocks.items():
        for t2, b2 in blocks.items():
            if t1 < t2 and any(inner_product_exact(x, y) != 0 for x in b1 for y in b2):
                return False
    return bool(basis)


# ----------------------------------------------------------------- radii

@dataclass(frozen=True)
class Radii:
    linf: object
    l2: object
    method: str
    l2_squared: Fraction | None = None
    linf_vertex: tuple | None = None


def _block_l2_sup(dom: DomainBasis, t: int) -> Fraction:
    """Exact ``max ‖Σ r_b b‖²`` over the vertices of block ``T`` (a convex max)."""
    B = dom.basis_T(t)
    G = gram_matrix(B)
    k = len(B)
    side = Fraction(1, 2 ** popcount(t))
    best = Fraction(0)
    for mask in range(1 << k):
        idx = [i for i in range(k) if mask >> i & 1]
        val = sum((G[i][j] for i in idx for j in idx), Fraction(0)) * side * side
        if val > best:
            best = val
    return best


def _linf_vertex(dom: DomainBasis, bits_: int):
    tower = dom.tower
    dom.keys()
    elems = []
    sides = []
    for t in range(tower.relative_degree):
        for b in dom.basis_T(t):
            elems.append(b)
            sides.append(Fraction(1, 2 ** popcount(t)))
    sl = [spec for spec, _ in slots(tower, bits_)]
    with precision(bits_):
        vals = [[evaluate(b, spec) for spec in sl] for b in elems]
    k = len(elems)
    re = np.array([[float(mid(v.re)) * float(s) for v in row] for row, s in zip(vals, sides)])
    im = np.array([[float(mid(v.im)) * float(s) for v in row] for row, s in zip(vals, sides)])
    verts = ((np.arange(1 << k)[:, None] >> np.arange(k)[None, :]) & 1).astype(float)
    mags = np.hypot(verts @ re, verts @ im)            # (2^k, slots)
    fmax = mags.max()
    margin = 1e-9 * (1.0 + np.abs(re).sum() + np.abs(im).sum())
    cand = np.argwhere(mags >= fmax - margin)
    best = None
    with precision(bits_):
        for vi, si in cand:
            z_re, z_im = iv.mpf(0), iv.mpf(0)
            for j in range(k):
                if vi >> j & 1:
                    z_re = z_re + vals[j][si].re * frac(sides[j])
                    z_im = z_im + vals[j][si].im * frac(sides[j])
            m = iv.sqrt(z_re ** 2 + z_im ** 2)
            if best is None or hi_q(m) > hi_q(best[0]):
                best = (m, int(vi))
        if lo_q(best[0]) < Fraction(float(fmax)) - Fraction(float(margin)) / 2:
            raise PrecisionError("vertex maximum not separated at this precision")
    return best[0], tuple(int(best[1] >> j & 1) for j in range(k))


def domain_radii(dom: DomainBasis, mode: str = "auto", vertex_cap: int = VERTEX_CAP) -> Radii:
    """Sup of ``‖·‖∞`` and ``‖·‖₂`` over the closed box ``F_{N,ε}``.

    ``vertex``: exact L² from per-block vertex maxima (blocks are
    orthogonal), certified L∞ from all ``2^n`` vertices.  ``triangle``:
    ``Σ_T 2^{-#T} Σ_b ‖b‖`` for both norms.
    """
    n = dom.n
    bits_ = dom.bits
    if mode == "auto":
        mode = "vertex" if 2 ** n <= vertex_cap else "triangle"
    if mode == "vertex":
        if 2 ** n > vertex_cap:
            raise CapacityError(f"2^{n} vertices exceed the cap {vertex_cap}")
        l2sq = sum((_block_l2_sup(dom, t) for t in range(dom.tower.relative_degree)), Fraction(0))
        linf, vertex = _linf_vertex(dom, bits_)
        with precision(bits_):
            l2 = iv.sqrt(frac(l2sq))
        return Radii(linf, l2, "vertex", l2sq, vertex)
    if mode != "triangle":
        raise ValidationError(f"unknown radius mode {mode!r}")
    from .embed import norms_certified
    with precision(bits_):
        linf, l2 = iv.mpf(0), iv.mpf(0)
        for t in range(dom.tower.relative_degree):
            side = frac(Fraction(1, 2 ** popcount(t)))
            for b in dom.basis_T(t):
                nb = norms_certified(b, bits_)
                linf = linf + side * nb.linf
                l2 = l2 + side * nb.l2
    return Radii(linf, l2, "triangle")


# ----------------------------------------------------------------- reporting

BOUND_COLUMNS = ["n", "l2_radius", "linf_radius", "log_n_l2", "log_n_linf", "index", "eps_hat",
                 "target_nu2", "target_nuinf"]


@dataclass(frozen=True)
class BoundReport:
    n: int
    l2_radius: object
    linf_radius: object
    log_n_l2: float
    log_n_linf: float
    index: int
    eps_hat: float
    target_nu2: float
    target_nuinf: float
    method: str
    nu2_constant: float = field(default_factory=nu2_constant)
    nuinf_constant: float = field(default_factory=nuinf_constant)

    def row(self) -> list[str]:
        def f(x):
            return mp.nstr(mp.mpf(x), 12) if not isinstance(x, float) else repr(round(x, 12))
        return [str(self.n), mp.nstr(mid(self.l2_radius), 15), mp.nstr(mid(self.linf_radius), 15),
                f(self.log_n_l2), f(self.log_n_linf), str(self.index), f(self.eps_hat),
                f(self.target_nu2), f(self.target_nuinf)]

    def to_obj(self) -> dict:
        return dict(zip(BOUND_COLUMNS, self.row())) | {"method": self.method}


def _log_n(x, n: int) -> float:
    if n == 1:
        return float("nan")
    return float(mp.log(x) / mp.log(n))


def bound_report(dom: DomainBasis, mode: str = "auto", vertex_cap: int = VERTEX_CAP) -> BoundReport:
    """Radii, ``log_n`` of the radii, index and achieved ``ε̂`` beside the asymptotic targets."""
    from .embed import norms_certified
    radii = domain_radii(dom, mode, vertex_cap)
    n = dom.n
    eps_hat = 0.0
    for t in range(dom.tower.relative_degree):
        for b in dom.basis_T(t):
            eps_hat = max(eps_hat, _log_n(mid(norms_certified(b, dom.bits).linf), n))
    l2 = mid(radii.l2)
    linf = mid(radii.linf)
    return BoundReport(n, radii.l2, radii.linf, _log_n(l2, n), _log_n(linf, n), index_in_ON(dom),
                       eps_hat, nu2_constant() + 2 * eps_hat, nuinf_constant() + 2 * eps_hat, radii.method)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BOUND_COLUMNS)
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


__all__ = [
    "BOUND_COLUMNS", "BoundReport", "DomainBasis", "Radii", "ReductionResult", "bound_report",
    "build_domain", "component_gram", "covolume_squared", "domain_radii", "expected_covolume_squared",
    "in_box", "index_in_ON", "is_block_orthogonal", "nu2_constant", "nuinf_constant", "reduce_point",
    "reports_to_csv", "residue_element",
]
