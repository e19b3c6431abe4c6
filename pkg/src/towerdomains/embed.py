"""Certified complex embeddings, Minkowski vectors and L²/L∞ norms.

An embedding of ``N`` is fixed by a sign for each ``√m_i`` and a branch for
each ``√w``; every basis element ``√m_D q_T`` then maps to a number that is
either real or purely imaginary, so embedding values are rectangles of real
intervals.

Norm convention: each real embedding contributes ``σ(a)²`` and each pair of
complex conjugate embeddings contributes ``|σ(a)|²`` once.  On CM fields
this gives ``‖1‖₂ = √(n/2)``; on totally real fields ``‖1‖₂ = √n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product

from mpmath import iv

from .errors import NotCMError, PrecisionError
from .field import FieldElement, TowerDescriptor, inner_product_exact
from .intervals import (ComplexInterval, contains, escalating, frac, imax, precision,
                        sign, width)


@dataclass(frozen=True)
class EmbeddingSpec:
    sign_choice: tuple[int, ...]
    branch_choice: tuple[int, ...] = ()
    precision_bits: int = 128

    def at(self, bits_: int) -> "EmbeddingSpec":
        return EmbeddingSpec(self.sign_choice, self.branch_choice, bits_)


def all_embeddings(tower: TowerDescriptor, bits_: int = 128) -> list[EmbeddingSpec]:
    """All ``n`` embeddings, L-signs major."""
    return [EmbeddingSpec(s, t, bits_)
            for s in product((1, -1), repeat=tower.ell)
            for t in product((1, -1), repeat=tower.s)]


def conjugate_spec(tower: TowerDescriptor, spec: EmbeddingSpec) -> EmbeddingSpec:
    """The embedding ``σ∘ι`` (complex conjugate of ``σ``)."""
    if tower.s == 0:
        s = tuple(-x if m < 0 else x for x, m in zip(spec.sign_choice, tower.level1_generators))
        return EmbeddingSpec(s, (), spec.precision_bits)
    if not tower.hypothesis_ortho:
        raise NotCMError("conjugate pairs are only tracked for CM towers")
    return EmbeddingSpec(spec.sign_choice, tuple(-t for t in spec.branch_choice), spec.precision_bits)


def slots(tower: TowerDescriptor, bits_: int = 128) -> list[tuple[EmbeddingSpec, bool]]:
    """Minkowski slots: every real embedding, plus one embedding per conjugate pair.

    Returns ``(spec, is_real)`` pairs.
    """
    if tower.s == 0:
        if tower.is_totally_real_base:
            return [(e, True) for e in all_embeddings(tower, bits_)]
        first_neg = next(i for i, m in enumerate(tower.level1_generators) if m < 0)
        return [(e, False) for e in all_embeddings(tower, bits_) if e.sign_choice[first_neg] == 1]
    if not tower.hypothesis_ortho:
        raise NotCMError("Minkowski slots need a totally real base or the tower hypothesis")
    return [(e, False) for e in all_embeddings(tower, bits_) if e.branch_choice[0] == 1]


@lru_cache(maxsize=4096)
def _basis_images(tower: TowerDescriptor, spec: EmbeddingSpec) -> dict:
    """``σ(√m_D q_T)`` for every basis key, as ComplexIntervals."""
    with precision(spec.precision_bits):
        zero = iv.mpf(0)
        root_m = []
        for s, m in zip(spec.sign_choice, tower.level1_generators):
            r = iv.sqrt(iv.mpf(abs(m))) * s
            root_m.append(ComplexInterval(r, zero) if m > 0 else ComplexInterval(zero, r))
        sqrt_md = [ComplexInterval(iv.mpf(1), zero)]
        for d in range(1, tower.degree_L):
            low = d & -d
            sqrt_md.append(sqrt_md[d ^ low] * root_m[low.bit_length() - 1])
        root_w = []
        for t, w in zip(spec.branch_choice, tower.level2_units):
            val = ComplexInterval(zero, zero)
            for (_, d), c in w._c.items():
                val = val + sqrt_md[d] * frac(c)
            if (val.im == 0) is not True and tower.s:
                raise NotCMError("√w branches are only handled for w in a totally real L")
            sg = sign(val.re)
            if sg is None:
                raise PrecisionError("cannot certify the sign of an embedding of w")
            r = iv.sqrt(abs(val.re)) * t
            root_w.append(ComplexInterval(r, zero) if sg > 0 else ComplexInterval(zero, r))
        q = [ComplexInterval(iv.mpf(1), zero)]
        for tm in range(1, tower.relative_degree):
            low = tm & -tm
            q.append(q[tm ^ low] * root_w[low.bit_length() - 1])
        return {(tm, d): sqrt_md[d] * q[tm] for tm in range(tower.relative_degree) for d in range(tower.degree_L)}


def evaluate(a: FieldElement, spec: EmbeddingSpec) -> ComplexInterval:
    """``σ(a)`` as a certified rectangle."""
    images = _basis_images(a.tower, spec)
    with precision(spec.precision_bits):
        zero = iv.mpf(0)
        acc = ComplexInterval(zero, zero)
        for key, c in a._c.items():
            acc = acc + images[key] * frac(c)
    return acc


def real_embedding_sign(a: FieldElement, spec: EmbeddingSpec, cap: int = 4096) -> int:
    """Certified sign of a real embedding value; escalates precision."""
    if a.is_zero():
        return 0
    for b in escalating(spec.precision_bits, cap):
        val = evaluate(a, spec.at(b))
        sg = sign(val.re)
        if sg is not None and sg != 0:
            return sg
    raise PrecisionError(f"sign of {a} not certified within {cap} bits")


def is_totally_negative(a: FieldElement) -> bool:
    """All real embeddings of ``a ∈ L`` (L totally real) are negative."""
    base = a.tower.base
    a = FieldElement(base, {(0, d): c for d, c in a.L_part(0).items()})
    return all(real_embedding_sign(a, e) < 0 for e in all_embeddings(base))


@dataclass(frozen=True)
class MinkowskiVector:
    entries: tuple[ComplexInterval, ...]
    is_real: tuple[bool, ...]
    specs: tuple[EmbeddingSpec, ...]

    def l2_squared(self):
        acc = iv.mpf(0)
        for z, real in zip(self.entries, self.is_real):
            acc = acc + (z.re ** 2 if real else z.abs2())
        return acc

    def linf(self):
        return imax(z.abs() for z in self.entries)

    def real_coordinates(self):
        """Coordinates in ``R^n`` (real part, then imaginary part for complex slots)."""
        out = []
        for z, real in zip(self.entries, self.is_real):
            out.append(z.re)
            if not real:
                out.append(z.im)
        return out

    def max_width(self):
        return max(z.max_width() for z in self.entries)


def embed_minkowski(a: FieldElement, bits_: int = 128) -> MinkowskiVector:
    sl = slots(a.tower, bits_)
    with precision(bits_):
        entries = tuple(evaluate(a, e) for e, _ in sl)
    return MinkowskiVector(entries, tuple(r for _, r in sl), tuple(e for e, _ in sl))


@dataclass(frozen=True)
class Norms:
    l2: object
    linf: object


def norms_certified(a: FieldElement, bits_: int = 128) -> Norms:
    """Interval enclosures of ``‖a‖₂`` and ``‖a‖∞``.

    When the exact inner product is available the L² enclosure is
    cross-checked against ``√⟨a, a⟩``.
    """
    vec = embed_minkowski(a, bits_)
    with precision(bits_):
        l2sq = vec.l2_squared()
        l2 = iv.sqrt(l2sq)
        linf = vec.linf()
        exact = inner_product_exact(a, a)
        if not _contains(l2sq, exact):
            raise PrecisionError("numeric L² norm does not enclose the exact value")
    return Norms(l2, linf)


def _contains(x, q: Fraction) -> bool:
    return contains(x, q)


def interval_inner_product(a: FieldElement, b: FieldElement, bits_: int = 128):
    """``½ Σ (z_i z̄'_i + z̄_i z'_i)`` over Minkowski slots (real slots: ``z z'``)."""
    va, vb = embed_minkowski(a, bits_), embed_minkowski(b, bits_)
    with precision(bits_):
        acc = iv.mpf(0)
        for za, zb, real in zip(va.entries, vb.entries, va.is_real):
            if real:
                acc = acc + za.re * zb.re
            else:
                acc = acc + za.re * zb.re + za.im * zb.im
    return acc


def component_coordinates(a: FieldElement, t: int, bits_: int = 128) -> list:
    """Real coordinates of ``a ∈ L·q_T`` in ``∏_{σ∈Ψ_L} R·(√-1)^{e_σ(T)}``.

    ``Ψ_L`` extends each embedding of ``L`` by the ``+`` branch on every ``√w``.
    """
    tower = a.tower
    out = []
    with precision(bits_):
        for s in product((1, -1), repeat=tower.ell):
            spec = EmbeddingSpec(s, (1,) * tower.s, bits_)
            z = evaluate(a, spec)
            out.append(z.im if _imaginary_component(tower, t, spec) else z.re)
    return out


def _imaginary_component(tower, t, spec) -> bool:
    images = _basis_images(tower, spec)
    z = images[(t, 0)]
    return (z.re == 0) is True


__all__ = [
    "EmbeddingSpec", "MinkowskiVector", "Norms", "all_embeddings", "component_coordinates", "conjugate_spec",
    "embed_minkowski", "evaluate", "interval_inner_product", "is_totally_negative", "norms_certified",
    "real_embedding_sign", "slots", "width",
]
