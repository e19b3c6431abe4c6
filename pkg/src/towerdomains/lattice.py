"""Small-rank Z-lattice algorithms driven by an exact rational Gram matrix.

All decisions (size reduction, Lovász test, enumeration pruning, CVP
minimality) are made in exact rational arithmetic.  Floats appear only to
pick integer search ranges, and every candidate is then re-checked exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product

import numpy as np
from mpmath import iv

from . import _linalg
from .errors import CapacityError, PrecisionError, ValidationError
from .intervals import frac, hi_q, imax, lo_q, precision

ENUM_RANK_CAP = 10
EXACT_COVER_RANK_CAP = 4


def _fr_matrix(rows):
    return tuple(tuple(Fraction(x) for x in row) for row in rows)


@dataclass(frozen=True)
class LatticeInstance:
    """A rank-k lattice: exact Gram, optional basis rows, optional transform.

    ``transform`` rows express this basis in terms of the basis it was
    derived from (``new_i = Σ_j U[i][j] old_j``).
    """

    gram: tuple
    basis: tuple | None = None
    transform: tuple | None = None

    @classmethod
    def from_basis(cls, rows) -> "LatticeInstance":
        rows = _fr_matrix(rows)
        gram = tuple(tuple(sum((x * y for x, y in zip(a, b)), Fraction(0)) for b in rows) for a in rows)
        return cls(gram, rows)

    @classmethod
    def from_gram(cls, gram, basis=None) -> "LatticeInstance":
        return cls(_fr_matrix(gram), basis)

    @property
    def rank(self) -> int:
        return len(self.gram)

    def scaled(self, c) -> "LatticeInstance":
        c = Fraction(c)
        basis = None
        if self.basis is not None:
            basis = tuple(tuple(x * c for x in row) for row in self.basis)
        return LatticeInstance(tuple(tuple(x * c * c for x in row) for row in self.gram), basis)

    def norm2(self, x) -> Fraction:
        g = self.gram
        k = len(g)
        return sum((Fraction(x[i]) * g[i][j] * x[j] for i in range(k) for j in range(k)), Fraction(0))

    def determinant(self) -> Fraction:
        return _linalg.det(self.gram)

    def to_json(self) -> str:
        obj = {"gram": [[str(x) for x in row] for row in self.gram]}
        if self.basis is not None and all(isinstance(x, Fraction) for row in self.basis for x in row):
            obj["basis"] = [[str(x) for x in row] for row in self.basis]
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str) -> "LatticeInstance":
        obj = json.loads(text) if isinstance(text, str) else text
        if "basis" in obj:
            lat = cls.from_basis([[Fraction(x) for x in row] for row in obj["basis"]])
            if "gram" in obj and _fr_matrix([[Fraction(x) for x in r] for r in obj["gram"]]) != lat.gram:
                raise ValidationError("gram does not match basis")
            return lat
        return cls.from_gram([[Fraction(x) for x in row] for row in obj["gram"]])


# ----------------------------------------------------------------- Gram–Schmidt

def gso(gram):
    """``(mu, B)`` with ``gram = mu·diag(B)·muᵀ``, ``mu`` unit lower triangular."""
    k = len(gram)
    mu = [[Fraction(0)] * k for _ in range(k)]
    B = [Fraction(0)] * k
    for i in range(k):
        mu[i][i] = Fraction(1)
        for j in range(i):
            s = gram[i][j] - sum((mu[j][l] * mu[i][l] * B[l] for l in range(j)), Fraction(0))
            mu[i][j] = s / B[j]
        B[i] = gram[i][i] - sum((mu[i][l] ** 2 * B[l] for l in range(i)), Fraction(0))
        if B[i] <= 0:
            raise ValidationError("Gram matrix is not positive definite (rank deficient basis)")
    return mu, B


def _round(q: Fraction) -> int:
    return math.floor(q + Fraction(1, 2))


def lll_reduce(lat: LatticeInstance, delta=Fraction(99, 100)) -> LatticeInstance:
    """Exact LLL on the Gram matrix; the result records the unimodular transform."""
    delta = Fraction(delta)
    if not Fraction(1, 4) < delta < 1:
        raise ValidationError("LLL needs 1/4 < delta < 1")
    k = lat.rank
    G = [list(row) for row in lat.gram]
    U = [[int(i == j) for j in range(k)] for i in range(k)]
    if k == 0:
        return LatticeInstance((), lat.basis, ())
    mu, B = gso(G)

    def reduce_row(i, j):
        if abs(mu[i][j]) <= Fraction(1, 2):
            return
        q = _round(mu[i][j])
        U[i] = [a - q * b for a, b in zip(U[i], U[j])]
        # b_i ← b_i − q b_j on the Gram
        for c in range(k):
            G[i][c] -= q * G[j][c]
        for r in range(k):
            G[r][i] -= q * G[r][j]
        for l in range(j):
            mu[i][l] -= q * mu[j][l]
        mu[i][j] -= q

    i = 1
    while i < k:
        for j in range(i - 1, -1, -1):
            reduce_row(i, j)
        if B[i] >= (delta - mu[i][i - 1] ** 2) * B[i - 1]:
            i += 1
        else:
            U[i], U[i - 1] = U[i - 1], U[i]
            G[i], G[i - 1] = G[i - 1], G[i]
            for row in G:
                row[i], row[i - 1] = row[i - 1], row[i]
            mu, B = gso(G)
            i = max(i - 1, 1)
    basis = None
    if lat.basis is not None:
        basis = tuple(tuple(sum((u * x for u, x in zip(U[r], col)), 0 * col[0]) for col in zip(*lat.basis))
                      for r in range(k))
    return LatticeInstance(_fr_matrix(G), basis, tuple(tuple(r) for r in U))


def lovasz_holds(lat: LatticeInstance, delta=Fraction(99, 100)) -> bool:
    mu, B = gso(lat.gram)
    k = lat.rank
    size = all(abs(mu[i][j]) <= Fraction(1, 2) for i in range(k) for j in range(i))
    return size and all(B[i] >= (Fraction(delta) - mu[i][i - 1] ** 2) * B[i - 1] for i in range(1, k))


# ----------------------------------------------------------------- enumeration

def enumerate_ball(gram, center, radius2, mu_B=None):
    """Yield ``(x, ‖x − c‖²)`` for every integer ``x`` with ``‖x − c‖² ≤ radius2``.

    Norms are taken in the Gram metric; everything is exact.
    """
    k = len(gram)
    if k > ENUM_RANK_CAP:
        raise CapacityError(f"enumeration capped at rank {ENUM_RANK_CAP}")
    mu, B = mu_B or gso(gram)
    c = [Fraction(x) for x in center]
    R = Fraction(radius2)
    x = [0] * k

    def rec(j, partial):
        s = sum((mu[i][j] * (x[i] - c[i]) for i in range(j + 1, k)), Fraction(0))
        cj = c[j] - s
        rem = R - partial
        if rem < 0:
            return
        r = math.sqrt(float(rem / B[j])) + 1e-9
        lo = math.floor(float(cj) - r) - 1
        hi_ = math.ceil(float(cj) + r) + 1
        # visit from the centre outwards for earlier good hits
        for v in sorted(range(lo, hi_ + 1), key=lambda v: abs(v - float(cj))):
            t = v - cj
            val = partial + B[j] * t * t
            if val > R:
                continue
            x[j] = v
            if j == 0:
                yield list(x), val
            else:
                yield from rec(j - 1, val)
        x[j] = 0

    if k == 0:
        yield [], Fraction(0)
        return
    yield from rec(k - 1, Fraction(0))


def _canonical_key(v):
    first = next((a for a in v if a), 0)
    w = [-a for a in v] if first < 0 else list(v)
    return tuple(w)


def _to_original(xred, U):
    k = len(xred)
    return [sum(xred[i] * U[i][j] for i in range(k)) for j in range(k)]


def shortest_vector_l2(lat: LatticeInstance):
    """Exact L² shortest nonzero vector: ``(coefficients, squared norm)``.

    Ties are broken by the lexicographically least sign-normalised coefficient
    vector in the input basis.
    """
    if lat.rank > ENUM_RANK_CAP:
        raise CapacityError(f"SVP enumeration capped at rank {ENUM_RANK_CAP}")
    red = lll_reduce(lat)
    R = min(red.gram[i][i] for i in range(red.rank))
    best = None
    hits = []
    for x, val in enumerate_ball(red.gram, [0] * red.rank, R):
        if not any(x):
            continue
        if best is None or val < best:
            best, hits = val, [x]
        elif val == best:
            hits.append(x)
    cands = [_canonical_key(_to_original(h, red.transform)) for h in hits]
    return list(min(cands)), best


def _coordinates(basis_rows, x):
    d = len(basis_rows[0])
    out = []
    for c in range(d):
        acc = 0
        for i, row in enumerate(basis_rows):
            if x[i]:
                acc = acc + row[c] * x[i]
        out.append(acc)
    return out


def _as_interval(v):
    if isinstance(v, (int, Fraction)):
        return frac(v)
    return v


def shortest_vector_linf(lat: LatticeInstance, bound, bits_: int = 128):
    """Shortest nonzero vector in L∞ among those certified ``≤ bound``.

    ``lat.basis`` supplies ambient coordinates (rationals or intervals).
    ``bound`` is a rational or an interval.  Candidates come from an exact L²
    enumeration of radius ``√d·bound`` (the L∞ ball sits inside it).
    Returns ``(coefficients, linf interval)`` or ``None``.
    """
    if lat.basis is None:
        raise ValidationError("L∞ search needs basis coordinates")
    if lat.rank > ENUM_RANK_CAP:
        raise CapacityError(f"SVP enumeration capped at rank {ENUM_RANK_CAP}")
    d = len(lat.basis[0])
    with precision(bits_):
        b_iv = _as_interval(bound)
        R = d * hi_q(b_iv) ** 2
        red = lll_reduce(LatticeInstance(lat.gram))
        certified, ambiguous = [], 0
        for xr, _ in enumerate_ball(red.gram, [0] * red.rank, R):
            if not any(xr):
                continue
            x = _to_original(xr, red.transform)
            coords = [_as_interval(c) for c in _coordinates(lat.basis, x)]
            linf = imax(abs(c) for c in coords)
            if hi_q(linf) <= lo_q(b_iv):
                certified.append((x, linf))
            elif lo_q(linf) <= hi_q(b_iv):
                ambiguous += 1
        if not certified:
            if ambiguous:
                raise PrecisionError("L∞ bound could not be decided at this precision")
            return None
        best = min(certified, key=lambda p: hi_q(p[1]))
        ties = [p for p in certified if lo_q(p[1]) <= hi_q(best[1])]
        x, linf = min(ties, key=lambda p: _canonical_key(p[0]))
        return list(_canonical_key(x)), linf


def _babai(red_gram, mu_B, c):
    mu, B = mu_B
    k = len(red_gram)
    x = [0] * k
    for j in range(k - 1, -1, -1):
        s = sum((mu[i][j] * (x[i] - c[i]) for i in range(j + 1, k)), Fraction(0))
        x[j] = _round(c[j] - s)
    return x


@dataclass(frozen=True)
class CVPResult:
    coefficients: list
    squared_distance: Fraction
    distance: object
    ambient_vector: list | None = None


def _cvp_coeffs(lat: LatticeInstance, target_coeffs, red=None):
    red = red or lll_reduce(LatticeInstance(lat.gram))
    U = red.transform
    Uinv = _linalg.inverse([[Fraction(x) for x in row] for row in U])
    c = [Fraction(x) for x in target_coeffs]
    # x_orig = x_red·U  ⇒  c_red = c·U⁻¹
    c_red = [sum((c[i] * Uinv[i][j] for i in range(len(c))), Fraction(0)) for j in range(len(c))]
    mu_B = gso(red.gram)
    x0 = _babai(red.gram, mu_B, c_red)
    diff = [a - b for a, b in zip(x0, c_red)]
    R = red.norm2(diff)
    best, hits = None, []
    for x, val in enumerate_ball(red.gram, c_red, R, mu_B):
        if best is None or val < best:
            best, hits = val, [x]
        elif val == best:
            hits.append(x)
    cands = sorted(tuple(_to_original(h, U)) for h in hits)
    return list(cands[0]), best, [list(h) for h in cands]


def closest_vector(lat: LatticeInstance, target, *, ambient: bool = False, bits_: int = 128) -> CVPResult:
    """Exact CVP: Babai nearest plane for the radius, then enumeration.

    ``target`` is in coefficient coordinates, or in ambient coordinates when
    ``ambient=True`` (needs rational basis rows; the part of the target
    orthogonal to the lattice span is included in the distance).
    """
    if lat.rank > ENUM_RANK_CAP:
        raise CapacityError(f"CVP enumeration capped at rank {ENUM_RANK_CAP}")
    perp2 = Fraction(0)
    if ambient:
        if lat.basis is None or not all(isinstance(x, Fraction) for row in lat.basis for x in row):
            raise PrecisionError("ambient targets need exact rational basis rows")
        t = [Fraction(x) for x in target]
        Bt = [sum((a * b for a, b in zip(row, t)), Fraction(0)) for row in lat.basis]
        coeffs = _linalg.solve([list(r) for r in lat.gram], Bt)
        perp2 = sum((a * a for a in t), Fraction(0)) - sum((a * b for a, b in zip(coeffs, Bt)), Fraction(0))
    else:
        coeffs = [Fraction(x) for x in target]
    x, d2, _ = _cvp_coeffs(lat, coeffs)
    total = d2 + perp2
    with precision(bits_):
        dist = iv.sqrt(frac(total))
    amb = None
    if lat.basis is not None and all(isinstance(v, Fraction) for row in lat.basis for v in row):
        amb = _coordinates(lat.basis, x)
    return CVPResult(x, total, dist, amb)


# ----------------------------------------------------------------- covering radius

@dataclass(frozen=True)
class CoveringRadius:
    """Enclosure of the covering radius.

    ``squared_lower``/``squared_upper`` are exact rationals; in exact mode
    they coincide and ``deep_hole`` holds a point at maximal distance.
    """

    interval: object
    squared_lower: Fraction
    squared_upper: Fraction
    method: str
    deep_hole: tuple | None = None
    relevant_vectors: tuple = field(default=(), repr=False)


def voronoi_relevant_vectors(lat: LatticeInstance):
    """Vectors ``v`` that are (up to sign) the unique shortest in ``v + 2Λ``."""
    k = lat.rank
    red = lll_reduce(LatticeInstance(lat.gram))
    out = []
    for c in product((0, 1), repeat=k):
        if not any(c):
            continue
        # minimise ‖c + 2z‖ ⇔ z closest to −c/2
        _, _, hits = _cvp_coeffs(lat, [Fraction(-x, 2) for x in c], red)
        if len(hits) == 2:
            v = [ci + 2 * zi for ci, zi in zip(c, hits[0])]
            out.append(v)
            out.append([-a for a in v])
    return out


def _exact_cover(lat: LatticeInstance):
    k = lat.rank
    G = [list(r) for r in lat.gram]
    rel = voronoi_relevant_vectors(lat)
    A = [[sum((G[i][j] * v[j] for j in range(k)), Fraction(0)) for i in range(k)] for v in rel]
    b = [lat.norm2(v) / 2 for v in rel]
    Af = np.array([[float(x) for x in row] for row in A])
    bf = np.array([float(x) for x in b])
    Gf = np.array([[float(x) for x in row] for row in G])
    scale = max(1.0, float(np.abs(bf).max()))
    cand = []
    for sub in combinations(range(len(rel)), k):
        M = Af[list(sub)]
        if abs(np.linalg.det(M)) < 1e-12 * scale ** k:
            continue
        xf = np.linalg.solve(M, bf[list(sub)])
        if np.all(Af @ xf <= bf + 1e-7 * scale):
            cand.append((float(xf @ Gf @ xf), sub))
    if not cand:
        raise PrecisionError("no Voronoi vertex found")
    top = max(c for c, _ in cand)
    best, best_x = None, None
    for val, sub in cand:
        if val < top * (1 - 1e-6) - 1e-12:
            continue
        try:
            x = _linalg.solve([A[i] for i in sub], [b[i] for i in sub])
        except ZeroDivisionError:
            continue
        if all(sum((a * xi for a, xi in zip(row, x)), Fraction(0)) <= bb for row, bb in zip(A, b)):
            n2 = lat.norm2(x)
            if best is None or n2 > best or (n2 == best and tuple(x) < best_x):
                best, best_x = n2, tuple(x)
    if best is None:
        raise PrecisionError("exact verification of Voronoi vertices failed")
    return best, best_x, rel


def _grid_lower(lat: LatticeInstance, budget: int):
    k = lat.rank
    red = lll_reduce(LatticeInstance(lat.gram))
    best, where = Fraction(0), None
    used = 0
    level = 1
    while True:
        pts = 2 ** (level * k)
        if used + pts > budget:
            break
        den = 2 ** level
        for idx in product(range(den), repeat=k):
            t = [Fraction(i, den) for i in idx]
            _, d2, _ = _cvp_coeffs(lat, t, red)
            if d2 > best:
                best, where = d2, tuple(t)
        used += pts
        level += 1
    return best, where


def covering_radius_small(lat: LatticeInstance, mode: str = "auto", node_budget: int = 4096,
                          bits_: int = 128) -> CoveringRadius:
    """Certified enclosure of the covering radius.

    ``exact`` (rank ≤ 4): maximal vertex norm of the Voronoi cell built from
    the Voronoi-relevant vectors.  ``bounds`` (rank ≤ 10): lower bound from
    CVP distances over a dyadic grid; upper bound ``½·√(Σ‖b*_i‖²)`` from the
    Babai box of an LLL-reduced basis.
    """
    k = lat.rank
    if mode == "auto":
        mode = "exact" if k <= EXACT_COVER_RANK_CAP else "bounds"
    if mode == "exact":
        if k > EXACT_COVER_RANK_CAP:
            raise CapacityError(f"exact covering radius capped at rank {EXACT_COVER_RANK_CAP}")
        r2, hole, rel = _exact_cover(lat)
        with precision(bits_):
            I = iv.sqrt(frac(r2))
        return CoveringRadius(I, r2, r2, "exact-voronoi", hole, tuple(tuple(v) for v in rel))
    if mode != "bounds":
        raise ValidationError(f"unknown covering radius mode {mode!r}")
    if k > ENUM_RANK_CAP:
        raise CapacityError(f"covering radius bounds capped at rank {ENUM_RANK_CAP}")
    lower, where = _grid_lower(lat, node_budget)
    red = lll_reduce(LatticeInstance(lat.gram))
    _, B = gso(red.gram)
    upper = sum(B, Fraction(0)) / 4
    with precision(bits_):
        I = iv.mpf([iv.sqrt(frac(lower)).a, iv.sqrt(frac(upper)).b])
    return CoveringRadius(I, lower, upper, "bounds-grid-babai", where)


__all__ = [
    "CVPResult", "CoveringRadius", "LatticeInstance", "closest_vector", "covering_radius_small",
    "enumerate_ball", "gso", "lll_reduce", "lovasz_holds", "shortest_vector_l2", "shortest_vector_linf",
    "voronoi_relevant_vectors",
]
