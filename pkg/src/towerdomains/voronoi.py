"""Minkowski lattices of small fields, covering radii, volume bounds, cyclotomic scan.

Two field families are supported:

* multiquadratic fields ``Q(√m_1, …)`` (λ-basis, ``S0 = ∅``);
* cyclotomic fields ``Q(ζ_m)`` (power basis ``ζ^0 … ζ^{φ(m)-1}``), whose
  Gram matrix is ``½·Tr(ζ^{a-b})`` with
  ``Tr(ζ^k) = μ(m/g)·φ(m)/φ(m/g)``, ``g = gcd(k, m)``.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial, gcd

from mpmath import iv, mp

from .errors import CapacityError, PrecisionError, ValidationError
from .field import TowerDescriptor, gram_matrix
from .integers import discriminant_L, lambda_basis, signature_L
from .intervals import escalating, frac, hi_q, hull, lo_q, precision, to_strs
from .intervals import mid as _mid
from .lattice import LatticeInstance, covering_radius_small, shortest_vector_l2

SVP_DEGREE_CAP = 8


# ----------------------------------------------------------------- arithmetic helpers

def factorize(m: int) -> dict[int, int]:
    out: dict[int, int] = {}
    p = 2
    while p * p <= m:
        while m % p == 0:
            out[p] = out.get(p, 0) + 1
            m //= p
        p += 1
    if m > 1:
        out[m] = out.get(m, 0) + 1
    return out


def euler_phi(m: int) -> int:
    out = m
    for p in factorize(m):
        out = out // p * (p - 1)
    return out


def mobius(m: int) -> int:
    f = factorize(m)
    if any(e > 1 for e in f.values()):
        return 0
    return -1 if len(f) % 2 else 1


def cyclotomic_trace(m: int, k: int) -> int:
    """``Tr_{Q(ζ_m)/Q}(ζ_m^k)``."""
    g = gcd(k, m)
    return mobius(m // g) * euler_phi(m) // euler_phi(m // g)


def cyclotomic_discriminant(m: int) -> int:
    """``|Δ(Q(ζ_m))| = m^φ / ∏_{p|m} p^{φ/(p-1)}``."""
    phi = euler_phi(m)
    out = Fraction(m) ** phi
    for p in factorize(m):
        out /= Fraction(p) ** (phi // (p - 1))
    return int(out)


def ball_volume(n: int, bits_: int = 128):
    """Certified volume of the unit ball in ``R^n``."""
    with precision(bits_):
        if n % 2 == 0:
            k = n // 2
            return iv.pi ** k / factorial(k)
        k = (n - 1) // 2
        return iv.mpf(2) ** n * iv.pi ** k * factorial(k) / factorial(n)


# ----------------------------------------------------------------- fields

@dataclass(frozen=True)
class FieldSpec:
    """A field given by multiquadratic generators or a cyclotomic conductor."""

    kind: str
    generators: tuple = ()
    conductor: int = 1

    @classmethod
    def multiquadratic(cls, *gens: int) -> "FieldSpec":
        TowerDescriptor(tuple(gens))
        return cls("multiquadratic", tuple(gens))

    @classmethod
    def cyclotomic(cls, m: int) -> "FieldSpec":
        if m < 1:
            raise ValidationError("cyclotomic conductor must be positive")
        return cls("cyclotomic", (), int(m))

    @classmethod
    def from_obj(cls, obj) -> "FieldSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        if "cyclotomic" in obj:
            return cls.cyclotomic(int(obj["cyclotomic"]))
        if "level1" in obj:
            if obj.get("S0"):
                raise ValidationError("field reports take fields with S0 = ∅")
            return cls.multiquadratic(*[int(m) for m in obj["level1"]])
        raise ValidationError("field spec needs 'level1' or 'cyclotomic'")

    def to_obj(self) -> dict:
        return {"cyclotomic": self.conductor} if self.kind == "cyclotomic" else {"level1": list(self.generators)}

    @property
    def name(self) -> str:
        if self.kind == "cyclotomic":
            return f"Q(zeta_{self.conductor})"
        if not self.generators:
            return "Q"
        return "Q(" + ",".join(f"sqrt({m})" for m in self.generators) + ")"

    @property
    def degree(self) -> int:
        return euler_phi(self.conductor) if self.kind == "cyclotomic" else 1 << len(self.generators)

    @property
    def r2(self) -> int:
        if self.kind == "cyclotomic":
            return 0 if self.conductor <= 2 else self.degree // 2
        return signature_L(TowerDescriptor(self.generators))[1]

    @property
    def discriminant(self) -> int:
        """``|Δ(K)|``."""
        if self.kind == "cyclotomic":
            return cyclotomic_discriminant(self.conductor)
        return discriminant_L(TowerDescriptor(self.generators))

    def lattice(self) -> LatticeInstance:
        """Minkowski lattice of ``O_K`` with the exact Gram matrix."""
        if self.kind == "cyclotomic":
            m, n = self.conductor, self.degree
            half = Fraction(1, 2) if self.r2 else Fraction(1)
            return LatticeInstance.from_gram([[half * cyclotomic_trace(m, a - b) for b in range(n)]
                                              for a in range(n)])
        tower = TowerDescriptor(self.generators)
        if tower.ell and not (tower.is_totally_real or tower.is_cm):
            raise ValidationError("multiquadratic field must be totally real or CM")
        return LatticeInstance.from_gram(gram_matrix(lambda_basis(tower)))


# ----------------------------------------------------------------- checks

@dataclass(frozen=True)
class MinNorm:
    squared: Fraction
    vector: tuple
    bound_squared: Fraction
    holds: bool
    equality: bool


def min_norm_check(fld: FieldSpec) -> MinNorm:
    """Exact ``min ‖α‖₂²`` over ``O_K ∖ 0`` against ``n/2``."""
    if fld.degree > SVP_DEGREE_CAP:
        raise CapacityError(f"exact SVP capped at degree {SVP_DEGREE_CAP}")
    v, sq = shortest_vector_l2(fld.lattice())
    bound = Fraction(fld.degree, 2)
    return MinNorm(sq, tuple(v), bound, sq >= bound, sq == bound)


def covering_radius_field(fld: FieldSpec, mode: str = "auto", node_budget: int = 4096, bits_: int = 128):
    return covering_radius_small(fld.lattice(), mode, node_budget, bits_)


@dataclass(frozen=True)
class VolumeBound:
    lhs: object           # 2^{-r2} Δ^{1/2}
    rhs: object           # μ^n · vol(B_n)
    holds: bool
    exact: bool
    log_lhs_terms: object  # ½ log δ − (r2/n) log 2 − ½(1 + log 2π)
    log_d: object
    residual: object       # log d − log_lhs_terms


def volbound_eval(fld: FieldSpec, cover=None, bits_: int = 128) -> VolumeBound:
    """Certified ``2^{-r2}√Δ ≤ (d√n)^n vol(B_n)`` with ``d√n`` the covering radius."""
    cover = cover or covering_radius_field(fld, bits_=bits_)
    n, r2, disc = fld.degree, fld.r2, fld.discriminant
    mu2_hi = cover.squared_upper
    mu2_lo = cover.squared_lower
    exact = mu2_lo == mu2_hi
    holds = None
    if exact and n == 1:
        # vol(B_1) = 2: compare squares in Q
        holds = Fraction(disc, 4 ** r2) <= 4 * mu2_lo
    for b in escalating(bits_):
        with precision(b):
            lhs = iv.sqrt(iv.mpf(disc)) / iv.mpf(2) ** r2
            mu2 = hull([frac(mu2_lo), frac(mu2_hi)])
            rhs = iv.sqrt(mu2) ** n * ball_volume(n, b)
            if holds is None:
                if hi_q(lhs) <= lo_q(rhs):
                    holds = True
                elif lo_q(lhs) > hi_q(rhs):
                    holds = False
            if holds is not None:
                log_delta = iv.log(iv.mpf(disc)) / n
                terms = log_delta / 2 - iv.mpf(r2) / n * iv.log(2) - (1 + iv.log(2 * iv.pi)) / 2
                log_d = iv.log(iv.sqrt(mu2 / n))
                return VolumeBound(lhs, rhs, holds, exact, terms, log_d, log_d - terms)
    raise PrecisionError("volume inequality undecided at the precision cap")


@dataclass(frozen=True)
class FieldReport:
    name: str
    n: int
    r2: int
    discriminant: int
    delta: object
    mu_interval: object
    mu_squared: tuple
    shortest_l2_squared: Fraction
    d: object
    volume: VolumeBound
    min_norm: MinNorm

    def to_obj(self) -> dict:
        return {
            "field": self.name, "n": self.n, "r2": self.r2, "discriminant": self.discriminant,
            "delta": to_strs(self.delta), "mu_interval": to_strs(self.mu_interval),
            "mu_squared": [str(x) for x in self.mu_squared],
            "shortest_l2_squared": str(self.shortest_l2_squared), "d": to_strs(self.d),
            "min_norm": {"holds": self.min_norm.holds, "equality": self.min_norm.equality,
                               "bound_squared": str(self.min_norm.bound_squared)},
            "volume_inequality": {"holds": self.volume.holds, "exact": self.volume.exact,
                                  "lhs": to_strs(self.volume.lhs), "rhs": to_strs(self.volume.rhs),
                                  "log_lhs_terms": to_strs(self.volume.log_lhs_terms),
                                  "log_d": to_strs(self.volume.log_d),
                                  "residual": to_strs(self.volume.residual)},
        }


def field_report(fld: FieldSpec, mode: str = "auto", node_budget: int = 4096, bits_: int = 128) -> FieldReport:
    cover = covering_radius_field(fld, mode, node_budget, bits_)
    mn = min_norm_check(fld)
    vol = volbound_eval(fld, cover, bits_)
    n = fld.degree
    with precision(bits_):
        delta = iv.mpf(fld.discriminant) ** (iv.mpf(1) / n)
        d = cover.interval / iv.sqrt(iv.mpf(n))
    return FieldReport(fld.name, n, fld.r2, fld.discriminant, delta, cover.interval,
                       (cover.squared_lower, cover.squared_upper), mn.squared, d, vol, mn)


# ----------------------------------------------------------------- cyclotomic scan

@dataclass(frozen=True)
class CycloLogRootDisc:
    """``log δ(Q(ζ_m)) = Σ c_p log p`` with exact rational ``c_p = r_p − 1/(p−1)``."""

    m: int
    terms: tuple  # ((p, r, c_p), ...)

    def value(self, bits_: int = 128):
        with precision(bits_):
            acc = iv.mpf(0)
            for p, _, c in self.terms:
                acc = acc + frac(c) * _log_iv(p, bits_)
            return acc

    def discriminant(self) -> int:
        """``|Δ| = ∏ p^{c_p φ(m)}`` (each exponent is an integer)."""
        phi = euler_phi(self.m)
        out = 1
        for p, _, c in self.terms:
            e = c * phi
            if e.denominator != 1:
                raise ValidationError("non-integral discriminant exponent")
            out *= p ** int(e)
        return out


@lru_cache(maxsize=None)
def _log_iv(p: int, bits_: int):
    with precision(bits_):
        return iv.log(iv.mpf(p))


@lru_cache(maxsize=None)
def _term_iv(p: int, r: int, bits_: int):
    with precision(bits_):
        return frac(r - Fraction(1, p - 1)) * _log_iv(p, bits_)


@lru_cache(maxsize=None)
def _coeff(p: int, r: int):
    return p, r, r - Fraction(1, p - 1)


@lru_cache(maxsize=None)
def _e_term(p: int, r: int, eps: Fraction):
    return p, r, eps * r - Fraction(1, p - 1)


@lru_cache(maxsize=None)
def _threshold_iv(phi: int, eps: Fraction, bits_: int):
    with precision(bits_):
        return frac(1 - eps) * _log_iv(phi, bits_) if phi > 1 else iv.mpf(0)


def cyclo_log_root_disc(m: int) -> CycloLogRootDisc:
    if m < 1:
        raise ValidationError("m must be a positive integer")
    return CycloLogRootDisc(m, tuple((p, r, r - Fraction(1, p - 1)) for p, r in sorted(factorize(m).items())))


def _spf_sieve(limit: int) -> list[int]:
    spf = list(range(limit + 1))
    for i in range(2, int(limit ** 0.5) + 1):
        if spf[i] == i:
            for j in range(i * i, limit + 1, i):
                if spf[j] == j:
                    spf[j] = i
    return spf


def _from_raw(raw):
    return iv.mpf((mp.make_mpf(raw[0]), mp.make_mpf(raw[1])))


@dataclass(frozen=True)
class CycloRow:
    """One scan row; intervals are kept as raw endpoints so rows pickle across workers."""

    m: int
    phi: int
    log_delta_raw: tuple
    threshold_raw: tuple
    holds: bool
    e_terms: tuple

    @property
    def log_delta(self):
        return _from_raw(self.log_delta_raw)

    @property
    def threshold(self):
        return _from_raw(self.threshold_raw)

    def row(self) -> list[str]:
        mid = lambda x: repr(round(float(_mid(x)), 12))
        return [str(self.m), str(self.phi), mid(self.log_delta), mid(self.threshold),
                "holds" if self.holds else "fails", str(int(not self.holds))]


CYCLO_COLUMNS = ["m", "phi_m", "log_delta", "threshold", "verdict", "exceptional_flag"]


def _exact_verdict(terms, phi: int, eps: Fraction) -> bool:
    """``∏ p^{c_p} ≥ φ^{1−ε}`` in integers, raising both sides to a common power."""
    D = 1
    for _, _, c in terms:
        D = D * c.denominator // gcd(D, c.denominator)
    D = D * (1 - eps).denominator // gcd(D, (1 - eps).denominator)
    left = 1
    for p, _, c in terms:
        left *= p ** int(c * D)
    right_exp = (1 - eps) * D
    return left >= phi ** int(right_exp)


def _scan_chunk(args):
    lo, hi, eps, bits_ = args
    eps = Fraction(eps)
    spf = _spf_sieve(hi)
    rows = []
    with precision(bits_):
        for m in range(lo, hi + 1):
            f: dict[int, int] = {}
            k = m
            while k > 1:
                p = spf[k]
                f[p] = f.get(p, 0) + 1
                k //= p
            phi = m
            for p in f:
                phi = phi // p * (p - 1)
            terms = tuple(_coeff(p, r) for p, r in sorted(f.items()))
            logd = iv.mpf(0)
            for p, r, _ in terms:
                logd = logd + _term_iv(p, r, bits_)
            thr = _threshold_iv(phi, eps, bits_)
            if (logd > thr) is True:
                ok = True
            elif (logd < thr) is True:
                ok = False
            else:
                ok = _exact_verdict(terms, phi, eps)
            e_terms = tuple(_e_term(p, r, eps) for p, r, _ in terms)
            rows.append(CycloRow(m, phi, logd._mpi_, thr._mpi_, ok, e_terms))
    return rows


@dataclass(frozen=True)
class CycloScan:
    epsilon: Fraction
    rows: tuple

    @property
    def exceptional(self) -> tuple:
        return tuple(r.m for r in self.rows if not r.holds)

    @property
    def max_failing(self) -> int | None:
        exc = self.exceptional
        return max(exc) if exc else None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CYCLO_COLUMNS)
        for r in self.rows:
            w.writerow(r.row())
        return buf.getvalue()

    def to_obj(self) -> dict:
        return {
            "epsilon": str(self.epsilon),
            "range": [self.rows[0].m, self.rows[-1].m] if self.rows else [],
            "exceptional_set": list(self.exceptional),
            "max_failing_m": self.max_failing,
            "note": "exceptional set is empirical over the scanned range",
            "rows": [dict(zip(CYCLO_COLUMNS, r.row())) | {
                "e_terms": [[p, r_, str(e)] for p, r_, e in r.e_terms]} for r in self.rows],
        }


def cyclo_scan(max_m: int, epsilon=Fraction(1, 10), min_m: int = 1, workers: int = 1,
               bits_: int = 64) -> CycloScan:
    """Verdict ``log δ(Q(ζ_m)) ≥ (1−ε) log φ(m)`` for ``min_m ≤ m ≤ max_m``.

    Interval comparison first; ties and near-ties fall back to an exact
    integer comparison.  Output order is by ``m`` regardless of ``workers``.
    """
    eps = Fraction(epsilon).limit_denominator(10 ** 6) if isinstance(epsilon, float) else Fraction(epsilon)
    if eps <= 0:
        raise ValidationError("epsilon must be positive")
    if min_m < 1 or max_m < min_m:
        raise ValidationError("need 1 <= min_m <= max_m")
    if workers <= 1 or max_m - min_m < 2000:
        return CycloScan(eps, tuple(_scan_chunk((min_m, max_m, str(eps), bits_))))
    step = -(-(max_m - min_m + 1) // workers)
    chunks = [(a, min(a + step - 1, max_m), str(eps), bits_) for a in range(min_m, max_m + 1, step)]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(_scan_chunk, chunks))
    return CycloScan(eps, tuple(r for part in parts for r in part))


__all__ = [
    "CYCLO_COLUMNS", "CycloLogRootDisc", "CycloScan", "FieldReport", "FieldSpec", "MinNorm", "VolumeBound",
    "ball_volume", "covering_radius_field", "cyclo_log_root_disc", "cyclo_scan", "cyclotomic_discriminant",
    "cyclotomic_trace", "euler_phi", "field_report", "min_norm_check", "mobius", "volbound_eval",
]
