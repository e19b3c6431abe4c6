"""Small exact linear algebra over Q (lists of Fractions)."""

from fractions import Fraction
from math import gcd, lcm


def _copy(rows):
    return [[Fraction(x) for x in row] for row in rows]


def det(matrix):
    """Determinant by fraction-exact Gaussian elimination."""
    a = _copy(matrix)
    n = len(a)
    result = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            result = -result
        p = a[col][col]
        result *= p
        for r in range(col + 1, n):
            f = a[r][col]
            if f:
                f /= p
                row, prow = a[r], a[col]
                for c in range(col, n):
                    row[c] -= f * prow[c]
    return result


def solve(matrix, rhs):
    """Solve ``matrix @ x = rhs`` for square nonsingular ``matrix``."""
    n = len(matrix)
    a = [list(map(Fraction, row)) + [Fraction(b)] for row, b in zip(matrix, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            raise ZeroDivisionError("singular matrix")
        a[col], a[pivot] = a[pivot], a[col]
        p = a[col][col]
        prow = [x / p for x in a[col]]
        a[col] = prow
        for r in range(n):
            if r != col and a[r][col]:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], prow)]
    return [a[r][n] for r in range(n)]


def inverse(matrix):
    n = len(matrix)
    cols = [solve(matrix, [int(i == j) for i in range(n)]) for j in range(n)]
    return [[cols[j][i] for j in range(n)] for i in range(n)]


def matmul(a, b):
    bt = list(zip(*b))
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in bt] for row in a]


def transpose(a):
    return [list(r) for r in zip(*a)]


def integer_row_basis(rows):
    """Z-basis (Hermite normal form rows) of the Z-span of rational ``rows``.

    Returns Fraction rows; zero rows are dropped.
    """
    den = 1
    for row in rows:
        for x in row:
            den = lcm(den, Fraction(x).denominator)
    work = [[int(Fraction(x) * den) for x in row] for row in rows]
    ncols = len(work[0]) if work else 0
    basis = []
    r0 = 0
    for col in range(ncols):
        active = [row for row in work[r0:] if row[col] != 0]
        rest = [row for row in work[r0:] if row[col] == 0]
        while len(active) > 1:
            active.sort(key=lambda row: abs(row[col]))
            piv = active[0]
            nxt = [piv]
            for row in active[1:]:
                q = row[col] // piv[col]
                row = [x - q * y for x, y in zip(row, piv)]
                (nxt if row[col] != 0 else rest).append(row)
            active = nxt
        if active:
            piv = active[0]
            if piv[col] < 0:
                piv = [-x for x in piv]
            basis.append(piv)
        work = work[:r0] + rest
    # reduce entries above pivots for a canonical form
    for i, row in enumerate(basis):
        col = next(c for c, x in enumerate(row) if x)
        for j in range(i):
            q = basis[j][col] // row[col]
            if q:
                basis[j] = [x - q * y for x, y in zip(basis[j], row)]
    return [[Fraction(x, den) for x in row] for row in basis]


def content(values):
    """gcd of a list of integers (0 for the empty/zero list)."""
    g = 0
    for v in values:
        g = gcd(g, int(v))
    return g
