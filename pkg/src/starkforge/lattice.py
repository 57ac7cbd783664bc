"""Integer lattice utilities: Hermite form with transform, Smith invariants, kernels
mod N, short-vector enumeration.  Matrices are lists of rows of Python ints."""
from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import List, Sequence, Tuple

import mpmath
from mpmath import mp, mpf

Matrix = List[List[int]]


def _xgcd(a: int, b: int) -> Tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def hnf_with_transform(M: Sequence[Sequence[int]]) -> Tuple[Matrix, Matrix]:
    """Row-style Hermite normal form.

    Returns (H, U) with H = U*M, U unimodular, H in row echelon form with positive
    pivots and entries above each pivot reduced into [0, pivot).  Zero rows are kept
    at the bottom of H so U stays square.
    """
    A = [list(map(int, r)) for r in M]
    m = len(A)
    n = len(A[0]) if m else 0
    U = [[int(i == j) for j in range(m)] for i in range(m)]
    r = 0
    for c in range(n):
        if r == m:
            break
        # gather gcd of column c (rows r..) into row r
        for i in range(r + 1, m):
            if A[i][c] == 0:
                continue
            a, b = A[r][c], A[i][c]
            g, x, y = _xgcd(a, b)
            p, q = a // g, b // g
            Ar, Ai = A[r], A[i]
            A[r] = [x * u + y * v for u, v in zip(Ar, Ai)]
            A[i] = [-q * u + p * v for u, v in zip(Ar, Ai)]
            Ur, Ui = U[r], U[i]
            U[r] = [x * u + y * v for u, v in zip(Ur, Ui)]
            U[i] = [-q * u + p * v for u, v in zip(Ur, Ui)]
        if A[r][c] == 0:
            continue
        if A[r][c] < 0:
            A[r] = [-v for v in A[r]]
            U[r] = [-v for v in U[r]]
        piv = A[r][c]
        for i in range(r):
            f = A[i][c] // piv
            if f:
                A[i] = [u - f * v for u, v in zip(A[i], A[r])]
                U[i] = [u - f * v for u, v in zip(U[i], U[r])]
        r += 1
    return A, U


def hnf(M: Sequence[Sequence[int]]) -> Matrix:
    """HNF basis (nonzero rows only)."""
    H, _ = hnf_with_transform(M)
    return [row for row in H if any(row)]


def det_int(M: Sequence[Sequence[int]]) -> int:
    """Bareiss fraction-free determinant."""
    A = [list(map(int, r)) for r in M]
    n = len(A)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if A[k][k] == 0:
            for i in range(k + 1, n):
                if A[i][k] != 0:
                    A[k], A[i] = A[i], A[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def det_frac(M) -> Fraction:
    A = [[Fraction(x) for x in r] for r in M]
    n = len(A)
    d = Fraction(1)
    for k in range(n):
        p = next((i for i in range(k, n) if A[i][k] != 0), None)
        if p is None:
            return Fraction(0)
        if p != k:
            A[k], A[p] = A[p], A[k]
            d = -d
        d *= A[k][k]
        for i in range(k + 1, n):
            f = A[i][k] / A[k][k]
            if f:
                for j in range(k, n):
                    A[i][j] -= f * A[k][j]
    return d


def solve_frac(A, b):
    """Solve A x = b over Q (A square, nonsingular)."""
    n = len(A)
    M = [[Fraction(v) for v in A[i]] + [Fraction(b[i])] for i in range(n)]
    for k in range(n):
        p = next(i for i in range(k, n) if M[i][k] != 0)
        M[k], M[p] = M[p], M[k]
        for i in range(n):
            if i != k and M[i][k] != 0:
                f = M[i][k] / M[k][k]
                M[i] = [u - f * v for u, v in zip(M[i], M[k])]
    return [M[i][n] / M[i][i] for i in range(n)]


def inverse_frac(A):
    n = len(A)
    cols = [solve_frac(A, [int(i == j) for i in range(n)]) for j in range(n)]
    return [[cols[j][i] for j in range(n)] for i in range(n)]


def kernel_mod(M: Sequence[Sequence[int]], N: int) -> Matrix:
    """Basis (HNF rows) of {y in Z^d : M y = 0 mod N} for an m x d integer matrix M."""
    m = len(M)
    d = len(M[0])
    rows = []
    for j in range(d):
        rows.append([M[i][j] for i in range(m)] + [int(k == j) for k in range(d)])
    for i in range(m):
        rows.append([N * int(k == i) for k in range(m)] + [0] * d)
    H = hnf(rows)
    return [r[m:] for r in H if not any(r[:m])]


def smith_invariants(M: Sequence[Sequence[int]]) -> List[int]:
    """Invariant factors d_1 | d_2 | ... of a nonsingular square integer matrix."""
    from sympy import Matrix as SMatrix
    from sympy.matrices.normalforms import invariant_factors
    return [abs(int(x)) for x in invariant_factors(SMatrix(M))]


def mat_mul(A, B):
    return [[sum(a * b for a, b in zip(row, col)) for col in zip(*B)] for row in A]


def lll_gram(G, delta=0.75):
    """LLL on a Gram matrix; returns unimodular T (rows) with T G T^t reduced."""
    n = len(G)
    B = [[int(i == j) for j in range(n)] for i in range(n)]
    G = [[mpf(G[i][j]) for j in range(n)] for i in range(n)]

    def swap(k):
        B[k], B[k - 1] = B[k - 1], B[k]
        G[k], G[k - 1] = G[k - 1], G[k]
        for r in G:
            r[k], r[k - 1] = r[k - 1], r[k]

    def gso():
        mu = [[mpf(0)] * n for _ in range(n)]
        bb = [mpf(0)] * n
        for i in range(n):
            for j in range(i):
                mu[i][j] = (G[i][j] - sum(mu[j][l] * mu[i][l] * bb[l] for l in range(j))) / bb[j]
            bb[i] = G[i][i] - sum(mu[i][l] ** 2 * bb[l] for l in range(i))
        return mu, bb

    k = 1
    guard = 0
    while k < n and guard < 10000:
        guard += 1
        mu, bb = gso()
        for j in range(k - 1, -1, -1):
            q = int(mpmath.nint(mu[k][j]))
            if q:
                B[k] = [a - q * b for a, b in zip(B[k], B[j])]
                # G update: row/col k
                newrow = [G[k][i] - q * G[j][i] for i in range(n)]
                newrow[k] = G[k][k] - 2 * q * G[k][j] + q * q * G[j][j]
                G[k] = newrow
                for i in range(n):
                    if i != k:
                        G[i][k] = G[k][i]
                mu, bb = gso()
        if bb[k] >= (delta - mu[k][k - 1] ** 2) * bb[k - 1]:
            k += 1
        else:
            swap(k)
            k = max(k - 1, 1)
    return B


def short_vectors(Q, C, exclude_zero: bool = True, prec: int = 160) -> List[Tuple[int, ...]]:
    """Fincke-Pohst: all integer x with x^T Q x <= C for positive definite Q.

    Q is a symmetric matrix of reals (anything mpmath accepts).  The form is LLL
    reduced first so the enumeration box stays small.  Both x and -x are
    returned.
    """
    n = len(Q)
    with mp.workprec(prec):
        Q0 = [[mpf(Q[i][j]) for j in range(n)] for i in range(n)]
        T = lll_gram(Q0) if n > 1 else [[1]]
        A = [[mpmath.fsum(T[i][a] * Q0[a][b] * T[j][b] for a in range(n) for b in range(n))
              for j in range(n)] for i in range(n)]
        C = mpf(C) * (1 + mpf(2) ** (-prec // 2))
        # q_ii and q_ij (i<j) of the completed-square form
        q = [[mpf(0)] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                q[i][j] = A[i][j]
        for i in range(n):
            for j in range(i + 1, n):
                q[j][i] = q[i][j]
                q[i][j] = q[i][j] / q[i][i]
            for k in range(i + 1, n):
                for l in range(k, n):
                    q[k][l] -= q[k][i] * q[i][l]
        out = []
        x = [0] * n

        def rec(i, rem):
            # center for x_i given x_{i+1..}
            c = -sum(q[i][j] * x[j] for j in range(i + 1, n))
            rad = mpmath.sqrt(max(rem, 0) / q[i][i])
            lo = int(mpmath.ceil(c - rad))
            hi = int(mpmath.floor(c + rad))
            for v in range(lo, hi + 1):
                x[i] = v
                r = rem - q[i][i] * (v - c) ** 2
                if r < 0:
                    continue
                if i == 0:
                    out.append(tuple(x))
                else:
                    rec(i - 1, r)
            x[i] = 0

        rec(n - 1, C)
    # back to the original coordinates: x_orig = sum_i y_i T_i
    out = [tuple(sum(y[i] * T[i][j] for i in range(n)) for j in range(n)) for y in out]
    if exclude_zero:
        out = [v for v in out if any(v)]
    out.sort(key=lambda v: (sum(abs(t) for t in v), v))
    return out


def lll_reduce(rows: Sequence[Sequence[int]]) -> Matrix:
    """LLL (delta = 3/4) through sympy's DomainMatrix."""
    from sympy.polys.matrices import DomainMatrix
    from sympy import ZZ
    dm = DomainMatrix([[ZZ(int(v)) for v in r] for r in rows], (len(rows), len(rows[0])), ZZ)
    red = dm.lll()
    return [[int(v) for v in r] for r in red.to_list()]


def content(v) -> int:
    g = 0
    for t in v:
        g = gcd(g, int(t))
    return g
