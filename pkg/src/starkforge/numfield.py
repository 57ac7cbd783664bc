"""Exact arithmetic in number fields of small degree, and their fractional ideals.

Elements are tuples of Fractions holding coordinates in a fixed integral basis.
Ideals are (denominator, HNF rows) pairs in the same coordinates, so equality,
products and norms are exact integer computations.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import gcd
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
from mpmath import mp, mpf, mpc

from . import lattice
from .errors import DomainError, ConsistencyError

Elt = Tuple[Fraction, ...]


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x)


def _lcm(a: int, b: int) -> int:
    return a // gcd(a, b) * b


# ----------------------------------------------------------------- polynomials

def poly_mulmod(a: Sequence[Fraction], b: Sequence[Fraction], f: Sequence[int]) -> List[Fraction]:
    """a*b mod f for coefficient lists (low degree first); f monic."""
    d = len(f) - 1
    prod = [Fraction(0)] * (len(a) + len(b) - 1 if a and b else 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                if y:
                    prod[i + j] += x * y
    for k in range(len(prod) - 1, d - 1, -1):
        c = prod[k]
        if c:
            for j in range(d + 1):
                prod[k - d + j] -= c * f[j]
    prod = prod[:d] + [Fraction(0)] * max(0, d - len(prod))
    return prod


def poly_eval(c: Sequence, x):
    acc = 0
    for v in reversed(c):
        acc = acc * x + v
    return acc


# --------------------------------------------------------------------- fields

class NumberField:
    """A number field Q[x]/(f) of degree <= 4 with a chosen integral basis.

    ``basis`` lists the integral basis in power-basis coordinates.  ``root_hint``
    fixes the order of the complex embeddings; refined roots at any precision
    follow that order.
    """

    def __init__(self, poly: Sequence[int], basis: Sequence[Sequence], root_hint=None, name: str = ""):
        self.poly = [int(c) for c in poly]
        if self.poly[-1] != 1:
            raise DomainError("defining polynomial must be monic")
        self.degree = len(self.poly) - 1
        self.name = name
        d = self.degree
        self.basis = [tuple(_frac(x) for x in b) + (Fraction(0),) * (d - len(b)) for b in basis]
        if len(self.basis) != d:
            raise DomainError("integral basis must have %d elements" % d)
        # power -> basis change
        self._P = [[self.basis[j][i] for j in range(d)] for i in range(d)]  # columns = basis elts
        self._Pinv = lattice.inverse_frac(self._P)
        # structure constants: b_i b_j in basis coordinates; must be integral
        self.table = [[None] * d for _ in range(d)]
        for i in range(d):
            for j in range(d):
                pr = poly_mulmod(list(self.basis[i]), list(self.basis[j]), self.poly)
                c = self.from_power(pr)
                if any(x.denominator != 1 for x in c):
                    raise ConsistencyError("integral basis is not closed under multiplication")
                self.table[i][j] = tuple(int(x) for x in c)
        self.one = self.from_power([1])
        if any(x.denominator != 1 for x in self.one):
            raise ConsistencyError("1 is not in the Z-span of the integral basis")
        self._root_hint = None
        if root_hint is not None:
            self._root_hint = [mpc(r) for r in root_hint]
        self._roots_cache: Dict[int, list] = {}
        self._bemb_cache: Dict[int, list] = {}
        # set by builders (see set_unit_windows): how generators of principal ideals are searched
        self.windows = None
        self.conj_matrix = None  # complex conjugation in basis coordinates (CM fields)

    # --- coordinates
    def from_power(self, c: Sequence) -> Elt:
        d = self.degree
        c = [_frac(x) for x in c] + [Fraction(0)] * (d - len(c))
        return tuple(sum(self._Pinv[i][j] * c[j] for j in range(d)) for i in range(d))

    def to_power(self, x: Elt) -> List[Fraction]:
        d = self.degree
        return [sum(self._P[i][j] * x[j] for j in range(d)) for i in range(d)]

    def elt(self, coords) -> Elt:
        return tuple(_frac(c) for c in coords)

    def zero(self) -> Elt:
        return (Fraction(0),) * self.degree

    def rational(self, q) -> Elt:
        q = _frac(q)
        return tuple(q * v for v in self.one)

    # --- arithmetic
    def add(self, x: Elt, y: Elt) -> Elt:
        return tuple(a + b for a, b in zip(x, y))

    def sub(self, x: Elt, y: Elt) -> Elt:
        return tuple(a - b for a, b in zip(x, y))

    def neg(self, x: Elt) -> Elt:
        return tuple(-a for a in x)

    def scale(self, q, x: Elt) -> Elt:
        q = _frac(q)
        return tuple(q * a for a in x)

    def mul(self, x: Elt, y: Elt) -> Elt:
        d = self.degree
        out = [Fraction(0)] * d
        for i in range(d):
            if not x[i]:
                continue
            for j in range(d):
                if not y[j]:
                    continue
                c = x[i] * y[j]
                t = self.table[i][j]
                for k in range(d):
                    if t[k]:
                        out[k] += c * t[k]
        return tuple(out)

    def pow(self, x: Elt, e: int) -> Elt:
        if e < 0:
            return self.pow(self.inv(x), -e)
        r = self.one
        b = x
        while e:
            if e & 1:
                r = self.mul(r, b)
            b = self.mul(b, b)
            e >>= 1
        return r

    def mult_matrix(self, x: Elt) -> List[List[Fraction]]:
        """Matrix M with M[i][j] = coordinate i of x * b_j."""
        d = self.degree
        cols = [self.mul(x, tuple(Fraction(int(i == j)) for i in range(d))) for j in range(d)]
        return [[cols[j][i] for j in range(d)] for i in range(d)]

    def norm(self, x: Elt) -> Fraction:
        return lattice.det_frac(self.mult_matrix(x))

    def trace(self, x: Elt) -> Fraction:
        M = self.mult_matrix(x)
        return sum(M[i][i] for i in range(self.degree))

    def inv(self, x: Elt) -> Elt:
        if not any(x):
            raise ZeroDivisionError("inverse of 0")
        return tuple(lattice.solve_frac(self.mult_matrix(x), self.one))

    def div(self, x: Elt, y: Elt) -> Elt:
        return self.mul(x, self.inv(y))

    def is_integral(self, x: Elt) -> bool:
        return all(c.denominator == 1 for c in x)

    def conj(self, x: Elt) -> Elt:
        if self.conj_matrix is None:
            raise DomainError("field has no complex conjugation recorded")
        d = self.degree
        return tuple(sum(self.conj_matrix[i][j] * x[j] for j in range(d)) for i in range(d))

    def discriminant(self) -> int:
        d = self.degree
        G = [[self.trace(self.mul(self._e(i), self._e(j))) for j in range(d)] for i in range(d)]
        v = lattice.det_frac(G)
        assert v.denominator == 1
        return int(v)

    def _e(self, i) -> Elt:
        return tuple(Fraction(int(k == i)) for k in range(self.degree))

    def basis_elts(self) -> List[Elt]:
        return [self._e(i) for i in range(self.degree)]

    # --- embeddings
    def roots(self, bits: int) -> List[mpc]:
        if bits in self._roots_cache:
            return self._roots_cache[bits]
        with mp.workprec(bits + 32):
            f = [mpf(c) for c in reversed(self.poly)]
            if self.degree == 1:
                rts = [mpc(-self.poly[0])]
            elif self._root_hint is not None:
                rts = [self._newton(r, bits) for r in self._root_hint]
            else:
                raw = mpmath.polyroots(f, maxsteps=200, extraprec=bits)
                raw = [mpc(r) for r in raw]
                reals = sorted([mpc(r.real) for r in raw if abs(r.imag) < mpf(2) ** (-bits // 2)], key=lambda z: z.real)
                cplx = sorted([r for r in raw if r.imag > mpf(2) ** (-bits // 2)], key=lambda z: (z.real, z.imag))
                rts = reals + cplx + [r.conjugate() for r in cplx]
        self._roots_cache[bits] = rts
        return rts

    def _newton(self, r, bits):
        f = self.poly
        df = [i * f[i] for i in range(1, len(f))]
        z = mpc(r)
        tol = mpf(2) ** (-(bits + 24))
        for _ in range(200):
            step = poly_eval(f, z) / poly_eval(df, z)
            z -= step
            if abs(step) <= tol * max(1, abs(z)):
                break
        else:
            raise ConsistencyError("Newton refinement of an embedding failed to converge")
        if abs(z.imag) < mpf(2) ** (-(bits // 2)) and abs(mpc(r).imag) < 1e-10:
            z = mpc(z.real)
        return z

    def basis_embeddings(self, bits: int) -> List[List[mpc]]:
        """E[k][i] = sigma_k(b_i)."""
        if bits in self._bemb_cache:
            return self._bemb_cache[bits]
        rts = self.roots(bits)
        with mp.workprec(bits + 32):
            E = [[poly_eval([mpf(c.numerator) / c.denominator for c in b], r) for b in self.basis] for r in rts]
        self._bemb_cache[bits] = E
        return E

    def embed(self, x: Elt, bits: int) -> List[mpc]:
        E = self.basis_embeddings(bits)
        with mp.workprec(bits + 32):
            xs = [mpf(c.numerator) / c.denominator for c in x]
            return [mpmath.fsum(a * b for a, b in zip(xs, row)) for row in E]

    def embed_real(self, x: Elt, bits: int) -> List[mpf]:
        return [z.real for z in self.embed(x, bits)]

    def is_totally_real(self) -> bool:
        return all(abs(r.imag) < 1e-20 for r in self.roots(128))

    def t2_gram(self, vecs: Sequence[Elt], bits: int = 160, weights=None):
        """Gram matrix of sum_k w_k |sigma_k(.)|^2 on the given Z-basis."""
        embs = [self.embed(v, bits) for v in vecs]
        m = len(vecs)
        w = weights or [1] * self.degree
        with mp.workprec(bits + 32):
            return [[mpmath.fsum(w[k] * (embs[i][k] * embs[j][k].conjugate()).real for k in range(self.degree))
                     for j in range(m)] for i in range(m)]

    def set_unit_windows(self, groups: Sequence[Sequence[int]], pexp: int, log_eps: float = 0.0):
        """Describe how units move generators around, for principal_generator.

        ``groups`` partitions the embeddings by the real place of the unit field
        they lie over; x_i = mean of |sigma_k(g)|^2 over group i.  The product of
        the x_i is N^pexp and the units shift log x_1 by multiples of 2*log_eps.
        """
        self.windows = (tuple(tuple(g) for g in groups), pexp, float(log_eps))

    def fingerprint(self) -> str:
        return "%s|%s" % (self.poly, [tuple(str(c) for c in b) for b in self.basis])

    def __repr__(self):
        return "NumberField(%s)" % (self.name or self.poly)


# --------------------------------------------------------------------- ideals

class Ideal:
    """Fractional ideal (1/den) * L, L an integer lattice in basis coordinates."""

    __slots__ = ("field", "den", "rows", "_norm", "_hash")

    def __init__(self, field: NumberField, rows: Sequence[Sequence[int]], den: int = 1, _normalized: bool = False):
        self.field = field
        if not _normalized:
            H = lattice.hnf(rows)
            if len(H) != field.degree:
                raise DomainError("ideal lattice must have full rank")
            g = den
            for r in H:
                for v in r:
                    g = gcd(g, v)
            if g > 1:
                H = [[v // g for v in r] for r in H]
                den //= g
            rows = H
        self.den = int(den)
        self.rows = tuple(tuple(r) for r in rows)
        self._norm = None
        self._hash = None

    @classmethod
    def from_elements(cls, field: NumberField, elts: Sequence[Elt]) -> "Ideal":
        """The ideal generated (over O) by the given elements."""
        vecs = []
        for g in elts:
            for b in field.basis_elts():
                vecs.append(field.mul(g, b))
        return cls.from_z_basis(field, vecs)

    @classmethod
    def from_z_basis(cls, field: NumberField, vecs: Sequence[Elt]) -> "Ideal":
        den = 1
        for v in vecs:
            for c in v:
                den = _lcm(den, Fraction(c).denominator)
        rows = [[int(Fraction(c) * den) for c in v] for v in vecs]
        return cls(field, rows, den)

    @classmethod
    def unit(cls, field: NumberField) -> "Ideal":
        return cls.from_elements(field, [field.one])

    @classmethod
    def principal(cls, field: NumberField, x: Elt) -> "Ideal":
        return cls.from_elements(field, [x])

    def z_basis(self) -> List[Elt]:
        return [tuple(Fraction(v, self.den) for v in r) for r in self.rows]

    def norm(self) -> Fraction:
        if self._norm is None:
            d = lattice.det_int(self.rows)
            self._norm = Fraction(abs(d), self.den ** self.field.degree)
        return self._norm

    def is_integral(self) -> bool:
        return self.den == 1

    def __mul__(self, other: "Ideal") -> "Ideal":
        F = self.field
        vecs = []
        A = self.z_basis()
        B = other.z_basis()
        for a in A:
            for b in B:
                vecs.append(F.mul(a, b))
        return Ideal.from_z_basis(F, vecs)

    def __add__(self, other: "Ideal") -> "Ideal":
        return Ideal.from_z_basis(self.field, self.z_basis() + other.z_basis())

    def scale(self, x: Elt) -> "Ideal":
        return Ideal.from_z_basis(self.field, [self.field.mul(x, b) for b in self.z_basis()])

    def __pow__(self, e: int) -> "Ideal":
        if e < 0:
            return self.inverse() ** (-e)
        r = Ideal.unit(self.field)
        b = self
        while e:
            if e & 1:
                r = r * b
            b = b * b
            e >>= 1
        return r

    def inverse(self) -> "Ideal":
        """{x : x * self in O}, via an integer kernel mod N."""
        F = self.field
        d = F.degree
        # scale to an integral ideal J = den * self; self^-1 = den * J^-1
        J = [tuple(Fraction(v) for v in r) for r in self.rows]
        N = int(lattice.det_int(self.rows))
        N = abs(N)
        # J^-1 is inside (1/N) O since N in J
        M = []
        for a in J:
            Ma = F.mult_matrix(a)
            for row in Ma:
                M.append([int(v) for v in row])
        K = lattice.kernel_mod(M, N)
        # x = y / N, self^-1 = den * x
        g = gcd(N, self.den)
        return Ideal(F, [[v * (self.den // g) for v in r] for r in K], N // g)

    def __truediv__(self, other: "Ideal") -> "Ideal":
        return self * other.inverse()

    def contains(self, x: Elt) -> bool:
        # solve x*den = sum c_i rows_i with integer c (rows triangular)
        d = self.field.degree
        v = [Fraction(c) * self.den for c in x]
        rows = self.rows
        coeffs = []
        col = 0
        for r in rows:
            while r[col] == 0:
                if v[col] != 0:
                    return False
                col += 1
            c = v[col] / r[col]
            if c.denominator != 1:
                return False
            v = [a - c * b for a, b in zip(v, r)]
            col += 1
        return not any(v)

    def contains_ideal(self, other: "Ideal") -> bool:
        return all(self.contains(b) for b in other.z_basis())

    def conj(self) -> "Ideal":
        F = self.field
        return Ideal.from_z_basis(F, [F.conj(b) for b in self.z_basis()])

    def _key(self):
        return (self.den, self.rows)

    def __eq__(self, other):
        return isinstance(other, Ideal) and other.field is self.field and self._key() == other._key()

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._key())
        return self._hash

    def __repr__(self):
        return "Ideal(N=%s, den=%d, rows=%s)" % (self.norm(), self.den, list(self.rows))

    def to_dict(self) -> dict:
        return {"den": self.den, "hnf": [list(r) for r in self.rows]}


# ----------------------------------------------------------- principal test

def principal_generator(I: Ideal, bits: int = 160) -> Optional[Elt]:
    """A generator of I if it is principal, else None.

    Units move any generator into one of the windows described by
    field.windows (see NumberField.set_unit_windows); each window is a weighted
    T2 ellipsoid enumerated with Fincke-Pohst, and the first element whose norm
    has the right absolute value wins.
    """
    F = I.field
    if F.degree == 1:
        # every fractional ideal of Z is principal, generated by its positive basis element
        return (Fraction(I.rows[0][0], I.den),)
    if F.windows is None:
        raise DomainError("field has no unit window data for principal tests")
    basis = [tuple(Fraction(v) for v in r) for r in I.rows]  # integral lattice den*I
    Nint = abs(lattice.det_int(I.rows))
    groups, pexp, logE = F.windows
    wins = []
    with mp.workprec(bits + 32):
        P = mpf(Nint) ** pexp
        if len(groups) == 1:
            wins.append(({k: 1 / (len(groups[0]) * P) for k in groups[0]}, 1))
        else:
            # x_1 can be moved into [sqrt P, sqrt P * E^2); cover it by dyadic boxes
            # x_1 <= 2a, x_2 <= P/a, each box inside an ellipse of constant size
            E2 = mpmath.exp(2 * mpf(logE))
            a = mpmath.sqrt(P)
            top = a * E2
            while a < top:
                w = {}
                for k in groups[0]:
                    w[k] = 1 / (len(groups[0]) * 2 * a)
                for k in groups[1]:
                    w[k] = a / (len(groups[1]) * P)
                wins.append((w, 2))
                a *= 2
    for w, C in wins:
        G = F.t2_gram(basis, bits, [w[k] for k in range(F.degree)])
        cands = lattice.short_vectors(G, C, exclude_zero=True, prec=bits)
        for c in cands:
            x = tuple(sum(Fraction(c[i]) * basis[i][k] for i in range(len(c))) for k in range(F.degree))
            if abs(F.norm(x)) == Nint:
                return tuple(v / I.den for v in x)
    return None


def is_principal(I: Ideal) -> bool:
    return principal_generator(I) is not None


# ------------------------------------------------ quadratic prime splitting

def quadratic_omega_poly(field: NumberField) -> Tuple[int, int]:
    """For a quadratic field with basis {1, w}, return (t, n) with w^2 = t w - n."""
    w = field._e(1)
    w2 = field.mul(w, w)
    # w2 = a*1 + b*w
    a, b = w2
    if field.one != (Fraction(1), Fraction(0)):
        raise DomainError("quadratic fields must use a basis starting with 1")
    return int(b), int(-a)


def quadratic_primes_above(field: NumberField, p: int) -> List[Tuple[Ideal, int, int]]:
    """[(P, e, f)] for the primes above p in a quadratic field."""
    t, n = quadratic_omega_poly(field)
    roots = [r for r in range(p) if (r * r - t * r + n) % p == 0]
    pe = field.rational(p)
    if not roots:
        return [(Ideal.from_elements(field, [pe]), 1, 2)]
    out = []
    if len(roots) == 1 or (len(roots) == 2 and roots[0] == roots[1]):
        r = roots[0]
        P = Ideal.from_elements(field, [pe, (Fraction(-r), Fraction(1))])
        return [(P, 2, 1)]
    for r in roots:
        P = Ideal.from_elements(field, [pe, (Fraction(-r), Fraction(1))])
        out.append((P, 1, 1))
    return out


def valuation(I: Ideal, P: Ideal, e_max: Optional[int] = None) -> int:
    """v_P(I) for an integral ideal I by containment in powers of P."""
    if not I.is_integral():
        raise DomainError("valuation helper expects an integral ideal")
    k = 0
    Q = P
    N = I.norm()
    pn = P.norm()
    while True:
        if pn ** (k + 1) > N and (e_max is None):
            return k
        if not Q.contains_ideal(I):
            return k
        k += 1
        if e_max is not None and k >= e_max:
            return k
        Q = Q * P
