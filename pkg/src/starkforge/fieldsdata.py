"""Totally real fields F, CM fields K over them, class groups and characters.

Quadratic fields (real and imaginary) are built internally.  Quartic CM fields
are read from YAML field files; every claim in the file that can be re-checked
is re-checked before the field is handed out.
"""
from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
import yaml
from mpmath import mp, mpf, mpc

from . import lattice
from .errors import (ConsistencyError, ConvergenceError, InvalidDiscriminant, SchemaError,
                     UnsupportedDegree, DomainError)
from .mpkernel import CoefficientStream, PowerTailBound, PrecisionCtx, dirichlet_sum, out
from .numfield import (Elt, Ideal, NumberField, principal_generator, quadratic_primes_above,
                       valuation)

SCHEMA_VERSION = 1


# ---------------------------------------------------------------- arithmetic

def is_squarefree(n: int) -> bool:
    n = abs(n)
    if n == 0:
        return False
    p = 2
    while p * p <= n:
        if n % (p * p) == 0:
            return False
        p += 1
    return True


def kronecker(D: int, n: int) -> int:
    """Kronecker symbol (D/n) for n >= 1."""
    if n == 0:
        return 1 if abs(D) == 1 else 0
    res = 1
    while n % 2 == 0:
        n //= 2
        if D % 2 == 0:
            return 0
        if D % 8 in (3, 5):
            res = -res
    # Jacobi (D/n), n odd
    a = D % n if n > 1 else 0
    if n == 1:
        return res
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                res = -res
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            res = -res
        a %= n
    return res if n == 1 else 0


def primes_upto(N: int) -> List[int]:
    if N < 2:
        return []
    sieve = bytearray([1]) * (N + 1)
    sieve[0] = sieve[1] = 0
    for p in range(2, int(N ** 0.5) + 1):
        if sieve[p]:
            sieve[p * p::p] = bytearray(len(sieve[p * p::p]))
    return [i for i, v in enumerate(sieve) if v]


def factorint(n: int) -> Dict[int, int]:
    n = abs(n)
    out = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


# ---------------------------------------------------------------- class groups

@dataclass
class HeckeCharTable:
    """Characters of a finite abelian group given by its table.

    ``exps[c][R]`` is the exponent k/e with chi_c(R) = exp(2 pi i k/e), kept exact.
    """
    order: int
    exps: List[List[Fraction]]

    def value(self, c: int, R: int, ctx: Optional[PrecisionCtx] = None):
        e = self.exps[c][R]
        if ctx is None:
            return complex(mpmath.expjpi(2 * float(e)))
        with ctx.workprec():
            return out(mpmath.expjpi(2 * mpf(e.numerator) / e.denominator), ctx)

    def trivial(self) -> int:
        return 0

    def conj(self, c: int) -> int:
        target = [(-e) % 1 for e in self.exps[c]]
        return next(i for i, row in enumerate(self.exps) if row == target)

    def __len__(self):
        return len(self.exps)


class ClassGroup:
    """Ideal class group given by representatives, with a brute-force label map."""

    def __init__(self, reps: List[Ideal], table: Optional[List[List[int]]] = None):
        self.reps = reps
        self.order = len(reps)
        self._inv = [r.inverse() for r in reps]
        if table is None:
            table = [[self.label(reps[i] * reps[j]) for j in range(self.order)] for i in range(self.order)]
        self.table = table
        self._chars = None

    def label(self, I: Ideal) -> int:
        if self.order == 1:
            return 0
        for k, rinv in enumerate(self._inv):
            if principal_generator(I * rinv) is not None:
                return k
        raise ConsistencyError("ideal is in none of the listed classes (class-group closure)")

    def mul(self, a: int, b: int) -> int:
        return self.table[a][b]

    def inverse(self, a: int) -> int:
        return self.table[a].index(0)

    def power(self, a: int, k: int) -> int:
        r = 0
        base = a if k >= 0 else self.inverse(a)
        for _ in range(abs(k)):
            r = self.table[r][base]
        return r

    def element_order(self, a: int) -> int:
        k, r = 1, a
        while r != 0:
            r = self.table[r][a]
            k += 1
        return k

    def verify_group(self):
        h = self.order
        T = self.table
        if any(T[0][j] != j or T[j][0] != j for j in range(h)):
            raise ConsistencyError("class-group table: class 0 is not the identity")
        for i in range(h):
            if sorted(T[i]) != list(range(h)):
                raise ConsistencyError("class-group table: row %d is not a permutation" % i)
            for j in range(h):
                if T[i][j] != T[j][i]:
                    raise ConsistencyError("class-group table is not commutative")
                for k in range(h):
                    if T[T[i][j]][k] != T[i][T[j][k]]:
                        raise ConsistencyError("class-group table is not associative")

    def characters(self) -> HeckeCharTable:
        if self._chars is None:
            self._chars = characters_of_table(self.table)
        return self._chars


def characters_of_table(T: List[List[int]]) -> HeckeCharTable:
    h = len(T)

    def order(a):
        k, r = 1, a
        while r != 0:
            r = T[r][a]
            k += 1
        return k

    def pw(a, k):
        r = 0
        for _ in range(k):
            r = T[r][a]
        return r

    # greedy generating set
    gens = []
    span = {0}
    for a in sorted(range(h), key=lambda a: -order(a)):
        if a in span:
            continue
        gens.append(a)
        new = set()
        for x in span:
            for k in range(order(a)):
                new.add(T[x][pw(a, k)])
        span = new
        if len(span) == h:
            break
    chars = []
    seen = set()
    for ks in itertools.product(*[range(order(g)) for g in gens]):
        vals: Dict[int, Fraction] = {0: Fraction(0)}
        frontier = [0]
        ok = True
        while frontier and ok:
            x = frontier.pop()
            for g, k in zip(gens, ks):
                y = T[x][g]
                v = (vals[x] + Fraction(k, order(g))) % 1
                if y in vals:
                    if vals[y] != v:
                        ok = False
                        break
                else:
                    vals[y] = v
                    frontier.append(y)
        if not ok or len(vals) != h:
            continue
        row = tuple(vals[R] for R in range(h))
        # homomorphism check on the full table
        if all((row[i] + row[j]) % 1 == row[T[i][j]] for i in range(h) for j in range(h)) and row not in seen:
            seen.add(row)
            chars.append(list(row))
    chars.sort(key=lambda r: (sum(1 for v in r if v), r))
    if len(chars) != h:
        raise ConsistencyError("character enumeration found %d characters for a group of order %d" % (len(chars), h))
    return HeckeCharTable(h, chars)


def class_group_by_closure(field: NumberField, primes: Sequence[Ideal]) -> ClassGroup:
    """Classes reached by products of the given primes (which should generate)."""
    reps = [Ideal.unit(field)]
    cg = ClassGroup.__new__(ClassGroup)

    def lab(I):
        for k, r in enumerate(reps):
            if principal_generator(I * r.inverse()) is not None:
                return k
        return None

    changed = True
    while changed:
        changed = False
        for P in primes:
            for r in list(reps):
                J = r * P
                if lab(J) is None:
                    reps.append(J)
                    changed = True
    return ClassGroup(reps)


# ------------------------------------------------------------- field records

@dataclass
class TotallyRealField:
    field: NumberField
    disc: int
    units: List[Elt]
    class_group: ClassGroup
    name: str = ""
    # real quadratic only: D in Q(sqrt D)
    radicand: Optional[int] = None

    @property
    def degree(self) -> int:
        return self.field.degree

    n = degree

    @property
    def h(self) -> int:
        return self.class_group.order

    @property
    def unit_rank(self) -> int:
        return self.degree - 1

    def embed(self, x: Elt, bits: int) -> List[mpf]:
        return self.field.embed_real(x, bits)

    def regulator(self, ctx: PrecisionCtx):
        if self.degree == 1:
            return mpf(1)
        with ctx.workprec():
            M = [[mpmath.log(abs(v)) for v in self.embed(u, ctx.bits + 32)[:-1]] for u in self.units]
            return out(abs(mpmath.det(mpmath.matrix(M))), ctx)

    def log_unit_matrix(self, ctx: PrecisionCtx):
        with ctx.workprec():
            return [[mpmath.log(abs(v)) for v in self.embed(u, ctx.bits + 32)] for u in self.units]

    @property
    def fundamental_unit(self) -> Elt:
        if not self.units:
            return self.field.one
        return self.units[0]

    def totally_positive_unit(self) -> Elt:
        """Generator of U_F^+ (n = 2), normalised to be > 1 in the first embedding."""
        F = self.field
        if self.degree == 1:
            return F.one
        e = self.fundamental_unit
        v = self.embed(e, 96)
        if F.norm(e) == 1:
            u = e if v[0] > 0 else F.neg(e)
        else:
            u = F.mul(e, e)
        if self.embed(u, 96)[0] < 1:
            u = F.inv(u)
        return u

    def is_totally_positive(self, x: Elt) -> bool:
        return all(v > 0 for v in self.embed(x, 128))

    @property
    def narrow_h(self) -> int:
        if self.degree == 1:
            return 1
        return self.h if self.field.norm(self.fundamental_unit) == -1 else 2 * self.h

    def unit_sign_patterns(self) -> Dict[Tuple[int, ...], Elt]:
        """Units realizing each reachable sign pattern of the embeddings."""
        F = self.field
        pats = {}
        gens = [F.neg(F.one)] + list(self.units)
        for ks in itertools.product((0, 1), repeat=len(gens)):
            u = F.one
            for g, k in zip(gens, ks):
                if k:
                    u = F.mul(u, g)
            sig = tuple(1 if v > 0 else -1 for v in self.embed(u, 96))
            pats.setdefault(sig, u)
        return pats

    def different(self) -> Ideal:
        F = self.field
        d = F.degree
        # dual lattice of O under the trace form, then invert
        B = F.basis_elts()
        G = [[F.trace(F.mul(B[i], B[j])) for j in range(d)] for i in range(d)]
        Ginv = lattice.inverse_frac(G)
        dual = [tuple(Ginv[i][j] for j in range(d)) for i in range(d)]
        return Ideal.from_z_basis(F, dual).inverse()

    def zeta(self, s, ctx: PrecisionCtx):
        """Dedekind zeta, Re(s) > 1."""
        if self.degree == 1:
            return dirichlet_sum(CoefficientStream.ones(), s, None, ctx)
        if self.degree == 2:
            D = self.disc
            big = ctx.with_bits(ctx.bits + 16)
            z = dirichlet_sum(CoefficientStream.ones(), s, None, big)
            L = dirichlet_sum(CoefficientStream(lambda m: kronecker(D, m), period=D, name="chi_D"), s, None, big)
            with ctx.workprec():
                return out(z * L, ctx)
        raise UnsupportedDegree("Dedekind zeta only for n <= 2")

    def L_value(self, chi: int, s, ctx: PrecisionCtx, max_norm: Optional[int] = None):
        """L_F(s, chi) for a class-group character chi; trivial chi goes through zeta."""
        chars = self.class_group.characters()
        if all(e == 0 for e in chars.exps[chi]):
            return self.zeta(s, ctx)
        # generic route: Dirichlet series over ideal norms with a divisor-type tail bound
        sigma = mpf(s.real if isinstance(s, mpc) else s)
        tb = PowerTailBound(C=4.0, a=0.25)
        N = tb.cutoff(sigma, ctx.tail_tol / 2)
        if N > 2_000_000:
            raise ConvergenceError("L_F(s, chi) for nontrivial chi needs %d ideal norms" % N)
        coeff = ideal_character_coefficients(self, chi, N, ctx)
        return dirichlet_sum(CoefficientStream(lambda m: coeff[m], abscissa=1.0), s, tb, ctx)


def ideal_character_coefficients(F, chi: int, N: int, ctx):
    chars = F.class_group.characters()
    coeff = [mpc(0)] * (N + 1)
    for h in enumerate_ideals(F, N):
        coeff[int(h.norm)] += chars.value(chi, h.class_label, ctx)
    return coeff


@dataclass
class IdealHandle:
    ideal: Ideal
    class_label: int

    @property
    def norm(self) -> Fraction:
        return self.ideal.norm()

    @property
    def basis(self):
        return [list(r) for r in self.ideal.rows]

    @property
    def field(self):
        return self.ideal.field

    def __repr__(self):
        return "IdealHandle(N=%s, class=%d)" % (self.norm, self.class_label)


@dataclass
class CMField:
    base: TotallyRealField
    field: NumberField
    t: Elt                       # theta^2 in F, theta the power-basis generator of K
    cm_type: List[int]           # indexes into field.roots(), one per embedding of F
    disc: int
    w: int
    class_group: ClassGroup
    unit_index: int = 1
    reflex: Optional[dict] = None
    primes: List[Ideal] = field(default_factory=list)
    name: str = ""

    def __post_init__(self):
        F = self.base.field
        n = F.degree
        K = self.field
        # powers of t in F coordinates
        self._tpow = [F.one]
        for _ in range(1, n):
            self._tpow.append(F.mul(self._tpow[-1], self.t))
        T = [[self._tpow[k][i] for k in range(n)] for i in range(n)]  # columns t^k
        if lattice.det_frac(T) == 0:
            raise ConsistencyError("theta^2 does not generate F")
        Tinv = lattice.inverse_frac(T)
        # F basis element j = sum_k c_kj t^k = sum_k c_kj theta^(2k)
        self._F_to_K = []
        for j in range(n):
            c = [Tinv[k][j] for k in range(n)]
            pw = [Fraction(0)] * (2 * n)
            for k in range(n):
                pw[2 * k] = c[k]
            self._F_to_K.append(K.from_power(pw))
        # conjugation: theta -> -theta
        d = K.degree
        imgs = []
        for j in range(d):
            pw = K.to_power(K._e(j))
            pw = [(-c if i % 2 else c) for i, c in enumerate(pw)]
            imgs.append(K.from_power(pw))
        K.conj_matrix = [[imgs[j][i] for j in range(d)] for i in range(d)]

    @property
    def n(self) -> int:
        return self.base.degree

    @property
    def h(self) -> int:
        return self.class_group.order

    @property
    def theta(self) -> Elt:
        return self.field.from_power([0, 1])

    def F_to_K(self, f: Elt) -> Elt:
        K = self.field
        acc = K.zero()
        for j, c in enumerate(f):
            if c:
                acc = K.add(acc, K.scale(c, self._F_to_K[j]))
        return acc

    def F_ideal_to_K(self, I: Ideal) -> Ideal:
        return Ideal.from_elements(self.field, [self.F_to_K(b) for b in I.z_basis()])

    def rel_coords(self, x: Elt) -> Tuple[Elt, Elt]:
        """(a, b) in F x F with x = a + b theta."""
        F = self.base.field
        pw = self.field.to_power(x)
        n = self.n
        a = F.zero()
        b = F.zero()
        for k in range(n):
            a = F.add(a, F.scale(pw[2 * k], self._tpow[k]))
            b = F.add(b, F.scale(pw[2 * k + 1], self._tpow[k]))
        return a, b

    def from_rel(self, a: Elt, b: Elt) -> Elt:
        K = self.field
        return K.add(self.F_to_K(a), K.mul(self.F_to_K(b), self.theta))

    def conj(self, x: Elt) -> Elt:
        return self.field.conj(x)

    def cm_embed(self, x: Elt, bits: int) -> List[mpc]:
        e = self.field.embed(x, bits)
        return [e[i] for i in self.cm_type]

    def ideal_label(self, I: Ideal) -> int:
        return self.class_group.label(I)


# ------------------------------------------------------------------ builders

def build_rational() -> TotallyRealField:
    Q = NumberField([0, 1], [[1]], name="Q")
    cg = ClassGroup([Ideal.unit(Q)], [[0]])
    return TotallyRealField(Q, 1, [], cg, name="Q")


def _quadratic_unit(D: int) -> Tuple[int, int]:
    """Fundamental unit of Q(sqrt D) as coordinates in the basis {1, w}.

    Continued fraction of w ((1+sqrt D)/2 or sqrt D) as a reduced quadratic surd
    (P + sqrt d)/Q; the first convergent p/q whose associated element has norm
    +-1 gives the fundamental unit.
    """
    if D % 4 == 1:
        P, Q, d = 1, 2, D
        nf = lambda x, y: x * x + x * y - ((D - 1) // 4) * y * y  # N(x + y w)
    else:
        P, Q, d = 0, 1, D
        nf = lambda x, y: x * x - D * y * y
    r = math.isqrt(d)
    p0, p1 = 1, 0
    q0, q1 = 0, 1
    for _ in range(10000):
        a = (P + r) // Q
        p0, p1 = a * p0 + p1, p0
        q0, q1 = a * q0 + q1, q0
        # p/q ~ w, candidate p - q*w' expressed in {1, w}
        if D % 4 == 1:
            x, y = p0 - q0, q0  # p - q(1 - w)
        else:
            x, y = p0, q0
        if abs(nf(x, y)) == 1:
            return x, y
        P = a * Q - P
        Q = (d - P * P) // Q
    raise ConvergenceError("continued fraction did not produce a unit")


def quadratic_basis(d: int) -> Tuple[List[int], List[List[Fraction]], int]:
    """(poly, basis, disc) for Q(sqrt d), d squarefree, poly in theta = sqrt d."""
    poly = [-d, 0, 1]
    if d % 4 == 1:
        basis = [[Fraction(1), Fraction(0)], [Fraction(1, 2), Fraction(1, 2)]]
        disc = d
    else:
        basis = [[Fraction(1), Fraction(0)], [Fraction(0), Fraction(1)]]
        disc = 4 * d
    return poly, basis, disc


def build_quadratic_real(D: int, ctx: Optional[PrecisionCtx] = None) -> TotallyRealField:
    if int(D) != D or D <= 1 or not is_squarefree(D):
        raise InvalidDiscriminant("real quadratic fields need a squarefree D > 1, got %r" % (D,))
    D = int(D)
    poly, basis, disc = quadratic_basis(D)
    sq = math.sqrt(D)
    K = NumberField(poly, basis, root_hint=[mpc(sq), mpc(-sq)], name="Q(sqrt%d)" % D)
    x, y = _quadratic_unit(D)
    u = (Fraction(x), Fraction(y))
    v = K.embed_real(u, 96)
    if abs(v[0]) < 1:
        u = K.inv(u)
    if K.embed_real(u, 96)[0] < 0:
        u = K.neg(u)
    L = float(mpmath.log(abs(K.embed_real(u, 96)[0])))
    K.set_unit_windows([[0], [1]], 2, L)
    M = math.sqrt(disc) / 2
    primes = [P for p in primes_upto(int(M)) for P, e, f in quadratic_primes_above(K, p)]
    cg = class_group_by_closure(K, primes)
    return TotallyRealField(K, disc, [u], cg, name="Q(sqrt%d)" % D, radicand=D)


def build_imag_quadratic(d: int, ctx: Optional[PrecisionCtx] = None) -> CMField:
    """K = Q(sqrt -d) as a CM field over Q."""
    if int(d) != d or d <= 0 or not is_squarefree(d):
        raise InvalidDiscriminant("imaginary quadratic fields need a squarefree d > 0")
    d = int(d)
    poly, basis, disc = quadratic_basis(-d)
    r = math.sqrt(d)
    K = NumberField(poly, basis, root_hint=[mpc(0, r), mpc(0, -r)], name="Q(sqrt-%d)" % d)
    K.set_unit_windows([[0, 1]], 1)
    Q = build_rational()
    M = (2 / math.pi) * math.sqrt(abs(disc))
    primes = [P for p in primes_upto(int(M)) for P, e, f in quadratic_primes_above(K, p)]
    cg = class_group_by_closure(K, primes)
    w = {1: 4, 3: 6}.get(d, 2)
    return CMField(Q, K, (Fraction(-d),), [0], disc, w, cg, name="Q(sqrt-%d)" % d)


# -------------------------------------------------------------- enumeration

def _prime_table(Fobj, p: int):
    K = Fobj.field
    if K.degree == 1:
        return [(Ideal.from_elements(K, [K.rational(p)]), 1, 1)]
    if K.degree == 2:
        return quadratic_primes_above(K, p)
    prs = [(P, e, f) for (P, e, f) in getattr(Fobj, "_prime_records", []) if P.norm().numerator % p == 0]
    if not prs:
        raise UnsupportedDegree("no prime table for p=%d in a field of degree %d" % (p, K.degree))
    return prs


def enumerate_ideals(F, norm_bound: int, with_labels: bool = True) -> List[IdealHandle]:
    """All integral ideals of norm <= norm_bound, ordered by (norm, HNF)."""
    if norm_bound < 1:
        raise DomainError("norm_bound must be >= 1")
    K = F.field
    if K.degree > 2:
        raise UnsupportedDegree("internal ideal enumeration needs degree <= 2")
    # prime powers
    pp = []  # list of (prime ideal, norm)
    for p in primes_upto(norm_bound):
        for P, e, f in _prime_table(F, p):
            if p ** f <= norm_bound:
                pp.append((P, p ** f))
    ideals = [(1, Ideal.unit(K))]

    def extend(start, cur_norm, cur):
        for k in range(start, len(pp)):
            P, q = pp[k]
            nn = cur_norm * q
            I = cur
            while nn <= norm_bound:
                I = I * P
                ideals.append((nn, I))
                extend(k + 1, nn, I)
                nn *= q

    extend(0, 1, Ideal.unit(K))
    ideals.sort(key=lambda t: (t[0], t[1].rows))
    cg = F.class_group
    outl = []
    for nrm, I in ideals:
        lab = cg.label(I) if (with_labels and cg.order > 1) else 0
        outl.append(IdealHandle(I, lab))
    return outl


# --------------------------------------------------------------- field files

def _req(d: dict, key: str, ctx: str):
    if not isinstance(d, dict) or key not in d:
        raise SchemaError("missing key '%s' in %s" % (key, ctx))
    return d[key]


def _fr_list(v, what):
    try:
        return [Fraction(str(x)) for x in v]
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise SchemaError("bad rational entries in %s: %s" % (what, e))


def _int_list(v, what):
    if not isinstance(v, (list, tuple)):
        raise SchemaError("%s must be a list" % what)
    for x in v:
        ok = isinstance(x, int) and not isinstance(x, bool)
        ok = ok or (isinstance(x, str) and x.strip().lstrip("-").isdigit())
        if not ok:
            raise SchemaError("non-integer entry %r in %s" % (x, what))
    return [int(x) for x in v]


def _parse_roots(block, what) -> Tuple[int, List[mpc]]:
    bits = int(_req(block, "precision_bits", what))
    roots = []
    with mp.workprec(bits + 16):
        for r in _req(block, "roots", what):
            try:
                if isinstance(r, (list, tuple)):
                    roots.append(mpc(mpf(str(r[0])), mpf(str(r[1]))))
                else:
                    roots.append(mpc(mpf(str(r))))
            except (TypeError, ValueError, IndexError) as e:
                raise SchemaError("bad root entry in %s: %s" % (what, e))
    return bits, roots


def _check_roots(K: NumberField, declared: List[mpc], bits: int, what: str):
    ours = K.roots(max(bits, 64) + 32)
    tol = mpf(2) ** (-(bits - 8))
    for a, b in zip(ours, declared):
        if abs(a - b) > tol * (1 + abs(b)):
            raise ConsistencyError("%s: declared embedding %s disagrees with the refined root %s" %
                                   (what, mpmath.nstr(b, 15), mpmath.nstr(a, 15)))


def _elt_of(v, K: NumberField, what):
    c = _fr_list(v, what)
    if len(c) != K.degree:
        raise SchemaError("%s has %d coordinates, expected %d" % (what, len(c), K.degree))
    return tuple(c)


def _ideal_of(block, K: NumberField, what) -> Ideal:
    if "generators" in block:
        gens = [_elt_of(g, K, what) for g in block["generators"]]
        return Ideal.from_elements(K, gens)
    rows = [_int_list(r, what) for r in _req(block, "hnf", what)]
    den = int(block.get("den", 1))
    I = Ideal(K, rows, den)
    return I


def _load_base(b: dict, ctx: PrecisionCtx) -> TotallyRealField:
    kind = b.get("builtin")
    if kind == "Q":
        return build_rational()
    if isinstance(kind, str) and kind.startswith("real:"):
        return build_quadratic_real(int(kind.split(":")[1]), ctx)
    poly = _int_list(_req(b, "polynomial", "base"), "base.polynomial")
    basis = [_fr_list(v, "base.integral_basis") for v in _req(b, "integral_basis", "base")]
    bits, roots = _parse_roots(_req(b, "embeddings", "base"), "base.embeddings")
    try:
        K = NumberField(poly, basis, root_hint=roots)
    except (DomainError, ConsistencyError) as e:
        raise ConsistencyError("base field: %s" % e)
    _check_roots(K, roots, bits, "base")
    if not K.is_totally_real():
        raise ConsistencyError("base field is not totally real")
    disc = int(_req(b, "discriminant", "base"))
    if K.discriminant() != disc:
        raise ConsistencyError("base discriminant mismatch: file %d, computed %d" % (disc, K.discriminant()))
    units = [_elt_of(u, K, "base.units") for u in b.get("units", [])]
    for u in units:
        if abs(K.norm(u)) != 1 or not K.is_integral(u):
            raise ConsistencyError("base unit norm: listed fundamental unit has norm %s" % K.norm(u))
    if len(units) != K.degree - 1:
        raise ConsistencyError("base unit rank: expected %d units" % (K.degree - 1))
    if K.degree == 2:
        L = float(mpmath.log(abs(K.embed_real(units[0], 96)[0])))
        K.set_unit_windows([[0], [1]], 2, L)
    cg_block = b.get("class_group", {"representatives": [{"hnf": [[1 if i == j else 0 for j in range(K.degree)] for i in range(K.degree)]}]})
    reps = [_ideal_of(r, K, "base.class_group") for r in cg_block["representatives"]]
    cg = ClassGroup(reps, cg_block.get("table"))
    return TotallyRealField(K, disc, units, cg, name=b.get("name", ""))


def ingest_field_file(path, ctx: Optional[PrecisionCtx] = None) -> CMField:
    """Read and re-verify a CM field file (YAML, schema version 1)."""
    ctx = ctx or PrecisionCtx(128)
    with mp.workprec(ctx.bits + 32):
        return _ingest(path, ctx)


def _ingest(path, ctx: PrecisionCtx) -> CMField:
    if not os.path.exists(path):
        raise SchemaError("field file not found: %s" % path)
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        raise SchemaError("unparseable field file: %s" % e)
    if not isinstance(doc, dict):
        raise SchemaError("field file must be a mapping")
    ver = _req(doc, "schema_version", "document")
    if ver != SCHEMA_VERSION:
        raise SchemaError("unsupported schema_version %r" % (ver,))
    F = _load_base(_req(doc, "base", "document"), ctx)
    k = _req(doc, "field", "document")
    poly = _int_list(_req(k, "polynomial", "field"), "field.polynomial")
    basis = [_fr_list(v, "field.integral_basis") for v in _req(k, "integral_basis", "field")]
    bits, roots = _parse_roots(_req(k, "embeddings", "field"), "field.embeddings")
    n = F.degree
    if len(poly) - 1 != 2 * n:
        raise ConsistencyError("field degree %d is not twice the base degree %d" % (len(poly) - 1, n))
    if any(poly[i] for i in range(1, len(poly), 2)):
        raise ConsistencyError("field polynomial must be even (theta^2 in F)")
    try:
        K = NumberField(poly, basis, root_hint=roots, name=doc.get("name", ""))
    except (DomainError, ConsistencyError) as e:
        raise ConsistencyError("field: %s" % e)
    _check_roots(K, roots, bits, "field")
    rts = K.roots(ctx.bits + 32)
    if any(abs(r.imag) < mpf(2) ** (-bits // 2) for r in rts):
        raise ConsistencyError("field is not totally imaginary")
    t = _elt_of(_req(k, "rel_square", "field"), F.field, "field.rel_square")
    cm_type = [int(i) for i in _req(k, "cm_type", "field")]
    if len(cm_type) != n or len(set(cm_type)) != n:
        raise SchemaError("cm_type must list %d distinct root indexes" % n)
    tv = F.embed(t, ctx.bits + 32)
    for i, j in enumerate(cm_type):
        if abs(rts[j] ** 2 - tv[i]) > mpf(2) ** (-bits // 2) * (1 + abs(tv[i])):
            raise ConsistencyError("cm_type: root %d does not square to sigma_%d(theta^2)" % (j, i))
        if not abs(rts[j].imag) > 0:
            raise ConsistencyError("cm_type: root %d is real" % j)
    for i, j in enumerate(cm_type):
        for i2, j2 in enumerate(cm_type):
            if i != i2 and abs(rts[j] - rts[j2].conjugate()) < 1e-20:
                raise ConsistencyError("cm_type contains a conjugate pair")
    disc = int(_req(k, "discriminant", "field"))
    if K.discriminant() != disc:
        raise ConsistencyError("field discriminant mismatch: file %d, computed %d" % (disc, K.discriminant()))
    if n == 1:
        K.set_unit_windows([[0, 1]], 1)
    elif n == 2:
        L = float(mpmath.log(abs(F.embed(F.fundamental_unit, 96)[0])))
        K.set_unit_windows(cm_place_groups(K, cm_type, rts), 1, L)
    else:
        raise UnsupportedDegree("field files support n <= 2")
    w = int(_req(k, "roots_of_unity", "field"))
    cg_block = _req(k, "class_group", "field")
    reps = [_ideal_of(r, K, "field.class_group") for r in _req(cg_block, "representatives", "field.class_group")]
    table = cg_block.get("table")
    primes = [_ideal_of(r, K, "field.primes") for r in k.get("primes", [])]
    cm = CMField(F, K, t, cm_type, disc, w, None, unit_index=int(k.get("unit_index", 1)),
                 reflex=doc.get("reflex"), primes=primes, name=doc.get("name", ""))
    # theta^2 = t as elements of K
    th = cm.theta
    if K.mul(th, th) != cm.F_to_K(t):
        raise ConsistencyError("rel_square: theta^2 differs from the listed element of F")
    # conjugation fixes the image of F
    for b in F.field.basis_elts():
        x = cm.F_to_K(b)
        if K.conj(x) != x:
            raise ConsistencyError("complex conjugation does not fix F")
    if int(cg_block.get("order", len(reps))) != len(reps):
        raise ConsistencyError("class-group order differs from the number of representatives")
    try:
        cg = ClassGroup(reps, table)
    except ConsistencyError as e:
        raise ConsistencyError("class-group closure: %s" % e)
    verify_class_group(cg)
    cm.class_group = cg
    verify_roots_of_unity(cm, w)
    if n == 2:
        verify_unit_index(cm)
        if cm.reflex is not None:
            verify_reflex(cm, ctx)
    return cm


def cm_place_groups(K: NumberField, cm_type: List[int], rts) -> List[List[int]]:
    groups = []
    for j in cm_type:
        c = min(range(K.degree), key=lambda k: abs(rts[k] - rts[j].conjugate()))
        groups.append([j, c])
    return groups


def verify_class_group(cg: ClassGroup):
    h = cg.order
    for i in range(h):
        for j in range(i + 1, h):
            if principal_generator(cg.reps[i] * cg._inv[j]) is not None:
                raise ConsistencyError("class-group closure: representatives %d and %d are equivalent" % (i, j))
    cg.verify_group()
    for i in range(h):
        for j in range(i, h):
            k = cg.table[i][j]
            if principal_generator(cg.reps[i] * cg.reps[j] * cg._inv[k]) is None:
                raise ConsistencyError("class-group closure: table entry (%d,%d) is wrong" % (i, j))
    chars = cg.characters()
    check_orthogonality(chars)


def check_orthogonality(chars: HeckeCharTable):
    h = chars.order
    with mp.workprec(96):
        for a in range(len(chars)):
            for b in range(len(chars)):
                # sum over R of exp(2 pi i (e_a - e_b)(R))
                tot = mpc(0)
                for R in range(h):
                    d = chars.exps[a][R] - chars.exps[b][R]
                    tot += mpmath.expjpi(2 * mpf(d.numerator) / d.denominator)
                want = h if a == b else 0
                if abs(tot - want) > mpf(10) ** -20:
                    raise ConsistencyError("character orthogonality fails for characters %d, %d" % (a, b))


def roots_of_unity(cm: CMField) -> List[Elt]:
    K = cm.field
    d = K.degree
    G = K.t2_gram(K.basis_elts(), 128)
    cands = lattice.short_vectors(G, d, exclude_zero=True)
    outl = []
    for c in cands:
        x = tuple(Fraction(v) for v in c)
        # roots of unity have every |sigma(x)| = 1
        with mp.workprec(128):
            if all(abs(abs(z) - 1) < mpf(10) ** -20 for z in K.embed(x, 128)):
                outl.append(x)
    return outl


def verify_roots_of_unity(cm: CMField, w: int):
    got = len(roots_of_unity(cm))
    if got != w:
        raise ConsistencyError("roots_of_unity: file says %d, found %d" % (w, got))


def _is_square_in(K: NumberField, x: Elt) -> Optional[Elt]:
    """y with y^2 = x, searched through embedding sign choices."""
    bits = 160
    ex = K.embed(x, bits)
    E = K.basis_embeddings(bits)
    d = K.degree
    with mp.workprec(bits):
        base = [mpmath.sqrt(z) for z in ex]
        for signs in itertools.product((1, -1), repeat=d):
            vals = [s * b for s, b in zip(signs, base)]
            # real linear system: sum_i y_i E[k][i] = vals[k]
            A = mpmath.matrix(2 * d, d)
            rhs = mpmath.matrix(2 * d, 1)
            for k in range(d):
                for i in range(d):
                    A[2 * k, i] = E[k][i].real
                    A[2 * k + 1, i] = E[k][i].imag
                rhs[2 * k] = vals[k].real
                rhs[2 * k + 1] = vals[k].imag
            try:
                sol = mpmath.lu_solve(A, rhs)
            except ZeroDivisionError:
                continue
            y = tuple(Fraction(int(mpmath.nint(sol[i]))) for i in range(d))
            if all(abs(sol[i] - int(mpmath.nint(sol[i]))) < 1e-20 for i in range(d)) and K.mul(y, y) == x:
                return y
    return None


def compute_unit_index(cm: CMField) -> int:
    """[U_K : mu_K U_F] for n = 2: 2 iff zeta * eps is a square for some root of unity."""
    K = cm.field
    eps = cm.F_to_K(cm.base.fundamental_unit)
    for z in roots_of_unity(cm):
        if _is_square_in(K, K.mul(z, eps)) is not None:
            return 2
    return 1


def verify_unit_index(cm: CMField):
    q = compute_unit_index(cm)
    if q != cm.unit_index:
        raise ConsistencyError("unit_index: file says %d, computed %d" % (cm.unit_index, q))


def type_trace_roots(cm: CMField, bits: int) -> mpc:
    rts = cm.field.roots(bits)
    with mp.workprec(bits):
        return mpmath.fsum(rts[j] for j in cm.cm_type)


def verify_reflex(cm: CMField, ctx: PrecisionCtx):
    poly = cm.reflex.get("polynomial")
    if poly is None:
        raise SchemaError("reflex block needs a polynomial")
    poly = [int(c) for c in poly]
    z = type_trace_roots(cm, ctx.bits)
    with ctx.workprec():
        v = abs(mpmath.polyval(list(reversed(poly)), z))
    if v > mpf(2) ** (-ctx.bits // 2) * (1 + sum(abs(c) for c in poly)):
        raise ConsistencyError("reflex: polynomial does not vanish at the CM-type trace")


# ----------------------------------------------------------- field file dump

def _fmt_fr(x: Fraction) -> str:
    return str(x)


def _ideal_block(I: Ideal) -> dict:
    return {"den": I.den, "hnf": [list(r) for r in I.rows]}


def dump_field(cm: CMField, path: str, precision_bits: int = 128, extra: Optional[dict] = None):
    """Write a CM field in the schema that ingest_field_file reads back."""
    F = cm.base
    K = cm.field

    def roots_block(NF, cplx):
        with mp.workprec(precision_bits + 8):
            rts = NF.roots(precision_bits + 32)
            digs = int(precision_bits * 0.30103) + 2
            if cplx:
                rs = [[mpmath.nstr(r.real, digs), mpmath.nstr(r.imag, digs)] for r in rts]
            else:
                rs = [mpmath.nstr(r.real, digs) for r in rts]
        return {"precision_bits": precision_bits, "roots": rs}

    if F.degree == 1:
        base = {"builtin": "Q"}
    else:
        base = {
            "name": F.name,
            "polynomial": F.field.poly,
            "integral_basis": [[_fmt_fr(c) for c in b] for b in F.field.basis],
            "embeddings": roots_block(F.field, False),
            "discriminant": F.disc,
            "units": [[_fmt_fr(c) for c in u] for u in F.units],
            "class_group": {"representatives": [_ideal_block(r) for r in F.class_group.reps],
                            "table": F.class_group.table},
        }
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": cm.name,
        "base": base,
        "field": {
            "polynomial": K.poly,
            "integral_basis": [[_fmt_fr(c) for c in b] for b in K.basis],
            "rel_square": [_fmt_fr(c) for c in cm.t],
            "embeddings": roots_block(K, True),
            "cm_type": cm.cm_type,
            "discriminant": cm.disc,
            "roots_of_unity": cm.w,
            "unit_index": cm.unit_index,
            "class_group": {
                "order": cm.class_group.order,
                "representatives": [_ideal_block(r) for r in cm.class_group.reps],
                "table": cm.class_group.table,
            },
            "primes": [_ideal_block(P) for P in cm.primes],
        },
    }
    if cm.reflex is not None:
        doc["reflex"] = cm.reflex
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False, default_flow_style=None, width=200)


# ------------------------------------------------------------ selectors

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def golden_path(name: str) -> str:
    return os.path.join(DATA_DIR, name + ".yaml")


def field_from_selector(sel: str, ctx: Optional[PrecisionCtx] = None):
    """rational | real:D | imag:d | golden:<name> | <path>."""
    ctx = ctx or PrecisionCtx(128)
    if sel in ("rational", "Q"):
        return build_rational()
    if sel.startswith("real:"):
        return build_quadratic_real(int(sel[5:]), ctx)
    if sel.startswith("imag:"):
        return build_imag_quadratic(int(sel[5:]), ctx)
    if sel.startswith("golden:"):
        return ingest_field_file(golden_path(sel[7:]), ctx)
    return ingest_field_file(sel, ctx)
