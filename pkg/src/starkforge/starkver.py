"""Stark pipeline: delta ledgers -> candidate units -> algebraic recognition ->
unit and Galois-orbit predicates, plus the group-determinant and regulator
bookkeeping that goes with them.
"""
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
import sympy
from mpmath import mp, mpc, mpf

from . import lattice
from .eisen import DeltaLedger, delta_ledger
from .errors import (LedgerMiss, NoRelationFound, OrbitMismatch, PrecisionInsufficient,
                     RankDeficient, DomainError)
from .fieldsdata import CMField
from .mpkernel import PrecisionCtx, out, to_mp

__all__ = ["RecognitionResult", "UnitSystem", "epsilon_R", "recognize_algebraic", "galois_orbit_check",
           "frobenius_determinant", "abelian_group", "regulator_structure", "qexp_integrality_probe",
           "j_values", "stark_pipeline", "load_unit_system"]


# ------------------------------------------------------------------ ledger

def epsilon_R(R1: int, R2: int, ledger: DeltaLedger):
    """|eta_K(R1) / eta_K(R2)| = exp(delta(R2) - delta(R1))."""
    e1, e2 = ledger[R1], ledger[R2]
    if e1.method != e2.method:
        raise LedgerMiss("ledger entries %r and %r come from different methods (%s, %s)"
                         % (R1, R2, e1.method, e2.method))
    if R1 == R2:
        return mpf(1)
    prec = max(mp.prec, e1.delta._mpf_[3], e2.delta._mpf_[3])
    with mp.workprec(prec + 16):
        return +mpmath.exp(e2.delta - e1.delta)


# ------------------------------------------------------------------ recognition

@dataclass
class RecognitionResult:
    candidate_poly: List[int]          # ascending: a_0 + a_1 x + ... + a_d x^d
    residual: mpf
    degree_bound: int
    bits: int
    found: bool
    is_algebraic_integer: bool = False
    is_unit: bool = False
    notes: List[str] = field(default_factory=list)

    @property
    def degree(self) -> int:
        return len(self.candidate_poly) - 1

    def poly_str(self) -> str:
        x = sympy.Symbol("x")
        return str(sympy.Poly(list(reversed(self.candidate_poly)), x).as_expr())


def _eval_poly(a, x):
    acc = mpc(0) if isinstance(x, mpc) else mpf(0)
    for c in reversed(a):
        acc = acc * x + c
    return acc


def _primitive(a: List[int]) -> List[int]:
    g = lattice.content(a) or 1
    a = [c // g for c in a]
    while len(a) > 1 and a[-1] == 0:
        a.pop()
    if a[-1] < 0:
        a = [-c for c in a]
    return a


def _relation(x, d: int, bits: int) -> List[int]:
    """Shortest LLL row for (1, x, ..., x^d) scaled by 2^(bits - 8)."""
    N = mpf(2) ** (bits - 8)
    cplx = isinstance(x, mpc) and x.imag != 0
    rows = []
    p = mpf(1) if not cplx else mpc(1)
    for i in range(d + 1):
        r = [int(i == j) for j in range(d + 1)]
        if cplx:
            r += [int(mpmath.nint(N * p.real)), int(mpmath.nint(N * p.imag))]
        else:
            r.append(int(mpmath.nint(N * (p.real if isinstance(p, mpc) else p))))
        rows.append(r)
        p = p * x
    red = lattice.lll_reduce(rows)
    best = min(red, key=lambda r: sum(v * v for v in r))
    return list(best[:d + 1])


def _minimal_factor(a: List[int], x, bits) -> List[int]:
    """Irreducible factor of a that vanishes at x (smallest residual)."""
    X = sympy.Symbol("x")
    P = sympy.Poly(list(reversed(a)), X)
    _, facs = sympy.factor_list(P)
    if len(facs) == 1 and facs[0][1] == 1:
        return a
    best, res = a, None
    for f, _ in facs:
        c = [int(v) for v in reversed(f.all_coeffs())]
        r = abs(_eval_poly(c, x))
        if res is None or r < res:
            best, res = c, r
    return best


def recognize_algebraic(x, degree_bound: int, height_bound, ctx: PrecisionCtx) -> RecognitionResult:
    """Integer relation among 1, x, ..., x^d for d = 1 .. degree_bound (LLL).

    A relation is accepted only when its residual undercuts the generic size
    H^-d of sum a_i x^i for height-H vectors by at least 2^(bits/4).
    """
    bits = ctx.bits
    H = max(int(height_bound), 2)
    need = degree_bound * math.log2(H) * 1.2
    if bits < need:
        raise PrecisionInsufficient("recognition at degree %d, height %d needs about %d bits, have %d"
                                    % (degree_bound, H, math.ceil(need), bits))
    with mp.workprec(bits + 32):
        x = to_mp(x)
        if isinstance(x, mpc) and abs(x.imag) <= abs(x) * mpf(2) ** (-bits + 8):
            x = x.real
        best_fail = None
        for d in range(1, degree_bound + 1):
            a = _relation(x, d, bits)
            if not any(a[1:]):
                continue
            a = _primitive(a)
            h = max(abs(c) for c in a)
            res = abs(_eval_poly(a, x))
            generic = mpf(h) ** (-len(a) + 1)
            if h <= H and res <= generic * mpf(2) ** (-bits / 4):
                a = _primitive(_minimal_factor(a, x, bits))
                res = abs(_eval_poly(a, x))
                lead, const = abs(a[-1]), abs(a[0])
                r = RecognitionResult(a, out(res, ctx), degree_bound, bits, True,
                                      is_algebraic_integer=(lead == 1))
                r.is_unit = r.is_algebraic_integer and const == 1
                return r
            if best_fail is None or res < best_fail[1]:
                best_fail = (a, res)
        a, res = best_fail if best_fail else ([0, 1], abs(x))
        return RecognitionResult(a, out(res, ctx), degree_bound, bits, False,
                                 notes=["no relation of degree <= %d and height <= %d" % (degree_bound, H)])


# ------------------------------------------------------------------ Galois orbits

def _orbit_values(ledger: DeltaLedger, table, R: int) -> List[mpf]:
    """eps(R S) eps(S)^-1 for S over the class group, eps(R) = |eta(R) / eta(O)|."""
    h = len(table)
    return [epsilon_R(table[R][S], S, ledger) for S in range(h)]


def _match(values, targets, tol):
    """Index permutation sending values[i] to the nearest unused target; None when a gap exceeds tol."""
    used = set()
    perm = []
    for v in values:
        best, bd = None, None
        for j, t in enumerate(targets):
            if j in used:
                continue
            dd = abs(v - t)
            if bd is None or dd < bd:
                best, bd = j, dd
        if bd is None or bd > tol * (1 + abs(v)):
            return None
        used.add(best)
        perm.append(best)
    return perm


def galois_orbit_check(K: CMField, ledger: DeltaLedger, recognitions: Optional[Dict[int, RecognitionResult]] = None,
                       tol=None) -> dict:
    """Orbit of eps(R) under (a^-1, K): regular-action test and root matching.

    For each T the conjugate eps(R)^{sigma_T} = eps(RT) eps(T)^-1 is matched by value
    against the orbit list; the resulting permutations must form the regular
    representation of the class group.  Root matching compares the orbit with the
    roots of the recognized polynomial; a mismatch is recorded, not raised.
    """
    cg = K.class_group
    h = cg.order
    if h == 1:
        return {"h": 1, "regular": True, "vacuous": True, "classes": {}}
    table = cg.table
    inv = [next(j for j in range(h) if table[i][j] == 0) for i in range(h)]
    tol = tol if tol is not None else mpf(2) ** (-min(mp.prec, 200) // 2)
    recognitions = recognitions or {}
    report = {"h": h, "regular": True, "vacuous": False, "classes": {}}
    for R in range(1, h):
        vals = _orbit_values(ledger, table, R)
        perms = {}
        ok = True
        for T in range(h):
            # sigma_T moves the conjugate at S to the one at S T
            image = [epsilon_R(table[R][table[S][T]], table[S][T], ledger) for S in range(h)]
            p = _match(image, vals, tol)
            if p is None:
                ok = False
                break
            perms[T] = p
        if ok:
            for S, T in itertools.product(range(h), repeat=2):
                comp = [perms[T][perms[S][i]] for i in range(h)]
                if comp != perms[table[S][T]]:
                    ok = False
            for T in range(1, h):
                if any(perms[T][i] == i for i in range(h)):
                    ok = False
        entry = {"orbit": [mpmath.nstr(v, 25) for v in vals], "regular": ok,
                 "permutations": {T: perms.get(T) for T in range(h)}}
        rec = recognitions.get(R)
        if rec is not None and rec.found:
            roots = mpmath.polyroots(list(reversed([mpf(c) for c in rec.candidate_poly])),
                                     maxsteps=200, extraprec=2 * mp.prec)
            m = _match(vals, roots, tol)
            entry["root_match"] = m is not None
            if m is None:
                entry["mismatch"] = OrbitMismatch.__name__
                entry["root_moduli"] = sorted(mpmath.nstr(abs(r), 15) for r in roots)
        report["classes"][R] = entry
        report["regular"] = report["regular"] and ok
    return report


# ------------------------------------------------------------------ Frobenius determinant

def abelian_group(invariants: Sequence[int]) -> List[List[int]]:
    """Multiplication table of Z/n1 x ... x Z/nk (lexicographic elements, identity 0)."""
    elems = list(itertools.product(*[range(n) for n in invariants]))
    index = {e: i for i, e in enumerate(elems)}
    return [[index[tuple((a + b) % n for a, b, n in zip(x, y, invariants))] for y in elems] for x in elems]


def _orders(table) -> List[int]:
    out_ = []
    for g in range(len(table)):
        k, x = 1, g
        while x != 0:
            x = table[x][g]
            k += 1
        out_.append(k)
    return out_


def _characters(table) -> Tuple[int, List[List[int]]]:
    """All characters as exponent vectors k(g) with chi(g) = zeta_e^k(g)."""
    n = len(table)
    orders = _orders(table)
    e = 1
    for o in orders:
        e = e * o // math.gcd(e, o)
    gens, sub = [], {0}
    for g in sorted(range(n), key=lambda g: -orders[g]):
        if g in sub:
            continue
        gens.append(g)
        frontier = list(sub)
        sub = set(sub)
        while frontier:
            x = frontier.pop()
            for s in gens:
                y = table[x][s]
                if y not in sub:
                    sub.add(y)
                    frontier.append(y)
    chars = set()
    for vals in itertools.product(*[range(0, e, e // orders[g]) for g in gens]):
        k = {0: 0}
        frontier = [0]
        good = True
        while frontier and good:
            x = frontier.pop()
            for s, v in zip(gens, vals):
                y = table[x][s]
                kv = (k[x] + v) % e
                if y in k:
                    if k[y] != kv:
                        good = False
                        break
                else:
                    k[y] = kv
                    frontier.append(y)
        if good and len(k) == n:
            chars.add(tuple(k[g] for g in range(n)))
    chars = sorted(chars)
    if len(chars) != n:
        raise DomainError("table is not an abelian group")
    return e, [list(c) for c in chars]


def _cyclo_mul(a, b, e):
    c = [Fraction(0)] * e
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                if y:
                    c[(i + j) % e] += x * y
    return c


def _cyclo_to_rational(a, e) -> Fraction:
    """Reduce a polynomial in zeta_e modulo Phi_e; the result must be rational."""
    X = sympy.Symbol("x")
    phi = [Fraction(int(c)) for c in reversed(sympy.Poly(sympy.cyclotomic_poly(e, X), X).all_coeffs())]
    a = list(a)
    d = len(phi) - 1
    for k in range(len(a) - 1, d - 1, -1):
        c = a[k]
        if c:
            for i in range(d + 1):
                a[k - d + i] -= c * phi[i]
    if any(a[1:d]):
        raise DomainError("character product is not rational")
    return a[0]


def frobenius_determinant(f: Sequence, G: Sequence[Sequence[int]]) -> Tuple[Fraction, Fraction]:
    """(prod_{chi != 1} sum_R chi(R) f(R), det_{R1, R2 != 1}(f(R1 R2^-1) - f(R1))), both exact."""
    n = len(G)
    if n < 2:
        raise DomainError("need |G| >= 2")
    f = [Fraction(v) for v in f]
    e, chars = _characters(G)
    prod = [Fraction(0)] * e
    prod[0] = Fraction(1)
    for k in chars:
        if not any(k):
            continue
        s = [Fraction(0)] * e
        for R in range(n):
            s[k[R]] += f[R]
        prod = _cyclo_mul(prod, s, e)
    lhs = _cyclo_to_rational(prod, e)
    inv = [next(j for j in range(n) if G[i][j] == 0) for i in range(n)]
    M = [[f[G[R1][inv[R2]]] - f[R1] for R2 in range(1, n)] for R1 in range(1, n)]
    rhs = lattice.det_frac(M)
    return lhs, rhs


# ------------------------------------------------------------------ regulators

@dataclass
class UnitSystem:
    """Log embeddings of Artin units eps_i^{tau_j} of an extension k / K.

    conj_logs[i][j] is the log vector (one entry per place of k, complex places
    doubled) of eps_i^{tau_j}; basis_logs optionally spans the full unit lattice
    of k modulo torsion.  m = [k : K], rank_K the unit rank of K.
    """
    conj_logs: List[List[List[mpf]]]
    m: int
    rank_K: int
    basis_logs: Optional[List[List[mpf]]] = None
    name: str = ""

    def __post_init__(self):
        if self.m == 1:
            return          # k = K: the eps_i are a unit basis, no relation
        tot = [mpmath.fsum(self.conj_logs[i][j][p] for i in range(len(self.conj_logs))
                           for j in range(self.m)) for p in range(len(self.conj_logs[0][0]))]
        if max(abs(t) for t in tot) > mpf(2) ** (-mp.prec // 2):
            raise DomainError("Artin units violate prod_j prod_i eps_i^tau_j = 1")


def _regulator(rows: List[List[mpf]]) -> mpf:
    """|det| of rows with the last place dropped; the zero-row regulator is 1."""
    r = len(rows)
    if r == 0:
        return mpf(1)
    M = mpmath.matrix([row[:r] for row in rows])
    return abs(mpmath.det(M))


def _rank(rows, tol) -> int:
    if not rows:
        return 0
    M = mpmath.matrix(rows)
    s = mpmath.svd_r(M, compute_uv=False)
    return sum(1 for v in s if v > tol)


def regulator_structure(U: UnitSystem, base_regulator=None) -> dict:
    """R_k from the full log lattice, R_K from eta_i = prod_j eps_i^tau_j,
    vol(S) from xi_j = prod_i eps_i^tau_j; checks R_k * index = R_K^{m-1} vol(S) * R_K.
    """
    m = U.m
    nu = len(U.conj_logs)
    places = len(U.conj_logs[0][0])
    tol = mpf(2) ** (-mp.prec // 2)
    rank_k = places - 1
    all_rows = [U.conj_logs[i][j] for i in range(nu) for j in range(m)]
    if _rank(all_rows, tol) < rank_k:
        raise RankDeficient("Artin units span rank %d < %d" % (_rank(all_rows, tol), rank_k))
    basis = U.basis_logs if U.basis_logs is not None else None
    # T: the lattice of all eps_i^tau_j, one relation removed when m > 1
    T_rows = all_rows[:-1] if m > 1 else all_rows
    R_T = _regulator(T_rows)
    R_k = _regulator(basis) if basis is not None else R_T
    index = R_T / R_k
    eta = [[mpmath.fsum(U.conj_logs[i][j][p] for j in range(m)) for p in range(places)] for i in range(nu)]
    # eta_i lie in K: each place of K has m places of k above it
    R_K = _regulator(eta[:U.rank_K]) / mpf(m) ** U.rank_K if U.rank_K else mpf(1)
    if base_regulator is not None and U.rank_K and abs(R_K - to_mp(base_regulator)) > tol * R_K:
        raise DomainError("Artin-unit products do not reproduce R_K")
    xi = [[mpmath.fsum(U.conj_logs[i][j][p] for i in range(nu)) for p in range(places)] for j in range(m)]
    vol_S = mpf(1)
    if m > 1:
        G = mpmath.matrix([[mpmath.fsum(a * b for a, b in zip(x, y)) for y in xi[:-1]] for x in xi[:-1]])
        vol_S = mpmath.sqrt(abs(mpmath.det(G))) / mpmath.sqrt(places)
    idx = Fraction(float(index)).limit_denominator(10 ** 6)
    lhs = R_k * index
    rhs = R_K ** (m - 1) * vol_S * R_K
    return {"R_k": R_k, "R_K": R_K, "vol_S": vol_S, "R_T": R_T, "index": idx,
            "factorization_residual": abs(lhs - rhs) / abs(rhs),
            "rank_growth": {"r_k": rank_k, "r_K": U.rank_K, "m": m,
                            "r_k - m r_K": rank_k - m * U.rank_K, "m - 1": m - 1}}


def load_unit_system(path: str, bits: int = 128) -> UnitSystem:
    """Unit data file: relative polynomial over K, units as coefficient lists in its root."""
    import yaml
    with open(path) as fh:
        d = yaml.safe_load(fh)
    poly = [int(c) for c in d["relative_polynomial"]]        # ascending
    with mp.workprec(bits + 32):
        roots = mpmath.polyroots(list(reversed([mpf(c) for c in poly])), maxsteps=200, extraprec=bits)
        roots = sorted(roots, key=lambda r: (mpmath.im(r) != 0, mpmath.im(r)))
        cyc = [int(i) for i in d["galois_cycle"]]          # tau: roots[cyc[i]] -> roots[cyc[i+1]]
        tau = {cyc[i]: cyc[(i + 1) % len(cyc)] for i in range(len(cyc))}
        weight = int(d.get("place_weight", 2))

        def logs(coeffs, shift):
            v = []
            for p in range(len(roots)):
                q = p
                for _ in range(shift):
                    q = tau[q]
                v.append(weight * mpmath.log(abs(_eval_poly([mpf(c) for c in coeffs], roots[q]))))
            return v

        m = len(roots)
        conj = [[logs(u, j) for j in range(m)] for u in d["artin_units"]]
        basis = [logs(u, int(s)) for u, s in d["unit_basis"]] if "unit_basis" in d else None
        return UnitSystem(conj, m, int(d.get("rank_K", 0)), basis, d.get("name", ""))


# ------------------------------------------------------------------ q-expansion probe

def j_values(z, reps, ctx: PrecisionCtx) -> List[mpc]:
    """j(A z) for upper triangular integer reps [[a, b], [0, d]] (first coordinates used)."""
    vals = []
    with mp.workprec(ctx.bits + 32):
        z = mpc(to_mp(z))
        for (a, b), (_, d) in reps:
            a, b, d = (Fraction(x[0]) if isinstance(x, tuple) else Fraction(x) for x in (a, b, d))
            Az = (to_mp(a) * z + to_mp(b)) / to_mp(d)
            vals.append(1728 * mpmath.kleinj(Az))
    return vals


def qexp_integrality_probe(phi_values: Sequence, A, ctx: PrecisionCtx, g_value=1, m: int = 1) -> dict:
    """Heuristic: is prod_A (x - |det A|^-m phi(Az) / g(z)) monic with integer coefficients?

    `A` is a list of representatives aligned with phi_values (as returned by
    enumerate_matrix_reps) or a single matrix given as a tuple of rows.
    """
    reps = A if isinstance(A, list) else [A] * len(phi_values)
    with mp.workprec(ctx.bits + 32):
        vals = []
        for v, M in zip(phi_values, reps):
            (a, _), (_, d) = M
            a, d = (Fraction(x[0]) if isinstance(x, tuple) else Fraction(x) for x in (a, d))
            det = abs(to_mp(a * d))
            vals.append(to_mp(v) / to_mp(g_value) / det ** m)
        coeffs = [mpc(1)]
        for v in vals:
            new = [mpc(0)] * (len(coeffs) + 1)
            for i, c in enumerate(coeffs):
                new[i + 1] += c
                new[i] -= c * v
            coeffs = new
        tol = mpf(2) ** (-ctx.bits // 2)
        ints, resid = [], mpf(0)
        for c in coeffs:
            r = int(mpmath.nint(c.real))
            ints.append(r)
            resid = max(resid, abs(c - r))
        integral = resid < tol * (1 + max(abs(c) for c in coeffs))
        return {"heuristic": True, "values": [mpmath.nstr(v, 20) for v in vals],
                "orbit_poly": ints, "residual": out(resid, ctx),
                "monic_integral": bool(integral and ints[-1] == 1)}


# ------------------------------------------------------------------ pipeline

def stark_pipeline(K: CMField, ctx: PrecisionCtx, degree_bound: Optional[int] = None, height_bound=2 ** 20,
                   ledger: Optional[DeltaLedger] = None) -> dict:
    """Ledger, eps(R) = |eta(R) / eta(O)| for R != 1, recognition and orbit report."""
    led = ledger if ledger is not None else delta_ledger(K, ctx)
    h = K.class_group.order
    d = degree_bound or max(6, 2 * h)
    # keep the height inside what the precision can certify
    height_bound = min(int(height_bound), 2 ** max(1, int(ctx.bits / (1.2 * d))))
    eps, recs = {}, {}
    for R in range(1, h):
        eps[R] = epsilon_R(R, 0, led)
        try:
            recs[R] = recognize_algebraic(eps[R], d, height_bound, ctx)
        except PrecisionInsufficient as exc:
            recs[R] = RecognitionResult([0, 1], mpf(1), d, ctx.bits, False, notes=[str(exc)])
    orbit = galois_orbit_check(K, led, recs)
    return {"field": K.name, "h": h, "ledger": led, "epsilon": eps, "recognition": recs, "orbit": orbit}
