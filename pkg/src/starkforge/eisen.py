"""Eisenstein series over a totally real F: Fourier expansion of h_chi(w; a),
the character sum h(w; a), delta_K(R) ledgers and a direct lattice sum for
Re(s) > 1 used as a cross-check.

The expansion implemented is

    h_chi(w; a) = D_F N(a) / (2^(n-2) pi^n h_F R_F) * [ chi(d) L_F(2, chi^-1) prod Im w_i
                  + pi^n D_F^(-3/2) sum_{0 != b in d^-1 a} sigma_{1,chi}((b) d a^-1) / |N b|
                    * e(Tr(b Re w)) * exp(-2 pi sum_j |b_j| Im w_j) ]

with d the different of F.  For F = Q it is pi y/3 + 4 sum sigma_1(n)/n cos(2 pi n x) e^(-2 pi n y),
which equals -4 log|eta(w)|.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
from mpmath import mp, mpf, mpc

from . import lattice
from .errors import ConvergenceError, DomainError, LedgerMiss, UnsupportedDegree
from .fieldsdata import CMField, HeckeCharTable, IdealHandle, TotallyRealField, factorint
from .idealmod import codifferent, handle, present_as_of_module
from .mpkernel import PrecisionCtx, as_mpc, gamma, hurwitz_zeta, incomplete_gamma_upper, out, riemann_zeta, to_mp
from .numfield import Elt, Ideal, quadratic_primes_above, valuation

__all__ = ["FourierParams", "DeltaEntry", "DeltaLedger", "sigma_s_chi", "sigma_divisor_sum",
           "h_chi_fourier", "h_total", "delta_K", "delta_ledger", "eisenstein_direct",
           "partial_zeta_from_eisenstein", "unit_index_KF", "factor_F_ideal",
           "twisted_epstein_s_coefficient", "truncation_bound"]


# ------------------------------------------------------------ F-ideal factoring

def _primes_above(F: TotallyRealField, p: int):
    cache = F.__dict__.setdefault("_eisen_primes", {})
    if p not in cache:
        Ff = F.field
        if Ff.degree == 1:
            P = Ideal.principal(Ff, Ff.rational(p))
            cache[p] = [(P, p, 0)]
        elif Ff.degree == 2:
            cache[p] = [(P, int(P.norm()), F.class_group.label(P)) for P, e, f in quadratic_primes_above(Ff, p)]
        else:
            raise UnsupportedDegree("prime factorisation in F needs n <= 2")
    return cache[p]


def factor_F_ideal(F: TotallyRealField, I: Ideal) -> List[Tuple[Ideal, int, int, int]]:
    """[(P, k, N(P), class label)] for an integral ideal of F."""
    if not I.is_integral():
        raise DomainError("factor_F_ideal expects an integral ideal")
    N = int(I.norm())
    outl = []
    for p in factorint(N):
        for P, nP, lab in _primes_above(F, p):
            k = valuation(I, P)
            if k:
                outl.append((P, k, nP, lab))
    return outl


def _as_ideal(F: TotallyRealField, x) -> Ideal:
    if isinstance(x, IdealHandle):
        return x.ideal
    if isinstance(x, Ideal):
        return x
    if isinstance(x, int):
        return Ideal.principal(F.field, F.field.rational(x))
    return Ideal.principal(F.field, tuple(Fraction(c) for c in x))


def _chi_at(chars: HeckeCharTable, chi: int, label: int, ctx: PrecisionCtx):
    return chars.value(chi, label, ctx)


def sigma_s_chi(x, s: int, chi: int, F: TotallyRealField, ctx: PrecisionCtx):
    """sum_{c | x} chi(c) N(c)^s as a product of local geometric sums; 0 if x is not integral."""
    I = _as_ideal(F, x)
    if not I.is_integral():
        return mpc(0)
    chars = F.class_group.characters()
    with ctx.workprec():
        acc = mpc(1)
        for P, k, nP, lab in factor_F_ideal(F, I):
            z = _chi_at(chars, chi, lab, ctx) * mpf(nP) ** s
            loc = mpc(0)
            zp = mpc(1)
            for _ in range(k + 1):
                loc += zp
                zp *= z
            acc *= loc
        return out(acc, ctx)


def sigma_divisor_sum(x, s: int, chi: int, F: TotallyRealField, ctx: PrecisionCtx):
    """The same quantity by listing every divisor (cross-check form)."""
    I = _as_ideal(F, x)
    if not I.is_integral():
        return mpc(0)
    chars = F.class_group.characters()
    fac = factor_F_ideal(F, I)
    divs = [(Ideal.unit(F.field), 0)]
    for P, k, nP, lab in fac:
        new = []
        for D, l in divs:
            Q = D
            for j in range(k + 1):
                new.append((Q, F.class_group.label(Q) if F.class_group.order > 1 else 0))
                Q = Q * P
        divs = new
    with ctx.workprec():
        acc = mpc(0)
        for D, lab in divs:
            acc += _chi_at(chars, chi, lab, ctx) * mpf(int(D.norm())) ** s
        return out(acc, ctx)


# ------------------------------------------------------------ Fourier expansion

@dataclass
class FourierParams:
    field: TotallyRealField
    a_ideal: Ideal
    w: List[mpc]
    char_table: Optional[HeckeCharTable] = None
    truncation: Optional[mpf] = None     # B: keep b with sum_j |b_j| Im w_j <= B

    def __post_init__(self):
        self.w = [as_mpc(z) for z in self.w]
        if len(self.w) != self.field.degree:
            raise DomainError("CM point has the wrong number of coordinates")
        if any(not z.imag > 0 for z in self.w):
            raise DomainError("CM point needs Im(w_i) > 0")
        if self.char_table is None:
            self.char_table = self.field.class_group.characters()


def _codiff_a(F: TotallyRealField, a: Ideal) -> Ideal:
    cache = F.__dict__.setdefault("_eisen_codiff", {})
    if "d" not in cache:
        cd = codifferent(F.field)
        cache["cd"] = cd
        cache["d"] = cd.inverse()
    return cache["cd"] * a


def _different(F: TotallyRealField) -> Ideal:
    _codiff_a(F, Ideal.unit(F.field))
    return F.__dict__["_eisen_codiff"]["d"]


def truncation_bound(p: FourierParams, ctx: PrecisionCtx) -> mpf:
    """Smallest B (step 1/4) whose tail estimate is below tail_tol.

    Shell t <= |b|_1 < t+1 holds at most 2^n (t+2)^n / (covol prod y) + 2^n
    points; each term is at most (D_F/N a) * (1 + log N(c))^n * e^(-2 pi t).
    """
    F = p.field
    n = F.degree
    with ctx.workprec():
        y = [z.imag for z in p.w]
        py = mpmath.fprod(y)
        L = _codiff_a(F, p.a_ideal)
        covol = to_mp(abs(L.norm())) * mpmath.sqrt(abs(F.disc))
        na = to_mp(p.a_ideal.norm())
        scale = mpf(F.disc) / na
        tol = ctx.tail_tol / 10

        def tail(B):
            s = mpf(0)
            t = B
            while True:
                cnt = 2 ** n * (t + 2) ** n / (covol * py) + 2 ** n
                Nc = scale * (t / n + 1) ** n / py
                term = cnt * scale * (1 + mpmath.log(1 + Nc)) ** n * mpmath.exp(-2 * mpmath.pi * t)
                s += term
                if term < tol * mpf(2) ** -20:
                    return s
                t += 1

        B = mpf(1)
        while tail(B) > tol:
            B += mpf(1) / 4
        return B


def _b_vectors(p: FourierParams, B, bits) -> List[Tuple[mpf, Elt, List[mpf]]]:
    F = p.field
    Ff = F.field
    n = Ff.degree
    L = _codiff_a(F, p.a_ideal)
    basis = L.z_basis()
    with mp.workprec(bits + 32):
        y = [z.imag for z in p.w]
        G = Ff.t2_gram(basis, bits + 32, [yy ** 2 for yy in y])
        cands = lattice.short_vectors(G, B * B, exclude_zero=True, prec=bits + 32)
        outl = []
        for c in cands:
            b = tuple(sum(Fraction(c[i]) * basis[i][k] for i in range(n)) for k in range(n))
            e = Ff.embed_real(b, bits + 32)
            l1 = mpmath.fsum(abs(e[j]) * y[j] for j in range(n))
            if l1 <= B:
                outl.append((l1, b, e))
    outl.sort(key=lambda t: (t[0], t[1]))
    return outl


def _constant_L(F: TotallyRealField, chi: int, ctx: PrecisionCtx):
    chars = F.class_group.characters()
    return F.L_value(chars.conj(chi), 2, ctx)


def h_chi_fourier(p: FourierParams, chi: int, ctx: PrecisionCtx, report: bool = False):
    F = p.field
    Ff = F.field
    n = F.degree
    chars = p.char_table
    B = p.truncation if p.truncation is not None else truncation_bound(p, ctx)
    bits = ctx.bits + 32
    big = PrecisionCtx(bits)
    d = _different(F)
    a_inv = p.a_ideal.inverse()
    da = d * a_inv
    vecs = _b_vectors(p, B, ctx.bits)
    with mp.workprec(bits):
        pi = mpmath.pi
        x = [z.real for z in p.w]
        y = [z.imag for z in p.w]
        na = mpf(p.a_ideal.norm().numerator) / p.a_ideal.norm().denominator
        pref = mpf(F.disc) * na / (mpf(2) ** (n - 2) * pi ** n * F.h * F.regulator(big))
        lab_d = F.class_group.label(d) if F.class_group.order > 1 else 0
        const = chars.value(chi, lab_d, big) * _constant_L(F, chi, big) * mpmath.fprod(y)
        terms = []
        for l1, b, e in vecs:
            c = da.scale(b)
            sig = sigma_s_chi(c, 1, chi, F, big)
            nb = abs(mpmath.fprod(e))
            ph = mpmath.expjpi(2 * mpmath.fsum(e[j] * x[j] for j in range(n)))
            terms.append(sig / nb * ph * mpmath.exp(-2 * pi * l1))
        S = mpmath.fsum(terms)
        val = pref * (const + pi ** n * mpf(F.disc) ** (-mpf(3) / 2) * S)
        val = out(val, ctx)
    if report:
        return val, {"B": mpmath.nstr(B, 8), "terms": len(vecs), "method": "fourier"}
    return val


def h_total(p: FourierParams, ctx: PrecisionCtx, report: bool = False):
    """sum_chi chi(a) h_chi(w; a), real part (the imaginary part is checked to vanish)."""
    F = p.field
    chars = p.char_table
    lab = F.class_group.label(p.a_ideal) if F.class_group.order > 1 else 0
    big = PrecisionCtx(ctx.bits + 16, ctx.tail_tol / 4)
    with mp.workprec(ctx.bits + 48):
        acc = mpc(0)
        info = []
        for chi in range(len(chars)):
            v = h_chi_fourier(p, chi, big, report=report)
            if report:
                v, r = v
                info.append(r)
            acc += chars.value(chi, lab, big) * v
        if abs(acc.imag) > ctx.tail_tol * (1 + abs(acc)) * 2 ** 8:
            raise ConvergenceError("h(w; a) came out with imaginary part %s" % mpmath.nstr(acc.imag, 5))
        val = out(acc.real, ctx)
    if report:
        return val, info
    return val


# ------------------------------------------------------------ delta ledgers

@dataclass
class DeltaEntry:
    delta: mpf
    type_ideal: IdealHandle
    cm_point: List[mpc]
    method: str
    presentation: object = None
    info: list = field(default_factory=list)


@dataclass
class DeltaLedger:
    field_name: str
    entries: Dict[int, DeltaEntry] = field(default_factory=dict)
    const: mpf = mpf(0)

    def __getitem__(self, R: int) -> DeltaEntry:
        if R not in self.entries:
            raise LedgerMiss("no ledger entry for class %r" % (R,))
        return self.entries[R]

    def shifted(self, c) -> "DeltaLedger":
        """Same ledger with every delta moved by CONST = c."""
        new = DeltaLedger(self.field_name, const=self.const + c)
        for R, e in self.entries.items():
            new.entries[R] = DeltaEntry(e.delta + c, e.type_ideal, e.cm_point, e.method, e.presentation, e.info)
        return new


def delta_K(R: int, K: CMField, ctx: PrecisionCtx, const=0) -> DeltaEntry:
    """delta_K(R) = h(w; b) - log prod Im w_i - log N(b) for a_1 in R^-1 presented as b w1 + O_F w2."""
    cg = K.class_group
    a1 = cg.reps[cg.inverse(R)]
    pres = present_as_of_module(a1, K)
    w = pres.cm_point(ctx.bits + 32)
    p = FourierParams(K.base, pres.b_ideal, w)
    val, info = h_total(p, PrecisionCtx(ctx.bits + 16, ctx.tail_tol / 4), report=True)
    with mp.workprec(ctx.bits + 32):
        nb = pres.b_ideal.norm()
        d = val - mpmath.log(mpmath.fprod(z.imag for z in w)) - mpmath.log(mpf(nb.numerator) / nb.denominator)
        d = out(d + const, ctx)
    return DeltaEntry(d, handle(K.base, pres.b_ideal), w, "fourier", pres, info)


def delta_ledger(K: CMField, ctx: PrecisionCtx, const=0, classes: Optional[Sequence[int]] = None) -> DeltaLedger:
    led = DeltaLedger(K.name, const=mpf(const))
    for R in (classes if classes is not None else range(K.h)):
        led.entries[R] = delta_K(R, K, ctx, const)
    return led


# ------------------------------------------------------------ direct lattice sum

def _row_sum(f, v, s, bits):
    """sum_{d in Z} ((d + f)^2 + v^2)^(-s) for 0 <= f < 1, v > 0, real s > 1/2."""
    ctx = PrecisionCtx(bits)
    with mp.workprec(bits + 16):
        M = int(mpmath.ceil(4 * v)) + 2
        acc = mpmath.fsum(((d + f) ** 2 + v * v) ** (-s) for d in range(-M, M + 1))
        # tails through (t^2+v^2)^-s = sum_k binom(-s,k) v^(2k) t^(-2s-2k), |v/t| <= 1/4
        k = 0
        coef = mpf(1)
        target = mpf(2) ** (-bits - 8)
        while True:
            t = coef * v ** (2 * k) * (hurwitz_zeta(2 * s + 2 * k, M + 1 + f, ctx) +
                                       hurwitz_zeta(2 * s + 2 * k, M + 1 - f, ctx))
            acc += t
            if abs(t) < target * abs(acc):
                break
            coef = coef * (-s - k) / (k + 1)
            k += 1
        return acc


def _direct_n1(p: FourierParams, s, ctx: PrecisionCtx):
    a0 = p.a_ideal.rows[0][0] * Fraction(1, p.a_ideal.den)
    bits = ctx.bits + 24
    with mp.workprec(bits):
        w = p.w[0]
        x, y = w.real, w.imag
        a0m = mpf(a0.numerator) / a0.denominator
        pi = mpmath.pi
        # rows |c| > C contribute their Poisson main term up to exp(-2 pi C a0 y)
        C = int(mpmath.ceil((bits * mpmath.log(2) + 10) / (2 * pi * a0m * y))) + 1
        big = PrecisionCtx(bits)
        acc = y ** s * 2 * riemann_zeta(2 * s, big) / 2   # c = 0, d and -d identified
        for c in range(1, C + 1):
            u = c * a0m * x
            f = u - mpmath.floor(u)
            acc += y ** s * _row_sum(f, c * a0m * y, s, bits)
        main = mpmath.sqrt(pi) * gamma(s - mpf(1) / 2, big) / gamma(s, big)
        tail = y ** s * main * (a0m * y) ** (1 - 2 * s) * hurwitz_zeta(2 * s - 1, C + 1, big)
        acc += tail
        return out(acc, ctx), {"rows": C, "tail_rows": mpmath.nstr(tail, 5)}


def _direct_n2(p: FourierParams, s, ctx: PrecisionCtx, X):
    F = p.field
    Ff = F.field
    bits = ctx.bits + 24
    with mp.workprec(bits):
        w = p.w
        y = [z.imag for z in w]
        eps = F.fundamental_unit
        Lg = abs(mpmath.log(abs(Ff.embed_real(eps, bits)[0])))
        cb = p.a_ideal.z_basis()
        ob = Ff.basis_elts()
        gens = []   # real 4-vectors of the lattice {(c_i w_i + d_i)_i}
        for b in cb:
            e = Ff.embed_real(b, bits)
            gens.append([e[i] * w[i] for i in range(2)])
        for b in ob:
            e = Ff.embed_real(b, bits)
            gens.append([mpc(e[i]) for i in range(2)])
        # quadratic form sum_i |z_i|^2 / y_i
        G = [[mpmath.fsum((gens[a][i] * gens[b][i].conjugate()).real / y[i] for i in range(2))
              for b in range(4)] for a in range(4)]
        R = mpmath.exp(Lg) * mpmath.sqrt(X) * (1 / y[0] + 1 / y[1]) * mpmath.sqrt(y[0] * y[1])
        vecs = lattice.short_vectors(G, R, exclude_zero=True, prec=bits)
        terms = []
        py = y[0] * y[1]
        for v in vecs:
            z = [mpmath.fsum(v[a] * gens[a][i] for a in range(4)) for i in range(2)]
            r = mpmath.log(abs(z[0])) - mpmath.log(abs(z[1]))
            if not (-Lg <= r < Lg):
                continue
            P = abs(z[0]) ** 2 * abs(z[1]) ** 2
            if P / py > X:
                continue
            terms.append((py / P) ** s)
        S = mpmath.fsum(sorted(terms, reverse=True)) / 2
        # leading tail: orbit count ~ (2 L pi^2 / V) P / 2
        V = abs(mpmath.det(mpmath.matrix([[g[0].real, g[0].imag, g[1].real, g[1].imag] for g in gens])))
        tail = (2 * Lg * mpmath.pi ** 2 / V) / 2 * py * X ** (1 - s) / (s - 1)
        err = abs(tail) * X ** (-mpf(1) / 2) * 10
        return out(S + tail, ctx), {"X": X, "points": len(terms), "tail": mpmath.nstr(tail, 5),
                                   "err": mpmath.nstr(err, 5), "err_value": err}


def eisenstein_direct(p: FourierParams, s, ctx: PrecisionCtx, X: Optional[int] = None, report: bool = False):
    """E(w, s; a) = sum over (c, d) in (a + O_F)/U_F, nonzero, of prod Im(w_i)^s |c_i w_i + d_i|^(-2s).

    n = 1 is summed row by row with exact Hurwitz tails; n = 2 enumerates one
    fundamental domain for the unit action (log-ratio window) up to
    prod |c_i w_i + d_i|^2 / Im w_i <= X and adds the leading tail.
    """
    s = to_mp(s)
    sre = s.real if isinstance(s, mpc) else s
    if not sre > 1:
        raise DomainError("eisenstein_direct needs Re(s) > 1")
    n = p.field.degree
    if n == 1:
        v, info = _direct_n1(p, s, ctx)
    elif n == 2:
        v, info = _direct_n2(p, s, ctx, X or 4000)
        if sre - 1 < mpf("0.05"):
            raise ConvergenceError("lattice sum too slow this close to Re(s) = 1")
    else:
        raise UnsupportedDegree("eisenstein_direct for n <= 2")
    return (v, info) if report else v


def unit_index_KF(K: CMField) -> int:
    """[U_K : U_F] = Q * w_K / 2."""
    return K.unit_index * K.w // 2


def partial_zeta_from_eisenstein(K: CMField, R: int, s, ctx: PrecisionCtx, X: Optional[int] = None):
    """zeta_K(s, R) = N(a1)^s N(omega2)^-s prod Im(w_i)^-s E(w, s; b) / [U_K : U_F], a1 in R^-1."""
    cg = K.class_group
    a1 = cg.reps[cg.inverse(R)]
    pres = present_as_of_module(a1, K)
    w = pres.cm_point(ctx.bits + 32)
    p = FourierParams(K.base, pres.b_ideal, w)
    E = eisenstein_direct(p, s, PrecisionCtx(ctx.bits + 16), X=X)
    s = to_mp(s)
    with mp.workprec(ctx.bits + 32):
        na = mpf(a1.norm().numerator) / a1.norm().denominator
        nw = K.field.norm(pres.omega2)
        nw = abs(mpf(nw.numerator) / nw.denominator)
        py = mpmath.fprod(z.imag for z in w)
        v = na ** s * nw ** (-s) * py ** (-s) * E / unit_index_KF(K)
        return out(v, ctx)


# ------------------------------------------------------ twisted (shifted) series

def _shifted_points(w, u, v, Qmax, sign):
    """(a, b) = (m+u, n+v) with |a + sign*b*w|^2 / y <= Qmax."""
    x, y = w.real, w.imag
    bmax = mpmath.sqrt(Qmax / y) + 1
    pts = []
    for n in range(int(mpmath.floor(-bmax - v)), int(mpmath.ceil(bmax - v)) + 1):
        b = n + v
        c = -sign * b * x
        r = mpmath.sqrt(Qmax * y) + 1
        for m in range(int(mpmath.floor(c - r - u)), int(mpmath.ceil(c + r - u)) + 1):
            a = m + u
            q = ((a + sign * b * x) ** 2 + (b * y) ** 2) / y
            if q <= Qmax:
                pts.append((q, m, n))
    pts.sort()
    return pts


def twisted_epstein_s_coefficient(u, v, w, ctx: PrecisionCtx, report: bool = False):
    """Coefficient of s at s = 0 of E_{u,v}(w, s) = sum_{m,n} Im(w)^s |(m+u) - (n+v) w|^(-2s).

    Riemann splitting of the theta integral at t = 1 gives, with
    Q(a, b) = |a - b w|^2 / y and its dual Q*(m, n) = |m w + n|^2 / y,

        sum_{(a,b) in Z^2 + (u,v)} Gamma(0, pi Q) + sum'_{(m,n)} e(mu + nv) e^(-pi Q*) / (pi Q*) - 1.

    The Siegel-function side is -2 log|g_{-v,u}(w)|.
    """
    bits = ctx.bits + 24
    with mp.workprec(bits):
        u, v = to_mp(u), to_mp(v)
    if mpmath.isint(u) and mpmath.isint(v):
        raise DomainError("(u, v) must not be a lattice point")
    w = as_mpc(w)
    inner = PrecisionCtx(bits)
    with mp.workprec(bits):
        pi = mpmath.pi
        T = (bits + 16) * mpmath.log(2) + 10
        Qmax = T / pi
        s1 = []
        for q, m, n in _shifted_points(w, u, v, Qmax, -1):
            s1.append(incomplete_gamma_upper(0, pi * q, inner))
        s2 = []
        for q, m, n in _shifted_points(w, 0, 0, Qmax, +1):
            if m == 0 and n == 0:
                continue
            # Q*(m, n) = |m w + n|^2 / y ; in _shifted_points(sign=+1) the pair is (a, b) = (m, n)
            # with |a + b w|^2 / y, so the character index is (b, a)
            s2.append(mpmath.expjpi(2 * (n * u + m * v)) * mpmath.exp(-pi * q) / (pi * q))
        val = mpmath.fsum(s1) + mpmath.fsum(s2) - 1
        val = out(val.real, ctx)
    if report:
        return val, {"Qmax": mpmath.nstr(Qmax, 6), "terms": len(s1) + len(s2)}
    return val
