"""Singular theta lift over O_F-lattices: Siegel kernels, Jacobi-type thetas and
the unfolded closed form of the lift.

Quadratic space: (R^3)^n with q(x) = x1 x3 - x2^2 in each real place and the
bilinear form (x, y) = x1 y3 + x3 y1 - 2 x2 y2, so (x, x)/2 = q(x) is integral
on O_F^3 and the kernel is invariant under tau -> tau + a, a in O_F.
For w in the upper half plane the positive line is spanned by
X_w = (|w|^2, Re w, 1) / Im w, (X_w, X_w) = 2.
"""
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import mpmath
from mpmath import mp, mpc, mpf

from . import lattice
from .eisen import sigma_s_chi, _different
from .errors import (ConvergenceError, CutoffTooSmall, DomainError, NotUniform,
                     UnsupportedDegree)
from .fieldsdata import TotallyRealField
from .idealmod import codifferent
from .mpkernel import GUARD, PrecisionCtx, as_mpc, gamma, incomplete_gamma_upper, out, to_mp
from .numfield import Ideal, principal_generator

__all__ = ["LatticeL3", "HalfWeightForm", "siegel_kernel", "kernel_checks", "jacobi_type_theta",
           "check_uniform", "lift_closed_form", "orbit_representative", "divisor_sum_bridge",
           "singularity_classifier"]

Elt = Tuple[Fraction, ...]


# ------------------------------------------------------------------ lattice

@dataclass
class LatticeL3:
    """x = (x1, x2, x3) with x_k in slots[k]; a^3 by default."""
    base: TotallyRealField
    a_ideal: Ideal
    slots: List[Ideal] = None

    def __post_init__(self):
        if self.slots is None:
            self.slots = [self.a_ideal] * 3

    @property
    def n(self) -> int:
        return self.base.degree

    def basis(self) -> List[Tuple[int, Elt]]:
        """(slot, field element) pairs forming a Z-basis of rank 3n."""
        return [(k, e) for k in range(3) for e in self.slots[k].z_basis()]

    def gram(self) -> List[List[Fraction]]:
        """Tr of the bilinear form on the Z-basis (exact)."""
        K = self.base.field
        B = self.basis()
        m = len(B)
        G = [[Fraction(0)] * m for _ in range(m)]
        for a in range(m):
            ka, ea = B[a]
            for b in range(m):
                kb, eb = B[b]
                if {ka, kb} == {0, 2}:
                    G[a][b] = K.trace(K.mul(ea, eb))
                elif ka == kb == 1:
                    G[a][b] = -2 * K.trace(K.mul(ea, eb))
        return G

    def covolume(self, bits=160):
        with mp.workprec(bits):
            d = lattice.det_frac(self.gram())
            return mpmath.sqrt(abs(mpf(d.numerator) / d.denominator))

    def dual(self) -> "LatticeL3":
        """Dual under Tr (x, y): slot 1 <-> slot 3 duals, slot 2 gets the extra 1/2."""
        K = self.base.field
        cd = codifferent(K)
        half = K.rational(Fraction(1, 2))
        s0 = cd * self.slots[2].inverse()
        s1 = (cd * self.slots[1].inverse()).scale(half)
        s2 = cd * self.slots[0].inverse()
        return LatticeL3(self.base, self.a_ideal, [s0, s1, s2])

    def preserves_form(self, g) -> bool:
        """g in SL2(O_F) (2x2 of field elements) maps x to g M g^T and keeps q."""
        K = self.base.field
        for k, e in self.basis()[:3 * self.n:self.n]:
            x = [K.zero(), K.zero(), K.zero()]
            x[k] = e
            y = _act(K, g, x)
            q0 = K.sub(K.mul(x[0], x[2]), K.mul(x[1], x[1]))
            q1 = K.sub(K.mul(y[0], y[2]), K.mul(y[1], y[1]))
            if q0 != q1:
                return False
        return True


def _act(K, g, x):
    (a, b), (c, d) = g
    M = [[x[0], x[1]], [x[1], x[2]]]
    gm = [[K.add(K.mul(g[i][0], M[0][j]), K.mul(g[i][1], M[1][j])) for j in range(2)] for i in range(2)]
    r = [[K.add(K.mul(gm[i][0], g[j][0]), K.mul(gm[i][1], g[j][1])) for j in range(2)] for i in range(2)]
    return [r[0][0], r[0][1], r[1][1]]


def _majorant(w_j):
    """3x3 matrix of 2 x_+^2 - (x, x) at the place with CM coordinate w_j."""
    u, v = w_j.real, w_j.imag
    X = [(u * u + v * v) / v, u / v, 1 / v]
    vec = [X[2], -2 * X[1], X[0]]          # (x, X) = vec . x
    S = [[vec[i] * vec[j] for j in range(3)] for i in range(3)]
    S[0][2] -= 1
    S[2][0] -= 1
    S[1][1] += 2
    return S, vec


def _kernel_terms(w, tau, L: LatticeL3, bits, C):
    K = L.base.field
    n = L.n
    B = L.basis()
    with mp.workprec(bits):
        embs = [K.embed_real(e, bits) for _, e in B]
        mats = [_majorant(wj) for wj in w]
        m = len(B)
        G = [[mpf(0)] * m for _ in range(m)]
        for a in range(m):
            ka = B[a][0]
            for b in range(m):
                kb = B[b][0]
                G[a][b] = mpmath.fsum(tau[j].imag * mats[j][0][ka][kb] * embs[a][j] * embs[b][j]
                                      for j in range(n))
        vecs = lattice.short_vectors(G, C, exclude_zero=False, prec=bits)
        terms = []
        pi = mpmath.pi
        for c in vecs:
            ph = mpf(0)
            mag = mpf(0)
            for j in range(n):
                x = [mpf(0)] * 3
                for a in range(m):
                    if c[a]:
                        x[B[a][0]] += c[a] * embs[a][j]
                q = x[0] * x[2] - x[1] * x[1]
                xp = mpmath.fsum(mats[j][1][i] * x[i] for i in range(3))
                M = xp * xp - 2 * q
                ph += q * tau[j].real
                mag += tau[j].imag * M
            terms.append(mpmath.expjpi(2 * ph) * mpmath.exp(-pi * mag))
        return terms


def siegel_kernel(w, tau, L: LatticeL3, ctx: PrecisionCtx, cutoff=None, report: bool = False):
    """theta_L(w, tau) = sum_{x in L} e(sum_j x_+^2 tau_j / 2 + x_-^2 conj(tau_j) / 2)."""
    w = [as_mpc(z) for z in w]
    tau = [as_mpc(z) for z in tau]
    if len(w) != L.n or len(tau) != L.n:
        raise DomainError("w and tau need one coordinate per real place")
    if any(not z.imag > 0 for z in w + tau):
        raise DomainError("w and tau must lie in the upper half plane")
    bits = ctx.bits + GUARD
    with mp.workprec(bits):
        need = ((ctx.bits + 8) * mpmath.log(2) + 3 * L.n * 3) / mpmath.pi
        C = to_mp(cutoff) if cutoff is not None else need
        if C < need:
            raise CutoffTooSmall("cutoff %s leaves a Gaussian tail above tail_tol (need %s)"
                                 % (mpmath.nstr(C, 6), mpmath.nstr(need, 6)))
        terms = _kernel_terms(w, tau, L, bits, C)
        val = out(mpmath.fsum(terms), ctx)
    if report:
        return val, {"cutoff": mpmath.nstr(C, 8), "terms": len(terms)}
    return val


def kernel_checks(w, tau, L: LatticeL3, ctx: PrecisionCtx, a=None, u=None):
    """Residuals of the three generator laws and of the printed inversion constant.

    translation: theta(w, tau + a) - theta(w, tau), a in O_F
    unit:        theta(w, u^2 tau) - theta(w, tau)
    inversion:   theta_L(w, -1/tau) - covol(L)^-1 prod (tau/i)^{1/2} (-conj(tau)/i) theta_{L#}(w, tau)
    """
    F = L.base
    K = F.field
    n = L.n
    a = a if a is not None else K.one
    u = u if u is not None else F.fundamental_unit
    inner = ctx.with_bits(ctx.bits + 16)
    with mp.workprec(ctx.bits + GUARD):
        tau = [as_mpc(t) for t in tau]
        t0 = siegel_kernel(w, tau, L, inner)
        ae = K.embed_real(a, ctx.bits + GUARD)
        t1 = siegel_kernel(w, [tau[j] + ae[j] for j in range(n)], L, inner)
        ue = K.embed_real(u, ctx.bits + GUARD)
        t2 = siegel_kernel(w, [tau[j] * ue[j] ** 2 for j in range(n)], L, inner)
        inv = [-1 / t for t in tau]
        lhs = siegel_kernel(w, inv, L, inner)
        fac = mpmath.fprod([mpmath.sqrt(t / 1j) * (-t.conjugate() / 1j) for t in tau])
        rhs = fac / L.covolume(ctx.bits + GUARD) * siegel_kernel(w, tau, L.dual(), inner)
        # printed variant: constant |D_F N(a)^2|^{3/2}, lattice a^3 on both sides
        Na = to_mp(L.a_ideal.norm())
        printed = fac * abs(F.disc * Na ** 2) ** (mpf(3) / 2) * t0
        return {"theta": t0,
                "translation": out(abs(t1 - t0), ctx),
                "unit": out(abs(t2 - t0), ctx),
                "inversion": out(abs(lhs - rhs), ctx),
                "inversion_printed": out(abs(lhs - printed), ctx)}


# ------------------------------------------------------------ half-weight forms

@dataclass
class HalfWeightForm:
    """Fourier coefficients c(mu, k) of sum c(mu, k) e(mu . tau) y^-k, mu in O_F.

    `bound` is the trace bound up to which the table is complete; `extend`
    (if given) recomputes the table for a larger bound.
    """
    field: TotallyRealField
    coeffs: Dict[Tuple[Elt, int], int]
    bound: Fraction
    uniform: bool = False
    extend: Optional[Callable[[Fraction], "HalfWeightForm"]] = None

    def c(self, mu: Elt, k: int = 0) -> int:
        K = self.field.field
        if K.trace(mu) > self.bound:
            if self.extend is None:
                raise ConvergenceError("coefficient outside the table range")
            new = self.extend(max(2 * self.bound, K.trace(mu)))
            self.coeffs, self.bound = new.coeffs, new.bound
        return self.coeffs.get((tuple(mu), k), 0)

    @classmethod
    def zero(cls, F: TotallyRealField):
        return cls(F, {}, Fraction(10 ** 9), uniform=True)


def _theta_table(F: TotallyRealField, a_ideal: Ideal, T) -> Dict[Tuple[Elt, int], int]:
    """c(mu) = #{x in a : x^2 = mu} for Tr(mu) <= T."""
    K = F.field
    Z = a_ideal.z_basis()
    G = K.t2_gram(Z, 128)
    cnt: Dict[Tuple[Elt, int], int] = {}
    for c in lattice.short_vectors(G, to_mp(T) + mpf("1e-9"), exclude_zero=False):
        x = tuple(sum(Fraction(c[i]) * Z[i][k] for i in range(len(Z))) for k in range(K.degree))
        mu = K.mul(x, x)
        key = (tuple(mu), 0)
        cnt[key] = cnt.get(key, 0) + 1
    return cnt


def jacobi_type_theta(F: TotallyRealField, a_ideal: Ideal, w=None, ctx: Optional[PrecisionCtx] = None,
                      trace_bound=40):
    """theta_a(q) = sum_{x in a} q^{(x, x)}: (value at w or None, coefficient form).

    Coefficients are indexed by the exponent mu = x^2.
    """
    T = Fraction(trace_bound)

    def build(Tn):
        return HalfWeightForm(F, _theta_table(F, a_ideal, Tn), Fraction(Tn), uniform=True, extend=build)

    form = build(T)
    if w is None:
        return None, form
    ctx = ctx or PrecisionCtx()
    K = F.field
    n = F.degree
    with mp.workprec(ctx.bits + GUARD):
        w = [as_mpc(z) for z in w]
        if any(not z.imag > 0 for z in w):
            raise DomainError("Im(w_i) must be positive")
        y = [z.imag for z in w]
        Z = a_ideal.z_basis()
        G = K.t2_gram(Z, ctx.bits + GUARD, [2 * mpmath.pi * yy for yy in y])
        C = (ctx.bits + 16) * mpmath.log(2) + 10
        acc = []
        for c in lattice.short_vectors(G, C, exclude_zero=False, prec=ctx.bits + GUARD):
            x = tuple(sum(Fraction(c[i]) * Z[i][k] for i in range(len(Z))) for k in range(n))
            e = K.embed_real(x, ctx.bits + GUARD)
            acc.append(mpmath.expjpi(2 * mpmath.fsum(e[j] ** 2 * w[j] for j in range(n))))
        return out(mpmath.fsum(acc), ctx), form


def check_uniform(G: HalfWeightForm, units: Optional[Sequence[Elt]] = None) -> bool:
    """c(mu) = c(u^2 mu) for the given units on every table entry that stays in range."""
    F = G.field
    K = F.field
    units = list(units) if units is not None else list(F.units)
    for (mu, k), v in list(G.coeffs.items()):
        for u in units:
            for uu in (u, K.inv(u)):
                m2 = K.mul(K.mul(uu, uu), mu)
                if K.trace(m2) <= G.bound and G.coeffs.get((tuple(m2), k), 0) != v:
                    return False
    return True


# ---------------------------------------------------------------- the lift

def _log_ratio_window(F: TotallyRealField):
    """log of the first embedding of the fundamental unit (> 1), n = 2."""
    e = abs(F.embed(F.fundamental_unit, 160)[0])
    return mpmath.log(e if e > 1 else 1 / e)


def orbit_representative(F: TotallyRealField, alpha: Elt, lam: Elt) -> Tuple[Elt, Elt]:
    """Representative of (alpha, lambda) under (alpha, lambda) ~ (alpha u^2, lambda / u^2).

    Chosen with log|alpha_1 / alpha_2| in [-log eps, 3 log eps).  These ends
    are odd multiples of log eps, which alpha / alpha' (norm 1) never hits.
    """
    K = F.field
    if F.degree == 1:
        return tuple(alpha), tuple(lam)
    if F.degree != 2:
        raise UnsupportedDegree("orbit representatives for n <= 2")
    eps = F.fundamental_unit
    if abs(F.embed(eps, 96)[0]) < 1:
        eps = K.inv(eps)
    L = _log_ratio_window(F)
    e = F.embed(alpha, 128)
    r = mpmath.log(abs(e[0] / e[1]))
    # eps^2 moves log|a1/a2| by 4 L
    k = int(mpmath.floor((r + L) / (4 * L)))
    if k == 0:
        return tuple(alpha), tuple(lam)
    u2 = K.pow(K.mul(eps, eps), abs(k))
    if k > 0:
        return K.div(alpha, u2), K.mul(lam, u2)
    return K.mul(alpha, u2), K.div(lam, u2)


def _lift_cutoff(n, bits):
    # terms are bounded by e^{-2 pi B} times a polynomial in B
    return (bits * math.log(2) + 12 + 6 * n) / (2 * math.pi) + 1


def lift_closed_form(G: HalfWeightForm, w, ctx: PrecisionCtx, a_ideal: Optional[Ideal] = None,
                     report: bool = False):
    """Unfolded lift of a uniform form G at w.

    kappa_0 c(0) prod Im w_i + kappa sum_{(alpha, lambda)/~} c(lambda^2) |N alpha|^-1 Re e*(alpha lambda / delta)

    with alpha over O_F \\ 0 modulo squares of units, lambda over a \\ 0 modulo sign,
    delta a generator of the different, e*(b) = e(sum b_j x_j) exp(-2 pi sum |b_j| y_j),
    kappa_0 = D_F N(a) zeta_F(2) / (2^{n-2} pi^n R_F) and kappa = D_F^{1/2} / (2^{2n-2} R_F).
    """
    F = G.field
    K = F.field
    n = F.degree
    if n > 2:
        raise UnsupportedDegree("lift closed form for n <= 2")
    if F.h != 1:
        raise UnsupportedDegree("lift closed form needs h_F = 1")
    if not G.uniform and not check_uniform(G):
        raise NotUniform("the unfolding needs a uniform form")
    a_ideal = a_ideal or Ideal.unit(K)
    a_gen = principal_generator(a_ideal)
    delta = principal_generator(_different(F))
    bits = ctx.bits + GUARD + 16
    big = PrecisionCtx(bits)
    with mp.workprec(bits):
        w = [as_mpc(z) for z in w]
        if len(w) != n or any(not z.imag > 0 for z in w):
            raise DomainError("w must be a point of H^n")
        pi = mpmath.pi
        x = [z.real for z in w]
        y = [z.imag for z in w]
        R = F.regulator(big)
        Na = to_mp(a_ideal.norm())
        D = mpf(F.disc)
        zeta2 = F.zeta(2, big)
        c0 = G.c(K.zero(), 0)
        const = c0 * D * Na * zeta2 * mpmath.fprod(y) / (mpf(2) ** (n - 2) * pi ** n * R)
        kappa = mpmath.sqrt(D) / (mpf(2) ** (2 * n - 2) * R)
        B = mpf(_lift_cutoff(n, bits))
        ad = K.div(a_gen, delta)
        ade = K.embed_real(ad, bits)
        cw = [abs(ade[j]) * y[j] for j in range(n)]          # |b_j| y_j = cw_j |alpha_j lambda_j|
        Nmax = (B / n) ** n / mpmath.fprod(cw)
        terms = []
        for alpha in _alpha_reps(F, Nmax, bits):
            ea = K.embed_real(alpha, bits)
            wts = [(cw[j] * abs(ea[j])) ** 2 for j in range(n)]
            Gm = K.t2_gram(K.basis_elts(), bits, wts)
            Na_ = abs(mpmath.fprod(ea))
            for c in lattice.short_vectors(Gm, B * B, exclude_zero=True, prec=bits):
                if next(t for t in c if t) < 0:
                    continue   # lambda modulo sign
                lam = K.elt(c)
                el = K.embed_real(lam, bits)
                l1 = mpmath.fsum(cw[j] * abs(ea[j] * el[j]) for j in range(n))
                if l1 > B:
                    continue
                cl = G.c(K.mul(K.mul(lam, lam), K.mul(a_gen, a_gen)), 0)
                if not cl:
                    continue
                ph = mpmath.cospi(2 * mpmath.fsum(ea[j] * el[j] * ade[j] * x[j] for j in range(n)))
                terms.append(cl * ph * mpmath.exp(-2 * pi * l1) / Na_)
        val = const + kappa * mpmath.fsum(terms)
        val = out(val, ctx)
    if report:
        return val, {"B": mpmath.nstr(B, 8), "terms": len(terms), "method": "theta-lift"}
    return val


def _alpha_reps(F: TotallyRealField, Nmax, bits) -> List[Elt]:
    """Nonzero alpha in O_F with |N alpha| <= Nmax, one per class modulo U_F^2."""
    K = F.field
    if F.degree == 1:
        top = int(mpmath.floor(Nmax))
        return [(Fraction(s * k),) for k in range(1, top + 1) for s in (1, -1)]
    L = _log_ratio_window(F)
    with mp.workprec(bits):
        T2 = 2 * Nmax * mpmath.exp(3 * L) + 1
        G = K.t2_gram(K.basis_elts(), bits)
        reps = []
        for c in lattice.short_vectors(G, T2, exclude_zero=True, prec=bits):
            a = K.elt(c)
            e = K.embed_real(a, bits)
            if abs(e[0] * e[1]) > Nmax:
                continue
            r = mpmath.log(abs(e[0] / e[1]))
            if -L <= r < 3 * L:
                reps.append(a)
        reps.sort()
        return reps


# ---------------------------------------------------------- divisor bridge

def _element_divisors(F: TotallyRealField, g: Elt, bits=128) -> List[Elt]:
    """Divisors of g in O_F up to units."""
    K = F.field
    Ng = abs(K.norm(g))
    if F.degree == 1:
        m = int(abs(g[0]))
        return [(Fraction(d),) for d in range(1, m + 1) if m % d == 0]
    if F.degree != 2:
        raise UnsupportedDegree("element divisors for n <= 2")
    L = _log_ratio_window(F)
    with mp.workprec(bits):
        T2 = 2 * to_mp(Ng) * mpmath.exp(L) + 1
        G = K.t2_gram(K.basis_elts(), bits)
        found = []
        for c in lattice.short_vectors(G, T2, exclude_zero=True, prec=bits):
            lam = K.elt(c)
            Nl = abs(K.norm(lam))
            if Ng % Nl or not K.is_integral(K.div(g, lam)):
                continue
            e = K.embed_real(lam, bits)
            r = mpmath.log(abs(e[0] / e[1]))
            if e[0] > 0 and -L <= r < L:
                found.append(lam)
        # the window is half-open but boundary elements can tie numerically
        uniq = []
        for lam in sorted(found):
            if not any(K.is_integral(K.div(lam, m)) and K.is_integral(K.div(m, lam)) for m in uniq):
                uniq.append(lam)
        return uniq


def divisor_sum_bridge(F: TotallyRealField, beta: Elt, ctx: PrecisionCtx, a_ideal: Optional[Ideal] = None):
    """(sum_chi chi(a) sigma_{1,chi}((beta) a^-1), sum_{lambda | beta/a mod units} |N lambda|)."""
    K = F.field
    if all(t == 0 for t in beta):
        raise DomainError("beta must be nonzero")
    if F.h != 1:
        raise UnsupportedDegree("element side of the bridge needs h_F = 1")
    a_ideal = a_ideal or Ideal.unit(K)
    chars = F.class_group.characters()
    nI = Ideal.principal(K, beta) * a_ideal.inverse()
    with ctx.workprec():
        lab = 0
        lhs = mpmath.fsum(chars.value(chi, lab, ctx) * sigma_s_chi(nI, 1, chi, F, ctx)
                          for chi in range(len(chars)))
        g = K.div(beta, principal_generator(a_ideal))
        rhs = sum(abs(K.norm(l)) for l in _element_divisors(F, g))
        return out(lhs.real if isinstance(lhs, mpc) else lhs, ctx), rhs


# ---------------------------------------------------------- singularities

def singularity_classifier(c_table, s: int, ctx: PrecisionCtx, r_values=None):
    """Predicted singularity of f(r) = c |r|^{-2s} Gamma(s, r^2) at r = 0 and a fit against it.

    s a non-positive integer: type (-1)^{s+1} r^{-2s} log(r^2) / (-s)!;
    s > 0: |r|^{-2s} Gamma(s).  The regular part is fitted as a polynomial in r^2.
    """
    c = to_mp(sum(c_table.values()) if isinstance(c_table, dict) else c_table)
    s = int(s)
    inner = ctx.with_bits(ctx.bits + 32)
    with mp.workprec(ctx.bits + GUARD + 32):
        if r_values is None:
            r_values = [mpf(10) ** (-mpf(k) / 2) for k in range(2, 9)]   # 1e-1 ... 1e-4
        rs = [to_mp(r) for r in r_values]
        if s <= 0:
            kind = "log"
            pred = mpf(-1) ** (s + 1) / mpmath.factorial(-s) * c
            basis_f = lambda r: r ** (-2 * s) * mpmath.log(r * r)
            desc = "(-1)^(s+1) r^(-2s) log(r^2) / (-s)!"
        else:
            kind = "power"
            pred = gamma(s, inner) * c
            basis_f = lambda r: r ** (-2 * s)
            desc = "|r|^(-2s) Gamma(s)"
        f = [c * abs(r) ** (-2 * s) * incomplete_gamma_upper(s, r * r, inner) for r in rs]
        # least squares on [singular, 1, r^2, r^4, r^6]
        cols = [basis_f] + [lambda r, k=k: r ** (2 * k) for k in range(0, 4)]
        A = mpmath.matrix([[col(r) for col in cols] for r in rs])
        sol = mpmath.qr_solve(A, mpmath.matrix(f))[0]
        fitted = sol[0]
        # large r: no singularity, f decays
        far = c * incomplete_gamma_upper(s, mpf(100), inner) * mpf(10) ** (-2 * s)
        return {"s": s, "type": kind, "descriptor": desc, "predicted": out(pred, ctx),
                "fitted": out(fitted, ctx), "slope": out(fitted / pred, ctx), "slope_error": out(abs(fitted / pred - 1), ctx),
                "r": [mpmath.nstr(r, 3) for r in rs], "f_at_r10": out(far, ctx)}
