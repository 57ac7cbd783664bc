"""Shintani cones for real quadratic fields, Barnes zeta/Gamma for n <= 2, and
the classical Lerch / Chowla-Selberg checks.

Cone zeta values at s = 1 - m come from the Mellin representation
Gamma(s)^n zeta(s, C, x) = int prod y_i^{s-1} prod_j e^{(1-x_j)c_j}/(e^{c_j}-1) dy,
split into the charts "y_k is the largest coordinate".  Only the pole of
order n survives the division by Gamma(s)^n, and it is read off from the
Bernoulli expansion of the integrand.
"""
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

import mpmath
from mpmath import mp, mpc, mpf

from . import lattice
from .errors import DomainError, NotTotallyPositive, PoleError, UnsupportedDegree
from .fieldsdata import TotallyRealField
from .mpkernel import GUARD, PrecisionCtx, _bernoulli, gamma, hurwitz_zeta, loggamma, out, to_mp
from .numfield import Ideal

__all__ = ["Cone", "ShintaniDecomposition", "decompose_real_quadratic", "cone_zeta_negative",
           "zeta_F_negative", "zeta_F_negative_functional", "shintani_zeta", "shintani_zeta_deriv0",
           "barnes_gamma", "barnes_rho", "lerch_check", "chowla_selberg_check",
           "shintani_reflection_experiment", "toric_vanishing_order", "digamma", "bernoulli_poly"]


# ------------------------------------------------------------------ cones

@dataclass
class Cone:
    """Simplicial cone spanned by field elements; open_rays[j] excludes the ray of generator j."""
    generators: List[tuple]
    open_rays: List[bool]
    field: object = None

    def embeddings(self, bits=128):
        return [self.field.embed_real(g, bits) for g in self.generators]

    def coordinates(self, point, bits=128):
        """Solve point = sum t_j v_j in embedding space."""
        with mp.workprec(bits):
            V = self.embeddings(bits)
            n = len(V)
            A = mpmath.matrix([[V[j][i] for j in range(n)] for i in range(n)])
            return list(mpmath.lu_solve(A, mpmath.matrix(list(point))))

    def contains(self, point, bits=128) -> bool:
        t = self.coordinates(point, bits)
        with mp.workprec(bits):
            # coordinates within rounding of zero are on a boundary ray
            eps = mpf(2) ** (8 - bits) * max(abs(tj) for tj in t)
            t = [mpf(0) if abs(tj) <= eps else tj for tj in t]
        if any(tj < 0 for tj in t) or all(tj == 0 for tj in t):
            return False
        if len(t) == 1:
            return True
        # the ray of generator j is the locus where the other coordinate vanishes
        if self.open_rays[1] and t[0] == 0:
            return False
        if self.open_rays[0] and t[1] == 0:
            return False
        return True


@dataclass
class ShintaniDecomposition:
    cones: List[Cone]
    unit: tuple
    field: TotallyRealField

    def locate(self, point, bits=128) -> List[Tuple[int, int]]:
        """All (cone index, k) with point in unit^k * cone."""
        F = self.field.field
        with mp.workprec(bits):
            eu = F.embed_real(self.unit, bits)
            hits = []
            if len(eu) == 1:
                return [(0, 0)] if point[0] > 0 else []
            L = mpmath.log(eu[0] / eu[1])
            r = mpmath.log(point[0] / point[1])
            k0 = int(mpmath.floor(r / L))
            for k in (k0 - 1, k0, k0 + 1):
                p = [point[i] * eu[i] ** (-k) for i in range(len(point))]
                for ci, C in enumerate(self.cones):
                    if C.contains(p, bits):
                        hits.append((ci, k))
            return hits


def decompose_real_quadratic(F: TotallyRealField) -> ShintaniDecomposition:
    """One half-open cone between the rays of 1 and the totally positive fundamental unit.

    Convention: the ray of 1 is included, the ray of the unit excluded.
    """
    K = F.field
    if F.degree == 1:
        return ShintaniDecomposition([Cone([K.one], [False], K)], K.one, F)
    if F.degree != 2:
        raise UnsupportedDegree("Shintani decomposition implemented for n <= 2")
    eta = F.totally_positive_unit()
    return ShintaniDecomposition([Cone([K.one, eta], [False, True], K)], eta, F)


def bernoulli_poly(k: int, x):
    """B_k(x) from exact Bernoulli numbers."""
    return sum(math.comb(k, j) * to_mp(_bernoulli(j)) * x ** (k - j) for j in range(k + 1))


def _series_power(alpha, beta, p: int, deg: int):
    """Taylor coefficients of (alpha + beta u)^p up to u^deg, p >= -1."""
    out_ = []
    r = beta / alpha
    for t in range(deg + 1):
        if p >= 0 and t > p:
            out_.append(mpf(0))
            continue
        out_.append(mpmath.binomial(p, t) * alpha ** p * r ** t)
    return out_


def _series_mul(a, b, deg):
    c = [mpf(0)] * (deg + 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j in range(deg + 1 - i):
            c[i + j] += x * b[j]
    return c


def cone_zeta_negative(m: int, A, x, ctx: PrecisionCtx):
    """zeta(1 - m, C, x) = sum_{k>=0} prod_i L_i(x + k)^{m-1} continued, for n = 1, 2.

    A[i][j] = sigma_i(v_j) (embedding i of generator j), x the cone offsets.
    """
    if m < 1:
        raise DomainError("m must be a positive integer")
    n = len(A)
    if n > 2:
        raise UnsupportedDegree("cone zeta at negative integers only for n <= 2")
    with mp.workprec(ctx.bits + GUARD + 8 * m):
        A = [[to_mp(a) for a in row] for row in A]
        x = [to_mp(t) for t in x]
        B = [[bernoulli_poly(l, 1 - x[j]) / mpmath.factorial(l) for l in range(n * m + 1)] for j in range(n)]
        if n == 1:
            val = (-1) ** (m - 1) * mpmath.factorial(m - 1) * B[0][m] * A[0][0] ** (m - 1)
            return out(val, ctx)
        deg = m - 1
        total = mpf(0)
        for k in range(2):
            o = 1 - k
            for l1 in range(2 * m + 1):
                l2 = 2 * m - l1
                s1 = _series_power(A[k][0], A[o][0], l1 - 1, deg)
                s2 = _series_power(A[k][1], A[o][1], l2 - 1, deg)
                total += B[0][l1] * B[1][l2] * _series_mul(s1, s2, deg)[deg]
        val = mpmath.factorial(m - 1) ** 2 * total / 2
        return out(val, ctx)


def _cone_offsets(F: TotallyRealField, cone: Cone, ideal: Optional[Ideal] = None):
    """Points x in (0,1] x [0,1) with x . v in the ideal."""
    K = F.field
    I = ideal or Ideal.unit(K)
    V = [list(g) for g in cone.generators]
    n = len(V)
    # coordinates of the ideal's Z-basis in the basis of cone generators
    Vt = [[V[j][i] for j in range(n)] for i in range(n)]
    Z = I.z_basis()
    coords = [lattice.solve_frac(Vt, list(b)) for b in Z]
    den = 1
    for c in coords:
        for t in c:
            den = den * t.denominator // math.gcd(den, t.denominator)
    pts = set()
    for cs in itertools.product(range(den), repeat=n):
        p = [sum(cs[r] * coords[r][j] for r in range(n)) % 1 for j in range(n)]
        pts.add(tuple(p))
    res = []
    for p in sorted(pts):
        p = list(p)
        if p[0] == 0:
            p[0] = Fraction(1)
        res.append(tuple(p))
    return res


def zeta_F_negative(F: TotallyRealField, m: int, ctx: PrecisionCtx):
    """zeta_F(1 - m) by summing cone zetas over the Shintani decomposition (narrow class number 1)."""
    if F.degree == 1:
        with mp.workprec(ctx.bits + GUARD):
            return out(-bernoulli_poly(m, mpf(1)) / m, ctx)
    if F.narrow_h != 1:
        raise UnsupportedDegree("cone route implemented for narrow class number 1")
    dec = decompose_real_quadratic(F)
    total = mpf(0)
    bits = ctx.bits + GUARD + 16
    with mp.workprec(bits):
        for C in dec.cones:
            E = C.embeddings(bits)
            A = [[E[j][i] for j in range(len(E))] for i in range(len(E))]
            for x in _cone_offsets(F, C):
                total += cone_zeta_negative(m, A, x, ctx.with_bits(ctx.bits + 16))
        return out(total, ctx)


def zeta_F_negative_functional(F: TotallyRealField, m: int, ctx: PrecisionCtx):
    """zeta_F(1 - m), m even, from zeta_F(m) and the functional equation (real quadratic).

    zeta_F(1-m) = D^{m - 1/2} (2 (m-1)!)^2 / (2 pi)^{2m} zeta_F(m).
    """
    if F.degree != 2 or m % 2:
        raise DomainError("functional-equation oracle for real quadratic F and even m")
    with mp.workprec(ctx.bits + GUARD):
        D = F.disc
        zF = F.zeta(m, ctx.with_bits(ctx.bits + 16))
        c = mpf(D) ** (m - mpf(1) / 2) * (2 * mpmath.factorial(m - 1)) ** 2 / (2 * mpmath.pi) ** (2 * m)
        return out(c * zF, ctx)


# ---------------------------------------------------------------- Barnes zeta

def digamma(x, ctx: PrecisionCtx):
    """psi(x) for real x > 0: upward recurrence then the asymptotic series."""
    with ctx.workprec():
        x = to_mp(x)
        if not x > 0:
            raise DomainError("digamma needs x > 0")
        bits = ctx.bits + GUARD
        target = mpf(2) ** (-bits)
        shift = mpf(0)
        X = int(0.2 * bits) + 10
        while x < X:
            shift -= 1 / x
            x += 1
        acc = mpmath.log(x) - 1 / (2 * x)
        x2 = x * x
        p = x2
        k = 1
        while True:
            b = _bernoulli(2 * k)
            t = mpf(b.numerator) / b.denominator / (2 * k * p)
            acc -= t
            if abs(t) < target:
                break
            p *= x2
            k += 1
        return out(acc + shift, ctx)


def _check_weights(w, x):
    w = [to_mp(t) for t in w]
    x = to_mp(x)
    if not all(t > 0 for t in w) or not x > 0:
        raise DomainError("Barnes zeta needs positive weights and shift")
    if len(w) not in (1, 2):
        raise UnsupportedDegree("Barnes zeta implemented for n <= 2")
    return w, x


def _tail_parameters(w1, w2, bits):
    # asymptotic Hurwitz expansion is accurate to ~ e^{-2 pi a} at a = M w2 / w1
    a_needed = bits * math.log(2) / (2 * math.pi) + 4
    M = int(math.ceil(a_needed * float(w1 / w2))) + 1
    return M


def shintani_zeta(s, w, x, ctx: PrecisionCtx):
    """zeta_n(s, w, x) = sum_{m >= 0} (x + m . w)^{-s}, n <= 2, continued to all s but the poles."""
    w, x = _check_weights(w, x)
    n = len(w)
    bits = ctx.bits + GUARD
    inner = ctx.with_bits(ctx.bits + 16)
    with mp.workprec(bits):
        s = to_mp(s)
        if n == 1:
            if abs(s - 1) < ctx.tail_tol:
                raise PoleError("zeta_1 has a pole at s = 1")
            return out(w[0] ** (-s) * hurwitz_zeta(s, x / w[0], inner), ctx)
        for pole in (1, 2):
            if abs(s - pole) < ctx.tail_tol:
                raise PoleError("zeta_2 has a pole at s = %d" % pole)
        w1, w2 = w
        r = w2 / w1
        M = _tail_parameters(w1, w2, bits)
        acc = mpf(0)
        for k in range(M):
            acc += w1 ** (-s) * hurwitz_zeta(s, (x + k * w2) / w1, inner)
        b = M + x / w2
        W = (w1 * r) ** (-s)
        acc += W * r / (s - 1) * hurwitz_zeta(s - 1, b, inner)
        acc += W / 2 * hurwitz_zeta(s, b, inner)
        target = mpf(2) ** (-bits)
        kk = 1
        while True:
            bq = to_mp(_bernoulli(2 * kk)) / mpmath.factorial(2 * kk)
            sarg = s + 2 * kk - 1
            if abs(sarg - 1) < ctx.tail_tol:
                # (s)_{2k-1} zeta(s+2k-1, b) -> product of the nonvanishing Pochhammer factors
                poch = mpf(1)
                for j in range(2 * kk - 1):
                    if j != 2 * kk - 2:
                        poch *= s + j
                term = bq * poch * W * r ** (1 - 2 * kk)
            else:
                term = bq * mpmath.rf(s, 2 * kk - 1) * W * r ** (1 - 2 * kk) * hurwitz_zeta(sarg, b, inner)
            acc += term
            if abs(term) < target * (1 + abs(acc)) or kk > 4 * bits:
                break
            kk += 1
        return out(acc, ctx)


def shintani_zeta_deriv0(w, x, ctx: PrecisionCtx):
    """d/ds zeta_n(s, w, x) at s = 0."""
    w, x = _check_weights(w, x)
    bits = ctx.bits + GUARD
    inner = ctx.with_bits(ctx.bits + 16)
    with mp.workprec(bits):
        if len(w) == 1:
            a = x / w[0]
            val = -mpmath.log(w[0]) * hurwitz_zeta(0, a, inner) + hurwitz_zeta(0, a, inner, derivative=1)
            return out(val, ctx)
        w1, w2 = w
        r = w2 / w1
        lw1 = mpmath.log(w1)
        M = _tail_parameters(w1, w2, bits)
        acc = mpf(0)
        for k in range(M):
            a = (x + k * w2) / w1
            acc += -lw1 * hurwitz_zeta(0, a, inner) + hurwitz_zeta(0, a, inner, derivative=1)
        b = M + x / w2
        lW = mpmath.log(w1 * r)
        # T0 = W r zeta(s-1, b) / (s-1), W = (w1 r)^{-s}
        z1 = hurwitz_zeta(-1, b, inner)
        dz1 = hurwitz_zeta(-1, b, inner, derivative=1)
        acc += r * (-z1) * (-lW + 1) + r * (-dz1)
        # T1 = W zeta(s, b) / 2
        acc += (-lW * hurwitz_zeta(0, b, inner) + hurwitz_zeta(0, b, inner, derivative=1)) / 2
        # k = 1: c_1 W r^{-1} s zeta(s+1, b), s zeta(s+1, b) = 1 - s psi(b) + O(s^2)
        c1 = to_mp(_bernoulli(2)) / 2
        acc += c1 / r * (-lW - digamma(b, inner))
        target = mpf(2) ** (-bits)
        kk = 2
        while True:
            bq = to_mp(_bernoulli(2 * kk)) / mpmath.factorial(2 * kk)
            term = bq * mpmath.factorial(2 * kk - 2) * r ** (1 - 2 * kk) * hurwitz_zeta(2 * kk - 1, b, inner)
            acc += term
            if abs(term) < target * (1 + abs(acc)) or kk > 4 * bits:
                break
            kk += 1
        return out(acc, ctx)


def barnes_gamma(x, w, ctx: PrecisionCtx):
    """log(Gamma_n(x, w) / rho_n(w)) = d/ds zeta_n(s, w, x) at s = 0."""
    return shintani_zeta_deriv0(w, x, ctx)


def barnes_rho(w, ctx: PrecisionCtx):
    """rho_n(w) from -log rho_n = lim_{x -> 0+} (d/ds zeta_n(0, w, x) + log x).

    Removing the m = 0 term x^{-s} leaves a function analytic at x = 0, so the
    limit is its value there: zeta_1(s, w2, w2) + zeta_2(s, w, w1) for n = 2,
    and zeta_1(s, w, w) for n = 1.
    """
    w = [to_mp(t) for t in w]
    with ctx.workprec():
        if len(w) == 1:
            neg = shintani_zeta_deriv0(w, w[0], ctx)
        elif len(w) == 2:
            neg = shintani_zeta_deriv0([w[1]], w[1], ctx) + shintani_zeta_deriv0(w, w[0], ctx)
        else:
            raise UnsupportedDegree("n <= 2")
        return out(mpmath.exp(-neg), ctx)


def lerch_check(x, ctx: PrecisionCtx):
    """(Barnes route, Stirling route) for log(Gamma(x) / sqrt(2 pi))."""
    a = barnes_gamma(x, [1], ctx)
    with ctx.workprec():
        x = to_mp(x)
        # the Stirling kernel wants Re >= 1/2
        b = loggamma(x + 1, ctx.with_bits(ctx.bits + 16)) - mpmath.log(x) - mpmath.log(2 * mpmath.pi) / 2
        b = out(b.real if isinstance(b, mpc) else b, ctx)
    return a, b


def chowla_selberg_check(ctx: PrecisionCtx):
    """|eta| at the CM points of Q(i) and Q(sqrt -3) against their Gamma-value closed forms."""
    from .thetafun import dedekind_eta
    rows = []
    inner = ctx.with_bits(ctx.bits + 16)
    with ctx.workprec():
        pi = mpmath.pi
        lhs = abs(dedekind_eta(mpc(0, 1), inner))
        rhs = gamma(mpf(1) / 4, inner) / (2 * pi ** (mpf(3) / 4))
        rows.append({"field": "Q(i)", "w": "i", "eta": lhs, "closed_form": rhs,
                     "rel_err": out(abs(lhs / rhs - 1), ctx)})
        rho = mpc(-0.5, mpmath.sqrt(3) / 2)
        lhs = abs(dedekind_eta(rho, inner))
        rhs = mpf(3) ** (mpf(1) / 8) * gamma(mpf(1) / 3, inner) ** (mpf(3) / 2) / (2 * pi)
        rows.append({"field": "Q(sqrt-3)", "w": "exp(2 pi i/3)", "eta": lhs, "closed_form": rhs,
                     "rel_err": out(abs(lhs / rhs - 1), ctx)})
    return rows


# ------------------------------------------------------ reflection experiment

def shintani_reflection_experiment(z, F: TotallyRealField, ctx: PrecisionCtx,
                                   deltas=(mpf("1e-2"), mpf("1e-3"), mpf("1e-4"))):
    """Experiment: Gamma_2(z) / Gamma_2(1 + e - z) with weights (1, e) against the
    unit-circle product formula, regularized by pushing q, q' into the disc.

    Diagnostic only; the products sit on |q| = 1.
    """
    if F.degree != 2:
        raise UnsupportedDegree("reflection experiment needs a real quadratic field")
    with ctx.workprec():
        e = abs(F.embed(F.fundamental_unit, ctx.bits + GUARD)[0])
        z = to_mp(z)
        if not (z > 0 and z < 1 + e) or mpmath.isnan(z):
            raise DomainError("z must lie in (0, 1 + e)")
        w = [mpf(1), e]
        lhs_log = barnes_gamma(z, w, ctx) - barnes_gamma(1 + e - z, w, ctx)
        lhs = mpmath.exp(lhs_log)
        pi = mpmath.pi
        pre = mpmath.sqrt(mpc(0, 1)) * mpmath.expjpi((e + 1 / e) / 12) * \
            mpmath.expjpi((z * z / e - (1 + 1 / e) * z) / 2)
        rhs_vals = []
        for d in deltas:
            d = to_mp(d)
            q = mpmath.expjpi(2 * e * (1 + 1j * d))
            qp = mpmath.expjpi(-2 / e * (1 - 1j * d))
            qz = mpmath.expjpi(2 * z)
            qz2 = mpmath.expjpi(2 * z / e)
            num = _qprod(q, qz, ctx.bits)
            den = _qprod(qp, qz2, ctx.bits)
            rhs_vals.append(pre * num / den)
        # polynomial extrapolation to delta = 0 (Neville)
        xs = [to_mp(d) for d in deltas]
        P = list(rhs_vals)
        for k in range(1, len(xs)):
            for i in range(len(xs) - k):
                P[i] = (xs[i + k] * P[i] - xs[i] * P[i + 1]) / (xs[i + k] - xs[i])
        extrap = P[0]
        diffs = [abs(rhs_vals[i + 1] - rhs_vals[i]) for i in range(len(rhs_vals) - 1)]
        monotone = all(diffs[i + 1] <= diffs[i] for i in range(len(diffs) - 1))
        unstable = not monotone or any(mpmath.isnan(abs(v)) for v in rhs_vals)
        return {"experiment": True, "z": z, "unit": e, "lhs": lhs, "rhs_by_delta": rhs_vals,
                "deltas": xs, "rhs_extrapolated": extrap, "delta_steps": diffs,
                "monotone": monotone, "flag": "ExtrapolationUnstable" if unstable else "",
                "abs_ratio": abs(extrap) / lhs}


def _qprod(q, x, bits):
    """prod_{n>=1} (1 - q^n x), |q| < 1."""
    eps = mpf(2) ** (-bits - 8)
    p = mpc(1)
    qn = q
    n = 0
    while abs(qn) > eps and n < 10 ** 6:
        p *= 1 - qn * x
        qn *= q
        n += 1
    return p


# ----------------------------------------------------- toric vanishing order

def _pairing(K, ell, a):
    return K.trace(K.mul(ell, a))


def toric_vanishing_order(F: TotallyRealField, ell, alpha, report: bool = False):
    """min over u in U_F^+ of <ell, u alpha> = Tr(ell u alpha).

    The pairing is a positive-definite combination of the embeddings of u alpha
    when ell is totally positive, so k -> <ell, eta^k alpha> is convex and the
    minimum is found by walking downhill from k = 0.
    """
    K = F.field
    if not F.is_totally_positive(alpha):
        raise NotTotallyPositive("alpha must be totally positive")
    if F.degree == 1:
        v = _pairing(K, ell, alpha)
        return (v, {"k": 0}) if report else v
    eta = F.totally_positive_unit()
    eta_inv = K.inv(eta)

    def val(k):
        u = K.pow(eta, k) if k >= 0 else K.pow(eta_inv, -k)
        return _pairing(K, ell, K.mul(u, alpha))

    k = 0
    cur = val(0)
    for step in (1, -1):
        while True:
            nxt = val(k + step)
            if nxt < cur:
                k += step
                cur = nxt
            else:
                break
    return (cur, {"k": k}) if report else cur
