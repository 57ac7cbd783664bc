"""Dedekind eta, Siegel functions and the diagonal theta product on CM lattices.

The one-variable theta is phi(w, z) = (q_z - 1) prod_{n>=1} (1 - q^n q_z)(1 - q^n / q_z),
q = e(w), q_z = e(z).  Its z-derivative at 0 is 2 pi i prod (1 - q^n)^2, so
|q^{1/12} phi'(w, 0)| = 2 pi |eta(w)|^2.  The theta null of a CM point is the
product of these one-variable values over the embeddings.
"""
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import mpmath
from mpmath import mp, mpc, mpf

from .errors import DomainError, LatticePointError
from .mpkernel import PrecisionCtx, out, to_mp

__all__ = ["ThetaParams", "dedekind_eta", "siegel_g", "bernoulli2", "phi", "phi_prime0",
           "product_theta", "eta_K_theta_null", "theta_ratio", "ratio_law",
           "multiplier_check", "h_from_theta_null", "LatticeProximityWarning"]


class LatticeProximityWarning(UserWarning):
    pass


def _mpc(w):
    w = to_mp(w)
    return w if isinstance(w, mpc) else mpc(w)


def _check_h(w):
    if not w.imag > 0:
        raise DomainError("point must lie in the upper half plane, got Im w = %s" % mpmath.nstr(w.imag, 8))


# --------------------------------------------------------------- eta

def _eta_qseries(w, bits):
    """q^{1/24} prod (1 - q^n), summed until |q|^n < 2^-bits."""
    q = mpmath.expjpi(2 * w)
    aq = abs(q)
    eps = mpf(2) ** (-bits - 8)
    p = mpc(1)
    qn = q
    while abs(qn) > eps:
        p *= 1 - qn
        qn *= q
    return mpmath.expjpi(w / 12) * p


def dedekind_eta(w, ctx: PrecisionCtx):
    """Dedekind eta with SL2(Z) reduction to the standard fundamental domain first."""
    bits = ctx.bits + 24
    with mp.workprec(bits):
        w = _mpc(w)
        _check_h(w)
        # eta(w) = factor * eta(w_reduced)
        factor = mpc(1)
        for _ in range(10000):
            k = int(mpmath.nint(w.real))
            if k:
                w = w - k
                factor *= mpmath.expjpi(mpf(k) / 12)
            if abs(w) < 1 - mpf(2) ** (-bits // 2):
                # eta(w) = eta(-1/w) / sqrt(-i w)
                factor /= mpmath.sqrt(-1j * w)
                w = -1 / w
            else:
                break
        val = factor * _eta_qseries(w, bits)
        return out(val, ctx)


# --------------------------------------------------------------- Siegel

def bernoulli2(u):
    """B_2(u) = u^2 - u + 1/6; exact for Fractions and ints."""
    if isinstance(u, (int, Fraction)):
        u = Fraction(u)
        return u * u - u + Fraction(1, 6)
    return u * u - u + mpf(1) / 6


def _theta_tail(q, qz, bits):
    """prod_{n>=1} (1 - q^n q_z)(1 - q^n / q_z)."""
    eps = mpf(2) ** (-bits - 8)
    big = max(abs(qz), 1 / abs(qz))
    p = mpc(1)
    qn = q
    while abs(qn) * big > eps:
        p *= (1 - qn * qz) * (1 - qn / qz)
        qn *= q
    return p


def siegel_g(u, v, w, ctx: PrecisionCtx):
    """g_{u,v}(w) = -q^{B2(u)/2} e^{pi i v (u - 1)} (1 - q_z) prod (1 - q^n q_z)(1 - q^n / q_z), z = u w + v.

    With this ordering |g_{-v,u}(w)| = |q^{B2(-v)/2}| |phi(w, u - v w)|.
    """
    bits = ctx.bits + 24
    with mp.workprec(bits):
        um, vm = to_mp(u), to_mp(v)
        if mpmath.isint(um) and mpmath.isint(vm):
            raise LatticePointError("(u, v) is a lattice point")
        w = _mpc(w)
        _check_h(w)
        q = mpmath.expjpi(2 * w)
        z = um * w + vm
        qz = mpmath.expjpi(2 * z)
        pref = -mpmath.expjpi(w * bernoulli2(um)) * mpmath.expjpi(vm * (um - 1))
        val = pref * (1 - qz) * _theta_tail(q, qz, bits)
        return out(val, ctx)


# --------------------------------------------------------------- theta product

@dataclass
class ThetaParams:
    w: Sequence
    z: Sequence
    lattice: Optional[object] = None
    deltas: Sequence[int] = field(default_factory=list)

    def __post_init__(self):
        self.w = [_mpc(x) for x in self.w]
        self.z = [_mpc(x) for x in self.z]
        if len(self.w) != len(self.z):
            raise DomainError("w and z must have the same length")
        for x in self.w:
            _check_h(x)
        for a, b in zip(self.deltas, self.deltas[1:]):
            if b % a:
                raise DomainError("elementary divisors must form a divisor chain")


def _near_lattice(w, z, bits):
    """True when z is within 2^(-bits/2) of Z + Z w."""
    n = mpmath.nint(z.imag / w.imag)
    r = z - n * w
    r = r - mpmath.nint(r.real)
    return abs(r) < mpf(2) ** (-(bits // 2))


def phi(w, z, ctx: PrecisionCtx):
    """One-variable theta; exactly 0 on (and very near) the lattice Z + Z w."""
    bits = ctx.bits + 24
    with mp.workprec(bits):
        w, z = _mpc(w), _mpc(z)
        _check_h(w)
        if _near_lattice(w, z, ctx.bits):
            if z != 0:
                warnings.warn("z within 2^(-bits/2) of a lattice point; returning 0",
                              LatticeProximityWarning, stacklevel=2)
            return mpc(0)
        q = mpmath.expjpi(2 * w)
        qz = mpmath.expjpi(2 * z)
        val = (qz - 1) * _theta_tail(q, qz, bits)
        return out(val, ctx)


def phi_prime0(w, ctx: PrecisionCtx):
    """d/dz phi(w, z) at z = 0, i.e. 2 pi i prod (1 - q^n)^2, from the q-product."""
    bits = ctx.bits + 24
    with mp.workprec(bits):
        w = _mpc(w)
        _check_h(w)
        q = mpmath.expjpi(2 * w)
        eps = mpf(2) ** (-bits - 8)
        p = mpc(1)
        qn = q
        while abs(qn) > eps:
            p *= (1 - qn) ** 2
            qn *= q
        return out(2j * mpmath.pi * p, ctx)


def product_theta(p: ThetaParams, ctx: PrecisionCtx):
    val = mpc(1)
    with mp.workprec(ctx.bits + 24):
        for wi, zi in zip(p.w, p.z):
            f = phi(wi, zi, ctx.with_bits(ctx.bits + 16))
            if f == 0:
                return mpc(0)
            val *= f
    return out(val, ctx)


def eta_K_theta_null(w, a_ideal=None, ctx: PrecisionCtx = None):
    """|eta_K(w; a)|^2 = prod_i |q_i^{1/12} phi'(w_i, 0)| = prod_i 2 pi |eta(w_i)|^2.

    The mixed partial of the product theta at z = 0 factors, so each embedding
    contributes its own derivative.  `a_ideal` only labels the lattice.
    """
    ctx = ctx or PrecisionCtx()
    if isinstance(w, (mpc, complex, mpf, int, float)):
        w = [w]
    inner = ctx.with_bits(ctx.bits + 16)
    with mp.workprec(ctx.bits + 24):
        val = mpf(1)
        for wi in w:
            wi = _mpc(wi)
            val *= abs(mpmath.expjpi(wi / 6)) * abs(phi_prime0(wi, inner))
        return out(val, ctx)


def h_from_theta_null(theta_null, n: int, ctx: PrecisionCtx):
    """Invert the n = 1 calibration log|eta_K|^2 = n log(2 pi) - h / 2."""
    with mp.workprec(ctx.bits + 24):
        return out(2 * (n * mpmath.log(2 * mpmath.pi) - mpmath.log(to_mp(theta_null))), ctx)


def theta_ratio(w, eps, ctx: PrecisionCtx):
    """prod |q_i^{1/12} phi(w_i, eps)| / (|eta_K|^2 eps^n)."""
    with mp.workprec(ctx.bits + 24):
        eps = to_mp(eps)
        num = mpf(1)
        for wi in w:
            wi = _mpc(wi)
            num *= abs(mpmath.expjpi(wi / 6)) * abs(phi(wi, eps, ctx))
        den = eta_K_theta_null(w, None, ctx) * eps ** len(w)
        return out(num / den, ctx)


def ratio_law(w, ctx: PrecisionCtx, eps_list=(mpf("1e-2"), mpf("1e-3"), mpf("1e-4"))):
    """Richardson extrapolation of theta_ratio to eps -> 0.

    The ratio is even in eps up to O(eps) terms from the q-product, so a
    polynomial in eps through the samples is evaluated at 0.
    """
    with mp.workprec(ctx.bits + 24):
        xs = [to_mp(e) for e in eps_list]
        ys = [theta_ratio(w, e, ctx) for e in xs]
        # Neville at x = 0
        P = list(ys)
        m = len(xs)
        for k in range(1, m):
            for i in range(m - k):
                P[i] = (xs[i + k] * P[i] - xs[i] * P[i + 1]) / (xs[i + k] - xs[i])
        return out(P[0], ctx), {"eps": [mpmath.nstr(e, 3) for e in xs],
                                "ratios": [mpmath.nstr(y, 20) for y in ys]}


def multiplier_check(w, z, alpha_emb, ctx: PrecisionCtx):
    """Both sides of |phi(w, z + alpha w)| = |q_z^{-alpha}| |phi(w, z)| per embedding.

    `alpha_emb` lists the real embeddings of alpha.  Returns (lhs, rhs, rhs_full),
    where rhs_full carries the extra |q_w^{-alpha(alpha-1)/2}| present for
    rational integers alpha outside {0, 1}.
    """
    with mp.workprec(ctx.bits + 24):
        lhs = mpf(1)
        rhs = mpf(1)
        full = mpf(1)
        for wi, zi, a in zip(w, z, alpha_emb):
            wi, zi, a = _mpc(wi), _mpc(zi), to_mp(a)
            lhs *= abs(phi(wi, zi + a * wi, ctx))
            base = abs(mpmath.expjpi(-2 * a * zi)) * abs(phi(wi, zi, ctx))
            rhs *= base
            full *= base * abs(mpmath.expjpi(-a * (a - 1) * wi))
        return out(lhs, ctx), out(rhs, ctx), out(full, ctx)
