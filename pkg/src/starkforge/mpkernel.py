"""Multiprecision kernel: precision contexts and the special functions used downstream.

Every public function takes an explicit PrecisionCtx; nothing reads the ambient
mpmath precision.  Internally each call runs under ``mp.workprec`` with a few
guard bits and rounds its result to ``ctx.bits`` on the way out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Union

import mpmath
from mpmath import mp, mpf, mpc

from .errors import ConvergenceError, DomainError, PoleAtNonPositiveInteger

BigReal = mpmath.mpf
BigComplex = mpmath.mpc
Number = Union[int, float, Fraction, mpf, mpc, complex]

GUARD = 24


@dataclass(frozen=True)
class PrecisionCtx:
    bits: int = 128
    tail_tol: Optional[mpf] = None

    def __post_init__(self):
        if int(self.bits) != self.bits or self.bits < 64:
            raise DomainError("PrecisionCtx.bits must be an integer >= 64")
        if self.tail_tol is None:
            object.__setattr__(self, "tail_tol", mpf(2) ** (-self.bits + 16))
        else:
            t = mpf(self.tail_tol)
            if not t > 0:
                raise DomainError("tail_tol must be positive")
            object.__setattr__(self, "tail_tol", t)

    def workprec(self, extra: int = GUARD):
        return mp.workprec(self.bits + extra)

    def doubled(self) -> "PrecisionCtx":
        # tail_tol is kept so that the doubled run is judged against the original target
        return PrecisionCtx(2 * self.bits, self.tail_tol)

    def with_bits(self, bits: int) -> "PrecisionCtx":
        return PrecisionCtx(bits, None)

    @property
    def eps(self) -> mpf:
        return mpf(2) ** (-self.bits)

    def key(self) -> str:
        return "b%d-t%s" % (self.bits, mpmath.nstr(self.tail_tol, 6))


def out(x, ctx: PrecisionCtx):
    """Round to the context precision."""
    with mp.workprec(ctx.bits):
        return +x


def to_mp(x):
    if isinstance(x, Fraction):
        return mpf(x.numerator) / x.denominator
    if isinstance(x, complex):
        return mpc(x)
    if isinstance(x, (mpf, mpc)):
        return x
    return mpf(x)


def as_mpc(x):
    """mpc without rounding an existing mpf/mpc to the global precision."""
    x = to_mp(x)
    if isinstance(x, mpc):
        return x
    # mpc(x) rounds to mp.prec; widen so the mantissa survives
    with mp.workprec(max(mp.prec, x._mpf_[3])):
        return mpc(x)


def _is_real(s) -> bool:
    return not isinstance(s, mpc) or s.imag == 0


# --------------------------------------------------------------------------- gamma

_BERN_CACHE: dict = {}


def _bernoulli(k: int) -> Fraction:
    # B_k as an exact rational; mpmath returns a float-like value, so we use the
    # classical recurrence with fractions (only small k are ever needed)
    if k in _BERN_CACHE:
        return _BERN_CACHE[k]
    B = [Fraction(1)]
    for m in range(1, k + 1):
        acc = Fraction(0)
        for j in range(m):
            acc += math.comb(m + 1, j) * B[j]
        B.append(-acc / (m + 1))
    for i, b in enumerate(B):
        _BERN_CACHE[i] = b
    return _BERN_CACHE[k]


def _near_nonpositive_integer(s, tol) -> bool:
    s = to_mp(s)
    re = s.real if isinstance(s, mpc) else s
    im = s.imag if isinstance(s, mpc) else mpf(0)
    if re > mpf("0.5") or abs(im) > tol:
        return False
    n = mpmath.nint(re)
    return abs(re - n) <= tol


def _loggamma_stirling(z, bits: int):
    """log Gamma(z) for Re z >= 1/2 by argument raising and the Stirling series."""
    target = mpf(2) ** (-bits)
    # push |z| up until the optimally truncated series beats 2^-bits
    r0 = int(0.12 * bits) + 8
    shift = 0
    zz = z
    re = zz.real if isinstance(zz, mpc) else zz
    while abs(zz) < r0 or re < r0 / 2:
        zz += 1
        shift += 1
        re = zz.real if isinstance(zz, mpc) else zz
    s = (zz - mpf("0.5")) * mpmath.log(zz) - zz + mpmath.log(2 * mpmath.pi) / 2
    zpow = zz
    z2 = zz * zz
    k = 1
    prev = None
    while True:
        b = _bernoulli(2 * k)
        term = (mpf(b.numerator) / b.denominator) / (2 * k * (2 * k - 1) * zpow)
        at = abs(term)
        if prev is not None and at > prev:
            raise ConvergenceError("Stirling series diverged before reaching target")
        s += term
        if at < target * (1 + abs(s)):
            break
        prev = at
        zpow *= z2
        k += 1
    if shift:
        p = mpf(1)
        acc = mpf(0)
        for j in range(shift):
            p *= z + j
            # keep partial products small to avoid overflow for large shifts
            if abs(p) > mpf(2) ** 512:
                acc += mpmath.log(p)
                p = mpf(1)
        acc += mpmath.log(p)
        s -= acc
    return s


def loggamma(s, ctx: PrecisionCtx):
    """Principal-branch-free log Gamma (exp of it equals Gamma); Re(s) >= 1/2 only."""
    s = to_mp(s)
    with ctx.workprec():
        re = s.real if isinstance(s, mpc) else s
        if re < mpf("0.5"):
            raise DomainError("loggamma kernel requires Re(s) >= 1/2")
        return out(_loggamma_stirling(s, ctx.bits + GUARD), ctx)


def gamma(s, ctx: PrecisionCtx):
    """Gamma(s) by Stirling with argument raising, reflection for Re(s) < 1/2."""
    s = to_mp(s)
    if _near_nonpositive_integer(s, ctx.tail_tol):
        raise PoleAtNonPositiveInteger("Gamma has a pole at s=%s" % mpmath.nstr(s, 10))
    with ctx.workprec():
        bits = ctx.bits + GUARD
        re = s.real if isinstance(s, mpc) else s
        if re < mpf("0.5"):
            # reflection costs accuracy near poles; the pole test above keeps us away
            g1 = mpmath.exp(_loggamma_stirling(1 - s, bits))
            v = mpmath.pi / (mpmath.sinpi(s) * g1)
        else:
            v = mpmath.exp(_loggamma_stirling(s, bits))
        if _is_real(s) and isinstance(v, mpc):
            v = v.real
        return out(v, ctx)


# --------------------------------------------------------------- incomplete gamma

def _lower_series(s, x, bits):
    # gamma(s,x) = x^s e^-x sum x^k / (s (s+1) ... (s+k))
    target = mpf(2) ** (-bits)
    term = 1 / s
    acc = term
    k = 0
    while True:
        k += 1
        term *= x / (s + k)
        acc += term
        if abs(term) < target * abs(acc) and k > x:
            break
        if k > 100000:
            raise ConvergenceError("incomplete gamma series budget exhausted")
    return mpmath.exp(s * mpmath.log(x) - x) * acc


def _upper_cf(s, x, bits):
    # modified Lentz on the Legendre continued fraction
    target = mpf(2) ** (-bits)
    tiny = mpf(2) ** (-4 * bits)
    b = x + 1 - s
    c = 1 / tiny
    d = 1 / b
    h = d
    i = 0
    while True:
        i += 1
        an = -i * (i - s)
        b += 2
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1 / d
        delta = d * c
        h *= delta
        if abs(delta - 1) < target:
            break
        if i > 200000:
            raise ConvergenceError("incomplete gamma continued fraction budget exhausted")
    return mpmath.exp(s * mpmath.log(x) - x) * h


def _e1(x, bits):
    # Gamma(0,x) = E1(x) = -gamma - log x - sum (-x)^k/(k k!)
    if x >= 1:
        return _upper_cf(mpf(0), x, bits)
    target = mpf(2) ** (-bits)
    acc = mpf(0)
    term = mpf(1)
    k = 0
    while True:
        k += 1
        term *= -x / k
        t = term / k
        acc += t
        if abs(t) < target:
            break
    return -mpmath.euler - mpmath.log(x) - acc


def _upper_positive(s, x, bits):
    re = s.real if isinstance(s, mpc) else s
    if x >= re + 1:
        return _upper_cf(s, x, bits)
    g = mpmath.exp(_loggamma_stirling(s, bits)) if re >= mpf("0.5") else _gamma_small(s, bits)
    return g - _lower_series(s, x, bits)


def _gamma_small(s, bits):
    # Gamma for 0 < Re(s) < 1/2 via Gamma(s) = Gamma(s+1)/s
    return mpmath.exp(_loggamma_stirling(s + 1, bits)) / s


def incomplete_gamma_upper(s, x, ctx: PrecisionCtx):
    """Gamma(s, x) = int_x^inf t^(s-1) e^-t dt for x >= 0."""
    s = to_mp(s)
    x = to_mp(x)
    if isinstance(x, mpc):
        if x.imag != 0:
            raise DomainError("x must be real")
        x = x.real
    if x < 0:
        raise DomainError("x must be >= 0")
    if x == 0:
        re = s.real if isinstance(s, mpc) else s
        if re <= 0:
            raise PoleAtNonPositiveInteger("Gamma(s,0) diverges for Re(s) <= 0")
        return gamma(s, ctx)
    with ctx.workprec(GUARD + 16):
        bits = ctx.bits + GUARD + 16
        re = s.real if isinstance(s, mpc) else s
        if re > 0:
            v = _upper_positive(s, x, bits)
        else:
            # lift to Re(s+m) in (0, 1] (or exactly 0) and recurse downwards:
            # Gamma(s,x) = (Gamma(s+1,x) - x^s e^-x) / s
            m = int(mpmath.floor(-re)) + 1
            top = s + m
            if _near_nonpositive_integer(s, mpf(2) ** (-bits)):
                top = mpf(int(mpmath.nint(re))) + m - 1
                m -= 1
                v = _e1(x, bits)
                s0 = top
            else:
                v = _upper_positive(top, x, bits)
                s0 = top
            for j in range(m):
                s0 = s0 - 1
                v = (v - mpmath.exp(s0 * mpmath.log(x) - x)) / s0
        if _is_real(s) and isinstance(v, mpc):
            v = v.real
        return out(v, ctx)


# ------------------------------------------------------------------- Bessel

def bessel_k_paper(s, c, ctx: PrecisionCtx):
    """K_s(c) = int_0^inf exp(-c(t+1/t)) t^s dt/t, which is 2 K_s(2c) in the usual normalization."""
    c = to_mp(c)
    if isinstance(c, mpc):
        if c.imag != 0:
            raise DomainError("c must be real")
        c = c.real
    if not c > 0:
        raise DomainError("bessel_k_paper needs c > 0")
    s = to_mp(s)
    with ctx.workprec():
        v = 2 * mpmath.besselk(s, 2 * c)
        if _is_real(s) and isinstance(v, mpc):
            v = v.real
        return out(v, ctx)


# -------------------------------------------------------------- Hurwitz zeta

def _poch_and_deriv(s, m):
    # (s)_m = s (s+1) ... (s+m-1) and its s-derivative without dividing by s+i
    p = mpf(1)
    dp = mpf(0)
    for i in range(m):
        dp = dp * (s + i) + p
        p = p * (s + i)
    return p, dp


def hurwitz_zeta(s, a, ctx: PrecisionCtx, derivative: int = 0):
    """zeta(s, a) = sum_{k>=0} (a+k)^-s for real a > 0, continued by Euler-Maclaurin.

    derivative=1 returns d/ds.  Raises PoleAtNonPositiveInteger-free DomainError at s=1.
    """
    s = to_mp(s)
    a = to_mp(a)
    if isinstance(a, mpc):
        a = a.real
    if not a > 0:
        raise DomainError("hurwitz_zeta needs a > 0")
    if derivative not in (0, 1):
        raise DomainError("only derivative 0 or 1")
    sre = s.real if isinstance(s, mpc) else s
    # for Re(s) < 0 the partial sums cancel heavily; pay for it in guard bits
    extra = GUARD + (int(-sre * math.log2(float(a) + 0.12 * ctx.bits + 20)) + 8 if sre < 0 else 0)
    with ctx.workprec(extra):
        if abs(s - 1) < ctx.tail_tol:
            raise DomainError("hurwitz_zeta has a pole at s=1")
        bits = ctx.bits + extra
        target = mpf(2) ** (-bits)
        N = int(0.12 * bits + abs(s) + 10)
        A = a + N
        acc = mpf(0)
        for k in range(N):
            t = a + k
            p = t ** (-s)
            acc += p if derivative == 0 else -mpmath.log(t) * p
        lA = mpmath.log(A)
        As = A ** (-s)
        if derivative == 0:
            acc += A * As / (s - 1) + As / 2
        else:
            acc += -lA * A * As / (s - 1) - A * As / (s - 1) ** 2 - lA * As / 2
        j = 1
        Apow = As / A  # A^(-s-1)
        prev = None
        while True:
            b = _bernoulli(2 * j)
            bq = mpf(b.numerator) / (b.denominator * mpmath.factorial(2 * j))
            p, dp = _poch_and_deriv(s, 2 * j - 1)
            if derivative == 0:
                term = bq * p * Apow
            else:
                term = bq * (dp - lA * p) * Apow
            at = abs(term)
            acc += term
            # relative stop: values like zeta(40, 83) ~ 83^-40 are far below 1
            if at < target * (abs(acc) + abs(As)):
                break
            if prev is not None and at > prev and j > 3:
                raise ConvergenceError("Euler-Maclaurin tail diverged; raise precision")
            prev = at
            Apow /= A * A
            j += 1
        if _is_real(s) and isinstance(acc, mpc):
            acc = acc.real
        return out(acc, ctx)


def riemann_zeta(s, ctx: PrecisionCtx):
    return hurwitz_zeta(s, 1, ctx)


# --------------------------------------------------------- Dirichlet series

@dataclass
class CoefficientStream:
    """Coefficients c(1), c(2), ... of a Dirichlet series.

    ``period`` marks streams with c(n) depending only on n mod period; those are
    summed exactly through Hurwitz zeta.  ``abscissa`` is the abscissa of absolute
    convergence (Re s must exceed it).
    """
    coeff: Callable[[int], Number]
    period: Optional[int] = None
    abscissa: float = 1.0
    name: str = ""

    @staticmethod
    def zero():
        return CoefficientStream(lambda n: 0, period=1, abscissa=-math.inf, name="zero")

    @staticmethod
    def ones():
        return CoefficientStream(lambda n: 1, period=1, abscissa=1.0, name="zeta")


@dataclass(frozen=True)
class PowerTailBound:
    """|c(n)| <= C n^a, hence sum_{n>N} |c(n)| n^-sigma <= C N^(a+1-sigma)/(sigma-a-1)."""
    C: float = 1.0
    a: float = 0.0

    def tail(self, N: int, sigma) -> mpf:
        e = mpf(self.a) + 1 - sigma
        if e >= 0:
            return mpmath.inf
        return mpf(self.C) * mpf(N) ** e / (-e)

    def cutoff(self, sigma, tol) -> int:
        e = mpf(self.a) + 1 - sigma
        if e >= 0:
            raise ConvergenceError("tail bound does not decay at this sigma")
        # C N^e / (-e) <= tol
        n = (tol * (-e) / mpf(self.C)) ** (1 / e)
        return int(mpmath.ceil(n))


@dataclass
class SumReport:
    value: object
    terms: int
    tail: object
    method: str


MAX_TERMS = 2_000_000


def dirichlet_sum(coeffs: CoefficientStream, s, tail_bound: Optional[PowerTailBound], ctx: PrecisionCtx,
                  max_terms: int = MAX_TERMS, report: bool = False):
    """sum_{n>=1} c(n) n^-s with absolute error <= ctx.tail_tol."""
    s = to_mp(s)
    sigma = s.real if isinstance(s, mpc) else s
    if not sigma > coeffs.abscissa:
        raise DomainError("Re(s) outside the convergence half-plane of the stream")
    with ctx.workprec():
        if coeffs.name == "zero":
            res = SumReport(mpf(0), 0, mpf(0), "zero")
        elif coeffs.period is not None:
            q = coeffs.period
            acc = mpf(0)
            for r in range(1, q + 1):
                c = coeffs.coeff(r)
                if c:
                    acc += to_mp(c) * hurwitz_zeta(s, mpf(r) / q, ctx.with_bits(ctx.bits + GUARD))
            acc *= mpf(q) ** (-s)
            res = SumReport(acc, q, mpf(0), "hurwitz-periodic")
        else:
            if tail_bound is None:
                raise ConvergenceError("a tail bound is required for non-periodic streams")
            N = tail_bound.cutoff(sigma, ctx.tail_tol / 2)
            if N > max_terms:
                raise ConvergenceError("tail bound needs %d terms (budget %d)" % (N, max_terms))
            acc = mpf(0)
            for n in range(1, N + 1):
                c = coeffs.coeff(n)
                if c:
                    acc += to_mp(c) * mpf(n) ** (-s)
            res = SumReport(acc, N, tail_bound.tail(N, sigma), "direct")
        v = res.value
        if _is_real(s) and isinstance(v, mpc):
            v = v.real
        res.value = out(v, ctx)
    return res if report else res.value
