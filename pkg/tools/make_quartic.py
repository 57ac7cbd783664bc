"""Generate the golden field files shipped in src/starkforge/data.

    python tools/make_quartic.py [--out DIR]

Writes qi.yaml (K = Q(i)) and quartic.yaml (a non-Galois quartic CM field
K = F(sqrt(-mu)) over F = Q(sqrt 5) with 2 <= h_K <= 4).  Needs sympy for the
integral basis and prime decomposition; the package itself does not.
"""
import argparse
import math
import os
import sys
from fractions import Fraction

from mpmath import mpc
from sympy import Poly, symbols
from sympy.polys.numberfields.basis import round_two
from sympy.polys.numberfields.primes import prime_decomp

from starkforge.fieldsdata import (CMField, build_imag_quadratic, build_quadratic_real,
                                   class_group_by_closure, cm_place_groups, compute_unit_index,
                                   dump_field, primes_upto, roots_of_unity)
from starkforge.numfield import Ideal, NumberField

x = symbols("x")


def _is_square(n):
    return n >= 0 and math.isqrt(n) ** 2 == n


def quartic_candidate(F, a, b):
    """K = F(sqrt(-mu)), mu = a + b*w, or None when K is Galois or mu is not totally positive."""
    s5 = math.sqrt(5)
    if a + b * (1 + s5) / 2 <= 0 or a + b * (1 - s5) / 2 <= 0 or b == 0:
        return None
    tr, nm = 2 * a + b, a * a + a * b - b * b
    if _is_square(nm) or (nm % 5 == 0 and _is_square(nm // 5)):
        return None
    T = Poly(x ** 4 + tr * x ** 2 + nm, x)
    if not T.is_irreducible:
        return None
    ZK, dK = round_two(T)
    M = ZK.matrix.to_Matrix()
    den = int(ZK.denom)
    basis = [[Fraction(int(M[i, j]), den) for i in range(4)] for j in range(4)]
    poly = [nm, 0, tr, 0, 1]
    mu1 = a + b * (1 + s5) / 2
    mu2 = a + b * (1 - s5) / 2
    hint = [mpc(0, math.sqrt(mu1)), mpc(0, math.sqrt(mu2)), mpc(0, -math.sqrt(mu1)), mpc(0, -math.sqrt(mu2))]
    K = NumberField(poly, basis, root_hint=hint, name="Q(sqrt5)(sqrt(-(%d+%dw)))" % (a, b))
    disc = K.discriminant()
    rts = K.roots(160)
    K.set_unit_windows(cm_place_groups(K, [0, 1], rts), 1,
                       math.log(abs(float(F.embed(F.fundamental_unit, 96)[0]))))
    return K, T, ZK, dK, disc


def sympy_primes(K, T, ZK, dK, bound):
    out = []
    for p in primes_upto(int(bound)):
        for P in prime_decomp(p, T, ZK=ZK, dK=dK):
            al = P.alpha
            c = [Fraction(int(v), int(al.denom)) for v in al.coeffs] + [Fraction(0)] * 4
            alpha = K.from_power(c[:4])
            I = Ideal.from_elements(K, [K.rational(p), alpha])
            assert I.norm() == p ** P.f, (I.norm(), p, P.f)
            out.append(I)
    return out


def build_quartic(max_coef=12):
    F = build_quadratic_real(5)
    found = []
    for a in range(1, max_coef):
        for b in range(-max_coef, max_coef):
            c = quartic_candidate(F, a, b)
            if c is None:
                continue
            found.append((abs(c[4]), a, b, c))
    found.sort(key=lambda t: t[0])
    seen = set()
    for absd, a, b, (K, T, ZK, dK, disc) in found:
        # unit multiples of mu give the same field; keep one candidate per discriminant
        if disc in seen:
            continue
        seen.add(disc)
        bound = 0.1519 * math.sqrt(absd)
        try:
            primes = sympy_primes(K, T, ZK, dK, bound)
        except AssertionError:
            # sympy's prime decomposition occasionally trips on an index divisor
            continue
        cg = class_group_by_closure(K, primes)
        print("mu = %d + %d w: D_K = %d, h_K = %d" % (a, b, disc, cg.order), file=sys.stderr)
        if 2 <= cg.order <= 4:
            cm = CMField(F, K, (Fraction(-a), Fraction(-b)), [0, 1], disc, 2, cg, primes=primes,
                         name="Q(sqrt5)(sqrt(-(%d+%dw)))" % (a, b))
            cm.w = len(roots_of_unity(cm))
            cm.unit_index = compute_unit_index(cm)
            cm.reflex = {"polynomial": [5 * b * b, 0, 2 * (2 * a + b), 0, 1],
                         "note": "minimal polynomial of the CM-type trace theta_1 + theta_2"}
            return cm
    raise SystemExit("no suitable quartic field in range")


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "src", "starkforge", "data"))
    args = ap.parse_args(argv)
    os.makedirs(args.out, exist_ok=True)
    qi = build_imag_quadratic(1)
    qi.name = "Q(i)"
    dump_field(qi, os.path.join(args.out, "qi.yaml"))
    cm = build_quartic()
    dump_field(cm, os.path.join(args.out, "quartic.yaml"))
    print("wrote", cm.name, "h_K =", cm.h, "D_K =", cm.disc)


if __name__ == "__main__":
    main()
