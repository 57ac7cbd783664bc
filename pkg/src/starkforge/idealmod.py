"""Ideals of a CM field K viewed as O_F-modules.

A K-ideal a is written as b*omega1 + O_F*omega2 with b an F-ideal; the CM point
is w = omega1/omega2 read through the CM type.  Also: type ideals for a
polarization element zeta, real/imaginary classification, Kahler coordinates
and the upper-triangular matrix representatives of norm alpha.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
from mpmath import mp, mpf, mpc

from . import lattice
from .errors import (ConsistencyError, DegenerateIdeal, InvalidPolarization, MissingReflexData,
                     NotIntegral, NotTotallyPositive, UnsupportedDegree)
from .fieldsdata import CMField, IdealHandle, TotallyRealField, factorint, primes_upto
from .numfield import Elt, Ideal, NumberField, principal_generator, quadratic_primes_above

__all__ = ["IdealHandle", "ModulePresentation", "KahlerCoords", "IdealKind", "present_as_of_module",
           "classify_ideal", "type_ideal", "choose_polarization", "kahler_coords",
           "enumerate_matrix_reps", "verify_classgroup_generation", "codifferent",
           "relative_different", "contract", "handle"]


class IdealKind(str, Enum):
    REAL = "Real"
    IMAGINARY = "Imaginary"
    MIXED = "Mixed"


def _ideal(a) -> Ideal:
    return a.ideal if isinstance(a, IdealHandle) else a


def handle(K, I: Ideal) -> IdealHandle:
    """Wrap an ideal of K (CMField) or F (TotallyRealField) with its class label."""
    return IdealHandle(I, K.class_group.label(I))


# ------------------------------------------------------------ basic ideals

def codifferent(field: NumberField) -> Ideal:
    """Trace dual of O."""
    d = field.degree
    B = field.basis_elts()
    G = [[field.trace(field.mul(B[i], B[j])) for j in range(d)] for i in range(d)]
    Ginv = lattice.inverse_frac(G)
    return Ideal.from_z_basis(field, [tuple(Ginv[i][j] for j in range(d)) for i in range(d)])


def relative_different(K: CMField) -> Ideal:
    dK = codifferent(K.field).inverse()
    dF = codifferent(K.base.field).inverse()
    return dK / K.F_ideal_to_K(dF)


def _split_rel(K: CMField, elts: Sequence[Elt]):
    """HNF split of a Z-module in K along x = a + b*theta.

    Returns (kernel, proj): kernel is a Z-basis (as F elements) of the part with
    b = 0, proj the list of (b-part, K element) pairs whose b-parts form a Z-basis
    of the projection.
    """
    F = K.base.field
    rel = [K.rel_coords(x) for x in elts]
    den = 1
    for _, b in rel:
        for c in b:
            den = den * c.denominator // math.gcd(den, c.denominator)
    Bint = [[int(c * den) for c in b] for _, b in rel]
    H, U = lattice.hnf_with_transform(Bint)
    kern, proj = [], []
    for i, row in enumerate(H):
        x = K.field.zero()
        for j, u in enumerate(U[i]):
            if u:
                x = K.field.add(x, K.field.scale(u, elts[j]))
        if any(row):
            proj.append((tuple(Fraction(v, den) for v in row), x))
        else:
            a, b = K.rel_coords(x)
            assert not any(b)
            kern.append(a)
    return kern, proj


def contract(K: CMField, J: Ideal) -> Ideal:
    """J intersected with F, as an F-ideal."""
    kern, _ = _split_rel(K, J.z_basis())
    return Ideal.from_z_basis(K.base.field, kern)


def _first_nonzero_positive(x: Elt) -> bool:
    for c in x:
        if c:
            return c > 0
    return True


# ------------------------------------------------------ module presentation

@dataclass
class ModulePresentation:
    K: CMField
    b_ideal: Ideal
    omega1: Elt
    omega2: Elt

    def cm_point(self, bits: int = 128) -> List[mpc]:
        with mp.workprec(bits + 16):
            e1 = self.K.cm_embed(self.omega1, bits + 16)
            e2 = self.K.cm_embed(self.omega2, bits + 16)
            return [a / b for a, b in zip(e1, e2)]

    w = cm_point

    def lattice(self) -> Ideal:
        """Reassemble b*omega1 + O_F*omega2 as a K-ideal."""
        K = self.K
        KF = K.field
        vecs = [KF.mul(K.F_to_K(b), self.omega1) for b in self.b_ideal.z_basis()]
        vecs += [KF.mul(K.F_to_K(f), self.omega2) for f in K.base.field.basis_elts()]
        return Ideal.from_z_basis(KF, vecs)

    def verify(self, a) -> None:
        if self.lattice() != _ideal(a):
            raise ConsistencyError("module presentation does not reassemble to the ideal")

    def to_dict(self) -> dict:
        return {"b_ideal": self.b_ideal.to_dict(), "omega1": [str(c) for c in self.omega1],
                "omega2": [str(c) for c in self.omega2]}


def _im_signs(K: CMField, om1: Elt, om2: Elt, bits=96) -> List[int]:
    w = ModulePresentation(K, None, om1, om2).cm_point(bits)
    return [1 if z.imag > 0 else -1 for z in w]


def _sign_fixer(F: TotallyRealField, want: Sequence[int]) -> Optional[Elt]:
    """A unit of F with the given sign pattern, if one exists."""
    return F.unit_sign_patterns().get(tuple(want))


def _reduce(K: CMField, om1: Elt, om2: Elt, bits=96, max_iter=60) -> Tuple[Elt, Elt]:
    """Move w = om1/om2 towards a fundamental domain with SL_2(O_F) moves.

    Moves: w -> w + beta, w -> -1/w, w -> eps^2 w.  Each changes (om1, om2) by
    a matrix in SL_2(O_F), so the module O_F om1 + O_F om2 is unchanged.
    """
    Ff = K.base.field
    KF = K.field
    n = K.n
    basis = Ff.basis_elts()
    with mp.workprec(bits):
        E = [Ff.embed_real(b, bits) for b in basis]     # E[j][i] = sigma_i(basis_j)
        if n == 2:
            eps = K.base.fundamental_unit
            le = mpmath.log(abs(Ff.embed_real(eps, bits)[0]))
            eps_inv = Ff.inv(eps)
        for _ in range(max_iter):
            w = ModulePresentation(K, None, om1, om2).cm_point(bits)
            if n == 2:
                # balance the imaginary parts with eps^2 (totally positive)
                k = int(mpmath.nint(-mpmath.log(w[0].imag / w[1].imag) / (4 * le)))
                if k:
                    u = Ff.pow(eps if k > 0 else eps_inv, abs(k))
                    ui = Ff.inv(u)
                    om1 = KF.mul(K.F_to_K(u), om1)
                    om2 = KF.mul(K.F_to_K(ui), om2)
                    w = ModulePresentation(K, None, om1, om2).cm_point(bits)
            # translation: beta in O_F closest to -Re(w) embeddingwise
            x = [z.real for z in w]
            M = mpmath.matrix([[E[j][i] for j in range(n)] for i in range(n)])
            c = mpmath.lu_solve(M, mpmath.matrix([-v for v in x]))
            best = None
            for off in itertools.product((0, 1), repeat=n):
                cc = [int(mpmath.floor(c[j])) + off[j] for j in range(n)]
                val = mpmath.fsum((x[i] + sum(cc[j] * E[j][i] for j in range(n))) ** 2 for i in range(n))
                if best is None or val < best[0]:
                    best = (val, cc)
            cc = best[1]
            if any(cc):
                beta = tuple(Fraction(v) for v in cc)
                om1 = KF.add(om1, KF.mul(K.F_to_K(beta), om2))
                w = ModulePresentation(K, None, om1, om2).cm_point(bits)
            nrm = mpmath.fprod(abs(z) for z in w)
            if nrm < 1 - mpf(2) ** (-bits // 2):
                om1, om2 = KF.neg(om2), om1
                continue
            break
    return om1, om2


def present_as_of_module(a, K: CMField, reduce: bool = True) -> ModulePresentation:
    """a = b*omega1 + O_F*omega2 with Im(w^sigma_i) > 0 for the CM type.

    omega2 generates a intersected with F, omega1 lifts a generator of the
    projection onto the theta coordinate.  With reduce=True the pair is moved by
    SL_2(O_F) towards the standard fundamental domain (smaller Fourier tails).
    """
    I = _ideal(a)
    Fd = K.base
    Ff = Fd.field
    KF = K.field
    kern, proj = _split_rel(K, I.z_basis())
    g_ideal = Ideal.from_z_basis(Ff, kern)
    p_ideal = Ideal.from_z_basis(Ff, [b for b, _ in proj])
    g = principal_generator(g_ideal)
    beta = principal_generator(p_ideal)
    if g is None or beta is None:
        raise UnsupportedDegree("module presentation needs principal F-ideals (h_F = 1 here)")
    # lift beta: beta = sum c_i * projrow_i with integer c_i
    rows = [b for b, _ in proj]
    c = lattice.solve_frac([[rows[i][k] for i in range(len(rows))] for k in range(len(rows))], list(beta))
    if any(v.denominator != 1 for v in c):
        raise ConsistencyError("projection generator is not in the projected lattice")
    x0 = KF.zero()
    for ci, (_, x) in zip(c, proj):
        x0 = KF.add(x0, KF.scale(ci, x))
    om2 = K.F_to_K(g)
    if not _first_nonzero_positive(om2):
        om2 = KF.neg(om2)
    om1 = x0
    if not any(K.rel_coords(KF.div(om1, om2))[1]):
        raise DegenerateIdeal("omega1/omega2 lies in F")
    b_ideal = Ideal.unit(Ff)
    sg = _im_signs(K, om1, om2)
    if any(s < 0 for s in sg):
        u = _sign_fixer(Fd, sg)
        if u is not None:
            om1 = KF.mul(K.F_to_K(u), om1)
        else:
            # no unit of that sign pattern: rescale b by a principal ideal instead
            lam = _element_with_signs(Fd, sg)
            om1 = KF.mul(K.F_to_K(lam), om1)
            b_ideal = Ideal.principal(Ff, Ff.inv(lam))
    if reduce and b_ideal == Ideal.unit(Ff):
        om1, om2 = _reduce(K, om1, om2)
        if not _first_nonzero_positive(om2):
            om1, om2 = KF.neg(om1), KF.neg(om2)
    pres = ModulePresentation(K, b_ideal, om1, om2)
    pres.verify(I)
    if any(z.imag <= 0 for z in pres.cm_point(96)):
        raise ConsistencyError("CM point normalization failed")
    return pres


def _element_with_signs(F: TotallyRealField, want: Sequence[int]) -> Elt:
    Ff = F.field
    for r in range(1, 20):
        for c in itertools.product(range(-r, r + 1), repeat=Ff.degree):
            x = tuple(Fraction(v) for v in c)
            if any(x) and tuple(1 if v > 0 else -1 for v in Ff.embed_real(x, 96)) == tuple(want):
                if all(v != 0 for v in Ff.embed_real(x, 96)):
                    return x
    raise ConsistencyError("no element with sign pattern %s" % (want,))


# ----------------------------------------------------------- classification

def _needs_reflex(K: CMField):
    if K.n > 1 and K.reflex is None:
        raise MissingReflexData("imaginary-ideal test needs reflex data for n > 1")


def _totally_positive_generator(F: TotallyRealField, c: Ideal) -> Optional[Elt]:
    g = principal_generator(c)
    if g is None:
        return None
    sg = tuple(1 if v > 0 else -1 for v in F.field.embed_real(g, 96))
    u = F.unit_sign_patterns().get(sg)
    if u is None:
        return None
    return F.field.mul(g, u)


def classify_ideal(a, K: CMField) -> IdealKind:
    I = _ideal(a)
    if I.conj() == I:
        return IdealKind.REAL
    _needs_reflex(K)
    J = I * I.conj()
    c = contract(K, J)
    if K.F_ideal_to_K(c) != J:
        return IdealKind.MIXED
    if _totally_positive_generator(K.base, c) is None:
        return IdealKind.MIXED
    return IdealKind.IMAGINARY


# --------------------------------------------------------- polarizations

def _check_zeta(K: CMField, zeta: Elt):
    if K.conj(zeta) != K.field.neg(zeta) or not any(zeta):
        raise InvalidPolarization("zeta must satisfy zeta^rho = -zeta")
    if any(z.imag <= 0 for z in K.cm_embed(zeta, 96)):
        raise InvalidPolarization("zeta must have positive imaginary part at every CM-type embedding")


def choose_polarization(K: CMField, box: int = 3) -> Elt:
    """Smallest valid zeta in (1/2) codifferent(K), searched in a coordinate box.

    Candidates are purely imaginary elements of that lattice; they are ordered by
    T2 size, then coordinates, so the choice is deterministic.
    """
    KF = K.field
    L = codifferent(KF).scale(KF.rational(Fraction(1, 2)))
    kern, proj = _split_rel(K, [KF.mul(x, K.theta) for x in L.z_basis()])
    # elements x*theta with x in L have b-part = a-part of x; we want x purely imaginary,
    # i.e. x*theta in F: those are the kernel rows, x = k / theta
    tinv = KF.inv(K.theta)
    imag_basis = [KF.mul(K.F_to_K(k), tinv) for k in kern]
    best = None
    for c in itertools.product(range(-box, box + 1), repeat=len(imag_basis)):
        if not any(c):
            continue
        z = KF.zero()
        for ci, b in zip(c, imag_basis):
            if ci:
                z = KF.add(z, KF.scale(ci, b))
        emb = K.cm_embed(z, 96)
        if any(e.imag <= 0 for e in emb):
            continue
        key = (float(sum(abs(e) ** 2 for e in emb)), tuple(z))
        if best is None or key < best[0]:
            best = (key, z)
    if best is None:
        raise InvalidPolarization("no polarization element in the search box")
    return best[1]


def type_ideal(a, zeta: Elt, K: CMField) -> IdealHandle:
    """F-ideal with extension zeta * d_{K/F} * a * a^rho, labelled in Cl(F)."""
    _check_zeta(K, zeta)
    I = _ideal(a)
    J = relative_different(K) * I * I.conj()
    J = J.scale(zeta)
    c = contract(K, J)
    if K.F_ideal_to_K(c) != J:
        raise ConsistencyError("zeta d_{K/F} a a^rho is not extended from F")
    return handle(K.base, c)


# --------------------------------------------------------- Kahler coordinates

@dataclass
class KahlerCoords:
    t: list
    s: List[mpc]
    convention: str = "index"


def kahler_coords(a, w: Sequence, F: Optional[TotallyRealField] = None, convention: str = "index",
                  bits: int = 128) -> KahlerCoords:
    """Elementary divisors t of a inside O_F and s_j = t_j x_j / y_j + i t_j.

    convention "index": prod t_j = N(a) (the Smith identity).
    convention "index_over_disc": t_j / D_F^(1/n), so prod t_j = N(a)/D_F.
    """
    I = _ideal(a)
    if not I.is_integral():
        raise NotIntegral("Kahler coordinates need an integral ideal of O_F")
    n = I.field.degree
    t = [Fraction(v) for v in lattice.smith_invariants(I.rows)]
    with mp.workprec(bits + 16):
        if convention == "index":
            tt = t
        elif convention == "index_over_disc":
            if F is None:
                raise ValueError("index_over_disc needs the field (for D_F)")
            scale = mpf(F.disc) ** (mpf(1) / n)
            tt = [mpf(v.numerator) / v.denominator / scale for v in t]
        else:
            raise ValueError("unknown convention %r" % convention)
        s = []
        for tj, wj in zip(tt, w):
            tj_ = mpf(tj.numerator) / tj.denominator if isinstance(tj, Fraction) else tj
            wj = mpc(wj)
            s.append(mpc(tj_ * wj.real / wj.imag, tj_))
    return KahlerCoords(tt, s, convention)


# -------------------------------------------------- matrix representatives

def _residues(I: Ideal) -> List[Elt]:
    """Complete residue system O/I for an integral ideal in HNF."""
    diag = [I.rows[i][i] for i in range(len(I.rows))]
    return [tuple(Fraction(v) for v in c) for c in itertools.product(*[range(d) for d in diag])]


def _divisor_ideals(F: TotallyRealField, alpha: Elt) -> List[Ideal]:
    Ff = F.field
    A = Ideal.principal(Ff, alpha)
    N = abs(Ff.norm(alpha))
    if N.denominator != 1:
        raise NotTotallyPositive("alpha must be integral")
    N = int(N)
    if Ff.degree == 1:
        return [Ideal.principal(Ff, Ff.rational(d)) for d in range(1, N + 1) if N % d == 0]
    if Ff.degree != 2:
        raise UnsupportedDegree("matrix representatives for n <= 2")
    fac = []
    for p in factorint(N):
        for P, e, f in quadratic_primes_above(Ff, p):
            k, Q = 0, P
            while (Q.inverse() * A).is_integral():
                k += 1
                Q = Q * P
            if k:
                fac.append((P, k))
    divs = []
    for ks in itertools.product(*[range(k + 1) for _, k in fac]):
        D = Ideal.unit(Ff)
        for (P, _), k in zip(fac, ks):
            D = D * (P ** k)
        divs.append(D)
    divs.sort(key=lambda D: (D.norm(), D.rows))
    return divs


def enumerate_matrix_reps(F: TotallyRealField, alpha: Elt) -> List[List[List[Elt]]]:
    """[[a, b], [0, d]] with ad = alpha, d up to units, b in O_F/(d)."""
    Ff = F.field
    alpha = tuple(Fraction(c) for c in alpha)
    if not Ff.is_integral(alpha) or not any(alpha) or not F.is_totally_positive(alpha):
        raise NotTotallyPositive("alpha must be a nonzero totally positive integer of F")
    pats = F.unit_sign_patterns()
    reps = []
    for D in _divisor_ideals(F, alpha):
        d = principal_generator(D)
        if d is None:
            continue   # only principal divisors give matrices over O_F
        sg = tuple(1 if v > 0 else -1 for v in Ff.embed_real(d, 96))
        if sg in pats:
            d = Ff.mul(d, pats[sg])
        a = Ff.div(alpha, d)
        zero = Ff.zero()
        for b in _residues(D):
            reps.append([[a, b], [zero, d]])
    return reps


# ----------------------------------------------- class-group generation

def _candidate_ideals(K: CMField) -> List[Ideal]:
    KF = K.field
    cands = list(K.class_group.reps)
    cands += [r.conj() for r in K.class_group.reps]
    prs = list(K.primes)
    if not prs and KF.degree == 2:
        M = (2 / math.pi) * math.sqrt(abs(K.disc))
        prs = [P for p in primes_upto(max(2, int(M) + 1)) for P, e, f in quadratic_primes_above(KF, p)]
    cands += prs
    cands += [P * Q for P, Q in itertools.combinations_with_replacement(prs, 2)]
    # real ideals from F: extensions of small primes
    cands += [K.F_ideal_to_K(Ideal.principal(K.base.field, K.base.field.rational(p))) for p in (2, 3, 5)]
    out, seen = [], set()
    for I in cands:
        if I not in seen:
            seen.add(I)
            out.append(I)
    return out


def _subgroup(table, gens) -> List[int]:
    S = {0}
    frontier = [0]
    while frontier:
        x = frontier.pop()
        for g in gens:
            y = table[x][g]
            if y not in S:
                S.add(y)
                frontier.append(y)
    return sorted(S)


def verify_classgroup_generation(K: CMField) -> dict:
    """For each class C, a pair (real class A, imaginary class B) with AB = C."""
    _needs_reflex(K)
    cg = K.class_group
    if cg.order == 1:
        return {"classes": {0: (0, 0)}, "real": [0], "imaginary": [0], "generated": True, "samples": 0}
    real, imag = set(), set()
    cands = _candidate_ideals(K)
    for I in cands:
        kind = classify_ideal(I, K)
        lab = cg.label(I)
        if kind is IdealKind.REAL:
            real.add(lab)
        if kind is not IdealKind.MIXED and (kind is IdealKind.IMAGINARY or _imaginary_too(I, K)):
            imag.add(lab)
    R = _subgroup(cg.table, sorted(real))
    M = _subgroup(cg.table, sorted(imag))
    classes = {}
    for C in range(cg.order):
        pair = next(((A, B) for A in R for B in M if cg.table[A][B] == C), None)
        classes[C] = pair
    return {"classes": classes, "real": R, "imaginary": M,
            "generated": all(v is not None for v in classes.values()), "samples": len(cands)}


def _imaginary_too(I: Ideal, K: CMField) -> bool:
    """Real ideals can also satisfy the imaginary criterion."""
    J = I * I.conj()
    c = contract(K, J)
    return K.F_ideal_to_K(c) == J and _totally_positive_generator(K.base, c) is not None
