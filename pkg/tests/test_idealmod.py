import itertools
import random
from fractions import Fraction as Fr

import pytest
from hypothesis import given, settings, strategies as st

from starkforge import idealmod
from starkforge.errors import InvalidPolarization, NotIntegral, NotTotallyPositive
from starkforge.fieldsdata import build_imag_quadratic
from starkforge.idealmod import (IdealKind, choose_polarization, classify_ideal, enumerate_matrix_reps,
                                 kahler_coords, present_as_of_module, type_ideal, verify_classgroup_generation)
from starkforge.numfield import Ideal


def _elt(*c):
    return tuple(Fr(x) for x in c)


def _small_ideals(KF, bound, box=4):
    """Every integral ideal of a quadratic field with norm <= bound, from two-element generators."""
    seen = {}
    vals = range(-box, box + 1)
    for a, b, c, d in itertools.product(range(0, box + 1), vals, vals, vals):
        if not (a or b):
            continue
        I = Ideal.from_elements(KF, [_elt(a, b), _elt(c, d)])
        if I.norm() <= bound:
            seen[I] = None
    return list(seen)


def test_presentation_qi_unit(Ki):
    P = present_as_of_module(Ideal.unit(Ki.field), Ki)
    assert P.b_ideal == Ideal.unit(Ki.base.field)
    w = P.cm_point(64)[0]
    assert abs(w - 1j) < 1e-15
    P.verify(Ideal.unit(Ki.field))


def test_presentation_2_plus_i(Ki):
    a = Ideal.principal(Ki.field, _elt(2, 1))
    P = present_as_of_module(a, Ki)
    assert P.lattice() == a
    assert P.cm_point(64)[0].imag > 0


def test_presentation_quartic(Kq):
    for r in Kq.class_group.reps:
        P = present_as_of_module(r, Kq)
        P.verify(r)
        assert all(z.imag > 0 for z in P.cm_point(96))


@pytest.mark.parametrize("d", [1, 5, 23, 15])
def test_presentation_left_inverse(d):
    K = build_imag_quadratic(d)
    ideals = _small_ideals(K.field, 50)
    assert len(ideals) > 10
    for I in ideals:
        P = present_as_of_module(I, K)
        assert P.lattice() == I
        assert all(z.imag > 0 for z in P.cm_point(64))


def test_classify_examples():
    K = build_imag_quadratic(5)
    KF = K.field
    assert classify_ideal(Ideal.principal(KF, _elt(7, 0)), K) is IdealKind.REAL
    for x in [_elt(2, 1), _elt(1, 3), _elt(5, -2)]:
        assert classify_ideal(Ideal.principal(KF, x), K) in (IdealKind.IMAGINARY, IdealKind.REAL)
        assert idealmod._imaginary_too(Ideal.principal(KF, x), K)
    # p2 = (2, 1 + sqrt-5): p2 p2^rho = (2), so the imaginary criterion passes
    p2 = Ideal.from_elements(KF, [_elt(2, 0), _elt(1, 1)])
    assert p2.norm() == 2
    assert p2 * p2.conj() == Ideal.principal(KF, _elt(2, 0))
    assert idealmod._imaginary_too(p2, K)


def test_classify_closure():
    K = build_imag_quadratic(5)
    ideals = _small_ideals(K.field, 30, box=3)
    kinds = {I: classify_ideal(I, K) for I in ideals}
    real = [I for I, k in kinds.items() if k is IdealKind.REAL]
    imag = [I for I, k in kinds.items() if k is IdealKind.IMAGINARY or idealmod._imaginary_too(I, K)]
    for A, B in itertools.product(real, real):
        assert classify_ideal(A * B, K) is IdealKind.REAL
    for A, B in itertools.product(imag, imag):
        C = A * B
        assert classify_ideal(C, K) is IdealKind.IMAGINARY or idealmod._imaginary_too(C, K)


def test_type_ideal(Ki, Kq):
    z = choose_polarization(Ki)
    assert type_ideal(Ideal.unit(Ki.field), z, Ki).class_label == 0
    p = Ideal.principal(Ki.field, _elt(3, 0))
    assert type_ideal(p, z, Ki).class_label == type_ideal(Ideal.unit(Ki.field), z, Ki).class_label
    with pytest.raises(InvalidPolarization):
        type_ideal(Ideal.unit(Ki.field), _elt(1, 0), Ki)
    with pytest.raises(InvalidPolarization):
        type_ideal(Ideal.unit(Ki.field), Ki.field.neg(z), Ki)
    zq = choose_polarization(Kq)
    for r in Kq.class_group.reps:
        h = type_ideal(r, zq, Kq)
        assert h.class_label in range(Kq.base.h)
        # the type class agrees with the presentation's b up to principal F-ideals (h_F = 1)
        assert Kq.base.class_group.label(present_as_of_module(r, Kq).b_ideal) == h.class_label


def test_kahler_examples(Q, F5):
    w = [1j, 1j]
    assert kahler_coords(Ideal.unit(F5.field), w).t == [1, 1]
    assert kahler_coords(Ideal.principal(Q.field, _elt(6)), [0.5 + 1j]).t == [6]
    sq5 = _elt(-1, 2)   # 2w - 1 = sqrt 5 in the basis {1, (1+sqrt5)/2}
    kc = kahler_coords(Ideal.principal(F5.field, sq5), w)
    assert kc.t == [1, 5]
    assert all(s.imag == t for s, t in zip(kc.s, kc.t))
    kd = kahler_coords(Ideal.principal(F5.field, sq5), w, F5, convention="index_over_disc")
    assert abs(kd.t[0] * kd.t[1] - 1) < 1e-25
    with pytest.raises(NotIntegral):
        kahler_coords(Ideal.principal(F5.field, _elt(Fr(1, 2), 0)), w)


def test_kahler_product_is_norm(F5):
    rng = random.Random(11)
    for _ in range(30):
        gens = [_elt(rng.randint(-9, 9), rng.randint(-9, 9)) for _ in range(2)]
        if not any(any(g) for g in gens):
            continue
        I = Ideal.from_elements(F5.field, gens)
        x, y = rng.uniform(-1, 1), rng.uniform(0.3, 2)
        kc = kahler_coords(I, [complex(x, y)] * 2)
        assert kc.t[0] * kc.t[1] == I.norm()
        assert all(t > 0 for t in kc.t)
        assert kc.t[1] % kc.t[0] == 0


def test_matrix_reps_q(Q):
    reps = enumerate_matrix_reps(Q, _elt(2))
    got = sorted((int(r[0][0][0]), int(r[0][1][0]), int(r[1][1][0])) for r in reps)
    assert got == [(1, 0, 2), (1, 1, 2), (2, 0, 1)]
    one = enumerate_matrix_reps(Q, _elt(1))
    assert len(one) == 1 and one[0][0][0] == _elt(1) and one[0][1][1] == _elt(1)
    with pytest.raises(NotTotallyPositive):
        enumerate_matrix_reps(Q, _elt(-2))


@pytest.mark.parametrize("n", range(1, 21))
def test_matrix_reps_divisor_sum(Q, n):
    sigma1 = sum(d for d in range(1, n + 1) if n % d == 0)
    reps = enumerate_matrix_reps(Q, _elt(n))
    assert len(reps) == sigma1
    for r in reps:
        assert Q.field.mul(r[0][0], r[1][1]) == _elt(n)


def _submodules_index4(F5):
    """O_F-submodules M with 2 O_F^2 <= M <= O_F^2 and [O_F^2 : M] = 4, by brute force mod 2."""
    K = F5.field
    vecs = list(itertools.product(itertools.product((0, 1), repeat=2), repeat=2))
    basis = K.basis_elts()

    def red(e):
        return tuple(int(c) % 2 for c in e)

    def closure(gens):
        span = {((0, 0), (0, 0))}
        changed = True
        while changed:
            changed = False
            for v in list(span):
                for g in gens:
                    for b in basis:
                        bg = tuple(red(K.mul(b, tuple(Fr(c) for c in gi))) for gi in g)
                        s = tuple(tuple((x + y) % 2 for x, y in zip(vi, bi)) for vi, bi in zip(v, bg))
                        if s not in span:
                            span.add(s)
                            changed = True
        return frozenset(span)

    subs = {closure([v]) for v in vecs}
    return [S for S in subs if len(S) == 4]


def test_matrix_reps_q5(F5):
    reps = enumerate_matrix_reps(F5, _elt(2, 0))
    assert len(reps) == len(_submodules_index4(F5)) == 5


def test_classgroup_generation(Ki):
    assert verify_classgroup_generation(Ki)["generated"]
    r = verify_classgroup_generation(build_imag_quadratic(5))
    assert r["generated"] and set(r["classes"]) == {0, 1}


def test_classgroup_generation_quartic(Kq):
    r = verify_classgroup_generation(Kq)
    assert set(r["classes"]) == set(range(Kq.h))
    for C, pair in r["classes"].items():
        if pair is not None:
            A, B = pair
            assert Kq.class_group.table[A][B] == C


@settings(max_examples=25, deadline=None)
@given(st.integers(-6, 6), st.integers(-6, 6), st.integers(-6, 6), st.integers(-6, 6))
def test_presentation_property(a, b, c, d):
    if not (a or b) or not (c or d):
        return
    K = _K23()
    I = Ideal.from_elements(K.field, [_elt(a, b), _elt(c, d)])
    assert present_as_of_module(I, K).lattice() == I


_cache = {}


def _K23():
    if "K" not in _cache:
        _cache["K"] = build_imag_quadratic(23)
    return _cache["K"]
