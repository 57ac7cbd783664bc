import itertools
import random
from fractions import Fraction as Fr

import mpmath
import pytest
from mpmath import mp, mpc, mpf

from starkforge.borlift import (HalfWeightForm, LatticeL3, check_uniform, divisor_sum_bridge, jacobi_type_theta,
                                kernel_checks, lift_closed_form, orbit_representative, siegel_kernel,
                                singularity_classifier)
from starkforge.eisen import FourierParams, h_chi_fourier, h_total
from starkforge.errors import CutoffTooSmall, DomainError, NotUniform
from starkforge.numfield import Ideal


def eta_q(w, bits=200):
    with mp.workprec(bits):
        w = mpc(w)
        return mpmath.expjpi(w / 12) * mpmath.qp(mpmath.expjpi(2 * w))


def _elt(*c):
    return tuple(Fr(x) for x in c)


def test_lattice_gram_and_dual(Q, F5):
    L = LatticeL3(Q, Ideal.unit(Q.field))
    assert L.gram() == [[0, 0, 1], [0, -2, 0], [1, 0, 0]]
    # x -> dual picks up the 1/2 in the middle slot
    assert L.dual().slots[1] == Ideal.principal(Q.field, _elt(Fr(1, 2)))
    L5 = LatticeL3(F5, Ideal.unit(F5.field))
    assert len(L5.basis()) == 6
    with mp.workprec(160):
        # covol(L) covol(L#) = 1
        assert abs(L5.covolume() * L5.dual().covolume() - 1) < mpf(10) ** -40


def test_form_preserved_by_generators(F5):
    K = F5.field
    L = LatticeL3(F5, Ideal.unit(K))
    one, zero = K.one, K.zero()
    u = F5.fundamental_unit
    for g in [((one, one), (zero, one)), ((zero, K.neg(one)), (one, zero)), ((u, zero), (zero, K.inv(u))),
              ((one, K.basis_elts()[1]), (zero, one))]:
        assert L.preserves_form(g)


def test_kernel_translation_q(Q, ctx128):
    L = LatticeL3(Q, Ideal.unit(Q.field))
    for w, tau in [([mpc(0.1, 1.1)], [mpc(0.2, 1.3)]), ([mpc(-0.4, 0.7)], [mpc(0.35, 0.9)])]:
        r = kernel_checks(w, tau, L, ctx128)
        assert r["translation"] < mpf(10) ** -20
        assert r["inversion"] < mpf(10) ** -15


def test_kernel_manual_translation(Q, ctx128):
    L = LatticeL3(Q, Ideal.unit(Q.field))
    w, tau = [mpc(0.1, 1.1)], mpc(0.2, 1.3)
    a = siegel_kernel(w, [tau], L, ctx128)
    with mp.workprec(200):
        t1 = tau + 1
    b = siegel_kernel(w, [t1], L, ctx128)
    with mp.workprec(200):
        assert abs(a - b) < mpf(10) ** -20


@pytest.mark.slow
def test_kernel_checks_q5(F5, ctx128):
    L = LatticeL3(F5, Ideal.unit(F5.field))
    for w, tau in [([mpc(0.1, 1.1), mpc(-0.2, 0.9)], [mpc(0.2, 2.8), mpc(0.1, 2.9)]),
                   ([mpc(0, 1), mpc(0, 1)], [mpc(-0.3, 2.7), mpc(0.4, 2.8)])]:
        r = kernel_checks(w, tau, L, ctx128)
        assert r["translation"] < mpf(10) ** -15
        assert r["unit"] < mpf(10) ** -15
        assert r["inversion"] < mpf(10) ** -15


@pytest.mark.xfail(strict=True, reason="printed inversion constant keeps a^3 on both sides; the Poisson law needs L# and covol(L)^-1")
def test_kernel_inversion_printed_constant(Q, ctx128):
    L = LatticeL3(Q, Ideal.unit(Q.field))
    r = kernel_checks([mpc(0.1, 1.1)], [mpc(0.2, 1.3)], L, ctx128)
    assert r["inversion_printed"] < mpf(10) ** -15


def test_kernel_domain(Q, ctx128):
    L = LatticeL3(Q, Ideal.unit(Q.field))
    with pytest.raises(DomainError):
        siegel_kernel([mpc(0, -1)], [mpc(0, 1)], L, ctx128)
    with pytest.raises(CutoffTooSmall):
        siegel_kernel([mpc(0, 1)], [mpc(0, 1)], L, ctx128, cutoff=1)


def test_theta_q_coefficients(Q, ctx128):
    K = Q.field
    v, G = jacobi_type_theta(Q, Ideal.unit(K), [mpc(0.1, 0.8)], ctx128)
    assert (G.c(_elt(0)), G.c(_elt(1)), G.c(_elt(4)), G.c(_elt(2)), G.c(_elt(9))) == (1, 2, 2, 0, 2)
    with mp.workprec(200):
        q = mpmath.expjpi(2 * mpc(0.1, 0.8))
        assert abs(v - mpmath.jtheta(3, 0, q)) < mpf(10) ** -30
    assert check_uniform(G)
    # the table grows on demand
    assert G.c(_elt(10 ** 4)) == 2


def test_theta_q5_brute_force(F5):
    K = F5.field
    _, G = jacobi_type_theta(F5, Ideal.unit(K), trace_bound=60)
    counts = {}
    r = 12
    for a, b in itertools.product(range(-r, r + 1), repeat=2):
        x = _elt(a, b)
        mu = K.mul(x, x)
        if K.trace(mu) <= 60:
            counts[mu] = counts.get(mu, 0) + 1
    mus = sorted({m for m in counts if any(m)}, key=lambda m: K.trace(m))
    seen_traces = sorted({K.trace(m) for m in mus})[:20]
    checked = 0
    for m in mus:
        if K.trace(m) in seen_traces:
            assert G.c(m) == counts[m]
            checked += 1
    assert checked >= 20
    assert G.c(K.zero()) == 1
    assert check_uniform(G)


def test_uniformity_unit_orbit(F5):
    K = F5.field
    _, G = jacobi_type_theta(F5, Ideal.unit(K), trace_bound=80)
    u = F5.fundamental_unit
    for x in (_elt(1, 0), _elt(2, 1), _elt(1, 1)):
        ux = K.mul(u, x)
        assert G.c(K.mul(x, x)) == G.c(K.mul(ux, ux)) > 0
    bad = HalfWeightForm(F5, {(_elt(1, 0), 0): 2}, Fr(40))
    assert not check_uniform(bad)
    with pytest.raises(NotUniform):
        lift_closed_form(bad, [1j, 1j], PrecisionCtx128())


def PrecisionCtx128():
    from starkforge.mpkernel import PrecisionCtx
    return PrecisionCtx(128)


def test_lift_q_vs_eta(Q, ctx128):
    _, G = jacobi_type_theta(Q, Ideal.unit(Q.field))
    v, info = lift_closed_form(G, [mpc(0, 2)], ctx128, report=True)
    assert info["method"] == "theta-lift"
    with mp.workprec(200):
        assert abs(v + 4 * mpmath.log(abs(eta_q(2j)))) < mpf(10) ** -12
        assert abs(v + 4 * mpmath.log(abs(eta_q(2j)))) < mpf(10) ** -30


def test_lift_q_random_points(Q, ctx128):
    _, G = jacobi_type_theta(Q, Ideal.unit(Q.field))
    rng = random.Random(31)
    for _ in range(3):
        w = mpc(rng.uniform(-0.5, 0.5), rng.uniform(0.7, 2))
        v = lift_closed_form(G, [w], ctx128)
        with mp.workprec(200):
            assert abs(v + 4 * mpmath.log(abs(eta_q(w)))) < mpf(10) ** -12


@pytest.mark.slow
def test_lift_q5_vs_eisen(F5, ctx128):
    a = Ideal.unit(F5.field)
    _, G = jacobi_type_theta(F5, a)
    for w in ([mpc(0, 1), mpc(0, 1)], [mpc(0.1, 1.2), mpc(-0.3, 0.8)], [mpc(0.25, 0.9), mpc(0.5, 1.1)]):
        lift = lift_closed_form(G, w, ctx128)
        p = FourierParams(F5, a, w)
        # h_F = 1: the character sum is the trivial character alone
        ref = h_chi_fourier(p, 0, ctx128)
        with mp.workprec(200):
            assert abs(lift - ref.real) < mpf(10) ** -10
            assert abs(ref.imag) < mpf(10) ** -30


def test_lift_zero_form(F5, Q, ctx128):
    assert lift_closed_form(HalfWeightForm.zero(Q), [mpc(0, 1)], ctx128) == 0
    assert lift_closed_form(HalfWeightForm.zero(F5), [mpc(0, 1), mpc(0.2, 1.4)], ctx128) == 0


def test_lift_domain(F5, ctx128):
    _, G = jacobi_type_theta(F5, Ideal.unit(F5.field))
    with pytest.raises(DomainError):
        lift_closed_form(G, [mpc(0, 1)], ctx128)


def test_divisor_bridge(Q, F5, ctx128):
    assert divisor_sum_bridge(Q, _elt(6), ctx128) == (12, 12)
    for beta in (_elt(1), _elt(-1)):
        assert divisor_sum_bridge(Q, beta, ctx128) == (1, 1)
    K = F5.field
    u = F5.fundamental_unit
    assert divisor_sum_bridge(F5, u, ctx128) == (1, 1)
    sq5u = K.mul(_elt(-1, 2), u)
    a, b = divisor_sum_bridge(F5, sq5u, ctx128)
    assert a == b == 6
    with pytest.raises(DomainError):
        divisor_sum_bridge(F5, K.zero(), ctx128)


def test_divisor_bridge_samples(F5, ctx128):
    rng = random.Random(3)
    K = F5.field
    done = 0
    while done < 12:
        beta = _elt(rng.randint(-12, 12), rng.randint(-12, 12))
        if not any(beta):
            continue
        a, b = divisor_sum_bridge(F5, beta, ctx128)
        assert a == b
        done += 1


def test_singularity_log_type(ctx128):
    r = singularity_classifier({0: 1}, 0, ctx128)
    assert r["type"] == "log"
    assert r["predicted"] == -1          # -log(r^2) at s = 0
    assert r["slope_error"] < mpf(10) ** -6
    for s in (-1, -2):
        assert singularity_classifier({0: 1}, s, ctx128)["slope_error"] < mpf(10) ** -6


def test_singularity_power_and_far(ctx128):
    r = singularity_classifier({0: 3}, 1, ctx128)
    assert r["type"] == "power"
    assert r["slope_error"] < mpf(10) ** -6
    assert abs(r["predicted"] - 3) < mpf(10) ** -30
    assert r["f_at_r10"] < mpf(10) ** -40


def test_orbit_representative(F5):
    K = F5.field
    u = F5.fundamental_unit
    u2 = K.mul(u, u)
    rng = random.Random(5)
    pairs = []
    while len(pairs) < 40:
        a = _elt(rng.randint(-9, 9), rng.randint(-9, 9))
        l = _elt(rng.randint(-9, 9), rng.randint(-9, 9))
        if any(a) and any(l):
            pairs.append((a, l))
    for a, l in pairs:
        rep = orbit_representative(F5, a, l)
        assert orbit_representative(F5, *rep) == rep
        # every orbit member lands on the same representative
        for k in (-2, -1, 1, 2):
            uk = K.pow(u2, abs(k))
            moved = (K.mul(a, uk), K.div(l, uk)) if k > 0 else (K.div(a, uk), K.mul(l, uk))
            assert orbit_representative(F5, *moved) == rep
        # the product alpha * lambda is an orbit invariant
        assert K.mul(*rep) == K.mul(a, l)
