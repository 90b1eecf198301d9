import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dqdwtd.closedform import closed_form_mean_time, closed_form_pe, closed_form_two_photon
from dqdwtd.errors import InconsistentSystemError, QuadratureError
from dqdwtd.liouvillian import ELECTRON_OUT, PHOTON_LEAK
from dqdwtd.model import photon_scenario
from dqdwtd.wtd import (
    first_jump_probability,
    first_jump_time_density,
    jump_number_decomposition,
    jump_probability_table,
    mean_first_jump_time,
    survival_probability,
    two_jump_probability,
    wtd_time_density,
)

from oracles import dqd_oc_oracle, dyson_van_loan, integrate_density, split_oracle

E, G = ELECTRON_OUT, PHOTON_LEAK


def probs(alpha, coop, n=1, **kw):
    sc = photon_scenario(alpha, coop, n, **kw)
    return sc, {k: first_jump_probability(sc.L0, j, sc.rho0) for k, j in sc.jumps.items()}


def pair(sc, i, j):
    return two_jump_probability(sc.L0, sc.jumps[i], sc.jumps[j], sc.rho0)


# first-click probabilities

def test_first_jump_examples():
    _, p = probs(1.0, 1.0)
    assert p[E] == pytest.approx(0.125, abs=1e-12)
    _, p = probs(2.0, 0.0)
    assert p[E] == 0.0 and p[G] == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 20), st.floats(0, 30))
def test_first_jump_normalized(alpha, coop):
    _, p = probs(alpha, coop)
    assert p[E] + p[G] == pytest.approx(1.0, abs=1e-9)


def test_first_jump_accepts_raw_arrays():
    sc = photon_scenario(1.0, 1.0, 1)
    p = first_jump_probability(sc.L0.data, sc.jumps[E].data, sc.vec_rho0)
    assert p == pytest.approx(0.125, abs=1e-12)


def test_dark_initial_state_raises():
    sc = photon_scenario(1.0, 1.0, 1)
    dark = np.zeros_like(sc.rho0)
    dark[0, 0] = 1.0  # |0, 0>: the dot fills, then nothing is ever emitted
    for fn in (lambda: first_jump_probability(sc.L0, sc.jumps[E], dark),
               lambda: mean_first_jump_time(sc.L0, dark)):
        with pytest.raises(InconsistentSystemError):
            fn()


def test_n0_scenario_raises():
    sc = photon_scenario(1.0, 1.0, 0)
    with pytest.raises(InconsistentSystemError):
        first_jump_probability(sc.L0, sc.jumps[E], sc.rho0)


# mean time

@pytest.mark.parametrize("coop", [0.0, 0.3, 1.0, 7.3, 100.0])
def test_mean_time_alpha_one(coop):
    sc = photon_scenario(1.0, coop, 1)
    assert mean_first_jump_time(sc.L0, sc.rho0) == pytest.approx(1.0, abs=1e-12)


def test_mean_time_examples():
    sc = photon_scenario(0.5, 1e6, 1)
    assert mean_first_jump_time(sc.L0, sc.rho0) == pytest.approx(10 / 9, abs=1e-4)
    sc = photon_scenario(3.0, 0.0, 1)
    assert mean_first_jump_time(sc.L0, sc.rho0) == pytest.approx(1.0, abs=1e-12)


def test_mean_time_scales_with_kappa():
    sc = photon_scenario(0.5, 2.0, 1, kappa=4.0)
    assert 4.0 * mean_first_jump_time(sc.L0, sc.rho0) == pytest.approx(closed_form_mean_time(0.5, 2.0), rel=1e-12)


# two clicks

def test_two_jump_examples():
    sc = photon_scenario(1e6, 1.0, 2)
    assert pair(sc, E, E) == pytest.approx(0.25, abs=1e-4)
    sc = photon_scenario(3.0, 0.0, 2)
    assert pair(sc, G, G) == pytest.approx(1.0, abs=1e-12)
    assert pair(sc, E, E) == pair(sc, E, G) == pair(sc, G, E) == 0.0
    sc = photon_scenario(5.0, 10.0, 2)
    total = sum(pair(sc, i, j) for i in (E, G) for j in (E, G))
    assert total == pytest.approx(1.0, abs=1e-9)


def test_two_jump_from_single_photon_raises():
    sc = photon_scenario(1.0, 1.0, 1)
    with pytest.raises(InconsistentSystemError, match="second click"):
        pair(sc, G, G)


def test_jump_probability_table():
    sc = photon_scenario(5.0, 10.0, 2)
    tab = jump_probability_table(sc.L0, sc.jumps, sc.rho0, length=2)
    cf = closed_form_two_photon(5.0, 10.0)
    assert abs(tab.residual) <= 1e-9
    assert tab[(E, E)] == pytest.approx(cf["p_ee"], abs=1e-9)
    assert tab.marginal(0, E) == pytest.approx(cf["p_e1"], abs=1e-9)
    assert tab.marginal(1, E) == pytest.approx(cf["p_e2"], abs=1e-9)
    one = jump_probability_table(sc.L0, sc.jumps, sc.rho0, length=1)
    assert sum(one.entries.values()) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        jump_probability_table(sc.L0, sc.jumps, sc.rho0, length=3)


def test_engine_against_hand_built_generator():
    # same physics assembled by brute force, no shared code with the package
    h, chans, rho = dqd_oc_oracle(2.5, 4.0, 2, delta_d=0.3)
    _, l0, (je, jg) = split_oracle(h, chans)
    sc = photon_scenario(2.5, 4.0, 2, delta_d=0.3)
    assert two_jump_probability(l0, je, jg, rho) == pytest.approx(pair(sc, E, G), abs=1e-12)
    assert mean_first_jump_time(l0, rho) == pytest.approx(mean_first_jump_time(sc.L0, sc.rho0), rel=1e-12)


# time-resolved densities

def test_density_at_zero():
    kappa = 1.7
    sc = photon_scenario(1.0, 1.0, 1, kappa=kappa)
    assert wtd_time_density(sc.L0, sc.jumps[E], sc.rho0, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert wtd_time_density(sc.L0, sc.jumps[G], sc.rho0, 0.0) == pytest.approx(kappa, abs=1e-14)
    assert first_jump_time_density(sc.L0, sc.rho0, 0.0, sc.jumps) == pytest.approx(kappa, abs=1e-14)
    with pytest.raises(ValueError):
        wtd_time_density(sc.L0, sc.jumps[G], sc.rho0, -1.0)


@pytest.mark.parametrize("alpha,coop", [(0.37, 1.9), (1.0, 1.0), (2.2, 0.4), (4.1, 13.0), (0.8, 22.0)])
def test_time_marginal_matches_probability(alpha, coop):
    sc, p = probs(alpha, coop)
    for lab, j in sc.jumps.items():
        val = integrate_density(lambda t: wtd_time_density(sc.L0, j, sc.rho0, t), 50.0, points=[1, 5, 20])
        assert val == pytest.approx(p[lab], abs=1e-6)


def test_total_density_integrals():
    sc = photon_scenario(1.0, 1.0, 1)
    total = integrate_density(lambda t: first_jump_time_density(sc.L0, sc.rho0, t, sc.jumps), 50.0)
    assert total == pytest.approx(1.0, abs=1e-6)
    mean = integrate_density(lambda t: t * first_jump_time_density(sc.L0, sc.rho0, t), 50.0)
    assert mean == pytest.approx(closed_form_mean_time(1.0, 1.0), abs=1e-6)


@pytest.mark.parametrize("t", [0.0, 0.3, 1.0, 4.0])
def test_channel_sum_equals_trace_loss(t):
    sc = photon_scenario(2.0, 3.0, 2, delta_d=0.5)
    a = first_jump_time_density(sc.L0, sc.rho0, t, sc.jumps)
    b = first_jump_time_density(sc.L0, sc.rho0, t)
    assert a == pytest.approx(b, abs=1e-12)
    # and equals minus the derivative of the survival probability
    h = 1e-5
    if t > 0:
        ds = (survival_probability(sc.L0, sc.rho0, t + h) - survival_probability(sc.L0, sc.rho0, t - h)) / (2 * h)
        assert a == pytest.approx(-ds, abs=1e-7)


# jump-number decomposition

@pytest.mark.parametrize("t", [0.5, 1.0, 2.0, 5.0])
def test_dyson_single_photon(t):
    sc = photon_scenario(1.0, 1.0, 1)
    P = jump_number_decomposition(sc.split.L, sc.L0, sc.jumps, sc.rho0, t, K=3)
    assert P[0] + P[1] == pytest.approx(1.0, abs=1e-6)
    assert np.all(np.abs(P[2:]) <= 1e-8)


def test_dyson_at_zero():
    sc = photon_scenario(2.0, 5.0, 2)
    P = jump_number_decomposition(sc.split.L, sc.L0, sc.jumps, sc.rho0, 0.0, K=3)
    np.testing.assert_array_equal(P, [1.0, 0.0, 0.0, 0.0])


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("t", [1.0, 5.0])
def test_dyson_completeness(n, t):
    sc = photon_scenario(5.0, 10.0, n)
    P = jump_number_decomposition(sc.split.L, sc.L0, sc.jumps, sc.rho0, t, K=n)
    assert P.sum() == pytest.approx(1.0, abs=1e-6)
    assert P[0] == pytest.approx(survival_probability(sc.L0, sc.rho0, t), abs=1e-12)


@pytest.mark.parametrize("alpha,coop,t", [(1.0, 1.0, 1.0), (0.5, 2.0, 3.0), (5.0, 10.0, 0.7)])
def test_dyson_matches_van_loan(alpha, coop, t):
    sc = photon_scenario(alpha, coop, 2)
    P = jump_number_decomposition(sc.split.L, sc.L0, sc.jumps, sc.rho0, t, K=2)
    ref = dyson_van_loan(sc.L0.data, sc.split.total_jump, sc.vec_rho0, t, 2)
    np.testing.assert_allclose(P, ref, atol=1e-9)


def test_dyson_rejects_inconsistent_split():
    sc = photon_scenario(1.0, 1.0, 1)
    with pytest.raises(ValueError):
        jump_number_decomposition(sc.split.L, sc.L0, {E: sc.jumps[E]}, sc.rho0, 1.0, K=1)
    with pytest.raises(ValueError):
        jump_number_decomposition(None, sc.L0, sc.jumps, sc.rho0, -1.0, K=1)


def test_dyson_reports_unconverged_quadrature():
    sc = photon_scenario(1.0, 1.0, 2)
    with pytest.raises(QuadratureError):
        jump_number_decomposition(None, sc.L0, sc.jumps, sc.rho0, 200.0, K=2, nodes=2)
