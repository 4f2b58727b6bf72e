import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qhist import geomphase as gp
from qhist.hilbert import random_state
from qhist.histories import SystemSpec
from qhist.testbeds import KET0, KET1, PLUS, SX, SZ

seeds = st.integers(0, 2**32 - 1)


def test_fs_increment_examples():
    u = np.array([1, 0], dtype=complex)
    assert gp.fs_increment(u, u) == (0.0, 0.0)
    with pytest.raises(ValueError):
        gp.fs_increment(KET0, KET1)


@pytest.mark.parametrize("theta", [1e-2, 3e-2, 1e-1])
def test_fs_increment_small_great_circle_step(theta):
    ds2, _ = gp.fs_increment(gp.bloch_state(0.0, 0.0), gp.bloch_state(theta, 0.0))
    assert ds2 == pytest.approx(theta ** 2 / 4, rel=theta ** 2)


def test_constant_and_retraced_paths():
    const = gp.StatePath.from_states([PLUS] * 5)
    assert gp.pancharatnam_product(const) == pytest.approx(1.0)
    loop = gp.bloch_circle_path(1.0, 12)
    there_back = gp.StatePath.from_states(list(loop.states) + list(reversed(loop.states))[1:])
    assert gp.pancharatnam_phase(there_back) == pytest.approx(0.0, abs=1e-12)
    # the modulus is a product of |overlap|^2 < 1 and reaches 1 only as n grows
    mods = []
    for n in (20, 80, 320):
        half = gp.bloch_circle_path(1.0, n, turns=0.5)
        both = gp.StatePath.from_states(list(half.states) + list(reversed(half.states))[1:])
        mods.append(abs(gp.pancharatnam_product(both)))
    assert all(b > a for a, b in zip(mods, mods[1:]))
    assert 1 - mods[-1] < 0.01


def test_bloch_circle_half_solid_angle():
    theta = np.pi / 3
    exact = -np.pi * (1 - np.cos(theta))
    n = 200
    ph = gp.pancharatnam_phase(gp.bloch_circle_path(theta, n))
    assert abs(ph - exact) < 1.0 / n


def test_convergence_monotone_beyond_threshold():
    theta = np.pi / 3
    ns = [25, 50, 100, 200]
    ph = [gp.pancharatnam_phase(gp.bloch_circle_path(theta, n)) for n in ns]
    limit = gp.richardson(ns, ph, order=2)
    errs = [abs(p - limit) for p in ph]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_geodesic_open_path_has_no_phase(rng):
    u, v = random_state(rng, 3), random_state(rng, 3)
    assert gp.berry_phase_open_path(gp.geodesic_path(u, v, 20)) == pytest.approx(0.0, abs=1e-10)


def test_open_path_orthogonal_endpoints():
    path = gp.StatePath.from_states([KET0, PLUS, KET1])
    with pytest.raises(ValueError):
        gp.berry_phase_open_path(path)


def test_orthogonal_neighbours_rejected():
    with pytest.raises(ValueError):
        gp.StatePath.from_states([KET0, KET1])


@given(seeds)
def test_gauge_invariance(seed):
    rng = np.random.default_rng(seed)
    path = gp.bloch_circle_path(rng.uniform(0.2, 2.8), 30)
    shifted = path.regauged(rng.uniform(-np.pi, np.pi, len(path)))
    assert abs(gp.wrap_phase(gp.pancharatnam_phase(shifted) - gp.pancharatnam_phase(path))) < 1e-12


@given(seeds)
def test_reparametrisation_invariance(seed):
    rng = np.random.default_rng(seed)
    path = gp.bloch_circle_path(1.1, 16)
    times = np.cumsum(rng.uniform(0.1, 2.0, len(path)))
    other = gp.StatePath.from_states(path.states, times)
    assert gp.pancharatnam_phase(other) == gp.pancharatnam_phase(path)


def test_reversed_path_conjugates_phase():
    path = gp.bloch_circle_path(0.9, 40)
    assert gp.pancharatnam_phase(path.reversed()) == pytest.approx(-gp.pancharatnam_phase(path))


def test_wrap_phase_range():
    assert gp.wrap_phase(np.pi) == np.pi
    assert gp.wrap_phase(-np.pi) == np.pi
    assert gp.wrap_phase(3 * np.pi / 2) == pytest.approx(-np.pi / 2)


def _halves(theta, n):
    upper = gp.StatePath.from_states([gp.bloch_state(theta, f) for f in np.linspace(0, np.pi, n + 1)])
    lower = gp.StatePath.from_states([gp.bloch_state(theta, f) for f in np.linspace(0, -np.pi, n + 1)])
    return upper, lower


def test_two_paths_with_shared_ends_give_loop_phase():
    theta = np.pi / 3
    loop_phase = -np.pi * (1 - np.cos(theta))
    mods = []
    for n in (20, 80, 320):
        a, b = _halves(theta, n)
        sys = SystemSpec.pure(np.zeros((2, 2)), a.states[0])
        z = gp.action_phase_decoherence(a, b, sys)
        closed = gp.StatePath.from_states(list(a.states) + list(reversed(b.states))[1:])
        assert np.angle(z) == pytest.approx(gp.pancharatnam_phase(closed), abs=1e-12)
        mods.append(abs(z))
    assert abs(np.angle(z) - loop_phase) < 1e-4
    assert all(b > a for a, b in zip(mods, mods[1:])) and 1 - mods[-1] < 0.01


def test_constant_paths_real_positive():
    sys = SystemSpec.pure(np.zeros((2, 2)), PLUS)
    path = gp.StatePath.from_states([PLUS] * 4)
    z = gp.action_phase_decoherence(path, path, sys)
    assert z.real > 0 and abs(z.imag) < 1e-14


def test_energy_eigenstate_action_phase():
    omega, T = 1.7, 2.0
    path = gp.StatePath.from_states([KET0] * 5, np.linspace(0, T, 5))
    s = gp.path_action(path, 0.5 * omega * SZ)
    assert np.exp(1j * s) == pytest.approx(np.exp(-1j * 0.5 * omega * T))


def test_s_operator_on_closed_path_matches_chain():
    path = gp.bloch_circle_path(0.7, 25)
    assert gp.s_operator_matrix_element(path, path) == pytest.approx(gp.pancharatnam_product(path))


def test_operator_side_consistent_with_action_side_for_h0():
    path = gp.bloch_circle_path(0.8, 30)
    other = gp.bloch_circle_path(0.8, 30).regauged(np.zeros(31))
    sys = SystemSpec.pure(np.zeros((2, 2)), path.states[0])
    op = gp.operator_phase_decoherence(path, other, sys)
    act = gp.action_phase_decoherence(path, other, sys)
    assert abs(op) == pytest.approx(abs(act), abs=1e-12)


def test_action_side_equals_operator_side_without_dynamics():
    a, b = _halves(0.9, 50)
    sys = SystemSpec.pure(np.zeros((2, 2)), a.states[0])
    assert gp.action_phase_decoherence(a, b, sys) == pytest.approx(gp.operator_phase_decoherence(a, b, sys),
                                                                  abs=1e-12)
