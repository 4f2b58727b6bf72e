import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qhist import ctp
from qhist import phasespace as ps
from qhist import testbeds as tb
from qhist.ctp import CorrelatorRequest, SmearingVector
from qhist.histories import SystemSpec, TimeGrid

SYS, A = tb.ctp_qubit()
GRID = TimeGrid(tb.CTP_GRID)
js = st.lists(st.floats(-2, 2), min_size=3, max_size=3)


def sv(values):
    return SmearingVector(GRID, values)


def test_normalisation_and_branch_cancellation():
    zero = SmearingVector.zeros(GRID)
    assert ctp.ctp_generating_functional(A, zero, zero, SYS) == pytest.approx(1.0)


@given(js)
def test_equal_sources_cancel(j):
    assert ctp.ctp_generating_functional(A, sv(j), sv(j), SYS) == pytest.approx(1.0, abs=1e-12)


@given(js, js)
def test_hermiticity(jp, jm):
    z = ctp.ctp_generating_functional(A, sv(jp), sv(jm), SYS)
    w = ctp.ctp_generating_functional(A, sv(jm), sv(jp), SYS)
    assert np.conj(z) == pytest.approx(w, abs=1e-12)


def test_grid_mismatch():
    with pytest.raises(ValueError):
        ctp.ctp_generating_functional(A, sv([0, 0, 0]), SmearingVector.zeros((0.0, 1.0)), SYS)
    with pytest.raises(ValueError):
        SmearingVector(GRID, [0.0, 1.0])


def test_two_point_matches_time_ordering():
    evo = SYS.evolution
    a1, a2 = evo.heisenberg(A, 0.4), evo.heisenberg(A, 1.1)
    req = CorrelatorRequest((0.4, 1.1))
    assert ctp.direct_correlator(A, req, SYS) == pytest.approx(np.trace(SYS.rho0 @ a2 @ a1))
    req = CorrelatorRequest((), (0.4, 1.1))
    assert ctp.direct_correlator(A, req, SYS) == pytest.approx(np.trace(SYS.rho0 @ a1 @ a2))


def test_coincident_times_symmetrised():
    x, y = tb.SX, tb.SZ
    got = ctp.ordered_product([(1.0, x), (1.0, y)])
    assert np.allclose(got, (x @ y + y @ x) / 2)


def test_one_point_branch_independence():
    for t in tb.CTP_GRID:
        plus = ctp.correlator(A, CorrelatorRequest((t,)), SYS, GRID)
        minus = ctp.correlator(A, CorrelatorRequest((), (t,)), SYS, GRID)
        assert plus.value == pytest.approx(minus.value)
        assert plus.fd_value == pytest.approx(minus.fd_value, abs=1e-8)


@pytest.mark.parametrize("plus,minus", tb.CTP_REQUESTS)
def test_shipped_requests_cross_validate(plus, minus):
    res = ctp.correlator(A, CorrelatorRequest(plus, minus), SYS, GRID)
    assert res.ok, res


def test_higher_order_request():
    res = ctp.correlator(A, CorrelatorRequest((0.0, 0.4, 1.1), (0.4,)), SYS, GRID)
    assert res.residual < 1e-4


def test_request_validation():
    with pytest.raises(ValueError):
        CorrelatorRequest()
    with pytest.raises(ValueError):
        ctp.correlator(A, CorrelatorRequest((0.0,) * 3, (0.4,) * 2), SYS, GRID)
    with pytest.raises(ValueError):
        ctp.fd_correlator(A, CorrelatorRequest((0.3,)), SYS, GRID)


def test_strict_mode_flags_bad_step():
    with pytest.raises(ArithmeticError):
        ctp.correlator(A, CorrelatorRequest((0.4, 1.1), (0.0,)), SYS, GRID, h=0.5, strict=True)


def test_phase_space_ctp():
    spec = ps.FockSpec(30)
    sys = SystemSpec.pure(ps.oscillator_hamiltonian(spec), ps.coherent_state((0.3, 0.1), spec))
    grid = TimeGrid((0.0, 0.5, 1.0))
    zero = ps.PhasePath(grid, np.zeros((3, 2)))
    assert ctp.phase_space_ctp(zero, zero, sys, spec) == pytest.approx(1.0)
    z = ps.PhasePath(grid, [(0.2, 0.1), (-0.3, 0.4), (0.1, -0.2)])
    assert abs(ctp.phase_space_ctp(z, z, sys, spec)) == pytest.approx(1.0, abs=1e-10)
