import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qhist import phasespace as ps
from qhist import wigner as wg
from qhist.hilbert import random_hermitian
from qhist.histories import SystemSpec

SPEC = ps.FockSpec(40)
GRID = wg.calibrated_grid(SPEC, 33)


def _support(rng, n, k=5):
    a = np.zeros((n, n), dtype=complex)
    a[:k, :k] = random_hermitian(rng, k)
    return a


def test_delta_operator_matches_fourier_oracle(rng):
    spec = ps.FockSpec(24)
    for _ in range(5):
        q, p = rng.uniform(-1.2, 1.2, 2)
        direct = wg.delta_operator(q, p, spec)[:4, :4]
        oracle = wg.delta_operator_fourier(q, p, spec, radius=12.0, npts=161, block=4)
        assert np.abs(direct - oracle).max() < 1e-6


def test_delta_operator_hermitian_and_region():
    d = wg.delta_operator(0.5, -0.7, SPEC)
    assert np.allclose(d, d.conj().T)
    with pytest.raises(ps.TruncationError):
        wg.delta_operator(10.0, 0.0, SPEC)
    with pytest.warns(wg.RegionWarning):
        wg.delta_operator(10.0, 0.0, SPEC, strict=False)


def test_delta_trace_methods():
    assert wg.delta_trace(0.0, 0.0, SPEC, "raw") == pytest.approx(0.0, abs=1e-12)  # even cutoff
    for q in (0.0, 1.5, 3.0):
        assert wg.delta_trace(q, 0.5, SPEC) == pytest.approx(1.0, abs=1e-6)
    assert wg.delta_trace(1.0, 0.0, SPEC, "cesaro") == pytest.approx(1.0, abs=0.05)
    with pytest.raises(ValueError):
        wg.delta_trace(0.0, 0.0, SPEC, "nope")


def test_identity_symbol_is_one_inside_region():
    f = wg.wigner_transform(wg.regularize(np.eye(40), SPEC), GRID, SPEC)
    mask = wg.valid_mask(GRID, SPEC, 0.5)
    assert np.abs(f.values - 1.0)[mask].max() < 1e-5


def test_vacuum_symbol_is_gaussian():
    rho = np.outer(ps.vacuum(SPEC), ps.vacuum(SPEC))
    f = wg.wigner_transform(rho, GRID, SPEC)
    q, p = GRID.mesh()
    assert np.allclose(f.values, 2 * np.exp(-(q ** 2 + p ** 2)), atol=1e-12)
    assert (f.values.real > 0).all()


@pytest.mark.parametrize("omega", [0.5, 2.0])
def test_vacuum_symbol_scaled_frequency(omega):
    spec = ps.FockSpec(40, omega)
    grid = wg.calibrated_grid(spec, 17)
    rho = np.outer(ps.vacuum(spec), ps.vacuum(spec))
    f = wg.wigner_transform(rho, grid, spec)
    q, p = grid.mesh()
    assert np.allclose(f.values, 2 * np.exp(-(omega * q ** 2 + p ** 2 / omega)), atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.floats(-2, 2), st.floats(-2, 2))
def test_linearity_and_reality(seed, x, y):
    rng = np.random.default_rng(seed)
    a, b = _support(rng, 40), _support(rng, 40)
    fa = wg.wigner_transform(a, GRID, SPEC).values
    fb = wg.wigner_transform(b, GRID, SPEC).values
    fab = wg.wigner_transform(x * a + 1j * y * b, GRID, SPEC).values
    assert np.allclose(fab, x * fa + 1j * y * fb, atol=1e-12)
    assert np.abs(fa.imag).max() < 1e-12


def test_displacement_covariance(rng):
    a = _support(rng, 40, 4)
    h = GRID.q[1] - GRID.q[0]
    shift = (2 * h, -h)
    d = ps.displacement(shift, SPEC)
    moved = wg.wigner_transform(d @ a @ d.conj().T, GRID, SPEC).values
    base = wg.wigner_transform(a, GRID, SPEC).values
    inner = wg.valid_mask(GRID, SPEC, 0.3)
    shifted = np.roll(np.roll(base, 2, axis=0), -1, axis=1)
    assert np.abs(moved - shifted)[inner].max() < 1e-6


def test_trace_identities(rng):
    spec = ps.FockSpec(60)
    grid = wg.calibrated_grid(spec)
    a, b = _support(rng, 60, 6), _support(rng, 60, 6)
    r = wg.trace_identities(a, b, grid, spec)
    assert r["trace_rel_err"] < 0.01 and r["product_rel_err"] < 0.01


@pytest.mark.parametrize("pair", [("q", "p"), ("q2", "p"), ("h", "q"), ("qp", "q2")])
def test_moyal_equals_poisson_for_quadratics(pair):
    q, p = ps.position(SPEC), ps.momentum(SPEC)
    ops = {"q": q, "p": p, "q2": q @ q, "h": (q @ q + p @ p) / 2, "qp": (q @ p + p @ q) / 2}
    grid = wg.calibrated_grid(SPEC, 65)
    assert wg.moyal_consistency_check(ops[pair[0]], ops[pair[1]], grid, SPEC) < 1e-3


def test_poisson_bracket_of_coordinates():
    q, p = GRID.mesh()
    pb = wg.poisson_bracket(q.astype(complex), p.astype(complex), GRID)
    assert np.allclose(pb[np.isfinite(pb)], 1.0)


def _sys(spec=SPEC, center=(0.6, 0.2)):
    return SystemSpec.pure(ps.oscillator_hamiltonian(spec), ps.coherent_state(center, spec))


def test_single_node_reduces_to_wigner_function():
    rho_sys = SystemSpec.pure(ps.oscillator_hamiltonian(SPEC), ps.vacuum(SPEC))
    val = wg.multi_time_wigner((0.0,), [(0.0, 0.0)], (), [], rho_sys, SPEC)
    assert val == pytest.approx(2.0)
    assert val == pytest.approx(wg.symbol_at(rho_sys.rho0, 0.0, 0.0, SPEC))


def test_identical_chains_are_nonnegative():
    sys = _sys()
    chain = ((0.0, 0.5), [(0.3, 0.1), (-0.2, 0.4)])
    val = wg.multi_time_wigner(*chain, *chain, sys, SPEC)
    assert val.real >= 0 and abs(val.imag) < 1e-12


def test_hierarchy_hermitian_under_swap():
    sys = _sys()
    a = ((0.0, 0.7), [(0.5, -0.3), (0.1, 0.2)])
    b = ((0.2,), [(-0.4, 0.1)])
    assert wg.multi_time_wigner(*a, *b, sys, SPEC) == pytest.approx(
        np.conj(wg.multi_time_wigner(*b, *a, sys, SPEC)))


def test_chain_length_limit():
    with pytest.raises(ValueError):
        wg.multi_time_wigner((0, 1, 2, 3), [(0, 0)] * 4, (), [], _sys(), SPEC)


def test_additivity_marginal_small():
    res = wg.additivity_check(2, 0, _sys(), SPEC, wg.calibrated_grid(SPEC), (0.0, 0.7), [(0.5, -0.3)])
    assert res < 0.02


def test_additivity_with_second_chain():
    res = wg.additivity_check(2, 1, _sys(), SPEC, wg.calibrated_grid(SPEC), (0.0, 0.7), [(0.5, -0.3)],
                              (0.4,), [(0.2, 0.1)])
    assert res < 0.02


def test_grid_helpers():
    g = wg.PhaseSpaceGrid(-1, 1, -2, 2, 9, 17)
    assert g.area == 8.0 and g.shape == (9, 17)
    assert g.integrate(np.ones(g.shape)) == pytest.approx(8.0 / (2 * np.pi))
    assert g.refined(2).shape == (17, 33)
    with pytest.raises(ValueError):
        wg.PhaseSpaceGrid(1, -1, 0, 1, 9, 9)


def test_field_rows_and_flags():
    f = wg.wigner_transform(np.eye(40), wg.calibrated_grid(SPEC, 9), SPEC)
    rows = list(f.rows())
    assert len(rows) == 81 and all(len(r) == 5 for r in rows)
    assert not rows[0][4] and rows[40][4]


def test_no_region_warning_inside():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        wg.delta_operator(1.0, 1.0, SPEC, strict=False)


def test_single_node_marginal_is_trace_of_state():
    res = wg.additivity_check(1, 0, _sys(), SPEC, wg.calibrated_grid(SPEC), (0.3,))
    assert res < 1e-6
