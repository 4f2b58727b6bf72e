import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qhist import phasespace as ps
from qhist import stochlimit as sl
from qhist import testbeds as tb
from qhist.histories import SystemSpec

V_SWEEP = (0.5, 1.0, 2.0, 4.0, 8.0)


def test_gaussian_operator_basics():
    a = np.diag([-1.0, 0.0, 2.0])
    g = sl.gaussian_pos_operator(0.0, 1.0, a)
    w = np.linalg.eigvalsh(g)
    assert (w > 0).all() and (w <= 1 + 1e-15).all()
    sharp = sl.gaussian_pos_operator(2.0, 1e-6, a)
    assert np.allclose(sharp, np.diag([0, 0, 1.0]), atol=1e-12)
    with pytest.raises(ValueError):
        sl.gaussian_pos_operator(0.0, 1.0, np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        sl.gaussian_pos_operator(0.0, 0.0, a)


def test_smeared_decoherence_examples():
    h = tb.stochastic_qubit()
    c = h.cells[0]
    val = sl.smeared_decoherence(c, c, 1.0, h.observable, h.sys, h.grid)
    assert val.real > 0 and abs(val.imag) < 1e-14
    far = sl.smeared_decoherence((-50.0, -50.0), (50.0, 50.0), 1.0, h.observable, h.sys, h.grid)
    assert abs(far) < 1e-12
    wide = sl.smeared_decoherence(c, h.cells[-1], 1e8, h.observable, h.sys, h.grid)
    assert wide == pytest.approx(1.0, abs=1e-3)


def test_commuting_surrogate_ratio_vanishes():
    h = tb.commuting_chain()
    for V in V_SWEEP:
        assert sl.decoherence_ratio(h, V)[0] < 1e-12


def test_qubit_onset_monotone():
    rows = sl.decoherence_onset(tb.stochastic_qubit(), V_SWEEP)
    ratios = [r.ratio for r in rows]
    assert all(b <= a for a, b in zip(ratios, ratios[1:]))
    assert ratios[0] > 0.3 and ratios[-1] < 0.15


def test_probabilities_nonnegative_and_flagged():
    h = tb.stochastic_qubit()
    t = sl.extracted_probabilities(h, 0.5)
    assert (t.probabilities >= 0).all() and t.approximate
    assert t.scale == 0.5 ** 2
    assert t.normalized.sum() == pytest.approx(1.0)


def test_single_wide_cell_normalises():
    h0 = tb.stochastic_qubit()
    h = sl.SmearedHistorySet(h0.grid, ((0.0, 0.0),), h0.sys, h0.observable)
    t = sl.extracted_probabilities(h, 1e12)
    assert t.normalized == pytest.approx([1.0])
    assert t.raw[0] == pytest.approx(1.0, abs=1e-5)


def test_commuting_oracle_within_leak():
    h = tb.commuting_chain()
    ref = sl.transfer_matrix_probabilities(h)
    assert sum(ref.values()) == pytest.approx(1.0)
    for V in V_SWEEP:
        t = sl.extracted_probabilities(h, V)
        leak = sl.overlap_leak(h, V)
        err = np.abs(t.raw - np.array([ref[c] for c in h.cells]))
        assert (err <= leak + 1e-12).all()


def test_kolmogorov_commuting_and_qubit():
    h = tb.commuting_chain()
    for V in V_SWEEP:
        r = sl.kolmogorov_residual(h, V)
        assert r.residual <= r.bookkeeping + 1e-12
    res = [sl.kolmogorov_residual(tb.stochastic_qubit(), V).residual for V in V_SWEEP]
    assert all(b <= a for a, b in zip(res, res[1:]))


def test_kolmogorov_needs_two_times():
    h0 = tb.stochastic_qubit()
    h = sl.SmearedHistorySet((0.5,), ((1.0,), (-1.0,)), h0.sys, h0.observable)
    with pytest.raises(ValueError):
        sl.kolmogorov_residual(h, 1.0)


def test_classical_generating_functional():
    h = tb.stochastic_qubit()
    V = 2.0
    t = sl.extracted_probabilities(h, V)
    assert sl.classical_generating_functional(h, V, [0.0, 0.0], t) == pytest.approx(t.family_sum)
    eps = 1e-6
    for k in range(2):
        j = np.zeros(2)
        j[k] = eps
        deriv = (sl.classical_generating_functional(h, V, j, t)
                 - sl.classical_generating_functional(h, V, -j, t)) / (2j * eps)
        assert deriv.real / t.family_sum == pytest.approx(sl.mean_path(h, V, t)[k], abs=1e-8)
    one = sl.SmearedHistorySet(h.grid, ((1.0, -1.0),), h.sys, h.observable)
    t1 = sl.extracted_probabilities(one, V)
    z = sl.classical_generating_functional(one, V, [0.3, 0.2], t1)
    assert z == pytest.approx(t1.probabilities[0] * np.exp(1j * (0.3 - 0.2)))


@given(st.floats(0.2, 10.0))
def test_smeared_axioms(V):
    h = tb.stochastic_qubit()
    d = sl.smeared_matrix(h, V)
    assert np.abs(d - d.conj().T).max() < 1e-12
    assert np.diag(d).real.min() >= 0
    ident = sl.smeared_decoherence((0.0, 0.0), (0.0, 0.0), 1e16, h.observable, h.sys, h.grid)
    assert ident == pytest.approx(1.0, abs=1e-6)


def test_cells_validation():
    h0 = tb.stochastic_qubit()
    with pytest.raises(ValueError):
        sl.SmearedHistorySet(h0.grid, ((1.0,),), h0.sys, h0.observable)
    with pytest.raises(ValueError):
        sl.SmearedHistorySet(h0.grid, ((1.0, 1.0), (1.0, 1.0)), h0.sys, h0.observable)


def test_phase_space_cells():
    spec = ps.FockSpec(30)
    e = sl.coherent_cell_operator((0.5, 0.0), 1.0, spec)
    w = np.linalg.eigvalsh(e)
    assert w.min() > -1e-12 and w.max() < 1.0
    sys = SystemSpec.pure(ps.oscillator_hamiltonian(spec), ps.coherent_state((0.5, 0.0), spec))
    pset = sl.PhaseCellSet.product_cells((0.0, 0.5), [(-1.0, 0.0), (1.0, 0.0)], sys, spec)
    rows = sl.phase_cell_onset(pset, V_SWEEP)
    w = [r.ratio for r in rows]
    assert all(b <= a for a, b in zip(w, w[1:]))
