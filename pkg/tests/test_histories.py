import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qhist import histories as hi
from qhist import testbeds as tb
from qhist.hilbert import projector_onto, random_projector
from qhist.histories import HistoryProposition, SystemSpec, TimeGrid

P0 = projector_onto(tb.KET0)
P1 = projector_onto(tb.KET1)
PP = projector_onto(tb.PLUS)
PM = projector_onto(tb.MINUS)
ZERO_SYS = SystemSpec.pure(np.zeros((2, 2)), tb.KET0)
seeds = st.integers(0, 2**32 - 1)


def h2(a, b, times=(1.0, 2.0)):
    return HistoryProposition(TimeGrid(times), (a, b))


def test_class_operator_examples():
    grid = TimeGrid((0.0, 1.0))
    sys = SystemSpec(tb.SX, np.eye(2) / 2)
    assert np.allclose(hi.class_operator(HistoryProposition.identity(grid, 2), sys), np.eye(2))
    one = HistoryProposition(TimeGrid((0.3,)), (PP,))
    assert np.allclose(hi.class_operator(one, ZERO_SYS), PP)


def test_class_operator_is_earliest_leftmost():
    sys = SystemSpec(0.7 * tb.SX, np.eye(2) / 2)
    h = HistoryProposition(TimeGrid((0.2, 0.9)), (P0, PP))
    evo = sys.evolution
    expected = evo.heisenberg(P0, 0.2) @ evo.heisenberg(PP, 0.9)
    assert np.allclose(hi.class_operator(h, sys), expected)


def test_history_probability_examples():
    grid = TimeGrid((1.0, 2.0))
    assert hi.history_probability(HistoryProposition.identity(grid, 2), ZERO_SYS) == pytest.approx(1.0)
    assert hi.history_probability(h2(P0, P0), ZERO_SYS) == pytest.approx(1.0)
    assert hi.history_probability(h2(PP, P0), ZERO_SYS) == pytest.approx(0.25)


def test_decoherence_functional_examples():
    grid = TimeGrid((1.0, 2.0))
    one = HistoryProposition.identity(grid, 2)
    zero = HistoryProposition.null(grid, 2)
    a, b = h2(PP, P0), h2(PM, P0)
    assert hi.decoherence_functional(one, one, ZERO_SYS) == pytest.approx(1.0)
    assert hi.decoherence_functional(zero, a, ZERO_SYS) == 0
    # explicit products: C_a = |+><+|0><0|, C_b = |-><-|0><0|
    ca, cb = PP @ P0, PM @ P0
    rho = P0
    assert hi.decoherence_functional(a, b, ZERO_SYS) == pytest.approx(np.trace(ca.conj().T @ rho @ cb))
    assert hi.decoherence_functional(a, b, ZERO_SYS) == pytest.approx(0.25)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        hi.decoherence_functional(h2(np.eye(3), np.eye(3)), h2(P0, P0), ZERO_SYS)


def test_additivity_defect_examples():
    sys, hs = tb.qubit_interference()
    plus0, minus0, plus1, _ = hs
    d = hi.decoherence_functional(plus0, minus0, sys)
    assert hi.additivity_defect(plus0, minus0, sys) == pytest.approx(2 * abs(d.real), abs=1e-12)
    assert hi.additivity_defect(plus0, minus0, sys) == pytest.approx(0.5)
    # differ only at the final time
    assert hi.additivity_defect(plus0, plus1, sys) == pytest.approx(0.0, abs=1e-12)
    # classical: H = 0 and everything diagonal
    sys_c = SystemSpec(np.zeros((2, 2)), np.diag([0.3, 0.7]))
    assert hi.additivity_defect(h2(P0, P0), h2(P1, P0), sys_c) == pytest.approx(0.0, abs=1e-12)


def test_additivity_defect_rejects_non_disjoint():
    with pytest.raises(ValueError):
        hi.additivity_defect(h2(PP, P0), h2(PP, P0), ZERO_SYS)


@given(seeds)
def test_commuting_family_is_additive(seed):
    rng = np.random.default_rng(seed)
    d = 4
    diag = np.diag(rng.uniform(-1, 1, d))
    sys = SystemSpec(diag, np.diag(rng.dirichlet(np.ones(d))))
    ps = [np.diag(np.eye(d)[k]) for k in range(d)]
    a = h2(ps[0], ps[1] + ps[2])
    b = h2(ps[3], ps[1] + ps[2])
    assert hi.additivity_defect(a, b, sys) < 1e-12


def test_consistency_examples():
    rho = np.diag([0.3, 0.7]).astype(complex)
    single = [HistoryProposition(TimeGrid((0.0,)), (p,)) for p in (P0, P1)]
    dm, ok = hi.consistency_check(single, SystemSpec(np.zeros((2, 2)), rho))
    assert ok and np.allclose(dm.probabilities, [0.3, 0.7])
    sys, hs = tb.qubit_same_basis()
    dm, ok = hi.consistency_check(hs, sys)
    assert ok and dm.diagonal_sum == pytest.approx(1.0)
    sys, hs = tb.qubit_interference()
    dm, ok = hi.consistency_check(hs, sys, eps=1e-6)
    assert not ok and dm.max_offdiagonal == pytest.approx(0.25)


def test_consistency_rejects_bad_families():
    with pytest.raises(ValueError):
        hi.consistency_check([h2(P0, P0), h2(P0, P0)], ZERO_SYS)
    with pytest.raises(ValueError):
        hi.consistency_check([h2(P0, P0), h2(P1, P0)], ZERO_SYS)


def test_union_grid_extension():
    a = HistoryProposition(TimeGrid((0.0,)), (PP,))
    b = HistoryProposition(TimeGrid((1.0,)), (P0,))
    sys = SystemSpec(0.4 * tb.SX, np.eye(2) / 2)
    ea = hi.extend_to_grid(a, hi.union_grid(a, b))
    assert ea.times == (0.0, 1.0) and np.allclose(ea.projectors[1], np.eye(2))
    assert hi.decoherence_functional(a, b, sys) == pytest.approx(hi.decoherence_functional(ea, hi.extend_to_grid(b, ea.grid), sys))


def test_shift_and_reversal_permutations():
    for dim, n in ((2, 3), (3, 2), (2, 4)):
        s = hi.shift_operator(dim, n)
        t = hi.reversal_operator(dim, n)
        assert np.allclose(s @ s.conj().T, np.eye(dim ** n))
        assert np.allclose(t @ t.conj().T, np.eye(dim ** n))
        assert np.array_equal(t @ s @ t.conj().T, s.conj().T)


def test_boundary_decomposition_examples():
    grid = TimeGrid((0.0, 0.5, 1.0))
    sys = SystemSpec.pure(0.3 * tb.SZ + tb.SX, tb.PLUS)
    one = HistoryProposition.identity(grid, 2)
    assert hi.boundary_decomposition(one, one, sys) == pytest.approx(1.0)
    a = HistoryProposition(grid, (PP, P0, PM))
    b = HistoryProposition(grid, (PM, P1, PP))
    assert abs(hi.boundary_decomposition(a, b, sys) - hi.decoherence_functional(a, b, sys)) < 1e-10


def test_boundary_decomposition_mixed_state(rng):
    inst = tb.random_instance(rng, 3, 3)
    a, b = inst.histories[0], inst.histories[-1]
    assert abs(hi.boundary_decomposition(a, b, inst.sys) - hi.decoherence_functional(a, b, inst.sys)) < 1e-10


def test_boundary_decomposition_needs_shared_grid():
    with pytest.raises(ValueError):
        hi.boundary_decomposition(h2(P0, P0), h2(P0, P0, (1.0, 3.0)), ZERO_SYS)


def test_time_reversal_examples():
    pal = HistoryProposition(TimeGrid((-1.0, 0.0, 1.0)), (PP, P0, PP))
    rev = hi.time_reversal(pal)
    assert rev.times == pal.times
    assert all(np.allclose(x, y) for x, y in zip(rev.projectors, pal.projectors))
    sys = SystemSpec(tb.SZ, np.array([[0.6, 0.2], [0.2, 0.4]]))
    a = h2(PP, P0, (-1.0, 1.0))
    b = h2(PM, P0, (-1.0, 1.0))
    assert hi.reversal_identity_check(a, b, sys) < 1e-9


def test_time_reversal_on_complex_d():
    sys, a, b = tb.reversal_testbed()
    assert abs(hi.decoherence_functional(a, b, sys).imag) > 1e-3
    assert hi.reversal_identity_check(a, b, sys) < 1e-9


def test_time_reversal_needs_symmetric_grid():
    with pytest.raises(ValueError):
        hi.reversal_identity_check(h2(PP, P0), h2(PM, P0), ZERO_SYS)


@given(seeds)
def test_diagonal_equals_probability(seed):
    inst = tb.random_instance(np.random.default_rng(seed), 3, 3)
    dm = hi.decoherence_matrix(inst.histories, inst.sys)
    for k, h in enumerate(inst.histories):
        assert dm.values[k, k].real == pytest.approx(hi.history_probability(h, inst.sys), abs=1e-12)


@given(seeds)
def test_axiom_suite_property(seed):
    rng = np.random.default_rng(seed)
    res = tb.axiom_residuals(tb.random_instance(rng), rng)
    assert max(res.values()) < 1e-9


@given(seeds)
def test_random_projector_history_join(seed):
    rng = np.random.default_rng(seed)
    p = random_projector(rng, 3, 1)
    q = np.eye(3) - p
    a, b = h2(p, np.eye(3)), h2(q, np.eye(3))
    joined = hi.join(a, b)
    assert np.allclose(joined.projectors[0], np.eye(3))


def test_final_weight_is_optional():
    sys, hs = tb.qubit_interference()
    a, b = hs[0], hs[1]
    assert hi.decoherence_functional(a, b, sys, rho_final=np.eye(2)) == pytest.approx(
        hi.decoherence_functional(a, b, sys))
    assert hi.decoherence_functional(a, b, sys, rho_final=P1) == pytest.approx(0.0, abs=1e-15)
