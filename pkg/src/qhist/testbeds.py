"""Small reference systems shared by the CLI configs, tests and benchmarks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import logm

from .hilbert import projector_onto, random_density, random_hermitian, random_unitary
from .histories import (
    HistoryProposition,
    SystemSpec,
    TimeGrid,
    boundary_decomposition,
    class_operator,
    decoherence_functional,
    decoherence_matrix,
    join,
)
from .phasespace import FockSpec, PhasePath
from .stochlimit import SmearedHistorySet

SX = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SY = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SZ = np.diag([1.0, -1.0]).astype(np.complex128)
KET0 = np.array([1, 0], dtype=np.complex128)
KET1 = np.array([0, 1], dtype=np.complex128)
PLUS = np.array([1, 1], dtype=np.complex128) / np.sqrt(2)
MINUS = np.array([1, -1], dtype=np.complex128) / np.sqrt(2)


def qubit_interference():
    """H = 0, rho0 = |0><0|, |+/-> at t = 1 then |0>/|1> at t = 2.

    Returns the system and the four histories in the order (+0, -0, +1, -1).
    """
    sys = SystemSpec.pure(np.zeros((2, 2)), KET0)
    grid = TimeGrid((1.0, 2.0))
    hs = [HistoryProposition(grid, (projector_onto(x), projector_onto(y)))
          for y in (KET0, KET1) for x in (PLUS, MINUS)]
    return sys, hs


def qubit_same_basis():
    """H = 0 with |0>/|1> at both times: a consistent family."""
    sys = SystemSpec.pure(np.zeros((2, 2)), PLUS)
    grid = TimeGrid((1.0, 2.0))
    hs = [HistoryProposition(grid, (projector_onto(x), projector_onto(y)))
          for x in (KET0, KET1) for y in (KET0, KET1)]
    return sys, hs


def reversal_testbed():
    """Real Hamiltonian and projectors on a symmetric three-time grid."""
    h = SZ + 0.5 * SX
    sys = SystemSpec(h, np.array([[0.7, 0.2], [0.2, 0.3]], dtype=np.complex128))
    grid = TimeGrid((-1.0, 0.0, 1.0))
    a = HistoryProposition(grid, (projector_onto(PLUS), projector_onto(PLUS), projector_onto(KET0)))
    b = HistoryProposition(grid, (projector_onto(MINUS), projector_onto(PLUS), projector_onto(KET0)))
    return sys, a, b


@dataclass(frozen=True)
class RandomInstance:
    sys: SystemSpec
    histories: list
    grid: TimeGrid


def random_instance(rng: np.random.Generator, max_dim: int = 4, max_times: int = 4,
                    pure: bool = False) -> RandomInstance:
    """Random system with a product family of two-outcome projective histories."""
    dim = int(rng.integers(2, max_dim + 1))
    n = int(rng.integers(1, max_times + 1))
    h = random_hermitian(rng, dim)
    rho = random_density(rng, dim, rank=1 if pure else None)
    grid = TimeGrid(tuple(np.sort(rng.uniform(-2, 2, size=n)) + 1e-3 * np.arange(n)))
    splits = []
    for _ in range(n):
        u = random_unitary(rng, dim)
        k = int(rng.integers(1, dim))
        p = u[:, :k] @ u[:, :k].conj().T
        splits.append((p, np.eye(dim) - p))
    hs = []
    for bits in np.ndindex(*(2,) * n):
        hs.append(HistoryProposition(grid, tuple(splits[k][b] for k, b in enumerate(bits))))
    return RandomInstance(SystemSpec(h, rho), hs, grid)


def ctp_qubit(omega: float = 1.3):
    """``a = sigma_x``, ``H = omega sigma_z / 2 + 0.2 sigma_x``, mixed state with coherences."""
    rho = np.array([[0.7, 0.2 - 0.1j], [0.2 + 0.1j, 0.3]])
    return SystemSpec(0.5 * omega * SZ + 0.2 * SX, rho), SX


CTP_GRID = (0.0, 0.4, 1.1)
CTP_REQUESTS = (
    ((0.4,), ()),
    ((), (1.1,)),
    ((0.0, 1.1), ()),
    ((), (0.4, 1.1)),
    ((0.4,), (1.1,)),
    ((0.4,), (0.4,)),
    ((0.4, 0.4), ()),
    ((0.0, 0.4), (1.1,)),
    ((1.1,), (0.0, 0.4)),
    ((0.0, 1.1), (0.4, 1.1)),
)


def stochastic_qubit():
    """``H = sigma_x / 2``, sigma_z cells at +/-1 on times (0.5, 1)."""
    sys = SystemSpec(0.5 * SX, np.diag([0.8, 0.2]))
    return SmearedHistorySet.product_cells((0.5, 1.0), (-1.0, 1.0), sys, SZ)


def commuting_chain():
    """Four levels with ``a = diag(-1, -1, 1, 1)`` and ``U(1)`` a cyclic shift.

    At integer times the Heisenberg observables stay diagonal, so the
    eigenvalue labels follow a classical Markov chain.
    """
    shift = np.roll(np.eye(4), 1, axis=0)
    h = 1j * logm(shift)
    h = (h + h.conj().T) / 2
    sys = SystemSpec(h, np.diag([0.4, 0.3, 0.2, 0.1]))
    a = np.diag([-1.0, -1.0, 1.0, 1.0])
    return SmearedHistorySet.product_cells((0.0, 1.0, 2.0), (-1.0, 1.0), sys, a)


def bump_path(amplitude: float, phase: float, n: int, period: float = 2 * np.pi,
              omega: float = 1.0) -> PhasePath:
    """Rotating path with a ``sin^2`` envelope that starts and ends at the origin."""
    ts = np.linspace(0.0, period, n + 1)
    env = amplitude * np.sin(np.pi * ts / period) ** 2
    pts = np.column_stack([env * np.cos(omega * ts + phase), env * np.sin(omega * ts + phase)])
    return PhasePath(TimeGrid(tuple(ts)), pts)


def coherent_action_pair(n: int):
    return bump_path(1.0, 0.0, n), bump_path(1.2, 0.5, n)


COHERENT_ACTION_SPEC = FockSpec(40, 1.0)


def axiom_residuals(inst: RandomInstance, rng: np.random.Generator, pairs: int = 4) -> dict:
    """Largest violation of each decoherence-functional axiom on one instance.

    Additivity is checked twice: by joining histories that differ at one slot
    (a projector history) and by summing class operators of arbitrary
    exclusive pairs (the bilinear extension).
    """
    sys, hs = inst.sys, inst.histories
    dm = decoherence_matrix(hs, sys)
    d = dm.values
    one = HistoryProposition.identity(inst.grid, sys.dim)
    zero = HistoryProposition.null(inst.grid, sys.dim)
    out = {
        "normalization": max(abs(decoherence_functional(one, one, sys) - 1.0), abs(d.sum() - 1.0)),
        "hermiticity": dm.hermiticity_error,
        "null": max(abs(decoherence_functional(zero, h, sys)) for h in hs),
        "positivity": max(0.0, -dm.min_diagonal),
    }
    add = 0.0
    m = len(hs)
    for _ in range(pairs):
        i, j = rng.choice(m, size=2, replace=False) if m > 1 else (0, 0)
        k = int(rng.integers(m))
        if i == j:
            continue
        ca, cb, ck = (class_operator(hs[x], sys) for x in (i, j, k))
        lhs = np.trace((ca + cb).conj().T @ sys.rho0 @ ck)
        add = max(add, abs(lhs - d[i, k] - d[j, k]))
        differ = [s for s in range(len(inst.grid))
                  if not np.allclose(hs[i].projectors[s], hs[j].projectors[s])]
        if len(differ) == 1:
            joined = join(hs[i], hs[j])
            add = max(add, abs(decoherence_functional(joined, hs[k], sys) - d[i, k] - d[j, k]))
    out["additivity"] = float(add)
    return {k: float(v) for k, v in out.items()}


def boundary_residual(inst: RandomInstance, rng: np.random.Generator, pairs: int = 3) -> float:
    hs, sys = inst.histories, inst.sys
    worst = 0.0
    for _ in range(pairs):
        i, j = rng.integers(len(hs), size=2)
        worst = max(worst, abs(boundary_decomposition(hs[i], hs[j], sys)
                               - decoherence_functional(hs[i], hs[j], sys)))
    return float(worst)
