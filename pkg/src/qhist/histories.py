"""History propositions, class operators and the decoherence functional.

Conventions
-----------
* ``U(t) = exp(-i H t)`` and Heisenberg operators are ``a(t) = U(t)^dag a U(t)``.
* The class operator of a history (P_1 at t_1, ..., P_n at t_n) is the
  product of Heisenberg projectors with the earliest time leftmost,
  ``C = P_1(t_1) P_2(t_2) ... P_n(t_n)``.
* ``d(a, b) = Tr(C_a^dag rho0 C_b rho_f)`` with ``rho_f`` defaulting to 1.
  Probabilities are ``d(a, a)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .hilbert import (
    DEFAULT_TOL,
    SIZE_CAP,
    DimensionError,
    SizeCapError,
    as_density_matrix,
    as_operator,
    frozen,
    identity,
    is_hermitian,
    is_projector,
    partial_trace,
    psd_sqrt,
    tensor,
)

__all__ = [
    "TimeGrid",
    "SystemSpec",
    "HistoryProposition",
    "DecoherenceMatrix",
    "Evolution",
    "chain_operator",
    "class_operator",
    "history_probability",
    "decoherence_functional",
    "decoherence_matrix",
    "extend_to_grid",
    "union_grid",
    "join",
    "additivity_defect",
    "check_exclusive",
    "check_exhaustive",
    "consistency_check",
    "shift_operator",
    "reversal_operator",
    "slot_evolution",
    "boundary_operator",
    "boundary_amplitude",
    "boundary_decomposition",
    "time_reversal",
    "reversal_identity_check",
]


@dataclass(frozen=True)
class TimeGrid:
    times: tuple[float, ...]

    def __post_init__(self):
        t = tuple(float(x) for x in np.asarray(self.times, dtype=float).ravel())
        if not t:
            raise ValueError("time grid must contain at least one instant")
        if not all(np.isfinite(t)):
            raise ValueError("time grid must be finite")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("time grid must be strictly increasing")
        object.__setattr__(self, "times", t)

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        return iter(self.times)

    def is_symmetric(self, tol: float = DEFAULT_TOL) -> bool:
        t = np.asarray(self.times)
        return bool(np.all(np.abs(t + t[::-1]) <= tol))

    def reflected(self) -> "TimeGrid":
        return TimeGrid(tuple(-x for x in reversed(self.times)))


def _grid(g) -> TimeGrid:
    return g if isinstance(g, TimeGrid) else TimeGrid(tuple(np.atleast_1d(g)))


class Evolution:
    """Cached spectral decomposition of a time-independent Hamiltonian."""

    def __init__(self, h):
        h = np.asarray(h, dtype=np.complex128)
        self.w, self.v = np.linalg.eigh((h + h.conj().T) / 2)

    def u(self, t: float) -> np.ndarray:
        return (self.v * np.exp(-1j * self.w * t)) @ self.v.conj().T

    def heisenberg(self, a, t: float) -> np.ndarray:
        if t == 0.0:
            return np.asarray(a, dtype=np.complex128)
        u = self.u(t)
        return u.conj().T @ a @ u


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Hamiltonian and initial density matrix on a ``dim``-dimensional space."""

    hamiltonian: np.ndarray
    rho0: np.ndarray
    tol: float = DEFAULT_TOL
    evolution: Evolution = field(init=False, repr=False)

    def __post_init__(self):
        h = as_operator(self.hamiltonian)
        if not is_hermitian(h, self.tol):
            raise ValueError("Hamiltonian must be Hermitian")
        rho = as_density_matrix(self.rho0, self.tol)
        if rho.shape != h.shape:
            raise DimensionError("Hamiltonian and initial state dimensions differ")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "rho0", rho)
        object.__setattr__(self, "evolution", Evolution(h))

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @classmethod
    def pure(cls, hamiltonian, psi, tol: float = DEFAULT_TOL) -> "SystemSpec":
        psi = np.asarray(psi, dtype=np.complex128).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(hamiltonian, np.outer(psi, psi.conj()), tol)

    def is_pure(self) -> bool:
        return abs(np.trace(self.rho0 @ self.rho0).real - 1.0) <= self.tol


@dataclass(frozen=True, eq=False)
class HistoryProposition:
    """One projector per instant of ``grid``."""

    grid: TimeGrid
    projectors: tuple[np.ndarray, ...]
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        grid = _grid(self.grid)
        projs = tuple(as_operator(p) for p in self.projectors)
        if len(projs) != len(grid):
            raise ValueError(f"{len(grid)} times but {len(projs)} projectors")
        dims = {p.shape[0] for p in projs}
        if len(dims) != 1:
            raise DimensionError("projectors have different dimensions")
        for k, p in enumerate(projs):
            if not is_projector(p, self.tol):
                raise ValueError(f"entry {k} is not an orthogonal projector")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "projectors", projs)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    @property
    def times(self) -> tuple[float, ...]:
        return self.grid.times

    def __len__(self):
        return len(self.grid)

    @classmethod
    def identity(cls, grid, dim: int) -> "HistoryProposition":
        grid = _grid(grid)
        return cls(grid, tuple(identity(dim) for _ in grid.times))

    @classmethod
    def null(cls, grid, dim: int) -> "HistoryProposition":
        grid = _grid(grid)
        zero = np.zeros((dim, dim), dtype=np.complex128)
        return cls(grid, tuple(zero for _ in grid.times))

    def tensor_projector(self, cap: int = SIZE_CAP) -> np.ndarray:
        if self.dim ** len(self) > cap:
            raise SizeCapError("history tensor space exceeds size cap")
        return tensor(*self.projectors)


@dataclass(frozen=True, eq=False)
class DecoherenceMatrix:
    histories: tuple[HistoryProposition, ...]
    values: np.ndarray

    @property
    def max_offdiagonal(self) -> float:
        n = self.values.shape[0]
        if n < 2:
            return 0.0
        mask = ~np.eye(n, dtype=bool)
        return float(np.abs(self.values[mask]).max())

    @property
    def diagonal_sum(self) -> float:
        return float(np.trace(self.values).real)

    @property
    def probabilities(self) -> np.ndarray:
        return np.diag(self.values).real.copy()

    @property
    def hermiticity_error(self) -> float:
        return float(np.abs(self.values - self.values.conj().T).max())

    @property
    def min_diagonal(self) -> float:
        return float(np.diag(self.values).real.min())


def chain_operator(times, ops, evolution: Evolution) -> np.ndarray:
    """Product of Heisenberg-picture ``ops`` at ``times``, earliest leftmost.

    ``ops`` need not be projectors; effect histories reuse this.
    """
    out = None
    for t, a in zip(times, ops):
        x = evolution.heisenberg(np.asarray(a, dtype=np.complex128), float(t))
        out = x if out is None else out @ x
    return out


def _check_dims(sys: SystemSpec, *hs):
    for h in hs:
        if h.dim != sys.dim:
            raise DimensionError(f"history dimension {h.dim} != system dimension {sys.dim}")


def class_operator(h: HistoryProposition, sys: SystemSpec) -> np.ndarray:
    _check_dims(sys, h)
    return chain_operator(h.times, h.projectors, sys.evolution)


def _pairing(ca, cb, rho0, rho_final=None) -> complex:
    m = ca.conj().T @ rho0 @ cb
    if rho_final is not None:
        m = m @ rho_final
    return complex(np.trace(m))


def decoherence_functional(a: HistoryProposition, b: HistoryProposition, sys: SystemSpec,
                           rho_final=None) -> complex:
    """``Tr(C_a^dag rho0 C_b rho_final)``; grids of ``a`` and ``b`` may differ."""
    _check_dims(sys, a, b)
    if rho_final is not None:
        rho_final = as_operator(rho_final, sys.dim)
    return _pairing(class_operator(a, sys), class_operator(b, sys), sys.rho0, rho_final)


def history_probability(h: HistoryProposition, sys: SystemSpec, return_raw: bool = False):
    """Probability ``Tr(C^dag rho0 C)`` clamped to [0, 1].

    With ``return_raw`` the unclamped value is returned as well.
    """
    raw = decoherence_functional(h, h, sys).real
    p = min(1.0, max(0.0, raw))
    return (p, raw) if return_raw else p


def decoherence_matrix(histories, sys: SystemSpec) -> DecoherenceMatrix:
    hs = tuple(histories)
    _check_dims(sys, *hs)
    cs = [class_operator(h, sys) for h in hs]
    left = [c.conj().T @ sys.rho0 for c in cs]
    n = len(hs)
    vals = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            vals[i, j] = np.trace(left[i] @ cs[j])
    vals.setflags(write=False)
    return DecoherenceMatrix(hs, vals)


def union_grid(*hs: HistoryProposition) -> TimeGrid:
    return TimeGrid(tuple(sorted({t for h in hs for t in h.times})))


def extend_to_grid(h: HistoryProposition, grid) -> HistoryProposition:
    """Pad ``h`` with identity projectors on the instants of ``grid`` it lacks."""
    grid = _grid(grid)
    lookup = dict(zip(h.times, h.projectors))
    missing = set(lookup) - set(grid.times)
    if missing:
        raise ValueError(f"grid lacks instants {sorted(missing)}")
    eye = identity(h.dim)
    return HistoryProposition(grid, tuple(lookup.get(t, eye) for t in grid.times), h.tol)


def _aligned(*hs):
    grid = union_grid(*hs)
    return grid, [extend_to_grid(h, grid) for h in hs]


def _orthogonal_somewhere(a: HistoryProposition, b: HistoryProposition, tol) -> bool:
    return any(np.abs(p @ q).max() <= tol for p, q in zip(a.projectors, b.projectors))


def join(a: HistoryProposition, b: HistoryProposition, tol: float = DEFAULT_TOL) -> HistoryProposition:
    """The history ``a or b`` for histories that differ at exactly one instant.

    At that instant the projectors must be orthogonal so their sum is again
    a projector.
    """
    grid, (ea, eb) = _aligned(a, b)
    diff = [k for k, (p, q) in enumerate(zip(ea.projectors, eb.projectors))
            if np.abs(p - q).max() > tol]
    if len(diff) != 1:
        raise ValueError(f"histories differ at {len(diff)} instants; a product join needs exactly 1")
    k = diff[0]
    summed = ea.projectors[k] + eb.projectors[k]
    if not is_projector(summed, tol):
        raise ValueError("projectors at the differing instant are not orthogonal")
    projs = list(ea.projectors)
    projs[k] = summed
    return HistoryProposition(grid, tuple(projs), tol)


def additivity_defect(a: HistoryProposition, b: HistoryProposition, sys: SystemSpec,
                      tol: float = DEFAULT_TOL) -> float:
    """``|p(a or b) - p(a) - p(b)|`` for disjoint histories.

    When the histories differ at a single instant the joined history is
    built explicitly; otherwise ``a or b`` is the sum of the two tensor
    projectors and its class operator is ``C_a + C_b``. The result is
    checked against ``2 |Re d(a, b)|`` before returning.
    """
    _check_dims(sys, a, b)
    grid, (ea, eb) = _aligned(a, b)
    if not _orthogonal_somewhere(ea, eb, tol):
        raise ValueError("histories are not disjoint (no instant with orthogonal projectors)")
    ca, cb = class_operator(ea, sys), class_operator(eb, sys)
    try:
        c_or = class_operator(join(ea, eb, tol), sys)
    except ValueError:
        c_or = ca + cb
    p_or = _pairing(c_or, c_or, sys.rho0).real
    pa = _pairing(ca, ca, sys.rho0).real
    pb = _pairing(cb, cb, sys.rho0).real
    defect = abs(p_or - pa - pb)
    cross = 2.0 * abs(_pairing(ca, cb, sys.rho0).real)
    if abs(defect - cross) > 10 * tol * max(1.0, p_or):
        raise ArithmeticError(f"additivity identity violated: {defect} vs {cross}")
    return defect


def check_exclusive(histories, tol: float = DEFAULT_TOL) -> list[tuple[int, int]]:
    """Pairs of histories that are not orthogonal at any instant."""
    _, ext = _aligned(*histories)
    return [(i, j) for i, j in combinations(range(len(ext)), 2)
            if not _orthogonal_somewhere(ext[i], ext[j], tol)]


def check_exhaustive(histories, tol: float = DEFAULT_TOL) -> float:
    """Rank deficit of the summed tensor projectors of an exclusive family.

    Mutually orthogonal tensor projectors sum to the identity iff their ranks
    add up to the full dimension, so no tensor space is built.
    """
    grid, ext = _aligned(*histories)
    dim = ext[0].dim
    ranks = sum(np.prod([np.trace(p).real for p in h.projectors]) for h in ext)
    return float(dim ** len(grid) - ranks)


def consistency_check(histories, sys: SystemSpec, eps: float = 1e-6,
                      tol: float = DEFAULT_TOL) -> tuple[DecoherenceMatrix, bool]:
    hs = list(histories)
    if not hs:
        raise ValueError("empty history set")
    bad = check_exclusive(hs, tol)
    if bad:
        raise ValueError(f"history set is not exclusive, overlapping pairs {bad}")
    deficit = check_exhaustive(hs, tol)
    if abs(deficit) > max(tol, 1e-6):
        raise ValueError(f"history set is not exhaustive, rank deficit {deficit:g}")
    dm = decoherence_matrix(hs, sys)
    ok = dm.max_offdiagonal <= eps
    if ok and abs(dm.diagonal_sum - 1.0) > len(hs) * max(tol, eps):
        raise ArithmeticError("consistent family whose probabilities do not sum to 1")
    return dm, ok


# boundary (S, U, A) form -------------------------------------------------

def shift_operator(dim: int, nslots: int, cap: int = SIZE_CAP) -> np.ndarray:
    """Cyclic slot shift ``|i_1 ... i_n> -> |i_2 ... i_n i_1>``."""
    total = dim ** nslots
    if total > cap:
        raise SizeCapError(f"tensor space {total} exceeds cap {cap}")
    idx = np.arange(total).reshape((dim,) * nslots)
    perm = np.moveaxis(idx, 0, -1).ravel()
    s = np.zeros((total, total), dtype=np.complex128)
    s[perm, np.arange(total)] = 1.0
    return s


def reversal_operator(dim: int, nslots: int, cap: int = SIZE_CAP) -> np.ndarray:
    """Slot reversal ``|i_1 ... i_n> -> |i_n ... i_1>``."""
    total = dim ** nslots
    if total > cap:
        raise SizeCapError(f"tensor space {total} exceeds cap {cap}")
    idx = np.arange(total).reshape((dim,) * nslots)
    perm = np.transpose(idx, tuple(reversed(range(nslots)))).ravel()
    t = np.zeros((total, total), dtype=np.complex128)
    t[perm, np.arange(total)] = 1.0
    return t


def slot_evolution(sys: SystemSpec, grid, cap: int = SIZE_CAP) -> np.ndarray:
    """``U(t_1) x ... x U(t_n)`` on the slot tensor space."""
    grid = _grid(grid)
    if sys.dim ** len(grid) > cap:
        raise SizeCapError("slot tensor space exceeds size cap")
    return tensor(*[sys.evolution.u(t) for t in grid.times])


def boundary_operator(r: int, s: int, rho_sqrt, nslots: int, cap: int = SIZE_CAP) -> np.ndarray:
    """``rho^(1/2) |s><r|`` on the first slot, identity on the others."""
    rho_sqrt = np.asarray(rho_sqrt, dtype=np.complex128)
    dim = rho_sqrt.shape[0]
    if dim ** nslots > cap:
        raise SizeCapError("slot tensor space exceeds size cap")
    e = np.zeros((dim, dim), dtype=np.complex128)
    e[s, r] = 1.0
    first = rho_sqrt @ e
    return tensor(first, *[identity(dim) for _ in range(nslots - 1)])


def boundary_amplitude(h: HistoryProposition, sys: SystemSpec, cap: int = SIZE_CAP) -> np.ndarray:
    """Matrix ``c_rs = Tr(A^{rs} S U^dag alpha U)`` over the slot space.

    The trace against ``A^{rs}`` only touches the first slot, so ``c`` is
    read off from the first-slot partial trace of ``S U^dag alpha U``.
    """
    _check_dims(sys, h)
    n = len(h)
    big_u = slot_evolution(sys, h.grid, cap)
    x = big_u.conj().T @ h.tensor_projector(cap) @ big_u
    m = shift_operator(h.dim, n, cap) @ x
    m0 = partial_trace(m, (h.dim,) * n, keep=0)
    return m0 @ psd_sqrt(sys.rho0)


def boundary_decomposition(a: HistoryProposition, b: HistoryProposition, sys: SystemSpec,
                           cap: int = SIZE_CAP) -> complex:
    """``d(a, b)`` rebuilt as the boundary trace ``sum_rs c_rs(a) conj(c_rs(b))``."""
    if a.times != b.times:
        raise ValueError("boundary decomposition needs histories on the same grid")
    ca = boundary_amplitude(a, sys, cap)
    cb = boundary_amplitude(b, sys, cap)
    return complex(np.sum(ca * cb.conj()))


# time reversal -----------------------------------------------------------

def time_reversal(h: HistoryProposition) -> HistoryProposition:
    """Projectors in reverse order on the reflected grid."""
    return HistoryProposition(h.grid.reflected(), tuple(reversed(h.projectors)), h.tol)


def reversal_identity_check(a: HistoryProposition, b: HistoryProposition, sys: SystemSpec,
                            tol: float = DEFAULT_TOL) -> float:
    """Residual of ``d_T(a^T, b^T) = d(b, a)``.

    ``d_T`` is the decoherence functional read with the time arrow flipped:
    the reversed histories are chained latest time first, so the initial
    state sits at the end of the history, ``d_T(x, y) = Tr(C_x rho0 C_y^dag)``.
    The identity holds when the Hamiltonian, projectors and state are real
    in the working basis and the grid is symmetric about 0.
    """
    grid, (ea, eb) = _aligned(a, b)
    if not grid.is_symmetric(tol):
        raise ValueError("time-reversal identity needs a grid symmetric about 0")
    _check_dims(sys, ea, eb)
    ta, tb = time_reversal(ea), time_reversal(eb)
    ka = class_operator(ta, sys)
    kb = class_operator(tb, sys)
    d_t = complex(np.trace(ka @ sys.rho0 @ kb.conj().T))
    return abs(d_t - decoherence_functional(b, a, sys))
