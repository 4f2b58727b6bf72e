"""Gaussian smearing of histories and the approach to a classical measure.

A cell is a tuple of centers, one per grid time. Its effect history is the
chain of Heisenberg-picture Gaussians

    G(x) = exp(-(a - x)^2 / (2 sqrt V))

(earliest time leftmost) and cells are paired with the usual decoherence
functional ``d(c, c') = Tr(C_c^dag rho0 C_c')``.

Interference is measured against a commuting surrogate: the same Gaussian
weights applied to the probabilities of sharp eigenvalue paths,

    d_cl(c, c') = sum_x p_sharp(x) prod_k g_c(x_k) g_c'(x_k).

For commuting Heisenberg observables ``d = d_cl`` exactly, so the
decoherence ratio ``max |d - d_cl| / sqrt(d_cc d_c'c')`` vanishes there.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .hilbert import DEFAULT_TOL, as_operator, is_hermitian
from .histories import SystemSpec, TimeGrid, _grid, chain_operator
from .phasespace import displacement

__all__ = [
    "gaussian_pos_operator",
    "gaussian_weight",
    "SmearedHistorySet",
    "smeared_decoherence",
    "smeared_matrix",
    "eigen_levels",
    "sharp_path_probabilities",
    "classical_surrogate",
    "decoherence_ratio",
    "OnsetRow",
    "decoherence_onset",
    "ProbabilityTable",
    "extracted_probabilities",
    "KolmogorovResult",
    "kolmogorov_residual",
    "classical_generating_functional",
    "mean_path",
    "transfer_matrix_probabilities",
    "overlap_leak",
    "coherent_cell_operator",
    "PhaseCellSet",
    "phase_cell_matrix",
    "phase_cell_onset",
]


def gaussian_weight(x, center: float, V: float):
    return np.exp(-(np.asarray(x) - center) ** 2 / (2 * np.sqrt(V)))


def gaussian_pos_operator(center: float, V: float, a, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``exp(-(a - center)^2 / (2 sqrt V))`` by spectral calculus."""
    if not V > 0:
        raise ValueError("V must be positive")
    a = np.asarray(a, dtype=np.complex128)
    if not is_hermitian(a, tol):
        raise ValueError("observable must be Hermitian")
    w, v = np.linalg.eigh((a + a.conj().T) / 2)
    return (v * gaussian_weight(w, center, V)) @ v.conj().T


@dataclass(frozen=True, eq=False)
class SmearedHistorySet:
    grid: TimeGrid
    cells: tuple[tuple[float, ...], ...]
    sys: SystemSpec
    observable: np.ndarray

    def __post_init__(self):
        grid = _grid(self.grid)
        cells = tuple(tuple(float(x) for x in c) for c in self.cells)
        if not cells:
            raise ValueError("need at least one cell")
        if any(len(c) != len(grid) for c in cells):
            raise ValueError("every cell needs one center per grid time")
        if len(set(cells)) != len(cells):
            raise ValueError("cells must be distinct")
        a = as_operator(self.observable, self.sys.dim)
        if not is_hermitian(a, self.sys.tol):
            raise ValueError("observable must be Hermitian")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "observable", a)

    @classmethod
    def product_cells(cls, grid, centers, sys, observable) -> "SmearedHistorySet":
        """Every combination of ``centers`` over the grid times."""
        grid = _grid(grid)
        return cls(grid, tuple(product(centers, repeat=len(grid))), sys, observable)

    @property
    def n(self) -> int:
        return len(self.grid)


def _effect_chain(cell, V, a, sys: SystemSpec, grid: TimeGrid) -> np.ndarray:
    return chain_operator(grid.times, [gaussian_pos_operator(c, V, a) for c in cell], sys.evolution)


def smeared_decoherence(cell_a, cell_b, V: float, a, sys: SystemSpec, grid) -> complex:
    grid = _grid(grid)
    if len(cell_a) != len(grid) or len(cell_b) != len(grid):
        raise ValueError("cells must have one center per grid time")
    ca = _effect_chain(cell_a, V, a, sys, grid)
    cb = _effect_chain(cell_b, V, a, sys, grid)
    return complex(np.trace(ca.conj().T @ sys.rho0 @ cb))


def smeared_matrix(hset: SmearedHistorySet, V: float) -> np.ndarray:
    chains = [_effect_chain(c, V, hset.observable, hset.sys, hset.grid) for c in hset.cells]
    left = [c.conj().T @ hset.sys.rho0 for c in chains]
    return np.array([[np.trace(l @ r) for r in chains] for l in left])


def eigen_levels(a, tol: float = 1e-9) -> tuple[np.ndarray, list[np.ndarray]]:
    """Distinct eigenvalues of ``a`` and their spectral projectors."""
    w, v = np.linalg.eigh(np.asarray(a, dtype=np.complex128))
    levels, projs = [], []
    for i, x in enumerate(w):
        if levels and abs(x - levels[-1]) <= tol:
            projs[-1] += np.outer(v[:, i], v[:, i].conj())
        else:
            levels.append(x)
            projs.append(np.outer(v[:, i], v[:, i].conj()))
    return np.array(levels), projs


def sharp_path_probabilities(hset: SmearedHistorySet) -> dict[tuple[float, ...], float]:
    """``Tr(C_x^dag rho0 C_x)`` for every eigenvalue path with spectral projectors."""
    levels, projs = eigen_levels(hset.observable)
    out = {}
    for idx in product(range(len(levels)), repeat=hset.n):
        c = chain_operator(hset.grid.times, [projs[i] for i in idx], hset.sys.evolution)
        out[tuple(float(levels[i]) for i in idx)] = float(np.trace(c.conj().T @ hset.sys.rho0 @ c).real)
    return out


def classical_surrogate(hset: SmearedHistorySet, V: float, sharp=None) -> np.ndarray:
    sharp = sharp_path_probabilities(hset) if sharp is None else sharp
    paths = np.array(list(sharp.keys()))
    probs = np.array(list(sharp.values()))
    cells = np.array(hset.cells)
    # g[c, x] = prod_k g(x_k; c_k)
    g = np.prod(gaussian_weight(paths[None, :, :], cells[:, None, :], V), axis=2)
    return (g * probs[None, :]) @ g.T


def decoherence_ratio(hset: SmearedHistorySet, V: float) -> tuple[float, float]:
    """Interference ratio against the commuting surrogate, and the bare off-diagonal ratio.

    The bare ratio ``max |d_ij| / sqrt(d_ii d_jj)`` is reported for
    reference; it tends to 1 as V grows because wide cells overlap
    classically, not because of interference.
    """
    d = smeared_matrix(hset, V)
    dcl = classical_surrogate(hset, V)
    diag = np.sqrt(np.clip(np.diag(d).real, 1e-300, None))
    norm = np.outer(diag, diag)
    off = ~np.eye(len(hset.cells), dtype=bool)
    if not off.any():
        return 0.0, 0.0
    ratio = float((np.abs(d - dcl) / norm)[off].max())
    bare = float((np.abs(d) / norm)[off].max())
    return ratio, bare


@dataclass(frozen=True)
class OnsetRow:
    V: float
    ratio: float
    bare_ratio: float


def decoherence_onset(hset: SmearedHistorySet, V_sweep) -> list[OnsetRow]:
    return [OnsetRow(float(V), *decoherence_ratio(hset, float(V))) for V in V_sweep]


@dataclass(frozen=True)
class ProbabilityTable:
    cells: tuple[tuple[float, ...], ...]
    probabilities: np.ndarray
    raw: np.ndarray
    scale: float
    family_sum: float
    ratio: float
    approximate: bool

    @property
    def normalized(self) -> np.ndarray:
        return self.probabilities / self.family_sum


def extracted_probabilities(hset: SmearedHistorySet, V: float, threshold: float = 0.1,
                            tol: float = DEFAULT_TOL) -> ProbabilityTable:
    """``p = d(c, c) / V^n`` per cell, flagged approximate above ``threshold``."""
    raw = np.array([smeared_decoherence(c, c, V, hset.observable, hset.sys, hset.grid).real
                    for c in hset.cells])
    if np.any(raw < -tol):
        raise ArithmeticError(f"negative diagonal value {raw.min():.3e}")
    scale = float(V) ** hset.n
    probs = np.clip(raw, 0.0, None) / scale
    ratio = decoherence_ratio(hset, V)[0] if len(hset.cells) > 1 else 0.0
    return ProbabilityTable(hset.cells, probs, raw, scale, float(probs.sum()), ratio, ratio > threshold)


@dataclass(frozen=True)
class KolmogorovResult:
    residual: float
    bookkeeping: float
    slot: int


def kolmogorov_residual(hset: SmearedHistorySet, V: float, slot: int = 0) -> KolmogorovResult:
    """Additivity of the smeared diagonal under summing over one time slot.

    Cells are grouped by their centers away from ``slot``. For each group
    the fine values, divided by the mean Gaussian partition-of-unity factor
    ``c = mean_x sum_k g_k(x)^2`` over the spectrum, are compared with the
    value of the coarse history that omits ``slot``. The residual is the
    largest mismatch relative to the coarse family sum. ``bookkeeping`` is
    ``max_x |sum_k g_k(x)^2 / c - 1|``, the part of any mismatch due to the
    Gaussians not summing to a constant.
    """
    if hset.n < 2:
        raise ValueError("need at least two times to marginalise")
    if not 0 <= slot < hset.n:
        raise IndexError("slot out of range")
    levels, _ = eigen_levels(hset.observable)
    coarse_times = TimeGrid(tuple(t for k, t in enumerate(hset.grid.times) if k != slot))
    groups: dict[tuple[float, ...], list[tuple[float, ...]]] = {}
    for c in hset.cells:
        groups.setdefault(c[:slot] + c[slot + 1:], []).append(c)
    centers = sorted({c[slot] for c in hset.cells})
    s = sum(gaussian_weight(levels, x, V) ** 2 for x in centers)
    cfac = float(np.mean(s))
    bookkeeping = float(np.max(np.abs(s / cfac - 1.0)))
    a, sys = hset.observable, hset.sys
    fine, coarse = [], []
    for key, members in groups.items():
        fine.append(sum(smeared_decoherence(c, c, V, a, sys, hset.grid).real for c in members) / cfac)
        coarse.append(smeared_decoherence(key, key, V, a, sys, coarse_times).real)
    fine, coarse = np.array(fine), np.array(coarse)
    residual = float(np.max(np.abs(fine - coarse)) / max(coarse.sum(), 1e-300))
    return KolmogorovResult(residual, bookkeeping, slot)


def classical_generating_functional(hset: SmearedHistorySet, V: float, J,
                                    table: ProbabilityTable | None = None) -> complex:
    """``sum_cells p(c) exp(i sum_k c_k J_k)`` over the extracted measure."""
    J = np.asarray(getattr(J, "values", J), dtype=float).ravel()
    if J.size != hset.n:
        raise ValueError("J needs one value per grid time")
    table = extracted_probabilities(hset, V) if table is None else table
    phases = np.exp(1j * np.array(hset.cells) @ J)
    return complex(np.sum(table.probabilities * phases))


def mean_path(hset: SmearedHistorySet, V: float, table: ProbabilityTable | None = None) -> np.ndarray:
    table = extracted_probabilities(hset, V) if table is None else table
    return (table.probabilities @ np.array(hset.cells)) / table.family_sum


def transfer_matrix_probabilities(hset: SmearedHistorySet) -> dict[tuple[float, ...], float]:
    """Markov-chain path probabilities in the eigenbasis of the observable.

    ``p0`` is the occupation of each eigenvector at the first time and the
    step matrices are ``|<e_j|U(dt)|e_i>|^2``. Paths are labelled by
    eigenvalue, summing eigenvectors that share one. This matches the
    quantum path probabilities only when the Heisenberg observables at the
    grid times commute.
    """
    w, v = np.linalg.eigh(hset.observable)
    levels, _ = eigen_levels(hset.observable)
    label = np.array([int(np.argmin(np.abs(levels - x))) for x in w])
    evo = hset.sys.evolution
    times = hset.grid.times
    u0 = evo.u(times[0])
    rho_t = u0 @ hset.sys.rho0 @ u0.conj().T
    p = np.einsum("ji,jk,ki->i", v.conj(), rho_t, v).real
    steps = [np.abs(v.conj().T @ evo.u(t1 - t0) @ v) ** 2 for t0, t1 in zip(times, times[1:])]
    out: dict[tuple[float, ...], float] = {}
    dim = len(w)
    for idx in product(range(dim), repeat=hset.n):
        prob = p[idx[0]]
        for k, tm in enumerate(steps):
            prob *= tm[idx[k + 1], idx[k]]
        key = tuple(float(levels[label[i]]) for i in idx)
        out[key] = out.get(key, 0.0) + float(prob)
    return out


def overlap_leak(hset: SmearedHistorySet, V: float) -> np.ndarray:
    """Per-cell bound ``max_{x != c} prod_k g(x_k; c_k)^2`` over eigenvalue paths.

    In the commuting case ``|d(c, c) - P(c)|`` cannot exceed it when the cell
    centers are eigenvalues.
    """
    levels, _ = eigen_levels(hset.observable)
    paths = np.array(list(product(levels, repeat=hset.n)))
    out = []
    for c in hset.cells:
        g2 = np.prod(gaussian_weight(paths, np.array(c), V) ** 2, axis=1)
        own = np.all(np.isclose(paths, np.array(c)), axis=1)
        out.append(float(g2[~own].max(initial=0.0)))
    return np.array(out)


# phase-space cells -----------------------------------------------------------

def coherent_cell_operator(center, V: float, spec) -> np.ndarray:
    """``int dmu(z) exp(-|alpha(z) - alpha(c)|^2 / (2 sqrt V)) |z><z|``.

    Distances use the coherent-state metric ``|d alpha|^2``. The integral is
    ``D(c) diag(mu^(n+1)) D(c)^dag`` with ``mu = 2 sqrt V / (2 sqrt V + 1)``,
    a positive operator below the identity.
    """
    if not V > 0:
        raise ValueError("V must be positive")
    mu = 2 * np.sqrt(V) / (2 * np.sqrt(V) + 1)
    d = displacement(center, spec)
    return (d * mu ** (np.arange(spec.ncut) + 1.0)) @ d.conj().T


@dataclass(frozen=True, eq=False)
class PhaseCellSet:
    """Cells given by one phase-space center ``(q, p)`` per grid time."""

    grid: TimeGrid
    cells: tuple[tuple[tuple[float, float], ...], ...]
    sys: SystemSpec
    spec: object

    def __post_init__(self):
        grid = _grid(self.grid)
        cells = tuple(tuple((float(q), float(p)) for q, p in c) for c in self.cells)
        if not cells or any(len(c) != len(grid) for c in cells):
            raise ValueError("every cell needs one center per grid time")
        if len(set(cells)) != len(cells):
            raise ValueError("cells must be distinct")
        if self.sys.dim != self.spec.ncut:
            raise ValueError("system dimension must equal ncut")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def product_cells(cls, grid, centers, sys, spec) -> "PhaseCellSet":
        grid = _grid(grid)
        return cls(grid, tuple(product([tuple(c) for c in centers], repeat=len(grid))), sys, spec)


def phase_cell_matrix(pset: PhaseCellSet, V: float) -> np.ndarray:
    chains = [chain_operator(pset.grid.times, [coherent_cell_operator(z, V, pset.spec) for z in c],
                             pset.sys.evolution) for c in pset.cells]
    left = [c.conj().T @ pset.sys.rho0 for c in chains]
    return np.array([[np.trace(l @ r) for r in chains] for l in left])


def phase_cell_onset(pset: PhaseCellSet, V_sweep) -> list[OnsetRow]:
    """Interference witness ``max |Im d_ij| / sqrt(d_ii d_jj)`` per V.

    Phase-space cells have no sharp eigenvalue paths, so the commuting
    surrogate is unavailable. Commuting positive effects give a real
    ``d``, which makes the imaginary part a surrogate-free witness.
    """
    rows = []
    for V in V_sweep:
        d = phase_cell_matrix(pset, float(V))
        diag = np.sqrt(np.clip(np.diag(d).real, 1e-300, None))
        norm = np.outer(diag, diag)
        off = ~np.eye(len(pset.cells), dtype=bool)
        rows.append(OnsetRow(float(V), float((np.abs(d.imag) / norm)[off].max()),
                             float((np.abs(d) / norm)[off].max())))
    return rows
