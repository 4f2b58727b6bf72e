"""Discrete projective geometry: Fubini-Study increments and Pancharatnam phases.

Phase sums are accumulated step by step, each step on the principal branch,
and only the total is reduced to (-pi, pi].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import DEFAULT_TOL, frozen, projector_onto
from .histories import HistoryProposition, SystemSpec, TimeGrid, _grid, decoherence_functional

__all__ = [
    "StatePath",
    "wrap_phase",
    "fs_increment",
    "pancharatnam_product",
    "pancharatnam_phase",
    "berry_phase_open_path",
    "bloch_state",
    "bloch_circle_path",
    "geodesic_path",
    "richardson",
    "s_operator_matrix_element",
    "path_history",
    "path_action",
    "action_phase_decoherence",
    "operator_phase_decoherence",
]


def wrap_phase(x: float) -> float:
    """Reduce an angle to (-pi, pi]."""
    y = float(np.mod(x + np.pi, 2 * np.pi) - np.pi)
    return np.pi if y == -np.pi else y


@dataclass(frozen=True, eq=False)
class StatePath:
    grid: TimeGrid
    states: tuple[np.ndarray, ...]
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        grid = _grid(self.grid)
        states = tuple(frozen(np.asarray(s).ravel()) for s in self.states)
        if len(states) != len(grid):
            raise ValueError(f"{len(grid)} times but {len(states)} states")
        if len({s.size for s in states}) != 1:
            raise ValueError("states have different dimensions")
        for k, s in enumerate(states):
            if abs(np.linalg.norm(s) - 1.0) > self.tol:
                raise ValueError(f"state {k} is not normalized")
        for k in range(len(states) - 1):
            if abs(np.vdot(states[k], states[k + 1])) <= self.tol:
                raise ValueError(f"states {k} and {k + 1} are orthogonal")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "states", states)

    @classmethod
    def from_states(cls, states, times=None, tol: float = DEFAULT_TOL) -> "StatePath":
        states = [np.asarray(s, dtype=np.complex128).ravel() for s in states]
        if times is None:
            times = np.arange(len(states), dtype=float)
        return cls(TimeGrid(tuple(times)), tuple(s / np.linalg.norm(s) for s in states), tol)

    def __len__(self):
        return len(self.states)

    def reversed(self) -> "StatePath":
        t = self.grid.times
        return StatePath(TimeGrid(tuple(t[0] + t[-1] - x for x in reversed(t))),
                         tuple(reversed(self.states)), self.tol)

    def regauged(self, phases) -> "StatePath":
        phases = np.asarray(phases, dtype=float)
        return StatePath(self.grid, tuple(np.exp(1j * f) * s for f, s in zip(phases, self.states)),
                         self.tol)


def fs_increment(u, v, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Discrete metric ``ds^2`` and connection phase ``-arg<u|v>`` of one step."""
    u = np.asarray(u, dtype=np.complex128).ravel()
    v = np.asarray(v, dtype=np.complex128).ravel()
    for s in (u, v):
        if abs(np.linalg.norm(s) - 1.0) > tol:
            raise ValueError("fs_increment needs unit vectors")
    ov = np.vdot(u, v)
    if abs(ov) <= tol:
        raise ValueError("zero overlap: no connection phase")
    dv = v - u
    ds2 = np.vdot(dv, dv).real - abs(np.vdot(u, dv)) ** 2
    return float(max(ds2, 0.0)), float(-np.angle(ov))


def _chain(path: StatePath, close: bool) -> list[complex]:
    s = path.states
    factors = [np.vdot(s[i], s[i - 1]) for i in range(1, len(s))]
    if close:
        factors.insert(0, np.vdot(s[0], s[-1]))
    return factors


def _product(factors, tol) -> tuple[float, float]:
    mods = np.abs(factors)
    if np.any(mods <= tol):
        raise ValueError("zero overlap in Pancharatnam chain")
    return float(np.prod(mods)), float(np.sum(np.angle(factors)))


def pancharatnam_product(path: StatePath, close: bool = True) -> complex:
    """``<psi_0|psi_n> prod_i <psi_i|psi_{i-1}>``; the first factor only if ``close``."""
    mod, phase = _product(_chain(path, close), path.tol)
    return mod * np.exp(1j * wrap_phase(phase))


def pancharatnam_phase(path: StatePath, close: bool = True, wrap: bool = True) -> float:
    """Accumulated argument of the Pancharatnam chain."""
    _, phase = _product(_chain(path, close), path.tol)
    return wrap_phase(phase) if wrap else phase


def berry_phase_open_path(path: StatePath) -> float:
    """Geometric phase of an open path closed by the geodesic between its ends."""
    if abs(np.vdot(path.states[0], path.states[-1])) <= path.tol:
        raise ValueError("endpoints are orthogonal; the geodesic closure is undefined")
    return pancharatnam_phase(path, close=True)


def bloch_state(theta: float, phi: float) -> np.ndarray:
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def bloch_circle_path(theta: float, n: int, turns: float = 1.0) -> StatePath:
    """``n`` steps around the circle of polar angle ``theta``; closed when ``turns`` is whole."""
    phis = 2 * np.pi * turns * np.arange(n + 1) / n
    return StatePath(TimeGrid(tuple(np.arange(n + 1, dtype=float))),
                     tuple(bloch_state(theta, f) for f in phis))


def geodesic_path(u, v, n: int) -> StatePath:
    """Points on the projective geodesic from ``u`` to ``v``."""
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    ov = np.vdot(u, v)
    v = v * np.exp(-1j * np.angle(ov))  # in-phase representative
    w = v - np.vdot(u, v) * u
    norm_w = np.linalg.norm(w)
    angle = np.arctan2(norm_w, np.vdot(u, v).real)
    w = w / norm_w if norm_w > 0 else w
    states = [np.cos(angle * s) * u + np.sin(angle * s) * w for s in np.linspace(0, 1, n + 1)]
    return StatePath.from_states(states)


def richardson(ns, values, order: int = 1) -> float:
    """Extrapolate ``values(n)`` to n -> inf assuming an ``n^-order`` leading error.

    Uses the two largest ``n``.
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    i = np.argsort(ns)
    (n1, n2), (v1, v2) = ns[i][-2:], values[i][-2:]
    r = (n2 / n1) ** order
    return float((r * v2 - v1) / (r - 1))


def s_operator_matrix_element(phi: StatePath, psi: StatePath) -> complex:
    """Discrete shift-operator element ``<phi_0|psi_n> prod_i <phi_i|psi_{i-1}>``."""
    if phi.grid.times != psi.grid.times:
        raise ValueError("paths must share a grid")
    a, b = phi.states, psi.states
    out = np.vdot(a[0], b[-1])
    for i in range(1, len(a)):
        out *= np.vdot(a[i], b[i - 1])
    return complex(out)


def path_history(path: StatePath) -> HistoryProposition:
    """Rank-one projector history through the states of ``path``."""
    return HistoryProposition(path.grid, tuple(projector_onto(s) for s in path.states), path.tol)


def path_action(path: StatePath, hamiltonian) -> complex:
    """Discretised action with ``exp(iS) = prod <psi_{k+1}|psi_k> exp(-i dt <H>)``.

    ``<H>`` is averaged over the two ends of each step. The imaginary part
    carries the overlap moduli.
    """
    h = np.asarray(hamiltonian, dtype=np.complex128)
    s = path.states
    t = np.asarray(path.grid.times)
    energies = np.array([np.vdot(x, h @ x).real for x in s])
    logs = sum(np.log(np.vdot(s[k + 1], s[k])) for k in range(len(s) - 1))
    drift = np.sum(np.diff(t) * 0.5 * (energies[1:] + energies[:-1]))
    return complex(-1j * logs - drift)


def _boundary_weight(path, path2, sys: SystemSpec) -> complex:
    u0 = sys.evolution.u(path.grid.times[0])
    rho_t0 = u0 @ sys.rho0 @ u0.conj().T
    return complex(np.vdot(path.states[0], rho_t0 @ path2.states[0])
                   * np.vdot(path2.states[-1], path.states[-1]))


def action_phase_decoherence(path: StatePath, path2: StatePath, sys: SystemSpec) -> complex:
    """Boundary-weighted ``exp(i S[path] - i conj(S[path2]))``."""
    if path.grid.times != path2.grid.times:
        raise ValueError("paths must share a grid")
    weight = _boundary_weight(path, path2, sys)
    if abs(weight) <= path.tol:
        raise ValueError("endpoint overlap vanishes")
    s1 = path_action(path, sys.hamiltonian)
    s2 = path_action(path2, sys.hamiltonian)
    return complex(weight * np.exp(1j * s1 - 1j * np.conj(s2)))


def operator_phase_decoherence(path: StatePath, path2: StatePath, sys: SystemSpec) -> complex:
    """The same pairing evaluated on rank-one projector histories."""
    return decoherence_functional(path_history(path), path_history(path2), sys)
