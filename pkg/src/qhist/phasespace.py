"""Weyl displacements and coherent states on a truncated Fock space.

Phase-space labels (chi, xi) map to the annihilation eigenvalue

    alpha = sqrt(omega/2) chi + i xi / sqrt(2 omega)

and the displacement is ``D(chi, xi) = exp(i (xi q - chi p))``, which shifts
position by chi and momentum by xi and obeys

    D(z1) D(z2) = exp(i/2 (xi1 chi2 - xi2 chi1)) D(z1 + z2).

The vacuum expectation is ``K = exp(-|alpha|^2 / 2)`` and coherent-state
overlaps follow from the group law,

    <z'|z> = exp(i/2 (xi chi' - chi xi')) K(z - z').
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .hilbert import DEFAULT_TOL, frozen, projector_onto
from .histories import HistoryProposition, SystemSpec, TimeGrid, _grid, decoherence_functional
from .kernels import displacement_matrix

__all__ = [
    "FockSpec",
    "PhasePoint",
    "PhasePath",
    "TruncationWarning",
    "TruncationError",
    "alpha_of",
    "annihilation",
    "number_operator",
    "position",
    "momentum",
    "oscillator_hamiltonian",
    "vacuum",
    "displacement",
    "coherent_state",
    "overlap",
    "vacuum_expectation",
    "expectation_functional",
    "calibrate_vacuum_exponent",
    "resolution_of_identity",
    "history_overlap",
    "path_distance",
    "coherent_history",
    "classical_action",
    "CoherentActionResult",
    "coherent_history_decoherence",
]


class TruncationWarning(UserWarning):
    """A phase-space point is close to the edge of the truncated Fock space."""


class TruncationError(ValueError):
    """A phase-space point lies beyond what the truncation can represent."""


@dataclass(frozen=True)
class FockSpec:
    ncut: int
    omega: float = 1.0

    def __post_init__(self):
        if int(self.ncut) != self.ncut or self.ncut < 2:
            raise ValueError("ncut must be an integer >= 2")
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        object.__setattr__(self, "ncut", int(self.ncut))
        object.__setattr__(self, "omega", float(self.omega))

    @property
    def warn_radius2(self) -> float:
        """``|alpha|^2`` beyond which truncation errors become visible."""
        return self.ncut / 4

    @property
    def hard_radius2(self) -> float:
        return float(self.ncut)


@dataclass(frozen=True)
class PhasePoint:
    chi: float
    xi: float

    def __post_init__(self):
        if not (np.isfinite(self.chi) and np.isfinite(self.xi)):
            raise ValueError("phase point must be finite")
        object.__setattr__(self, "chi", float(self.chi))
        object.__setattr__(self, "xi", float(self.xi))

    def __add__(self, other: "PhasePoint") -> "PhasePoint":
        return PhasePoint(self.chi + other.chi, self.xi + other.xi)

    def __sub__(self, other: "PhasePoint") -> "PhasePoint":
        return PhasePoint(self.chi - other.chi, self.xi - other.xi)

    def __neg__(self) -> "PhasePoint":
        return PhasePoint(-self.chi, -self.xi)


def _point(p) -> PhasePoint:
    return p if isinstance(p, PhasePoint) else PhasePoint(*p)


def alpha_of(p, omega: float = 1.0) -> complex:
    p = _point(p)
    return complex(np.sqrt(omega / 2) * p.chi, p.xi / np.sqrt(2 * omega))


@dataclass(frozen=True, eq=False)
class PhasePath:
    grid: TimeGrid
    points: np.ndarray

    def __post_init__(self):
        grid = _grid(self.grid)
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if pts.shape[0] != len(grid):
            raise ValueError(f"{len(grid)} times but {pts.shape[0]} points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("path points must be finite")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def __getitem__(self, k) -> PhasePoint:
        return PhasePoint(*self.points[k])

    @property
    def times(self):
        return self.grid.times

    def norm(self) -> float:
        """Discrete ``sum_t |z_t|``."""
        return float(np.sum(np.hypot(self.points[:, 0], self.points[:, 1])))

    def lipschitz(self) -> float:
        """Largest ``|z_{k+1} - z_k| / dt``; 0 for a single point."""
        if len(self) < 2:
            return 0.0
        dz = np.hypot(*np.diff(self.points, axis=0).T)
        return float(np.max(dz / np.diff(self.grid.times)))

    def alphas(self, omega: float = 1.0) -> np.ndarray:
        return np.sqrt(omega / 2) * self.points[:, 0] + 1j * self.points[:, 1] / np.sqrt(2 * omega)

    @classmethod
    def from_function(cls, fn, times) -> "PhasePath":
        times = np.asarray(times, dtype=float)
        return cls(TimeGrid(tuple(times)), np.array([fn(t) for t in times], dtype=float))


def annihilation(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(np.complex128)


def number_operator(n: int) -> np.ndarray:
    return np.diag(np.arange(n, dtype=float)).astype(np.complex128)


def position(spec: FockSpec) -> np.ndarray:
    a = annihilation(spec.ncut)
    return (a + a.conj().T) / np.sqrt(2 * spec.omega)


def momentum(spec: FockSpec) -> np.ndarray:
    a = annihilation(spec.ncut)
    return 1j * np.sqrt(spec.omega / 2) * (a.conj().T - a)


def oscillator_hamiltonian(spec: FockSpec) -> np.ndarray:
    """``omega a^dag a``; the zero-point energy is dropped."""
    return spec.omega * number_operator(spec.ncut)


def vacuum(spec: FockSpec) -> np.ndarray:
    v = np.zeros(spec.ncut, dtype=np.complex128)
    v[0] = 1.0
    return v


def _check_truncation(alpha: complex, spec: FockSpec, what: str):
    r2 = abs(alpha) ** 2
    if r2 > spec.hard_radius2:
        raise TruncationError(f"{what}: |alpha|^2 = {r2:.3g} exceeds ncut = {spec.ncut}")
    if r2 > spec.warn_radius2:
        warnings.warn(f"{what}: |alpha|^2 = {r2:.3g} > ncut/4, truncation error not negligible",
                      TruncationWarning, stacklevel=3)


def displacement(p, spec: FockSpec) -> np.ndarray:
    """Exact Fock-basis matrix elements of D(chi, xi) on the lowest ``ncut`` levels.

    The result is the compression of the true operator, so it is unitary only
    up to the weight that leaks past the cutoff.
    """
    alpha = alpha_of(p, spec.omega)
    _check_truncation(alpha, spec, "displacement")
    return displacement_matrix(alpha, spec.ncut)


def coherent_state(p, spec: FockSpec) -> np.ndarray:
    """``D(z)|0>``, i.e. the first column of the displacement matrix."""
    alpha = alpha_of(p, spec.omega)
    _check_truncation(alpha, spec, "coherent_state")
    k = np.arange(spec.ncut)
    with np.errstate(divide="ignore"):
        logmod = k * np.log(abs(alpha)) if alpha != 0 else np.where(k == 0, 0.0, -np.inf)
    amp = np.exp(logmod - 0.5 * gammaln(k + 1.0) - abs(alpha) ** 2 / 2)
    return frozen(amp * np.exp(1j * k * np.angle(alpha)))


def vacuum_expectation(p, omega: float = 1.0) -> float:
    """Closed form ``K(chi, xi) = <0|D(chi, xi)|0>``."""
    return float(np.exp(-abs(alpha_of(p, omega)) ** 2 / 2))


def overlap(zprime, z, omega: float = 1.0) -> complex:
    """Closed-form ``<z'|z>``."""
    zp, zz = _point(zprime), _point(z)
    phase = 0.5 * (zz.xi * zp.chi - zz.chi * zp.xi)
    return complex(np.exp(1j * phase) * vacuum_expectation(zz - zp, omega))


def expectation_functional(p, spec: FockSpec) -> tuple[complex, complex]:
    """Numerical ``<0|D(z)|0>`` on the truncated space and its principal logarithm."""
    k = complex(displacement(p, spec)[0, 0])
    if abs(k) == 0.0:
        raise ValueError("vacuum expectation underflowed")
    return k, complex(np.log(k))


def calibrate_vacuum_exponent(spec: FockSpec, chis=(0.1, 0.2, 0.4), xis=(0.1, 0.2, 0.4)) -> dict:
    """Fit ``Re W = -c (omega chi^2 + xi^2 / omega)`` along each axis.

    Returns the per-axis coefficients and their spread. With the
    ``|alpha|^2 / 2`` vacuum overlap the coefficient is 1/4.
    """
    cq = [-expectation_functional((c, 0.0), spec)[1].real / (spec.omega * c * c) for c in chis]
    cp = [-expectation_functional((0.0, x), spec)[1].real * spec.omega / (x * x) for x in xis]
    allc = np.array(cq + cp)
    return {"coefficient": float(allc.mean()), "chi_axis": cq, "xi_axis": cp,
            "spread": float(allc.max() - allc.min())}


def resolution_of_identity(spec: FockSpec, radius: float | None = None, npts: int = 81,
                           block: int | None = None) -> tuple[np.ndarray, float]:
    """Trapezoid quadrature of ``int dchi dxi / (2 pi) |z><z|``.

    Returns the integral restricted to the ``block`` lowest levels and the
    max deviation from the identity there.
    """
    radius = np.sqrt(spec.ncut / 2) if radius is None else radius
    block = max(1, spec.ncut // 10) if block is None else block
    xs = np.linspace(-radius, radius, npts)
    h = xs[1] - xs[0]
    w1 = np.full(npts, h)
    w1[[0, -1]] *= 0.5
    acc = np.zeros((block, block), dtype=np.complex128)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        for i, chi in enumerate(xs):
            for j, xi in enumerate(xs):
                v = coherent_state((chi, xi), spec)[:block]
                acc += w1[i] * w1[j] * np.outer(v, v.conj())
    acc /= 2 * np.pi
    return acc, float(np.abs(acc - np.eye(block)).max())


def history_overlap(za: PhasePath, zb: PhasePath, spec: FockSpec, tol: float = DEFAULT_TOL) -> complex:
    """``exp(sum_t log <zb_t|za_t>)`` with the closed-form overlap."""
    if za.times != zb.times:
        raise ValueError("paths must share a grid")
    logs = 0.0 + 0.0j
    for a, b in zip(za.points, zb.points):
        ov = overlap(b, a, spec.omega)
        if abs(ov) <= tol:
            raise ValueError("vanishing single-time overlap")
        logs += np.log(ov)
    return complex(np.exp(logs))


def path_distance(za: PhasePath, zb: PhasePath) -> float:
    return PhasePath(za.grid, za.points - zb.points).norm()


def coherent_history(z: PhasePath, spec: FockSpec) -> HistoryProposition:
    """Rank-one coherent projectors along ``z`` (renormalised after truncation)."""
    states = [coherent_state(z[k], spec) for k in range(len(z))]
    return HistoryProposition(z.grid, tuple(projector_onto(s) for s in states))


def classical_action(z: PhasePath, spec: FockSpec) -> complex:
    """Discretised action with ``exp(iS) = prod <z_{k+1}|z_k> exp(-i dt <H>)``.

    ``<z|H|z> = omega |alpha|^2`` is averaged over the ends of each step.
    """
    t = np.asarray(z.times)
    energy = spec.omega * np.abs(z.alphas(spec.omega)) ** 2
    logs = sum(np.log(overlap(z.points[k + 1], z.points[k], spec.omega)) for k in range(len(z) - 1))
    drift = np.sum(np.diff(t) * 0.5 * (energy[1:] + energy[:-1]))
    return complex(-1j * logs - drift)


@dataclass(frozen=True)
class CoherentActionResult:
    operator_side: complex
    action_side: complex
    modulus_discrepancy: float
    phase_discrepancy: float
    n: int


def coherent_history_decoherence(za: PhasePath, zb: PhasePath, spec: FockSpec,
                                 sys: SystemSpec | None = None,
                                 boundary_tol: float | None = 0.5) -> CoherentActionResult:
    """Compare ``d`` on coherent projector histories with the action exponential.

    ``sys`` defaults to the oscillator ``omega a^dag a`` in its vacuum. The
    action side carries the same boundary factors as the operator side,
    ``<za_0|rho(t_0)|zb_0> <zb_n|za_n>``, computed in closed form when
    ``rho0`` is the vacuum. Set ``boundary_tol=None`` to skip the check that
    both paths start and end within that distance of the origin.
    """
    if za.times != zb.times:
        raise ValueError("paths must share a grid")
    if boundary_tol is not None:
        for path in (za, zb):
            ends = np.hypot(*path.points[[0, -1]].T)
            if np.any(ends > boundary_tol):
                raise ValueError(f"path endpoints {ends} are farther than {boundary_tol} from the origin")
    if sys is None:
        sys = SystemSpec.pure(oscillator_hamiltonian(spec), vacuum(spec))
    d_op = decoherence_functional(coherent_history(za, spec), coherent_history(zb, spec), sys)

    u0 = sys.evolution.u(za.times[0])
    rho_t0 = u0 @ sys.rho0 @ u0.conj().T
    va = coherent_state(za[0], spec)
    vb = coherent_state(zb[0], spec)
    weight = np.vdot(va, rho_t0 @ vb) / (np.linalg.norm(va) * np.linalg.norm(vb))
    weight *= overlap(zb.points[-1], za.points[-1], spec.omega)
    s_a = classical_action(za, spec)
    s_b = classical_action(zb, spec)
    d_act = complex(weight * np.exp(1j * s_a - 1j * np.conj(s_b)))

    mod = abs(abs(d_op) - abs(d_act))
    phase = abs(np.angle(d_op * np.conj(d_act)))
    return CoherentActionResult(d_op, d_act, float(mod), float(phase), len(za))
