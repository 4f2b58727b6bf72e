"""Wigner-Weyl symbols on the truncated Fock space.

``Delta(q, p) = 2 D(q, p) P D(q, p)^dag`` with ``P`` the parity operator,
``F_A(q, p) = Tr(Delta(q, p) A)`` and phase-space integrals carry the measure
``dq dp / (2 pi)``, so that

    int F_A = Tr A,        int F_A F_B = Tr(A B).

Only the disc ``(omega q^2 + p^2 / omega) / 2 <= ncut / 4`` (``q^2 + p^2 <= ncut/2``
at omega = 1) is trusted; nodes outside are flagged.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .histories import Evolution, SystemSpec, _grid
from .kernels import displacement_matrix, wigner_symbol_values
from .phasespace import FockSpec, TruncationError, alpha_of

__all__ = [
    "PhaseSpaceGrid",
    "WignerField",
    "RegionWarning",
    "calibrated_grid",
    "valid_mask",
    "in_valid_region",
    "parity",
    "delta_operator",
    "delta_operator_fourier",
    "delta_trace",
    "wigner_transform",
    "symbol_at",
    "fock_window",
    "regularize",
    "trace_identities",
    "poisson_bracket",
    "moyal_consistency_check",
    "multi_time_wigner",
    "marginal_over_first",
    "additivity_check",
]


class RegionWarning(UserWarning):
    """Evaluation outside the truncation-valid phase-space disc."""


def _trapezoid_weights(lo, hi, n):
    w = np.full(n, (hi - lo) / (n - 1))
    w[[0, -1]] *= 0.5
    return w


@dataclass(frozen=True)
class PhaseSpaceGrid:
    qmin: float
    qmax: float
    pmin: float
    pmax: float
    nq: int
    np: int
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.nq < 8 or self.np < 8:
            raise ValueError("grid needs at least 8 points per axis")
        if not (self.qmax > self.qmin and self.pmax > self.pmin):
            raise ValueError("grid bounds must be increasing")
        w = np.outer(_trapezoid_weights(self.qmin, self.qmax, self.nq),
                     _trapezoid_weights(self.pmin, self.pmax, self.np))
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def q(self) -> np.ndarray:
        return np.linspace(self.qmin, self.qmax, self.nq)

    @property
    def p(self) -> np.ndarray:
        return np.linspace(self.pmin, self.pmax, self.np)

    @property
    def area(self) -> float:
        return (self.qmax - self.qmin) * (self.pmax - self.pmin)

    @property
    def shape(self):
        return (self.nq, self.np)

    def mesh(self):
        return np.meshgrid(self.q, self.p, indexing="ij")

    def refined(self, factor: int = 2) -> "PhaseSpaceGrid":
        """Same box with ``factor`` times as many intervals per axis."""
        return PhaseSpaceGrid(self.qmin, self.qmax, self.pmin, self.pmax,
                              factor * (self.nq - 1) + 1, factor * (self.np - 1) + 1)

    def integrate(self, values) -> complex:
        """``int dq dp / (2 pi)`` by the trapezoid rule."""
        return complex(np.sum(self.weights * np.asarray(values).reshape(self.shape)) / (2 * np.pi))


def calibrated_grid(spec: FockSpec, n: int = 65) -> PhaseSpaceGrid:
    """Square box of half-side ``sqrt(ncut/2)``, scaled by omega on each axis."""
    r = np.sqrt(spec.ncut / 2)
    rq, rp = r / np.sqrt(spec.omega), r * np.sqrt(spec.omega)
    return PhaseSpaceGrid(-rq, rq, -rp, rp, n, n)


def valid_mask(grid: PhaseSpaceGrid, spec: FockSpec, shrink: float = 1.0) -> np.ndarray:
    q, p = grid.mesh()
    return (spec.omega * q ** 2 + p ** 2 / spec.omega) <= shrink * spec.ncut / 2


def in_valid_region(q: float, p: float, spec: FockSpec) -> bool:
    return (spec.omega * q * q + p * p / spec.omega) <= spec.ncut / 2


def parity(n: int) -> np.ndarray:
    return np.diag((-1.0) ** np.arange(n)).astype(np.complex128)


def delta_operator(q: float, p: float, spec: FockSpec, strict: bool = True) -> np.ndarray:
    """``2 D(q,p) P D(q,p)^dag``, assembled exactly as ``2 D(2 alpha) P``."""
    if not in_valid_region(q, p, spec):
        if strict:
            raise TruncationError(f"({q}, {p}) is outside the valid region")
        warnings.warn(f"({q}, {p}) is outside the valid region", RegionWarning, stacklevel=2)
    alpha = alpha_of((q, p), spec.omega)
    d2 = displacement_matrix(2 * alpha, spec.ncut)
    return 2.0 * d2 * ((-1.0) ** np.arange(spec.ncut))[None, :]


def delta_operator_fourier(q: float, p: float, spec: FockSpec, radius: float = 12.0,
                           npts: int = 241, block: int | None = None) -> np.ndarray:
    """Reference ``(1/2pi) int dchi dxi exp(-i(xi q - chi p)) D(chi, xi)`` on a low block.

    Slow quadrature over a square (chi, xi) box. The displacement is built on
    ``ncut + 40`` levels so the block is free of truncation effects.
    """
    block = spec.ncut // 4 if block is None else block
    big = spec.ncut + 40
    xs = np.linspace(-radius, radius, npts)
    w = _trapezoid_weights(-radius, radius, npts)
    acc = np.zeros((block, block), dtype=np.complex128)
    s = np.sqrt(spec.omega / 2)
    for i, chi in enumerate(xs):
        for j, xi in enumerate(xs):
            beta = complex(s * chi, xi / (2 * s))
            if abs(beta) ** 2 > big:
                continue
            d = displacement_matrix(beta, big)[:block, :block]
            acc += w[i] * w[j] * np.exp(-1j * (xi * q - chi * p)) * d
    return acc / (2 * np.pi)


def delta_trace(q: float, p: float, spec: FockSpec, method: str = "window") -> float:
    """Trace of ``Delta(q, p)`` with the cutoff parity artefact removed.

    The truncated trace alternates with ``ncut``. ``"window"`` tapers level
    ``n`` by :func:`fock_window`, ``"cesaro"`` averages the cutoffs ``ncut``
    and ``ncut - 1``, ``"raw"`` returns the bare truncated trace.
    """
    alpha = alpha_of((q, p), spec.omega)
    if method == "raw":
        return float(np.trace(delta_operator(q, p, spec, strict=False)).real)
    diag = 2.0 * np.diag(displacement_matrix(2 * alpha, spec.ncut)).real * (-1.0) ** np.arange(spec.ncut)
    if method == "window":
        return float(np.sum(diag * fock_window(spec) ** 2))
    if method == "cesaro":
        return float(0.5 * (diag.sum() + diag[:-1].sum()))
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True, eq=False)
class WignerField:
    grid: PhaseSpaceGrid
    values: np.ndarray
    valid: np.ndarray

    def integrate(self) -> complex:
        return self.grid.integrate(self.values)

    def max_imag(self) -> float:
        return float(np.abs(self.values.imag).max())

    def rows(self):
        """``(q, p, Re F, Im F, valid)`` per node, q-major."""
        q, p = self.grid.mesh()
        for qq, pp, f, ok in zip(q.ravel(), p.ravel(), self.values.ravel(), self.valid.ravel()):
            yield float(qq), float(pp), float(f.real), float(f.imag), bool(ok)


def _node_alphas(grid: PhaseSpaceGrid, spec: FockSpec) -> np.ndarray:
    q, p = grid.mesh()
    return np.sqrt(spec.omega / 2) * q + 1j * p / np.sqrt(2 * spec.omega)


def wigner_transform(a, grid: PhaseSpaceGrid, spec: FockSpec) -> WignerField:
    """``F(q, p) = Tr(Delta(q, p) a)`` at every node of ``grid``."""
    a = np.asarray(a, dtype=np.complex128)
    if a.shape != (spec.ncut, spec.ncut):
        raise ValueError(f"operator shape {a.shape} does not match ncut = {spec.ncut}")
    vals = wigner_symbol_values(a, _node_alphas(grid, spec)).reshape(grid.shape)
    vals.setflags(write=False)
    return WignerField(grid, vals, valid_mask(grid, spec))


def symbol_at(a, q: float, p: float, spec: FockSpec) -> complex:
    return complex(wigner_symbol_values(a, [alpha_of((q, p), spec.omega)])[0])


def fock_window(spec: FockSpec, fraction: float = 0.7, power: int = 8) -> np.ndarray:
    """Smooth level window ``exp(-(n / (fraction ncut))^power)``.

    Compressing an unbounded operator to the lowest ``ncut`` levels leaves a
    hard edge whose symbol rings through the whole valid disc. Tapering
    ``W A W`` removes the ringing while leaving low levels untouched.
    """
    n = np.arange(spec.ncut, dtype=float)
    return np.exp(-(n / (fraction * spec.ncut)) ** power)


def regularize(a, spec: FockSpec, **window) -> np.ndarray:
    w = fock_window(spec, **window)
    return w[:, None] * np.asarray(a, dtype=np.complex128) * w[None, :]


def trace_identities(a, b, grid: PhaseSpaceGrid, spec: FockSpec) -> dict:
    """Relative errors of ``int F_a = Tr a`` and ``int F_a F_b = Tr(a b)``."""
    fa = wigner_transform(a, grid, spec)
    fb = wigner_transform(b, grid, spec)
    tr_a = complex(np.trace(a))
    tr_ab = complex(np.trace(np.asarray(a) @ np.asarray(b)))
    int_a = fa.integrate()
    int_ab = grid.integrate(fa.values * fb.values)
    scale_a = max(abs(tr_a), float(np.linalg.norm(a, "fro")))
    scale_ab = max(abs(tr_ab), float(np.linalg.norm(a, "fro") * np.linalg.norm(b, "fro")))
    return {
        "trace": tr_a, "integral": int_a, "trace_rel_err": abs(int_a - tr_a) / scale_a,
        "trace_ab": tr_ab, "integral_ab": int_ab, "product_rel_err": abs(int_ab - tr_ab) / scale_ab,
    }


def _d5(f, h, axis):
    """Fourth-order central difference; two edge rows on each side are left NaN."""
    out = np.full(f.shape, np.nan, dtype=f.dtype)
    sl = [slice(None)] * f.ndim

    def s(a, b):
        sl2 = list(sl)
        sl2[axis] = slice(a, f.shape[axis] + b if b else None)
        return f[tuple(sl2)]

    core = [slice(None)] * f.ndim
    core[axis] = slice(2, -2)
    out[tuple(core)] = (s(0, -4) - 8 * s(1, -3) + 8 * s(3, -1) - s(4, 0)) / (12 * h)
    return out


def poisson_bracket(fa, fb, grid: PhaseSpaceGrid) -> np.ndarray:
    """``{f, g} = f_q g_p - f_p g_q`` by fourth-order finite differences."""
    hq = (grid.qmax - grid.qmin) / (grid.nq - 1)
    hp = (grid.pmax - grid.pmin) / (grid.np - 1)
    return _d5(fa, hq, 0) * _d5(fb, hp, 1) - _d5(fa, hp, 1) * _d5(fb, hq, 0)


def moyal_consistency_check(a, b, grid: PhaseSpaceGrid, spec: FockSpec, shrink: float = 0.5,
                            window: bool = True) -> float:
    """Sup of ``|F_{[a,b]/i} - {F_a, F_b}|`` over interior valid nodes.

    Intended for polynomials of degree <= 2 in q and p, for which the Moyal
    bracket equals the Poisson bracket. Operators are tapered by
    ``fock_window`` first (see there); ``shrink`` scales the squared radius
    of the region where the sup is taken.
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    comm = (a @ b - b @ a) / 1j
    if window:
        a, b, comm = (regularize(x, spec) for x in (a, b, comm))
    fa = wigner_transform(a, grid, spec).values
    fb = wigner_transform(b, grid, spec).values
    fc = wigner_transform(comm, grid, spec).values
    pb = poisson_bracket(fa, fb, grid)
    mask = valid_mask(grid, spec, shrink) & np.isfinite(pb)
    if not mask.any():
        raise ValueError("no interior nodes in the checked region")
    return float(np.abs(fc - pb)[mask].max())


# multi-time pseudo-distributions -------------------------------------------

def _chain(times, nodes, evo: Evolution, spec: FockSpec) -> np.ndarray:
    out = np.eye(spec.ncut, dtype=np.complex128)
    for t, (q, p) in zip(times, nodes):
        out = out @ evo.heisenberg(delta_operator(q, p, spec), float(t))
    return out


def _validate_chain(times, nodes, label):
    times = tuple(times)
    nodes = [tuple(map(float, x)) for x in nodes]
    if len(times) != len(nodes):
        raise ValueError(f"{label}: {len(times)} times but {len(nodes)} nodes")
    if times:
        _grid(times)
    if len(times) > 3:
        raise ValueError(f"{label}: chains longer than 3 are outside desk scale")
    return times, nodes


def multi_time_wigner(times_a, nodes_a, times_b, nodes_b, sys: SystemSpec, spec: FockSpec) -> complex:
    """``Tr(C_a^dag rho0 C_b)`` with ``C`` products of Heisenberg ``Delta`` operators.

    Chains are ordered earliest time leftmost. Either chain may be empty.
    """
    times_a, nodes_a = _validate_chain(times_a, nodes_a, "chain a")
    times_b, nodes_b = _validate_chain(times_b, nodes_b, "chain b")
    if sys.dim != spec.ncut:
        raise ValueError("system dimension must equal ncut")
    ca = _chain(times_a, nodes_a, sys.evolution, spec)
    cb = _chain(times_b, nodes_b, sys.evolution, spec)
    return complex(np.trace(ca.conj().T @ sys.rho0 @ cb))


def marginal_over_first(times_a, nodes_a_rest, times_b, nodes_b, sys: SystemSpec, spec: FockSpec,
                        grid: PhaseSpaceGrid) -> complex:
    """``int dq1 dp1 / (2 pi) W(x1, rest)`` with ``x1`` the first node of chain a.

    The integrand is the symbol of ``U(t1) rho0 C_b R^dag U(t1)^dag`` where
    ``R`` is the rest of chain a, so one grid transform does the whole sweep.
    """
    times_a = tuple(times_a)
    nodes_a_rest = [tuple(map(float, x)) for x in nodes_a_rest]
    if len(times_a) != len(nodes_a_rest) + 1:
        raise ValueError("chain a needs one more time than fixed nodes")
    _validate_chain(times_a, [(0.0, 0.0)] + nodes_a_rest, "chain a")
    times_b, nodes_b = _validate_chain(times_b, nodes_b, "chain b")
    evo = sys.evolution
    rest = _chain(times_a[1:], nodes_a_rest, evo, spec)
    cb = _chain(times_b, nodes_b, evo, spec)
    u1 = evo.u(times_a[0])
    b = u1 @ sys.rho0 @ cb @ rest.conj().T @ u1.conj().T
    return wigner_transform(b, grid, spec).integrate()


def additivity_check(n: int, m: int, sys: SystemSpec, spec: FockSpec, grid: PhaseSpaceGrid,
                     times_a=None, nodes_a_rest=(), times_b=(), nodes_b=()) -> float:
    """Relative residual between the x1-marginal of ``W_{n,m}`` and ``W_{n-1,m}``.

    ``times_a`` has ``n`` entries; the first node of chain a is integrated
    over ``grid`` and ``nodes_a_rest`` fixes the other ``n - 1``.
    """
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    times_a = tuple(range(n)) if times_a is None else tuple(times_a)
    if len(times_a) != n or len(nodes_a_rest) != n - 1:
        raise ValueError("chain a must have n times and n - 1 fixed nodes")
    if len(times_b) != m or len(nodes_b) != m:
        raise ValueError("chain b must have m times and m nodes")
    marginal = marginal_over_first(times_a, nodes_a_rest, times_b, nodes_b, sys, spec, grid)
    reduced = multi_time_wigner(times_a[1:], nodes_a_rest, times_b, nodes_b, sys, spec)
    return float(abs(marginal - reduced) / max(abs(reduced), 1e-300))
