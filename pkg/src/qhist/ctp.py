"""Closed-time-path generating functionals and (r, s) correlators.

Everything is evaluated on the single-copy space through operator chains.
With ``X_J = prod_t exp(-i J(t) a(t))`` (earliest time leftmost) the
generating functional is

    Z[J+, J-] = d(X_{J+}, X_{J-}) = Tr(X_{J+}^dag rho0 X_{J-}),

so that ``Z[J, J] = 1`` and ``conj Z[J+, J-] = Z[J-, J+]``. The correlator

    G^(r,s) = (-i)^r i^s d^{r+s} Z / dJ+^r dJ-^s |_0
            = Tr(rho0 Tbar[a(s_1) ... a(s_s)] T[a(r_1) ... a(r_r)])

with ``T`` putting later times to the left and ``Tbar`` to the right.
Coincident times in one branch are ordered symmetrically (averaged over
orderings), which is only visible for distinct operators.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations, product

import numpy as np

from .hilbert import as_operator
from .histories import SystemSpec, TimeGrid, _grid
from .phasespace import FockSpec, PhasePath, displacement

__all__ = [
    "SmearingVector",
    "CorrelatorRequest",
    "CorrelatorResult",
    "ctp_generating_functional",
    "ordered_product",
    "direct_correlator",
    "fd_correlator",
    "correlator",
    "phase_space_ctp",
    "DEFAULT_STEP",
    "RESIDUAL_THRESHOLD",
]

DEFAULT_STEP = 1e-3
RESIDUAL_THRESHOLD = 1e-5


@dataclass(frozen=True, eq=False)
class SmearingVector:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        grid = _grid(self.grid)
        vals = np.asarray(self.values, dtype=float).ravel().copy()
        if vals.size != len(grid):
            raise ValueError(f"{len(grid)} times but {vals.size} values")
        if not np.all(np.isfinite(vals)):
            raise ValueError("smearing values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid) -> "SmearingVector":
        grid = _grid(grid)
        return cls(grid, np.zeros(len(grid)))


@dataclass(frozen=True)
class CorrelatorRequest:
    """``r`` time-ordered insertions at ``plus_times``, ``s`` anti-time-ordered at ``minus_times``."""

    plus_times: tuple[float, ...] = ()
    minus_times: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "plus_times", tuple(float(t) for t in self.plus_times))
        object.__setattr__(self, "minus_times", tuple(float(t) for t in self.minus_times))
        if self.r + self.s < 1:
            raise ValueError("a correlator needs at least one insertion")

    @property
    def r(self) -> int:
        return len(self.plus_times)

    @property
    def s(self) -> int:
        return len(self.minus_times)

    def check_grid(self, grid: TimeGrid):
        missing = set(self.plus_times + self.minus_times) - set(grid.times)
        if missing:
            raise ValueError(f"insertion times {sorted(missing)} are not on the grid")


@dataclass(frozen=True)
class CorrelatorResult:
    value: complex
    fd_value: complex
    residual: float
    step: float

    @property
    def ok(self) -> bool:
        return self.residual <= RESIDUAL_THRESHOLD


def _branch_operator(a, grid: TimeGrid, j: np.ndarray, sys: SystemSpec) -> np.ndarray:
    out = np.eye(sys.dim, dtype=np.complex128)
    evo = sys.evolution
    for t, jt in zip(grid.times, j):
        if jt != 0.0:
            w, v = np.linalg.eigh(evo.heisenberg(a, t))
            out = out @ ((v * np.exp(-1j * jt * w)) @ v.conj().T)
    return out


def ctp_generating_functional(a, jp: SmearingVector, jm: SmearingVector, sys: SystemSpec) -> complex:
    """``Z[J+, J-] = Tr(X_{J+}^dag rho0 X_{J-})`` for Hermitian ``a``."""
    a = as_operator(a, sys.dim)
    if jp.grid.times != jm.grid.times:
        raise ValueError("J+ and J- must share a grid")
    xp = _branch_operator(a, jp.grid, jp.values, sys)
    xm = _branch_operator(a, jm.grid, jm.values, sys)
    return complex(np.trace(xp.conj().T @ sys.rho0 @ xm))


def ordered_product(ops_at_times, latest_first: bool = True) -> np.ndarray:
    """Time-ordered product of ``(t, op)`` pairs.

    Equal times are averaged over their internal orderings.
    """
    items = sorted(ops_at_times, key=lambda x: x[0], reverse=latest_first)
    groups: list[list[np.ndarray]] = []
    last = None
    for t, op in items:
        if last is not None and t == last:
            groups[-1].append(op)
        else:
            groups.append([op])
        last = t
    out = None
    for grp in groups:
        if len(grp) == 1:
            block = grp[0]
        else:
            perms = list(permutations(range(len(grp))))
            block = sum(_mul([grp[i] for i in pm]) for pm in perms) / len(perms)
        out = block if out is None else out @ block
    return out


def _mul(ops):
    out = ops[0]
    for o in ops[1:]:
        out = out @ o
    return out


def direct_correlator(a, req: CorrelatorRequest, sys: SystemSpec) -> complex:
    """``Tr(rho0 Tbar[...] T[...])`` from explicit Heisenberg operators."""
    a = as_operator(a, sys.dim)
    evo = sys.evolution
    eye = np.eye(sys.dim, dtype=np.complex128)
    plus = [(t, evo.heisenberg(a, t)) for t in req.plus_times]
    minus = [(t, evo.heisenberg(a, t)) for t in req.minus_times]
    tp = ordered_product(plus, latest_first=True) if plus else eye
    tm = ordered_product(minus, latest_first=False) if minus else eye
    return complex(np.trace(sys.rho0 @ tm @ tp))


_STENCILS = {
    1: (np.array([-1, 0, 1]), np.array([-0.5, 0.0, 0.5])),
    2: (np.array([-1, 0, 1]), np.array([1.0, -2.0, 1.0])),
    3: (np.array([-2, -1, 0, 1, 2]), np.array([-0.5, 1.0, 0.0, -1.0, 0.5])),
    4: (np.array([-2, -1, 0, 1, 2]), np.array([1.0, -4.0, 6.0, -4.0, 1.0])),
}


def _mixed_derivative(fn, nvars: int, mult: list[int], h: float) -> complex:
    """Tensor-product central differences; ``mult[k]`` is the order in variable k."""
    stencils = [_STENCILS[m] for m in mult]
    total = 0.0 + 0.0j
    for combo in product(*[range(len(s[0])) for s in stencils]):
        coef = 1.0
        x = np.zeros(nvars)
        for k, idx in enumerate(combo):
            offs, ws = stencils[k]
            coef *= ws[idx]
            x[k] = offs[idx] * h
        if coef != 0.0:
            total += coef * fn(x)
    return total / h ** sum(mult)


def fd_correlator(a, req: CorrelatorRequest, sys: SystemSpec, grid: TimeGrid | None = None,
                  h: float = DEFAULT_STEP) -> tuple[complex, float]:
    """Correlator from finite differences of ``Z`` plus one Richardson halving.

    The step grows with the derivative order as ``max(h, eps^(1/(order+4)))``
    to keep rounding below the truncation error. Returns the value and the
    step actually used.
    """
    a = as_operator(a, sys.dim)
    if grid is None:
        grid = TimeGrid(tuple(sorted(set(req.plus_times + req.minus_times))))
    req.check_grid(grid)
    index = {t: k for k, t in enumerate(grid.times)}
    # one variable per distinct (branch, time)
    keys = sorted({("+", t) for t in req.plus_times} | {("-", t) for t in req.minus_times})
    mult = [(req.plus_times if br == "+" else req.minus_times).count(t) for br, t in keys]
    if max(mult) > 4:
        raise ValueError("at most 4 insertions per (branch, time)")
    n = len(grid)

    def z_of(x):
        jp = np.zeros(n)
        jm = np.zeros(n)
        for (br, t), v in zip(keys, x):
            (jp if br == "+" else jm)[index[t]] += v
        return ctp_generating_functional(a, SmearingVector(grid, jp), SmearingVector(grid, jm), sys)

    order = sum(mult)
    step = max(h, np.finfo(float).eps ** (1.0 / (order + 4)))
    coarse = _mixed_derivative(z_of, len(keys), mult, step)
    fine = _mixed_derivative(z_of, len(keys), mult, step / 2)
    deriv = (4 * fine - coarse) / 3
    return complex((-1j) ** req.r * (1j) ** req.s * deriv), float(step)


def correlator(a, req: CorrelatorRequest, sys: SystemSpec, grid: TimeGrid | None = None,
               h: float = DEFAULT_STEP, strict: bool = False) -> CorrelatorResult:
    """Direct operator-chain correlator cross-checked against finite differences.

    With ``strict`` a residual above ``RESIDUAL_THRESHOLD`` raises.
    """
    if req.r + req.s > 4:
        raise ValueError("r + s <= 4 at desk scale")
    direct = direct_correlator(a, req, sys)
    fd, step = fd_correlator(a, req, sys, grid, h)
    res = CorrelatorResult(direct, fd, float(abs(direct - fd)), step)
    if strict and not res.ok:
        raise ArithmeticError(f"finite-difference residual {res.residual:.2e} above threshold; "
                              "differentiation step is miscalibrated")
    return res


def _displacement_chain(z: PhasePath, sys: SystemSpec, spec: FockSpec) -> np.ndarray:
    out = np.eye(spec.ncut, dtype=np.complex128)
    for k, t in enumerate(z.times):
        out = out @ sys.evolution.heisenberg(displacement(z[k], spec), t)
    return out


def phase_space_ctp(zp: PhasePath, zm: PhasePath, sys: SystemSpec, spec: FockSpec) -> complex:
    """``Tr(U(z+)^dag rho0 U(z-))`` with ``U`` the time-ordered displacement chain.

    ``D(chi, xi) = exp(-i (chi p - xi q))`` so this is the generating
    functional of the phase-space smearing ``chi p - xi q``.
    """
    if zp.times != zm.times:
        raise ValueError("paths must share a grid")
    if sys.dim != spec.ncut:
        raise ValueError("system dimension must equal ncut")
    up = _displacement_chain(zp, sys, spec)
    um = _displacement_chain(zm, sys, spec)
    return complex(np.trace(up.conj().T @ sys.rho0 @ um))
