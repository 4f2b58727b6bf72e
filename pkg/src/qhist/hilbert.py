"""Dense finite-dimensional operator algebra.

Operators are plain complex ``numpy`` arrays. Functions here never mutate
their inputs, and arrays handed back from validating constructors are marked
read-only so they can be shared freely.
"""
from __future__ import annotations

from functools import reduce

import numpy as np
import scipy.linalg as sla

DEFAULT_TOL = 1e-9
SIZE_CAP = 4096

__all__ = [
    "DEFAULT_TOL",
    "SIZE_CAP",
    "DimensionError",
    "SizeCapError",
    "as_operator",
    "as_state",
    "frozen",
    "is_hermitian",
    "is_unitary",
    "is_projector",
    "is_density_matrix",
    "as_density_matrix",
    "identity",
    "tensor",
    "embed",
    "expm",
    "propagator",
    "heisenberg",
    "time_averaged_operator",
    "projector_onto",
    "pure_density",
    "psd_sqrt",
    "partial_trace",
    "op_norm",
    "random_hermitian",
    "random_unitary",
    "random_state",
    "random_density",
    "random_projector",
]


class DimensionError(ValueError):
    """Operands live on Hilbert spaces of different dimension."""


class SizeCapError(ValueError):
    """A tensor-product space would exceed the configured dimension cap."""


def frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.complex128, copy=True)
    arr.setflags(write=False)
    return arr


def as_operator(a, dim: int | None = None) -> np.ndarray:
    """Validate and return ``a`` as a read-only complex square matrix."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"operator must be square, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise DimensionError("operator dimension must be at least 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError("operator has non-finite entries")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {arr.shape[0]}")
    return frozen(arr)


def as_state(v, normalize: bool = False, tol: float = DEFAULT_TOL) -> np.ndarray:
    vec = np.asarray(v, dtype=np.complex128).ravel()
    if vec.size < 1 or not np.all(np.isfinite(vec)):
        raise ValueError("state vector must be non-empty and finite")
    norm = np.linalg.norm(vec)
    if normalize:
        if norm <= tol:
            raise ValueError("cannot normalize a null vector")
        vec = vec / norm
    return frozen(vec)


def op_norm(a: np.ndarray) -> float:
    """Spectral norm."""
    return float(np.linalg.norm(a, 2)) if a.size else 0.0


def is_hermitian(a, tol: float = DEFAULT_TOL) -> bool:
    a = np.asarray(a)
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def is_unitary(a, tol: float = DEFAULT_TOL) -> bool:
    a = np.asarray(a)
    eye = np.eye(a.shape[0])
    return bool(np.max(np.abs(a @ a.conj().T - eye), initial=0.0) <= tol)


def is_projector(a, tol: float = DEFAULT_TOL) -> bool:
    a = np.asarray(a)
    return is_hermitian(a, tol) and bool(np.max(np.abs(a @ a - a), initial=0.0) <= tol)


def is_density_matrix(rho, tol: float = DEFAULT_TOL) -> bool:
    rho = np.asarray(rho)
    if not is_hermitian(rho, tol):
        return False
    if abs(np.trace(rho).real - 1.0) > tol:
        return False
    return bool(np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0] >= -tol)


def as_density_matrix(rho, tol: float = DEFAULT_TOL) -> np.ndarray:
    rho = as_operator(rho)
    if not is_density_matrix(rho, tol):
        raise ValueError("not a density matrix (Hermitian, PSD, unit trace)")
    return rho


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.complex128)


def tensor(*ops) -> np.ndarray:
    """Kronecker product with the first factor as the most significant slot."""
    if not ops:
        raise ValueError("tensor needs at least one operand")
    return reduce(np.kron, (np.asarray(o, dtype=np.complex128) for o in ops))


def _check_cap(dim: int, nslots: int, cap: int) -> int:
    total = dim ** nslots
    if total > cap:
        raise SizeCapError(f"tensor space dimension {dim}^{nslots} = {total} exceeds cap {cap}")
    return total


def embed(a, slot: int, nslots: int, cap: int = SIZE_CAP) -> np.ndarray:
    """``a`` acting on ``slot`` of an ``nslots``-fold tensor power, identity elsewhere."""
    a = np.asarray(a, dtype=np.complex128)
    _check_cap(a.shape[0], nslots, cap)
    if not 0 <= slot < nslots:
        raise IndexError(f"slot {slot} out of range for {nslots} slots")
    eye = identity(a.shape[0])
    return tensor(*[a if k == slot else eye for k in range(nslots)])


def expm(a, s: float = 1.0, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Return exp(i a s).

    Hermitian input goes through ``eigh`` so the result is unitary to rounding.
    Anything else falls back to scaling and squaring.
    """
    a = np.asarray(a, dtype=np.complex128)
    if not np.all(np.isfinite(a)) or not np.isfinite(s):
        raise ValueError("expm argument has non-finite entries")
    if is_hermitian(a, tol):
        w, v = np.linalg.eigh((a + a.conj().T) / 2)
        return (v * np.exp(1j * s * w)) @ v.conj().T
    return sla.expm(1j * s * a)


def propagator(h, t: float) -> np.ndarray:
    """U(t) = exp(-i H t)."""
    return expm(h, -t)


def heisenberg(a, h, t: float) -> np.ndarray:
    """a(t) = U(t)^dag a U(t)."""
    u = propagator(h, t)
    return u.conj().T @ np.asarray(a, dtype=np.complex128) @ u


def time_averaged_operator(a, f, cap: int = SIZE_CAP) -> np.ndarray:
    """Sum over slots of ``f[t] * a`` acting on slot ``t`` of the tensor power."""
    a = as_operator(a)
    f = np.asarray(f, dtype=float).ravel()
    if f.size < 1:
        raise ValueError("weight vector must be non-empty")
    total = _check_cap(a.shape[0], f.size, cap)
    out = np.zeros((total, total), dtype=np.complex128)
    for slot, weight in enumerate(f):
        if weight != 0.0:
            out += weight * embed(a, slot, f.size, cap)
    return out


def projector_onto(*vectors, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthogonal projector onto the span of the given vectors."""
    mat = np.column_stack([np.asarray(v, dtype=np.complex128).ravel() for v in vectors])
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    basis = u[:, s > tol * max(1.0, s.max(initial=0.0))]
    return frozen(basis @ basis.conj().T)


def pure_density(v) -> np.ndarray:
    vec = as_state(v, normalize=True)
    return frozen(np.outer(vec, vec.conj()))


def psd_sqrt(rho) -> np.ndarray:
    """Principal square root of a positive semidefinite matrix."""
    rho = np.asarray(rho, dtype=np.complex128)
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def partial_trace(m, dims: tuple[int, ...], keep: int) -> np.ndarray:
    """Trace out every tensor factor except ``keep``."""
    m = np.asarray(m)
    n = len(dims)
    t = m.reshape(tuple(dims) * 2)
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * n > len(letters):
        raise SizeCapError("too many tensor factors for partial_trace")
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for k in range(n):
        if k != keep:
            cols[k] = rows[k]
    spec = "".join(rows) + "".join(cols) + "->" + rows[keep] + cols[keep]
    return np.einsum(spec, t)


def random_hermitian(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (g + g.conj().T) / 2


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_density(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    rank = n if rank is None else rank
    g = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_projector(rng: np.random.Generator, n: int, rank: int) -> np.ndarray:
    u = random_unitary(rng, n)[:, :rank]
    return u @ u.conj().T
