"""Hot loops: Fock-basis displacement matrices and Wigner symbols on node sets.

Both kernels evaluate the exact matrix elements of the displacement operator
restricted to the lowest ``n`` Fock levels,

    <m|D(b)|n> = sqrt(n!/m!) b^(m-n) exp(-|b|^2/2) L_n^(m-n)(|b|^2),   m >= n

with the associated Laguerre polynomial generated by its three-term
recurrence in the lower index and the factorial prefactor kept in log space.
The textbook recurrence on the matrix entries themselves loses all accuracy
once |b|^2 exceeds a few tens, this one does not.

Each kernel exists twice: a numba version and a vectorised numpy version.
``displacement_matrix`` and ``wigner_symbol_values`` dispatch on
``qhist._accel.USE_NUMBA`` unless a backend is passed explicitly.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from . import _accel
from ._accel import njit, prange

__all__ = ["displacement_matrix", "wigner_symbol_values", "BACKENDS"]

BACKENDS = ("numba", "numpy")


@njit(cache=True)
def _half_log_factorials(n):  # pragma: no cover - compiled
    out = np.empty(n + 1)
    for i in range(n + 1):
        out[i] = 0.5 * math.lgamma(i + 1.0)
    return out


@njit(cache=True)
def _displacement_nb(beta, n):  # pragma: no cover - compiled
    out = np.zeros((n, n), dtype=np.complex128)
    hlf = _half_log_factorials(n)
    x = beta.real * beta.real + beta.imag * beta.imag
    r = math.sqrt(x)
    ph = math.atan2(beta.imag, beta.real)
    logr = math.log(r) if r > 0.0 else 0.0
    for k in range(n):
        if k > 0 and r == 0.0:
            break
        fwd = complex(math.cos(k * ph), math.sin(k * ph))
        bwd = complex(math.cos(k * (math.pi - ph)), math.sin(k * (math.pi - ph)))
        base = k * logr - 0.5 * x
        l_m1 = 0.0
        l_m2 = 0.0
        for j in range(n - k):
            if j == 0:
                lag = 1.0
            else:
                lag = ((2 * j - 1 + k - x) * l_m1 - (j - 1 + k) * l_m2) / j
            l_m2 = l_m1
            l_m1 = lag
            val = math.exp(hlf[j] - hlf[j + k] + base) * lag
            out[j + k, j] = val * fwd
            if k > 0:
                out[j, j + k] = val * bwd
    return out


@njit(parallel=True, cache=True)
def _wigner_nb(bmat, betas):  # pragma: no cover - compiled
    n = bmat.shape[0]
    nodes = betas.shape[0]
    hlf = _half_log_factorials(n)
    out = np.zeros(nodes, dtype=np.complex128)
    for i in prange(nodes):
        beta = betas[i]
        x = beta.real * beta.real + beta.imag * beta.imag
        r = math.sqrt(x)
        ph = math.atan2(beta.imag, beta.real)
        logr = math.log(r) if r > 0.0 else 0.0
        acc = 0.0 + 0.0j
        for k in range(n):
            if k > 0 and r == 0.0:
                break
            fwd = complex(math.cos(k * ph), math.sin(k * ph))
            bwd = complex(math.cos(k * (math.pi - ph)), math.sin(k * (math.pi - ph)))
            base = k * logr - 0.5 * x
            l_m1 = 0.0
            l_m2 = 0.0
            for j in range(n - k):
                if j == 0:
                    lag = 1.0
                else:
                    lag = ((2 * j - 1 + k - x) * l_m1 - (j - 1 + k) * l_m2) / j
                l_m2 = l_m1
                l_m1 = lag
                val = math.exp(hlf[j] - hlf[j + k] + base) * lag
                acc += val * fwd * bmat[j, j + k]
                if k > 0:
                    acc += val * bwd * bmat[j + k, j]
        out[i] = 2.0 * acc
    return out


def _laguerre_sweep(betas, n):
    """Yield ``(j, vals, fwd, bwd)`` for j = 0..n-1.

    ``vals[:, k]`` is the modulus part of <j+k|D(b)|j> for every beta, ``fwd``
    and ``bwd`` the phases of the lower and upper triangle entries.
    """
    betas = np.asarray(betas, dtype=np.complex128).reshape(-1, 1)
    x = np.abs(betas) ** 2
    k = np.arange(n, dtype=float)[None, :]
    ph = np.angle(betas)
    with np.errstate(divide="ignore", invalid="ignore"):
        klogr = np.where(k == 0, 0.0, k * np.log(np.sqrt(x)))
    fwd = np.exp(1j * k * ph)
    bwd = np.exp(1j * k * (np.pi - ph))
    l_m1 = np.zeros((betas.shape[0], n))
    l_m2 = np.zeros_like(l_m1)
    for j in range(n):
        if j == 0:
            lag = np.ones_like(l_m1)
        else:
            lag = ((2 * j - 1 + k - x) * l_m1 - (j - 1 + k) * l_m2) / j
        l_m2, l_m1 = l_m1, lag
        width = n - j
        logpref = (
            0.5 * (gammaln(j + 1.0) - gammaln(j + k[:, :width] + 1.0))
            + klogr[:, :width]
            - 0.5 * x
        )
        yield j, np.exp(logpref) * lag[:, :width], fwd[:, :width], bwd[:, :width]


def _displacement_np(beta, n):
    out = np.zeros((n, n), dtype=np.complex128)
    for j, vals, fwd, bwd in _laguerre_sweep([beta], n):
        idx = np.arange(j, n)
        out[idx, j] = vals[0] * fwd[0]
        out[j, idx[1:]] = vals[0, 1:] * bwd[0, 1:]
    return out


def _wigner_np(bmat, betas, chunk=1024):
    n = bmat.shape[0]
    out = np.empty(betas.shape[0], dtype=np.complex128)
    for start in range(0, betas.shape[0], chunk):
        part = betas[start:start + chunk]
        acc = np.zeros(part.shape[0], dtype=np.complex128)
        for j, vals, fwd, bwd in _laguerre_sweep(part, n):
            acc += (vals * fwd) @ bmat[j, j:]
            acc += (vals[:, 1:] * bwd[:, 1:]) @ bmat[j + 1:, j]
        out[start:start + chunk] = 2.0 * acc
    return out


def _pick(backend):
    if backend is None:
        return "numba" if _accel.USE_NUMBA else "numpy"
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}, expected one of {BACKENDS}")
    if backend == "numba" and not _accel.NUMBA_AVAILABLE:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend


def displacement_matrix(beta: complex, n: int, backend: str | None = None) -> np.ndarray:
    """Matrix of D(beta) = exp(beta a^dag - conj(beta) a) on the lowest ``n`` levels."""
    if n < 1:
        raise ValueError("n must be positive")
    beta = complex(beta)
    if _pick(backend) == "numba":
        return _displacement_nb(beta, int(n))
    return _displacement_np(beta, int(n))


def wigner_symbol_values(a: np.ndarray, alphas, backend: str | None = None) -> np.ndarray:
    """Return ``Tr(2 D(alpha) P D(alpha)^dag a)`` for each complex ``alpha``.

    ``P`` is the parity operator. The displaced parity equals ``D(2 alpha) P``
    exactly, so only one displacement matrix per node is needed and it is
    contracted on the fly.
    """
    a = np.asarray(a, dtype=np.complex128)
    n = a.shape[0]
    bmat = np.ascontiguousarray(a * ((-1.0) ** np.arange(n))[:, None])
    betas = 2.0 * np.ascontiguousarray(np.asarray(alphas, dtype=np.complex128).ravel())
    if _pick(backend) == "numba":
        return _wigner_nb(bmat, betas)
    return _wigner_np(bmat, betas)
