"""Hamiltonian application and Chebyshev time evolution.

The Hamiltonian is never materialized at full size: every bond couples pairs
of amplitudes whose indices differ in two bits, so H|psi> is an O(D) sweep
per bond.  For each output index the contributing partner is index XOR both
bond bits, with the exchange weight -(Jx+Jy)/4 when the two bits differ and
the cross weight -(Jx-Jy)/4 when they agree; the ZZ part is a precomputed
diagonal.  The kernel is element-parallel with a fixed per-element summation
order, so results are bit-identical for any thread count.

Time steps use the Chebyshev expansion of exp(-i tau H) with Bessel-function
coefficients: accurate to the truncation threshold regardless of step size.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import ModelSpec, spectral_bound
from .observables import hermitian_eigendecomposition
from .states import StateVector

os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

_DENSE_GUARD = 12
_ORACLE_GUARD = 10


@lru_cache(maxsize=4)
def _kernel_tables(spec: ModelSpec):
    """Per-spec arrays consumed by the apply kernel (cached, spec is immutable)."""
    site_a = np.array([b.site_a for b in spec.bonds], dtype=np.int64)
    site_b = np.array([b.site_b for b in spec.bonds], dtype=np.int64)
    w_flip = np.array([-(b.strength[0] + b.strength[1]) / 4.0 for b in spec.bonds])
    w_cross = np.array([-(b.strength[0] - b.strength[1]) / 4.0 for b in spec.bonds])

    idx = np.arange(spec.dim, dtype=np.int64)
    diag = np.zeros(spec.dim)
    for b in spec.bonds:
        agree = ((idx >> b.site_a) & 1) == ((idx >> b.site_b) & 1)
        diag += np.where(agree, -b.strength[2], b.strength[2]) / 4.0
    return site_a, site_b, w_flip, w_cross, diag


if HAVE_NUMBA:

    @numba.njit(parallel=True, cache=True)
    def _apply_kernel(psi, out, diag, site_a, site_b, w_flip, w_cross):
        n_bonds = site_a.shape[0]
        for n in numba.prange(psi.shape[0]):
            acc = diag[n] * psi[n]
            for k in range(n_bonds):
                a = site_a[k]
                b = site_b[k]
                if ((n >> a) & 1) != ((n >> b) & 1):
                    w = w_flip[k]
                else:
                    w = w_cross[k]
                if w != 0.0:
                    acc += w * psi[n ^ ((1 << a) | (1 << b))]
            out[n] = acc

    @numba.njit(parallel=True, cache=True)
    def _recurrence_kernel(t_cur, t_prev, t_next, total, diag, site_a, site_b,
                           w_flip, w_cross, two_inv_a, two_c):
        # One fused pass: T_{k+1}[n] = (2/a) (H T_k)[n] - T_{k-1}[n],
        # total[n] += 2 c_k T_{k+1}[n].  Same term order as _apply_kernel.
        n_bonds = site_a.shape[0]
        for n in numba.prange(t_cur.shape[0]):
            acc = diag[n] * t_cur[n]
            for k in range(n_bonds):
                a = site_a[k]
                b = site_b[k]
                if ((n >> a) & 1) != ((n >> b) & 1):
                    w = w_flip[k]
                else:
                    w = w_cross[k]
                if w != 0.0:
                    acc += w * t_cur[n ^ ((1 << a) | (1 << b))]
            t_new = two_inv_a * acc - t_prev[n]
            t_next[n] = t_new
            total[n] += two_c * t_new


def _apply_numpy(tables, psi: np.ndarray, out: np.ndarray) -> None:
    """Pure-numpy kernel (strided views), same term order as the jit kernel."""
    site_a, site_b, w_flip, w_cross, diag = tables
    np.multiply(diag, psi, out=out)
    n_qubits = diag.shape[0].bit_length() - 1
    for a, b, wf, wc in zip(site_a, site_b, w_flip, w_cross):
        hi, mid, lo = 1 << (n_qubits - 1 - b), 1 << (b - a - 1), 1 << a
        p = psi.reshape(hi, 2, mid, 2, lo)
        o = out.reshape(hi, 2, mid, 2, lo)
        if wf != 0.0:
            o[:, 0, :, 1, :] += wf * p[:, 1, :, 0, :]
            o[:, 1, :, 0, :] += wf * p[:, 0, :, 1, :]
        if wc != 0.0:
            o[:, 0, :, 0, :] += wc * p[:, 1, :, 1, :]
            o[:, 1, :, 1, :] += wc * p[:, 0, :, 0, :]


def _apply_into(tables, psi: np.ndarray, out: np.ndarray) -> None:
    if HAVE_NUMBA:
        site_a, site_b, w_flip, w_cross, diag = tables
        _apply_kernel(psi, out, diag, site_a, site_b, w_flip, w_cross)
    else:  # pragma: no cover - exercised only without numba installed
        _apply_numpy(tables, psi, out)


def apply_hamiltonian(spec: ModelSpec, state: StateVector | np.ndarray) -> np.ndarray:
    """H|psi> as a plain (unnormalized) amplitude vector."""
    vec = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
    if vec.shape != (spec.dim,):
        raise ValueError(f"state has {vec.shape[0]} amplitudes, model needs {spec.dim}")
    vec = np.ascontiguousarray(vec, dtype=np.complex128)
    out = np.empty_like(vec)
    _apply_into(_kernel_tables(spec), vec, out)
    return out


def bessel_j_sequence(x: float, k_max: int) -> np.ndarray:
    """J_0(x) .. J_kmax(x) by Miller's downward recurrence.

    The recurrence J_{k-1} = (2k/x) J_k - J_{k+1} is started well above both
    k_max and the turning point k ~ x with an arbitrary tiny seed, descended
    to order zero (rescaling when the unnormalized values approach overflow),
    and normalized with J_0 + 2 sum_k J_{2k} = 1.
    """
    if x < 0:
        raise ValueError("argument must be nonnegative")
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    out = np.zeros(k_max + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    top = max(k_max, int(math.ceil(x)))
    start = top + 20 + int(math.ceil(math.sqrt(40.0 * top)))
    jp = 0.0
    jc = 1e-30
    ssum = 0.0
    for k in range(start, 0, -1):
        jm = (2.0 * k / x) * jc - jp
        jp, jc = jc, jm
        if abs(jc) > 1e250:
            jp *= 1e-250
            jc *= 1e-250
            ssum *= 1e-250
            out *= 1e-250
        order = k - 1
        if order <= k_max:
            out[order] = jc
        if order == 0:
            ssum += jc
        elif order % 2 == 0:
            ssum += 2.0 * jc
    return out / ssum


_I_POWERS = np.array([1.0, -1.0j, -1.0, 1.0j])  # (-i)**k for k mod 4


def chebyshev_coefficients(z: float, eps: float) -> np.ndarray:
    """Expansion coefficients c_k = (-i)^k J_k(z), truncated once |J_k| stays below eps."""
    if z < 0:
        raise ValueError("z must be nonnegative")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if z == 0.0:
        return np.array([1.0 + 0.0j])
    upper = int(math.ceil(z)) + 20 + int(math.ceil(20.0 * z ** (1.0 / 3.0)))
    j = bessel_j_sequence(z, upper)
    above = np.nonzero(np.abs(j) >= eps)[0]
    k_top = int(above.max()) + 1 if above.size else 0
    k_top = min(max(k_top, int(math.ceil(z))), upper)
    ks = np.arange(k_top + 1)
    return j[: k_top + 1] * _I_POWERS[ks % 4]


@dataclass(frozen=True)
class ChebyshevPlan:
    """Reusable expansion of exp(-i step H) for a fixed model."""

    radius: float
    step: float
    term_count: int
    coefficients: np.ndarray
    truncation: float


def make_plan(spec: ModelSpec, tau: float, eps: float = 1e-15) -> ChebyshevPlan:
    if tau <= 0:
        raise ValueError("time step must be positive")
    a = spectral_bound(spec)
    coeffs = chebyshev_coefficients(a * tau, eps)
    return ChebyshevPlan(a, tau, len(coeffs) - 1, coeffs, eps)


def chebyshev_step(spec: ModelSpec, plan: ChebyshevPlan, state: StateVector) -> StateVector:
    """Advance |psi> by exp(-i step H) using the three-term recurrence.

    T_0 = psi, T_1 = (H/a) psi, T_{k+1} = 2 (H/a) T_k - T_{k-1}; the result is
    c_0 T_0 + 2 sum_{k>=1} c_k T_k, accumulated while three work vectors
    rotate through the recurrence.
    """
    if plan.radius != spectral_bound(spec):
        raise ValueError("plan was built for a different model")
    vec = state.amplitudes
    if vec.shape != (spec.dim,):
        raise ValueError("state dimension does not match the model")
    c = plan.coefficients
    acc = c[0] * vec
    if plan.term_count >= 1:
        tables = _kernel_tables(spec)
        site_a, site_b, w_flip, w_cross, diag = tables
        inv_a = 1.0 / plan.radius
        t_prev = vec.astype(np.complex128, copy=True)
        t_cur = np.empty_like(t_prev)
        _apply_into(tables, t_prev, t_cur)
        t_cur *= inv_a
        acc += (2.0 * c[1]) * t_cur
        scratch = np.empty_like(t_prev)
        for k in range(2, plan.term_count + 1):
            if HAVE_NUMBA:
                _recurrence_kernel(t_cur, t_prev, scratch, acc, diag, site_a,
                                   site_b, w_flip, w_cross, 2.0 * inv_a,
                                   2.0 * c[k])
            else:  # pragma: no cover - exercised only without numba installed
                _apply_numpy(tables, t_cur, scratch)
                scratch *= 2.0 * inv_a
                scratch -= t_prev
                acc += (2.0 * c[k]) * scratch
            t_prev, t_cur, scratch = t_cur, scratch, t_prev
    return StateVector(state.n_qubits, acc)


_PAULI = {
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


def _two_site_operator(n_sites: int, a: int, b: int, axis: str) -> np.ndarray:
    """Kronecker chain with sigma^axis / 2 at sites a and b (site 0 = lowest bit)."""
    half = _PAULI[axis] / 2.0
    eye = np.eye(2, dtype=complex)
    op = np.array([[1.0]], dtype=complex)
    for site in range(n_sites - 1, -1, -1):
        op = np.kron(op, half if site in (a, b) else eye)
    return op


def dense_hamiltonian_from_bonds(bonds, n_sites: int) -> np.ndarray:
    """Explicit 2^n x 2^n matrix, built independently of the sweep kernel."""
    if n_sites > _DENSE_GUARD:
        raise ValueError(f"dense construction capped at {_DENSE_GUARD} sites")
    dim = 1 << n_sites
    h = np.zeros((dim, dim), dtype=complex)
    for bond in bonds:
        for axis, j in zip("xyz", bond.strength):
            if j != 0.0:
                h -= j * _two_site_operator(n_sites, bond.site_a, bond.site_b, axis)
    return h


def dense_hamiltonian(spec: ModelSpec) -> np.ndarray:
    return dense_hamiltonian_from_bonds(spec.bonds, spec.n_sites)


@lru_cache(maxsize=4)
def _dense_basis(spec: ModelSpec):
    return hermitian_eigendecomposition(dense_hamiltonian(spec))


def dense_evolve_oracle(spec: ModelSpec, state: StateVector, t: float) -> StateVector:
    """Independent verification route: eigendecompose H and apply V e^{-it L} V^dag."""
    if spec.n_sites > _ORACLE_GUARD:
        raise ValueError(f"dense oracle capped at {_ORACLE_GUARD} sites")
    if state.amplitudes.shape != (spec.dim,):
        raise ValueError("state dimension does not match the model")
    basis = _dense_basis(spec)
    v = basis.vectors
    phases = np.exp(-1j * t * basis.energies)
    amps = v @ (phases * (v.conj().T @ state.amplitudes))
    return StateVector(state.n_qubits, amps)
