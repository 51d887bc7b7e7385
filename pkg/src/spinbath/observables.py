"""Reduced density matrices and decoherence metrics.

Everything here is a pure function of its inputs.  The eigenbasis of the
system Hamiltonian is computed with a cyclic Jacobi sweep so that repeated
calls give a bit-identical basis, including inside degenerate subspaces
where the basis choice is otherwise arbitrary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .states import StateVector

_HERMITICITY_TOL = 1e-12
_MAX_EIG_DIM = 1024
_LOG_FLOOR = 1e-300

MODE_FITTED = "fitted"
MODE_UNIFORM = "uniform"


@dataclass(frozen=True)
class ReducedDensityMatrix:
    """d x d complex Hermitian matrix with unit trace."""

    dim: int
    entries: np.ndarray


@dataclass(frozen=True)
class SystemEigenbasis:
    """Ascending eigenvalues and a deterministic unitary of eigenvector columns."""

    energies: np.ndarray
    vectors: np.ndarray
    degeneracy_tol: float = 1e-10


def _offdiag_frobenius(a: np.ndarray) -> float:
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def _jacobi_rotate(a: np.ndarray, v: np.ndarray, p: int, q: int) -> None:
    """One complex Jacobi rotation annihilating a[p, q] (and a[q, p])."""
    apq = a[p, q]
    mod = abs(apq)
    if mod == 0.0:
        return
    phase = apq / mod
    app = a[p, p].real
    aqq = a[q, q].real
    tau = (app - aqq) / (2.0 * mod)
    t = (1.0 if tau >= 0.0 else -1.0) / (abs(tau) + math.hypot(1.0, tau))
    c = 1.0 / math.sqrt(1.0 + t * t)
    sp = (t * c) * phase

    colp = a[:, p].copy()
    colq = a[:, q].copy()
    a[:, p] = c * colp + np.conj(sp) * colq
    a[:, q] = -sp * colp + c * colq
    rowp = a[p, :].copy()
    rowq = a[q, :].copy()
    a[p, :] = c * rowp + sp * rowq
    a[q, :] = -np.conj(sp) * rowp + c * rowq
    a[p, q] = 0.0
    a[q, p] = 0.0
    a[p, p] = a[p, p].real
    a[q, q] = a[q, q].real

    vp = v[:, p].copy()
    vq = v[:, q].copy()
    v[:, p] = c * vp + np.conj(sp) * vq
    v[:, q] = -sp * vp + c * vq


def hermitian_eigendecomposition(matrix: np.ndarray,
                                 degeneracy_tol: float = 1e-10) -> SystemEigenbasis:
    """Eigenpairs of a Hermitian matrix by cyclic Jacobi rotations.

    Sweeps run until the off-diagonal Frobenius mass drops below 1e-14 of the
    diagonal mass.  Eigenpairs are sorted by ascending eigenvalue; inside a
    degenerate group the columns are ordered by the index of their
    largest-magnitude component, and each column's phase is rotated so that
    component is real and positive.  This pins a reproducible basis even when
    the spectrum is degenerate.
    """
    a = np.array(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("input must be a square matrix")
    n = a.shape[0]
    if n > _MAX_EIG_DIM:
        raise ValueError(f"dimension {n} exceeds the {_MAX_EIG_DIM} guard")
    scale = float(np.linalg.norm(a))
    if np.abs(a - a.conj().T).max() > _HERMITICITY_TOL * max(scale, 1.0):
        raise ValueError("input is not Hermitian")
    a = (a + a.conj().T) / 2.0

    v = np.eye(n, dtype=complex)
    if scale > 0.0 and n > 1:
        skip = 1e-18 * scale
        for _ in range(100):
            off = _offdiag_frobenius(a)
            diag_mass = float(np.linalg.norm(np.diagonal(a).real))
            if off <= 1e-14 * diag_mass:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    if abs(a[p, q]) > skip:
                        _jacobi_rotate(a, v, p, q)
        else:
            raise RuntimeError("Jacobi sweep did not converge")

    energies = np.diagonal(a).real.copy()
    order = np.argsort(energies, kind="stable")
    energies = energies[order]
    v = v[:, order]

    # Deterministic column order inside (near-)degenerate groups.
    anchors = np.argmax(np.abs(v), axis=0)
    start = 0
    while start < n:
        end = start + 1
        while end < n and energies[end] - energies[end - 1] <= degeneracy_tol:
            end += 1
        if end - start > 1:
            sub = np.argsort(anchors[start:end], kind="stable")
            v[:, start:end] = v[:, start + sub]
            anchors[start:end] = anchors[start + sub]
        start = end

    # Phase convention: largest-magnitude component real positive.
    for k in range(n):
        pivot = v[anchors[k], k]
        if pivot != 0.0:
            v[:, k] *= np.conj(pivot) / abs(pivot)
    return SystemEigenbasis(energies, v, degeneracy_tol)


def reduce(state: StateVector, n_system: int) -> ReducedDensityMatrix:
    """Partial trace over the environment: rho[i, j] = sum_p c(i,p) conj(c(j,p))."""
    if n_system < 1 or n_system > state.n_qubits:
        raise ValueError("n_system out of range")
    d_s = 1 << n_system
    m = state.amplitudes.reshape(-1, d_s)
    entries = m.T @ m.conj()
    return ReducedDensityMatrix(d_s, entries)


def to_energy_basis(rdm: ReducedDensityMatrix, basis: SystemEigenbasis) -> ReducedDensityMatrix:
    """Conjugate by the eigenbasis unitary: rho_tilde = V^dag rho V."""
    if basis.vectors.shape != (rdm.dim, rdm.dim):
        raise ValueError("basis dimension does not match the density matrix")
    v = basis.vectors
    return ReducedDensityMatrix(rdm.dim, v.conj().T @ rdm.entries @ v)


def sigma(rdm: ReducedDensityMatrix) -> float:
    """Root-sum-square of the strict upper triangle; 0 means full decoherence."""
    iu = np.triu_indices(rdm.dim, k=1)
    return float(np.sqrt((np.abs(rdm.entries[iu]) ** 2).sum()))


def delta_and_b(rdm: ReducedDensityMatrix, energies: np.ndarray,
                degeneracy_tol: float = 1e-10,
                mode: str = MODE_FITTED) -> tuple[float, float]:
    """Distance of the diagonal from a Boltzmann profile and the fitted 1/T.

    Fitted mode averages pairwise log-ratios over non-degenerate level pairs
    to get b, then measures the Euclidean distance between the diagonal and
    exp(-b E_i) / Z.  Uniform mode forces b = 0 (reference profile 1/dim),
    which is the regime the closed-form expectation addresses.
    """
    diag = np.diagonal(rdm.entries).real
    d = rdm.dim
    if mode == MODE_UNIFORM:
        b = 0.0
        profile = np.full(d, 1.0 / d)
    elif mode == MODE_FITTED:
        if energies.shape != (d,):
            raise ValueError("energies length does not match the density matrix")
        if (diag < _LOG_FLOOR).any():
            raise ValueError("nonpositive diagonal entry; fitted mode needs logarithms")
        i, j = np.triu_indices(d, k=1)
        keep = np.abs(energies[i] - energies[j]) > degeneracy_tol
        if not keep.any():
            raise ValueError("no non-degenerate level pair to fit against")
        i, j = i[keep], j[keep]
        logd = np.log(diag)
        b = float(np.mean((logd[i] - logd[j]) / (energies[j] - energies[i])))
        w = np.exp(-b * (energies - energies.min()))
        profile = w / w.sum()
    else:
        raise ValueError(f"unknown mode {mode!r}")
    delta = float(np.sqrt(((diag - profile) ** 2).sum()))
    return delta, b


def purity_report(rdm: ReducedDensityMatrix) -> tuple[float, float]:
    """(Tr rho^2, sum of squared diagonal entries).

    For any Hermitian matrix the two differ by exactly 2 sigma^2, which the
    suite checks entrywise.
    """
    purity = float((np.abs(rdm.entries) ** 2).sum())
    trace_diag_sq = float((np.diagonal(rdm.entries).real ** 2).sum())
    return purity, trace_diag_sq


def predicted_sigma(d_system: int, d_env: int) -> float:
    """Expected sigma for a uniformly random full-register state (exact form)."""
    if d_system < 2 or d_env < 1:
        raise ValueError("need d_system >= 2 and d_env >= 1")
    return math.sqrt((d_system - 1) / (2.0 * (d_system * d_env + 1)))


def predicted_sigma_isolated(d_system: int) -> float:
    """Expected sigma for a random state with no environment at all."""
    if d_system < 2:
        raise ValueError("need d_system >= 2")
    return math.sqrt((d_system - 1) / (2.0 * (d_system + 1)))


def predicted_delta(d_system: int, d_env: int) -> float:
    """Expected diagonal distance from uniform for a random full-register state."""
    if d_system < 2 or d_env < 1:
        raise ValueError("need d_system >= 2 and d_env >= 1")
    return math.sqrt((d_system - 1) / (d_system * (d_system * d_env + 1.0)))


def offdiag_components(rdm: ReducedDensityMatrix) -> list[tuple[int, int, float]]:
    """Strict upper-triangle moduli, largest first (ties by index)."""
    i, j = np.triu_indices(rdm.dim, k=1)
    mods = np.abs(rdm.entries[i, j])
    order = np.lexsort((j, i, -mods))
    return [(int(i[k]), int(j[k]), float(mods[k])) for k in order]


RDM_FORMAT = "density-matrix/1"


def rdm_to_text(rdm: ReducedDensityMatrix) -> str:
    """Full-matrix text dump: one `i j re im` line per entry, 17 significant digits."""
    lines = [RDM_FORMAT, f"dim {rdm.dim}"]
    for i in range(rdm.dim):
        for j in range(rdm.dim):
            z = rdm.entries[i, j]
            lines.append(f"{i} {j} {z.real:.17g} {z.imag:.17g}")
    return "\n".join(lines) + "\n"


def rdm_from_text(text: str) -> ReducedDensityMatrix:
    lines = text.splitlines()
    if not lines or lines[0] != RDM_FORMAT:
        raise ValueError(f"not a {RDM_FORMAT} document")
    key, _, value = lines[1].partition(" ")
    if key != "dim":
        raise ValueError("missing dimension header")
    dim = int(value)
    if len(lines) != 2 + dim * dim:
        raise ValueError("truncated entry list")
    entries = np.zeros((dim, dim), dtype=complex)
    for line in lines[2:]:
        i_s, j_s, re_s, im_s = line.split()
        entries[int(i_s), int(j_s)] = float(re_s) + 1j * float(im_s)
    return ReducedDensityMatrix(dim, entries)
