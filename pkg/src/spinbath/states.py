"""Initial-state preparation for the full spin register.

Amplitude indexing: bit s of the index holds spin s, bit value 1 means spin
down, and the system spins occupy the low-order bits.  A composite index is
therefore n = p * d_system + i with i the system part and p the environment
part.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import Stream

UP = "up"
DOWN = "down"

#: Hard cap on register size for state construction (memory guard).
MAX_QUBITS = 26

_MAGIC = b"SPINVEC1"
_CONVENTION = b"bit1=down;syslow"


@dataclass(frozen=True)
class StateVector:
    """2**n_qubits complex amplitudes, unit norm."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError("amplitude count does not match qubit count")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def random_hypersphere_state(n_qubits: int, rng_state: Stream) -> StateVector:
    """A state drawn uniformly from the unit hypersphere of the register.

    Real and imaginary part of every amplitude is an independent standard
    Gaussian draw; normalizing projects the point onto the sphere.
    """
    if n_qubits < 1:
        raise ValueError("need at least one qubit")
    if n_qubits > MAX_QUBITS:
        raise ValueError(f"{n_qubits} qubits exceeds the {MAX_QUBITS}-qubit guard")
    gen = rng_state.generator()
    z = gen.standard_normal((1 << n_qubits, 2))
    amps = z[:, 0] + 1j * z[:, 1]
    amps /= np.linalg.norm(amps)
    return StateVector(n_qubits, amps)


def basis_product_state(pattern: list[str] | tuple[str, ...]) -> StateVector:
    """Computational basis state for a per-spin up/down pattern.

    Spin s down sets bit s of the single nonzero amplitude's index, so
    ("up", "down", "up", "down") lands on index 0b1010 = 10.
    """
    if len(pattern) == 0:
        raise ValueError("empty pattern")
    index = 0
    for s, token in enumerate(pattern):
        if token == DOWN:
            index |= 1 << s
        elif token != UP:
            raise ValueError(f"pattern entries must be 'up' or 'down', got {token!r}")
    amps = np.zeros(1 << len(pattern), dtype=complex)
    amps[index] = 1.0
    return StateVector(len(pattern), amps)


def alternating_pattern(n_spins: int) -> tuple[str, ...]:
    """up, down, up, down, ... for n_spins spins."""
    return tuple(UP if s % 2 == 0 else DOWN for s in range(n_spins))


def tensor(system_state: StateVector, env_state: StateVector) -> StateVector:
    """Product state with composite amplitudes out[p * d_sys + i] = sys[i] * env[p]."""
    n = system_state.n_qubits + env_state.n_qubits
    if n > MAX_QUBITS:
        raise ValueError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit guard")
    amps = np.kron(env_state.amplitudes, system_state.amplitudes)
    return StateVector(n, amps)


def udud_y(n_env: int, rng_state: Stream) -> StateVector:
    """|up down up down> on the 4 system spins times a random environment state."""
    return tensor(basis_product_state(alternating_pattern(4)),
                  random_hypersphere_state(n_env, rng_state))


def save_state(path: str | Path, state: StateVector) -> Path:
    """Binary checkpoint: magic + n_qubits + convention tag + little-endian complex128."""
    path = Path(path)
    header = _MAGIC + struct.pack("<I", state.n_qubits) + _CONVENTION
    path.write_bytes(header + state.amplitudes.astype("<c16").tobytes())
    return path


def load_state(path: str | Path) -> StateVector:
    raw = Path(path).read_bytes()
    head = len(_MAGIC) + 4 + len(_CONVENTION)
    if len(raw) < head or raw[:len(_MAGIC)] != _MAGIC:
        raise ValueError("not a spinbath state checkpoint")
    (n_qubits,) = struct.unpack("<I", raw[len(_MAGIC):len(_MAGIC) + 4])
    tag = raw[len(_MAGIC) + 4:head]
    if tag != _CONVENTION:
        raise ValueError(f"unsupported amplitude convention {tag!r}")
    amps = np.frombuffer(raw[head:], dtype="<c16")
    if amps.shape != (1 << n_qubits,):
        raise ValueError("truncated amplitude payload")
    return StateVector(n_qubits, amps.astype(np.complex128))
