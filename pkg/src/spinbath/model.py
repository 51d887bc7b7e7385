"""Coupling graphs for a spin-1/2 ring split into a system block and a bath.

A model is a list of pair bonds with per-axis strengths (Jx, Jy, Jz), units
hbar = 1.  Sites 0 .. n_system-1 are system spins, the rest are environment
spins; the ring closes through the bond (0, N-1).  Builders and mutators are
pure: they return new ModelSpec values and never touch shared state.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

CASE_RANDOM = "I"
CASE_ISOTROPIC = "II"
CASES = (CASE_RANDOM, CASE_ISOTROPIC)

SECTOR_SYSTEM = "system"
SECTOR_ENV = "environment"
SECTOR_SE = "system-environment"

MODEL_FORMAT = "spin-model/1"

#: Lower floor for the spectral bound so Chebyshev rescaling never divides by zero.
ZERO_HAMILTONIAN_FLOOR = 1e-12


@dataclass(frozen=True)
class Stream:
    """A named, independently seeded source of randomness.

    ``generator()`` returns a *fresh* generator every call, so an operation
    consuming a stream is a pure function of its arguments: repeated calls
    see the same draw sequence, and prefix properties (the bonds chosen for
    count m are the first m of the sequence for any larger count) hold by
    construction.
    """

    seed: int

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed))


@dataclass(frozen=True)
class RngStreams:
    """The five independent streams a full experiment consumes."""

    couplings: Stream
    state: Stream
    swb_env: Stream
    swb_se: Stream
    random_bonds: Stream

    @classmethod
    def from_seeds(cls, couplings: int, state: int, swb_env: int,
                   swb_se: int, random_bonds: int) -> "RngStreams":
        return cls(Stream(couplings), Stream(state), Stream(swb_env),
                   Stream(swb_se), Stream(random_bonds))


def bond_sector(site_a: int, site_b: int, n_system: int) -> str:
    if site_b < n_system:
        return SECTOR_SYSTEM
    if site_a >= n_system:
        return SECTOR_ENV
    return SECTOR_SE


@dataclass(frozen=True)
class Bond:
    """An interaction between two spins with per-axis strengths (Jx, Jy, Jz)."""

    site_a: int
    site_b: int
    strength: tuple[float, float, float]
    sector: str

    def __post_init__(self):
        if self.site_a == self.site_b:
            raise ValueError(f"bond joins site {self.site_a} to itself")
        if self.site_a > self.site_b:
            raise ValueError("bond sites must satisfy site_a < site_b")
        if len(self.strength) != 3:
            raise ValueError("bond strength must be an (x, y, z) triple")


@dataclass(frozen=True)
class ModelSpec:
    """The full coupling graph plus the parameters used to draw it.

    ``case`` is the construction rule ("I": random per-axis couplings in the
    environment and system-environment sectors, "II": every bond isotropic at
    j_system); mutators that add bonds later reuse the same rule.  ``label``
    is free-text provenance recording seeds and mutation history.
    """

    n_system: int
    n_env: int
    case: str
    j_system: float
    omega_max: float
    delta_max: float
    bonds: tuple[Bond, ...]
    label: str = ""

    def __post_init__(self):
        if self.n_system < 1 or self.n_env < 0:
            raise ValueError("need n_system >= 1 and n_env >= 0")
        if self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}")
        seen = set()
        for bond in self.bonds:
            if not (0 <= bond.site_a < bond.site_b < self.n_sites):
                raise ValueError(f"bond ({bond.site_a},{bond.site_b}) out of range")
            pair = (bond.site_a, bond.site_b)
            if pair in seen:
                raise ValueError(f"duplicate bond {pair}")
            seen.add(pair)
            expect = bond_sector(bond.site_a, bond.site_b, self.n_system)
            if bond.sector != expect:
                raise ValueError(f"bond {pair} tagged {bond.sector}, expected {expect}")

    @property
    def n_sites(self) -> int:
        return self.n_system + self.n_env

    @property
    def d_system(self) -> int:
        return 1 << self.n_system

    @property
    def d_env(self) -> int:
        return 1 << self.n_env

    @property
    def dim(self) -> int:
        return 1 << self.n_sites

    def bonds_in(self, sector: str) -> tuple[Bond, ...]:
        return tuple(b for b in self.bonds if b.sector == sector)

    def bond_pairs(self) -> set[tuple[int, int]]:
        return {(b.site_a, b.site_b) for b in self.bonds}


def _draw_strength(case: str, sector: str, j_system: float, omega_max: float,
                   delta_max: float, gen: np.random.Generator) -> tuple[float, float, float]:
    """Strength triple for a new bond, following the sector rule of the case."""
    if case == CASE_ISOTROPIC or sector == SECTOR_SYSTEM:
        return (j_system, j_system, j_system)
    halfwidth = omega_max if sector == SECTOR_ENV else delta_max
    draws = gen.uniform(-halfwidth, halfwidth, 3)
    return (float(draws[0]), float(draws[1]), float(draws[2]))


def build_ring(n_system: int, n_env: int, case: str, j_system: float,
               omega_max: float, delta_max: float, rng: Stream) -> ModelSpec:
    """Ring of N = n_system + n_env spins: bonds (s, s+1) plus the closing bond (0, N-1).

    System bonds are always isotropic at j_system.  Case I draws each axis of
    every environment bond uniformly from [-omega_max, omega_max] and of every
    system-environment bond from [-delta_max, delta_max]; case II sets every
    bond to (j_system,)*3.  The degenerate two-site ring collapses to a single
    bond instead of a duplicated pair.
    """
    if n_system < 1 or n_env < 1:
        raise ValueError("ring needs n_system >= 1 and n_env >= 1")
    if case not in CASES:
        raise ValueError(f"unknown case {case!r}")
    n = n_system + n_env
    pairs = [(s, s + 1) for s in range(n - 1)]
    if n > 2:
        pairs.append((0, n - 1))
    gen = rng.generator()
    bonds = []
    for a, b in pairs:
        sector = bond_sector(a, b, n_system)
        strength = _draw_strength(case, sector, j_system, omega_max, delta_max, gen)
        bonds.append(Bond(a, b, strength, sector))
    label = (f"ring case={case} n_system={n_system} n_env={n_env} "
             f"j={j_system:g} couplings_seed={rng.seed}")
    return ModelSpec(n_system, n_env, case, j_system, omega_max, delta_max,
                     tuple(bonds), label)


def _env_swb_candidates(spec: ModelSpec) -> list[tuple[int, int]]:
    """Non-neighboring environment pairs eligible for small-world bonds.

    The environment spins are treated as a closed loop of their own: the first
    and last environment spins count as neighbors (the ring continues through
    the system block between them), so for n_env = 4 the only candidates are
    the two diagonals.
    """
    lo, hi = spec.n_system, spec.n_sites - 1
    out = []
    for a in range(lo, hi + 1):
        for b in range(a + 2, hi + 1):
            if a == lo and b == hi:
                continue
            out.append((a, b))
    return out


def add_env_swbs(spec: ModelSpec, count: int, rng_swb_env: Stream) -> ModelSpec:
    """Append `count` small-world bonds between non-neighboring environment spins.

    The candidate list is shuffled once per input spec, so the bonds chosen
    for a smaller count are a strict prefix (positions and strengths) of those
    chosen for any larger count drawn from the same stream.
    """
    if count == 0:
        return spec
    existing = spec.bond_pairs()
    candidates = [p for p in _env_swb_candidates(spec) if p not in existing]
    if count < 0 or count > len(candidates):
        raise ValueError(f"requested {count} environment SWBs, only "
                         f"{len(candidates)} candidate pairs available")
    gen = rng_swb_env.generator()
    order = gen.permutation(len(candidates))
    bonds = list(spec.bonds)
    for k in order[:count]:
        a, b = candidates[k]
        strength = _draw_strength(spec.case, SECTOR_ENV, spec.j_system,
                                  spec.omega_max, spec.delta_max, gen)
        assert (a, b) not in existing
        bonds.append(Bond(a, b, strength, SECTOR_ENV))
    label = spec.label + f"; env_swb count={count} seed={rng_swb_env.seed}"
    return replace(spec, bonds=tuple(bonds), label=label)


def add_se_swbs(spec: ModelSpec, count: int, k_max: int, rng_swb_se: Stream) -> ModelSpec:
    """Append `count` system-environment small-world bonds under the K constraint.

    Candidates are every (system, environment) pair not already bonded; the
    shuffled sequence is walked in order, skipping any pair whose environment
    spin already carries k_max SWB links to system spins.  The two ring
    system-environment bonds do not count toward K.  The realized K of the
    result is recorded in the label.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if count == 0:
        return spec
    n_sys, n = spec.n_system, spec.n_sites
    ring_se = {(n_sys - 1, n_sys), (0, n - 1)}
    existing = spec.bond_pairs()
    candidates = [(s, e) for s in range(n_sys) for e in range(n_sys, n)
                  if (s, e) not in existing]
    # SWB degree of each environment spin from previously added SE bonds
    degree = {e: 0 for e in range(n_sys, n)}
    for a, b in existing:
        if bond_sector(a, b, n_sys) == SECTOR_SE and (a, b) not in ring_se:
            degree[b] += 1
    gen = rng_swb_se.generator()
    order = gen.permutation(len(candidates))
    bonds = list(spec.bonds)
    accepted = 0
    for k in order:
        if accepted == count:
            break
        s, e = candidates[k]
        if degree[e] >= k_max:
            continue
        strength = _draw_strength(spec.case, SECTOR_SE, spec.j_system,
                                  spec.omega_max, spec.delta_max, gen)
        bonds.append(Bond(s, e, strength, SECTOR_SE))
        degree[e] += 1
        accepted += 1
    if accepted < count:
        raise ValueError(f"cannot place {count} system-environment SWBs with "
                         f"k_max={k_max}; only {accepted} feasible")
    realized = max(degree.values())
    label = spec.label + (f"; se_swb count={count} k_max={k_max} "
                          f"k={realized} seed={rng_swb_se.seed}")
    return replace(spec, bonds=tuple(bonds), label=label)


def add_all_to_all_env(spec: ModelSpec, rng_swb_env: Stream | None = None) -> ModelSpec:
    """Bond every eligible non-neighboring environment pair that is not bonded yet.

    Case I draws strengths from the environment range and therefore needs a
    stream; case II adds isotropic bonds and ignores it.  Idempotent.
    """
    existing = spec.bond_pairs()
    missing = [p for p in _env_swb_candidates(spec) if p not in existing]
    if not missing:
        return spec
    if spec.case == CASE_RANDOM:
        if rng_swb_env is None:
            raise ValueError("case I all-to-all environment bonds need a stream")
        gen = rng_swb_env.generator()
    else:
        gen = None
    bonds = list(spec.bonds)
    for a, b in missing:
        if gen is None:
            strength = (spec.j_system,) * 3
        else:
            strength = _draw_strength(spec.case, SECTOR_ENV, spec.j_system,
                                      spec.omega_max, spec.delta_max, gen)
        bonds.append(Bond(a, b, strength, SECTOR_ENV))
    label = spec.label + f"; all_to_all_env added={len(missing)}"
    return replace(spec, bonds=tuple(bonds), label=label)


def replace_random_env_bonds(spec: ModelSpec, count: int, omega_max: float,
                             rng_random_bonds: Stream) -> ModelSpec:
    """Overwrite the strengths of `count` randomly chosen environment bonds.

    Starts from an isotropic (case II) model and redraws each axis of the
    selected bonds uniformly from [-omega_max, omega_max].  The selection is a
    prefix of a shuffled sequence, so the bond replaced for count 1 is also
    replaced, with identical strengths, for any larger count.
    """
    if count == 0:
        return spec
    if spec.case != CASE_ISOTROPIC:
        raise ValueError("random-bond replacement starts from a case II model")
    env_idx = [i for i, b in enumerate(spec.bonds) if b.sector == SECTOR_ENV]
    if count < 0 or count > len(env_idx):
        raise ValueError(f"requested {count} replacements, model has "
                         f"{len(env_idx)} environment bonds")
    gen = rng_random_bonds.generator()
    order = gen.permutation(len(env_idx))
    bonds = list(spec.bonds)
    for k in order[:count]:
        i = env_idx[k]
        draws = gen.uniform(-omega_max, omega_max, 3)
        bonds[i] = replace(bonds[i], strength=(float(draws[0]), float(draws[1]),
                                               float(draws[2])))
    label = spec.label + (f"; random_bonds count={count} omega={omega_max:g} "
                          f"seed={rng_random_bonds.seed}")
    return replace(spec, bonds=tuple(bonds), label=label)


def spectral_bound(spec: ModelSpec) -> float:
    """Upper bound on the spectral radius of H by the triangle inequality.

    Each S_i^a S_j^a term has spectral radius 1/4, so summing |J|/4 over all
    bond axes dominates ||H||.  Never returns zero (Chebyshev rescaling
    divides by it).
    """
    total = sum(sum(abs(j) for j in b.strength) for b in spec.bonds) / 4.0
    return max(total, ZERO_HAMILTONIAN_FLOOR)


def model_to_text(spec: ModelSpec) -> str:
    """Serialize to the versioned text schema (17 significant digits)."""
    lines = [
        MODEL_FORMAT,
        f"n_system {spec.n_system}",
        f"n_env {spec.n_env}",
        f"case {spec.case}",
        f"j_system {spec.j_system:.17g}",
        f"omega_max {spec.omega_max:.17g}",
        f"delta_max {spec.delta_max:.17g}",
        f"label {spec.label}",
        f"bonds {len(spec.bonds)}",
    ]
    for b in spec.bonds:
        jx, jy, jz = b.strength
        lines.append(f"{b.site_a} {b.site_b} {jx:.17g} {jy:.17g} {jz:.17g}")
    return "\n".join(lines) + "\n"


def model_from_text(text: str) -> ModelSpec:
    lines = text.splitlines()
    if not lines or lines[0] != MODEL_FORMAT:
        raise ValueError(f"not a {MODEL_FORMAT} document")

    fields: dict[str, str] = {}
    for line in lines[1:9]:
        key, _, value = line.partition(" ")
        fields[key] = value
    required = ["n_system", "n_env", "case", "j_system", "omega_max",
                "delta_max", "label", "bonds"]
    if sorted(fields) != sorted(required):
        raise ValueError(f"malformed header, got keys {sorted(fields)}")

    n_system = int(fields["n_system"])
    n_bonds = int(fields["bonds"])
    bond_lines = lines[9:9 + n_bonds]
    if len(bond_lines) != n_bonds:
        raise ValueError("truncated bond list")
    bonds = []
    for line in bond_lines:
        a_s, b_s, jx, jy, jz = line.split()
        a, b = int(a_s), int(b_s)
        bonds.append(Bond(a, b, (float(jx), float(jy), float(jz)),
                          bond_sector(a, b, n_system)))
    return ModelSpec(
        n_system=n_system,
        n_env=int(fields["n_env"]),
        case=fields["case"],
        j_system=float(fields["j_system"]),
        omega_max=float(fields["omega_max"]),
        delta_max=float(fields["delta_max"]),
        bonds=tuple(bonds),
        label=fields["label"],
    )


def save_model(path: str | Path, spec: ModelSpec) -> Path:
    path = Path(path)
    path.write_text(model_to_text(spec))
    return path


def load_model(path: str | Path) -> ModelSpec:
    return model_from_text(Path(path).read_text())
