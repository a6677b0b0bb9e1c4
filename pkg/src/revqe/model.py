"""J1-J2 Heisenberg model on an open square lattice.

Sites are indexed row-major: site = row * Lx + col, rows 0..Ly-1.  The
Hamiltonian is (1/4) sum_<ij> sigma_i . sigma_j + (J2/4) sum_<<ij>>
sigma_i . sigma_j with <ij> the nearest-neighbor bonds and <<ij>> both
diagonals of every unit square, each bond counted once (i < j).  Every
term couples two sites on the same Pauli axis, so the three measurement
bases x, y, z cover all terms exactly once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .ansatz import SiteOrdering
from .errors import ContractError

HAMILTONIAN_FORMAT_VERSION = 1
AXES = ("x", "y", "z")


@dataclass(frozen=True)
class LatticeSpec:
    Lx: int
    Ly: int
    J2: float = 0.0

    def __post_init__(self):
        if self.Lx < 1 or self.Ly < 1:
            raise ContractError("lattice dimensions must be positive")
        if not np.isfinite(self.J2):
            raise ContractError("J2 must be finite")

    @property
    def num_sites(self) -> int:
        return self.Lx * self.Ly

    def site(self, row: int, col: int) -> int:
        return row * self.Lx + col

    def nn_pairs(self) -> list[tuple[int, int]]:
        pairs = []
        for r in range(self.Ly):
            for c in range(self.Lx):
                if c + 1 < self.Lx:
                    pairs.append((self.site(r, c), self.site(r, c + 1)))
                if r + 1 < self.Ly:
                    pairs.append((self.site(r, c), self.site(r + 1, c)))
        return pairs

    def nnn_pairs(self) -> list[tuple[int, int]]:
        pairs = []
        for r in range(self.Ly - 1):
            for c in range(self.Lx - 1):
                pairs.append((self.site(r, c), self.site(r + 1, c + 1)))
                pairs.append((self.site(r, c + 1), self.site(r + 1, c)))
        return [(min(a, b), max(a, b)) for a, b in pairs]


@dataclass(frozen=True)
class PauliTerm:
    """coefficient * prod_k sigma_{sites[k]}^{axes[k]}"""

    coefficient: float
    sites: tuple[int, ...]
    axes: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.sites)) != len(self.sites):
            raise ContractError("term sites must be distinct")
        if len(self.sites) != len(self.axes):
            raise ContractError("sites/axes length mismatch")
        if not np.isfinite(self.coefficient):
            raise ContractError("coefficient must be finite")
        if any(a not in AXES for a in self.axes):
            raise ContractError("axes must be x, y or z")


@dataclass(frozen=True)
class Hamiltonian:
    terms: tuple[PauliTerm, ...]
    num_sites: int

    @property
    def basis_groups(self) -> dict[str, tuple[PauliTerm, ...]]:
        groups: dict[str, list[PauliTerm]] = {a: [] for a in AXES}
        for t in self.terms:
            axis = t.axes[0]
            if any(a != axis for a in t.axes):
                raise ContractError("mixed-axis term cannot be basis-grouped")
            groups[axis].append(t)
        return {a: tuple(ts) for a, ts in groups.items() if ts}


def heisenberg_j1j2(lattice: LatticeSpec) -> Hamiltonian:
    """Frustrated J1-J2 Heisenberg Hamiltonian, open boundary."""
    terms = []
    for i, j in lattice.nn_pairs():
        for a in AXES:
            terms.append(PauliTerm(0.25, (i, j), (a, a)))
    if lattice.J2 != 0.0:
        for i, j in lattice.nnn_pairs():
            for a in AXES:
                terms.append(PauliTerm(0.25 * lattice.J2, (i, j), (a, a)))
    return Hamiltonian(tuple(terms), lattice.num_sites)


def heisenberg_chain(N: int) -> Hamiltonian:
    """Unfrustrated open Heisenberg chain (1 x N lattice)."""
    return heisenberg_j1j2(LatticeSpec(N, 1, 0.0))


def zigzag_ordering(Lx: int, Ly: int) -> SiteOrdering:
    """Boustrophedon path: row 0 left-to-right, row 1 right-to-left, ..."""
    if Lx < 1 or Ly < 1:
        raise ContractError("lattice dimensions must be positive")
    sites = []
    for r in range(Ly):
        cols = range(Lx) if r % 2 == 0 else range(Lx - 1, -1, -1)
        for c in cols:
            sites.append(r * Lx + c)
    return SiteOrdering(tuple(sites))


@dataclass(frozen=True)
class EnergyEstimate:
    mean: float
    stderr: float
    shots: int

    def __post_init__(self):
        if self.stderr < 0:
            raise ContractError("stderr must be non-negative")


def energy_from_samples(H: Hamiltonian, samples: dict[str, np.ndarray]) -> EnergyEstimate:
    """Estimate <H> from per-basis bitstring samples.

    `samples[axis]` is a (shots, num_sites) 0/1 array measured with every
    site in that Pauli basis.  Each term's correlator is the sample mean
    of (-1)^(sum of bits on its support); the standard error combines the
    per-shot energy variance of each basis group independently.
    """
    groups = H.basis_groups
    if not groups:
        return EnergyEstimate(0.0, 0.0, 0)
    total_mean = 0.0
    total_var = 0.0
    total_shots = 0
    for axis, terms in groups.items():
        if axis not in samples or len(samples[axis]) == 0:
            raise ContractError(f"no samples supplied for basis {axis}")
        bits = np.asarray(samples[axis])
        shots = bits.shape[0]
        per_shot = np.zeros(shots, dtype=np.float64)
        for t in terms:
            parity = bits[:, list(t.sites)].sum(axis=1) % 2
            per_shot += t.coefficient * (1.0 - 2.0 * parity)
        total_mean += float(per_shot.mean())
        if shots > 1:
            total_var += float(per_shot.var(ddof=1)) / shots
        total_shots += shots
    return EnergyEstimate(total_mean, float(np.sqrt(total_var)), total_shots)


def hamiltonian_to_json(H: Hamiltonian) -> str:
    doc = {
        "format_version": HAMILTONIAN_FORMAT_VERSION,
        "num_sites": H.num_sites,
        "terms": [
            {"coefficient": t.coefficient, "sites": list(t.sites), "axes": list(t.axes)}
            for t in H.terms
        ],
    }
    return json.dumps(doc, indent=2)
