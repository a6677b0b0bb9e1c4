"""1D cluster state: two circuit constructions, its bond-2 MPS, and the
post-selected (SLOCC) second-neighbor correlation protocol.

The qubit-efficient construction keeps one physical and one virtual
qubit: entangle, measure the physical qubit, reset, SWAP the virtual
state in, and repeat.  It produces the same outcome statistics as the
N-qubit circuit in every product basis.

The plain cluster state has no two-point correlations at all.  Applying
S = D H R(gamma) with D = diag(cos theta, sin theta) to one site and
post-selecting creates <z_{i-1} z_{i+1}> = cos(2 theta) sin(gamma).
The handedness/offset of the z-rotation R is fixed by that target:
R(gamma) = exp(-i (gamma - pi/2) Z / 2).  With the plain rotation
exp(-i gamma Z / 2) the same protocol gives cos(2 theta) cos(gamma) --
the two conventions differ only by relabeling gamma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ansatz import Architecture, BlockSpec
from .errors import ContractError, PostSelectionError
from .oracle import _signs, wide_circuit_state
from .rng import RngStream
from .simcore import ApplyBlock, GateOp, Measure, apply_diagonal, apply_unitary, _H

_SQRT_HALF = 1.0 / np.sqrt(2.0)


def cluster_architecture(N: int, efficient: bool) -> Architecture:
    """Circuit program preparing and measuring the N-site cluster state.

    efficient=False: N wires, Hadamards then a CZ chain, measure all.
    efficient=True: 2 wires (physical=0, virtual=1) with measure, reset
    and SWAP mediating the chain entanglement.
    """
    if N < 2:
        raise ContractError("cluster state needs at least 2 sites")
    sites = tuple(range(N))
    if not efficient:
        gates = [GateOp("H", (q,)) for q in range(N)]
        gates += [GateOp("CZ", (q, q + 1)) for q in range(N - 1)]
        block = BlockSpec("cluster", N, 1, "odd", 0, 0, tuple(gates))
        schedule = [ApplyBlock(0)] + [Measure(q, q + 1, False) for q in range(N)]
        return Architecture(
            "cluster-wide", N, N, False, (block,), tuple(schedule), sites, 0
        )
    first = BlockSpec(
        "cluster", 2, 1, "odd", 0, 0,
        (GateOp("H", (0,)), GateOp("H", (1,)), GateOp("CZ", (0, 1))),
    )
    stepper = BlockSpec(
        "cluster", 2, 1, "even", 0, 0,
        (GateOp("SWAP", (0, 1)), GateOp("H", (1,)), GateOp("CZ", (0, 1))),
    )
    blocks = (first,) + (stepper,) * (N - 2)
    schedule = []
    for k in range(N - 1):
        schedule.append(ApplyBlock(k))
        schedule.append(Measure(0, k + 1, reset=k < N - 2))
    schedule.append(Measure(1, N, reset=False))
    return Architecture(
        "cluster-efficient", N, 2, False, blocks, tuple(schedule), sites, 0
    )


# MPS tensors: interior A_b = |b><b| H reproduces the circuit amplitudes
# exactly; boundaries are <+-|/sqrt(2) on the left and |b> on the right.
_A = (
    np.array([[1, 1], [0, 0]], dtype=np.complex128) * _SQRT_HALF,
    np.array([[0, 0], [1, -1]], dtype=np.complex128) * _SQRT_HALF,
)
_LEFT = (
    np.array([1, 1], dtype=np.complex128) / 2.0,
    np.array([1, -1], dtype=np.complex128) / 2.0,
)
_RIGHT = (
    np.array([1, 0], dtype=np.complex128),
    np.array([0, 1], dtype=np.complex128),
)


def cluster_mps_amplitude(N: int, bits) -> complex:
    """<bits|cluster> from the bond-dimension-2 matrix product."""
    bits = list(bits)
    if len(bits) != N:
        raise ContractError(f"bitstring length {len(bits)} != {N}")
    if any(b not in (0, 1) for b in bits):
        raise ContractError("bits must be 0 or 1")
    vec = _LEFT[bits[0]]
    for b in bits[1:-1]:
        vec = vec @ _A[b]
    return complex(vec @ _RIGHT[bits[-1]])


def _slocc_rotation(gamma: float) -> np.ndarray:
    # z-rotation with the offset that makes the post-selected correlation
    # come out as cos(2 theta) sin(gamma); see module docstring
    half = 0.5 * (gamma - np.pi / 2)
    return np.array([np.exp(-1j * half), np.exp(1j * half)])


@dataclass(frozen=True)
class SloccSpec:
    """Single-site SLOCC operation D H Rz(gamma), D = diag(cos t, sin t).

    `site` is 0-based and needs both neighbors: 0 < site < N-1.
    """

    site: int
    theta: float
    gamma: float


def _slocc_state(N: int, spec: SloccSpec) -> np.ndarray:
    """Normalized S_i |cluster>."""
    if not 0 < spec.site < N - 1:
        raise ContractError("SLOCC site needs neighbors on both sides")
    psi = wide_circuit_state(cluster_architecture(N, efficient=False), np.zeros(0))
    rz = _slocc_rotation(spec.gamma)
    psi = apply_diagonal(psi, N, rz, (spec.site,))
    psi = apply_unitary(psi, N, _H, (spec.site,))
    psi = apply_diagonal(
        psi, N, np.array([np.cos(spec.theta), np.sin(spec.theta)]), (spec.site,)
    )
    norm = np.linalg.norm(psi)
    if norm < 1e-12:
        raise PostSelectionError("SLOCC operator annihilates the state")
    return psi / norm


def slocc_correlation(
    N: int,
    spec: SloccSpec,
    shots: int | None = None,
    seed: int = 0,
) -> tuple[float, float]:
    """<z_{i-1} z_{i+1}> after the SLOCC operation; analytically
    cos(2 theta) sin(gamma).

    Exact path (shots=None) returns (value, kept_fraction) with the kept
    fraction equal to the squared norm |S psi|^2.  The sampled path
    measures site i in the basis rotated by H Rz(gamma) and keeps shot
    outcome b with probability cos^2(theta) for b=0 and sin^2(theta) for
    b=1, which realizes D stochastically; the neighbors' Z product is
    averaged over kept shots.
    """
    i = spec.site
    if shots is None:
        psi = _slocc_state(N, spec)
        probs = psi.real**2 + psi.imag**2
        value = float(np.sum(probs * _signs(N, i - 1) * _signs(N, i + 1)))
        # kept fraction = acceptance probability of the sampled protocol
        raw = wide_circuit_state(cluster_architecture(N, efficient=False), np.zeros(0))
        rz = _slocc_rotation(spec.gamma)
        raw = apply_diagonal(raw, N, rz, (i,))
        raw = apply_unitary(raw, N, _H, (i,))
        raw = apply_diagonal(
            raw, N, np.array([np.cos(spec.theta), np.sin(spec.theta)]), (i,)
        )
        return value, float(np.vdot(raw, raw).real)

    if shots < 1:
        raise ContractError("shots must be positive")
    if not 0 < i < N - 1:
        raise ContractError("SLOCC site needs neighbors on both sides")
    # rotated-basis Born distribution, then stochastic acceptance
    psi = wide_circuit_state(cluster_architecture(N, efficient=False), np.zeros(0))
    rz = _slocc_rotation(spec.gamma)
    psi = apply_diagonal(psi, N, rz, (i,))
    psi = apply_unitary(psi, N, _H, (i,))
    probs = psi.real**2 + psi.imag**2
    gen = RngStream(seed, 0).generator()
    outcomes = gen.choice(1 << N, size=shots, p=probs / probs.sum())
    b_i = (outcomes >> i) & 1
    accept_p = np.where(b_i == 0, np.cos(spec.theta) ** 2, np.sin(spec.theta) ** 2)
    kept = gen.random(shots) < accept_p
    n_kept = int(kept.sum())
    if n_kept == 0:
        raise PostSelectionError("no shots survived post-selection")
    s_prod = (1 - 2.0 * ((outcomes >> (i - 1)) & 1)) * (
        1 - 2.0 * ((outcomes >> (i + 1)) & 1)
    )
    return float(s_prod[kept].mean()), n_kept / shots


def slocc_analytic(spec: SloccSpec) -> float:
    return float(np.cos(2 * spec.theta) * np.sin(spec.gamma))
