"""Circuit-block builders and the Q-MPS / Q-PEPS architectures.

Register layout conventions:

* Q-MPS: qubit 0 is the reused physical qubit, qubits 1..V are the
  virtual qubits, and (SU(2) only) qubit V+1 is the ancilla.
* Q-PEPS: qubits 0..Lx-1 are the physical row, qubits Lx..2Lx-1 the
  virtual row (one virtual per physical, V/R = 1).

Within a register the PSWAP layers pair qubits on the ring
(0,1),(1,2),...,(w-2,w-1),(w-1,0), giving exactly `w` two-qubit gates
per layer.  The sequential site ordering is in *record position* space:
position k is the k-th measured bit, and the architecture's site
ordering maps positions onto lattice sites.

Symmetric initial states are injected as non-parametrized gates at the
point where the relevant wire is fresh: the physical qubit at the start
of its block, virtual qubits at the start of block 1.  The U(1) family
starts from the antiferromagnetic product state |1010...> (in position
order); the SU(2) family from the singlet product over position pairs
(1,2),(3,4),....  SU(2) therefore requires even N and even V, so that
the ancilla ends disentangled and every site is paired.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .rng import RngStream
from .simcore import ApplyBlock, GateOp, Measure

ARCH_FORMAT_VERSION = 1


@dataclass(frozen=True)
class SiteOrdering:
    """Bijection between lattice sites and measurement record positions."""

    site_of_position: tuple[int, ...]  # index p-1 -> site

    def __post_init__(self):
        n = len(self.site_of_position)
        if sorted(self.site_of_position) != list(range(n)):
            raise ContractError("site ordering must be a permutation")

    @property
    def num_sites(self) -> int:
        return len(self.site_of_position)

    def position_of_site(self, site: int) -> int:
        return self.site_of_position.index(site) + 1

    @staticmethod
    def identity(n: int) -> "SiteOrdering":
        return SiteOrdering(tuple(range(n)))


@dataclass(frozen=True)
class BlockSpec:
    """One circuit block: a gate list plus its slice of the parameter vector."""

    kind: str  # general | u1 | su2 | qpeps
    width: int
    depth: int
    step_parity: str  # odd | even
    param_start: int
    param_stop: int
    gates: tuple[GateOp, ...]

    @property
    def param_count(self) -> int:
        return self.param_stop - self.param_start


@dataclass(frozen=True)
class Architecture:
    """Full circuit program: blocks, schedule, ordering, parameter map."""

    name: str
    num_sites: int
    register_width: int
    ancilla: bool
    blocks: tuple[BlockSpec, ...]
    schedule: tuple
    site_of_position: tuple[int, ...]
    param_count: int
    meta: dict = field(default_factory=dict)

    def position_of_site(self, site: int) -> int:
        return self.site_of_position.index(site) + 1


def general_param_count(V: int, d: int, n_blocks: int) -> int:
    return 3 * d * (V + 1) * n_blocks


def u1_param_count(V: int, d: int, n_blocks: int) -> int:
    return 3 * d * (V + 1) * n_blocks


def su2_param_count(V: int, d: int, n_blocks: int) -> int:
    return d * (V + 1) * n_blocks


def _ring_pairs(width: int) -> list[tuple[int, int]]:
    return [(i, (i + 1) % width) for i in range(width)]


def _check_vd(V: int, d: int):
    if V < 1:
        raise ContractError("V must be >= 1")
    if d < 1:
        raise ContractError("d must be >= 1")


def build_general_block(V: int, d: int, param_slots: range) -> BlockSpec:
    """Hardware-efficient block: RX,RZ,RX on every qubit + CNOT chain, d layers."""
    _check_vd(V, d)
    w = V + 1
    if len(param_slots) != 3 * d * w:
        raise ContractError(
            f"general block needs {3 * d * w} slots, got {len(param_slots)}"
        )
    slots = iter(param_slots)
    gates = []
    for _ in range(d):
        for q in range(w):
            gates.append(GateOp("RX", (q,), next(slots)))
            gates.append(GateOp("RZ", (q,), next(slots)))
            gates.append(GateOp("RX", (q,), next(slots)))
        for q in range(w - 1):
            gates.append(GateOp("CNOT", (q, q + 1)))
    return BlockSpec(
        "general", w, d, "odd", param_slots.start, param_slots.stop, tuple(gates)
    )


def build_u1_block(V: int, d: int, step_parity: str, param_slots: range) -> BlockSpec:
    """Sz-conserving block: RZ / PSWAP-ring / RZ per layer; X on odd steps."""
    _check_vd(V, d)
    w = V + 1
    if len(param_slots) != 3 * d * w:
        raise ContractError(f"u1 block needs {3 * d * w} slots, got {len(param_slots)}")
    slots = iter(param_slots)
    gates = []
    if step_parity == "odd":
        gates.append(GateOp("X", (0,)))
    for _ in range(d):
        for q in range(w):
            gates.append(GateOp("RZ", (q,), next(slots)))
        for a, b in _ring_pairs(w):
            gates.append(GateOp("PSWAP", (a, b), next(slots)))
        for q in range(w):
            gates.append(GateOp("RZ", (q,), next(slots)))
    return BlockSpec("u1", w, d, step_parity, param_slots.start, param_slots.stop, tuple(gates))


def build_su2_block(
    V: int, d: int, step_parity: str, param_slots: range, ancilla: int
) -> BlockSpec:
    """Singlet-preserving block: singlet prep / ancilla swap + PSWAP-ring layers.

    Odd steps create a singlet between the physical qubit and the
    ancilla; even steps swap the stored partner back onto the physical
    qubit.  The PSWAP layers act on the physical + virtual ring only.
    """
    _check_vd(V, d)
    w = V + 1
    if ancilla <= V:
        raise ContractError("su2 block requires a dedicated ancilla qubit")
    if len(param_slots) != d * w:
        raise ContractError(f"su2 block needs {d * w} slots, got {len(param_slots)}")
    slots = iter(param_slots)
    gates = []
    if step_parity == "odd":
        gates.append(GateOp("X", (0,)))
        gates.append(GateOp("H", (0,)))
        gates.append(GateOp("INV_CNOT", (0, ancilla)))
    else:
        gates.append(GateOp("SWAP", (ancilla, 0)))
    for _ in range(d):
        for a, b in _ring_pairs(w):
            gates.append(GateOp("PSWAP", (a, b), next(slots)))
    return BlockSpec("su2", w, d, step_parity, param_slots.start, param_slots.stop, tuple(gates))


def _singlet_prep(first: int, second: int) -> list[GateOp]:
    # X, H, INV_CNOT on |00> -> (|01> - |10>)/sqrt(2)
    return [GateOp("X", (first,)), GateOp("H", (first,)), GateOp("INV_CNOT", (first, second))]


def assemble_qmps(
    N: int,
    V: int,
    block_kind: str,
    d: int,
    ordering: SiteOrdering | None = None,
) -> Architecture:
    """Sequential measure-and-reuse MPS circuit with N - V blocks."""
    if block_kind not in ("general", "u1", "su2"):
        raise ContractError(f"unknown block kind {block_kind!r}")
    if not (N > V >= 1):
        raise ContractError("need N > V >= 1")
    _check_vd(V, d)
    if block_kind == "su2" and (N % 2 or V % 2):
        raise ContractError("su2 architecture requires even N and even V")
    if ordering is None:
        ordering = SiteOrdering.identity(N)
    if ordering.num_sites != N:
        raise ContractError("ordering size does not match N")

    n_blocks = N - V
    ancilla = block_kind == "su2"
    width = V + 1 + (1 if ancilla else 0)
    per_block = d * (V + 1) if block_kind == "su2" else 3 * d * (V + 1)

    blocks = []
    for k in range(1, n_blocks + 1):
        parity = "odd" if k % 2 == 1 else "even"
        slots = range((k - 1) * per_block, k * per_block)
        if block_kind == "general":
            blk = build_general_block(V, d, slots)
        elif block_kind == "u1":
            blk = build_u1_block(V, d, parity, slots)
        else:
            blk = build_su2_block(V, d, parity, slots, ancilla=V + 1)
        blocks.append(blk)

    # virtual-qubit initialization, prepended to block 1
    prelude: list[GateOp] = []
    if block_kind == "u1":
        for j in range(V):
            if (N - V + 1 + j) % 2 == 1:  # odd record position -> |1>
                prelude.append(GateOp("X", (1 + j,)))
    elif block_kind == "su2":
        for j in range(0, V, 2):
            prelude.extend(_singlet_prep(1 + j, 2 + j))
    if prelude:
        b0 = blocks[0]
        blocks[0] = BlockSpec(
            b0.kind, b0.width, b0.depth, b0.step_parity,
            b0.param_start, b0.param_stop, tuple(prelude) + b0.gates,
        )

    schedule = []
    for k in range(1, n_blocks):
        schedule.append(ApplyBlock(k - 1))
        schedule.append(Measure(0, k, True))
    schedule.append(ApplyBlock(n_blocks - 1))
    schedule.append(Measure(0, n_blocks, False))
    for j in range(V):
        schedule.append(Measure(1 + j, n_blocks + 1 + j, False))

    return Architecture(
        name=f"qmps-{block_kind}",
        num_sites=N,
        register_width=width,
        ancilla=ancilla,
        blocks=tuple(blocks),
        schedule=tuple(schedule),
        site_of_position=ordering.site_of_position,
        param_count=per_block * n_blocks,
        meta={"kind": block_kind, "N": N, "V": V, "d": d},
    )


def assemble_qpeps(Lx: int, Ly: int, d: int, ordering: SiteOrdering | None = None) -> Architecture:
    """Row-by-row measure-and-reuse PEPS circuit (V/R = 1).

    Ly - 1 blocks; block b carries lattice row b-1 on the physical
    qubits, the virtual row carries lattice row Ly-1 and is measured
    with the last physical row.  Each entangle layer PSWAPs (i) each
    physical qubit with its own virtual qubit, (ii) neighboring physical
    qubits (periodic within the row), (iii) neighboring virtual qubits.
    Fresh rows are initialized as singlet pairs, so the whole ansatz is
    SU(2) symmetric (PSWAP conserves total spin) and every Z-basis
    sample has N/2 ones.
    """
    if Lx < 2 or Ly < 2:
        raise ContractError("need Lx, Ly >= 2")
    if Lx % 2:
        raise ContractError("singlet row initialization requires even Lx")
    _check_vd(1, d)
    from .model import zigzag_ordering  # lattice convention lives in model

    N = Lx * Ly
    if ordering is None:
        ordering = zigzag_ordering(Lx, Ly)
    if ordering.num_sites != N:
        raise ContractError("ordering size does not match lattice")

    phys = list(range(Lx))
    virt = list(range(Lx, 2 * Lx))
    row_pairs = _ring_pairs(Lx) if Lx > 2 else [(0, 1)]
    per_layer = Lx + 2 * len(row_pairs)
    n_blocks = Ly - 1
    per_block = d * per_layer

    def pos(r: int, c: int) -> int:
        return ordering.position_of_site(r * Lx + c)

    blocks = []
    for b in range(1, n_blocks + 1):
        r = b - 1
        gates: list[GateOp] = []
        for c in range(0, Lx, 2):
            gates.extend(_singlet_prep(phys[c], phys[c + 1]))
        if b == 1:
            for c in range(0, Lx, 2):
                gates.extend(_singlet_prep(virt[c], virt[c + 1]))
        slots = iter(range((b - 1) * per_block, b * per_block))
        for _ in range(d):
            for c in range(Lx):
                gates.append(GateOp("PSWAP", (phys[c], virt[c]), next(slots)))
            for a, c in row_pairs:
                gates.append(GateOp("PSWAP", (phys[a], phys[c]), next(slots)))
            for a, c in row_pairs:
                gates.append(GateOp("PSWAP", (virt[a], virt[c]), next(slots)))
        blocks.append(
            BlockSpec("qpeps", 2 * Lx, d, "odd" if b % 2 else "even",
                      (b - 1) * per_block, b * per_block, tuple(gates))
        )

    schedule = []
    for b in range(1, n_blocks):
        schedule.append(ApplyBlock(b - 1))
        for c in range(Lx):
            schedule.append(Measure(phys[c], pos(b - 1, c), True))
    schedule.append(ApplyBlock(n_blocks - 1))
    for c in range(Lx):
        schedule.append(Measure(phys[c], pos(Ly - 2, c), False))
    for c in range(Lx):
        schedule.append(Measure(virt[c], pos(Ly - 1, c), False))

    return Architecture(
        name="qpeps",
        num_sites=N,
        register_width=2 * Lx,
        ancilla=False,
        blocks=tuple(blocks),
        schedule=tuple(schedule),
        site_of_position=ordering.site_of_position,
        param_count=per_block * n_blocks,
        meta={"kind": "qpeps", "Lx": Lx, "Ly": Ly, "d": d},
    )


def init_params(M: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    """M independent uniform draws from [0, pi]."""
    if M < 1:
        raise ContractError("M must be >= 1")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return gen.random(M) * np.pi


# ---------------------------------------------------------------------------
# serialization (--dump-circuit)
# ---------------------------------------------------------------------------


def architecture_to_json(arch: Architecture) -> str:
    """Versioned JSON document describing the full circuit program."""
    def gate_dict(g: GateOp):
        d = {"kind": g.kind, "targets": list(g.targets)}
        if g.param_slot is not None:
            d["param_slot"] = g.param_slot
        return d

    events = []
    for ev in arch.schedule:
        if isinstance(ev, ApplyBlock):
            events.append({"apply_block": ev.block})
        else:
            events.append(
                {"measure": {"qubit": ev.qubit, "position": ev.position, "reset": ev.reset}}
            )
    doc = {
        "format_version": ARCH_FORMAT_VERSION,
        "name": arch.name,
        "num_sites": arch.num_sites,
        "register_width": arch.register_width,
        "ancilla": arch.ancilla,
        "param_count": arch.param_count,
        "meta": arch.meta,
        "site_of_position": list(arch.site_of_position),
        "blocks": [
            {
                "kind": b.kind,
                "width": b.width,
                "depth": b.depth,
                "step_parity": b.step_parity,
                "param_slots": [b.param_start, b.param_stop],
                "gates": [gate_dict(g) for g in b.gates],
            }
            for b in arch.blocks
        ],
        "schedule": events,
    }
    return json.dumps(doc, indent=2)
