"""Dense state-vector simulator with mid-circuit measurement and reset.

Conventions (used everywhere in the package):

* Qubit ``q`` is the least-significant bit ``q`` of the amplitude index:
  basis state ``|b_{n-1} ... b_1 b_0>`` has index ``sum(b_q << q)``.
* Two-qubit gate matrices are written in the basis ``|t0 t1>`` where
  ``targets[0]`` supplies the more significant bit of the 4x4 index.
* Measurement outcome bit 0 maps to eigenvalue +1 of the measured Pauli,
  bit 1 to eigenvalue -1.  An X-basis measurement is realized as
  (H, Z-measure, H); a Y-basis measurement as (S^dagger H, Z-measure,
  H S), i.e. the rotation maps the +1 eigenstate onto |0>.
* A measurement consumes exactly one uniform draw; outcome is 0 when the
  draw is < p(outcome 0).  Reset is measure-then-flip and consumes one
  further draw, so sampled statistics match a hardware reset.

All amplitudes are complex128.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ContractError, NumericalError
from .rng import RngStream, uniform_matrix

QUBIT_CAP = 24

PARAMETRIZED_KINDS = frozenset({"RX", "RZ", "PSWAP"})
GATE_KINDS = frozenset({"RX", "RZ", "X", "H", "CNOT", "INV_CNOT", "CZ", "SWAP", "PSWAP"})

_I2 = np.eye(2, dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
_S = np.diag([1, 1j]).astype(np.complex128)
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
)
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)
_INV_CNOT = np.array(
    [[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=np.complex128
)
_CZ = np.diag([1, 1, 1, -1]).astype(np.complex128)

PAULI = {"x": _X, "y": _Y, "z": _Z}

# basis-change pairs: apply `pre` before a Z measurement, `post` after,
# so that the +1 eigenstate of the measured Pauli maps to |0>.
_BASIS_PRE = {"z": None, "x": _H, "y": _H @ _S.conj().T}
_BASIS_POST = {"z": None, "x": _H, "y": _S @ _H}


@dataclass(frozen=True)
class GateOp:
    """One gate of a circuit block.

    `param_slot` indexes the global parameter vector and is present iff
    the kind is parametrized (RX, RZ, PSWAP).  All parametrized kinds
    have the form exp(-i theta Sigma / 2) with Sigma^2 = 1, so the
    parameter-shift rule applies.
    """

    kind: str
    targets: tuple[int, ...]
    param_slot: int | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ContractError(f"unknown gate kind {self.kind!r}")
        if (self.param_slot is not None) != (self.kind in PARAMETRIZED_KINDS):
            raise ContractError(f"{self.kind} param_slot mismatch")
        if len(set(self.targets)) != len(self.targets):
            raise ContractError("gate targets must be distinct")


@dataclass(frozen=True)
class ApplyBlock:
    block: int


@dataclass(frozen=True)
class Measure:
    qubit: int
    position: int  # record position, 1-based
    reset: bool


@dataclass
class StateVector:
    """Dense amplitudes of an `num_qubits`-qubit register."""

    num_qubits: int
    amplitudes: np.ndarray

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())


def init_state(num_qubits: int, cap: int = QUBIT_CAP) -> StateVector:
    """All-zeros product state |0...0>."""
    if num_qubits < 1:
        raise ContractError("num_qubits must be >= 1")
    if num_qubits > cap:
        raise CapacityError(f"num_qubits={num_qubits} exceeds cap {cap}")
    amp = np.zeros(1 << num_qubits, dtype=np.complex128)
    amp[0] = 1.0
    return StateVector(num_qubits, amp)


def gate_matrix(kind: str, theta: float | None = None) -> np.ndarray:
    """The exact unitary for a gate kind (2x2 or 4x4)."""
    if kind in PARAMETRIZED_KINDS:
        if theta is None:
            raise ContractError(f"{kind} requires an angle")
        c, s = np.cos(theta / 2), np.sin(theta / 2)
        if kind == "RX":
            return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
        if kind == "RZ":
            return np.diag([np.exp(-1j * theta / 2), np.exp(1j * theta / 2)]).astype(
                np.complex128
            )
        return c * np.eye(4, dtype=np.complex128) - 1j * s * _SWAP  # PSWAP
    if theta is not None:
        raise ContractError(f"{kind} takes no angle")
    fixed = {
        "X": _X,
        "H": _H,
        "CNOT": _CNOT,
        "INV_CNOT": _INV_CNOT,
        "CZ": _CZ,
        "SWAP": _SWAP,
    }
    if kind not in fixed:
        raise ContractError(f"unknown gate kind {kind!r}")
    return fixed[kind]


def gate_generator(kind: str) -> np.ndarray:
    """Sigma with gate = exp(-i theta Sigma / 2); Sigma^2 = 1."""
    if kind == "RX":
        return _X
    if kind == "RZ":
        return _Z
    if kind == "PSWAP":
        return _SWAP
    raise ContractError(f"{kind} is not parametrized")


# ---------------------------------------------------------------------------
# low-level kernels: arrays of shape (..., 2**n), leading axes are batch
# ---------------------------------------------------------------------------


def apply_unitary(arr: np.ndarray, n: int, U: np.ndarray, targets) -> np.ndarray:
    """Apply a k-qubit unitary to the given qubits of (batched) amplitudes."""
    for q in targets:
        if not (0 <= q < n):
            raise ContractError(f"target {q} out of range for {n} qubits")
    lead = arr.shape[:-1]
    off = len(lead)
    k = len(targets)
    t = arr.reshape(lead + (2,) * n)
    axes = [off + n - 1 - q for q in targets]
    t = np.moveaxis(t, axes, range(off, off + k))
    shp = t.shape
    t = np.ascontiguousarray(t).reshape(lead + (1 << k, -1))
    t = np.matmul(U, t)
    t = t.reshape(shp)
    t = np.moveaxis(t, range(off, off + k), axes)
    return np.ascontiguousarray(t).reshape(lead + (1 << n,))


def apply_diagonal(arr: np.ndarray, n: int, diag: np.ndarray, targets) -> np.ndarray:
    """Apply a diagonal k-qubit gate in place (cheap path for RZ/CZ)."""
    lead = arr.shape[:-1]
    off = len(lead)
    k = len(targets)
    t = arr.reshape(lead + (2,) * n)
    axes = [off + n - 1 - q for q in targets]
    d = np.asarray(diag, dtype=np.complex128).reshape((2,) * k)
    # reorder d's axes to ascending tensor-axis order, then pad singletons
    order = np.argsort(axes)
    d = np.transpose(d, order)
    sorted_axes = sorted(axes)
    shape = [1] * t.ndim
    for ax in sorted_axes:
        shape[ax] = 2
    t *= d.reshape(shape)
    return arr


_perm_cache: dict[tuple, np.ndarray] = {}
_bit_cache: dict[tuple[int, int], np.ndarray] = {}


def _bit(n: int, q: int) -> np.ndarray:
    key = (n, q)
    if key not in _bit_cache:
        _bit_cache[key] = ((np.arange(1 << n, dtype=np.int64) >> q) & 1).astype(np.float64)
    return _bit_cache[key]


def _perm(n: int, kind: str, targets) -> np.ndarray:
    """Cached index permutation realizing a classical bit operation."""
    key = (n, kind, targets)
    if key not in _perm_cache:
        idx = np.arange(1 << n, dtype=np.int64)
        if kind == "flip":
            out = idx ^ (1 << targets[0])
        elif kind == "cnot":
            c, t = targets
            out = idx ^ (((idx >> c) & 1) << t)
        elif kind == "inv_cnot":
            c, t = targets
            out = idx ^ ((1 ^ ((idx >> c) & 1)) << t)
        else:  # swap
            a, b = targets
            diff = ((idx >> a) & 1) ^ ((idx >> b) & 1)
            out = idx ^ (diff * ((1 << a) | (1 << b)))
        _perm_cache[key] = out
    return _perm_cache[key]


_SQRT_HALF = 1.0 / np.sqrt(2.0)


def _rotate_mix(arr: np.ndarray, perm: np.ndarray, theta: float) -> np.ndarray:
    """cos(t/2) arr - i sin(t/2) arr[perm] with minimal temporaries."""
    out = np.take(arr, perm, axis=-1)
    out *= -1j * np.sin(theta / 2)
    out += np.cos(theta / 2) * arr
    return out


def apply_gateop(arr: np.ndarray, n: int, op: GateOp, theta: float | None = None) -> np.ndarray:
    """Apply one GateOp using bit-arithmetic kernels (batched over leading axes)."""
    kind, targets = op.kind, op.targets
    if kind == "RZ":
        b = _bit(n, targets[0])
        em, ep = np.exp(-0.5j * theta), np.exp(0.5j * theta)
        return arr * np.where(b == 0.0, em, ep)
    if kind == "RX":
        return _rotate_mix(arr, _perm(n, "flip", targets), theta)
    if kind == "PSWAP":
        return _rotate_mix(arr, _perm(n, "swap", targets), theta)
    if kind == "X":
        return np.take(arr, _perm(n, "flip", targets), axis=-1)
    if kind == "H":
        out = np.take(arr, _perm(n, "flip", targets), axis=-1)
        out += (1.0 - 2.0 * _bit(n, targets[0])) * arr
        out *= _SQRT_HALF
        return out
    if kind == "CNOT":
        return np.take(arr, _perm(n, "cnot", targets), axis=-1)
    if kind == "INV_CNOT":
        return np.take(arr, _perm(n, "inv_cnot", targets), axis=-1)
    if kind == "SWAP":
        return np.take(arr, _perm(n, "swap", targets), axis=-1)
    if kind == "CZ":
        return arr * (1.0 - 2.0 * (_bit(n, targets[0]) * _bit(n, targets[1])))
    return apply_unitary(arr, n, gate_matrix(kind, theta), targets)


def apply_gateop_inverse(arr: np.ndarray, n: int, op: GateOp, theta: float | None = None) -> np.ndarray:
    """Inverse gate: rotations negate the angle, the rest are involutions."""
    if op.kind in PARAMETRIZED_KINDS:
        return apply_gateop(arr, n, op, -theta)
    return apply_gateop(arr, n, op)


def apply_generator(arr: np.ndarray, n: int, op: GateOp) -> np.ndarray:
    """Apply the Hermitian generator S of a rotation exp(-i theta S / 2)."""
    if op.kind == "RX":
        return np.take(arr, _perm(n, "flip", op.targets), axis=-1)
    if op.kind == "RZ":
        return arr * (1.0 - 2.0 * _bit(n, op.targets[0]))
    if op.kind == "PSWAP":
        return np.take(arr, _perm(n, "swap", op.targets), axis=-1)
    raise ContractError(f"gate kind {op.kind!r} has no rotation generator")


def measure_probs0(arr: np.ndarray, n: int, qubit: int) -> np.ndarray:
    """P(outcome 0) of a Z measurement per batch element."""
    lead = arr.shape[:-1]
    off = len(lead)
    t = arr.reshape(lead + (2,) * n)
    ax = off + n - 1 - qubit
    t = np.moveaxis(t, ax, off)
    t = t.reshape(lead + (2, -1))
    return np.einsum("...i,...i->...", t[..., 0, :].real, t[..., 0, :].real) + np.einsum(
        "...i,...i->...", t[..., 0, :].imag, t[..., 0, :].imag
    )


def collapse_z(arr: np.ndarray, n: int, qubit: int, bits, probs0) -> np.ndarray:
    """Project onto the sampled Z outcome and renormalize (batched)."""
    lead = arr.shape[:-1]
    off = len(lead)
    t = arr.reshape(lead + (2,) * n)
    ax = off + n - 1 - qubit
    t = np.moveaxis(t, ax, off)
    shp = t.shape
    t = np.ascontiguousarray(t).reshape(lead + (2, -1))
    bits = np.asarray(bits)
    p_kept = np.where(bits == 0, probs0, 1.0 - np.asarray(probs0))
    if np.any(p_kept < 1e-14):
        raise NumericalError("measurement branch norm underflow")
    if lead:
        sel = np.where(bits[..., None] == 0, t[..., 0, :], t[..., 1, :])
        sel = sel / np.sqrt(p_kept)[..., None]
        t[..., 0, :] = np.where(bits[..., None] == 0, sel, 0.0)
        t[..., 1, :] = np.where(bits[..., None] == 0, 0.0, sel)
    else:
        b = int(bits)
        t[b] /= np.sqrt(p_kept)
        t[1 - b] = 0.0
    t = t.reshape(shp)
    t = np.moveaxis(t, off, ax)
    return np.ascontiguousarray(t).reshape(lead + (1 << n,))


def force_zero(arr: np.ndarray, n: int, qubit: int, bits) -> np.ndarray:
    """After a Z collapse with known outcome bits, flip the qubit to |0>.

    The post-collapse state factorizes as |b> on the qubit, so the flip
    is a slice move.
    """
    lead = arr.shape[:-1]
    off = len(lead)
    t = arr.reshape(lead + (2,) * n)
    ax = off + n - 1 - qubit
    t = np.moveaxis(t, ax, off)
    shp = t.shape
    t = np.ascontiguousarray(t).reshape(lead + (2, -1))
    bits = np.asarray(bits)
    if lead:
        t[..., 0, :] = np.where(bits[..., None] == 0, t[..., 0, :], t[..., 1, :])
        t[..., 1, :] = 0.0
    else:
        if int(bits) == 1:
            t[0] = t[1]
            t[1] = 0.0
    t = t.reshape(shp)
    t = np.moveaxis(t, off, ax)
    return np.ascontiguousarray(t).reshape(lead + (1 << n,))


# ---------------------------------------------------------------------------
# StateVector-level operations
# ---------------------------------------------------------------------------


def apply_gate(state: StateVector, gate: GateOp, theta: float | None = None) -> StateVector:
    """Apply one gate to a StateVector (returns the same storage)."""
    state.amplitudes = apply_gateop(state.amplitudes, state.num_qubits, gate, theta)
    return state


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


def measure_and_collapse(state: StateVector, qubit: int, basis: str, rng):
    """Projective measurement of one qubit in the X/Y/Z basis.

    Returns (bit, state); bit 0 <-> eigenvalue +1.  Consumes one uniform.
    """
    basis = basis.lower()
    if basis not in ("x", "y", "z"):
        raise ContractError(f"unknown basis {basis!r}")
    gen = _as_generator(rng)
    n = state.num_qubits
    pre, post = _BASIS_PRE[basis], _BASIS_POST[basis]
    if pre is not None:
        state.amplitudes = apply_unitary(state.amplitudes, n, pre, (qubit,))
    p0 = float(measure_probs0(state.amplitudes, n, qubit))
    bit = 0 if gen.random() < p0 else 1
    state.amplitudes = collapse_z(state.amplitudes, n, qubit, bit, p0)
    if post is not None:
        state.amplitudes = apply_unitary(state.amplitudes, n, post, (qubit,))
    return bit, state


def reset_qubit(state: StateVector, qubit: int, rng) -> StateVector:
    """Physical reset: Z-measure then conditional X.  Consumes one uniform."""
    gen = _as_generator(rng)
    n = state.num_qubits
    p0 = float(measure_probs0(state.amplitudes, n, qubit))
    bit = 0 if gen.random() < p0 else 1
    state.amplitudes = collapse_z(state.amplitudes, n, qubit, bit, p0)
    state.amplitudes = force_zero(state.amplitudes, n, qubit, bit)
    return state


# ---------------------------------------------------------------------------
# schedule execution
# ---------------------------------------------------------------------------


def schedule_draw_count(arch) -> int:
    """Uniform draws consumed by one run of the schedule."""
    total = 0
    for ev in arch.schedule:
        if isinstance(ev, Measure):
            total += 2 if ev.reset else 1
    return total


def _apply_block(arr, n, block, params):
    for op in block.gates:
        theta = params[op.param_slot] if op.param_slot is not None else None
        arr = apply_gateop(arr, n, op, theta)
    return arr


def run_schedule(arch, params, basis: str, rng) -> np.ndarray:
    """Run the full measure-and-reuse schedule once.

    Returns the N measured bits indexed by lattice site (record positions
    are mapped through the architecture's site ordering).  All
    measurements of the run use the same basis.
    """
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (arch.param_count,):
        raise ContractError(
            f"expected {arch.param_count} parameters, got {params.shape}"
        )
    gen = _as_generator(rng)
    state = init_state(arch.register_width)
    bits = np.zeros(arch.num_sites, dtype=np.uint8)
    for ev in arch.schedule:
        if isinstance(ev, ApplyBlock):
            state.amplitudes = _apply_block(
                state.amplitudes, state.num_qubits, arch.blocks[ev.block], params
            )
        else:
            bit, state = measure_and_collapse(state, ev.qubit, basis, gen)
            bits[arch.site_of_position[ev.position - 1]] = bit
            if ev.reset:
                state = reset_qubit(state, ev.qubit, gen)
    return bits


def run_schedule_batch(
    arch, params, basis: str, seed: int, n_shots: int, first_stream: int = 0
) -> np.ndarray:
    """Vectorized equivalent of `n_shots` serial run_schedule calls.

    Shot j uses RngStream(seed, first_stream + j) and consumes its draws
    in the same order as the serial path, so the two agree bit for bit.
    """
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (arch.param_count,):
        raise ContractError(
            f"expected {arch.param_count} parameters, got {params.shape}"
        )
    basis = basis.lower()
    if basis not in ("x", "y", "z"):
        raise ContractError(f"unknown basis {basis!r}")
    n = arch.register_width
    draws = uniform_matrix(seed, n_shots, schedule_draw_count(arch), first_stream)
    col = 0
    arr = np.zeros((n_shots, 1 << n), dtype=np.complex128)
    arr[:, 0] = 1.0
    bits_out = np.zeros((n_shots, arch.num_sites), dtype=np.uint8)
    pre, post = _BASIS_PRE[basis], _BASIS_POST[basis]
    for ev in arch.schedule:
        if isinstance(ev, ApplyBlock):
            arr = _apply_block(arr, n, arch.blocks[ev.block], params)
        else:
            if pre is not None:
                arr = apply_unitary(arr, n, pre, (ev.qubit,))
            p0 = measure_probs0(arr, n, ev.qubit)
            bits = (draws[:, col] >= p0).astype(np.uint8)
            col += 1
            arr = collapse_z(arr, n, ev.qubit, bits, p0)
            if post is not None:
                arr = apply_unitary(arr, n, post, (ev.qubit,))
            bits_out[:, arch.site_of_position[ev.position - 1]] = bits
            if ev.reset:
                # reset = Z-measure + conditional flip on the basis eigenstate
                p0r = measure_probs0(arr, n, ev.qubit)
                rbits = (draws[:, col] >= p0r).astype(np.uint8)
                col += 1
                arr = collapse_z(arr, n, ev.qubit, rbits, p0r)
                arr = force_zero(arr, n, ev.qubit, rbits)
    return bits_out
