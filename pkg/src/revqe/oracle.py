"""Ground-truth machinery.

* `wide_circuit_state` unrolls a measure-and-reuse architecture onto one
  fresh wire per measurement record position (wire index = lattice site,
  never-measured register qubits such as the SU(2) ancilla take the
  trailing wires) and simulates the full circuit with no collapse.
* `exact_ground_state` diagonalizes the Pauli-term Hamiltonian (dense
  below 9 sites, ARPACK Lanczos above, optional Sz sector restriction).
* `adjoint_gradient` is a reverse-pass exact gradient used purely as a
  test/CI oracle for the parameter-shift rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse.linalg as spla

from .ansatz import Architecture
from .errors import CapacityError, ContractError, NumericalError
from .model import Hamiltonian
from .simcore import (
    _BASIS_PRE,
    ApplyBlock,
    GateOp,
    Measure,
    _bit,
    _perm,
    apply_gateop,
    apply_unitary,
)

WIDE_CAP = 20
DEGENERACY_TOL = 1e-8

_sign_cache: dict[tuple[int, int], np.ndarray] = {}
_index_cache: dict[int, np.ndarray] = {}


def _signs(n: int, q: int) -> np.ndarray:
    key = (n, q)
    if key not in _sign_cache:
        bits = (np.arange(1 << n, dtype=np.int64) >> q) & 1
        _sign_cache[key] = (1 - 2 * bits).astype(np.int8)
    return _sign_cache[key]


def _indices(n: int) -> np.ndarray:
    if n not in _index_cache:
        _index_cache[n] = np.arange(1 << n, dtype=np.int64)
    return _index_cache[n]


def apply_pauli_string(psi: np.ndarray, n: int, sites, axes) -> np.ndarray:
    """(prod_k sigma_{sites[k]}^{axes[k]}) |psi> on a flat 2^n vector."""
    mask = 0
    scalar = 1.0 + 0j
    sign = None
    for q, a in zip(sites, axes):
        if a in ("x", "y"):
            mask |= 1 << q
        if a in ("y", "z"):
            s = _signs(n, q)
            sign = s if sign is None else sign * s
        if a == "y":
            scalar *= -1j
    if mask:
        out = psi[_indices(n) ^ mask]
    else:
        out = psi.copy()
    if sign is not None:
        out *= sign
    if scalar != 1.0:
        out *= scalar
    return out


_ham_cache: dict[tuple[Hamiltonian, int], tuple] = {}


def _compile_hamiltonian(H: Hamiltonian, n: int) -> tuple:
    """Merge all-z terms into one diagonal and matched XX/YY pairs into
    single gathers; everything else falls back to the generic kernel."""
    diag = None
    xy: dict[tuple, dict[str, float]] = {}
    generic = []
    for t in H.terms:
        if all(a == "z" for a in t.axes):
            prod = np.ones(1 << n, dtype=np.float64)
            for q in t.sites:
                prod *= _signs(n, q)
            diag = t.coefficient * prod if diag is None else diag + t.coefficient * prod
        elif len(t.sites) == 2 and t.axes in (("x", "x"), ("y", "y")):
            xy.setdefault(t.sites, {})[t.axes[0]] = (
                xy.get(t.sites, {}).get(t.axes[0], 0.0) + t.coefficient
            )
        else:
            generic.append(t)
    hops = []
    for sites, coefs in xy.items():
        cx, cy = coefs.get("x"), coefs.get("y")
        if cx is not None and cy is not None and abs(cx - cy) < 1e-15:
            # (XX + YY) psi[k] = (1 - s_i s_j) psi[k ^ m]: nonzero only
            # where the two bits differ
            mask = (1 << sites[0]) | (1 << sites[1])
            differ = (_signs(n, sites[0]) != _signs(n, sites[1]))
            hops.append((mask, 2.0 * cx, differ))
        else:
            for a, c in coefs.items():
                from .model import PauliTerm

                generic.append(PauliTerm(c, sites, (a, a)))
    return diag, tuple(hops), tuple(generic)


def apply_hamiltonian(psi: np.ndarray, n: int, H: Hamiltonian) -> np.ndarray:
    key = (H, n)
    if key not in _ham_cache:
        _ham_cache[key] = _compile_hamiltonian(H, n)
    diag, hops, generic = _ham_cache[key]
    res = np.zeros_like(psi)
    if diag is not None:
        res += diag * psi
    idx = _indices(n)
    for mask, coef, differ in hops:
        res += coef * (differ * psi[idx ^ mask])
    for t in generic:
        res += t.coefficient * apply_pauli_string(psi, n, t.sites, t.axes)
    return res


def pauli_expectation(psi: np.ndarray, n: int, sites, axes) -> float:
    return float(np.vdot(psi, apply_pauli_string(psi, n, sites, axes)).real)


def energy_expectation(psi: np.ndarray, n: int, H: Hamiltonian) -> float:
    return float(np.vdot(psi, apply_hamiltonian(psi, n, H)).real)


# ---------------------------------------------------------------------------
# wide (unrolled) circuit
# ---------------------------------------------------------------------------


def wide_gate_sequence(arch: Architecture) -> tuple[int, list[GateOp]]:
    """Unroll the schedule: every qubit life becomes a fresh wire.

    Wire w < num_sites carries the site measured at record position p
    with site_of_position[p-1] == w; never-measured qubits (ancilla) get
    the trailing wires.
    """
    positions: dict[int, list[int]] = {}
    for ev in arch.schedule:
        if isinstance(ev, Measure):
            positions.setdefault(ev.qubit, []).append(ev.position)
    n_extra = 0
    wire_of = {}
    for q in range(arch.register_width):
        if q in positions:
            wire_of[q] = arch.site_of_position[positions[q][0] - 1]
        else:
            wire_of[q] = arch.num_sites + n_extra
            n_extra += 1
    n_wires = arch.num_sites + n_extra

    used: dict[int, int] = {q: 0 for q in positions}
    ops: list[GateOp] = []
    for ev in arch.schedule:
        if isinstance(ev, ApplyBlock):
            for g in arch.blocks[ev.block].gates:
                ops.append(
                    GateOp(g.kind, tuple(wire_of[t] for t in g.targets), g.param_slot)
                )
        else:
            used[ev.qubit] += 1
            if ev.reset:
                nxt = positions[ev.qubit][used[ev.qubit]]
                wire_of[ev.qubit] = arch.site_of_position[nxt - 1]
    return n_wires, ops


def wide_num_wires(arch: Architecture) -> int:
    return arch.num_sites + (1 if arch.ancilla else 0)


def wide_circuit_state(arch: Architecture, params, cap: int = WIDE_CAP) -> np.ndarray:
    """Final N(+ancilla)-wire state of the unrolled circuit.

    Qubit s of the returned vector is lattice site s; the ancilla (if
    any) is the most significant qubit and is checked to be |0>.
    """
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (arch.param_count,):
        raise ContractError(f"expected {arch.param_count} parameters")
    n, ops = wide_gate_sequence(arch)
    if n > cap:
        raise CapacityError(f"wide circuit needs {n} wires, cap is {cap}")
    psi = np.zeros(1 << n, dtype=np.complex128)
    psi[0] = 1.0
    for op in ops:
        theta = params[op.param_slot] if op.param_slot is not None else None
        psi = apply_gateop(psi, n, op, theta)
    if arch.ancilla:
        p1 = float(np.vdot(psi, psi * (1 - _signs(n, n - 1)) / 2).real)
        if p1 > 1e-10:
            raise NumericalError(f"ancilla not disentangled: P(1) = {p1:.3e}")
    return psi


def strip_ancilla(psi: np.ndarray, n_extra: int = 1) -> np.ndarray:
    """Project the trailing wires onto |0> and drop them."""
    dim = psi.shape[0] >> n_extra
    out = psi[:dim].copy()
    norm = np.linalg.norm(out)
    if norm < 1 - 1e-6:
        raise NumericalError("trailing wires carry weight, cannot strip")
    return out / norm


def wide_energy(arch: Architecture, params, H: Hamiltonian, cap: int = WIDE_CAP) -> float:
    psi = wide_circuit_state(arch, params, cap)
    n = int(np.log2(psi.shape[0]))
    return energy_expectation(psi, n, H)


def wide_outcome_distribution(arch: Architecture, params, basis: str, cap: int = WIDE_CAP) -> np.ndarray:
    """Exact Born distribution over N-site bitstrings in a uniform basis.

    Index convention matches run_schedule: bit of site s is bit s of the
    outcome index.  Extra (ancilla) wires are marginalized out.
    """
    psi = wide_circuit_state(arch, params, cap)
    n = int(np.log2(psi.shape[0]))
    pre = _BASIS_PRE[basis.lower()]
    if pre is not None:
        for s in range(arch.num_sites):
            psi = apply_unitary(psi, n, pre, (s,))
    probs = (psi.real**2 + psi.imag**2)
    n_extra = n - arch.num_sites
    if n_extra:
        probs = probs.reshape(1 << n_extra, 1 << arch.num_sites).sum(axis=0)
    return probs


# ---------------------------------------------------------------------------
# adjoint gradient (beyond-paper test oracle)
# ---------------------------------------------------------------------------


def adjoint_gradient(arch: Architecture, params, H: Hamiltonian, cap: int = WIDE_CAP) -> np.ndarray:
    """Exact reverse-pass gradient of <psi(theta)|H|psi(theta)>."""
    return adjoint_energy_gradient(arch, params, H, cap)[1]


def adjoint_energy_gradient(
    arch: Architecture, params, H: Hamiltonian, cap: int = WIDE_CAP
) -> tuple[float, np.ndarray]:
    """(energy, gradient) from one forward and one reverse pass."""
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (arch.param_count,):
        raise ContractError(f"expected {arch.param_count} parameters")
    n, ops = wide_gate_sequence(arch)
    if n > cap:
        raise CapacityError(f"wide circuit needs {n} wires, cap is {cap}")
    psi = np.zeros(1 << n, dtype=np.complex128)
    psi[0] = 1.0
    for op in ops:
        theta = params[op.param_slot] if op.param_slot is not None else None
        psi = apply_gateop(psi, n, op, theta)
    lam = apply_hamiltonian(psi, n, H)
    energy = float(np.vdot(psi, lam).real)
    grad = np.zeros_like(params)
    pair = np.stack([psi, lam])
    for op in reversed(ops):
        if op.param_slot is None:
            pair = apply_gateop(pair, n, op)
            continue
        theta = params[op.param_slot]
        if op.kind in ("PSWAP", "RX"):
            # one gather serves both the generator overlap and the
            # inverse rotation
            perm = _perm(n, "swap" if op.kind == "PSWAP" else "flip", op.targets)
            taken = np.take(pair, perm, axis=-1)
            grad[op.param_slot] += float(np.vdot(pair[1], taken[0]).imag)
            taken *= 1j * np.sin(theta / 2)
            taken += np.cos(theta / 2) * pair
            pair = taken
        else:  # RZ
            sign = 1.0 - 2.0 * _bit(n, op.targets[0])
            grad[op.param_slot] += float(np.vdot(pair[1], pair[0] * sign).imag)
            pair = pair * np.where(sign > 0, np.exp(0.5j * theta), np.exp(-0.5j * theta))
    return energy, grad


# ---------------------------------------------------------------------------
# exact diagonalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroundSolution:
    """Ground energy and an orthonormal basis of the ground space."""

    energy: float
    states: np.ndarray  # (k, 2**num_sites)
    num_sites: int

    @property
    def degeneracy(self) -> int:
        return self.states.shape[0]


def dense_hamiltonian(H: Hamiltonian) -> np.ndarray:
    n = H.num_sites
    if n > 12:
        raise CapacityError("dense matrix not built above 12 sites")
    dim = 1 << n
    mat = np.zeros((dim, dim), dtype=np.complex128)
    eye = np.eye(dim, dtype=np.complex128)
    for t in H.terms:
        cols = np.stack(
            [apply_pauli_string(eye[:, c].copy(), n, t.sites, t.axes) for c in range(dim)],
            axis=1,
        )
        mat += t.coefficient * cols
    return mat


def _sector_indices(n: int, sz: float) -> np.ndarray:
    # bit 0 <-> eigenvalue +1 <-> spin up; Sz = (N - 2 * popcount) / 2
    n_down = n / 2 - sz
    if abs(n_down - round(n_down)) > 1e-12 or not (0 <= round(n_down) <= n):
        raise ContractError(f"Sz = {sz} is not a valid sector for {n} sites")
    n_down = int(round(n_down))
    idx = np.arange(1 << n, dtype=np.int64)
    pop = np.zeros(1 << n, dtype=np.int64)
    for q in range(n):
        pop += (idx >> q) & 1
    return np.nonzero(pop == n_down)[0]


def exact_ground_state(
    H: Hamiltonian,
    sector: float | None = None,
    k: int = 4,
    maxiter: int = 20000,
) -> GroundSolution:
    """Lowest eigenpair(s) of H; all states within the degeneracy tolerance.

    Dense diagonalization below 9 sites, Lanczos (ARPACK) above; the
    optional `sector` restricts the Krylov space to fixed total Sz.
    """
    n = H.num_sites
    if n > 20:
        raise CapacityError("exact diagonalization capped at 20 sites")
    dim = 1 << n

    if n <= 8 and sector is None:
        mat = dense_hamiltonian(H)
        if np.abs(mat - mat.conj().T).max() > 1e-12:
            raise NumericalError("assembled matrix is not Hermitian")
        vals, vecs = np.linalg.eigh(mat)
        e0 = float(vals[0])
        keep = vals <= e0 + DEGENERACY_TOL * max(1.0, abs(e0))
        states = vecs[:, keep].T.copy()
    else:
        if sector is not None:
            idx = _sector_indices(n, sector)
            sdim = idx.shape[0]

            def matvec(v):
                full = np.zeros(dim, dtype=np.complex128)
                full[idx] = v
                return apply_hamiltonian(full, n, H)[idx]

            op = spla.LinearOperator((sdim, sdim), matvec=matvec, dtype=np.complex128)
        else:

            def matvec(v):
                return apply_hamiltonian(np.asarray(v, dtype=np.complex128), n, H)

            op = spla.LinearOperator((dim, dim), matvec=matvec, dtype=np.complex128)

        kk = min(k, op.shape[0] - 2)
        try:
            vals, vecs = spla.eigsh(op, k=kk, which="SA", maxiter=maxiter, tol=1e-11)
        except spla.ArpackNoConvergence as exc:
            raise NumericalError(f"Lanczos did not converge: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        e0 = float(vals[0])
        keep = vals <= e0 + DEGENERACY_TOL * max(1.0, abs(e0))
        states = vecs[:, keep].T
        if sector is not None:
            full_states = np.zeros((states.shape[0], dim), dtype=np.complex128)
            full_states[:, idx] = states
            states = full_states

    for v in states:
        resid = np.linalg.norm(apply_hamiltonian(v, n, H) - e0 * v)
        if resid > 1e-8:
            raise NumericalError(f"eigenpair residual {resid:.2e} exceeds 1e-8")
    return GroundSolution(e0, np.ascontiguousarray(states), n)


@lru_cache(maxsize=16)
def ground_state_cached(H: Hamiltonian, sector: float | None = None) -> GroundSolution:
    return exact_ground_state(H, sector=sector)


def fidelity(a: np.ndarray, b) -> float:
    """|<a|b>|^2, or the squared projection onto a (degenerate) ground space."""
    if isinstance(b, GroundSolution):
        if a.shape[0] != b.states.shape[1]:
            raise ContractError("state dimension does not match ground space")
        return float(sum(abs(np.vdot(g, a)) ** 2 for g in b.states))
    if a.shape != b.shape:
        raise ContractError("state dimensions differ")
    return float(abs(np.vdot(a, b)) ** 2)


def correlation_matrix(arch: Architecture, params, axis: str, cap: int = WIDE_CAP) -> np.ndarray:
    """Exact <sigma_i^axis sigma_j^axis> for all site pairs (diagonal 1)."""
    axis = axis.lower()
    if axis not in ("x", "y", "z"):
        raise ContractError(f"unknown axis {axis!r}")
    N = arch.num_sites
    try:
        psi = wide_circuit_state(arch, params, cap)
    except CapacityError:
        from .estimator import channel_correlation_matrix

        return channel_correlation_matrix(arch, params, axis)
    n = int(np.log2(psi.shape[0]))
    pre = _BASIS_PRE[axis]
    if pre is not None:
        for s in range(N):
            psi = apply_unitary(psi, n, pre, (s,))
    probs = psi.real**2 + psi.imag**2
    signs = np.stack([_signs(n, s).astype(np.float64) for s in range(N)])
    weighted = signs * probs
    corr = weighted @ signs.T
    np.fill_diagonal(corr, 1.0)
    return corr
