"""Energy and gradient estimation for measure-and-reuse circuits.

Three evaluation paths:

* sampled  -- batched state-vector shots of the small register, grouped
  into the three uniform measurement bases; unbiased, with standard
  errors.
* wide     -- exact expectation on the unrolled circuit (oracle module).
* channel  -- exact expectation that never leaves the small register: the
  register density matrix is pushed through the measure/reset channels
  and recorded-outcome observables become Pauli insertions at the
  corresponding measurement events.  Cost is independent of the number
  of sites, so this is the path for long chains.

The channel pair trick: for <s_i s_j> with site i measured before site j,
branch the density matrix at i's event (insert sigma_i, then apply the
usual reset channel) and read Tr(sigma_j rho_branch) at j's event.  All
channels applied in between are trace preserving, so one branch per
earlier site yields every pair expectation in a single schedule pass.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ansatz import Architecture, assemble_qmps, init_params
from .errors import CapacityError, ContractError
from .model import EnergyEstimate, Hamiltonian, PauliTerm, heisenberg_chain, energy_from_samples
from .oracle import wide_energy, wide_num_wires
from .rng import RngStream, derive_seed
from .simcore import (
    PAULI,
    ApplyBlock,
    Measure,
    apply_gateop,
    apply_gateop_inverse,
    apply_unitary,
    run_schedule_batch,
)

CHANNEL_WIDTH_CAP = 12
_SHOT_CHUNK = 4096
_AXIS_TAG = {"x": 0, "y": 1, "z": 2}


# ---------------------------------------------------------------------------
# sampled path
# ---------------------------------------------------------------------------


def _sample_chunk(arch, params, axis, seed, n_shots, first_stream):
    return run_schedule_batch(arch, params, axis, seed, n_shots, first_stream)


def sample_bits(
    arch: Architecture,
    params,
    axis: str,
    n_shots: int,
    seed: int,
    workers: int = 1,
) -> np.ndarray:
    """(n_shots, num_sites) outcome bits; shot j is RngStream(seed, j).

    Results are independent of chunking, so any worker count reproduces
    the serial run exactly.
    """
    chunks = []
    start = 0
    while start < n_shots:
        count = min(_SHOT_CHUNK, n_shots - start)
        chunks.append((start, count))
        start += count
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [
                pool.submit(_sample_chunk, arch, params, axis, seed, c, s)
                for s, c in chunks
            ]
            parts = [f.result() for f in futs]
    else:
        parts = [_sample_chunk(arch, params, axis, seed, c, s) for s, c in chunks]
    return np.concatenate(parts, axis=0)


def sample_energy(
    arch: Architecture,
    params,
    H: Hamiltonian,
    shots_per_basis: int,
    seed: int,
    workers: int = 1,
) -> EnergyEstimate:
    """Unbiased <H> estimate from shots_per_basis shots in each needed basis."""
    if shots_per_basis < 2:
        raise ContractError("need at least 2 shots per basis for a standard error")
    samples = {}
    for axis in sorted(H.basis_groups):
        axis_seed = derive_seed(seed, _AXIS_TAG[axis])
        samples[axis] = sample_bits(arch, params, axis, shots_per_basis, axis_seed, workers)
    return energy_from_samples(H, samples)


# ---------------------------------------------------------------------------
# channel path
# ---------------------------------------------------------------------------


def _dm_gate(rho: np.ndarray, n: int, op, theta) -> np.ndarray:
    # U rho U+: rows via the gate, columns via its complex conjugate
    # (conj == inverse for every supported kind: rotations negate the
    # angle, the rest are real involutions).
    rho = apply_gateop(rho.T, n, op, theta).T
    return apply_gateop_inverse(rho, n, op, theta)


def _dm_insert_left(rho: np.ndarray, n: int, mat: np.ndarray, qubit: int) -> np.ndarray:
    return apply_unitary(rho.T, n, mat, (qubit,)).T


def _dm_reset(rho: np.ndarray, n: int, qubit: int) -> np.ndarray:
    """Measure-and-reset channel: trace out the qubit, reinject |0><0|."""
    lo = 1 << qubit
    hi = 1 << (n - 1 - qubit)
    t = rho.reshape(hi, 2, lo, hi, 2, lo)
    traced = t[:, 0, :, :, 0, :] + t[:, 1, :, :, 1, :]
    out = np.zeros_like(t)
    out[:, 0, :, :, 0, :] = traced
    return out.reshape(rho.shape)


def _dm_value(rho: np.ndarray, n: int, axis: str, qubit: int) -> float:
    return float(np.trace(_dm_insert_left(rho, n, PAULI[axis], qubit)).real)


def _site_events(arch: Architecture) -> dict[int, int]:
    """site -> index of its Measure event in the schedule."""
    out = {}
    for k, ev in enumerate(arch.schedule):
        if isinstance(ev, Measure):
            out[arch.site_of_position[ev.position - 1]] = k
    return out


def channel_pass(
    arch: Architecture,
    params,
    singles: dict[int, str],
    pairs: dict[tuple[int, int], tuple[str, str]],
) -> tuple[dict[int, float], dict[tuple[int, int], float]]:
    """One schedule pass computing recorded-outcome expectations.

    singles[i] = axis  ->  <s_i>;  pairs[(i, j)] = (axis_i, axis_j)  ->
    <s_i s_j>, where s is the +-1 eigenvalue the hardware run would have
    recorded for that site in that basis.
    """
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (arch.param_count,):
        raise ContractError(f"expected {arch.param_count} parameters")
    n = arch.register_width
    if n > CHANNEL_WIDTH_CAP:
        raise CapacityError(f"register width {n} exceeds channel cap {CHANNEL_WIDTH_CAP}")
    event_of = _site_events(arch)
    for i, j in pairs:
        if i == j:
            raise ContractError("pair sites must differ")
    # orient every pair so its first element is measured first
    oriented = {}
    for (i, j), (ai, aj) in pairs.items():
        if event_of[i] <= event_of[j]:
            oriented[(i, j)] = ((i, ai), (j, aj))
        else:
            oriented[(i, j)] = ((j, aj), (i, ai))
    partners: dict[int, list] = {}  # early site -> [(late site, late axis, key)]
    branch_axis: dict[int, str] = {}
    for key, ((e, ae), (l, al)) in oriented.items():
        if e in branch_axis and branch_axis[e] != ae:
            raise ContractError(f"conflicting branch axes for site {e}")
        branch_axis[e] = ae
        partners.setdefault(e, []).append((l, al, key))

    dim = 1 << n
    rho = np.zeros((dim, dim), dtype=np.complex128)
    rho[0, 0] = 1.0
    branches: dict[int, np.ndarray] = {}
    single_vals: dict[int, float] = {}
    pair_vals: dict[tuple, float] = {}

    for ev in arch.schedule:
        if isinstance(ev, ApplyBlock):
            for g in arch.blocks[ev.block].gates:
                theta = params[g.param_slot] if g.param_slot is not None else None
                rho = _dm_gate(rho, n, g, theta)
                for s in branches:
                    branches[s] = _dm_gate(branches[s], n, g, theta)
            continue
        site = arch.site_of_position[ev.position - 1]
        q = ev.qubit
        for s, b in branches.items():
            for l, al, key in partners.get(s, ()):
                if l == site:
                    pair_vals[key] = _dm_value(b, n, al, q)
        if site in singles:
            single_vals[site] = _dm_value(rho, n, singles[site], q)
        if site in partners:
            b = _dm_insert_left(rho, n, PAULI[branch_axis[site]], q)
            branches[site] = _dm_reset(b, n, q) if ev.reset else b
        if ev.reset:
            rho = _dm_reset(rho, n, q)
            done = [
                s for s in branches if all(key in pair_vals for _, _, key in partners[s])
            ]
            for s in done:
                del branches[s]
            for s in list(branches):
                branches[s] = _dm_reset(branches[s], n, q)
    return single_vals, pair_vals


def channel_energy(arch: Architecture, params, H: Hamiltonian) -> float:
    """Exact <H> via density-matrix channel contraction of the register."""
    total = 0.0
    for axis, terms in H.basis_groups.items():
        singles = {}
        pairs = {}
        const = 0.0
        for t in terms:
            if len(t.sites) == 1:
                singles[t.sites[0]] = axis
            elif len(t.sites) == 2:
                pairs[t.sites] = (axis, axis)
            else:
                raise ContractError("channel energy supports 1- and 2-site terms")
        sv, pv = channel_pass(arch, params, singles, pairs)
        for t in terms:
            if len(t.sites) == 1:
                total += t.coefficient * sv[t.sites[0]]
            else:
                total += t.coefficient * pv[t.sites]
        total += const
    return total


def channel_correlation_matrix(arch: Architecture, params, axis: str) -> np.ndarray:
    """<s_i s_j> for every site pair via one channel pass (diagonal 1)."""
    N = arch.num_sites
    pairs = {(i, j): (axis, axis) for i in range(N) for j in range(i + 1, N)}
    _, pv = channel_pass(arch, params, {}, pairs)
    corr = np.eye(N)
    for (i, j), v in pv.items():
        corr[i, j] = corr[j, i] = v
    return corr


# ---------------------------------------------------------------------------
# exact energy dispatch and parameter-shift gradients
# ---------------------------------------------------------------------------


def exact_energy(arch: Architecture, params, H: Hamiltonian, method: str = "auto") -> float:
    """Exact <H>, choosing the unrolled or the channel path by cost."""
    if method == "wide":
        return wide_energy(arch, params, H)
    if method == "channel":
        return channel_energy(arch, params, H)
    if method != "auto":
        raise ContractError(f"unknown method {method!r}")
    wires = wide_num_wires(arch)
    if wires <= 16 or arch.register_width > CHANNEL_WIDTH_CAP:
        return wide_energy(arch, params, H)
    return channel_energy(arch, params, H)


@dataclass(frozen=True)
class GradientEstimate:
    """Parameter-shift gradient; stderr is zero for exact evaluation."""

    values: np.ndarray
    stderr: np.ndarray
    mode: str
    shots_per_basis: int


def _shifted(params: np.ndarray, i: int, delta: float) -> np.ndarray:
    out = params.copy()
    out[i] += delta
    return out


def parameter_shift_gradient(
    arch: Architecture,
    params,
    H: Hamiltonian,
    mode: str = "exact",
    shots_per_basis: int = 0,
    seed: int = 0,
    workers: int = 1,
    components=None,
) -> GradientEstimate:
    """dE/dtheta_i = (E(theta + pi/2 e_i) - E(theta - pi/2 e_i)) / 2.

    Every gate generator squares to one, so the two-point rule is exact.
    Sampled mode gives each of the 2M evaluations its own seed family.
    """
    params = np.asarray(params, dtype=np.float64)
    if components is None:
        components = range(arch.param_count)
    values = np.zeros(arch.param_count)
    errs = np.zeros(arch.param_count)
    for i in components:
        if mode == "exact":
            ep = exact_energy(arch, _shifted(params, i, np.pi / 2), H)
            em = exact_energy(arch, _shifted(params, i, -np.pi / 2), H)
            values[i] = 0.5 * (ep - em)
        elif mode == "sampled":
            rp = sample_energy(
                arch, _shifted(params, i, np.pi / 2), H, shots_per_basis,
                derive_seed(seed, 2 * i), workers,
            )
            rm = sample_energy(
                arch, _shifted(params, i, -np.pi / 2), H, shots_per_basis,
                derive_seed(seed, 2 * i + 1), workers,
            )
            values[i] = 0.5 * (rp.mean - rm.mean)
            errs[i] = 0.5 * np.hypot(rp.stderr, rm.stderr)
        else:
            raise ContractError(f"unknown mode {mode!r}")
    return GradientEstimate(values, errs, mode, shots_per_basis if mode == "sampled" else 0)


# ---------------------------------------------------------------------------
# gradient variance study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GradientStats:
    """Spread of one designated gradient component for one configuration.

    sigma_g: std of the exact component over random parameter draws.
    sigma_s: std of the sampled estimator at a fixed parameter point
    (NaN when no shot budget was requested); r_gs = sigma_g / sigma_s.
    """

    kind: str
    num_sites: int
    virtual: int
    depth: int
    component: int
    sigma_g: float
    sigma_s: float
    r_gs: float
    draws: int
    shots_per_basis: int


def designated_component(arch: Architecture) -> int:
    """First parameter of the final block: present at every system size."""
    return arch.blocks[-1].param_start


def component_exact_samples(
    arch: Architecture, H: Hamiltonian, component: int, draws: int, seed: int
) -> np.ndarray:
    """Exact gradient component at `draws` random parameter points."""
    out = np.zeros(draws)
    for t in range(draws):
        params = init_params(arch.param_count, RngStream(seed, t))
        ep = exact_energy(arch, _shifted(params, component, np.pi / 2), H)
        em = exact_energy(arch, _shifted(params, component, -np.pi / 2), H)
        out[t] = 0.5 * (ep - em)
    return out


def pooled_exact_samples(
    arch: Architecture, H: Hamiltonian, draws: int, seed: int
) -> np.ndarray:
    """Full exact gradient at `draws` random points, shape (draws, M)."""
    out = np.zeros((draws, arch.param_count))
    for t in range(draws):
        params = init_params(arch.param_count, RngStream(seed, t))
        out[t] = parameter_shift_gradient(arch, params, H).values
    return out


def component_sampled_estimates(
    arch: Architecture,
    H: Hamiltonian,
    component: int,
    params,
    shots_per_basis: int,
    reps: int,
    seed: int,
    workers: int = 1,
) -> np.ndarray:
    """Repeated shot-based estimates of one component at fixed parameters."""
    out = np.zeros(reps)
    params = np.asarray(params, dtype=np.float64)
    for r in range(reps):
        rp = sample_energy(
            arch, _shifted(params, component, np.pi / 2), H, shots_per_basis,
            derive_seed(seed, 2 * r), workers,
        )
        rm = sample_energy(
            arch, _shifted(params, component, -np.pi / 2), H, shots_per_basis,
            derive_seed(seed, 2 * r + 1), workers,
        )
        out[r] = 0.5 * (rp.mean - rm.mean)
    return out


def gradient_variance_study(
    kind: str,
    sweep: str,
    values,
    N: int = 16,
    V: int = 4,
    d: int = 5,
    draws: int = 200,
    shots_per_basis: int = 0,
    reps: int = 50,
    seed: int = 0,
    workers: int = 1,
    pooled: bool = False,
    component: int | None = None,
) -> list[GradientStats]:
    """sigma_g (and optionally sigma_s, r_gs) along an N or V sweep.

    The studied observable is the designated component of the open-chain
    Heisenberg gradient (overridable per-study via `component`, counted
    from the last block's param_start); with pooled=True, sigma_g is instead taken over
    every component of every draw (component reported as -1).  sigma_s is
    always measured at the designated component, at the first random draw.
    """
    if sweep not in ("N", "V"):
        raise ContractError("sweep must be 'N' or 'V'")
    results = []
    for val in values:
        n_sites, n_virt = (val, V) if sweep == "N" else (N, val)
        arch = assemble_qmps(n_sites, n_virt, kind, d)
        H = heisenberg_chain(n_sites)
        comp = designated_component(arch) + (component or 0)
        if comp >= arch.param_count:
            raise ContractError("component offset exceeds last block")
        if pooled:
            g = pooled_exact_samples(arch, H, draws, derive_seed(seed, n_sites * 64 + n_virt))
        else:
            g = component_exact_samples(arch, H, comp, draws, derive_seed(seed, n_sites * 64 + n_virt))
        sigma_g = float(g.std(ddof=1))
        sigma_s = float("nan")
        r_gs = float("nan")
        if shots_per_basis:
            params = init_params(arch.param_count, RngStream(derive_seed(seed, n_sites * 64 + n_virt), 0))
            s = component_sampled_estimates(
                arch, H, comp, params, shots_per_basis, reps,
                derive_seed(seed, n_sites * 64 + n_virt + 1), workers,
            )
            sigma_s = float(s.std(ddof=1))
            r_gs = sigma_g / sigma_s
        results.append(
            GradientStats(
                kind, n_sites, n_virt, d, -1 if pooled else comp,
                sigma_g, sigma_s, r_gs, draws, shots_per_basis,
            )
        )
    return results
