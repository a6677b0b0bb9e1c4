"""Adam training loop and the gate-count runtime estimator.

Gradient engines:

* "shift"   -- parameter-shift rule, exact or sampled (the hardware-
  faithful protocol; sampled mode gives every shift evaluation its own
  shot budget and seed family).
* "adjoint" -- exact reverse-pass gradients on the unrolled circuit.
  Orders of magnitude faster classically; numerically identical to
  exact-mode parameter shift, so it serves as the quick path for exact
  training when the unrolled circuit fits in memory.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .ansatz import Architecture, init_params
from .errors import ContractError, TrainingError
from .estimator import exact_energy, parameter_shift_gradient, sample_energy
from .model import Hamiltonian
from .oracle import (
    GroundSolution,
    WIDE_CAP,
    adjoint_energy_gradient,
    fidelity,
    strip_ancilla,
    wide_circuit_state,
    wide_num_wires,
)
from .rng import RngStream, derive_seed

TRACE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class AdamState:
    """Bias-corrected Adam moments."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n_params: int, lr: float = 0.1) -> "AdamState":
        return cls(np.zeros(n_params), np.zeros(n_params), 0, lr)


def adam_step(state: AdamState, grad: np.ndarray, params: np.ndarray):
    """One Adam update; returns (new params, new state)."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.shape or grad.shape != state.m.shape:
        raise ContractError("gradient/parameter length mismatch")
    if not np.all(np.isfinite(grad)):
        bad = np.nonzero(~np.isfinite(grad))[0]
        raise TrainingError(f"non-finite gradient components at {bad.tolist()}")
    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grad
    v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, m=m, v=v, t=t)


@dataclass
class TrainConfig:
    arch: Architecture
    hamiltonian: Hamiltonian
    mode: str = "exact"  # exact | sampled
    gradient_engine: str = "shift"  # shift | adjoint (exact mode only)
    steps: int = 500
    batch: int = 1024  # shots per basis, sampled mode
    lr: float = 0.1
    seed: int = 0
    record_fidelity: bool = False
    fidelity_every: int = 50
    ground: GroundSolution | None = None  # required when record_fidelity
    workers: int = 1
    trace_path: str | None = None  # JSONL, flushed per step
    initial_params: np.ndarray | None = None
    initial_adam: AdamState | None = None

    def __post_init__(self):
        if self.steps < 1:
            raise ContractError("steps must be >= 1")
        if self.mode not in ("exact", "sampled"):
            raise ContractError(f"unknown mode {self.mode!r}")
        if self.mode == "sampled" and self.batch < 1:
            raise ContractError("sampled mode needs batch >= 1")
        if self.gradient_engine not in ("shift", "adjoint"):
            raise ContractError(f"unknown gradient engine {self.gradient_engine!r}")
        if self.gradient_engine == "adjoint" and self.mode != "exact":
            raise ContractError("adjoint gradients are exact-mode only")
        if self.record_fidelity and self.ground is None:
            raise ContractError("record_fidelity requires a ground solution")


@dataclass
class TrainTrace:
    records: list = field(default_factory=list)
    final_params: np.ndarray | None = None
    final_adam: AdamState | None = None


def _trace_fidelity(arch: Architecture, params, ground: GroundSolution) -> float:
    psi = wide_circuit_state(arch, params)
    if arch.ancilla:
        psi = strip_ancilla(psi)
    return fidelity(psi, ground)


def train_loop(config: TrainConfig) -> TrainTrace:
    """Fixed-step Adam descent with a per-step JSONL-able trace.

    All randomness flows from config.seed: parameter initialization uses
    stream 0, and sampled step k derives its shot seeds from tags
    (2k, 2k+1) so re-runs are bit-identical.
    """
    arch, H = config.arch, config.hamiltonian
    if config.initial_params is not None:
        params = np.asarray(config.initial_params, dtype=np.float64).copy()
        if params.shape != (arch.param_count,):
            raise ContractError("initial parameter length mismatch")
    else:
        params = init_params(arch.param_count, RngStream(config.seed, 0))
    adam = config.initial_adam or AdamState.fresh(arch.param_count, config.lr)
    can_fid = config.record_fidelity and wide_num_wires(arch) <= WIDE_CAP

    trace = TrainTrace()
    sink = open(config.trace_path, "w") if config.trace_path else None
    t_start = time.time()
    try:
        for step in range(1, config.steps + 1):
            if config.mode == "exact":
                if config.gradient_engine == "adjoint":
                    energy, grad = adjoint_energy_gradient(arch, params, H)
                    stderr = 0.0
                else:
                    grad = parameter_shift_gradient(arch, params, H, mode="exact").values
                    energy = exact_energy(arch, params, H)
                    stderr = 0.0
            else:
                est = parameter_shift_gradient(
                    arch, params, H, mode="sampled",
                    shots_per_basis=config.batch,
                    seed=derive_seed(config.seed, 2 * step),
                    workers=config.workers,
                )
                grad = est.values
                e_est = sample_energy(
                    arch, params, H, config.batch,
                    derive_seed(config.seed, 2 * step + 1), config.workers,
                )
                energy, stderr = e_est.mean, e_est.stderr

            record = {
                "format_version": TRACE_FORMAT_VERSION,
                "step": step,
                "energy": energy,
                "stderr": stderr,
                "grad_norm": float(np.linalg.norm(grad)),
                "fidelity": None,
                "wall_time": time.time() - t_start,
            }
            if can_fid and (step % config.fidelity_every == 0 or step == config.steps):
                record["fidelity"] = _trace_fidelity(arch, params, config.ground)
            trace.records.append(record)
            if sink:
                sink.write(json.dumps(record) + "\n")
                sink.flush()
            params, adam = adam_step(adam, grad, params)
    finally:
        if sink:
            sink.close()
    trace.final_params = params
    trace.final_adam = adam
    return trace


def runtime_estimate(steps: int, M: int, batch: int, bases: int, t_gate: float) -> float:
    """Total device time for a full training run, in seconds.

    Product of: steps, M tunable parameters, batch shots, 2 shift
    evaluations, `bases` measurement settings, and M gates per circuit
    at t_gate seconds each (about 1.2e7 M^2 t_gate at the defaults).
    """
    if steps <= 0 or M <= 0 or batch <= 0 or bases <= 0 or t_gate <= 0:
        raise ContractError("all runtime factors must be positive")
    return steps * M * batch * 2 * bases * M * t_gate
