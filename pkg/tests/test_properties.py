"""Property-based invariants over randomly drawn configurations."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from revqe.ansatz import assemble_qmps, general_param_count, init_params, su2_param_count, u1_param_count
from revqe.model import heisenberg_chain
from revqe.oracle import energy_expectation
from revqe.rng import RngStream
from revqe.simcore import GateOp, apply_gateop, run_schedule


@given(V=st.integers(1, 4), d=st.integers(1, 4), N=st.integers(2, 30))
def test_param_count_formulas_hold(V, d, N):
    if N <= V:
        return
    n_blocks = N - V
    assert general_param_count(V, d, n_blocks) == 3 * d * (V + 1) * n_blocks
    assert u1_param_count(V, d, n_blocks) == 3 * d * (V + 1) * n_blocks
    assert su2_param_count(V, d, n_blocks) == d * (V + 1) * n_blocks
    arch = assemble_qmps(N, V, "general", d)
    assert arch.param_count == general_param_count(V, d, n_blocks)


@settings(max_examples=25, deadline=None)
@given(kind=st.sampled_from(["u1", "su2"]), seed=st.integers(0, 2**30),
       stream=st.integers(0, 100))
def test_z_samples_have_half_filling(kind, seed, stream):
    # Sz conservation: any parameters, any randomness
    N, V = 6, 2
    arch = assemble_qmps(N, V, kind, 1)
    params = init_params(arch.param_count, RngStream(seed, 0))
    bits = run_schedule(arch, params, "z", RngStream(seed, stream))
    assert bits.sum() == N // 2


@settings(max_examples=40, deadline=None)
@given(theta=st.floats(-10, 10, allow_nan=False),
       kind=st.sampled_from(["RX", "RZ", "PSWAP"]))
def test_rotations_are_unitary_for_any_angle(theta, kind):
    rng = np.random.default_rng(3)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    op = GateOp(kind, (0, 2) if kind == "PSWAP" else (1,), 0)
    out = apply_gateop(psi, 3, op, theta)
    assert np.isclose(np.linalg.norm(out), 1.0, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**30))
def test_energy_expectation_within_spectrum_bounds(seed):
    # <H> of any normalized state sits inside the extreme eigenvalues;
    # for the 4-site chain those are -2+... but a loose certified bound
    # is sum of |coefficients|
    H = heisenberg_chain(4)
    bound = sum(abs(t.coefficient) for t in H.terms)
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=16) + 1j * rng.normal(size=16)
    psi /= np.linalg.norm(psi)
    assert abs(energy_expectation(psi, 4, H)) <= bound + 1e-12
