"""Cluster-state demo: reuse circuit vs MPS, correlations, SLOCC surgery."""

import numpy as np
import pytest

from revqe.cluster import (
    SloccSpec,
    cluster_architecture,
    cluster_mps_amplitude,
    slocc_analytic,
    slocc_correlation,
)
from revqe.errors import PostSelectionError
from revqe.oracle import correlation_matrix, wide_circuit_state
from revqe.simcore import run_schedule_batch


def test_efficient_uses_two_qubits():
    arch = cluster_architecture(8, efficient=True)
    assert arch.register_width == 2
    wide = cluster_architecture(8, efficient=False)
    assert wide.register_width == 8


@pytest.mark.parametrize("N", [2, 3, 5, 8])
def test_wide_and_efficient_amplitudes_agree(N):
    # both circuits take no parameters; compare full wide state against
    # the MPS form, which the efficient schedule was derived from
    wide = cluster_architecture(N, efficient=False)
    psi = wide_circuit_state(wide, np.zeros(0))
    want = np.array([cluster_mps_amplitude(N, [(k >> q) & 1 for q in range(N)])
                     for k in range(2**N)])
    # global phase freedom
    k0 = np.argmax(np.abs(want))
    phase = psi[k0] / want[k0]
    assert np.allclose(psi, phase * want, atol=1e-12)
    assert abs(abs(phase) - 1.0) < 1e-12


def test_mps_amplitudes_uniform_magnitude():
    # every Z string has probability 2^-N on the 1D cluster state
    N = 6
    amps = [cluster_mps_amplitude(N, [(k >> q) & 1 for q in range(N)])
            for k in range(2**N)]
    assert np.allclose(np.abs(amps), 2 ** (-N / 2), atol=1e-12)


def test_two_point_correlations_vanish():
    arch = cluster_architecture(6, efficient=False)
    for axis in "xyz":
        C = correlation_matrix(arch, np.zeros(0), axis)
        off = C - np.diag(np.diag(C))
        assert np.max(np.abs(off)) < 1e-10


def test_efficient_sampling_matches_wide_distribution():
    # crude TV check on Z outcome frequencies, small N so the histogram
    # is well resolved at modest shot counts
    N, shots = 4, 4000
    a = run_schedule_batch(cluster_architecture(N, True), np.zeros(0), "z", 7, shots)
    b = run_schedule_batch(cluster_architecture(N, False), np.zeros(0), "z", 8, shots)
    pows = 1 << np.arange(N)
    ha = np.bincount(a @ pows, minlength=2**N) / shots
    hb = np.bincount(b @ pows, minlength=2**N) / shots
    assert 0.5 * np.abs(ha - hb).sum() < 0.05


def test_slocc_exact_matches_analytic():
    for theta, gamma in [(0.0, np.pi / 2), (0.3, 1.1), (np.pi / 5, -0.7), (1.2, 0.0)]:
        spec = SloccSpec(site=2, theta=theta, gamma=gamma)
        val, kept = slocc_correlation(6, spec)
        assert val == pytest.approx(slocc_analytic(spec), abs=1e-10)
        assert 0.0 < kept <= 1.0


def test_slocc_creates_second_neighbor_correlation():
    # theta=0, gamma=pi/2: the deformed state has <z z> = 1 across the
    # operated site, where the bare cluster state has exactly 0
    spec = SloccSpec(site=3, theta=0.0, gamma=np.pi / 2)
    val, _ = slocc_correlation(7, spec)
    assert val == pytest.approx(1.0, abs=1e-10)


def test_slocc_sampled_agrees_with_exact():
    spec = SloccSpec(site=2, theta=0.4, gamma=0.9)
    exact, _ = slocc_correlation(6, spec)
    val, kept = slocc_correlation(6, spec, shots=20000, seed=12)
    # binomial-ish stderr on a +-1 observable over the kept shots
    n_kept = kept * 20000
    se = np.sqrt(max(1e-12, 1 - exact**2) / n_kept)
    assert abs(val - exact) < 4 * se + 1e-3


def test_slocc_all_shots_rejected():
    # theta = pi/2 kills the b=0 branch; a site prepared near |0> in the
    # rotated basis then rejects nearly everything -- force the edge case
    spec = SloccSpec(site=1, theta=np.pi / 2, gamma=0.2)
    with pytest.raises(PostSelectionError):
        slocc_correlation(4, spec, shots=1, seed=0)
