"""Architecture assembly: parameter counts, schedules, symmetry structure."""

import json

import numpy as np
import pytest

from revqe.ansatz import (
    Architecture,
    SiteOrdering,
    architecture_to_json,
    assemble_qmps,
    assemble_qpeps,
    general_param_count,
    init_params,
    su2_param_count,
    u1_param_count,
)
from revqe.errors import ContractError
from revqe.model import zigzag_ordering
from revqe.rng import RngStream
from revqe.simcore import ApplyBlock, Measure, run_schedule


def test_param_count_formulas():
    # general/u1: 3 angles per wire per layer; su2: 1 PSWAP per ring
    # pair (= wire) per layer
    assert general_param_count(2, 3, 4) == 3 * 3 * 3 * 4
    assert u1_param_count(3, 2, 5) == 3 * 2 * 4 * 5
    assert su2_param_count(3, 2, 5) == 2 * 4 * 5


@pytest.mark.parametrize("kind", ["general", "u1", "su2"])
def test_qmps_block_count_and_param_total(kind):
    N, V, d = 8, 2, 3
    arch = assemble_qmps(N, V, kind, d)
    assert arch.num_sites == N
    assert len(arch.blocks) == N - V
    # su2 carries one extra ancilla wire for the singlet partner
    assert arch.register_width == V + 1 + (1 if kind == "su2" else 0)
    total = sum(b.param_count for b in arch.blocks)
    assert arch.param_count == total
    # parameter slots tile [0, M) without gaps
    slots = sorted(s for b in arch.blocks for s in range(b.param_start, b.param_stop))
    assert slots == list(range(arch.param_count))


def test_qpeps_param_counts_match_known_sizes():
    assert assemble_qpeps(4, 4, 5).param_count == 180
    # the deeper variant used for gradient studies
    arch = assemble_qpeps(6, 6, 5)
    assert arch.num_sites == 36
    assert arch.register_width == 12


def test_qmps_schedule_measures_every_site_once():
    arch = assemble_qmps(9, 3, "u1", 2)
    positions = [ev.position for ev in arch.schedule if isinstance(ev, Measure)]
    assert sorted(positions) == list(range(1, 10))
    # all but the final measurements are reused (reset)
    resets = [ev.reset for ev in arch.schedule if isinstance(ev, Measure)]
    assert sum(not r for r in resets) == arch.register_width


def test_schedule_interleaves_blocks_and_measurements():
    arch = assemble_qmps(6, 2, "general", 1)
    kinds = ["B" if isinstance(ev, ApplyBlock) else "M" for ev in arch.schedule]
    assert kinds[0] == "B"
    # every block index appears exactly once, in order
    idx = [ev.block for ev in arch.schedule if isinstance(ev, ApplyBlock)]
    assert idx == list(range(len(arch.blocks)))


def test_su2_requires_even_sizes():
    with pytest.raises(ContractError):
        assemble_qmps(7, 2, "su2", 1)  # odd N
    with pytest.raises(ContractError):
        assemble_qmps(8, 3, "su2", 1)  # odd V


def test_su2_initial_state_is_singlet_product():
    # at theta = 0 every PSWAP is the identity, so Z samples of the SU2
    # circuit come from a product of singlets: each consecutive pair of
    # record positions carries exactly one '1'
    arch = assemble_qmps(6, 2, "su2", 1)
    params = np.zeros(arch.param_count)
    for stream in range(12):
        bits = run_schedule(arch, params, "z", RngStream(77, stream))
        by_pos = bits[list(arch.site_of_position)]
        pairs = by_pos.reshape(3, 2).sum(axis=1)
        assert np.all(pairs == 1)


def test_u1_initial_state_is_neel():
    # at theta = 0 the U1 circuit deterministically emits the alternating
    # Sz configuration it conserves around
    arch = assemble_qmps(6, 2, "u1", 1)
    params = np.zeros(arch.param_count)
    bits = run_schedule(arch, params, "z", RngStream(3, 0))
    by_pos = bits[list(arch.site_of_position)]
    assert len(set(by_pos[::2])) == 1 and len(set(by_pos[1::2])) == 1
    assert by_pos[0] != by_pos[1]


def test_zigzag_ordering_snakes():
    order = zigzag_ordering(3, 3)
    # row 0 left-to-right, row 1 right-to-left, ...
    assert order.site_of_position == (0, 1, 2, 5, 4, 3, 6, 7, 8)
    assert order.position_of_site(5) == 4


def test_site_ordering_rejects_non_permutation():
    with pytest.raises(ContractError):
        SiteOrdering((0, 0, 1))


def test_init_params_deterministic_and_small():
    a = init_params(50, RngStream(1, 0))
    b = init_params(50, RngStream(1, 0))
    assert np.array_equal(a, b)
    assert a.shape == (50,)
    assert np.all(np.abs(a) < np.pi)


def test_architecture_json_roundtrip_fields():
    arch = assemble_qmps(6, 2, "su2", 2)
    doc = json.loads(architecture_to_json(arch))
    assert doc["num_sites"] == 6
    assert doc["param_count"] == arch.param_count
    assert len(doc["blocks"]) == len(arch.blocks)


def test_custom_ordering_threads_through():
    order = zigzag_ordering(2, 3)
    arch = assemble_qmps(6, 2, "general", 1, ordering=order)
    assert arch.site_of_position == order.site_of_position
