import numpy as np
import pytest

from revqe.ansatz import assemble_qmps, init_params
from revqe.model import heisenberg_chain
from revqe.rng import RngStream


@pytest.fixture
def small_arch():
    """A small general-block Q-MPS with random parameters."""
    arch = assemble_qmps(5, 2, "general", 2)
    params = init_params(arch.param_count, RngStream(123, 0))
    return arch, params


@pytest.fixture
def chain5():
    return heisenberg_chain(5)
