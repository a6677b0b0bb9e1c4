"""Qubit-efficient variational eigensolver.

Simulates matrix-product-state and PEPS-structured variational circuits
on a small measure-and-reset register, trains them against Heisenberg
Hamiltonians with parameter-shift gradients, and verifies everything
against exact wide-circuit, channel-contraction, and diagonalization
oracles.
"""

__version__ = "0.1.0"
