"""combqfi: optimal adaptive strategies for quantum channel estimation.

Computes the quantum Fisher information attainable with the most general
(adaptive, ancilla-assisted) N-use estimation strategies for phase estimation
under noise, via a tensor-network see-saw whose cost is linear in N, with
cross-validation against full quantum-comb semidefinite programs and
closed-form benchmarks.
"""

__version__ = "0.1.0"
