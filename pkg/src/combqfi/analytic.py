"""Closed-form references, protocol recursions, and fixed-strategy scoring.

Everything here is deterministic and cheap: exact two-use and per-use bounds
for the dephasing models, the step-wise recursion giving the optimal
measurement-feedback protocol under transversal damping, and an evaluator
that links a hand-specified strategy (a list of tooth Kraus sets) with the
channels and reads off its quantum Fisher information.  The shipped strategy
fixtures live under ``data/`` in the tensor container format.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .channels import ChoiOperator, KrausSet, choi_to_kraus, kraus_to_choi, \
    phase_channel_slots
from .seesaw import (D_PROBE, Strategy, compute_output_derivative,
                     compute_output_state)
from .sld import StatePair, qfi_of_state
from .tensors import LabeledTensor, container_from_json

__all__ = [
    "PerpDampingProtocol",
    "evaluate_fixed_strategy",
    "fixture_names",
    "load_fixture",
    "parallel_dephasing_bound",
    "perp_damping_optimal",
    "perp_dephasing_qfi2",
    "perp_dephasing_teeth",
    "strategy_from_teeth",
    "teeth_from_strategy_container",
]


def perp_dephasing_qfi2(p):
    """Best two-use information under transversal dephasing, 2(1 + |1-2p|)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return 2.0 * (1.0 + abs(1.0 - 2.0 * p))


def parallel_dephasing_bound(n, p):
    """Ceiling N (p - 1/2)^2 / (p (1 - p)) for dephasing along the signal."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly inside (0, 1)")
    return n * (p - 0.5) ** 2 / (p * (1.0 - p))


# ---------------------------------------------------------------------------
# transversal damping: measurement-feedback recursion


@dataclass(frozen=True)
class PerpDampingProtocol:
    """Couplings t_1..t_{N-1} and coefficients c_1..c_N with their FI."""

    n: int
    p: float
    fi: float
    couplings: tuple
    coefficients: tuple

    def __post_init__(self):
        cap = 1.0 / (1.0 - self.p) + 1e-12
        if any(c > cap for c in self.coefficients):
            raise ValueError("coefficients exceed 1/(1-p)")
        if any(not 0.0 <= t <= 1.0 for t in self.couplings):
            raise ValueError("couplings must lie in [0, 1]")


def perp_damping_optimal(n, p):
    """Optimal correction protocol for transversal damping.

    The phase coefficient starts at c_1 = 1 and grows by c -> c t sqrt(p) + 1
    per use.  Each control keeps the probe fully coupled (t_i = 1) until c_i
    reaches sqrt(p)/(1-p); from then on t_i = sqrt(p)/(c_i (1-p)) parks the
    coefficient at its fixed point 1/(1-p).  The Fisher information collects
    the click record plus the final readout:
    sum_i c_i^2 (1 - t_i^2) + c_N^2.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly inside (0, 1)")
    root = math.sqrt(p)
    knee = root / (1.0 - p)
    coeffs, couplings = [], []
    c = 1.0
    for _ in range(n - 1):
        coeffs.append(c)
        t = 1.0 if c < knee else root / (c * (1.0 - p))
        couplings.append(t)
        c = c * t * root + 1.0
    coeffs.append(c)
    fi = sum(ci * ci * (1.0 - ti * ti)
             for ci, ti in zip(coeffs, couplings)) + c * c
    return PerpDampingProtocol(n=n, p=p, fi=fi, couplings=tuple(couplings),
                               coefficients=tuple(coeffs))


# ---------------------------------------------------------------------------
# fixed-strategy evaluation


def strategy_from_teeth(teeth):
    """Choi-lift tooth Kraus sets into a linked strategy.

    Tooth k maps K_{k-1} (x) A_{k-1} to H_k (x) A_k with the probe factor
    first; the opening tooth has d_in = 1 and prepares the joint state.
    Ancilla dimensions are read off the output sizes.
    """
    a_dims = []
    tensors = []
    for k, ks in enumerate(teeth, start=1):
        if ks.d_out % D_PROBE:
            raise ValueError("tooth %d output is not probe (x) ancilla" % k)
        d_a = ks.d_out // D_PROBE
        want = 1 if k == 1 else D_PROBE * a_dims[-1]
        if ks.d_in != want:
            raise ValueError("dimension chain mismatch at tooth %d: d_in is "
                             "%d, expected %d" % (k, ks.d_in, want))
        choi = kraus_to_choi(ks).matrix
        if k == 1:
            t = LabeledTensor.from_matrix(choi, ("H1", "A1"), (D_PROBE, d_a))
        else:
            labels = ("H%d" % k, "A%d" % k, "K%d" % (k - 1), "A%d" % (k - 1))
            t = LabeledTensor.from_matrix(
                choi, labels, (D_PROBE, d_a, D_PROBE, a_dims[-1]))
        tensors.append(t)
        a_dims.append(d_a)
    return Strategy(len(teeth), tensors, tuple(a_dims))


def evaluate_fixed_strategy(teeth, model, n, phi=0.0):
    """Link a fixed protocol with the channels and return its QFI.

    Rounded coefficients are fine: the output pair is renormalized by the
    quotient rule before the information is read off, so strategies printed
    to a few decimals are scored faithfully.
    """
    if len(teeth) != n:
        raise ValueError("expected %d teeth, got %d" % (n, len(teeth)))
    strategy = strategy_from_teeth(teeth)
    slots = phase_channel_slots(model, n, phi)
    rho = compute_output_state(strategy, slots)
    drho = compute_output_derivative(strategy, slots)
    tr = float(np.trace(rho).real)
    if tr <= 0.0:
        raise ValueError("strategy output has nonpositive trace")
    dtr = float(np.trace(drho).real)
    pair = StatePair(rho / tr, drho / tr - rho * (dtr / tr ** 2))
    return qfi_of_state(pair)


def perp_dephasing_teeth(n, p):
    """Correction strategy for transversal dephasing (n = 2 or 3, p >= 1/2).

    Prepare (|00> + |11>)/sqrt(2) on probe (x) ancilla, and between uses
    project onto the code span {|00>, |11>} versus the error span
    {|01>, |10>}, flipping the ancilla after an error.  (Flipping the probe
    would not do: a bit flip conjugates the phase the probe keeps
    accumulating, while moving the ancilla re-labels which arm carries the
    relative phase and so realigns the branch with the undisturbed one.)
    The three-use variant then replaces whatever sits in the error span by
    the product state (|0> + |1>)(|0> + e^{-i pi/4} |1>)/2 and lets the
    last use act on a fresh equator state.
    """
    if n not in (2, 3):
        raise ValueError("only the two- and three-use variants are defined")
    if not 0.5 <= p <= 1.0:
        raise ValueError("the correction is oriented for p >= 1/2")
    prep = np.zeros((4, 1), dtype=complex)
    prep[0, 0] = prep[3, 0] = 1.0 / math.sqrt(2)
    keep = np.zeros((4, 4), dtype=complex)
    keep[0, 0] = keep[3, 3] = 1.0
    flip = np.zeros((4, 4), dtype=complex)
    flip[0, 1] = flip[3, 2] = 1.0
    teeth = [KrausSet([prep], d_in=1, d_out=4),
             KrausSet([keep, flip], d_in=4, d_out=4)]
    if n == 3:
        chi = 0.5 * np.array([[1.0], [cmath.exp(-0.25j * math.pi)],
                              [1.0], [cmath.exp(-0.25j * math.pi)]])
        reset_a = np.zeros((4, 4), dtype=complex)
        reset_a[:, 1:2] = chi
        reset_b = np.zeros((4, 4), dtype=complex)
        reset_b[:, 2:3] = chi
        teeth.append(KrausSet([keep, reset_a, reset_b], d_in=4, d_out=4))
    return teeth


# ---------------------------------------------------------------------------
# shipped fixtures


def fixture_names():
    """Names of the strategy fixtures bundled with the package."""
    return ("damping_parallel_anc2", "damping_parallel_anc4")


def teeth_from_strategy_container(box):
    """Rebuild tooth Kraus sets from a loaded strategy container."""
    if box.kind != "strategy":
        raise ValueError("expected a strategy container, got %r" % box.kind)
    n = int(box.meta["n"])
    teeth = []
    d_prev = 1
    for k in range(1, n + 1):
        t = box.tensors["P%d" % k]
        if k == 1:
            order = ("H1", "A1")
        else:
            order = ("H%d" % k, "A%d" % k, "K%d" % (k - 1), "A%d" % (k - 1))
        d_out = D_PROBE * t.dim("A%d" % k)
        teeth.append(choi_to_kraus(ChoiOperator(t.to_matrix(order),
                                                d_out, d_prev)))
        d_prev = d_out
    return teeth


def load_fixture(name):
    """Load a bundled strategy fixture as (tooth Kraus sets, metadata)."""
    if name not in fixture_names():
        raise ValueError("unknown fixture %r (have %s)"
                         % (name, ", ".join(fixture_names())))
    text = resources.files(__package__).joinpath(
        "data", name + ".json").read_text(encoding="utf-8")
    box = container_from_json(text)
    return teeth_from_strategy_container(box), dict(box.meta)
