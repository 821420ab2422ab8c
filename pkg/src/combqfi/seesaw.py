"""Tensor-network see-saw for optimal N-use estimation strategies.

A strategy is a chain of teeth P_1 ... P_N (Choi tensors of the preparation
and the interleaved controls) linked by ancilla bonds A_k; channel use k maps
H_k to K_k.  For a fixed logarithmic-derivative candidate L the figure of
merit 2 Tr(drho L) - Tr(rho L^2) is linear in every single tooth, so the
sweep alternates exact single-tooth semidefinite maximizations with an SLD
update, never forming the exponentially large comb: left and right
environment tensors carry all other slots at O(N) cost per sweep.

Right environments come in three families (plain chain terminated by -L^2,
plain chain terminated by 2L, and the derivative-sum chain terminated by 2L);
the left side needs the plain chain and the derivative sum.  The local
objective for tooth k is then

    S_k = l_plain (x) (r_lsq + r_2l_deriv) + l_deriv (x) (r_2l_plain),

contracted over the correlation register when the model carries one, and the
tooth update maximizes Tr(P_k S_k^T) over the tooth's channel constraints.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .channels import phase_channel_slots
from .sdp import ConeBlock, herm_basis, solve_conic
from .sld import StatePair, qfi_of_state, solve_sld
from .tensors import (LabeledTensor, contract, dagger, load_container,
                      save_container)

__all__ = [
    "EnvironmentCache",
    "IssConfig",
    "OptimizationResult",
    "SeesawSolverError",
    "Strategy",
    "assemble_tooth_objective",
    "compute_output_derivative",
    "compute_output_state",
    "export_trace",
    "left_environments",
    "load_strategy",
    "optimize",
    "optimize_tooth",
    "random_strategy",
    "save_strategy",
    "update_right_envs",
]

D_PROBE = 2


class SeesawSolverError(RuntimeError):
    pass


@dataclass
class Strategy:
    """Teeth of an N-slot strategy with ancilla bond dimensions a_dims."""

    n: int
    teeth: list
    a_dims: tuple

    def tooth_labels(self, k):
        if k == 1:
            return ("H1", "A1")
        return ("A%d" % (k - 1), "K%d" % (k - 1), "H%d" % k, "A%d" % k)

    def tooth_dims(self, k):
        if k == 1:
            return (D_PROBE, self.a_dims[0])
        return (self.a_dims[k - 2], D_PROBE, D_PROBE, self.a_dims[k - 1])

    def validate(self, tol=1e-8):
        m1 = self.teeth[0].to_matrix(self.tooth_labels(1))
        if abs(np.trace(m1) - 1) > tol:
            raise ValueError("first tooth must have unit trace")
        for k in range(1, self.n + 1):
            m = self.teeth[k - 1].to_matrix(self.tooth_labels(k))
            if np.linalg.eigvalsh((m + dagger(m)) / 2).min() < -tol:
                raise ValueError("tooth %d is not PSD" % k)
            if k > 1:
                kept = self.a_dims[k - 2] * D_PROBE
                suf = D_PROBE * self.a_dims[k - 1]
                red = np.trace(m.reshape(kept, suf, kept, suf),
                               axis1=1, axis2=3)
                if np.linalg.norm(red - np.eye(kept)) > tol * kept:
                    raise ValueError("tooth %d is not trace preserving" % k)

    def copy(self):
        return Strategy(self.n, list(self.teeth), self.a_dims)


def _haar_isometry(rng, rows, cols):
    z = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_strategy(n, d_a, seed=0, rng=None):
    """Random strategy from Haar isometric teeth (purified when the bond
    shrinks, so every tooth is exactly trace preserving)."""
    if rng is None:
        rng = np.random.default_rng(seed)
    a_dims = tuple([d_a] * n) if np.isscalar(d_a) else tuple(d_a)
    if len(a_dims) != n:
        raise ValueError("need one bond dimension per slot")
    teeth = []
    v = rng.standard_normal(D_PROBE * a_dims[0]) \
        + 1j * rng.standard_normal(D_PROBE * a_dims[0])
    v = v / np.linalg.norm(v)
    teeth.append(LabeledTensor.from_matrix(
        np.outer(v, v.conj()), ("H1", "A1"), (D_PROBE, a_dims[0])))
    for k in range(2, n + 1):
        d_in = a_dims[k - 2] * D_PROBE
        d_out = D_PROBE * a_dims[k - 1]
        extra = -(-d_in // d_out)            # smallest purifier that fits
        iso = _haar_isometry(rng, d_out * extra, d_in)
        choi = np.zeros((d_out * d_in, d_out * d_in), dtype=complex)
        for e in range(extra):
            kvec = iso[e * d_out:(e + 1) * d_out].reshape(-1, 1)
            choi += kvec @ dagger(kvec)
        labels = ("H%d" % k, "A%d" % k, "A%d" % (k - 1), "K%d" % (k - 1))
        dims = (D_PROBE, a_dims[k - 1], a_dims[k - 2], D_PROBE)
        teeth.append(LabeledTensor.from_matrix(choi, labels, dims))
    return Strategy(n, teeth, a_dims)


# ---------------------------------------------------------------------------
# environments


def _advance(left, tooth, slot):
    lp, ld = left
    choi, dchoi = slot
    tp = contract(lp, tooth)
    td = contract(ld, tooth)
    return (contract(tp, choi), contract(td, choi) + contract(tp, dchoi))


def left_environments(strategy, slots):
    """Left caches after 0..N slots: (plain chain, derivative-sum chain)."""
    lefts = [(LabeledTensor.scalar(1.0), LabeledTensor.scalar(0.0))]
    for k in range(1, strategy.n + 1):
        lefts.append(_advance(lefts[-1], strategy.teeth[k - 1], slots[k - 1]))
    return lefts


def _final_pair(strategy, slots):
    n = strategy.n
    lp, ld = left_environments(strategy, slots)[-1]
    order = ("K%d" % n, "A%d" % n)
    return lp.to_matrix(order), ld.to_matrix(order)


def _project_pair(rho, drho):
    """State pair with the fold's numerical trace drift removed.

    Tooth updates satisfy the causality constraints only to solver
    feasibility, so chaining N of them leaves Tr(rho) = 1 + O(N eps); the
    quotient rule restores exact normalization without biasing the
    information.
    """
    t = float(np.trace(rho).real)
    if not 0.9 < t < 1.1:
        raise SeesawSolverError("folded state trace %g is far from 1" % t)
    s = float(np.trace(drho).real)
    return StatePair(rho / t, drho / t - rho * (s / t ** 2))


def compute_output_state(strategy, slots):
    """Final state on (last channel output) (x) (retained ancilla)."""
    return _final_pair(strategy, slots)[0]


def compute_output_derivative(strategy, slots):
    return _final_pair(strategy, slots)[1]


@dataclass
class RightEnv:
    lsq: LabeledTensor        # plain chain, -L^2 terminal
    pl2: LabeledTensor        # plain chain, 2L terminal
    dv2: LabeledTensor        # derivative-sum chain, 2L terminal


@dataclass
class EnvironmentCache:
    """Right environments for every slot, built against one candidate L."""

    right: list
    sld: np.ndarray

    def __getitem__(self, i):
        return self.right[i]

    def __len__(self):
        return len(self.right)


def update_right_envs(strategy, slots, l_mat):
    """Right sweep: caches for slots N down to 1 against the SLD candidate."""
    n = strategy.n
    dims = (D_PROBE, strategy.a_dims[-1])
    labels = ("K%d" % n, "A%d" % n)
    l_mat = np.asarray(l_mat, dtype=complex)
    t_2l = LabeledTensor.from_matrix(2 * l_mat, labels, dims).transpose_ops()
    t_lsq = LabeledTensor.from_matrix(-l_mat @ l_mat, labels, dims).transpose_ops()
    choi, dchoi = slots[n - 1]
    right = [None] * n
    right[n - 1] = RightEnv(lsq=contract(choi, t_lsq),
                            pl2=contract(choi, t_2l),
                            dv2=contract(dchoi, t_2l))
    for k in range(n - 1, 0, -1):
        tooth = strategy.teeth[k]          # tooth k+1
        r = right[k]
        t_lsq_k = contract(tooth, r.lsq)
        t_pl2_k = contract(tooth, r.pl2)
        t_dv2_k = contract(tooth, r.dv2)
        choi, dchoi = slots[k - 1]
        right[k - 1] = RightEnv(
            lsq=contract(choi, t_lsq_k),
            pl2=contract(choi, t_pl2_k),
            dv2=contract(dchoi, t_pl2_k) + contract(choi, t_dv2_k))
    return EnvironmentCache(right, l_mat)


def assemble_tooth_objective(left, right_env, labels):
    """Local objective S_k as a matrix in the tooth's canonical label order:
    Tr(P_k S_k^T) equals the global 2 Tr(drho L) - Tr(rho L^2)."""
    lp, ld = left
    s = contract(lp, right_env.lsq + right_env.dv2) + contract(ld, right_env.pl2)
    return s.to_matrix(labels)


# ---------------------------------------------------------------------------
# tooth updates

_BASIS_CACHE = {}


def _kept_basis(kept_dim):
    if kept_dim not in _BASIS_CACHE:
        stack = np.array(herm_basis(kept_dim))
        bvals = np.array([np.trace(b).real for b in stack])
        _BASIS_CACHE[kept_dim] = (stack, bvals)
    return _BASIS_CACHE[kept_dim]


def optimize_tooth(s_mat, kept_dim, suffix_dim, feas_tol=1e-8, gap_tol=1e-8,
                   max_iters=200):
    """Maximize Tr(P S^T) over one tooth.

    kept_dim = 1 is the preparation tooth (a density matrix: exact
    top-eigenvector step); otherwise the tooth is a channel from the kept
    pair (A_{k-1}, K_{k-1}) to the suffix (H_k, A_k) and the update is one
    small SDP with the partial-trace constraint carried as B (x) 1_suffix.
    """
    c_obj = np.asarray(s_mat, dtype=complex).T
    c_obj = (c_obj + dagger(c_obj)) / 2
    if kept_dim == 1:
        w, v = np.linalg.eigh(c_obj)
        tooth = np.outer(v[:, -1], v[:, -1].conj())
        return tooth, float(w[-1])
    stack, bvals = _kept_basis(kept_dim)
    block = ConeBlock(c=-c_obj, b_ops=stack, s=suffix_dim)
    sol = solve_conic([block], b=bvals, feas_tol=feas_tol, gap_tol=gap_tol,
                      max_iters=max_iters)
    if sol.status != "optimal":
        raise SeesawSolverError("tooth SDP returned %s" % sol.status)
    tooth = sol.x_blocks[0]
    tooth = (tooth + dagger(tooth)) / 2
    return tooth, float(np.trace(tooth @ c_obj).real)


# ---------------------------------------------------------------------------
# the see-saw driver


@dataclass
class IssConfig:
    d_a: object = 2
    max_sweeps: int = 300
    threshold: float = 1e-4       # relative improvement over the window
    window: int = 5               # sweeps
    q0: float = 0.05              # depolarizing anneal start
    gamma: float = 0.8            # anneal decay per sweep
    q_converge: float = 1e-8      # anneal must decay below this to stop
    seed: int = 0
    restarts: int = 3
    phi: float = 0.0
    sdp_feas_tol: float = 1e-8
    sdp_gap_tol: float = 1e-8

    def __post_init__(self):
        if not self.threshold > 0.0:
            raise ValueError("threshold must be positive")
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if not 0.0 <= self.q0 < 1.0:
            raise ValueError("q0 must lie in [0, 1)")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")


@dataclass
class OptimizationResult:
    qfi: float
    strategy: Strategy
    sld: np.ndarray
    trace: list
    history: list
    sweeps: int
    wall_ms: float
    converged: bool
    restart_summaries: list = field(default_factory=list)
    n: int = 0
    model: object = None


def _slot_out_labels(slot_choi, k):
    return [name for name in slot_choi.labels
            if name in ("K%d" % k, "E%d" % k)]


def _mix_slots(slots, q):
    if q == 0.0:
        return slots
    mixed = []
    for k, (choi, dchoi) in enumerate(slots, start=1):
        out = _slot_out_labels(choi, k)
        d_out = int(np.prod([choi.dim(name) for name in out]))
        ident = LabeledTensor.identity(choi.labels, choi.dims)
        mixed.append(((1 - q) * choi + (q / d_out) * ident, (1 - q) * dchoi))
    return mixed


def _anneal(cfg, sweep):
    if cfg.q0 == 0.0:
        return 0.0
    q = cfg.q0 * cfg.gamma ** sweep
    return 0.0 if q < 1e-10 else q


def _seesaw_once(model, n, cfg, seed, slots):
    rng = np.random.default_rng(seed)
    strategy = random_strategy(n, cfg.d_a, rng=rng)
    mixed = _mix_slots(slots, _anneal(cfg, 0))
    l_mat = solve_sld(_project_pair(*_final_pair(strategy, mixed)))
    trace, history = [], []
    converged = False
    sweeps = 0
    for sweep in range(cfg.max_sweeps):
        sweeps = sweep + 1
        q = _anneal(cfg, sweep)
        mixed = _mix_slots(slots, q)
        rights = update_right_envs(strategy, mixed, l_mat)
        left = (LabeledTensor.scalar(1.0), LabeledTensor.scalar(0.0))
        for k in range(1, n + 1):
            labels = strategy.tooth_labels(k)
            s_mat = assemble_tooth_objective(left, rights[k - 1], labels)
            if k == 1:
                kept, suffix = 1, D_PROBE * strategy.a_dims[0]
            else:
                kept = strategy.a_dims[k - 2] * D_PROBE
                suffix = D_PROBE * strategy.a_dims[k - 1]
            try:
                tooth_m, val = optimize_tooth(
                    s_mat, kept, suffix, feas_tol=cfg.sdp_feas_tol,
                    gap_tol=cfg.sdp_gap_tol)
                strategy.teeth[k - 1] = LabeledTensor.from_matrix(
                    tooth_m, labels, strategy.tooth_dims(k))
            except SeesawSolverError:
                # keep the previous tooth; its value is still the objective
                p_old = strategy.teeth[k - 1].to_matrix(labels)
                val = float(np.trace(p_old @ s_mat.T).real)
            trace.append((sweep, "tooth%d" % k, val))
            left = _advance(left, strategy.teeth[k - 1], mixed[k - 1])
        order = ("K%d" % n, "A%d" % n)
        sp_mixed = _project_pair(left[0].to_matrix(order),
                                 left[1].to_matrix(order))
        l_mat = solve_sld(sp_mixed)
        f_mixed = qfi_of_state(sp_mixed)
        trace.append((sweep, "sld", f_mixed))
        if q == 0.0:
            f_true = f_mixed
        else:
            f_true = qfi_of_state(_project_pair(*_final_pair(strategy,
                                                             slots)))
        history.append(f_true)
        if len(history) > cfg.window and q <= cfg.q_converge:
            prev = history[-1 - cfg.window]
            if history[-1] - prev < cfg.threshold * abs(prev):
                converged = True
                break
    sp = _project_pair(*_final_pair(strategy, slots))
    l_true = solve_sld(sp)
    return OptimizationResult(
        qfi=qfi_of_state(sp), strategy=strategy, sld=l_true, trace=trace,
        history=history, sweeps=sweeps, wall_ms=0.0, converged=converged,
        n=n, model=model)


def optimize(model, n, config=None):
    """Run the see-saw with restarts; returns the best strategy found."""
    cfg = config or IssConfig()
    t0 = time.perf_counter()
    slots = phase_channel_slots(model, n, cfg.phi)
    best = None
    summaries = []
    for r in range(max(1, cfg.restarts)):
        res = _seesaw_once(model, n, cfg, cfg.seed + r, slots)
        summaries.append({"seed": cfg.seed + r, "qfi": res.qfi,
                          "converged": res.converged, "sweeps": res.sweeps})
        if best is None or res.qfi > best.qfi:
            best = res
    best.wall_ms = (time.perf_counter() - t0) * 1e3
    best.restart_summaries = summaries
    return best


# ---------------------------------------------------------------------------
# persistence

def save_strategy(path, strategy, meta=None):
    """Write a strategy to a tensor container file (kind "strategy")."""
    info = {"n": strategy.n, "a_dims": list(strategy.a_dims)}
    info.update(meta or {})
    tensors = {"P%d" % k: strategy.teeth[k - 1]
               for k in range(1, strategy.n + 1)}
    return save_container(path, tensors, kind="strategy", meta=info)


def load_strategy(path):
    box = load_container(path)
    if box.kind != "strategy":
        raise ValueError("expected a strategy container, got kind %r"
                         % box.kind)
    n = int(box.meta["n"])
    a_dims = tuple(int(d) for d in box.meta["a_dims"])
    teeth = [box.tensors["P%d" % k] for k in range(1, n + 1)]
    return Strategy(n, teeth, a_dims)


def export_trace(trace, path):
    """Write per-iteration objective rows (sweep, stage, value) as CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sweep", "stage", "value"])
        for sweep, stage, value in trace:
            writer.writerow([sweep, stage, repr(float(value))])
