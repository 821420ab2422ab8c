"""Quantum comb machinery: validation, exact full-comb see-saw, isometries.

A comb on N slots is a positive operator over the ordered spaces
H_1, K_1, ..., H_{N-1}, K_{N-1}, H_N, A_N (H_k feeds channel use k, K_k
returns its output, A_N is the retained register).  Causality is the nested
chain of partial-trace conditions: tracing the last tooth's outputs must
leave (reduced comb) (x) identity on the last input, down to a unit-trace
first tooth.

The full-comb optimizer alternates an SLD update with one global SDP over
the comb, so it scales exponentially with N; it exists as an exact
cross-check for the linear-cost sweep in the seesaw module.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channels import phase_channel_slots
from .sdp import ConeBlock, herm_basis, solve_conic
from .sld import StatePair, qfi_of_state, solve_sld
from .tensors import (LabeledTensor, contract, dagger, herm_eig, kron,
                      load_container, save_container)

__all__ = [
    "Comb",
    "CombReport",
    "FullCombResult",
    "IsometrySequence",
    "apply_gauge",
    "assemble_comb_objective",
    "channel_chain_choi",
    "comb_constraint_rows",
    "comb_labels",
    "decompose_to_isometries",
    "iss_full_comb",
    "link_strategy",
    "load_comb",
    "reconstruct_choi",
    "save_comb",
    "strategy_from_isometries",
    "validate_comb",
]

D_PROBE = 2
DIM_GUARD = 4096


def comb_labels(n):
    """Canonical label order H_1, K_1, ..., H_N, A_N."""
    out = []
    for k in range(1, n):
        out += ["H%d" % k, "K%d" % k]
    out += ["H%d" % n, "A%d" % n]
    return tuple(out)


@dataclass
class Comb:
    """A validated-on-demand comb tensor over the canonical labels."""

    n: int
    tensor: LabeledTensor

    def __post_init__(self):
        if set(self.tensor.labels) != set(comb_labels(self.n)):
            raise ValueError("comb labels %r do not match N=%d"
                             % (self.tensor.labels, self.n))

    @property
    def d_anc(self):
        return self.tensor.dim("A%d" % self.n)

    def matrix(self):
        return self.tensor.to_matrix(comb_labels(self.n))

    def choi_matrix(self):
        """As the Choi of the channel (x)K -> (x)H (x) A_N."""
        order = tuple("H%d" % k for k in range(1, self.n + 1)) \
            + ("A%d" % self.n,) \
            + tuple("K%d" % k for k in range(1, self.n))
        return self.tensor.to_matrix(order)


def link_strategy(strategy):
    """Link a strategy's teeth over the ancilla bonds into one comb."""
    t = strategy.teeth[0]
    for tooth in strategy.teeth[1:]:
        t = contract(t, tooth)
    return Comb(strategy.n, t)


# ---------------------------------------------------------------------------
# validation


@dataclass
class CombReport:
    conditions: list        # (name, residual, passed)
    max_residual: float
    ok: bool


def validate_comb(comb, tol=1e-7):
    """Check positivity and every chain condition; residuals per condition."""
    n = comb.n
    conditions = []
    mat = comb.matrix()
    wmin = float(np.linalg.eigvalsh((mat + dagger(mat)) / 2).min())
    conditions.append(("psd", max(0.0, -wmin), wmin >= -tol))
    t = comb.tensor.partial_trace("A%d" % n)
    for k in range(n, 0, -1):
        t = t.partial_trace("H%d" % k)
        if k == 1:
            res = abs(complex(t.data) - 1.0)
            conditions.append(("trace Tr_H1 P(1) = 1", res, res <= tol))
            break
        reduced = t.partial_trace("K%d" % (k - 1)) * (1.0 / D_PROBE)
        ident = LabeledTensor.identity(("K%d" % (k - 1),), (D_PROBE,))
        gap = t - contract(reduced, ident, over=())
        res = float(np.linalg.norm(gap.data))
        conditions.append(("chain factor at K%d" % (k - 1), res, res <= tol))
        t = reduced
    max_res = max(r for _, r, _ in conditions)
    return CombReport(conditions, max_res,
                      all(okc for _, _, okc in conditions))


def _traceless_basis(d):
    out = []
    for a in range(d):
        for b in range(a + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[a, b] = m[b, a] = 1 / np.sqrt(2)
            out.append(m.copy())
            m[a, b] = -1j / np.sqrt(2)
            m[b, a] = 1j / np.sqrt(2)
            out.append(m)
    for a in range(d - 1):
        m = np.zeros((d, d), dtype=complex)
        m[a, a], m[a + 1, a + 1] = 1 / np.sqrt(2), -1 / np.sqrt(2)
        out.append(m)
    return out


def comb_constraint_rows(n, d_anc):
    """Equality rows Tr(B_i P) = b_i equivalent to the causal chain.

    For each slot boundary the component of the suffix-traced comb along
    (anything on the prefix) (x) (traceless on K_k) must vanish; one more
    row pins the overall trace to prod_k d_K.
    """
    dims = []
    for k in range(1, n):
        dims += [D_PROBE, D_PROBE]
    dims += [D_PROBE, d_anc]
    total = int(np.prod(dims))
    rows, vals = [], []
    for k in range(1, n):
        pre = int(np.prod(dims[:2 * k - 1]))
        suf = total // (pre * D_PROBE)
        eye_s = np.eye(suf)
        for y in herm_basis(pre):
            for t in _traceless_basis(D_PROBE):
                rows.append(kron(y, t, eye_s))
                vals.append(0.0)
    rows.append(np.eye(total, dtype=complex))
    vals.append(float(D_PROBE ** (n - 1)))
    return np.array(rows), np.array(vals)


# ---------------------------------------------------------------------------
# full-comb see-saw


def channel_chain_choi(model, n, phi=0.0):
    """(Lambda, dLambda) of the N-use chain, correlation registers linked."""
    slots = phase_channel_slots(model, n, phi)
    lam, dlam = slots[0]
    for choi, dchoi in slots[1:]:
        dlam = contract(dlam, choi) + contract(lam, dchoi)
        lam = contract(lam, choi)
    return lam, dlam


def assemble_comb_objective(lam, dlam, l_mat, labels):
    """Objective M with Tr(P M^T) = 2 Tr(drho L) - Tr(rho L^2)."""
    n = len(labels) // 2
    l_mat = np.asarray(l_mat, dtype=complex)
    d_anc = l_mat.shape[0] // D_PROBE
    t_labels = ("K%d" % n, "A%d" % n)
    t_dims = (D_PROBE, d_anc)
    t_2l = LabeledTensor.from_matrix(2 * l_mat, t_labels, t_dims).transpose_ops()
    t_lsq = LabeledTensor.from_matrix(-l_mat @ l_mat, t_labels,
                                      t_dims).transpose_ops()
    m = contract(lam, t_lsq) + contract(dlam, t_2l)
    return m.to_matrix(labels)


class FullCombResult(NamedTuple):
    qfi: float
    comb: Comb
    sld: np.ndarray
    trace: list


def _comb_state_pair(tensor, lam, dlam, n):
    order = ("K%d" % n, "A%d" % n)
    return StatePair(contract(tensor, lam).to_matrix(order),
                     contract(tensor, dlam).to_matrix(order))


def iss_full_comb(lam, dlam, d_anc=4, seed=0, max_sweeps=200, threshold=1e-4,
                  window=5, feas_tol=1e-8, gap_tol=1e-8):
    """Exact comb see-saw: alternate the SLD with one SDP over the whole comb.

    The comb is initialized by linking Haar-random isometric teeth (generic
    starts matter; symmetric ones can sit on saddle points).  Objective
    values are nondecreasing up to solver noise.
    """
    from .seesaw import random_strategy

    n = sum(1 for name in lam.labels if name.startswith("H"))
    labels = comb_labels(n)
    total = D_PROBE ** (2 * n - 1) * d_anc
    if total > DIM_GUARD:
        raise ValueError("comb dimension %d exceeds guard %d"
                         % (total, DIM_GUARD))
    bonds = [4] * (n - 1) + [d_anc] if n > 1 else [d_anc]
    strategy = random_strategy(n, tuple(bonds), seed=seed)
    tensor = link_strategy(strategy).tensor
    rows, vals = comb_constraint_rows(n, d_anc)
    trace, history = [], []
    l_mat = solve_sld(_comb_state_pair(tensor, lam, dlam, n))
    for sweep in range(max_sweeps):
        m_mat = assemble_comb_objective(lam, dlam, l_mat, labels)
        c_obj = -(m_mat.T + dagger(m_mat.T)) / 2
        block = ConeBlock(c=c_obj, b_ops=rows, s=1)
        sol = solve_conic([block], b=vals, feas_tol=feas_tol,
                          gap_tol=gap_tol)
        if sol.status != "optimal":
            raise RuntimeError("comb update failed at sweep %d: %s"
                               % (sweep, sol.status))
        p = sol.x_blocks[0]
        p = (p + dagger(p)) / 2
        dims = [D_PROBE] * (2 * n - 1) + [d_anc]
        tensor = LabeledTensor.from_matrix(p, labels, dims)
        trace.append((sweep, "comb", float(np.trace(p @ m_mat.T).real)))
        sp = _comb_state_pair(tensor, lam, dlam, n)
        l_mat = solve_sld(sp)
        f = qfi_of_state(sp)
        trace.append((sweep, "sld", f))
        history.append(f)
        if len(history) > window:
            prev = history[-1 - window]
            if history[-1] - prev < threshold * abs(prev):
                break
    sp = _comb_state_pair(tensor, lam, dlam, n)
    return FullCombResult(qfi=qfi_of_state(sp), comb=Comb(n, tensor),
                          sld=solve_sld(sp), trace=trace)


# ---------------------------------------------------------------------------
# isometry decomposition


@dataclass
class IsometrySequence:
    """V^(k): K_{k-1} (x) A_{k-1} -> H_k (x) A_k, rows H-major.

    The last slot's output is the composite (H_N (x) retained A_N) followed
    by the purification ancilla; tracing that ancilla after concatenation
    reproduces the comb.
    """

    n: int
    d_anc: int
    isometries: list
    a_dims: tuple
    residuals: list
    warnings: list


def _reduced_combs(comb):
    """P^(k) channel Chois (out = H_1..H_k, in = K_1..K_{k-1}); P^(N) keeps
    the retained ancilla in its output."""
    n = comb.n
    reduced = {n: comb.tensor}
    t = comb.tensor.partial_trace("A%d" % n)
    for k in range(n - 1, 0, -1):
        t = t.partial_trace("H%d" % (k + 1)).partial_trace("K%d" % k) \
            * (1.0 / D_PROBE)
        reduced[k] = t
    return reduced


def _canonical_kraus(tensor, k, n, cutoff):
    out_order = tuple("H%d" % j for j in range(1, k + 1))
    if k == n:
        out_order += ("A%d" % n,)
    in_order = tuple("K%d" % j for j in range(1, k))
    mat = tensor.to_matrix(out_order + in_order)
    d_in = D_PROBE ** (k - 1)
    d_out = mat.shape[0] // d_in
    w, v = herm_eig(mat, rtol=1e-8)
    flags = [float(x) for x in w if cutoff / 10 < abs(x) < cutoff * 10]
    ops = [np.sqrt(w[i]) * v[:, i].reshape(d_out, d_in)
           for i in np.argsort(w)[::-1] if w[i] > cutoff]
    return ops, flags


def decompose_to_isometries(comb, cutoff=1e-10):
    """Split a comb into a chain of isometries, one per tooth.

    Each reduced comb is a channel; stripping its last output factor and
    extending the previous channel by an input bra give two Kraus
    representations of the same map, and the matrix connecting them is
    exactly the tooth isometry.
    """
    n = comb.n
    reduced = _reduced_combs(comb)
    kraus, warnings = {}, []
    for k in range(1, n + 1):
        kraus[k], flags = _canonical_kraus(reduced[k], k, n, cutoff)
        if flags:
            warnings.append("rank of tooth %d ambiguous near cutoff: %r"
                            % (k, flags))
    a_dims = tuple(len(kraus[k]) for k in range(1, n + 1))
    # rows of V^(1) ordered (m, i): columns are the state's Kraus vectors
    v1 = np.array([op[:, 0] for op in kraus[1]]).T.reshape(-1, 1)
    isometries = [v1]
    residuals = [0.0]
    for k in range(2, n + 1):
        ops_k, ops_prev = kraus[k], kraus[k - 1]
        d_m = ops_k[0].shape[0] // ops_prev[0].shape[0]
        d_in = ops_k[0].shape[1]
        k_prime = []
        for op in ops_k:
            resh = op.reshape(-1, d_m, d_in)
            for m in range(d_m):
                k_prime.append(resh[:, m, :].reshape(-1))
        k_second = []
        for op in ops_prev:
            for bra in np.eye(D_PROBE, dtype=complex):
                k_second.append(np.kron(op, bra[None, :]).reshape(-1))
        k_prime = np.array(k_prime)
        k_second = np.array(k_second)
        coef = k_prime @ np.linalg.pinv(k_second)
        residuals.append(float(np.linalg.norm(coef @ k_second - k_prime)))
        r_k, r_prev = len(ops_k), len(ops_prev)
        v = coef.reshape(r_k, d_m, r_prev, D_PROBE) \
            .transpose(1, 0, 3, 2).reshape(d_m * r_k, D_PROBE * r_prev)
        isometries.append(v)
    return IsometrySequence(n=n, d_anc=comb.d_anc, isometries=isometries,
                            a_dims=a_dims, residuals=residuals,
                            warnings=warnings)


def reconstruct_choi(seq):
    """Concatenate the isometries and trace the purification ancilla; the
    result is the comb's channel Choi on (H_1..H_N, A_N; K_1..K_{N-1})."""
    r1 = seq.a_dims[0]
    w = seq.isometries[0].reshape(-1, r1, 1)
    for k in range(2, seq.n + 1):
        v = seq.isometries[k - 1]
        r_k, r_prev = seq.a_dims[k - 1], seq.a_dims[k - 2]
        d_m = v.shape[0] // r_k
        v4 = v.reshape(d_m, r_k, D_PROBE, r_prev)
        w = np.einsum("minj,xjy->xmiyn", v4, w)
        w = w.reshape(w.shape[0] * d_m, r_k, -1)
    flat = w.transpose(0, 2, 1).reshape(-1, w.shape[1])
    return flat @ dagger(flat)


def strategy_from_isometries(seq):
    """Teeth from the isometry Chois; the last bond keeps the purifier."""
    from .seesaw import Strategy

    n = seq.n
    v1 = seq.isometries[0].reshape(-1)
    first_bond = seq.d_anc * seq.a_dims[0] if n == 1 else seq.a_dims[0]
    a_dims = [first_bond]
    teeth = [LabeledTensor.from_matrix(
        np.outer(v1, v1.conj()), ("H1", "A1"), (D_PROBE, first_bond))]
    for k in range(2, n + 1):
        v = seq.isometries[k - 1]
        r_k, r_prev = seq.a_dims[k - 1], seq.a_dims[k - 2]
        bond = seq.d_anc * r_k if k == n else r_k
        vec = v.reshape(-1)
        labels = ("H%d" % k, "A%d" % k, "K%d" % (k - 1), "A%d" % (k - 1))
        teeth.append(LabeledTensor.from_matrix(
            np.outer(vec, vec.conj()), labels,
            (D_PROBE, bond, D_PROBE, r_prev)))
        a_dims.append(bond)
    return Strategy(n, teeth, tuple(a_dims))


# ---------------------------------------------------------------------------
# gauge freedom


def _conjugate_label(t, label, u):
    """X -> (U on one label) X (U^dag on the same label)."""
    ax = t.labels.index(label)
    data = np.tensordot(u, t.data, axes=(1, 2 * ax))
    data = np.moveaxis(data, 0, 2 * ax)
    data = np.tensordot(u.conj(), data, axes=(1, 2 * ax + 1))
    data = np.moveaxis(data, 0, 2 * ax + 1)
    return LabeledTensor(t.labels, t.dims, data)


def apply_gauge(strategy, k, u):
    """Rotate bond A_k by U on tooth k and by conj(U) on tooth k+1.

    The link over A_k pairs kets with kets, so the conjugate (not the
    adjoint) on the downstream tooth cancels the rotation; every linked
    quantity is unchanged.
    """
    u = np.asarray(u, dtype=complex)
    if not 1 <= k < strategy.n:
        raise ValueError("gauge index k must name an internal bond")
    if u.shape != (strategy.a_dims[k - 1],) * 2:
        raise ValueError("gauge unitary has wrong dimension")
    if np.linalg.norm(dagger(u) @ u - np.eye(u.shape[0])) > 1e-10:
        raise ValueError("gauge matrix is not unitary")
    out = strategy.copy()
    label = "A%d" % k
    out.teeth[k - 1] = _conjugate_label(out.teeth[k - 1], label, u)
    out.teeth[k] = _conjugate_label(out.teeth[k], label, u.conj())
    return out


# ---------------------------------------------------------------------------
# persistence


def save_comb(path, comb, meta=None):
    """Write a comb to a tensor container file (kind "comb")."""
    info = {"n": comb.n, "d_anc": comb.d_anc}
    info.update(meta or {})
    return save_container(path, {"P": comb.tensor}, kind="comb", meta=info)


def load_comb(path):
    box = load_container(path)
    if box.kind != "comb":
        raise ValueError("expected a comb container, got kind %r" % box.kind)
    return Comb(int(box.meta["n"]), box.tensors["P"])
