"""Single-use channel QFI through the minimization-over-purifications bound.

For a channel with Kraus operators K_k and phase derivatives dK_k the
ancilla-assisted channel QFI is

    F = 4 min_h || sum_k dK_k(h)^dag dK_k(h) ||,
    dK_k(h) = dK_k - i sum_l h_kl K_l,   h hermitian,

with ||.|| the operator norm.  The inner norm bound becomes one linear matrix
inequality in (lambda, h):

    [[lambda 1,   B(h)^dag], [B(h), 1]] >= 0,   B(h) the stacked dK_k(h),

so the whole thing is a single SDP.  An input state achieving the bound
solves the saddle-point conditions Tr[rho alpha(h*)] = ||alpha(h*)|| and
grad_h Tr[rho alpha(h)] = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import base_kraus, channel_with_phase, phase_channel_slots
from .sdp import ConeBlock, SdpProblem, solve_conic, solve_sdp
from .tensors import dagger

__all__ = ["MopProblem", "MopResult", "alpha_of", "channel_qfi_mop",
           "optimal_input_state"]


@dataclass
class MopProblem:
    """Kraus operators and their phase derivatives at the working point."""

    kraus: "KrausSet"
    dkraus: "KrausSet"

    @classmethod
    def from_model(cls, model, phi=0.0):
        if model.correlated:
            # one use of the correlated chain: register absorbed and traced,
            # condensed to a canonical Kraus set before adding the phase
            from .channels import ChoiOperator, choi_to_kraus
            slot_choi, _ = phase_channel_slots(model, 1, 0.0)[0]
            base = choi_to_kraus(
                ChoiOperator(slot_choi.to_matrix(("K1", "H1")), 2, 2))
        else:
            base = base_kraus(model)
        kphi, dk = channel_with_phase(base, phi)
        return cls(kphi, dk)

    @property
    def rank(self):
        return len(self.kraus.operators)


@dataclass
class MopResult:
    qfi: float
    h: np.ndarray
    lmbda: float
    solution: object


def _h_parameters(r):
    """Order of the real parameters of an r x r hermitian h."""
    params = [("d", a, a) for a in range(r)]
    params += [("re", a, b) for a in range(r) for b in range(a + 1, r)]
    params += [("im", a, b) for a in range(r) for b in range(a + 1, r)]
    return params


def _h_from_vector(r, vec):
    h = np.zeros((r, r), dtype=complex)
    for val, (kind, a, b) in zip(vec, _h_parameters(r)):
        if kind == "d":
            h[a, a] = val
        elif kind == "re":
            h[a, b] += val
            h[b, a] += val
        else:
            h[a, b] += 1j * val
            h[b, a] += -1j * val
    return h


def _dkraus_partials(prob):
    """For each real h parameter, the stack derivative d(dK_k(h))/d theta."""
    ks = prob.kraus.operators
    r = prob.rank
    partials = []
    for kind, a, b in _h_parameters(r):
        rows = [None] * r
        if kind == "d":
            rows[a] = -1j * ks[a]
        elif kind == "re":
            rows[a] = -1j * ks[b]
            rows[b] = -1j * ks[a]
        else:
            rows[a] = ks[b]
            rows[b] = -ks[a]
        partials.append(rows)
    return partials


def _stack(rows, d_out, d_in):
    out = np.zeros((len(rows) * d_out, d_in), dtype=complex)
    for k, rkm in enumerate(rows):
        if rkm is not None:
            out[k * d_out:(k + 1) * d_out] = rkm
    return out


def channel_qfi_mop(prob, **solver_opts):
    """QFI of one channel use: returns (4 lambda*, optimal h)."""
    r = prob.rank
    d_in, d_out = prob.kraus.d_in, prob.kraus.d_out
    nb = d_in + r * d_out

    def arrow(bmat):
        m = np.zeros((nb, nb), dtype=complex)
        m[d_in:, :d_in] = bmat
        m[:d_in, d_in:] = dagger(bmat)
        return m

    m0 = arrow(_stack(prob.dkraus.operators, d_out, d_in))
    m0[d_in:, d_in:] = np.eye(r * d_out)
    m_lambda = np.zeros((nb, nb), dtype=complex)
    m_lambda[:d_in, :d_in] = np.eye(d_in)
    mats = [[m_lambda]]
    for rows in _dkraus_partials(prob):
        mats.append([arrow(_stack(rows, d_out, d_in))])
    c = np.zeros(1 + r * r)
    c[0] = 1.0
    sol = solve_sdp(SdpProblem(c, [m0], mats), **solver_opts)
    if sol.status != "optimal":
        raise RuntimeError("channel QFI SDP failed: %s" % sol.status)
    h = _h_from_vector(r, sol.x[1:])
    lam = float(sol.x[0])
    return MopResult(qfi=4 * lam, h=h, lmbda=lam, solution=sol)


def _shifted_dkraus(prob, h):
    ks, dks = prob.kraus.operators, prob.dkraus.operators
    return [dks[k] - 1j * sum(h[k, l] * ks[l] for l in range(prob.rank))
            for k in range(prob.rank)]


def alpha_of(prob, h):
    """alpha(h) = sum_k dK_k(h)^dag dK_k(h)."""
    shifted = _shifted_dkraus(prob, h)
    return sum(dagger(s) @ s for s in shifted)


def optimal_input_state(prob, h, tol=1e-6, **solver_opts):
    """Input state saturating the channel QFI at the optimal h.

    Maximizes Tr(rho alpha(h)) subject to the saddle-point gradient
    conditions; the achieved value must hit ||alpha(h)||, which is verified
    before returning.
    """
    d = prob.kraus.d_in
    alpha = alpha_of(prob, h)
    shifted = _shifted_dkraus(prob, h)
    partials = _dkraus_partials(prob)
    rows = [np.eye(d, dtype=complex)]
    vals = [1.0]
    for rows_theta in partials:
        g = np.zeros((d, d), dtype=complex)
        for k, pk in enumerate(rows_theta):
            if pk is not None:
                g += dagger(pk) @ shifted[k] + dagger(shifted[k]) @ pk
        rows.append((g + dagger(g)) / 2)
        vals.append(0.0)
    block = ConeBlock(c=-alpha, b_ops=np.array(rows), s=1)
    sol = solve_conic([block], b=np.array(vals), **solver_opts)
    if sol.status != "optimal":
        raise RuntimeError("input-state SDP failed: %s" % sol.status)
    rho = sol.x_blocks[0]
    rho = (rho + dagger(rho)) / 2
    rho = rho / np.trace(rho).real
    achieved = float(np.trace(rho @ alpha).real)
    want = float(np.linalg.eigvalsh(alpha).max())
    if abs(achieved - want) > tol * max(1.0, want):
        raise RuntimeError("input state misses the channel QFI: "
                           "%.3e vs %.3e" % (achieved, want))
    return rho
