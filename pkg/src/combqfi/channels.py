"""Phase-encoding noisy channels: Kraus sets, Choi operators, noise models.

The estimated parameter is a phase phi written by U_phi = exp(-i phi sz/2)
on the probe qubit AFTER the noise Kraus operator acts, so a channel use has
Kraus operators U_phi K_k and derivative operators (-i sz/2) U_phi K_k.

Choi operators follow the vec convention |K> = sum_ij K_ij |i>_out |j>_in,
i.e. the Choi matrix of a map with Kraus set {K_k} is sum_k |K_k><K_k| living
on out (x) in.  Channels satisfy Tr_out C = 1_in.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensors import LabeledTensor, as_complex, contract, dagger, kron

__all__ = [
    "ChoiOperator",
    "KrausSet",
    "NoiseModelSpec",
    "base_kraus",
    "channel_with_phase",
    "choi_to_kraus",
    "correlated_dephasing",
    "correlated_first_and_last",
    "damping_parallel",
    "damping_perp",
    "dephasing_parallel",
    "dephasing_perp",
    "kraus_to_choi",
    "link_product",
    "mix_depolarizing",
    "noiseless",
    "phase_channel_slots",
]

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
KET_PLUS = np.array([[1], [1]], dtype=complex) / np.sqrt(2)
KET_MINUS = np.array([[1], [-1]], dtype=complex) / np.sqrt(2)

COMPLETENESS_TOL = 1e-10


def u_phase(phi):
    """exp(-i phi sz / 2)."""
    return np.diag([np.exp(-1j * phi / 2), np.exp(1j * phi / 2)])


@dataclass
class KrausSet:
    """A collection of Kraus operators mapping d_in to d_out.

    Completeness sum_k K_k^dag K_k = 1 is enforced at construction unless
    ``relaxed`` is set (used for derivative sets and rounded fixtures); the
    residual is recorded either way.
    """

    operators: list
    d_in: int
    d_out: int
    relaxed: bool = False
    completeness_residual: float = field(default=0.0, compare=False)

    def __post_init__(self):
        self.operators = [as_complex(k) for k in self.operators]
        for k in self.operators:
            if k.shape != (self.d_out, self.d_in):
                raise ValueError("Kraus operator shape %r, expected %r"
                                 % (k.shape, (self.d_out, self.d_in)))
        acc = sum(dagger(k) @ k for k in self.operators)
        self.completeness_residual = float(
            np.linalg.norm(acc - np.eye(self.d_in)))
        if not self.relaxed and self.completeness_residual > COMPLETENESS_TOL:
            raise ValueError("Kraus set not complete (residual %.3e)"
                             % self.completeness_residual)

    def __len__(self):
        return len(self.operators)


@dataclass
class ChoiOperator:
    """Choi matrix on out (x) in together with its factor dimensions."""

    matrix: np.ndarray
    d_out: int
    d_in: int

    def __post_init__(self):
        self.matrix = as_complex(self.matrix)
        n = self.d_out * self.d_in
        if self.matrix.shape != (n, n):
            raise ValueError("Choi matrix shape %r, expected (%d, %d)"
                             % (self.matrix.shape, n, n))

    def validate_psd(self, tol=1e-10):
        scale = max(1.0, float(np.abs(np.trace(self.matrix))))
        if np.linalg.norm(self.matrix - dagger(self.matrix)) > tol * scale:
            raise ValueError("Choi matrix is not hermitian")
        wmin = float(np.linalg.eigvalsh(self.matrix).min())
        if wmin < -tol * scale:
            raise ValueError("Choi matrix is not PSD (min eig %.3e)" % wmin)

    def validate_channel(self, tol=1e-10):
        """PSD and trace-preserving: Tr_out C = 1_in."""
        self.validate_psd(tol)
        red = np.trace(self.matrix.reshape(self.d_out, self.d_in,
                                           self.d_out, self.d_in),
                       axis1=0, axis2=2)
        if np.linalg.norm(red - np.eye(self.d_in)) > tol * self.d_in:
            raise ValueError("Choi marginal Tr_out differs from identity")

    def tensor(self, labels, dims):
        return LabeledTensor.from_matrix(self.matrix, labels, dims)


def _vec(k):
    return as_complex(k).reshape(-1, 1)


def kraus_to_choi(ks):
    n = ks.d_out * ks.d_in
    c = np.zeros((n, n), dtype=complex)
    for k in ks.operators:
        v = _vec(k)
        c += v @ dagger(v)
    return ChoiOperator(c, ks.d_out, ks.d_in)


def choi_to_kraus(c, cutoff=1e-10):
    """Canonical Kraus operators from the Choi eigendecomposition.

    Eigenvalues below ``cutoff`` are dropped; a significantly negative
    eigenvalue is an error (the map would not be completely positive).
    """
    w, v = np.linalg.eigh((c.matrix + dagger(c.matrix)) / 2)
    if w.min() < -1e-8 * max(1.0, w.max()):
        raise ValueError("Choi operator is not CP (min eig %.3e)" % w.min())
    ops = []
    for i in np.argsort(w)[::-1]:
        if w[i] > cutoff:
            ops.append(np.sqrt(w[i]) * v[:, i].reshape(c.d_out, c.d_in))
    ks = KrausSet(ops, d_in=c.d_in, d_out=c.d_out, relaxed=True)
    ks.relaxed = ks.completeness_residual > COMPLETENESS_TOL
    return ks


def link_product(a, b, over=None):
    """Link product of Choi tensors: plain contraction over shared labels."""
    return contract(a, b, over)


def mix_depolarizing(c, q):
    """(1-q) C + q D with D the completely depolarizing Choi operator."""
    n = c.d_out * c.d_in
    d = np.eye(n, dtype=complex) / c.d_out
    return ChoiOperator((1 - q) * c.matrix + q * d, c.d_out, c.d_in)


# ---------------------------------------------------------------------------
# noise models

VARIANTS = ("noiseless", "dephasing_perp", "dephasing_parallel",
            "damping_perp", "damping_parallel", "correlated_dephasing")


@dataclass(frozen=True)
class NoiseModelSpec:
    """A named single-use noise model with strength p (and correlation C)."""

    kind: str
    p: float = 1.0
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in VARIANTS:
            raise ValueError("unknown model kind %r" % self.kind)
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if not -1.0 <= self.c <= 1.0:
            raise ValueError("C must lie in [-1, 1]")

    @property
    def correlated(self):
        return self.kind == "correlated_dephasing"

    @property
    def env_dim(self):
        return 2 if self.correlated else 1

    def describe(self):
        if self.kind == "noiseless":
            return "noiseless"
        if self.correlated:
            return "%s(p=%g, C=%g)" % (self.kind, self.p, self.c)
        return "%s(p=%g)" % (self.kind, self.p)


def noiseless():
    return NoiseModelSpec("noiseless")


def dephasing_perp(p):
    return NoiseModelSpec("dephasing_perp", p)


def dephasing_parallel(p):
    return NoiseModelSpec("dephasing_parallel", p)


def damping_perp(p):
    return NoiseModelSpec("damping_perp", p)


def damping_parallel(p):
    return NoiseModelSpec("damping_parallel", p)


def correlated_dephasing(p, c):
    return NoiseModelSpec("correlated_dephasing", p, c)


def base_kraus(model):
    """Kraus operators of the bare noise (no phase).

    For the correlated model this is the middle-of-chain variant acting on
    probe (x) register with the probe factor first.
    """
    p = model.p
    if model.kind == "noiseless":
        return KrausSet([np.eye(2, dtype=complex)], 2, 2)
    if model.kind == "dephasing_perp":
        return KrausSet([np.sqrt(p) * np.eye(2), np.sqrt(1 - p) * SX], 2, 2)
    if model.kind == "dephasing_parallel":
        return KrausSet([np.sqrt(p) * np.eye(2), np.sqrt(1 - p) * SZ], 2, 2)
    if model.kind == "damping_perp":
        k0 = KET_MINUS @ dagger(KET_MINUS) + np.sqrt(p) * KET_PLUS @ dagger(KET_PLUS)
        k1 = np.sqrt(1 - p) * KET_MINUS @ dagger(KET_PLUS)
        return KrausSet([k0, k1], 2, 2)
    if model.kind == "damping_parallel":
        k0 = np.diag([1.0, np.sqrt(p)]).astype(complex)
        k1 = np.zeros((2, 2), dtype=complex)
        k1[0, 1] = np.sqrt(1 - p)
        return KrausSet([k0, k1], 2, 2)
    # correlated parallel dephasing on probe (x) register
    eps = 2 * np.arccos(np.sqrt(p))
    up, um = u_phase(eps), u_phase(-eps)
    pp = KET_PLUS @ dagger(KET_PLUS)
    mm = KET_MINUS @ dagger(KET_MINUS)
    mp = KET_MINUS @ dagger(KET_PLUS)
    pm = KET_PLUS @ dagger(KET_MINUS)
    wp, wm = np.sqrt((1 + model.c) / 2), np.sqrt((1 - model.c) / 2)
    ops = [wp * kron(up, pp), wm * kron(up, mp),
           wm * kron(um, pm), wp * kron(um, mm)]
    return KrausSet(ops, 4, 4)


def channel_with_phase(ks, phi):
    """Apply the signal unitary after the noise; return (K(phi), dK(phi)).

    The probe is the first tensor factor of the output space; any remaining
    output factors (the correlated register) are untouched by the signal.
    """
    d_env = ks.d_out // 2
    u = kron(u_phase(phi), np.eye(d_env))
    g = kron(SZ / 2, np.eye(d_env))
    kphi = [u @ k for k in ks.operators]
    dk = [-1j * g @ k for k in kphi]
    out = KrausSet(kphi, ks.d_in, ks.d_out, relaxed=ks.relaxed)
    dout = KrausSet(dk, ks.d_in, ks.d_out, relaxed=True)
    return out, dout


def correlated_first_and_last(model):
    """Chain-end variants of the correlated model.

    The first use absorbs a maximally mixed register; the last one discards
    its output register.
    """
    mid = base_kraus(model).operators
    eye2 = np.eye(2, dtype=complex)
    first, last = [], []
    for k in mid:
        for e in range(2):
            ket = np.zeros((2, 1), dtype=complex)
            ket[e] = 1.0
            first.append(k @ kron(eye2, ket) / np.sqrt(2))
            last.append(kron(eye2, ket.T) @ k)
    return (KrausSet(first, d_in=2, d_out=4),
            KrausSet(last, d_in=4, d_out=2))


def _choi_pair(ks, phi):
    kphi, dk = channel_with_phase(ks, phi)
    n = ks.d_out * ks.d_in
    c = np.zeros((n, n), dtype=complex)
    dc = np.zeros((n, n), dtype=complex)
    for a, b in zip(kphi.operators, dk.operators):
        va, vb = _vec(a), _vec(b)
        c += va @ dagger(va)
        dc += vb @ dagger(va) + va @ dagger(vb)
    return c, dc


def phase_channel_slots(model, n, phi=0.0):
    """Per-use Choi tensors [(Lambda_k, dLambda_k)] for an N-use chain.

    Labels: use k consumes H<k> and produces K<k>; the correlated register
    links consecutive uses through E<k>.  Uncorrelated models give identical
    tensors with per-slot labels.
    """
    if n < 1:
        raise ValueError("need at least one channel use")
    if not model.correlated:
        c, dc = _choi_pair(base_kraus(model), phi)
        return [(LabeledTensor.from_matrix(c, ("K%d" % k, "H%d" % k), (2, 2)),
                 LabeledTensor.from_matrix(dc, ("K%d" % k, "H%d" % k), (2, 2)))
                for k in range(1, n + 1)]
    first, last = correlated_first_and_last(model)
    if n == 1:
        # compose: absorb the register and trace it out within one use
        eye2 = np.eye(2, dtype=complex)
        ops = []
        for k in base_kraus(model).operators:
            for e in range(2):
                for f in range(2):
                    ket = np.zeros((2, 1), dtype=complex); ket[e] = 1.0
                    bra = np.zeros((1, 2), dtype=complex); bra[0, f] = 1.0
                    ops.append(kron(eye2, bra) @ k @ kron(eye2, ket) / np.sqrt(2))
        c, dc = _choi_pair(KrausSet(ops, 2, 2), phi)
        return [(LabeledTensor.from_matrix(c, ("K1", "H1"), (2, 2)),
                 LabeledTensor.from_matrix(dc, ("K1", "H1"), (2, 2)))]
    slots = []
    c, dc = _choi_pair(first, phi)
    lab = ("K1", "E1", "H1")
    slots.append((LabeledTensor.from_matrix(c, lab, (2, 2, 2)),
                  LabeledTensor.from_matrix(dc, lab, (2, 2, 2))))
    cm, dcm = _choi_pair(base_kraus(model), phi)
    for k in range(2, n):
        lab = ("K%d" % k, "E%d" % k, "H%d" % k, "E%d" % (k - 1))
        slots.append((LabeledTensor.from_matrix(cm, lab, (2, 2, 2, 2)),
                      LabeledTensor.from_matrix(dcm, lab, (2, 2, 2, 2))))
    c, dc = _choi_pair(last, phi)
    lab = ("K%d" % n, "H%d" % n, "E%d" % (n - 1))
    slots.append((LabeledTensor.from_matrix(c, lab, (2, 2, 2)),
                  LabeledTensor.from_matrix(dc, lab, (2, 2, 2))))
    return slots
