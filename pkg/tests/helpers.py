"""Shared randomized constructors for the test suite (all seeded by caller)."""

import numpy as np


def rand_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def rand_herm(rng, d):
    m = rand_complex(rng, (d, d))
    return (m + m.conj().T) / 2


def rand_unitary(rng, d):
    q, r = np.linalg.qr(rand_complex(rng, (d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def rand_density(rng, d, rank=None):
    rank = rank or d
    a = rand_complex(rng, (d, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def rand_kraus(rng, d_in, d_out, r):
    """Random channel: r Kraus operators from a Haar isometry."""
    v = rand_unitary(rng, d_out * r)[:, :d_in]
    return [v[k * d_out:(k + 1) * d_out, :] for k in range(r)]


def apply_kraus(kraus, rho):
    return sum(k @ rho @ k.conj().T for k in kraus)


def choi_by_basis_action(kraus, d_in):
    """Independent Choi oracle: C = sum_{jj'} Lambda(|j><j'|) (x) |j><j'|."""
    d_out = kraus[0].shape[0]
    c = np.zeros((d_out * d_in, d_out * d_in), dtype=complex)
    for j in range(d_in):
        for jp in range(d_in):
            e = np.zeros((d_in, d_in), dtype=complex)
            e[j, jp] = 1.0
            c += np.kron(apply_kraus(kraus, e), e)
    return c


def make_row(**overrides):
    """A valid ResultRow with sensible defaults, fields overridable."""
    from combqfi.bench import ResultRow

    base = dict(model="noiseless", p=0.0, c=0.0, n=2, d_a=2, seed=0,
                qfi=4.0, qfi_per_n=2.0, split_qfi_per_n=2.0, iterations=12,
                wall_ms=34.5, converged=True)
    base.update(overrides)
    return ResultRow(**base)
