"""Symmetric logarithmic derivatives and quantum Fisher information.

Given a state family rho(phi) with derivative drho at the working point, the
SLD L solves rho L + L rho = 2 drho and the QFI is Tr(rho L^2).  The
variational form 2 Tr(drho L) - Tr(rho L^2) is concave in L and touches the
QFI exactly at the SLD, which is what the see-saw alternates against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import as_complex, dagger, herm_eig

__all__ = ["StatePair", "pre_qfi", "qfi_of_state", "solve_sld"]

STATE_TOL = 1e-8
SUPPORT_CUTOFF = 1e-10


@dataclass
class StatePair:
    """A density matrix and its parameter derivative at the working point."""

    rho: np.ndarray
    drho: np.ndarray

    def __post_init__(self):
        self.rho = as_complex(self.rho)
        self.drho = as_complex(self.drho)
        if self.rho.shape != self.drho.shape:
            raise ValueError("rho and drho shapes differ")
        if np.linalg.norm(self.rho - dagger(self.rho)) > STATE_TOL:
            raise ValueError("rho is not hermitian")
        if np.linalg.norm(self.drho - dagger(self.drho)) > STATE_TOL:
            raise ValueError("drho is not hermitian")
        if abs(np.trace(self.rho) - 1.0) > STATE_TOL:
            raise ValueError("rho must have unit trace")
        if abs(np.trace(self.drho)) > STATE_TOL:
            raise ValueError("drho must be traceless")
        if float(np.linalg.eigvalsh((self.rho + dagger(self.rho)) / 2).min()) < -STATE_TOL:
            raise ValueError("rho is not positive semidefinite")

    @property
    def dim(self):
        return self.rho.shape[0]


def solve_sld(sp, cutoff=SUPPORT_CUTOFF):
    """SLD in the eigenbasis of rho: L_ij = 2 drho_ij / (l_i + l_j).

    Matrix elements with l_i + l_j below ``cutoff`` lie outside the support
    and are set to zero (the standard Moore-Penrose convention).
    """
    w, v = herm_eig(sp.rho, rtol=1e-8)
    dr = dagger(v) @ sp.drho @ v
    denom = w[:, None] + w[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        core = np.where(denom < cutoff, 0.0, 2.0 * dr / np.where(denom < cutoff, 1.0, denom))
    l = v @ core @ dagger(v)
    return (l + dagger(l)) / 2


def qfi_of_state(sp, cutoff=SUPPORT_CUTOFF):
    """Quantum Fisher information Tr(rho L^2)."""
    l = solve_sld(sp, cutoff)
    return float(np.trace(sp.rho @ l @ l).real)


def pre_qfi(sp, l):
    """See-saw objective 2 Tr(drho L) - Tr(rho L^2) for a candidate L."""
    l = as_complex(l)
    return float((2 * np.trace(sp.drho @ l) - np.trace(sp.rho @ l @ l)).real)
