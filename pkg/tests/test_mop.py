import numpy as np
import pytest
from scipy.optimize import minimize

from combqfi.channels import (
    base_kraus,
    channel_with_phase,
    correlated_dephasing,
    damping_parallel,
    damping_perp,
    dephasing_parallel,
    dephasing_perp,
    noiseless,
)
from combqfi.mop import MopProblem, alpha_of, channel_qfi_mop, optimal_input_state
from combqfi.sld import StatePair, qfi_of_state

from helpers import rand_complex


def _output_pair(kraus, dkraus, rho_in):
    rho = sum(k @ rho_in @ k.conj().T for k in kraus)
    drho = sum(dk @ rho_in @ k.conj().T + k @ rho_in @ dk.conj().T
               for k, dk in zip(kraus, dkraus))
    return StatePair(rho, (drho + drho.conj().T) / 2)


def _ancilla_kraus(prob):
    eye = np.eye(prob.kraus.d_in, dtype=complex)
    ks = [np.kron(k, eye) for k in prob.kraus.operators]
    dks = [np.kron(dk, eye) for dk in prob.dkraus.operators]
    return ks, dks


def _brute_force_channel_qfi(prob, seeds=12):
    """Maximize the output QFI over ancilla-assisted pure inputs directly."""
    d = prob.kraus.d_in
    ks, dks = _ancilla_kraus(prob)

    def neg_qfi(v):
        psi = v[:d * d] + 1j * v[d * d:]
        nrm = np.linalg.norm(psi)
        if nrm < 1e-9:
            return 0.0
        psi = psi / nrm
        rho_in = np.outer(psi, psi.conj())
        return -qfi_of_state(_output_pair(ks, dks, rho_in))

    rng = np.random.default_rng(60)
    best = 0.0
    for _ in range(seeds):
        v0 = rng.standard_normal(2 * d * d)
        res = minimize(neg_qfi, v0, method="Nelder-Mead",
                       options={"maxiter": 4000, "fatol": 1e-12, "xatol": 1e-8})
        best = max(best, -res.fun)
    return best


def test_noiseless_channel_qfi_is_one():
    res = channel_qfi_mop(MopProblem.from_model(noiseless()))
    assert np.isclose(res.qfi, 1.0, atol=1e-7)
    assert np.allclose(res.h, res.h.conj().T)


@pytest.mark.parametrize("model", [
    dephasing_perp(0.8),
    dephasing_parallel(0.85),
    damping_perp(0.75),
    damping_parallel(0.5),
], ids=lambda m: m.kind)
def test_channel_qfi_matches_brute_force(model):
    prob = MopProblem.from_model(model)
    res = channel_qfi_mop(prob)
    brute = _brute_force_channel_qfi(prob)
    assert res.qfi >= brute - 1e-5          # MOP value is an upper bound
    assert np.isclose(res.qfi, brute, atol=2e-3)


def test_correlated_effective_channel_qfi():
    # single use of the correlated model reduces to parallel dephasing
    res_corr = channel_qfi_mop(MopProblem.from_model(correlated_dephasing(0.85, 0.7)))
    res_flat = channel_qfi_mop(MopProblem.from_model(dephasing_parallel(0.85)))
    assert np.isclose(res_corr.qfi, res_flat.qfi, atol=1e-6)


def test_optimal_input_noiseless_is_maximally_mixed():
    prob = MopProblem.from_model(noiseless())
    res = channel_qfi_mop(prob)
    rho = optimal_input_state(prob, res.h)
    assert np.isclose(rho[0, 0].real, 0.5, atol=1e-6)
    assert np.isclose(rho[1, 1].real, 0.5, atol=1e-6)


@pytest.mark.parametrize("model", [
    noiseless(),
    dephasing_perp(0.8),
    damping_parallel(0.5),
    dephasing_parallel(0.85),
], ids=lambda m: m.kind)
def test_optimal_input_achieves_channel_qfi(model):
    # purify the optimizer's input state and push it through the channel:
    # the output family's QFI must equal the MOP value
    prob = MopProblem.from_model(model)
    res = channel_qfi_mop(prob)
    rho = optimal_input_state(prob, res.h)
    w, v = np.linalg.eigh(rho)
    d = rho.shape[0]
    psi = np.zeros(d * d, dtype=complex)
    for i in range(d):
        if w[i] > 1e-12:
            psi += np.sqrt(w[i]) * np.kron(v[:, i], np.eye(d)[i])
    psi /= np.linalg.norm(psi)
    ks, dks = _ancilla_kraus(prob)
    sp = _output_pair(ks, dks, np.outer(psi, psi.conj()))
    assert np.isclose(qfi_of_state(sp), res.qfi, atol=2e-5)


def test_alpha_norm_is_lambda():
    prob = MopProblem.from_model(damping_perp(0.6))
    res = channel_qfi_mop(prob)
    alpha = alpha_of(prob, res.h)
    assert np.isclose(np.linalg.eigvalsh(alpha).max(), res.qfi / 4, atol=1e-6)
