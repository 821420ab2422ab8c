"""Comb constraints, the full-comb optimizer, isometry decomposition, gauge.

Oracles here are deliberately independent of the implementation under test:
the validator is cross-checked against the constraint-row builder (two
different encodings of the same causal chain), the full-comb state against
the O(N) environment fold, the local objective against the pre-QFI value,
and the optimizer against closed-form values for small N.
"""

import numpy as np
import pytest

from combqfi.channels import (ChoiOperator, dephasing_perp, damping_parallel,
                              kraus_to_choi, noiseless, phase_channel_slots)
from combqfi.comb import (Comb, apply_gauge, channel_chain_choi,
                          comb_constraint_rows, comb_labels,
                          decompose_to_isometries, iss_full_comb,
                          link_strategy, reconstruct_choi,
                          strategy_from_isometries, validate_comb)
from combqfi.seesaw import compute_output_state, random_strategy
from combqfi.sld import StatePair, pre_qfi, qfi_of_state
from combqfi.tensors import LabeledTensor, contract, dagger

from helpers import rand_density, rand_herm, rand_kraus, rand_unitary


def linked_random_channel_comb(rng, n, d_anc, bond=2):
    """Comb from random CPTP (not necessarily isometric) teeth."""
    a = [bond] * (n - 1) + [d_anc]
    rho = rand_density(rng, 2 * a[0])
    teeth = [LabeledTensor.from_matrix(rho, ("H1", "A1"), (2, a[0]))]
    for k in range(2, n + 1):
        d_in = a[k - 2] * 2
        d_out = 2 * a[k - 1]
        ks = rand_kraus(rng, d_in=d_in, d_out=d_out, r=3)
        choi = sum(np.outer(m.reshape(-1), m.reshape(-1).conj()) for m in ks)
        labels = ("H%d" % k, "A%d" % k, "A%d" % (k - 1), "K%d" % (k - 1))
        teeth.append(LabeledTensor.from_matrix(
            choi, labels, (2, a[k - 1], a[k - 2], 2)))
    t = teeth[0]
    for tooth in teeth[1:]:
        t = contract(t, tooth)
    return Comb(n, t)


def test_linked_channel_comb_validates():
    rng = np.random.default_rng(5)
    comb = linked_random_channel_comb(rng, 3, d_anc=2)
    report = validate_comb(comb)
    assert report.ok
    assert report.max_residual < 1e-9


def test_linked_isometric_strategy_validates():
    s = random_strategy(3, d_a=(2, 3, 2), seed=7)
    comb = link_strategy(s)
    report = validate_comb(comb)
    assert report.ok
    assert report.max_residual < 1e-9


def test_n1_density_matrix_is_a_comb():
    rng = np.random.default_rng(1)
    rho = rand_density(rng, 4)
    comb = Comb(1, LabeledTensor.from_matrix(rho, ("H1", "A1"), (2, 2)))
    assert validate_comb(comb).ok


def test_scaled_comb_fails_trace_condition():
    rng = np.random.default_rng(2)
    comb = linked_random_channel_comb(rng, 2, d_anc=2)
    bad = Comb(2, 1.1 * comb.tensor)
    report = validate_comb(bad)
    assert not report.ok
    names = [name for name, res, okc in report.conditions if not okc]
    assert any("trace" in name for name in names)


def test_constraint_rows_agree_with_validator():
    rng = np.random.default_rng(3)
    comb = linked_random_channel_comb(rng, 3, d_anc=2)
    rows, vals = comb_constraint_rows(3, d_anc=2)
    p = comb.matrix()
    got = np.array([np.trace(b @ p).real for b in rows])
    assert np.allclose(got, vals, atol=1e-9)
    # a generic PSD matrix of the right trace is not a comb
    g = rand_density(rng, p.shape[0]) * vals[-1]
    got_bad = np.array([np.trace(b @ g).real for b in rows])
    assert np.abs(got_bad - vals).max() > 1e-3


def test_chain_choi_matches_fold_route():
    for model, n in [(dephasing_perp(0.8), 3), (damping_parallel(0.6), 2)]:
        slots = phase_channel_slots(model, n, 0.0)
        lam, dlam = channel_chain_choi(model, n, 0.0)
        s = random_strategy(n, d_a=2, seed=13)
        comb = link_strategy(s)
        order = ("K%d" % n, "A%d" % n)
        rho_link = contract(comb.tensor, lam).to_matrix(order)
        drho_link = contract(comb.tensor, dlam).to_matrix(order)
        assert np.allclose(rho_link, compute_output_state(s, slots), atol=1e-10)
        sp = StatePair(rho_link, drho_link)
        assert sp.rho.shape == (4, 4)


def test_chain_choi_derivative_finite_difference():
    model = dephasing_perp(0.85)
    n = 2
    eps = 1e-6
    lam_p, _ = channel_chain_choi(model, n, eps)
    lam_m, _ = channel_chain_choi(model, n, -eps)
    _, dlam = channel_chain_choi(model, n, 0.0)
    fd = (lam_p.to_matrix(lam_p.labels) - lam_m.to_matrix(lam_p.labels)) / (2 * eps)
    assert np.allclose(fd, dlam.to_matrix(lam_p.labels), atol=1e-8)


def test_full_comb_objective_equals_pre_qfi():
    from combqfi.comb import assemble_comb_objective

    rng = np.random.default_rng(11)
    model = damping_parallel(0.5)
    n = 2
    lam, dlam = channel_chain_choi(model, n, 0.0)
    s = random_strategy(n, d_a=2, seed=4)
    comb = link_strategy(s)
    l_mat = rand_herm(rng, 4)
    m_mat = assemble_comb_objective(lam, dlam, l_mat, comb_labels(n))
    order = ("K%d" % n, "A%d" % n)
    sp = StatePair(contract(comb.tensor, lam).to_matrix(order),
                   contract(comb.tensor, dlam).to_matrix(order))
    val = np.trace(comb.matrix() @ m_mat.T).real
    assert np.isclose(val, pre_qfi(sp, l_mat), atol=1e-9)


def test_iss_full_comb_noiseless_n2():
    lam, dlam = channel_chain_choi(noiseless(), 2, 0.0)
    res = iss_full_comb(lam, dlam, d_anc=2, seed=0)
    assert res.qfi == pytest.approx(4.0, rel=2e-4)
    assert validate_comb(res.comb).ok


def test_iss_full_comb_dephasing_perp_n2():
    lam, dlam = channel_chain_choi(dephasing_perp(0.9), 2, 0.0)
    res = iss_full_comb(lam, dlam, d_anc=2, seed=0)
    assert res.qfi == pytest.approx(3.6, abs=2e-3)


def test_iss_full_comb_damping_parallel_n2_anc4():
    lam, dlam = channel_chain_choi(damping_parallel(0.5), 2, 0.0)
    res = iss_full_comb(lam, dlam, d_anc=4, seed=0)
    assert res.qfi == pytest.approx(2.179, abs=5e-3)


def test_iss_full_comb_monotone_and_consistent():
    lam, dlam = channel_chain_choi(dephasing_perp(0.8), 2, 0.0)
    res = iss_full_comb(lam, dlam, d_anc=2, seed=1)
    vals = [v for (_, _, v) in res.trace]
    diffs = np.diff(np.array(vals))
    assert diffs.min() > -1e-9
    order = ("K2", "A2")
    sp = StatePair(contract(res.comb.tensor, lam).to_matrix(order),
                   contract(res.comb.tensor, dlam).to_matrix(order))
    assert np.isclose(res.qfi, qfi_of_state(sp), atol=1e-8)
    assert np.isclose(res.qfi, pre_qfi(sp, res.sld), atol=1e-6)


def test_iss_full_comb_dimension_guard():
    lam, dlam = channel_chain_choi(noiseless(), 6, 0.0)
    with pytest.raises(ValueError):
        iss_full_comb(lam, dlam, d_anc=4)


def test_decompose_roundtrip_random_comb():
    s = random_strategy(3, d_a=2, seed=21)
    comb = link_strategy(s)
    seq = decompose_to_isometries(comb)
    for v in seq.isometries:
        assert np.allclose(dagger(v) @ v, np.eye(v.shape[1]), atol=1e-8)
    rec = reconstruct_choi(seq)
    target = comb.choi_matrix()
    assert np.linalg.norm(rec - target) < 1e-7


def test_decompose_roundtrip_channel_teeth():
    rng = np.random.default_rng(8)
    comb = linked_random_channel_comb(rng, 2, d_anc=2)
    seq = decompose_to_isometries(comb)
    rec = reconstruct_choi(seq)
    assert np.linalg.norm(rec - comb.choi_matrix()) < 1e-7


def test_decompose_n1_pure_state_gives_vector():
    v = np.array([0.6, 0.0, 0.0, 0.8j])
    comb = Comb(1, LabeledTensor.from_matrix(np.outer(v, v.conj()),
                                             ("H1", "A1"), (2, 2)))
    seq = decompose_to_isometries(comb)
    assert seq.a_dims[-1] == 1
    w = seq.isometries[0].reshape(-1)
    assert abs(abs(np.vdot(w, v)) - 1.0) < 1e-10


def test_decompose_ancilla_dims_are_ranks():
    s = random_strategy(3, d_a=2, seed=2)
    comb = link_strategy(s)
    seq = decompose_to_isometries(comb)
    t = comb.tensor
    reduced = t.partial_trace("A3").partial_trace("H3").partial_trace("K2")
    p2 = reduced.to_matrix(("H1", "K1", "H2")) / 2
    assert seq.a_dims[1] == np.linalg.matrix_rank(p2, tol=1e-9)


def test_decomposed_strategy_reproduces_qfi():
    model = dephasing_perp(0.8)
    n = 2
    slots = phase_channel_slots(model, n, 0.0)
    s = random_strategy(n, d_a=2, seed=31)
    comb = link_strategy(s)
    lam, dlam = channel_chain_choi(model, n, 0.0)
    order = ("K%d" % n, "A%d" % n)
    sp = StatePair(contract(comb.tensor, lam).to_matrix(order),
                   contract(comb.tensor, dlam).to_matrix(order))
    seq = decompose_to_isometries(comb)
    s2 = strategy_from_isometries(seq)
    s2.validate()
    rho = compute_output_state(s2, slots)
    from combqfi.seesaw import compute_output_derivative
    drho = compute_output_derivative(s2, slots)
    r = seq.a_dims[-1]
    d_keep = seq.d_anc
    dims = (2, d_keep, r, 2, d_keep, r)
    rho_red = np.trace(rho.reshape(dims), axis1=2, axis2=5).reshape(
        2 * d_keep, 2 * d_keep)
    drho_red = np.trace(drho.reshape(dims), axis1=2, axis2=5).reshape(
        2 * d_keep, 2 * d_keep)
    sp2 = StatePair(rho_red, drho_red)
    assert np.isclose(qfi_of_state(sp2), qfi_of_state(sp), atol=1e-6)


def test_gauge_identity_is_noop():
    s = random_strategy(3, d_a=2, seed=3)
    s2 = apply_gauge(s, 1, np.eye(2))
    for a, b in zip(s.teeth, s2.teeth):
        assert np.allclose(a.to_matrix(a.labels), b.to_matrix(a.labels))


def test_gauge_leaves_linked_comb_unchanged():
    rng = np.random.default_rng(17)
    s = random_strategy(3, d_a=2, seed=9)
    before = link_strategy(s).matrix()
    u = rand_unitary(rng, 2)
    s2 = apply_gauge(s, 2, u)
    after = link_strategy(s2).matrix()
    assert np.linalg.norm(after - before) < 1e-10
    assert not np.allclose(s.teeth[1].to_matrix(s.tooth_labels(2)),
                           s2.teeth[1].to_matrix(s.tooth_labels(2)))


def test_gauge_preserves_output_state():
    rng = np.random.default_rng(18)
    model = damping_parallel(0.4)
    slots = phase_channel_slots(model, 3, 0.0)
    s = random_strategy(3, d_a=2, seed=10)
    u = rand_unitary(rng, 2)
    s2 = apply_gauge(s, 1, u)
    assert np.allclose(compute_output_state(s2, slots),
                       compute_output_state(s, slots), atol=1e-10)


def test_gauge_rejects_non_unitary():
    s = random_strategy(2, d_a=2, seed=1)
    with pytest.raises(ValueError):
        apply_gauge(s, 1, np.array([[1.0, 0.0], [0.0, 2.0]]))
    with pytest.raises(ValueError):
        apply_gauge(s, 2, np.eye(2))
