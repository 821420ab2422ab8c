"""Tensor container files: exact round trips, validation, trace export."""

import csv
import json

import numpy as np
import pytest

from combqfi.channels import dephasing_perp, phase_channel_slots
from combqfi.comb import link_strategy, load_comb, save_comb, validate_comb
from combqfi.seesaw import (compute_output_state, export_trace, load_strategy,
                            random_strategy, save_strategy)
from combqfi.tensors import (CONTAINER_VERSION, LabeledTensor,
                             container_from_json, container_to_json,
                             load_container, save_container)

from helpers import rand_complex


def rand_labeled(rng, labels, dims):
    d = int(np.prod(dims))
    return LabeledTensor.from_matrix(rand_complex(rng, (d, d)), labels, dims)


def test_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(7)
    tensors = {
        "a": rand_labeled(rng, ("X", "Y"), (2, 3)),
        "b": rand_labeled(rng, ("Z",), (4,)),
    }
    path = tmp_path / "box.json"
    save_container(path, tensors, kind="test", meta={"note": "x", "k": 3})
    box = load_container(path)
    assert box.kind == "test"
    assert box.meta == {"note": "x", "k": 3}
    assert set(box.tensors) == {"a", "b"}
    for name, t in tensors.items():
        got = box[name]
        assert got.labels == t.labels
        assert got.dims == t.dims
        assert np.array_equal(got.data, t.data)


def test_json_text_is_stable(tmp_path):
    rng = np.random.default_rng(3)
    tensors = {"t": rand_labeled(rng, ("U",), (3,))}
    one = container_to_json(save_container(tmp_path / "a.json", tensors, "k"))
    two = container_to_json(load_container(tmp_path / "a.json"))
    assert one == two


def test_rejects_wrong_format_and_version():
    doc = {"format": "something-else", "version": 1, "kind": "", "meta": {},
           "tensors": []}
    with pytest.raises(ValueError, match="not a"):
        container_from_json(json.dumps(doc))
    doc["format"] = "combqfi-tensors"
    doc["version"] = CONTAINER_VERSION + 1
    with pytest.raises(ValueError, match="version"):
        container_from_json(json.dumps(doc))


def test_strategy_round_trip_preserves_output_state(tmp_path):
    strategy = random_strategy(3, (2, 3, 2), seed=11)
    path = tmp_path / "strategy.json"
    save_strategy(path, strategy, meta={"model": "demo"})
    back = load_strategy(path)
    assert back.n == 3 and back.a_dims == (2, 3, 2)
    slots = phase_channel_slots(dephasing_perp(0.9), 3)
    rho_a = compute_output_state(strategy, slots)
    rho_b = compute_output_state(back, slots)
    assert np.array_equal(rho_a, rho_b)


def test_strategy_loader_rejects_other_kinds(tmp_path):
    rng = np.random.default_rng(0)
    path = tmp_path / "not_strategy.json"
    save_container(path, {"t": rand_labeled(rng, ("X",), (2,))}, kind="comb")
    with pytest.raises(ValueError, match="strategy"):
        load_strategy(path)


def test_comb_round_trip(tmp_path):
    comb = link_strategy(random_strategy(2, 2, seed=5))
    path = tmp_path / "comb.json"
    save_comb(path, comb)
    back = load_comb(path)
    assert back.n == 2 and back.d_anc == comb.d_anc
    assert np.array_equal(back.matrix(), comb.matrix())
    assert validate_comb(back).ok


def test_export_trace_csv(tmp_path):
    trace = [(0, "tooth1", 1.25), (0, "sld", 1.5), (1, "tooth1", 1.75)]
    path = tmp_path / "trace.csv"
    export_trace(trace, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["sweep", "stage", "value"]
    assert rows[2] == ["0", "sld", "1.5"]
    assert [float(r[2]) for r in rows[1:]] == [1.25, 1.5, 1.75]
