"""Doubled-index labeled tensors and dense linear-algebra helpers.

Matrices are plain numpy complex arrays (row-major).  A :class:`LabeledTensor`
represents an operator on a tensor product of named subsystems; every label
owns a ket axis and a bra axis, so an operator on d1 (x) d2 is stored with
shape (d1, d1, d2, d2).  Contraction pairs ket with ket and bra with bra over
shared labels, which is exactly the link product of the corresponding
operators (the partial transpose in the matrix definition of the link product
cancels the bra-ket crossing of matrix multiplication).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Container",
    "LabeledTensor",
    "container_from_json",
    "container_to_json",
    "contract",
    "dagger",
    "herm_eig",
    "kron",
    "load_container",
    "outer",
    "partial_trace",
    "partial_transpose",
    "save_container",
]


def as_complex(m):
    return np.asarray(m, dtype=complex)


def dagger(m):
    return np.conj(np.transpose(m))


def kron(*ms):
    """Kronecker product of one or more matrices, left to right."""
    out = as_complex(ms[0])
    for m in ms[1:]:
        out = np.kron(out, as_complex(m))
    return out


def herm_eig(m, rtol=1e-12):
    """Eigendecomposition of a Hermitian matrix.

    Validates hermiticity to relative tolerance ``rtol``, symmetrizes to kill
    roundoff, and returns (eigenvalues ascending, eigenvector columns).
    """
    m = as_complex(m)
    scale = max(1.0, np.linalg.norm(m))
    if np.linalg.norm(m - dagger(m)) > rtol * scale:
        raise ValueError("matrix is not hermitian within tolerance")
    return np.linalg.eigh((m + dagger(m)) / 2)


def _subsystem_view(m, dims):
    n = len(dims)
    return as_complex(m).reshape(tuple(dims) + tuple(dims)), n


def partial_trace(m, dims, keep):
    """Trace out all subsystems of ``m`` except those indexed by ``keep``.

    ``dims`` are the subsystem dimensions in kron order, ``keep`` the indices
    (in order) of the subsystems retained.
    """
    t, n = _subsystem_view(m, dims)
    keep = tuple(keep)
    for i in sorted(set(range(n)) - set(keep), reverse=True):
        t = np.trace(t, axis1=i, axis2=i + t.ndim // 2)
    d = int(np.prod([dims[i] for i in keep], initial=1))
    return t.reshape(d, d)


def partial_transpose(m, dims, which):
    """Transpose subsystem ``which`` of ``m`` (dims in kron order)."""
    t, n = _subsystem_view(m, dims)
    t = np.swapaxes(t, which, n + which)
    d = int(np.prod(dims))
    return t.reshape(d, d)


def _interleave(n):
    # (k1..kn, b1..bn) -> (k1, b1, k2, b2, ...)
    perm = []
    for i in range(n):
        perm += [i, n + i]
    return perm


def _deinterleave(n):
    return [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]


@dataclass(frozen=True)
class LabeledTensor:
    """Operator on named subsystems, stored with interleaved (ket, bra) axes."""

    labels: tuple
    dims: tuple
    data: np.ndarray

    def __post_init__(self):
        if len(self.labels) != len(set(self.labels)):
            raise ValueError("duplicate labels: %r" % (self.labels,))
        if len(self.labels) != len(self.dims):
            raise ValueError("labels and dims length mismatch")
        want = tuple(d for dim in self.dims for d in (dim, dim))
        if tuple(self.data.shape) != want:
            raise ValueError("data shape %r does not match dims %r"
                             % (self.data.shape, self.dims))

    @classmethod
    def scalar(cls, value):
        return cls((), (), np.asarray(value, dtype=complex))

    @classmethod
    def from_matrix(cls, m, labels, dims):
        labels, dims = tuple(labels), tuple(dims)
        d = int(np.prod(dims, initial=1))
        m = as_complex(m)
        if m.shape != (d, d):
            raise ValueError("matrix shape %r does not match dims %r"
                             % (m.shape, dims))
        n = len(dims)
        t = m.reshape(tuple(dims) + tuple(dims)).transpose(_interleave(n))
        return cls(labels, dims, t)

    @classmethod
    def identity(cls, labels, dims):
        d = int(np.prod(dims, initial=1))
        return cls.from_matrix(np.eye(d, dtype=complex), labels, dims)

    def dim(self, label):
        return self.dims[self.labels.index(label)]

    def to_matrix(self, order=None):
        order = tuple(order) if order is not None else self.labels
        if set(order) != set(self.labels) or len(order) != len(self.labels):
            raise ValueError("order %r is not a permutation of %r"
                             % (order, self.labels))
        idx = [self.labels.index(name) for name in order]
        perm = [2 * i for i in idx] + [2 * i + 1 for i in idx]
        n = len(self.labels)
        d = int(np.prod(self.dims, initial=1))
        return self.data.transpose(perm).reshape(d, d)

    def partial_trace(self, label):
        i = self.labels.index(label)
        data = np.trace(self.data, axis1=2 * i, axis2=2 * i + 1)
        return LabeledTensor(self.labels[:i] + self.labels[i + 1:],
                             self.dims[:i] + self.dims[i + 1:], data)

    def partial_transpose(self, label):
        i = self.labels.index(label)
        return LabeledTensor(self.labels, self.dims,
                             np.swapaxes(self.data, 2 * i, 2 * i + 1))

    def transpose_ops(self):
        """Transpose every subsystem (full operator transpose)."""
        n = len(self.labels)
        perm = [a for i in range(n) for a in (2 * i + 1, 2 * i)]
        return LabeledTensor(self.labels, self.dims, self.data.transpose(perm))

    def conj(self):
        return LabeledTensor(self.labels, self.dims, np.conj(self.data))

    def relabel(self, mapping):
        labels = tuple(mapping.get(name, name) for name in self.labels)
        return LabeledTensor(labels, self.dims, self.data)

    def _aligned_to(self, other):
        if self.labels == other.labels:
            return self.data
        if set(self.labels) != set(other.labels):
            raise ValueError("label sets differ: %r vs %r"
                             % (self.labels, other.labels))
        idx = [self.labels.index(name) for name in other.labels]
        perm = [a for i in idx for a in (2 * i, 2 * i + 1)]
        return self.data.transpose(perm)

    def __add__(self, other):
        return LabeledTensor(other.labels, other.dims,
                             self._aligned_to(other) + other.data)

    def __sub__(self, other):
        return LabeledTensor(other.labels, other.dims,
                             self._aligned_to(other) - other.data)

    def __mul__(self, scalar):
        return LabeledTensor(self.labels, self.dims, self.data * scalar)

    __rmul__ = __mul__


def outer(a, b):
    """Tensor product of two labeled tensors with disjoint labels."""
    if set(a.labels) & set(b.labels):
        raise ValueError("outer product requires disjoint labels")
    data = np.tensordot(a.data, b.data, axes=0)
    return LabeledTensor(a.labels + b.labels, a.dims + b.dims, data)


def contract(a, b, over=None):
    """Pairwise contraction of labeled tensors (link product).

    Contracts ket with ket and bra with bra over the labels in ``over``
    (default: every shared label).  The remaining labels must be disjoint.
    """
    if over is None:
        over = tuple(name for name in a.labels if name in b.labels)
    over = tuple(over)
    for name in over:
        if a.dim(name) != b.dim(name):
            raise ValueError("dimension mismatch on label %r" % name)
    a_axes = [ax for name in over for ax in
              (2 * a.labels.index(name), 2 * a.labels.index(name) + 1)]
    b_axes = [ax for name in over for ax in
              (2 * b.labels.index(name), 2 * b.labels.index(name) + 1)]
    rest_a = [(n, d) for n, d in zip(a.labels, a.dims) if n not in over]
    rest_b = [(n, d) for n, d in zip(b.labels, b.dims) if n not in over]
    labels = tuple(n for n, _ in rest_a) + tuple(n for n, _ in rest_b)
    if len(labels) != len(set(labels)):
        raise ValueError("contraction leaves duplicate labels %r" % (labels,))
    dims = tuple(d for _, d in rest_a) + tuple(d for _, d in rest_b)
    data = np.tensordot(a.data, b.data, axes=(a_axes, b_axes))
    return LabeledTensor(labels, dims, data)


# ---------------------------------------------------------------------------
# tensor container files
#
# A container is a JSON document bundling named labeled tensors with free-form
# metadata.  Layout (version 1):
#
#   {"format": "combqfi-tensors", "version": 1,
#    "kind": "<strategy|comb|...>", "meta": {...},
#    "tensors": [{"name": ..., "labels": [...], "dims": [...],
#                 "re": [[...]], "im": [[...]]}, ...]}
#
# "re"/"im" hold the operator matrix in the stored label order.  Floats are
# written with full repr precision, so a load/save cycle is bit exact.

CONTAINER_FORMAT = "combqfi-tensors"
CONTAINER_VERSION = 1


@dataclass(frozen=True)
class Container:
    """A named bundle of labeled tensors plus metadata."""

    kind: str
    meta: dict
    tensors: dict

    def __getitem__(self, name):
        return self.tensors[name]


def container_to_json(box):
    entries = []
    for name, t in box.tensors.items():
        m = t.to_matrix()
        entries.append({
            "name": str(name),
            "labels": [str(x) for x in t.labels],
            "dims": [int(d) for d in t.dims],
            "re": m.real.tolist(),
            "im": m.imag.tolist(),
        })
    doc = {
        "format": CONTAINER_FORMAT,
        "version": CONTAINER_VERSION,
        "kind": box.kind,
        "meta": box.meta,
        "tensors": entries,
    }
    return json.dumps(doc, indent=1)


def container_from_json(text):
    doc = json.loads(text)
    if doc.get("format") != CONTAINER_FORMAT:
        raise ValueError("not a %s document" % CONTAINER_FORMAT)
    if doc.get("version") != CONTAINER_VERSION:
        raise ValueError("unsupported container version %r"
                         % (doc.get("version"),))
    tensors = {}
    for entry in doc["tensors"]:
        m = np.asarray(entry["re"], dtype=float) \
            + 1j * np.asarray(entry["im"], dtype=float)
        tensors[entry["name"]] = LabeledTensor.from_matrix(
            m, tuple(entry["labels"]), tuple(entry["dims"]))
    return Container(doc.get("kind", ""), doc.get("meta") or {}, tensors)


def save_container(path, tensors, kind, meta=None):
    box = Container(kind, dict(meta or {}), dict(tensors))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(container_to_json(box))
        fh.write("\n")
    return box


def load_container(path):
    with open(path, encoding="utf-8") as fh:
        return container_from_json(fh.read())
