"""Backend selection for the hot circuit kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback. Setting ``UNITARY_SYNTH_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels_py

if os.environ.get("UNITARY_SYNTH_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py

FSUB = 0
FIDELITY = 1


def backend_module(name: str | None = None):
    """Kernel module by name (``"compiled"`` / ``"python"``), default the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


@dataclass(frozen=True)
class OpList:
    """Array form of a gate sequence, consumed by the kernels."""

    qa: np.ndarray
    qb: np.ndarray
    kern: np.ndarray
    poff: np.ndarray

    def __len__(self) -> int:
        return len(self.qa)

    @cached_property
    def bounds(self) -> tuple[int, int, int]:
        """(highest qubit index, parameters read, lowest offset); zeros when empty."""
        if not len(self.qa):
            return 0, 0, 0
        top = int(max(self.qa.max(), self.qb.max()))
        need = int(np.max(self.poff + np.where(self.qb < 0, 3, 4)))
        low = min(int(self.qa.min()), int(self.poff.min()))
        return top, need, low

    def shifted(self, delta: int) -> "OpList":
        return OpList(self.qa, self.qb, self.kern, self.poff + np.int32(delta))

    def __getitem__(self, sl: slice) -> "OpList":
        return OpList(
            np.ascontiguousarray(self.qa[sl]),
            np.ascontiguousarray(self.qb[sl]),
            np.ascontiguousarray(self.kern[sl]),
            np.ascontiguousarray(self.poff[sl]),
        )


def make_oplist(entries) -> OpList:
    """``entries``: iterable of (qa, qb or -1, 4x4 kernel or None, param offset)."""
    entries = list(entries)
    qa = np.array([e[0] for e in entries], dtype=np.int32)
    qb = np.array([e[1] for e in entries], dtype=np.int32)
    kern = np.zeros((len(entries), 4, 4), dtype=np.complex128)
    for k, e in enumerate(entries):
        if e[2] is not None:
            kern[k] = e[2]
    poff = np.array([e[3] for e in entries], dtype=np.int32)
    return OpList(qa, qb, kern, poff)


def _check_matrix(u0, ops: OpList) -> np.ndarray:
    u0 = np.ascontiguousarray(u0, dtype=np.complex128)
    dim = u0.shape[0] if u0.ndim == 2 else 0
    if u0.ndim != 2 or dim < 2 or dim & (dim - 1):
        raise ValueError(f"expected a 2^n-row matrix, got shape {u0.shape}")
    n = dim.bit_length() - 1
    top, _, low = ops.bounds
    if top >= n or low < 0:
        raise ValueError(f"op list addresses qubits beyond a {n}-qubit register")
    return u0


def _check_params(ops: OpList, params) -> np.ndarray:
    params = np.ascontiguousarray(params, dtype=np.float64)
    _, need, low = ops.bounds
    if low < 0 or need > len(params):
        raise ValueError(f"op list reads parameters up to {need}, got {len(params)}")
    return params


def apply_ops(u0, ops: OpList, params, backend=None) -> np.ndarray:
    mod = backend_module(backend)
    params = _check_params(ops, params)
    return mod.apply_ops(
        _check_matrix(u0, ops),
        ops.qa,
        ops.qb,
        ops.kern,
        ops.poff,
        params,
    )


def circuit_cost(u0, ops: OpList, params, mode: int, left=None, want_grad: bool = True, backend=None):
    mod = backend_module(backend)
    params = _check_params(ops, params)
    u0 = _check_matrix(u0, ops)
    if u0.shape[0] != u0.shape[1]:
        raise ValueError("initial matrix must be square")
    if left is not None:
        left = np.ascontiguousarray(left, dtype=np.complex128)
        if left.shape != u0.shape:
            raise ValueError(f"left factor shape {left.shape} does not match {u0.shape}")
    return mod.circuit_cost(
        u0,
        left,
        ops.qa,
        ops.qb,
        ops.kern,
        ops.poff,
        params,
        mode,
        want_grad,
    )
