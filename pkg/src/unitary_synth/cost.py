"""Circuit products, the block-proportionality cost f_sub and the fidelity cost.

``f_sub`` measures how far the top qubit of a unitary is from being
separable: split the matrix into four quadrants ``U_ij``; the qubit factors
out exactly when every product ``U_ij U_pq^dag`` is a multiple of the
identity, the multiple being read off its upper-left entry.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .gates import embed_gate, local_kernel
from .numerics import as_matrix
from .structure import GateStructure, Layer, Stage


@dataclass(frozen=True)
class BlockPartition:
    blocks: tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]

    def __getitem__(self, ij):
        i, j = ij
        return self.blocks[i][j]

    def assemble(self) -> np.ndarray:
        return np.block([[self.blocks[0][0], self.blocks[0][1]], [self.blocks[1][0], self.blocks[1][1]]])


@dataclass(frozen=True)
class CostReport:
    value: float
    gradient: np.ndarray | None = None


def partition_blocks(ubar) -> BlockPartition:
    ubar = as_matrix(ubar)
    dim = ubar.shape[0]
    if dim != ubar.shape[1] or dim < 2 or dim % 2:
        raise ValueError(f"cannot partition a {ubar.shape} matrix into quadrants")
    h = dim // 2
    return BlockPartition(((ubar[:h, :h], ubar[:h, h:]), (ubar[h:, :h], ubar[h:, h:])))


def kappa(a, b) -> complex:
    """Upper-left entry of ``a b^dag``."""
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValueError(f"kappa needs equal square shapes, got {a.shape}, {b.shape}")
    return complex(a[0] @ b[0].conj())


def f_sub(ubar) -> float:
    """Sum over all 16 ordered quadrant pairs of ``|U_ij U_pq^dag - kappa I|_F^2``."""
    part = partition_blocks(ubar)
    blocks = [part[i, j] for i in (0, 1) for j in (0, 1)]
    eye = np.eye(blocks[0].shape[0])
    total = 0.0
    for a in blocks:
        for b in blocks:
            m = a @ b.conj().T
            r = m - m[0, 0] * eye
            total += float(np.vdot(r, r).real)
    return total


# --- op lists ------------------------------------------------------------------


def layer_entry(layer: Layer, base: int = 0):
    k = local_kernel(layer.kind, layer.control, layer.qubit_a)
    return (layer.qubit_a, layer.qubit_b, k, layer.param_offset - base)


@lru_cache(maxsize=256)
def stage_oplist(stage: Stage, base: int | None = None) -> kernels.OpList:
    """Ops of one stage; offsets relative to ``base`` (default: the stage's first parameter)."""
    if base is None:
        base = stage.param_slice.start
    return kernels.make_oplist(layer_entry(layer, base) for layer in stage.layers)


@lru_cache(maxsize=64)
def full_oplist(structure: GateStructure) -> kernels.OpList:
    entries = [layer_entry(layer) for layer in structure.layers]
    entries += [(g.target, -1, None, g.param_offset) for g in structure.closing_rotations]
    return kernels.make_oplist(entries)


# --- products ------------------------------------------------------------------


def _gate_product(gates, params, n_qubits) -> np.ndarray:
    out = np.eye(2**n_qubits, dtype=np.complex128)
    for g in gates:
        out = embed_gate(g, params, n_qubits) @ out
    return out


def circuit_matrix(structure: GateStructure, params, stage_limit: int | None = None) -> np.ndarray:
    """Matrix of the decomposing circuit, built gate by gate from full embeddings.

    With ``stage_limit`` only the first that many stages are included and
    the closing rotations are left out.
    """
    params = np.asarray(params, dtype=np.float64)
    if stage_limit is None:
        if len(params) != structure.total_params:
            raise ValueError(f"expected {structure.total_params} parameters, got {len(params)}")
        return _gate_product(structure.gates(), params, structure.n_qubits)
    stages = structure.stages[:stage_limit]
    need = stages[-1].param_slice.stop if stages else 0
    if len(params) < need:
        raise ValueError(f"expected at least {need} parameters, got {len(params)}")
    gates = [g for st in stages for layer in st.layers for g in layer.gates]
    return _gate_product(gates, params, structure.n_qubits)


def stage_matrix(stage: Stage, params) -> np.ndarray:
    """Naive product of one stage's layers on its own register (qubits 0..target)."""
    gates = [g for layer in stage.layers for g in layer.gates]
    return _gate_product(gates, np.asarray(params, dtype=np.float64), stage.n_qubits)


def apply_stage(stage: Stage, params, u) -> np.ndarray:
    """``stage layers . u`` via the kernel backend; ``params`` is the global vector."""
    sl = stage.param_slice
    return kernels.apply_ops(u, stage_oplist(stage), np.asarray(params, dtype=np.float64)[sl])


# --- costs with gradients ------------------------------------------------------------


def _stage_of(structure: GateStructure, stage: int | Stage) -> Stage:
    return stage if isinstance(stage, Stage) else structure.stages[stage]


def _active_layers(stage: Stage, active) -> tuple[int, int]:
    if isinstance(active, slice):
        start, stop = active.start, active.stop
    else:
        start, stop = active
    sl = stage.param_slice
    if not (sl.start <= start < stop <= sl.stop):
        raise ValueError(f"active range [{start}, {stop}) outside stage parameters [{sl.start}, {sl.stop})")
    if (start - sl.start) % 4 or (stop - sl.start) % 4:
        raise ValueError("active range must cover whole layers")
    return (start - sl.start) // 4, (stop - sl.start) // 4


def f_sub_gradient(structure: GateStructure, params, u_initial, active, stage: int | Stage = 0) -> CostReport:
    """f_sub of ``stage layers . u_initial`` with the gradient over ``active`` parameters.

    ``active`` is a ``(start, stop)`` global parameter range aligned to whole
    layers of the stage. Layers before it are folded into the initial matrix
    and layers after it into a fixed left factor.
    """
    st = _stage_of(structure, stage)
    params = np.asarray(params, dtype=np.float64)
    k0, k1 = _active_layers(st, active)
    ops = stage_oplist(st)
    local = params[st.param_slice]
    prefix = kernels.apply_ops(u_initial, ops[:k0], local)
    eye = np.eye(prefix.shape[0], dtype=np.complex128)
    left = kernels.apply_ops(eye, ops[k1:], local) if k1 < len(ops) else None
    block = ops[k0:k1].shifted(-4 * k0)
    value, grad = kernels.circuit_cost(prefix, block, local[4 * k0 : 4 * k1], kernels.FSUB, left=left)
    return CostReport(value, grad)


def fidelity_cost(structure: GateStructure, params, u_initial) -> CostReport:
    """``1 - |Tr(C u)| / 2^n`` for the full circuit C, with its gradient."""
    params = np.asarray(params, dtype=np.float64)
    if len(params) != structure.total_params:
        raise ValueError(f"expected {structure.total_params} parameters, got {len(params)}")
    value, grad = kernels.circuit_cost(u_initial, full_oplist(structure), params, kernels.FIDELITY)
    return CostReport(value, grad)
