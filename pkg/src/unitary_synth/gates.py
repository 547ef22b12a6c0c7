"""Gate kernels, analytic U3 derivatives and register embedding.

Basis convention: qubit ``q`` is bit ``q`` of the row/column index, so the
highest-index qubit is the most significant bit. Two-qubit kernels are
written in the local ordering ``|control, target>``.

U3 follows the OpenQASM 2.0 definition::

    u3(t, p, l) = [[cos(t/2),           -e^{il} sin(t/2)],
                   [e^{ip} sin(t/2),  e^{i(p+l)} cos(t/2)]]
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .numerics import as_matrix, unitarity_defect


class GateKind(enum.Enum):
    U3 = "u3"
    H = "h"
    CNOT = "cx"
    CZ = "cz"
    CH = "ch"

    @property
    def is_two_qubit(self) -> bool:
        return self in (GateKind.CNOT, GateKind.CZ, GateKind.CH)

    @classmethod
    def parse(cls, name: str) -> "GateKind":
        key = name.strip().lower()
        aliases = {"cnot": cls.CNOT, "cx": cls.CNOT, "cz": cls.CZ, "ch": cls.CH, "u3": cls.U3, "h": cls.H}
        if key not in aliases:
            raise ValueError(f"unknown gate kind {name!r}")
        return aliases[key]


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    target: int
    control: int | None = None
    param_offset: int = 0
    param_count: int = 0

    def __post_init__(self):
        if self.kind.is_two_qubit:
            if self.control is None:
                raise ValueError(f"{self.kind.name} needs a control qubit")
            if self.control == self.target:
                raise ValueError("control and target must differ")
            if self.param_count != 0:
                raise ValueError("two-qubit gates are parameter-free")
        else:
            if self.control is not None:
                raise ValueError(f"{self.kind.name} takes no control qubit")
            if self.kind is GateKind.U3 and self.param_count not in (2, 3):
                raise ValueError("U3 gates carry 2 (theta, lambda) or 3 parameters")
            if self.kind is GateKind.H and self.param_count != 0:
                raise ValueError("H is parameter-free")

    @property
    def qubits(self) -> tuple[int, ...]:
        if self.control is None:
            return (self.target,)
        return (self.control, self.target)

    def angles(self, params) -> tuple[float, float, float]:
        """(theta, phi, lambda) of a U3 gate read from the global vector."""
        p = params[self.param_offset : self.param_offset + self.param_count]
        if self.param_count == 2:
            return float(p[0]), 0.0, float(p[1])
        return float(p[0]), float(p[1]), float(p[2])

    def matrix(self, params=None) -> np.ndarray:
        """Local matrix (2x2, or 4x4 in |control, target> ordering)."""
        if self.kind is GateKind.U3:
            return u3_matrix(*self.angles(params))
        if self.kind is GateKind.H:
            return H.copy()
        return two_qubit_kernel(self.kind)


I2 = np.eye(2, dtype=np.complex128)
X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=np.complex128,
    )


def u3_derivative(theta: float, phi: float, lam: float, which: str) -> np.ndarray:
    """Elementwise partial derivative of :func:`u3_matrix`.

    ``which`` is one of ``"theta"``, ``"phi"``, ``"lambda"``.
    """
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    el, ep, epl = np.exp(1j * lam), np.exp(1j * phi), np.exp(1j * (phi + lam))
    if which == "theta":
        return 0.5 * np.array([[-s, -el * c], [ep * c, -epl * s]], dtype=np.complex128)
    if which == "phi":
        return np.array([[0, 0], [1j * ep * s, 1j * epl * c]], dtype=np.complex128)
    if which in ("lambda", "lam"):
        return np.array([[0, -1j * el * s], [0, 1j * epl * c]], dtype=np.complex128)
    raise ValueError(f"unknown U3 parameter {which!r}")


def two_qubit_kernel(kind: GateKind) -> np.ndarray:
    if not kind.is_two_qubit:
        raise ValueError(f"{kind.name} is not a two-qubit gate")
    k = np.eye(4, dtype=np.complex128)
    if kind is GateKind.CNOT:
        k[2:, 2:] = X
    elif kind is GateKind.CZ:
        k[3, 3] = -1
    else:
        k[2:, 2:] = H
    return k


def local_kernel(kind: GateKind, control: int, qubit_a: int) -> np.ndarray:
    """Two-qubit kernel in the ``|qubit_a, qubit_b>`` ordering."""
    k = two_qubit_kernel(kind)
    return k if control == qubit_a else SWAP @ k @ SWAP


def embed_local(m: np.ndarray, qubits: tuple[int, ...], n_qubits: int) -> np.ndarray:
    """Embed a local operator on ``qubits`` (first = most significant locally)."""
    m = as_matrix(m)
    k = len(qubits)
    if m.shape != (2**k, 2**k):
        raise ValueError(f"local matrix shape {m.shape} does not match {k} qubit(s)")
    for q in qubits:
        if not 0 <= q < n_qubits:
            raise ValueError(f"qubit index {q} out of range for {n_qubits} qubits")
    if len(set(qubits)) != k:
        raise ValueError("repeated qubit index")
    dim = 2**n_qubits
    out = np.zeros((dim, dim), dtype=np.complex128)
    for col in range(dim):
        loc_c = 0
        for q in qubits:
            loc_c = (loc_c << 1) | ((col >> q) & 1)
        base = col
        for q in qubits:
            base &= ~(1 << q)
        for loc_r in range(2**k):
            row = base
            for pos, q in enumerate(qubits):
                if (loc_r >> (k - 1 - pos)) & 1:
                    row |= 1 << q
            out[row, col] = m[loc_r, loc_c]
    return out


def embed_gate(gate: Gate, params, n_qubits: int) -> np.ndarray:
    """Full 2^n x 2^n matrix of ``gate`` acting on an n-qubit register."""
    return embed_local(gate.matrix(params), gate.qubits, n_qubits)


def _wrap(x: float) -> float:
    x = float(np.mod(x, 2 * np.pi))
    return 0.0 if x >= 2 * np.pi - 1e-15 else x


def u3_params_from_2x2(u, tol: float = 1e-9) -> tuple[float, float, float, float]:
    """Invert :func:`u3_matrix`: ``e^{i g} u3(t, p, l) == u``.

    Returns ``(theta, phi, lambda, global_phase)`` with theta in [0, pi] and
    phi, lambda in [0, 2pi). At theta = 0 or pi the (phi, lambda) pair is
    degenerate; phi is set to 0 and the freedom goes into lambda.
    """
    u = as_matrix(u)
    if u.shape != (2, 2) or unitarity_defect(u) > tol:
        raise ValueError("u3_params_from_2x2 needs a 2x2 unitary")
    a, b, c, d = u[0, 0], u[0, 1], u[1, 0], u[1, 1]
    theta = 2 * np.arctan2(np.hypot(abs(b), abs(c)) / np.sqrt(2), np.hypot(abs(a), abs(d)) / np.sqrt(2))
    eps = 1e-12
    if abs(a) > eps and abs(c) > eps:
        g = np.angle(a)
        phi = np.angle(c) - g
        lam = np.angle(-b) - g
    elif abs(a) > eps:  # theta ~ 0: only phi + lambda is defined
        g = np.angle(a)
        phi = 0.0
        lam = np.angle(d) - g
    else:  # theta ~ pi: only lambda - phi is defined
        g = np.angle(c)
        phi = 0.0
        lam = np.angle(-b) - g
    g = float(np.angle(np.exp(1j * g)))
    if g < 0:
        g += 2 * np.pi
    if g >= 2 * np.pi - 1e-15:
        g = 0.0
    return float(theta), _wrap(phi), _wrap(lam), g
