"""Dense complex linear algebra helpers, Haar sampling and distance metrics.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``. Every
function here is pure.
"""

from __future__ import annotations

import os
from typing import Iterable

import numpy as np

UNITARITY_TOL = 1e-12
_PHASE_GRID = 1024


def as_matrix(a) -> np.ndarray:
    """Coerce ``a`` to a 2-D complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; the same seed reproduces the same stream."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def derive_seed(seed: int, index: int) -> int:
    """Independent 64-bit child seed for stream ``index`` of ``seed``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


def dagger(a) -> np.ndarray:
    """Conjugate transpose."""
    return as_matrix(a).conj().T


def unitarity_defect(u) -> float:
    """``max |U^dag U - I|`` elementwise."""
    u = as_matrix(u)
    if u.shape[0] != u.shape[1]:
        return float("inf")
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def is_unitary(u, tol: float = UNITARITY_TOL) -> bool:
    return unitarity_defect(u) <= tol


def haar_random_unitary(n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed 2^n x 2^n unitary.

    QR factorization of a complex Ginibre matrix, with the columns of Q
    rescaled by the phases of diag(R) so the distribution is exactly Haar.
    """
    if not 1 <= n_qubits <= 6:
        raise ValueError(f"n_qubits must be in [1, 6], got {n_qubits}")
    dim = 2**n_qubits
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def frobenius_distance(u, v) -> float:
    """Phase-invariant normalized distance ``1 - |Tr(u^dag v)| / rows``."""
    u, v = as_matrix(u), as_matrix(v)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    t = np.vdot(u, v)
    return max(0.0, 1.0 - abs(t) / u.shape[0])


def _spectral_norm(a: np.ndarray) -> float:
    return float(np.linalg.svd(a, compute_uv=False)[0])


def spectral_error(u, v) -> float:
    """Spectral-norm distance between ``u`` and ``v`` after global phase removal.

    The aligning phase is the one that makes ``Tr(u^dag e^{i phi} v)`` real
    and positive. When the trace vanishes no phase is preferred, and the
    minimum is taken over a uniform grid of 1024 phases instead.
    """
    u, v = as_matrix(u), as_matrix(v)
    if u.shape[0] != u.shape[1] or v.shape[0] != v.shape[1]:
        raise ValueError("spectral_error requires square matrices")
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    t = np.vdot(u, v)
    if abs(t) > 1e-12 * u.shape[0]:
        return _spectral_norm(u - (np.conj(t) / abs(t)) * v)
    phases = np.exp(2j * np.pi * np.arange(_PHASE_GRID) / _PHASE_GRID)
    return min(_spectral_norm(u - p * v) for p in phases)


def closest_unitary(a) -> np.ndarray:
    """Unitary polar factor of ``a`` (nearest unitary in Frobenius norm)."""
    w, _, vh = np.linalg.svd(as_matrix(a))
    return w @ vh


# --- .umat files -----------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def format_umat(u) -> str:
    u = as_matrix(u)
    rows, cols = u.shape
    lines = [f"{rows} {cols}"]
    for r in range(rows):
        lines.append(" ".join(f"{_fmt(z.real)},{_fmt(z.imag)}" for z in u[r]))
    return "\n".join(lines) + "\n"


def parse_umat(text: str) -> np.ndarray:
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("umat: missing header")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
    except ValueError as exc:
        raise ValueError(f"umat: bad header {tokens[:2]}") from exc
    if rows < 1 or cols < 1:
        raise ValueError("umat: dimensions must be positive")
    body = tokens[2:]
    if len(body) != rows * cols:
        raise ValueError(f"umat: expected {rows * cols} entries, found {len(body)}")
    out = np.empty(rows * cols, dtype=np.complex128)
    for k, tok in enumerate(body):
        try:
            re, im = tok.split(",")
            out[k] = complex(float(re), float(im))
        except ValueError as exc:
            raise ValueError(f"umat: bad entry {tok!r}") from exc
    return out.reshape(rows, cols)


def write_umat(path: str | os.PathLike, u) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_umat(u))


def read_umat(path: str | os.PathLike) -> np.ndarray:
    with open(path, encoding="ascii") as fh:
        return parse_umat(fh.read())


def n_qubits_of(u) -> int:
    """Register size of a 2^n x 2^n matrix."""
    dim = as_matrix(u).shape[0]
    n = dim.bit_length() - 1
    if dim < 2 or 2**n != dim or u.shape[1] != dim:
        raise ValueError(f"not a 2^n x 2^n matrix: shape {u.shape}")
    return n


def kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for m in mats:
        out = np.kron(out, m)
    return out
