"""Pure-numpy circuit kernels; used when the compiled extension is unavailable.

Same op-list contract as the compiled ``_kernels`` module.
"""

from __future__ import annotations

import numpy as np


def _u3(t, p, l):
    c, s = np.cos(t / 2), np.sin(t / 2)
    el, ep, epl = np.exp(1j * l), np.exp(1j * p), np.exp(1j * (p + l))
    m = np.array([[c, -el * s], [ep * s, epl * c]])
    dt = 0.5 * np.array([[-s, -el * c], [ep * c, -epl * s]])
    dp = np.array([[0, 0], [1j * ep * s, 1j * epl * c]])
    dl = np.array([[0, -1j * el * s], [0, 1j * epl * c]])
    return m, dt, dp, dl


def _op_matrix(kern, params, off, single):
    if single:
        return _u3(params[off], params[off + 1], params[off + 2])[0]
    a = _u3(params[off], 0.0, params[off + 1])[0]
    b = _u3(params[off + 2], 0.0, params[off + 3])[0]
    return kern @ np.kron(a, b)


def _n_of(dim):
    return dim.bit_length() - 1


def _apply(m, x, qubits, n):
    """Rows of m (dim x cols) <- embed(x on qubits) . m."""
    cols = m.shape[1]
    axes = [n - 1 - q for q in qubits]
    t = m.reshape((2,) * n + (cols,))
    t = np.moveaxis(t, axes, list(range(len(qubits))))
    shape = t.shape
    t = (x @ t.reshape(2 ** len(qubits), -1)).reshape(shape)
    t = np.moveaxis(t, list(range(len(qubits))), axes)
    return np.ascontiguousarray(t.reshape(m.shape))


def _env(v, a, qubits, n):
    """E[r, c] = sum over rest, cols of conj(v[(r, rest)]) a[(c, rest)]."""
    k = 2 ** len(qubits)
    axes = [n - 1 - q for q in qubits]
    tv = np.moveaxis(v.reshape((2,) * n + (-1,)), axes, list(range(len(qubits)))).reshape(k, -1)
    ta = np.moveaxis(a.reshape((2,) * n + (-1,)), axes, list(range(len(qubits)))).reshape(k, -1)
    return tv.conj() @ ta.T


def _qubits(qa, qb, k):
    return (int(qa[k]),) if qb[k] < 0 else (int(qa[k]), int(qb[k]))


def apply_ops(u0, qa, qb, kern, poff, params):
    out = np.array(u0, dtype=np.complex128, copy=True)
    n = _n_of(out.shape[0])
    for k in range(len(qa)):
        x = _op_matrix(kern[k], params, poff[k], qb[k] < 0)
        out = _apply(out, x, _qubits(qa, qb, k), n)
    return out


def fsub_head(u, want_grad=True):
    dim = u.shape[0]
    d = dim // 2
    bs = u.reshape(2, d, 2, d).transpose(0, 2, 1, 3).reshape(4 * d, d)
    m = bs @ bs.conj().T
    blocks = m.reshape(4, d, 4, d).transpose(0, 2, 1, 3)  # (a, b, l, m)
    kap = blocks[:, :, 0, 0].copy()
    eye = np.eye(d)
    r = blocks - kap[:, :, None, None] * eye
    f = float(np.sum(r.real**2 + r.imag**2))
    if not want_grad:
        return f, None
    tr = np.trace(r, axis1=2, axis2=3)
    q = r.copy()
    q[:, :, 0, 0] -= tr
    qfull = q.transpose(0, 2, 1, 3).reshape(4 * d, 4 * d)
    h = 4.0 * (qfull @ bs)
    g = h.reshape(2, 2, d, d).transpose(0, 2, 1, 3).reshape(dim, dim)
    return f, g


def circuit_cost(u0, left, qa, qb, kern, poff, params, mode, want_grad=True):
    a0 = np.asarray(u0, dtype=np.complex128)
    dim = a0.shape[0]
    if a0.shape[1] != dim:
        raise ValueError("initial matrix must be square")
    if mode == 0 and dim % 2:
        raise ValueError("f_sub needs an even dimension")
    n = _n_of(dim)
    nops = len(qa)
    states = [a0]
    xs = []
    for k in range(nops):
        x = _op_matrix(kern[k], params, poff[k], qb[k] < 0)
        xs.append(x)
        states.append(_apply(states[-1], x, _qubits(qa, qb, k), n))
    ubar = states[-1] if left is None else np.asarray(left) @ states[-1]
    if mode == 0:
        f, g = fsub_head(ubar, want_grad)
    elif mode == 1:
        tr = np.trace(ubar)
        atr = abs(tr)
        ph = tr / atr if atr > 0 else 1.0
        # |W - ph I|_F^2 / 2D equals 1 - |Tr W| / D for unitary W, without the cancellation
        r = ubar - ph * np.eye(dim)
        f = float(np.sum(r.real**2 + r.imag**2)) / (2 * dim)
        g = (-ph / dim) * np.eye(dim, dtype=np.complex128)
    else:
        raise ValueError(f"unknown cost mode {mode}")
    if not want_grad:
        return f, None
    grad = np.zeros(len(params))
    v = g if left is None else np.asarray(left).conj().T @ g
    for k in range(nops - 1, -1, -1):
        qs = _qubits(qa, qb, k)
        e = _env(v, states[k], qs, n)
        off = poff[k]
        if qb[k] < 0:
            _, dt, dp, dl = _u3(params[off], params[off + 1], params[off + 2])
            for s, dm in enumerate((dt, dp, dl)):
                grad[off + s] += np.sum(dm * e).real
        else:
            fm = kern[k].T @ e
            am, dat, _, dal = _u3(params[off], 0.0, params[off + 1])
            bm, dbt, _, dbl = _u3(params[off + 2], 0.0, params[off + 3])
            for s, dy in enumerate((np.kron(dat, bm), np.kron(dal, bm), np.kron(am, dbt), np.kron(am, dbl))):
                grad[off + s] += np.sum(dy * fm).real
        v = _apply(v, xs[k].conj().T, qs, n)
    return f, grad
