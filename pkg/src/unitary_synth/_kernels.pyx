# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled circuit kernels; same contract as ``_kernels_py``.

An op list describes gates applied in order to the rows of an initial
matrix ``u0``. Op ``k`` is either a layer on local qubits ``(qa[k], qb[k])``
with 4x4 entangler ``kern[k]`` (ordered ``|qa, qb>``) and parameters
``params[poff[k]:poff[k] + 4] = theta_a, lambda_a, theta_b, lambda_b``, or
(``qb[k] < 0``) a closing U3 on ``qa[k]`` with ``theta, phi, lambda``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt

cnp.import_array()

ctypedef double complex cplx


cdef inline cplx expi(double x) noexcept nogil:
    return cos(x) + 1j * sin(x)


cdef inline double cabs2(cplx z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef void u3_fill(double t, double p, double l, cplx* m, cplx* dt, cplx* dp, cplx* dl) noexcept nogil:
    cdef double c = cos(0.5 * t)
    cdef double s = sin(0.5 * t)
    cdef cplx el = expi(l)
    cdef cplx ep = expi(p)
    cdef cplx epl = expi(p + l)
    m[0] = c
    m[1] = -el * s
    m[2] = ep * s
    m[3] = epl * c
    dt[0] = -0.5 * s
    dt[1] = -0.5 * el * c
    dt[2] = 0.5 * ep * c
    dt[3] = -0.5 * epl * s
    dp[0] = 0
    dp[1] = 0
    dp[2] = 1j * ep * s
    dp[3] = 1j * epl * c
    dl[0] = 0
    dl[1] = -1j * el * s
    dl[2] = 0
    dl[3] = 1j * epl * c


cdef void op_matrix(const cplx* K, const double* p, bint single, cplx* X) noexcept nogil:
    """Local matrix of one op: K . kron(u3_a, u3_b) for layers, u3 for singles."""
    cdef cplx A[4]
    cdef cplx B[4]
    cdef cplx Y[16]
    cdef cplx d1[4]
    cdef cplx d2[4]
    cdef cplx d3[4]
    cdef int i, j, k, l, r, c
    cdef cplx acc
    if single:
        u3_fill(p[0], p[1], p[2], X, d1, d2, d3)
        return
    u3_fill(p[0], 0.0, p[1], A, d1, d2, d3)
    u3_fill(p[2], 0.0, p[3], B, d1, d2, d3)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    Y[(i * 2 + j) * 4 + k * 2 + l] = A[i * 2 + k] * B[j * 2 + l]
    for r in range(4):
        for c in range(4):
            acc = 0
            for k in range(4):
                acc = acc + K[r * 4 + k] * Y[k * 4 + c]
            X[r * 4 + c] = acc


cdef void apply2(const cplx* X, int a, int b, cplx* M, int dim, int ncols) noexcept nogil:
    """In place: rows of M <- (X on qubits a, b) . M."""
    cdef int off[4]
    cdef int i, col, r
    cdef cplx v0, v1, v2, v3
    off[0] = 0
    off[1] = 1 << b
    off[2] = 1 << a
    off[3] = (1 << a) | (1 << b)
    for i in range(dim):
        if (i >> a) & 1 or (i >> b) & 1:
            continue
        for col in range(ncols):
            v0 = M[(i + off[0]) * ncols + col]
            v1 = M[(i + off[1]) * ncols + col]
            v2 = M[(i + off[2]) * ncols + col]
            v3 = M[(i + off[3]) * ncols + col]
            for r in range(4):
                M[(i + off[r]) * ncols + col] = X[r * 4] * v0 + X[r * 4 + 1] * v1 + X[r * 4 + 2] * v2 + X[r * 4 + 3] * v3


cdef void apply1(const cplx* X, int a, cplx* M, int dim, int ncols) noexcept nogil:
    cdef int i, col
    cdef int o = 1 << a
    cdef cplx v0, v1
    for i in range(dim):
        if (i >> a) & 1:
            continue
        for col in range(ncols):
            v0 = M[i * ncols + col]
            v1 = M[(i + o) * ncols + col]
            M[i * ncols + col] = X[0] * v0 + X[1] * v1
            M[(i + o) * ncols + col] = X[2] * v0 + X[3] * v1


cdef void env2(const cplx* V, const cplx* A, int a, int b, int dim, int ncols, cplx* E) noexcept nogil:
    """E[r, c] = sum_{rest, col} conj(V[(r, rest), col]) A[(c, rest), col]."""
    cdef int off[4]
    cdef int i, col, r, c
    cdef cplx vr[4]
    cdef cplx ac[4]
    off[0] = 0
    off[1] = 1 << b
    off[2] = 1 << a
    off[3] = (1 << a) | (1 << b)
    for r in range(16):
        E[r] = 0
    for i in range(dim):
        if (i >> a) & 1 or (i >> b) & 1:
            continue
        for col in range(ncols):
            for r in range(4):
                vr[r] = V[(i + off[r]) * ncols + col].conjugate()
                ac[r] = A[(i + off[r]) * ncols + col]
            for r in range(4):
                for c in range(4):
                    E[r * 4 + c] = E[r * 4 + c] + vr[r] * ac[c]


cdef void env1(const cplx* V, const cplx* A, int a, int dim, int ncols, cplx* E) noexcept nogil:
    cdef int i, col
    cdef int o = 1 << a
    cdef cplx v0, v1, a0, a1
    E[0] = 0
    E[1] = 0
    E[2] = 0
    E[3] = 0
    for i in range(dim):
        if (i >> a) & 1:
            continue
        for col in range(ncols):
            v0 = V[i * ncols + col].conjugate()
            v1 = V[(i + o) * ncols + col].conjugate()
            a0 = A[i * ncols + col]
            a1 = A[(i + o) * ncols + col]
            E[0] = E[0] + v0 * a0
            E[1] = E[1] + v0 * a1
            E[2] = E[2] + v1 * a0
            E[3] = E[3] + v1 * a1


cdef double fsub_head(const cplx* U, int D, cplx* G, cplx* M, bint want_grad) noexcept nogil:
    """f_sub of U (D x D, D even) and, if asked, G with df = Re<G, dU>."""
    cdef int d = D // 2
    cdef int a, b, ia, ja, ib, jb, l, m, x
    cdef cplx acc, kap, tr
    cdef double f = 0.0
    cdef int dd = d * d
    # M[(a*4+b)*dd + l*d + m] = sum_x B_a[l, x] conj(B_b[m, x])
    for a in range(4):
        ia = a >> 1
        ja = a & 1
        for b in range(a, 4):
            ib = b >> 1
            jb = b & 1
            for l in range(d):
                for m in range(d):
                    acc = 0
                    for x in range(d):
                        acc = acc + U[(ia * d + l) * D + ja * d + x] * U[(ib * d + m) * D + jb * d + x].conjugate()
                    M[(a * 4 + b) * dd + l * d + m] = acc
                    if b != a:
                        M[(b * 4 + a) * dd + m * d + l] = acc.conjugate()
    for a in range(16):
        kap = M[a * dd]
        tr = 0
        for l in range(d):
            M[a * dd + l * d + l] = M[a * dd + l * d + l] - kap
            tr = tr + M[a * dd + l * d + l]
        for l in range(dd):
            f += cabs2(M[a * dd + l])
        M[a * dd] = M[a * dd] - tr
    if not want_grad:
        return f
    # G block a = 4 sum_b Q_ab B_b
    for a in range(4):
        ia = a >> 1
        ja = a & 1
        for l in range(d):
            for x in range(d):
                acc = 0
                for b in range(4):
                    ib = b >> 1
                    jb = b & 1
                    for m in range(d):
                        acc = acc + M[(a * 4 + b) * dd + l * d + m] * U[(ib * d + m) * D + jb * d + x]
                G[(ia * d + l) * D + ja * d + x] = 4.0 * acc
    return f


def apply_ops(u0, const int[::1] qa, const int[::1] qb, const cplx[:, :, ::1] kern,
              const int[::1] poff, const double[::1] params):
    """Rows of ``u0`` transformed by every op in order (returns a new array)."""
    cdef cnp.ndarray[cplx, ndim=2, mode="c"] out = np.array(u0, dtype=np.complex128, order="C", copy=True)
    cdef int D = out.shape[0]
    cdef int ncols = out.shape[1]
    cdef int nops = qa.shape[0]
    cdef int k
    cdef cplx X[16]
    cdef cplx* op = &out[0, 0] if D > 0 and ncols > 0 else NULL
    if op == NULL:
        return out
    with nogil:
        for k in range(nops):
            if qb[k] < 0:
                op_matrix(&kern[k, 0, 0], &params[poff[k]], True, X)
                apply1(X, qa[k], op, D, ncols)
            else:
                op_matrix(&kern[k, 0, 0], &params[poff[k]], False, X)
                apply2(X, qa[k], qb[k], op, D, ncols)
    return out


def circuit_cost(u0, left, const int[::1] qa, const int[::1] qb, const cplx[:, :, ::1] kern,
                 const int[::1] poff, const double[::1] params, int mode, bint want_grad=True):
    """Cost of ``left . ops(u0)`` and its gradient with respect to ``params``.

    ``mode`` 0 is the block-proportionality cost f_sub, mode 1 the
    phase-invariant fidelity cost ``1 - |Tr(.)| / D``.
    Returns ``(value, gradient or None)``; the gradient has ``len(params)``.
    """
    cdef cnp.ndarray[cplx, ndim=2, mode="c"] a0 = np.ascontiguousarray(u0, dtype=np.complex128)
    cdef int D = a0.shape[0]
    cdef int nops = qa.shape[0]
    cdef int np_ = params.shape[0]
    if a0.shape[1] != D:
        raise ValueError("initial matrix must be square")
    if mode == 0 and D % 2:
        raise ValueError("f_sub needs an even dimension")
    cdef cnp.ndarray[cplx, ndim=3, mode="c"] states = np.empty((nops + 1, D, D), dtype=np.complex128)
    cdef cnp.ndarray[cplx, ndim=2, mode="c"] xs = np.zeros((max(nops, 1), 16), dtype=np.complex128)
    cdef int k, i, j, r, c, s, t
    cdef int DD = D * D
    states[0] = a0
    cdef cplx* st = &states[0, 0, 0]
    cdef cplx* xp = &xs[0, 0]
    with nogil:
        for k in range(nops):
            for i in range(DD):
                st[(k + 1) * DD + i] = st[k * DD + i]
            if qb[k] < 0:
                op_matrix(&kern[k, 0, 0], &params[poff[k]], True, xp + 16 * k)
                apply1(xp + 16 * k, qa[k], st + (k + 1) * DD, D, D)
            else:
                op_matrix(&kern[k, 0, 0], &params[poff[k]], False, xp + 16 * k)
                apply2(xp + 16 * k, qa[k], qb[k], st + (k + 1) * DD, D, D)
    cdef cnp.ndarray[cplx, ndim=2, mode="c"] ubar
    if left is None:
        ubar = states[nops]
    else:
        ubar = np.ascontiguousarray(np.asarray(left, dtype=np.complex128) @ states[nops])
    cdef cnp.ndarray[cplx, ndim=2, mode="c"] G = np.zeros((D, D), dtype=np.complex128)
    cdef cnp.ndarray[cplx, ndim=1, mode="c"] work
    cdef double f
    cdef cplx tr
    cdef double atr
    if mode == 0:
        work = np.empty(16 * (D // 2) * (D // 2), dtype=np.complex128)
        f = fsub_head(&ubar[0, 0], D, &G[0, 0], &work[0], want_grad)
    elif mode == 1:
        tr = 0
        for i in range(D):
            tr = tr + ubar[i, i]
        atr = sqrt(cabs2(tr))
        if atr > 0:
            tr = tr / atr
        else:
            tr = 1.0
        # |W - ph I|_F^2 / 2D equals 1 - |Tr W| / D for unitary W, without the cancellation
        f = 0.0
        for i in range(D):
            for j in range(D):
                if i == j:
                    f += cabs2(ubar[i, j] - tr)
                else:
                    f += cabs2(ubar[i, j])
        f = f / (2.0 * D)
        for i in range(D):
            G[i, i] = -tr / D
    else:
        raise ValueError(f"unknown cost mode {mode}")
    if not want_grad:
        return f, None

    cdef cnp.ndarray[double, ndim=1, mode="c"] grad = np.zeros(np_, dtype=np.float64)
    cdef cnp.ndarray[cplx, ndim=2, mode="c"] V
    if left is None:
        V = G
    else:
        V = np.ascontiguousarray(np.asarray(left, dtype=np.complex128).conj().T @ G)
    cdef cplx* vp = &V[0, 0]
    cdef double* gp = &grad[0] if np_ > 0 else NULL
    cdef cplx E[16]
    cdef cplx F[16]
    cdef cplx Xd[16]
    cdef cplx Am[4]
    cdef cplx Bm[4]
    cdef cplx dAt[4]
    cdef cplx dAl[4]
    cdef cplx dBt[4]
    cdef cplx dBl[4]
    cdef cplx dummy[4]
    cdef cplx dU[12]
    cdef const double* p
    cdef const cplx* K
    cdef cplx acc0, acc1, acc2, acc3, fv
    with nogil:
        for k in range(nops - 1, -1, -1):
            p = &params[poff[k]]
            if qb[k] < 0:
                env1(vp, st + k * DD, qa[k], D, D, E)
                u3_fill(p[0], p[1], p[2], Am, dU, dU + 4, dU + 8)
                for s in range(3):
                    acc0 = 0
                    for r in range(4):
                        acc0 = acc0 + dU[4 * s + r] * E[r]
                    gp[poff[k] + s] += acc0.real
                for r in range(2):
                    for c in range(2):
                        Xd[r * 2 + c] = xp[16 * k + c * 2 + r].conjugate()
                apply1(Xd, qa[k], vp, D, D)
            else:
                env2(vp, st + k * DD, qa[k], qb[k], D, D, E)
                K = &kern[k, 0, 0]
                # F = K^T E
                for s in range(4):
                    for c in range(4):
                        fv = 0
                        for r in range(4):
                            fv = fv + K[r * 4 + s] * E[r * 4 + c]
                        F[s * 4 + c] = fv
                u3_fill(p[0], 0.0, p[1], Am, dAt, dummy, dAl)
                u3_fill(p[2], 0.0, p[3], Bm, dBt, dummy, dBl)
                acc0 = 0
                acc1 = 0
                acc2 = 0
                acc3 = 0
                for i in range(2):
                    for j in range(2):
                        for s in range(2):
                            for t in range(2):
                                fv = F[(i * 2 + j) * 4 + s * 2 + t]
                                acc0 = acc0 + dAt[i * 2 + s] * Bm[j * 2 + t] * fv
                                acc1 = acc1 + dAl[i * 2 + s] * Bm[j * 2 + t] * fv
                                acc2 = acc2 + Am[i * 2 + s] * dBt[j * 2 + t] * fv
                                acc3 = acc3 + Am[i * 2 + s] * dBl[j * 2 + t] * fv
                gp[poff[k]] += acc0.real
                gp[poff[k] + 1] += acc1.real
                gp[poff[k] + 2] += acc2.real
                gp[poff[k] + 3] += acc3.real
                for r in range(4):
                    for c in range(4):
                        Xd[r * 4 + c] = xp[16 * k + c * 4 + r].conjugate()
                apply2(Xd, qa[k], qb[k], vp, D, D)
    return f, grad
