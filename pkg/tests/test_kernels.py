"""Compiled and numpy kernels must agree; each is also checked on its own."""

import numpy as np
import pytest

from unitary_synth import kernels
from unitary_synth.cost import circuit_matrix, f_sub, full_oplist, stage_oplist
from unitary_synth.numerics import haar_random_unitary
from unitary_synth.structure import assemble_structure, load_topology

BACKENDS = ["python"]
try:
    kernels.backend_module("compiled")
    BACKENDS.append("compiled")
except ImportError:
    pass

needs_compiled = pytest.mark.skipif("compiled" not in BACKENDS, reason="extension not built")


def cases():
    yield assemble_structure(2, None, [3])
    yield assemble_structure(3, None, [12, 3], "ch")
    yield assemble_structure(4, load_topology("qx2"), None, "cz")


@pytest.mark.parametrize("backend", BACKENDS)
def test_apply_matches_naive(backend, rng):
    for s in cases():
        p = rng.uniform(0, 2 * np.pi, s.total_params)
        u = haar_random_unitary(s.n_qubits, rng)
        got = kernels.apply_ops(u, full_oplist(s), p, backend=backend)
        assert np.abs(got - circuit_matrix(s, p) @ u).max() <= 1e-12


@pytest.mark.parametrize("backend", BACKENDS)
def test_cost_values(backend, rng):
    for s in cases():
        st = s.stages[0]
        ops = stage_oplist(st)
        local = rng.uniform(0, 2 * np.pi, 4 * len(ops))
        u = haar_random_unitary(s.n_qubits, rng)
        ubar = kernels.apply_ops(u, ops, local, backend=backend)
        f, g = kernels.circuit_cost(u, ops, local, kernels.FSUB, backend=backend, want_grad=False)
        assert g is None
        assert f == pytest.approx(f_sub(ubar), rel=1e-12)


@needs_compiled
def test_backends_agree(rng):
    for s in cases():
        u = haar_random_unitary(s.n_qubits, rng)
        p = rng.uniform(0, 2 * np.pi, s.total_params)
        ops = full_oplist(s)
        fc, gc = kernels.circuit_cost(u, ops, p, kernels.FIDELITY, backend="compiled")
        fp, gp = kernels.circuit_cost(u, ops, p, kernels.FIDELITY, backend="python")
        assert fc == pytest.approx(fp, abs=1e-14)
        assert np.abs(gc - gp).max() <= 1e-13
        st = s.stages[0]
        sops = stage_oplist(st)
        local = p[st.param_slice]
        left = haar_random_unitary(s.n_qubits, rng)
        fc, gc = kernels.circuit_cost(u, sops[:2], local[:8], kernels.FSUB, left=left, backend="compiled")
        fp, gp = kernels.circuit_cost(u, sops[:2], local[:8], kernels.FSUB, left=left, backend="python")
        assert fc == pytest.approx(fp, rel=1e-12)
        assert np.abs(gc - gp).max() <= 1e-12 * max(1.0, np.abs(gp).max())


@pytest.mark.parametrize("backend", BACKENDS)
def test_left_factor(backend, rng):
    s = assemble_structure(3)
    ops = stage_oplist(s.stages[0])
    local = rng.uniform(0, 2 * np.pi, 4 * len(ops))
    u = haar_random_unitary(3, rng)
    left = kernels.apply_ops(np.eye(8), ops[4:], local, backend=backend)
    f_split, _ = kernels.circuit_cost(u, ops[:4], local[:16], kernels.FSUB, left=left, backend=backend)
    f_full, _ = kernels.circuit_cost(u, ops, local, kernels.FSUB, backend=backend)
    assert f_split == pytest.approx(f_full, rel=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_param_bounds_checked(backend):
    ops = stage_oplist(assemble_structure(3).stages[0])
    with pytest.raises(ValueError):
        kernels.apply_ops(np.eye(8), ops[4:], np.zeros(16), backend=backend)
    with pytest.raises(ValueError):
        kernels.circuit_cost(np.eye(8), ops, np.zeros(8), kernels.FSUB, backend=backend)


@pytest.mark.parametrize("backend", BACKENDS)
def test_bad_mode(backend):
    s = assemble_structure(2)
    with pytest.raises(ValueError):
        kernels.circuit_cost(np.eye(4), full_oplist(s), np.zeros(s.total_params), 7, backend=backend)


def test_backend_selection():
    assert kernels.BACKEND in ("compiled", "python")
    with pytest.raises(ValueError):
        kernels.backend_module("gpu")
