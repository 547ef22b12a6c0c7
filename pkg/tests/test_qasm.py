import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unitary_synth.cost import circuit_matrix
from unitary_synth.gates import GateKind, X, embed_local, two_qubit_kernel, u3_matrix
from unitary_synth.numerics import spectral_error
from unitary_synth.qasm import (
    CH_EXPANSION,
    LAYOUT_PREFIX,
    QasmError,
    eval_angle,
    export_qasm,
    parse_qasm,
    qasm_matrix,
)
from unitary_synth.structure import assemble_structure, load_topology

ROUND_TRIP_TOL = 1e-10


def random_params(structure, rng):
    return rng.uniform(-np.pi, np.pi, structure.total_params)


@pytest.mark.parametrize("kind", ["cx", "cz", "ch"])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_round_trip_full(kind, n, rng):
    s = assemble_structure(n, None, None, kind)
    for _ in range(5):
        p = random_params(s, rng)
        text = export_qasm(s, p)
        assert LAYOUT_PREFIX not in text
        got = qasm_matrix(text)
        assert np.abs(got - circuit_matrix(s, p)).max() <= ROUND_TRIP_TOL


@pytest.mark.parametrize("preset,n", [("qx2", 2), ("qx2", 3), ("qx2", 4), ("heavy_hex4", 3), ("heavy_hex4", 4)])
def test_round_trip_topology(preset, n, rng):
    topo = load_topology(preset)
    s = assemble_structure(n, topo)
    p = random_params(s, rng)
    text = export_qasm(s, p)
    prog = parse_qasm(text)
    identity = s.topology.relabel == tuple(range(n)) and topo.n_physical == n
    # the layout comment is only written when local and physical indices differ
    assert prog.layout == (None if identity else s.topology.relabel)
    assert prog.n_qubits == topo.n_physical
    assert np.abs(prog.matrix() - circuit_matrix(s, p)).max() <= ROUND_TRIP_TOL
    # every two-qubit gate sits on a hardware edge in the stated direction
    for op in prog.ops:
        if len(op.qubits) == 2:
            assert s.topology.allowed_physical(*op.qubits), op


def test_strict_ch_expansion_up_to_phase(rng):
    s = assemble_structure(3, None, None, GateKind.CH)
    p = random_params(s, rng)
    strict = export_qasm(s, p, strict_qelib1=True)
    assert "ch " not in strict
    # the qelib1 expansion carries a global phase, which the metric ignores
    assert spectral_error(qasm_matrix(strict), circuit_matrix(s, p)) <= ROUND_TRIP_TOL


def test_ch_expansion_gate_by_gate():
    text = "OPENQASM 2.0;\nqreg q[2];\n" + "".join(
        f"{name} " + ",".join("q[1]" if c == "a" else "q[0]" for c in qs) + ";\n" for name, qs in CH_EXPANSION
    )
    ch = embed_local(two_qubit_kernel(GateKind.CH), (1, 0), 2)
    got = qasm_matrix(text)
    assert spectral_error(got, ch) <= 1e-14
    # only a global phase separates them
    ph = got[0, 0] / ch[0, 0]
    assert abs(abs(ph) - 1) <= 1e-14
    assert np.abs(got - ph * ch).max() <= 1e-14


def test_strict_flag_leaves_cnot_alone(rng):
    s = assemble_structure(2)
    p = random_params(s, rng)
    assert export_qasm(s, p, strict_qelib1=True) == export_qasm(s, p)


def test_u3_pi_is_x():
    m = qasm_matrix("OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[1];\nu3(pi,0,pi) q[0];\n")
    assert np.abs(m - X).max() <= 1e-12


def test_header_and_register():
    s = assemble_structure(2)
    text = export_qasm(s, np.zeros(s.total_params))
    lines = text.splitlines()
    assert lines[0] == "OPENQASM 2.0;"
    assert lines[1] == 'include "qelib1.inc";'
    assert "qreg q[2];" in lines
    assert text.endswith("\n")


def test_gate_order_and_count():
    s = assemble_structure(3)
    text = export_qasm(s, np.zeros(s.total_params))
    body = [ln for ln in text.splitlines() if ln.startswith(("u3", "cx"))]
    assert sum(ln.startswith("cx") for ln in body) == 15
    assert len(body) == len(s.gates())
    # closing rotations come last
    assert all(ln.startswith("u3") for ln in body[-3:])


def test_wrong_param_length():
    s = assemble_structure(2)
    with pytest.raises(ValueError):
        export_qasm(s, np.zeros(s.total_params - 1))


def test_bit_order_convention():
    # q[0] is the least significant bit of the basis index
    m = qasm_matrix("OPENQASM 2.0;\nqreg q[2];\nx q[0];\n")
    assert m[1, 0] == 1 and m[0, 1] == 1
    m = qasm_matrix("OPENQASM 2.0;\nqreg q[2];\ncx q[1],q[0];\n")
    # control on the high bit: |10> -> |11>
    assert m[3, 2] == 1 and m[2, 3] == 1 and m[0, 0] == 1


def test_parser_extras():
    text = """OPENQASM 2.0;
include "qelib1.inc";
// a comment line
qreg a[1];
qreg b[1];
creg c[2];
u2(0, pi) a[0];   // hadamard
barrier a[0],b[0];
u1(pi/2) b[0];
U(pi, 0, pi) b[0];
CX a[0],b[0];
"""
    prog = parse_qasm(text)
    assert prog.n_qubits == 2
    assert [op.name for op in prog.ops] == ["u2", "u1", "U", "CX"]
    assert prog.ops[-1].qubits == (0, 1)
    hb = embed_local(u3_matrix(math.pi / 2, 0, math.pi), (0,), 2)
    s_then_x = embed_local(X @ np.diag([1, 1j]), (1,), 2)
    cx = embed_local(two_qubit_kernel(GateKind.CNOT), (0, 1), 2)
    assert np.abs(prog.matrix() - cx @ s_then_x @ hb).max() <= 1e-12


@pytest.mark.parametrize(
    "expr,value",
    [
        ("pi", math.pi),
        ("-pi/2", -math.pi / 2),
        ("2*pi/3", 2 * math.pi / 3),
        ("pi^2", math.pi**2),
        ("1.5e-3", 1.5e-3),
        ("sin(pi/6)", 0.5),
        ("sqrt(4) + ln(exp(1))", 3.0),
        ("-(0.25 - 1)", 0.75),
    ],
)
def test_eval_angle(expr, value):
    assert eval_angle(expr) == pytest.approx(value, abs=1e-15)


@pytest.mark.parametrize("expr", ["__import__('os')", "x", "pi pi", "open(1)", "'a'", "cos(1, 2)"])
def test_eval_angle_rejects(expr):
    with pytest.raises(QasmError):
        eval_angle(expr)


@pytest.mark.parametrize(
    "text",
    [
        "OPENQASM 3.0;\nqreg q[1];\nx q[0];\n",
        "OPENQASM 2.0;\nx q[0];\n",
        "OPENQASM 2.0;\nqreg q[1];\nx q[1];\n",
        "OPENQASM 2.0;\nqreg q[2];\nccx q[0],q[1];\n",
        "OPENQASM 2.0;\nqreg q[2];\ncx q[0];\n",
        "OPENQASM 2.0;\nqreg q[1];\nu3(1,2) q[0];\n",
        "OPENQASM 2.0;\nqreg q[1];\nh(1) q[0];\n",
        "OPENQASM 2.0;\nqreg q[2];\nh q[0],q[1];\n",
        "OPENQASM 2.0;\nqreg q[1];\nx r[0];\n",
        "OPENQASM 2.0;\nqreg q[1];\n???;\n",
        "OPENQASM 2.0;\n// layout: 0 7\nqreg q[2];\nx q[0];\n",
        "OPENQASM 2.0;\n// layout: a b\nqreg q[2];\n",
    ],
)
def test_malformed_rejected(text):
    with pytest.raises(QasmError):
        qasm_matrix(text)


def test_gate_outside_layout():
    with pytest.raises(QasmError):
        qasm_matrix("OPENQASM 2.0;\n// layout: 1 2\nqreg q[3];\nx q[0];\n")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3))
def test_u3_text_round_trip(angles):
    text = "OPENQASM 2.0;\nqreg q[1];\nu3({},{},{}) q[0];\n".format(*(repr(a) for a in angles))
    assert np.abs(qasm_matrix(text) - u3_matrix(*angles)).max() <= 1e-14
