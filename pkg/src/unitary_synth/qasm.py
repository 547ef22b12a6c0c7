"""OpenQASM 2.0 export of decomposing circuits and a small parser for reading them back.

When the structure carries a hardware topology, gates are written on
physical qubit indices and a ``// layout:`` comment records the physical
index of each local qubit so the parser can map back.
"""

from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass

import numpy as np

from .gates import GateKind, H, X, embed_local, two_qubit_kernel, u3_matrix
from .structure import GateStructure

HEADER = 'OPENQASM 2.0;\ninclude "qelib1.inc";\n'
LAYOUT_PREFIX = "// layout:"

# qelib1's own definition of ch, gate by gate (a = control, b = target)
CH_EXPANSION = (
    ("h", "b"),
    ("sdg", "b"),
    ("cx", "ab"),
    ("h", "b"),
    ("t", "b"),
    ("cx", "ab"),
    ("t", "b"),
    ("h", "b"),
    ("s", "b"),
    ("x", "b"),
    ("s", "a"),
)


class QasmError(ValueError):
    pass


def _num(x: float) -> str:
    return repr(float(x))


def export_qasm(structure: GateStructure, params, strict_qelib1: bool = False) -> str:
    """Circuit text for ``structure`` at ``params``.

    ``strict_qelib1`` replaces every ``ch`` with its expansion into gates
    that qelib1 defines without ``ch``.
    """
    params = np.asarray(params, dtype=np.float64)
    if len(params) != structure.total_params:
        raise ValueError(f"expected {structure.total_params} parameters, got {len(params)}")
    topo = structure.topology
    phys = tuple(range(structure.n_qubits))
    size = structure.n_qubits
    if topo is not None and (topo.relabel != phys or topo.n_physical != size):
        phys = topo.relabel
        size = topo.n_physical
    lines = [HEADER.rstrip("\n")]
    if phys != tuple(range(structure.n_qubits)) or size != structure.n_qubits:
        lines.append(f"{LAYOUT_PREFIX} " + " ".join(str(p) for p in phys))
    lines.append(f"qreg q[{size}];")
    for g in structure.gates():
        if g.kind is GateKind.U3:
            t, p, l = g.angles(params)
            lines.append(f"u3({_num(t)},{_num(p)},{_num(l)}) q[{phys[g.target]}];")
        elif g.kind is GateKind.H:
            lines.append(f"h q[{phys[g.target]}];")
        elif g.kind is GateKind.CH and strict_qelib1:
            names = {"a": phys[g.control], "b": phys[g.target]}
            for name, qs in CH_EXPANSION:
                args = ",".join(f"q[{names[c]}]" for c in qs)
                lines.append(f"{name} {args};")
        else:
            lines.append(f"{g.kind.value} q[{phys[g.control]}],q[{phys[g.target]}];")
    return "\n".join(lines) + "\n"


# --- parsing ----------------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sin": math.sin, "cos": math.cos, "tan": math.tan, "exp": math.exp, "ln": math.log, "sqrt": math.sqrt}


def eval_angle(expr: str) -> float:
    """Evaluate a QASM parameter expression (numbers, ``pi``, + - * / ^, unary minus, sin/cos/...)."""
    try:
        tree = ast.parse(expr.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise QasmError(f"bad parameter expression {expr!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise QasmError(f"unsupported expression {expr!r}")

    return float(ev(tree))


_S = np.diag([1, 1j]).astype(np.complex128)
_T = np.diag([1, np.exp(1j * np.pi / 4)])
_FIXED_1Q = {
    "h": H,
    "x": X,
    "y": np.array([[0, -1j], [1j, 0]]),
    "z": np.diag([1.0, -1.0]).astype(np.complex128),
    "s": _S,
    "sdg": _S.conj().T,
    "t": _T,
    "tdg": _T.conj().T,
    "id": np.eye(2, dtype=np.complex128),
}
_TWO_Q = {"cx": GateKind.CNOT, "CX": GateKind.CNOT, "cz": GateKind.CZ, "ch": GateKind.CH}


def _one_qubit_matrix(name: str, args: list[float]) -> np.ndarray:
    if name in ("u3", "U", "u"):
        if len(args) != 3:
            raise QasmError(f"{name} takes 3 parameters")
        return u3_matrix(*args)
    if name == "u2":
        if len(args) != 2:
            raise QasmError("u2 takes 2 parameters")
        return u3_matrix(math.pi / 2, args[0], args[1])
    if name == "u1":
        if len(args) != 1:
            raise QasmError("u1 takes 1 parameter")
        return u3_matrix(0.0, 0.0, args[0])
    if name in _FIXED_1Q:
        if args:
            raise QasmError(f"{name} takes no parameters")
        return _FIXED_1Q[name]
    raise QasmError(f"unsupported gate {name!r}")


@dataclass(frozen=True)
class QasmOp:
    name: str
    params: tuple[float, ...]
    qubits: tuple[int, ...]


@dataclass(frozen=True)
class QasmProgram:
    n_qubits: int
    ops: tuple[QasmOp, ...]
    layout: tuple[int, ...] | None = None

    def matrix(self) -> np.ndarray:
        """Circuit unitary on the local register (layout applied when present)."""
        if self.layout is not None:
            to_local = {p: j for j, p in enumerate(self.layout)}
            n = len(self.layout)
        else:
            to_local = {q: q for q in range(self.n_qubits)}
            n = self.n_qubits
        out = np.eye(2**n, dtype=np.complex128)
        for op in self.ops:
            try:
                qs = tuple(to_local[q] for q in op.qubits)
            except KeyError as exc:
                raise QasmError(f"gate {op.name} acts on qubit {exc.args[0]} outside the layout") from None
            if op.name in _TWO_Q:
                m = two_qubit_kernel(_TWO_Q[op.name])
            else:
                m = _one_qubit_matrix(op.name, list(op.params))
            out = embed_local(m, qs, n) @ out
        return out


def _split_top(s: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


_STMT = re.compile(r"^([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*(.*)$", re.S)
_QARG = re.compile(r"^([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]$")


def parse_qasm(text: str) -> QasmProgram:
    layout = None
    body = []
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith(LAYOUT_PREFIX):
            try:
                layout = tuple(int(t) for t in stripped[len(LAYOUT_PREFIX) :].split())
            except ValueError as exc:
                raise QasmError("malformed layout comment") from exc
            continue
        body.append(line.split("//", 1)[0])
    regs: dict[str, tuple[int, int]] = {}
    size = 0
    ops = []
    for stmt in " ".join(body).split(";"):
        stmt = stmt.strip()
        if not stmt:
            continue
        if stmt.startswith("OPENQASM"):
            if stmt.split()[1:] != ["2.0"]:
                raise QasmError(f"unsupported version: {stmt}")
            continue
        if stmt.startswith("include") or stmt.startswith("creg") or stmt.startswith("barrier"):
            continue
        m = re.match(r"^qreg\s+([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]$", stmt)
        if m:
            regs[m.group(1)] = (size, int(m.group(2)))
            size += int(m.group(2))
            continue
        m = _STMT.match(stmt)
        if not m:
            raise QasmError(f"cannot parse statement {stmt!r}")
        name, pexpr, qexpr = m.group(1), m.group(2), m.group(3)
        params = tuple(eval_angle(p) for p in _split_top(pexpr)) if pexpr is not None else ()
        qubits = []
        for qa in _split_top(qexpr):
            mq = _QARG.match(qa)
            if not mq or mq.group(1) not in regs:
                raise QasmError(f"bad qubit argument {qa!r} in {stmt!r}")
            base, length = regs[mq.group(1)]
            idx = int(mq.group(2))
            if idx >= length:
                raise QasmError(f"qubit index {idx} out of range in {stmt!r}")
            qubits.append(base + idx)
        if name in _TWO_Q:
            if len(qubits) != 2 or params:
                raise QasmError(f"{name} needs two qubits and no parameters")
        else:
            _one_qubit_matrix(name, list(params))  # validates name and arity
            if len(qubits) != 1:
                raise QasmError(f"{name} acts on one qubit")
        ops.append(QasmOp(name, params, tuple(qubits)))
    if size == 0:
        raise QasmError("no qreg declared")
    if layout is not None and any(not 0 <= p < size for p in layout):
        raise QasmError("layout refers to qubits outside the register")
    return QasmProgram(size, tuple(ops), layout)


def qasm_matrix(text: str) -> np.ndarray:
    return parse_qasm(text).matrix()
