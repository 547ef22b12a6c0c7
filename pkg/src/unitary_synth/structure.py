"""Decomposing gate templates: layers, periods, stages and qubit topologies.

A *layer* is two 2-parameter U3 gates followed by one parameter-free
two-qubit controlled gate on the same pair. A *period* is the shortest
repeating run of layers that couples the qubit being disentangled to every
remaining qubit. Stages disentangle local qubits n-1, n-2, ..., 1 in turn,
and one 3-parameter U3 per qubit closes the circuit.

The global parameter vector is laid out stage by stage, layer by layer as
``[theta_a, lambda_a, theta_b, lambda_b]``, followed by
``[theta, phi, lambda]`` for the closing rotation of qubits 0..n-1.
"""

from __future__ import annotations

import json
import math
import os
from collections import deque
from dataclasses import dataclass, replace
from importlib import resources
from typing import Sequence

from .gates import Gate, GateKind

PARAMS_PER_LAYER = 4
PARAMS_PER_CLOSING = 3

_FULL_DEFAULTS = {2: [3], 3: [12, 3], 4: [48, 12, 3], 5: [204, 48, 12, 3]}
_SPARSE_DEFAULTS = {2: [3], 3: [14, 3], 4: [54, 14, 3]}
TOPOLOGY_CLASSES = ("full", "qx2", "heavy_hex")


def cnot_lower_bound(n_qubits: int) -> int:
    """Minimum CNOT count sufficient for every n-qubit unitary: ceil((4^n - 3n - 1) / 4)."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    return -((-(4**n_qubits - 3 * n_qubits - 1)) // 4)


@dataclass(frozen=True)
class Layer:
    qubit_a: int
    qubit_b: int
    control: int
    target: int
    kind: GateKind = GateKind.CNOT
    param_offset: int = 0

    def __post_init__(self):
        if self.qubit_a == self.qubit_b:
            raise ValueError("layer needs two distinct qubits")
        if {self.control, self.target} != {self.qubit_a, self.qubit_b}:
            raise ValueError("entangler must act on the layer's qubit pair")
        if not self.kind.is_two_qubit:
            raise ValueError(f"{self.kind.name} cannot entangle")

    @property
    def gate_a(self) -> Gate:
        return Gate(GateKind.U3, self.qubit_a, None, self.param_offset, 2)

    @property
    def gate_b(self) -> Gate:
        return Gate(GateKind.U3, self.qubit_b, None, self.param_offset + 2, 2)

    @property
    def entangler(self) -> Gate:
        return Gate(self.kind, self.target, self.control)

    @property
    def gates(self) -> tuple[Gate, Gate, Gate]:
        """Circuit order: both U3 gates, then the entangler."""
        return (self.gate_a, self.gate_b, self.entangler)

    @property
    def pair(self) -> tuple[int, int]:
        return (self.qubit_a, self.qubit_b)


@dataclass(frozen=True)
class Period:
    layers: tuple[Layer, ...]
    disentangle_target: int

    def __len__(self) -> int:
        return len(self.layers)


@dataclass(frozen=True)
class Stage:
    target: int
    layers: tuple[Layer, ...]

    @property
    def n_qubits(self) -> int:
        """Size of the register this stage works on (qubits 0..target)."""
        return self.target + 1

    @property
    def param_slice(self) -> slice:
        if not self.layers:
            return slice(0, 0)
        start = self.layers[0].param_offset
        return slice(start, start + PARAMS_PER_LAYER * len(self.layers))


@dataclass(frozen=True)
class GateStructure:
    n_qubits: int
    stages: tuple[Stage, ...]
    closing_rotations: tuple[Gate, ...]
    topology: "Topology | None" = None

    @property
    def layers(self) -> tuple[Layer, ...]:
        return tuple(layer for st in self.stages for layer in st.layers)

    @property
    def n_layers(self) -> int:
        return sum(len(st.layers) for st in self.stages)

    @property
    def two_qubit_count(self) -> int:
        return self.n_layers

    @property
    def total_params(self) -> int:
        return PARAMS_PER_LAYER * self.n_layers + PARAMS_PER_CLOSING * self.n_qubits

    @property
    def closing_offset(self) -> int:
        return PARAMS_PER_LAYER * self.n_layers

    def gates(self) -> list[Gate]:
        """Every gate in circuit (time) order."""
        out: list[Gate] = []
        for layer in self.layers:
            out.extend(layer.gates)
        out.extend(self.closing_rotations)
        return out


# --- topology ----------------------------------------------------------------


@dataclass(frozen=True)
class Topology:
    """Directed coupling map plus the physical qubits used, in disentangle order.

    ``order`` lists physical qubits from the first one disentangled to the
    last; local qubit ``j`` of an n-qubit problem is ``order[n - 1 - j]``, so
    stages (which always disentangle the highest local index) follow
    ``order``.
    """

    n_physical: int
    edges: tuple[tuple[int, int], ...]
    bidirectional: bool
    order: tuple[int, ...]
    name: str | None = None
    topology_class: str | None = None

    def __post_init__(self):
        if len(set(self.order)) != len(self.order):
            raise ValueError("disentangle order repeats a qubit")
        for q in self.order:
            if not 0 <= q < self.n_physical:
                raise ValueError(f"physical qubit {q} out of range")
        for c, t in self.edges:
            if c == t or not (0 <= c < self.n_physical and 0 <= t < self.n_physical):
                raise ValueError(f"bad edge {(c, t)}")
        if len(self.order) >= 2 and not self.connected_physical(self.order[-1], self.order[-2]):
            raise ValueError("the last two qubits of the disentangle order must share an edge")

    @classmethod
    def full(cls, n_qubits: int) -> "Topology":
        edges = tuple((c, t) for c in range(n_qubits) for t in range(n_qubits) if c != t)
        return cls(n_qubits, edges, True, tuple(range(n_qubits - 1, -1, -1)), "full", "full")

    @property
    def n_qubits(self) -> int:
        return len(self.order)

    @property
    def relabel(self) -> tuple[int, ...]:
        """local index -> physical index."""
        n = len(self.order)
        return tuple(self.order[n - 1 - j] for j in range(n))

    @property
    def disentangle_order(self) -> tuple[int, ...]:
        return tuple(range(len(self.order) - 1, -1, -1))

    def allowed_physical(self, control: int, target: int) -> bool:
        if (control, target) in self.edges:
            return True
        return self.bidirectional and (target, control) in self.edges

    def connected_physical(self, a: int, b: int) -> bool:
        return (a, b) in self.edges or (b, a) in self.edges

    def allowed(self, control: int, target: int) -> bool:
        """Is a local (control, target) gate placeable on hardware?"""
        rl = self.relabel
        return self.allowed_physical(rl[control], rl[target])

    def connected(self, a: int, b: int) -> bool:
        rl = self.relabel
        return self.connected_physical(rl[a], rl[b])

    def restrict(self, n_qubits: int) -> "Topology":
        """Topology for an n-qubit problem: the last n qubits of the order."""
        if n_qubits > len(self.order):
            raise ValueError(f"topology has only {len(self.order)} selected qubits, need {n_qubits}")
        if n_qubits == len(self.order):
            return self
        return replace(self, order=self.order[len(self.order) - n_qubits :])

    @property
    def is_fully_connected(self) -> bool:
        n = len(self.order)
        return all(self.connected(a, b) for a in range(n) for b in range(a + 1, n))

    def to_json(self) -> dict:
        d = {
            "n_physical": self.n_physical,
            "edges": [list(e) for e in self.edges],
            "bidirectional": self.bidirectional,
            "subset": sorted(self.order),
            "disentangle_order": list(self.order),
        }
        if self.name:
            d["name"] = self.name
        if self.topology_class:
            d["class"] = self.topology_class
        return d


def topology_from_dict(d: dict) -> Topology:
    try:
        n_physical = int(d["n_physical"])
        edges = tuple((int(c), int(t)) for c, t in d["edges"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed topology: {exc}") from exc
    subset = [int(q) for q in d.get("subset", range(n_physical))]
    order = [int(q) for q in d.get("disentangle_order", sorted(subset, reverse=True))]
    if sorted(order) != sorted(subset):
        raise ValueError("disentangle_order must be a permutation of subset")
    return Topology(
        n_physical=n_physical,
        edges=edges,
        bidirectional=bool(d.get("bidirectional", False)),
        order=tuple(order),
        name=d.get("name"),
        topology_class=d.get("class"),
    )


PRESETS = {"qx2": "qx2.json", "heavy_hex4": "heavy_hex4.json", "heavy_hex": "heavy_hex4.json"}


def load_topology(source: str | os.PathLike) -> Topology:
    """Load a topology JSON file, or a shipped preset by name (``qx2``, ``heavy_hex4``)."""
    key = os.fspath(source)
    stem = os.path.splitext(os.path.basename(key))[0]
    if not os.path.exists(key) and stem in PRESETS:
        text = resources.files("unitary_synth").joinpath("data", PRESETS[stem]).read_text()
    else:
        with open(key, encoding="utf-8") as fh:
            text = fh.read()
    return topology_from_dict(json.loads(text))


# --- builders ----------------------------------------------------------------


def build_full_period(n_qubits: int, target: int, kind: GateKind = GateKind.CNOT) -> Period:
    """Pair ``target`` once with every lower qubit, descending partner index.

    Every layer's entangler is controlled by ``target``.
    """
    if n_qubits < 2:
        raise ValueError("a period needs at least 2 qubits")
    if not 0 <= target < n_qubits:
        raise ValueError(f"target {target} out of range")
    partners = [q for q in range(n_qubits - 1, -1, -1) if q != target]
    layers = tuple(Layer(target, q, target, q, kind) for q in partners)
    return Period(layers, target)


def build_topology_period(
    topology: Topology, target: int, remaining: Sequence[int], kind: GateKind = GateKind.CNOT
) -> Period:
    """Spanning-tree period connecting ``target`` to ``remaining`` over topology edges.

    Breadth-first search from ``target`` (neighbours visited in descending
    index order); each tree edge (parent, child) becomes a layer. Layers whose
    pair excludes ``target`` mediate the interaction through an intermediate
    qubit. The entangler takes the parent as control when the hardware allows
    that orientation, otherwise the reverse one.
    """
    nodes = set(remaining) | {target}
    if target in remaining:
        raise ValueError("target must not be among the remaining qubits")
    layers: list[Layer] = []
    seen = {target}
    queue = deque([target])
    while queue:
        u = queue.popleft()
        for v in sorted(nodes - seen, reverse=True):
            if not topology.connected(u, v):
                continue
            seen.add(v)
            queue.append(v)
            if topology.allowed(u, v):
                layers.append(Layer(u, v, u, v, kind))
            else:
                layers.append(Layer(u, v, v, u, kind))
    if seen != nodes:
        raise ValueError(f"topology cannot disentangle target {target}: qubits {sorted(nodes - seen)} unreachable")
    return Period(tuple(layers), target)


def default_layer_counts(n_qubits: int, topology_class: str = "full") -> list[int]:
    """Per-stage layer counts (stage disentangling qubit n-1 first)."""
    table = _FULL_DEFAULTS if topology_class == "full" else _SPARSE_DEFAULTS
    if topology_class not in TOPOLOGY_CLASSES or n_qubits not in table:
        raise ValueError(f"no default layer counts for n={n_qubits}, topology class {topology_class!r}")
    return list(table[n_qubits])


def topology_class_of(topology: Topology | None) -> str:
    if topology is None or topology.is_fully_connected:
        return "full"
    if topology.topology_class in TOPOLOGY_CLASSES:
        return topology.topology_class
    return "qx2"


def assemble_structure(
    n_qubits: int,
    topology: Topology | None = None,
    layers_per_stage: Sequence[int] | None = None,
    kind: GateKind | str = GateKind.CNOT,
) -> GateStructure:
    """Full decomposing structure: n-1 stages plus closing U3 rotations."""
    if isinstance(kind, str):
        kind = GateKind.parse(kind)
    if not kind.is_two_qubit:
        raise ValueError(f"{kind.value} is not an entangling gate")
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    if topology is not None:
        topology = topology.restrict(n_qubits)
    if layers_per_stage is None:
        layers_per_stage = default_layer_counts(n_qubits, topology_class_of(topology)) if n_qubits > 1 else []
    layers_per_stage = [int(c) for c in layers_per_stage]
    if len(layers_per_stage) != n_qubits - 1:
        raise ValueError(f"need {n_qubits - 1} layer counts, got {len(layers_per_stage)}")
    stages = []
    offset = 0
    for target, count in zip(range(n_qubits - 1, 0, -1), layers_per_stage):
        remaining = list(range(target))
        if topology is None:
            period = build_full_period(target + 1, target, kind)
        else:
            period = build_topology_period(topology, target, remaining, kind)
        if count < len(period):
            raise ValueError(
                f"stage for qubit {target} needs at least one period ({len(period)} layers), got {count}"
            )
        reps = math.ceil(count / len(period))
        layers = []
        for layer in (period.layers * reps)[:count]:
            layers.append(replace(layer, param_offset=offset))
            offset += PARAMS_PER_LAYER
        stages.append(Stage(target, tuple(layers)))
    closing = tuple(
        Gate(GateKind.U3, q, None, offset + PARAMS_PER_CLOSING * q, PARAMS_PER_CLOSING) for q in range(n_qubits)
    )
    return GateStructure(n_qubits, tuple(stages), closing, topology)


def validate_structure(structure: GateStructure, topology: Topology | None) -> list[str]:
    """Two-qubit gates that do not map onto an allowed directed hardware edge."""
    if topology is None:
        return []
    topo = topology.restrict(structure.n_qubits)
    rl = topo.relabel
    out = []
    for idx, layer in enumerate(structure.layers):
        if not topo.allowed(layer.control, layer.target):
            out.append(
                f"layer {idx}: {layer.kind.name} q{layer.control}->q{layer.target} "
                f"(physical {rl[layer.control]}->{rl[layer.target]}) is not a hardware edge"
            )
    return out
