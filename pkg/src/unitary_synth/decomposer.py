"""Full recursive decomposition of an n-qubit unitary.

Each stage disentangles the current top qubit, then the remaining
(n-1)-qubit factor is read off one quadrant and handed to the next stage.
Closing U3 rotations undo the leftover single-qubit factors, and a final
BFGS pass on the fidelity cost tunes every parameter at once.

The circuit built here realizes ``u^dag`` up to a global phase: applying it
after ``u`` gives the identity.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from .cost import circuit_matrix, f_sub, fidelity_cost, partition_blocks, stage_matrix
from .gates import GateKind, u3_params_from_2x2
from .numerics import as_matrix, closest_unitary, dagger, is_unitary, n_qubits_of, spectral_error
from .optimizer import OptimizerConfig, bfgs_minimize, sweep_stage
from .structure import GateStructure, Stage, Topology, assemble_structure, validate_structure

_KAPPA_FLOOR = 1e-12


@dataclass(frozen=True)
class DecompositionConfig:
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    layer_counts: tuple[int, ...] | None = None
    topology: Topology | None = None
    entangler_kind: GateKind = GateKind.CNOT
    fine_tune: bool = True
    fine_tune_max_iter: int = 2500
    # the fidelity value is accurate down to ~1e-30, so the final pass can
    # push the gradient far below the stage tolerance
    fine_tune_grad_tol: float = 1e-13
    time_limit_s: float | None = None

    def __post_init__(self):
        if isinstance(self.entangler_kind, str):
            object.__setattr__(self, "entangler_kind", GateKind.parse(self.entangler_kind))
        if self.layer_counts is not None:
            object.__setattr__(self, "layer_counts", tuple(int(c) for c in self.layer_counts))
        if self.fine_tune_max_iter < 0:
            raise ValueError("fine_tune_max_iter must be non-negative")
        if not self.fine_tune_grad_tol > 0:
            raise ValueError("fine_tune_grad_tol must be positive")

    def check_for(self, n_qubits: int) -> None:
        if self.layer_counts is not None and len(self.layer_counts) != n_qubits - 1:
            raise ValueError(f"{n_qubits} qubits need {n_qubits - 1} layer counts, got {len(self.layer_counts)}")


@dataclass
class StageResult:
    target: int
    layers_used: int
    final_f_sub: float
    sub_unitary: np.ndarray
    residual_1q: np.ndarray
    converged: bool = True
    sweeps: int = 0
    restarts: int = 0
    timed_out: bool = False


@dataclass
class DecompositionResult:
    structure: GateStructure
    params: np.ndarray
    stages: list[StageResult]
    spectral_error: float
    fidelity_cost: float
    cnot_count: int
    wall_time: float
    converged: bool
    fidelity_before_fine_tune: float = float("nan")

    def circuit(self) -> np.ndarray:
        return circuit_matrix(self.structure, self.params)


@dataclass
class VerifyReport:
    spectral_error: float
    fidelity_cost: float
    stage_f_sub: list[float]
    violations: list[str]


def extract_subunitary(ubar) -> tuple[np.ndarray, np.ndarray]:
    """Split ``ubar ~ A (x) V`` into the lower factor V and the top-qubit factor A.

    V is the quadrant with the largest ``kappa_ij^ij`` rescaled by
    ``1/sqrt(kappa)``; ``A_ij = Tr(U_ij V^dag) / d``.
    """
    part = partition_blocks(ubar)
    best, best_k = None, -1.0
    for i in (0, 1):
        for j in (0, 1):
            blk = part[i, j]
            k = float(np.vdot(blk[0], blk[0]).real)
            if k > best_k:
                best, best_k = (i, j), k
    if best_k < _KAPPA_FLOOR:
        raise ValueError("all quadrants vanish; cannot extract a sub-unitary")
    sub = part[best] / np.sqrt(best_k)
    d = sub.shape[0]
    residual = np.array([[np.vdot(sub, part[i, j]) / d for j in (0, 1)] for i in (0, 1)])
    return sub, residual


def disentangle_qubit(
    u,
    stage: Stage,
    config: OptimizerConfig | None = None,
    rng: np.random.Generator | None = None,
    deadline: float | None = None,
) -> tuple[np.ndarray, np.ndarray, StageResult]:
    """Optimize one stage against ``u`` (on the stage's register).

    Returns the stage parameters, ``ubar = stage . u`` and diagnostics; the
    sub-unitary and residual in the diagnostics come from ``ubar``.
    """
    u = as_matrix(u)
    if u.shape[0] < 4:
        raise ValueError("disentangling needs at least two qubits")
    cfg = config or OptimizerConfig()
    state = sweep_stage(stage, u, cfg, rng, deadline=deadline)
    ubar = stage_matrix(stage, _embed_stage_params(stage, state.params)) @ u
    sub, residual = extract_subunitary(ubar)
    res = StageResult(
        target=stage.target,
        layers_used=len(stage.layers),
        final_f_sub=float(state.best_value),
        sub_unitary=sub,
        residual_1q=residual,
        converged=state.converged,
        sweeps=state.sweep_count,
        restarts=state.restarts_used,
        timed_out=state.timed_out,
    )
    return state.params, ubar, res


def _embed_stage_params(stage: Stage, local) -> np.ndarray:
    full = np.zeros(stage.param_slice.stop)
    full[stage.param_slice] = local
    return full


def build_structure(n_qubits: int, config: DecompositionConfig) -> GateStructure:
    config.check_for(n_qubits)
    return assemble_structure(n_qubits, config.topology, config.layer_counts, config.entangler_kind)


def decompose(u, config: DecompositionConfig | None = None, rng: np.random.Generator | None = None) -> DecompositionResult:
    """Find circuit parameters C with ``C u ~ e^{i phi} I``.

    Stage non-convergence does not raise: the best parameters found are kept,
    fine-tuning still runs, and ``converged`` is False in the result.
    """
    t0 = time.monotonic()
    cfg = config or DecompositionConfig()
    u = as_matrix(u)
    if not is_unitary(u, 1e-8):
        raise ValueError("input matrix is not unitary")
    n = n_qubits_of(u)
    if not 1 <= n <= 5:
        raise ValueError(f"decompose supports 1 to 5 qubits, got {n}")
    rng = rng if rng is not None else np.random.default_rng(cfg.optimizer.seed)
    deadline = None if cfg.time_limit_s is None else t0 + cfg.time_limit_s
    structure = build_structure(n, cfg)
    params = np.zeros(structure.total_params)

    stages: list[StageResult] = []
    residuals: dict[int, np.ndarray] = {}
    cur = u
    for st in structure.stages:
        local, _, res = disentangle_qubit(cur, st, cfg.optimizer, rng, deadline)
        params[st.param_slice] = local
        stages.append(res)
        residuals[st.target] = res.residual_1q
        cur = res.sub_unitary
    residuals[0] = cur
    for g in structure.closing_rotations:
        inv = dagger(closest_unitary(residuals[g.target]))
        theta, phi, lam, _ = u3_params_from_2x2(inv)
        params[g.param_offset : g.param_offset + 3] = (theta, phi, lam)

    before = fidelity_cost(structure, params, u).value
    after = before
    if cfg.fine_tune and cfg.fine_tune_max_iter > 0 and before > 0:

        def objective(x):
            r = fidelity_cost(structure, x, u)
            return r.value, r.gradient

        tune_cfg = dataclasses.replace(cfg.optimizer, grad_tol=cfg.fine_tune_grad_tol)
        tuned = bfgs_minimize(objective, params, tune_cfg, max_iter=cfg.fine_tune_max_iter)
        if tuned.value <= before:
            params, after = tuned.x, tuned.value

    circuit = circuit_matrix(structure, params)
    return DecompositionResult(
        structure=structure,
        params=params,
        stages=stages,
        spectral_error=spectral_error(dagger(u), circuit),
        fidelity_cost=float(after),
        cnot_count=structure.two_qubit_count,
        wall_time=time.monotonic() - t0,
        converged=all(s.converged for s in stages),
        fidelity_before_fine_tune=float(before),
    )


def verify(result: DecompositionResult, u) -> VerifyReport:
    """Recompute the result's error figures from scratch with naive gate products."""
    u = as_matrix(u)
    structure, params = result.structure, np.asarray(result.params, dtype=np.float64)
    circuit = circuit_matrix(structure, params)
    d = u.shape[0]
    fid = max(0.0, 1.0 - abs(np.trace(circuit @ u)) / d)
    stage_f = []
    cur = u
    for st in structure.stages:
        ubar = stage_matrix(st, params) @ cur
        stage_f.append(f_sub(ubar))
        try:
            cur, _ = extract_subunitary(ubar)
        except ValueError:
            break
    return VerifyReport(
        spectral_error=spectral_error(dagger(u), circuit),
        fidelity_cost=float(fid),
        stage_f_sub=stage_f,
        violations=validate_structure(structure, structure.topology),
    )
