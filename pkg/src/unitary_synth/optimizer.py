"""BFGS minimizer and the sequential block-sweep controller.

A stage's layers are split into blocks that are optimized one at a time
with every other parameter frozen, cycling until f_sub drops below
``epsilon0``. One-layer blocks pull the cost down quickly from a random
start, but the per-sweep gain shrinks to a slow linear rate near the
minimum. With ``escalate`` on, the block size doubles whenever a sweep
improves the cost by less than ``escalate_tol`` (relative), ending in
whole-stage BFGS passes, which converge superlinearly. A stage that
stagnates is re-randomized; the best parameters seen are kept.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .cost import stage_oplist
from .structure import GateStructure, Stage

TWO_PI = 2 * np.pi
_STALL_REL = 1e-3


class NonFiniteObjective(ValueError):
    def __init__(self, x, value):
        super().__init__(f"objective returned {value!r} at x={np.array2string(np.asarray(x), precision=6)}")
        self.x = np.array(x, copy=True)
        self.value = value


@dataclass(frozen=True)
class OptimizerConfig:
    epsilon0: float = 1e-8
    max_sweeps: int = 10000
    bfgs_max_iter: int = 100
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    grad_tol: float = 1e-10
    block_size_layers: int = 1
    restart_patience: int = 200
    max_restarts: int = 5
    seed: int = 0
    zero_init: bool = False
    shuffle: bool = False
    escalate: bool = True
    escalate_tol: float = 0.05

    def __post_init__(self):
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ValueError("need 0 < wolfe_c1 < wolfe_c2 < 1")
        if self.epsilon0 <= 0:
            raise ValueError("epsilon0 must be positive")
        if self.block_size_layers < 1 or self.bfgs_max_iter < 1 or self.max_sweeps < 1:
            raise ValueError("block size, iteration and sweep limits must be positive")
        if self.max_restarts < 0 or self.restart_patience < 1:
            raise ValueError("bad restart settings")


class BFGSResult(NamedTuple):
    x: np.ndarray
    value: float
    grad: np.ndarray
    iterations: int
    evaluations: int
    message: str


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimizer of the cubic interpolating (a, fa, ga), (b, fb, gb), or None."""
    d1 = ga + gb - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = gb - ga + 2 * d2
    if denom == 0:
        return None
    return b - (b - a) * (gb + d2 - d1) / denom


def _zoom(phi, lo, hi, f0, g0, c1, c2, max_iter=30):
    a_lo, f_lo, g_lo, x_lo = lo
    a_hi, f_hi, g_hi, _ = hi
    for _ in range(max_iter):
        a = _cubic_min(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi)
        lo_b, hi_b = min(a_lo, a_hi), max(a_lo, a_hi)
        span = hi_b - lo_b
        if a is None or not (lo_b + 0.1 * span <= a <= hi_b - 0.1 * span):
            a = 0.5 * (a_lo + a_hi)
        f, g, pt = phi(a)
        if f > f0 + c1 * a * g0 or f >= f_lo:
            a_hi, f_hi, g_hi = a, f, g
        else:
            if abs(g) <= -c2 * g0:
                return a, f, g, pt
            if g * (a_hi - a_lo) >= 0:
                a_hi, f_hi, g_hi = a_lo, f_lo, g_lo
            a_lo, f_lo, g_lo, x_lo = a, f, g, pt
        if abs(a_hi - a_lo) < 1e-14 * max(1.0, abs(a_lo)):
            break
    if f_lo < f0:
        return a_lo, f_lo, g_lo, x_lo
    return None


def strong_wolfe(phi, f0, g0, c1, c2, alpha1=1.0, alpha_max=1e6, max_iter=30):
    """Step length satisfying the strong Wolfe conditions along a descent direction.

    ``phi(alpha)`` returns ``(f, directional derivative, payload)``. Returns
    ``(alpha, f, dphi, payload)`` or ``None`` when no acceptable step is found.
    """
    a_prev, f_prev, g_prev, x_prev = 0.0, f0, g0, None
    a = alpha1
    for i in range(max_iter):
        f, g, pt = phi(a)
        if f > f0 + c1 * a * g0 or (i > 0 and f >= f_prev):
            return _zoom(phi, (a_prev, f_prev, g_prev, x_prev), (a, f, g, pt), f0, g0, c1, c2)
        if abs(g) <= -c2 * g0:
            return a, f, g, pt
        if g >= 0:
            return _zoom(phi, (a, f, g, pt), (a_prev, f_prev, g_prev, x_prev), f0, g0, c1, c2)
        a_prev, f_prev, g_prev, x_prev = a, f, g, pt
        a = min(2 * a, alpha_max)
    if f_prev < f0:
        return a_prev, f_prev, g_prev, x_prev
    return None


def bfgs_minimize(
    objective: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0,
    config: OptimizerConfig | None = None,
    *,
    max_iter: int | None = None,
    target_value: float | None = None,
) -> BFGSResult:
    """Quasi-Newton minimization with inverse-Hessian updates and strong-Wolfe steps.

    Stops when the gradient norm falls under ``config.grad_tol``, the value
    reaches ``target_value``, the iteration cap is hit, or the line search
    fails. The inverse Hessian is reset whenever the curvature ``s.y`` is not
    safely positive relative to ``|s| |y|``.
    """
    cfg = config or OptimizerConfig()
    max_iter = cfg.bfgs_max_iter if max_iter is None else max_iter
    n_eval = 0

    def evaluate(x):
        nonlocal n_eval
        n_eval += 1
        f, g = objective(x)
        f = float(f)
        if not math.isfinite(f) or not np.all(np.isfinite(g)):
            raise NonFiniteObjective(x, f)
        return f, np.asarray(g, dtype=np.float64)

    x = np.array(x0, dtype=np.float64, copy=True)
    f, g = evaluate(x)
    n = len(x)
    hinv = np.eye(n)
    scaled = False
    it = 0
    message = "iteration limit"
    while True:
        if target_value is not None and f <= target_value:
            message = "target value reached"
            break
        if np.linalg.norm(g) < cfg.grad_tol:
            message = "gradient tolerance reached"
            break
        if it >= max_iter:
            break
        p = -(hinv @ g)
        gp = float(g @ p)
        if gp >= 0:  # not a descent direction: fall back to steepest descent
            hinv = np.eye(n)
            scaled = False
            p = -g
            gp = float(g @ p)

        def phi(a, x=x, p=p):
            xa = x + a * p
            fa, ga = evaluate(xa)
            return fa, float(ga @ p), (xa, ga)

        alpha1 = 1.0 if scaled else min(1.0, 1.0 / max(np.linalg.norm(g), 1e-300))
        ls = strong_wolfe(phi, f, gp, cfg.wolfe_c1, cfg.wolfe_c2, alpha1=alpha1)
        if ls is None:
            message = "line search failed"
            break
        _, f_new, _, (x_new, g_new) = ls
        s = x_new - x
        y = g_new - g
        x, f, g = x_new, f_new, g_new
        it += 1
        sy = float(s @ y)
        if sy <= 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            hinv = np.eye(n)
            scaled = False
            continue
        if not scaled:
            hinv = np.eye(n) * (sy / float(y @ y))
            scaled = True
        rho = 1.0 / sy
        hy = hinv @ y
        hinv += (rho * rho * float(y @ hy) + rho) * np.outer(s, s) - rho * (np.outer(hy, s) + np.outer(s, hy))
    return BFGSResult(x, f, g, it, n_eval, message)


# --- block sweeps -----------------------------------------------------------------


@dataclass
class SweepState:
    params: np.ndarray
    best_value: float
    sweep_count: int = 0
    value_history: list = field(default_factory=list)
    restarts_used: int = 0
    converged: bool = False
    timed_out: bool = False
    evaluations: int = 0


class _StageProblem:
    """Kernel-backed f_sub for one stage acting on ``u``."""

    def __init__(self, stage: Stage, u):
        self.stage = stage
        self.ops = stage_oplist(stage)
        self.nl = len(self.ops)
        self.u = np.ascontiguousarray(u, dtype=np.complex128)
        self.dim = self.u.shape[0]
        if self.dim != 2**stage.n_qubits:
            raise ValueError(f"stage on {stage.n_qubits} qubits needs a {2**stage.n_qubits}-dim unitary")
        self.eye = np.eye(self.dim, dtype=np.complex128)
        self.evaluations = 0

    def value(self, local) -> float:
        return kernels.circuit_cost(self.u, self.ops, local, kernels.FSUB, want_grad=False)[0]

    def product(self, local, k0, k1, u=None):
        """Layers [k0, k1) applied to ``u`` (identity by default)."""
        return kernels.apply_ops(self.eye if u is None else u, self.ops[k0:k1], local)

    def block_objective(self, prefix, left, k0, k1):
        block = self.ops[k0:k1].shifted(-4 * k0)

        def objective(x):
            self.evaluations += 1
            return kernels.circuit_cost(prefix, block, x, kernels.FSUB, left=left)

        return objective

    def optimize(self, local, k0, k1, prefix, left, config, target):
        objective = self.block_objective(prefix, left, k0, k1)
        res = bfgs_minimize(
            objective,
            local[4 * k0 : 4 * k1],
            config,
            max_iter=config.bfgs_max_iter * (k1 - k0),
            target_value=target,
        )
        local[4 * k0 : 4 * k1] = res.x
        return res.value


def _block_starts(nl, size):
    return [(k, min(k + size, nl)) for k in range(0, nl, size)]


def _sweep_once(prob: _StageProblem, local, size, config, rng, target) -> float:
    blocks = _block_starts(prob.nl, size)
    if config.shuffle and len(blocks) > 1:
        blocks = [blocks[i] for i in rng.permutation(len(blocks))]
        value = prob.value(local)
        for k0, k1 in blocks:
            prefix = prob.product(local, 0, k0, prob.u)
            left = prob.product(local, k1, prob.nl) if k1 < prob.nl else None
            value = prob.optimize(local, k0, k1, prefix, left, config, target)
        return value
    prefix = prob.u
    k0, k1 = blocks[0]
    left = prob.product(local, k1, prob.nl) if k1 < prob.nl else None
    value = prob.value(local)
    for idx, (k0, k1) in enumerate(blocks):
        value = prob.optimize(local, k0, k1, prefix, left, config, target)
        if idx + 1 == len(blocks):
            break
        if value <= target:
            break
        prefix = prob.product(local, k0, k1, prefix)
        n0, n1 = blocks[idx + 1]
        left = left @ prob.product(local, n0, n1).conj().T if n1 < prob.nl else None
        if n1 == prob.nl:
            left = None
    return value


def optimize_block(
    structure: GateStructure,
    params,
    block: tuple[int, int],
    u_initial,
    config: OptimizerConfig | None = None,
    stage: int | Stage = 0,
) -> np.ndarray:
    """BFGS on the layers ``block = (first, stop)`` of a stage; all other parameters frozen.

    Layer indices are relative to the stage. Returns a new global parameter vector.
    """
    cfg = config or OptimizerConfig()
    st = stage if isinstance(stage, Stage) else structure.stages[stage]
    k0, k1 = block
    if not 0 <= k0 < k1 <= len(st.layers):
        raise ValueError(f"block {block} outside stage of {len(st.layers)} layers")
    out = np.array(params, dtype=np.float64, copy=True)
    sl = st.param_slice
    local = out[sl].copy()
    prob = _StageProblem(st, u_initial)
    prefix = prob.product(local, 0, k0, prob.u)
    left = prob.product(local, k1, prob.nl) if k1 < prob.nl else None
    prob.optimize(local, k0, k1, prefix, left, cfg, None)
    out[sl] = local
    return out


def _random_params(rng, size):
    return rng.uniform(0.0, TWO_PI, size)


def sweep_stage(
    stage: Stage,
    u_initial,
    config: OptimizerConfig | None = None,
    rng: np.random.Generator | None = None,
    init=None,
    deadline: float | None = None,
) -> SweepState:
    """Block sweeps on one stage; ``params`` in the result are the stage's own 4*layers vector.

    ``init`` gives starting stage parameters; otherwise they are uniform in
    [0, 2pi) (zeros with ``config.zero_init``). ``deadline`` is a
    ``time.monotonic()`` value after which the sweep stops and reports
    ``timed_out``. Non-convergence is reported, never raised.
    """
    cfg = config or OptimizerConfig()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    prob = _StageProblem(stage, u_initial)
    nl = prob.nl
    if init is not None:
        local = np.array(init, dtype=np.float64, copy=True)
        if local.shape != (4 * nl,):
            raise ValueError(f"stage needs {4 * nl} parameters, got {local.shape}")
    elif cfg.zero_init:
        local = np.zeros(4 * nl)
    else:
        local = _random_params(rng, 4 * nl)
    eps = cfg.epsilon0

    current = prob.value(local)
    best, best_local = current, local.copy()
    state = SweepState(params=best_local, best_value=best)
    size = min(cfg.block_size_layers, nl)
    stall = 0
    while best > eps and state.sweep_count < cfg.max_sweeps:
        if deadline is not None and time.monotonic() > deadline:
            state.timed_out = True
            break
        before = current
        current = _sweep_once(prob, local, size, cfg, rng, eps)
        state.sweep_count += 1
        if current < best:
            best, best_local = current, local.copy()
        state.value_history.append((state.sweep_count, best))
        if best <= eps:
            break
        rel = (before - current) / before if before > 0 else 0.0
        restart = False
        if cfg.escalate and size < nl:
            if rel < cfg.escalate_tol:
                size = min(nl, 2 * size)
        elif cfg.escalate:
            # whole-stage pass that barely moved: local minimum
            restart = rel < _STALL_REL
        else:
            stall = stall + 1 if rel < _STALL_REL else 0
            restart = stall >= cfg.restart_patience
        if restart:
            if state.restarts_used >= cfg.max_restarts:
                break
            state.restarts_used += 1
            local = _random_params(rng, 4 * nl)
            current = prob.value(local)
            size = min(cfg.block_size_layers, nl)
            stall = 0
    state.params = best_local
    state.best_value = best
    state.converged = best <= eps
    state.evaluations = prob.evaluations
    return state


def sequential_sweep(
    structure: GateStructure,
    stage: int | Stage,
    u_initial,
    config: OptimizerConfig | None = None,
    rng: np.random.Generator | None = None,
    params=None,
    deadline: float | None = None,
) -> SweepState:
    """Drive a stage's f_sub toward zero by cyclic block optimization.

    Same as :func:`sweep_stage` but in terms of the structure's global
    parameter vector: ``params`` (optional) seeds the stage slice and the
    returned ``params`` is the full vector with that slice replaced.
    """
    st = stage if isinstance(stage, Stage) else structure.stages[stage]
    sl = st.param_slice
    full = np.zeros(structure.total_params) if params is None else np.array(params, dtype=np.float64, copy=True)
    init = None if params is None else full[sl]
    state = sweep_stage(st, u_initial, config, rng, init=init, deadline=deadline)
    full[sl] = state.params
    state.params = full
    return state
