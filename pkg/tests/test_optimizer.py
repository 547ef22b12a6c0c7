import numpy as np
import pytest

from unitary_synth.cost import f_sub, stage_matrix
from unitary_synth.gates import GateKind, two_qubit_kernel
from unitary_synth.numerics import haar_random_unitary, make_rng
from unitary_synth.optimizer import (
    NonFiniteObjective,
    OptimizerConfig,
    bfgs_minimize,
    optimize_block,
    sequential_sweep,
    strong_wolfe,
    sweep_stage,
)
from unitary_synth.structure import assemble_structure


def quad(x):
    return float((x[0] - 3) ** 2), np.array([2 * (x[0] - 3)])


def rosen(x):
    a, b = x
    f = (1 - a) ** 2 + 100 * (b - a * a) ** 2
    g = np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])
    return f, g


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(wolfe_c1=0.9, wolfe_c2=0.1)
    with pytest.raises(ValueError):
        OptimizerConfig(wolfe_c2=1.0)
    with pytest.raises(ValueError):
        OptimizerConfig(epsilon0=0)
    with pytest.raises(ValueError):
        OptimizerConfig(block_size_layers=0)


def test_bfgs_quadratic():
    res = bfgs_minimize(quad, [0.0])
    assert abs(res.x[0] - 3) <= 1e-8
    assert res.iterations <= 10


def test_bfgs_rosenbrock():
    res = bfgs_minimize(rosen, [-1.2, 1.0], max_iter=500)
    assert np.abs(res.x - 1).max() <= 1e-6


def test_bfgs_stationary_start():
    res = bfgs_minimize(quad, [3.0])
    assert res.iterations == 0 and res.x[0] == 3.0


def test_bfgs_never_worse(rng):
    def bumpy(x):
        return float(np.sum(np.sin(3 * x) + 0.1 * x * x)), 3 * np.cos(3 * x) + 0.2 * x

    for _ in range(20):
        x0 = rng.uniform(-5, 5, 4)
        assert bfgs_minimize(bumpy, x0).value <= bumpy(x0)[0] + 1e-12


def test_bfgs_target_value_stop():
    res = bfgs_minimize(rosen, [-1.2, 1.0], max_iter=500, target_value=1e-2)
    assert res.value <= 1e-2 and res.message == "target value reached"


def test_bfgs_nonfinite():
    with pytest.raises(NonFiniteObjective) as exc:
        bfgs_minimize(lambda x: (float("nan"), np.zeros(1)), [0.5])
    assert exc.value.x[0] == 0.5


def test_strong_wolfe_conditions():
    f0, g0 = rosen(np.array([-1.2, 1.0]))
    x = np.array([-1.2, 1.0])
    p = -g0 / np.linalg.norm(g0)

    def phi(a):
        f, g = rosen(x + a * p)
        return f, float(g @ p), None

    a, f, d, _ = strong_wolfe(phi, f0, float(g0 @ p), 1e-4, 0.9)
    assert f <= f0 + 1e-4 * a * float(g0 @ p)
    assert abs(d) <= 0.9 * abs(float(g0 @ p))


def stage_f(stage, params, u):
    return f_sub(stage_matrix(stage, params) @ u)


def test_optimize_block_freezes_others(rng):
    s = assemble_structure(3)
    u = haar_random_unitary(3, rng)
    p = rng.uniform(0, 2 * np.pi, s.total_params)
    q = optimize_block(s, p, (3, 5), u)
    mask = np.ones(len(p), bool)
    mask[12:20] = False
    assert np.array_equal(p[mask], q[mask])
    assert stage_f(s.stages[0], q, u) <= stage_f(s.stages[0], p, u)


def test_optimize_block_separable_unchanged():
    s = assemble_structure(2, None, [3])
    # zero angles give CNOT^3; undo it so the stage output is exactly separable
    u = two_qubit_kernel(GateKind.CNOT)
    p = np.zeros(s.total_params)
    q = optimize_block(s, p, (0, 1), u)
    assert np.abs(q - p).max() <= 1e-10


def test_optimize_block_bad_range():
    s = assemble_structure(3)
    with pytest.raises(ValueError):
        optimize_block(s, np.zeros(s.total_params), (5, 40), np.eye(8))


def test_first_block_decreases_most_seeds():
    s = assemble_structure(3)
    st = s.stages[0]
    wins = 0
    for seed in range(100):
        rng = make_rng(seed)
        u = haar_random_unitary(3, rng)
        p = rng.uniform(0, 2 * np.pi, s.total_params)
        q = optimize_block(s, p, (0, 1), u)
        wins += stage_f(st, q, u) < stage_f(st, p, u)
    assert wins >= 95


def test_identity_zero_init_converges_immediately():
    # 12 layers with zero angles multiply to the identity, already separable
    s = assemble_structure(3, None, [12, 3])
    state = sequential_sweep(s, 0, np.eye(8), OptimizerConfig(zero_init=True))
    assert state.converged and state.sweep_count <= 2


def test_sweep_params_layout(rng):
    s = assemble_structure(3)
    u = haar_random_unitary(3, rng)
    start = rng.uniform(0, 1, s.total_params)
    state = sequential_sweep(s, 0, u, OptimizerConfig(max_sweeps=3), make_rng(0), params=start)
    assert state.params.shape == (s.total_params,)
    assert np.array_equal(state.params[48:], start[48:])
    assert state.best_value == pytest.approx(stage_f(s.stages[0], state.params, u), rel=1e-9)


def test_sweep_history_monotone():
    s = assemble_structure(3)
    for seed in range(5):
        rng = make_rng(seed)
        u = haar_random_unitary(3, rng)
        state = sequential_sweep(s, 0, u, OptimizerConfig(max_sweeps=15), rng)
        vals = [v for _, v in state.value_history]
        assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_sweep_converges_above_bound():
    s = assemble_structure(3)
    hits = 0
    for seed in range(10):
        rng = make_rng(seed)
        state = sequential_sweep(s, 0, haar_random_unitary(3, rng), OptimizerConfig(), rng)
        hits += state.best_value <= 1e-8
    assert hits >= 8


def test_sweep_fails_well_below_bound():
    s = assemble_structure(3, None, [8, 3])
    for seed in range(3):
        rng = make_rng(seed)
        state = sequential_sweep(s, 0, haar_random_unitary(3, rng), OptimizerConfig(max_restarts=1), rng)
        assert state.best_value > 1e-3 and not state.converged


def test_sweep_without_escalation_uses_patience():
    s = assemble_structure(2, None, [3])
    rng = make_rng(3)
    cfg = OptimizerConfig(escalate=False, restart_patience=5, max_sweeps=400)
    state = sequential_sweep(s, 0, haar_random_unitary(2, rng), cfg, rng)
    assert state.best_value <= 1e-8


def test_sweep_shuffle(rng):
    s = assemble_structure(3)
    u = haar_random_unitary(3, rng)
    state = sequential_sweep(s, 0, u, OptimizerConfig(shuffle=True), make_rng(1))
    assert state.best_value <= 1e-8


def test_sweep_deterministic():
    s = assemble_structure(3)
    u = haar_random_unitary(3, make_rng(9))
    a = sequential_sweep(s, 0, u, OptimizerConfig(), make_rng(2))
    b = sequential_sweep(s, 0, u, OptimizerConfig(), make_rng(2))
    assert np.array_equal(a.params, b.params)


def test_sweep_deadline(rng):
    s = assemble_structure(3, None, [9, 3])
    state = sweep_stage(s.stages[0], haar_random_unitary(3, rng), OptimizerConfig(), rng, deadline=0.0)
    assert state.timed_out and state.sweep_count == 0
