"""Command-line entry point: ``unitary-synth {decompose,sweep,random,verify,bound}``.

Exit codes: 0 success, 1 bad input or other error, 2 the run finished but
did not meet its target (non-converged decomposition, verify above threshold).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .decomposer import DecompositionConfig, decompose, verify
from .gates import GateKind
from .numerics import dagger, haar_random_unitary, make_rng, n_qubits_of, read_umat, spectral_error, write_umat, format_umat
from .optimizer import OptimizerConfig, sweep_stage
from .qasm import QasmError, export_qasm, qasm_matrix
from .structure import (
    assemble_structure,
    cnot_lower_bound,
    default_layer_counts,
    load_topology,
    topology_class_of,
    validate_structure,
)

THREADS_ENV = "UNITARY_SYNTH_THREADS"
CSV_COLUMNS = ("n", "layers", "eps_mean", "eps_std", "seconds_mean")


class CliError(Exception):
    pass


def _parse_layers(text: str) -> list[int]:
    try:
        out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise CliError(f"--layers expects comma-separated integers, got {text!r}") from exc
    if not out or any(c < 1 for c in out):
        raise CliError("--layers entries must be positive")
    return out


def _parse_range(text: str) -> list[int]:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise CliError("--layer-range expects MIN:MAX or MIN:MAX:STEP")
    try:
        lo, hi = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 1
    except ValueError as exc:
        raise CliError(f"bad --layer-range {text!r}") from exc
    if step < 1 or lo < 1 or hi < lo:
        raise CliError(f"bad --layer-range {text!r}")
    return list(range(lo, hi + 1, step))


def resolve_jobs(flag: int | None) -> int:
    env = os.environ.get(THREADS_ENV, "").strip()
    if env:
        try:
            jobs = int(env)
        except ValueError as exc:
            raise CliError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    else:
        jobs = 1 if flag is None else flag
    if jobs < 1:
        raise CliError("job count must be >= 1")
    return jobs


def _optimizer_config(args) -> OptimizerConfig:
    return OptimizerConfig(epsilon0=args.epsilon0, seed=args.seed)


def _topology(args):
    return load_topology(args.topology) if args.topology else None


def _fmt_float(x: float | None) -> str:
    return "" if x is None or not math.isfinite(x) else repr(float(x))


# --- decompose -----------------------------------------------------------------------


def cmd_decompose(args) -> int:
    u = read_umat(args.input)
    target = dagger(u) if args.invert_input else u
    n = n_qubits_of(u)
    topo = _topology(args)
    cfg = DecompositionConfig(
        optimizer=_optimizer_config(args),
        layer_counts=tuple(_parse_layers(args.layers)) if args.layers else None,
        topology=topo,
        entangler_kind=GateKind.parse(args.entangler),
        fine_tune=not args.no_fine_tune,
        time_limit_s=args.timeout_s,
    )
    result = decompose(target, cfg, make_rng(args.seed))
    stem = Path(args.input).with_suffix("")
    qasm_path = Path(args.qasm) if args.qasm else stem.with_suffix(".qasm")
    report_path = Path(args.report) if args.report else stem.with_suffix(".json")
    qasm_path.write_text(export_qasm(result.structure, result.params, args.strict_qelib1))
    report = {
        "input": str(args.input),
        "n_qubits": n,
        "cnot_count": result.cnot_count,
        "layer_counts": [len(s.layers) for s in result.structure.stages],
        "spectral_error": result.spectral_error,
        "fidelity_cost": result.fidelity_cost,
        "fidelity_cost_before_fine_tune": result.fidelity_before_fine_tune,
        "converged": result.converged,
        "stages": [
            {
                "target": s.target,
                "layers": s.layers_used,
                "f_sub": s.final_f_sub,
                "converged": s.converged,
                "sweeps": s.sweeps,
                "restarts": s.restarts,
                "timed_out": s.timed_out,
            }
            for s in result.stages
        ],
        "topology_violations": validate_structure(result.structure, result.structure.topology),
        "wall_time": None if args.no_timing else result.wall_time,
        "seed": args.seed,
        "config": {
            "entangler": cfg.entangler_kind.value,
            "topology": None if topo is None else topo.to_json(),
            "fine_tune": cfg.fine_tune,
            "fine_tune_max_iter": cfg.fine_tune_max_iter,
            "fine_tune_grad_tol": cfg.fine_tune_grad_tol,
            "invert_input": args.invert_input,
            "strict_qelib1": args.strict_qelib1,
            "timeout_s": args.timeout_s,
            "optimizer": asdict(cfg.optimizer),
        },
        "qasm": str(qasm_path),
        "params": [float(x) for x in result.params],
    }
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    status = "converged" if result.converged else "NOT converged"
    print(f"{status}: {result.cnot_count} two-qubit gates, spectral error {result.spectral_error:.3e}")
    print(f"wrote {qasm_path} and {report_path}")
    return 0 if result.converged else 2


# --- sweep ---------------------------------------------------------------------------


def _sweep_trial(task):
    """One (layers, trial) point: best f_sub of the first stage on a fresh Haar unitary."""
    n, layers, trial, seed, topo, kind, eps, timeout = task
    counts = [layers] + (default_layer_counts(n, topology_class_of(topo))[1:] if n > 2 else [])
    structure = assemble_structure(n, topo, counts, kind)
    u = haar_random_unitary(n, np.random.default_rng([seed, trial]))
    rng = np.random.default_rng([seed, trial, layers])
    cfg = OptimizerConfig(epsilon0=eps, seed=seed)
    t0 = time.monotonic()
    deadline = None if timeout is None else t0 + timeout
    state = sweep_stage(structure.stages[0], u, cfg, rng, deadline=deadline)
    return layers, trial, float(state.best_value), time.monotonic() - t0, state.timed_out


def run_sweep(n, layer_list, trials, seed, topo=None, kind=GateKind.CNOT, epsilon0=1e-8, jobs=1, timeout_s=600.0):
    """Rows ``(n, layers, eps_mean, eps_std, seconds_mean)``; timed-out trials are left out."""
    if trials < 1:
        raise CliError("trials must be >= 1")
    if n < 2:
        raise CliError("sweeps need at least 2 qubits")
    for layers in layer_list:  # reject counts shorter than one period before any work
        assemble_structure(n, topo, [layers] + (default_layer_counts(n, topology_class_of(topo))[1:] if n > 2 else []), kind)
    tasks = [(n, L, t, seed, topo, kind, epsilon0, timeout_s) for L in layer_list for t in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_trial, tasks))
    else:
        results = [_sweep_trial(t) for t in tasks]
    rows = []
    for L in layer_list:
        pts = [r for r in results if r[0] == L and not r[4]]
        if pts:
            eps = np.array([r[2] for r in pts])
            secs = np.array([r[3] for r in pts])
            rows.append((n, L, float(eps.mean()), float(eps.std()), float(secs.mean()), len(results) // len(layer_list) - len(pts)))
        else:
            rows.append((n, L, None, None, None, trials))
    return rows


def format_sweep_csv(rows, timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for n, L, mean, std, secs, _ in rows:
        w.writerow([n, L, _fmt_float(mean), _fmt_float(std), _fmt_float(secs) if timing else ""])
    return buf.getvalue()


def cmd_sweep(args) -> int:
    if args.layers:
        layer_list = _parse_layers(args.layers)
    elif args.layer_range:
        layer_list = _parse_range(args.layer_range)
    else:
        raise CliError("sweep needs --layers or --layer-range")
    rows = run_sweep(
        args.n,
        layer_list,
        args.trials,
        args.seed,
        _topology(args),
        GateKind.parse(args.entangler),
        args.epsilon0,
        resolve_jobs(args.jobs),
        args.timeout_s,
    )
    text = format_sweep_csv(rows, timing=not args.no_timing)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    for row in rows:
        if row[5]:
            print(f"layers {row[1]}: {row[5]} trial(s) timed out", file=sys.stderr)
    return 0


# --- random / verify / bound -------------------------------------------------------------


def cmd_random(args) -> int:
    if not 1 <= args.n <= 6:
        raise CliError("random supports 1 to 6 qubits")
    u = haar_random_unitary(args.n, make_rng(args.seed))
    if args.output:
        write_umat(args.output, u)
    else:
        sys.stdout.write(format_umat(u))
    return 0


def cmd_verify(args) -> int:
    u = read_umat(args.umat)
    circuit = qasm_matrix(Path(args.qasm).read_text())
    if circuit.shape != u.shape:
        raise CliError(f"circuit acts on {n_qubits_of(circuit)} qubits, unitary on {n_qubits_of(u)}")
    # the circuit realizes the inverse of its input; with --invert-input the input was u^dag
    expected = u if args.invert_input else dagger(u)
    err = spectral_error(expected, circuit)
    ok = err <= args.threshold
    print(json.dumps({"spectral_error": err, "threshold": args.threshold, "passed": ok}, sort_keys=True))
    return 0 if ok else 2


def cmd_bound(args) -> int:
    if args.n < 1:
        raise CliError("n must be >= 1")
    print(cnot_lower_bound(args.n))
    return 0


# --- parser --------------------------------------------------------------------------


def _add_common(p, timeout_default):
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--topology", help="topology JSON path or preset name (qx2, heavy_hex4)")
    p.add_argument("--entangler", choices=["cnot", "cz", "ch"], default="cnot")
    p.add_argument("--epsilon0", type=float, default=1e-8, help="f_sub target per stage")
    p.add_argument("--jobs", type=int, default=None, help=f"parallel workers (overridden by {THREADS_ENV})")
    p.add_argument("--timeout-s", type=float, default=timeout_default, help="wall-time cap in seconds")
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock figures so output is reproducible byte for byte")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unitary-synth", description="Decompose unitaries into U3 + two-qubit gate circuits.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="decompose a .umat unitary into OpenQASM")
    p.add_argument("input", help=".umat file")
    p.add_argument("--layers", help="layers per stage, comma separated (top qubit first)")
    p.add_argument("--no-fine-tune", action="store_true")
    p.add_argument("--invert-input", action="store_true", help="emit a circuit for u itself instead of u^dag")
    p.add_argument("--strict-qelib1", action="store_true", help="expand ch into qelib1 primitives")
    p.add_argument("--qasm", help="output .qasm path (default: next to the input)")
    p.add_argument("--report", help="output .json report path (default: next to the input)")
    _add_common(p, None)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("sweep", help="first-stage f_sub versus layer count, averaged over Haar trials")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--layers", help="explicit layer counts, comma separated")
    p.add_argument("--layer-range", help="MIN:MAX[:STEP] inclusive")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--output", "-o", help="CSV path (default stdout)")
    _add_common(p, 600.0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("random", help="write a Haar-random unitary")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", help=".umat path (default stdout)")
    p.set_defaults(func=cmd_random)

    p = sub.add_parser("verify", help="check a QASM circuit against a .umat unitary")
    p.add_argument("qasm")
    p.add_argument("umat")
    p.add_argument("--threshold", type=float, default=1e-3)
    p.add_argument("--invert-input", action="store_true", help="the circuit should realize u rather than u^dag")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bound", help="print the two-qubit gate lower bound for n qubits")
    p.add_argument("n", type=int)
    p.set_defaults(func=cmd_bound)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, QasmError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
