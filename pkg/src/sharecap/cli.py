"""Command-line front end: ``sharecap solve | classify | sweep | validate``.

Instances and solutions are JSON; sweeps are CSV. Complex matrices are
encoded row-major as ``[re, im]`` pairs, either nested by rows or as one
flat list of ``m*m`` pairs. Floats are written with ``repr`` (shortest
string that reads back to the same double) in JSON and ``%.17g`` in CSV.

Exit codes: 0 ok, 1 parse or usage error, 2 degenerate input or an
uncertified solution, 3 sweep with failed points, 4 oracle gap above
tolerance.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import jsonschema
import numpy as np

from .linalg import as_hermitian, eigh
from .model import (
    DualVariables,
    KktResiduals,
    ProblemInstance,
    Solution,
    User,
    aggregate_total_ipc,
    gram_from_channel,
    interference_power,
    random_instance,
)
from .oracle import compare, oracle_bruteforce_2x2, oracle_projected_gradient
from .regimes import classify
from .solver import solve

log = logging.getLogger("sharecap")

EXIT_OK, EXIT_PARSE, EXIT_DEGENERATE, EXIT_PARTIAL, EXIT_GAP = 0, 1, 2, 3, 4

HERMITIAN_TOL = 1e-6

_pair = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_matrix = {
    "type": "array",
    "minItems": 1,
    "items": {"anyOf": [_pair, {"type": "array", "minItems": 1, "items": _pair}]},
}

INSTANCE_SCHEMA = {
    "type": "object",
    "required": ["m", "P_T"],
    "properties": {
        "m": {"type": "integer", "minimum": 1},
        "W1": _matrix,
        "H1": _matrix,
        "P_T": {"type": "number", "exclusiveMinimum": 0},
        "users": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["P_I"],
                "properties": {"W2": _matrix, "H2": _matrix, "P_I": {"type": "number", "minimum": 0}},
                "oneOf": [{"required": ["W2"]}, {"required": ["H2"]}],
                "additionalProperties": False,
            },
        },
        "total_ipc": {"type": "number", "minimum": 0},
        "metadata": {"type": "object"},
    },
    "oneOf": [{"required": ["W1"]}, {"required": ["H1"]}],
    "additionalProperties": False,
}

_kkt = {
    "type": "object",
    "required": ["stationarity", "comp_slack_tpc", "comp_slack_ipc", "dual_feas", "primal_feas"],
    "properties": {
        "stationarity": {"type": "number"},
        "comp_slack_tpc": {"type": "number"},
        "comp_slack_ipc": {"type": "array", "items": {"type": "number"}},
        "dual_feas": {"type": "number"},
        "primal_feas": {"type": "number"},
    },
}

SOLUTION_SCHEMA = {
    "type": "object",
    "required": [
        "capacity_nats", "capacity_bits", "R", "duals",
        "active_constraints", "kkt_residuals", "method", "regime",
    ],
    "properties": {
        "capacity_nats": {"type": "number"},
        "capacity_bits": {"type": "number"},
        "R": _matrix,
        "duals": {
            "type": "object",
            "required": ["mu1", "mu2"],
            "properties": {
                "mu1": {"type": "number", "minimum": 0},
                "mu2": {"type": "array", "items": {"type": "number", "minimum": 0}},
            },
        },
        "active_constraints": {
            "type": "object",
            "required": ["tpc", "ipc"],
            "properties": {"tpc": {"type": "boolean"}, "ipc": {"type": "array", "items": {"type": "boolean"}}},
        },
        "kkt_residuals": _kkt,
        "method": {"type": "string"},
        "regime": {"type": "object"},
    },
}


class InputError(Exception):
    """Unreadable or schema-invalid input; maps to exit code 1."""


# --------------------------------------------------------------------------
# encoding


def decode_matrix(data, rows: int | None, cols: int, field: str) -> np.ndarray:
    """Turn nested or flat ``[re, im]`` pairs into a complex array.

    ``rows=None`` lets a nested encoding fix the row count (channel
    matrices); a flat list then has to be a multiple of ``cols`` long.
    """
    nested = isinstance(data[0], list) and len(data[0]) > 0 and isinstance(data[0][0], list)
    if nested:
        if not all(isinstance(r, list) and r and isinstance(r[0], list) for r in data):
            raise InputError(f"{field}: mixes nested rows and bare pairs")
        shape = (len(data), len(data[0]))
        if any(len(r) != shape[1] for r in data):
            raise InputError(f"{field}: ragged rows")
        flat = [p for r in data for p in r]
    else:
        if any(isinstance(p[0], list) for p in data):
            raise InputError(f"{field}: mixes nested rows and bare pairs")
        flat = data
        if len(flat) % cols:
            raise InputError(f"{field}: {len(flat)} entries is not a multiple of {cols}")
        shape = (len(flat) // cols, cols)
    if shape[1] != cols or (rows is not None and shape[0] != rows):
        want = f"{rows}x{cols}" if rows is not None else f"n x {cols}"
        raise InputError(f"{field}: shape {shape[0]}x{shape[1]}, expected {want}")
    arr = np.array([complex(re, im) for re, im in flat], dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{field}: non-finite entry")
    return arr.reshape(shape)


def encode_matrix(A: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(A)]


def _gram(entry: dict, key_w: str, key_h: str, m: int, field: str) -> np.ndarray:
    if key_w in entry:
        W = decode_matrix(entry[key_w], m, m, f"{field}.{key_w}")
        dev = float(np.max(np.abs(W - W.conj().T)))
        if dev > HERMITIAN_TOL:
            raise InputError(f"{field}.{key_w}: not Hermitian (max |W - W^H| = {dev:.3g})")
        return as_hermitian(W)
    return gram_from_channel(decode_matrix(entry[key_h], None, m, f"{field}.{key_h}"))


def parse_instance(doc: dict) -> ProblemInstance:
    """Validate an instance document and build the problem it describes."""
    try:
        jsonschema.validate(doc, INSTANCE_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"schema error at {where}: {exc.message}") from None
    m = doc["m"]
    W1 = _gram(doc, "W1", "H1", m, "W1" if "W1" in doc else "H1")
    users = tuple(
        User(_gram(u, "W2", "H2", m, f"users/{i}"), u["P_I"]) for i, u in enumerate(doc.get("users", []))
    )
    instance = ProblemInstance(W1, doc["P_T"], users)
    if "total_ipc" in doc:
        instance = aggregate_total_ipc(instance, doc["total_ipc"])
    return instance


def load_instance(path: str) -> ProblemInstance:
    return parse_instance(_read_json(path))


def instance_to_dict(instance: ProblemInstance, metadata: dict | None = None) -> dict:
    doc = {
        "m": instance.m,
        "W1": encode_matrix(instance.W1),
        "P_T": instance.P_T,
        "users": [{"W2": encode_matrix(u.W2), "P_I": u.P_I} for u in instance.users],
    }
    if metadata:
        doc["metadata"] = metadata
    return doc


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def solution_to_dict(instance: ProblemInstance, sol: Solution) -> dict:
    kkt = sol.kkt
    return {
        "capacity_nats": sol.capacity_nats,
        "capacity_bits": sol.capacity_bits,
        "R": encode_matrix(sol.R),
        "duals": {"mu1": sol.duals.mu1, "mu2": list(sol.duals.mu2)},
        "active_constraints": {"tpc": bool(sol.active[0]), "ipc": [bool(a) for a in sol.active[1:]]},
        "kkt_residuals": {
            "stationarity": kkt.stationarity,
            "comp_slack_tpc": kkt.comp_slack_tpc,
            "comp_slack_ipc": list(kkt.comp_slack_ipc),
            "dual_feas": kkt.dual_feas,
            "primal_feas": kkt.primal_feas,
        },
        "method": sol.method,
        "regime": classify(instance).to_dict(),
    }


def solution_from_dict(instance: ProblemInstance, doc: dict) -> Solution:
    """Rebuild a :class:`Solution` from its JSON form.

    The stored residuals are kept as written; call
    :func:`~sharecap.solver.kkt_residuals` to re-audit against the instance.
    """
    try:
        jsonschema.validate(doc, SOLUTION_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"schema error at {where}: {exc.message}") from None
    R = decode_matrix(doc["R"], instance.m, instance.m, "R")
    k = doc["kkt_residuals"]
    return Solution(
        R=R,
        capacity_nats=doc["capacity_nats"],
        duals=DualVariables(doc["duals"]["mu1"], tuple(doc["duals"]["mu2"])),
        active=(doc["active_constraints"]["tpc"], *doc["active_constraints"]["ipc"]),
        kkt=KktResiduals(
            k["stationarity"], k["comp_slack_tpc"], tuple(k["comp_slack_ipc"]), k["dual_feas"], k["primal_feas"]
        ),
        method=doc["method"],
    )


def _dump(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, allow_nan=False) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _diagnose(kind: str, **details) -> None:
    sys.stderr.write(json.dumps({"error": kind, **details}, default=str) + "\n")


# --------------------------------------------------------------------------
# commands


def _kkt_scale(instance: ProblemInstance) -> float:
    return max(1.0, float(eigh(instance.W1).values[0]))


def _run_solver(instance: ProblemInstance, method: str) -> Solution:
    if method == "oracle":
        return oracle_projected_gradient(instance)
    return solve(instance, method=method)


def cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    sol = _run_solver(instance, args.method)
    _dump(solution_to_dict(instance, sol), args.out)
    # the oracle carries no multipliers, so only its feasibility is audited
    worst = sol.kkt.primal_feas if args.method == "oracle" else sol.kkt.worst()
    bound = args.tol * _kkt_scale(instance)
    if worst > bound:
        _diagnose("uncertified", method=sol.method, kkt_worst=worst, bound=bound)
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_classify(args) -> int:
    instance = load_instance(args.instance)
    _dump(classify(instance).to_dict(), args.out)
    return EXIT_OK


def parse_grid(text: str, log_scale: bool) -> np.ndarray:
    """``start:stop:points``; with ``log_scale`` start and stop are exponents of 10."""
    parts = text.split(":")
    try:
        start, stop, n = float(parts[0]), float(parts[1]), int(parts[2])
    except (IndexError, ValueError):
        raise InputError(f"grid must look like start:stop:points, got {text!r}") from None
    if len(parts) != 3 or n < 1 or not (math.isfinite(start) and math.isfinite(stop)):
        raise InputError(f"bad grid {text!r}")
    return np.logspace(start, stop, n) if log_scale else np.linspace(start, stop, n)


def parse_param(text: str, K: int) -> int | None:
    """``pt`` gives ``None``; ``pi:k`` gives the 0-based user index."""
    if text == "pt":
        return None
    if text.startswith("pi:"):
        try:
            k = int(text[3:])
        except ValueError:
            k = 0
        if 1 <= k <= K:
            return k - 1
    raise InputError(f"--param must be pt or pi:k with 1 <= k <= {K}, got {text!r}")


def sweep_header(K: int) -> list[str]:
    return (
        ["param", "capacity_nats", "trace_R", "mu1"]
        + [f"interference_{k}" for k in range(1, K + 1)]
        + ["active_tpc"]
        + [f"active_ipc_{k}" for k in range(1, K + 1)]
        + ["method"]
    )


def _fmt(x: float) -> str:
    return "%.17g" % x


def sweep_point(instance: ProblemInstance, user: int | None, value: float) -> tuple[list[str], bool]:
    """One CSV row for the instance with the swept cap set to ``value``."""
    K = instance.K
    try:
        inst = instance.with_power(value) if user is None else instance.with_cap(user, value)
        sol = solve(inst)
        if not np.isfinite(sol.capacity_nats):
            raise ArithmeticError("non-finite capacity")
    except Exception as exc:  # a failed point must not abort the sweep
        log.warning("sweep point %r failed: %s", value, exc)
        return [_fmt(value)] + ["nan"] * (3 + 2 * K + 1) + ["failed"], False
    row = [_fmt(value), _fmt(sol.capacity_nats), _fmt(float(np.real(np.trace(sol.R)))), _fmt(sol.duals.mu1)]
    row += [_fmt(interference_power(inst, sol.R, k)) for k in range(K)]
    row += [str(int(a)) for a in sol.active]
    row.append(sol.method)
    return row, True


def _sweep_task(job):
    return sweep_point(*job)


def cmd_sweep(args) -> int:
    instance = load_instance(args.instance)
    user = parse_param(args.param, instance.K)
    grid = parse_grid(args.grid, args.log)
    if user is None and np.any(grid <= 0):
        raise InputError("total power grid must be positive")
    if user is not None and np.any(grid < 0):
        raise InputError("interference cap grid must be nonnegative")
    jobs = [(instance, user, float(v)) for v in grid]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_task, jobs))
    else:
        results = [_sweep_task(j) for j in jobs]
    lines = [",".join(sweep_header(instance.K))] + [",".join(row) for row, _ in results]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    failed = sum(not ok for _, ok in results)
    if failed:
        _diagnose("partial_sweep", failed_points=failed, total_points=len(results))
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_validate(args) -> int:
    instance = load_instance(args.instance)
    if args.oracle == "grid" and instance.m != 2:
        raise InputError(f"grid oracle needs m = 2, instance has m = {instance.m}")
    sol = solve(instance)
    ref = oracle_bruteforce_2x2(instance) if args.oracle == "grid" else oracle_projected_gradient(instance)
    report = compare(sol, ref, args.tol, instance)
    doc = report.to_dict()
    doc.update(method_a=sol.method, method_b=ref.method, oracle=args.oracle)
    _dump(doc, args.out)
    return EXIT_OK if report.passed else EXIT_GAP


def cmd_random_instance(args) -> int:
    rng = np.random.default_rng(args.seed)
    inst = random_instance(rng, args.m, args.K)
    _dump(instance_to_dict(inst, {"seed": args.seed}), args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sharecap", description="MIMO capacity under power and interference caps.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="optimal covariance and capacity")
    s.add_argument("instance")
    s.add_argument("--method", choices=("auto", "general", "oracle"), default="auto")
    s.add_argument("--tol", type=float, default=1e-6, help="KKT certification threshold (relative)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("classify", help="regime report")
    c.add_argument("instance")
    c.add_argument("--out")
    c.set_defaults(func=cmd_classify)

    w = sub.add_parser("sweep", help="capacity over a grid of P_T or one P_I, as CSV")
    w.add_argument("instance")
    w.add_argument("--param", required=True, help="pt or pi:k (1-based user)")
    w.add_argument("--grid", required=True, help="start:stop:points")
    w.add_argument("--log", action="store_true", help="start and stop are base-10 exponents")
    w.add_argument("--out")
    w.add_argument("--jobs", type=int, default=1)
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate", help="compare the solver with an oracle")
    v.add_argument("instance")
    v.add_argument("--oracle", choices=("pg", "grid"), default="pg")
    v.add_argument("--tol", type=float, default=1e-4)
    v.add_argument("--out")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("random-instance", help="write a seeded random instance")
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--m", type=int, default=4)
    r.add_argument("--K", type=int, default=2)
    r.add_argument("--out")
    r.set_defaults(func=cmd_random_instance)
    return p


def _setup_logging() -> None:
    level = os.environ.get("SHARECAP_LOG", "error").upper()
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, level, logging.ERROR),
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help, or a usage error already reported
        return int(exc.code or 0)
    if getattr(args, "jobs", 1) < 1:
        _diagnose("usage", message="--jobs must be >= 1")
        return EXIT_PARSE
    try:
        return args.func(args)
    except InputError as exc:
        _diagnose("parse", message=str(exc))
        return EXIT_PARSE
    except (ValueError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        _diagnose("degenerate", type=type(exc).__name__, message=str(exc))
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
