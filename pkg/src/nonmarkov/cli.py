"""Command-line front end: JSON experiment configs in, CSV/JSON artifacts out.

Exit codes: 0 success, 1 config error, 2 numerical-convergence failure,
3 failed check suite.  Output files are written atomically
(temp-then-rename) and are byte-identical for identical config + seed.
``NONMARKOV_THREADS`` caps worker parallelism (default: all cores).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from . import dephasing, measures, oracle
from .dephasing import (
    BudgetError,
    DephasingParams,
    QuadratureConfig,
    QuadratureConvergenceError,
    TruncationError,
)
from .measures import negative_decrement_integral, positive_increment_integral
from .states import SystemPartition, pure_state, random_pure_state

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_CHECK_FAILED = 3

MODES = ("phase_factors", "cmi", "measures", "check")


class ConfigError(ValueError):
    pass


def worker_count() -> int:
    env = os.environ.get("NONMARKOV_THREADS")
    if env is not None:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"NONMARKOV_THREADS must be an integer, got {env!r}") from exc
        if n < 1:
            raise ConfigError("NONMARKOV_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".nonmarkov-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _require(cfg: dict, key: str, kind=None):
    if key not in cfg:
        raise ConfigError(f"missing config key {key!r}")
    val = cfg[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"config key {key!r} has wrong type {type(val).__name__}")
    return val


def parse_dephasing(cfg: dict) -> DephasingParams:
    known = {
        "omega_c", "r", "alpha1", "alpha2", "eps1", "eps2",
        "t1s", "t1f", "t2s", "t2f", "env_kind", "u", "quad",
    }
    unknown = set(cfg) - known
    if unknown:
        raise ConfigError(f"unknown dephasing keys {sorted(unknown)}")
    quad_cfg = cfg.get("quad", {})
    try:
        quad = QuadratureConfig(
            abscissas=int(quad_cfg.get("abscissas", 16)),
            cutoff_mult=float(quad_cfg.get("cutoff_mult", 60.0)),
            rel_tol=float(quad_cfg.get("rel_tol", 1e-8)),
            max_doublings=int(quad_cfg.get("max_doublings", 8)),
        )
        return DephasingParams(
            omega_c=float(_require(cfg, "omega_c")),
            r=float(cfg.get("r", 0.0)),
            alpha1=float(cfg.get("alpha1", 1.0)),
            alpha2=float(cfg.get("alpha2", 1.0)),
            eps1=float(cfg.get("eps1", 0.0)),
            eps2=float(cfg.get("eps2", 0.0)),
            t1s=float(cfg.get("t1s", 0.0)),
            t1f=float(cfg.get("t1f", 2.5)),
            t2s=float(cfg.get("t2s", 2.5)),
            t2f=float(cfg.get("t2f", 5.0)),
            env_kind=str(cfg.get("env_kind", "entangled")),
            u=None if cfg.get("u") is None else float(cfg["u"]),
            quad=quad,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid dephasing parameters: {exc}") from exc


def parse_grid(cfg: dict) -> np.ndarray:
    t0 = float(_require(cfg, "t_start"))
    t1 = float(_require(cfg, "t_end"))
    dt = float(_require(cfg, "dt"))
    if dt <= 0 or t1 < t0:
        raise ConfigError("grid needs dt > 0 and t_end >= t_start")
    n = int(round((t1 - t0) / dt))
    return np.round(t0 + dt * np.arange(n + 1), 12)


def _complex_list(spec, length: int, what: str) -> np.ndarray:
    try:
        arr = np.array([complex(re, im) for re, im in spec])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be a list of [re, im] pairs") from exc
    if arr.size != length:
        raise ConfigError(f"{what} must have {length} entries")
    return arr


_AS_PARTITION = SystemPartition([("A", 2), ("S1", 2), ("S2", 2)])


def parse_candidate(spec: dict, seed: int):
    """Returns ("as", DensityMatrix) or ("pair", (amps1, amps2))."""
    kind = _require(spec, "kind", str)
    if kind == "ops_state":
        return ("as", measures.ops_state())
    if kind == "random":
        sub_seed = int(spec.get("seed", seed))
        return ("as", random_pure_state(_AS_PARTITION, sub_seed))
    if kind == "flagged":
        amps = _complex_list(_require(spec, "amplitudes"), len(spec["amplitudes"]), "amplitudes")
        idx = [int(i) for i in _require(spec, "system_indices")]
        sys_part = SystemPartition([("S1", 2), ("S2", 2)])
        return ("as", measures.flagged_ancilla_state(amps, idx, sys_part))
    if kind == "tsio":
        a1 = _complex_list(_require(spec, "state1"), 4, "state1")
        a2 = _complex_list(_require(spec, "state2"), 4, "state2")
        for a in (a1, a2):
            n = np.linalg.norm(a)
            if abs(n - 1.0) > 1e-9:
                raise ConfigError("tsio states must be normalized amplitude vectors")
        return ("pair", (a1 / np.linalg.norm(a1), a2 / np.linalg.norm(a2)))
    raise ConfigError(f"unknown candidate kind {kind!r}")


# ---------------------------------------------------------------------------
# modes


def _run_phase_factors(cfg: dict) -> str:
    params = parse_dephasing(_require(cfg, "dephasing", dict))
    times = parse_grid(_require(cfg, "grid", dict))
    grid = dephasing.phase_factor_grid(params, times)
    lines = ["t,|k1|,|k2|,|k1t|,|k2t|,|k12|,|lam12|,env_kind"]
    for i, t in enumerate(times):
        mags = [np.abs(grid[k][i]) for k in ("k1", "k2", "k1t", "k2t", "k12", "lam12")]
        lines.append(",".join([_fmt(t)] + [_fmt(m) for m in mags] + [params.env_kind]))
    return "\n".join(lines) + "\n"


def _build_model(cfg: dict) -> dephasing.DiscreteDephasingModel:
    params = parse_dephasing(_require(cfg, "dephasing", dict))
    disc = _require(cfg, "discrete", dict)
    return dephasing.build_discrete_model(
        params, int(_require(disc, "n_modes")), int(_require(disc, "n_max"))
    )


def _as_candidates(cfg: dict, seed: int) -> list:
    specs = cfg.get("candidates", [{"kind": "ops_state"}])
    out = []
    for spec in specs:
        kind, val = parse_candidate(spec, seed)
        if kind == "as":
            out.append(val)
    return out


def _run_cmi(cfg: dict) -> str:
    model = _build_model(cfg)
    times = parse_grid(_require(cfg, "grid", dict))
    cands = _as_candidates(cfg, int(cfg.get("seed", 0)))
    if not cands:
        raise ConfigError("cmi mode needs at least one system-ancilla candidate")
    comp = dephasing.BranchComputer(model, cands[0], budget=int(cfg.get("budget", 4096)))
    series = comp.trajectories(times, env_parts=("E1", "E2", "E1E2"), with_mi=False)
    lines = ["t,I_A_E1_S,I_A_E2_S,I_A_E1E2_S,env_kind"]
    for i, t in enumerate(times):
        vals = [series[p].values[i] for p in ("E1", "E2", "E1E2")]
        lines.append(",".join([_fmt(t)] + [_fmt(v) for v in vals] + [model.env_kind]))
    return "\n".join(lines) + "\n"


def _run_measures(cfg: dict) -> str:
    seed = int(cfg.get("seed", 0))
    params = parse_dephasing(_require(cfg, "dephasing", dict))
    times = parse_grid(_require(cfg, "grid", dict))
    specs = cfg.get("candidates", [{"kind": "ops_state"}])
    as_cands = []
    pair_cands = []
    for spec in specs:
        kind, val = parse_candidate(spec, seed)
        (as_cands if kind == "as" else pair_cands).append(val)
    if not pair_cands:
        # default optimal-style orthogonal pair with maximal S1-S2 coherence
        plus = np.array([0, 1, 1, 0]) / math.sqrt(2.0)
        minus = np.array([0, 1, -1, 0]) / math.sqrt(2.0)
        pair_cands = [(plus, minus)]

    rows: list[tuple[str, float, int, int]] = []

    # distance measures over dephasing-channel pair trajectories
    sys_part = SystemPartition([("S1", 2), ("S2", 2)])
    pair_trajs = []
    for a1, a2 in pair_cands:
        t1 = dephasing.system_trajectory(params, _pure_system(a1, sys_part), times)
        t2 = dephasing.system_trajectory(params, _pure_system(a2, sys_part), times)
        pair_trajs.append((t1, t2))
    for dist in ("trace", "telescopic"):
        res = measures.measure_distance_blp(pair_trajs, distance=dist)
        rows.append((res.measure_name, res.value, res.best_candidate_index,
                     int(np.count_nonzero(res.increments.values))))

    # information measures over discrete-model candidates
    if as_cands:
        model = _build_model(cfg)
        budget = int(cfg.get("budget", 4096))

        def one(cand):
            comp = dephasing.BranchComputer(model, cand, budget=budget)
            series = comp.trajectories(times, env_parts=("E1E2",), with_mi=True)
            return series

        with ThreadPoolExecutor(max_workers=worker_count()) as pool:
            all_series = list(pool.map(one, as_cands))
        lfs = [positive_increment_integral(s["mi_sa"]) for s in all_series]
        n1 = [negative_decrement_integral(s["E1E2"]) for s in all_series]
        i_lfs = int(np.argmax([v for v, _ in lfs]))
        i_n1 = int(np.argmax([v for v, _ in n1]))
        rows.append(("LFS", lfs[i_lfs][0], i_lfs, int(np.count_nonzero(lfs[i_lfs][1].values))))
        rows.append(("N1", n1[i_n1][0], i_n1, int(np.count_nonzero(n1[i_n1][1].values))))
        if cfg.get("include_n2", False):
            # product primed ancilla: conditioning is idle and N2 reduces to N1
            rows.append(("N2", n1[i_n1][0], i_n1, int(np.count_nonzero(n1[i_n1][1].values))))

    lines = ["measure,value,best_candidate,increment_count"]
    for name, value, best, count in rows:
        lines.append(f"{name},{_fmt(value)},{best},{count}")
    return "\n".join(lines) + "\n"


def _pure_system(amps: np.ndarray, part: SystemPartition):
    return pure_state(amps, part)


def _run_check(cfg: dict) -> tuple[str, bool]:
    seed = int(cfg.get("seed", 0))
    samples = int(cfg.get("check", {}).get("samples", 100))
    reports = [
        oracle.identity_suite(seed, samples),
        oracle.special_function_suite(seed),
    ]
    # small fixed dephasing cross-check, both environment kinds
    for kind in ("entangled", "classical"):
        params = DephasingParams(
            omega_c=0.25, r=0.5, env_kind=kind, t1s=0.0, t1f=2.5, t2s=2.5, t2f=5.0
        )
        model = dephasing.build_discrete_model(params, n_modes=1, n_max=6)
        reports.append(
            oracle.dense_dephasing_check(model, measures.ops_state(), [0.0, 1.5, 3.0, 5.0])
        )
    payload = {
        "seed": seed,
        "all_passed": all(r.all_passed for r in reports),
        "suites": [r.to_dict() for r in reports],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n", payload["all_passed"]


def run(config_path: str) -> int:
    """Execute one experiment config; returns the process exit code."""
    try:
        with open(config_path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        mode = _require(cfg, "mode", str)
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        output_path = _require(cfg, "output_path", str)
        if mode == "phase_factors":
            text = _run_phase_factors(cfg)
        elif mode == "cmi":
            text = _run_cmi(cfg)
        elif mode == "measures":
            text = _run_measures(cfg)
        else:
            text, ok = _run_check(cfg)
            _atomic_write(output_path, text)
            if not ok:
                print("error: check suite reported failures", file=sys.stderr)
                return EXIT_CHECK_FAILED
            return EXIT_OK
        _atomic_write(output_path, text)
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureConvergenceError, TruncationError, BudgetError) as exc:
        print(f"error: numerical convergence failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nonmarkov",
        description="Information-measure non-Markovianity experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a JSON experiment config")
    p_run.add_argument("config", help="path to the config file")
    p_check = sub.add_parser("check", help="run the verification suites")
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--samples", type=int, default=100)
    p_check.add_argument("--output", default="check_report.json")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config)
    cfg = {
        "mode": "check",
        "seed": args.seed,
        "check": {"samples": args.samples},
        "output_path": args.output,
    }
    try:
        text, ok = _run_check(cfg)
    except (QuadratureConvergenceError, TruncationError, BudgetError) as exc:
        print(f"error: numerical convergence failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _atomic_write(args.output, text)
    print(("all checks passed" if ok else "CHECK FAILURES"), "->", args.output)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
